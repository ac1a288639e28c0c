use std::path::Path;

use anyhow::{Context, Result};
use kantorel::casebook::{
    coupled_simulate, describe, mixing_curve, uniformity_check, CaseStudy, MixMode, SimOptions, CASES,
};
use kantorel::config::Config;
use kantorel::lang::ast::Command as Cmd;
use kantorel::lang::{eval_relexp, expr_to_string, parse_program, Ctx};
use kantorel::num::{fmt_rat, rat_to_f64, Ext};
use kantorel::report::Verdict;
use kantorel::rpe::{check_async_invariant, check_invariant, rpe_with_specs, PairMode, PairSpace};
use kantorel::semantics::{denote, denote_exact, Status, SubDist};
use kantorel::state::State;
use kantorel::transport::{kantorovich, kantorovich_f64};
use kantorel::wpe::{certify_omega, omega_report, reachable_states, tv_lower_bound, wpe_exact};
use serde::Serialize;

use crate::input::{self, usage, Subject};
use crate::output::{self, columns, csv_rows, ext, report_table, to_csv, verdict_code, Outcome};
use crate::{CasesAction, Command, Global, Mode, PairArgs, Target};

pub fn dispatch(cmd: Command, g: &Global) -> Result<Outcome> {
    let cfg = input::config(g);
    match cmd {
        Command::Run { program, state, project } => run(&program, &state, project.as_deref(), &cfg),
        Command::Dist { a, b, state, s1, s2, d1, d2, cost, project, plan } => {
            let inputs = DistInputs { a, b, state, s1, s2, d1, d2 };
            dist(inputs, &cost, project.as_deref(), plan, g, &cfg)
        }
        Command::Rpe { target, exp, couplings, pairs } => rpe(&target, exp.as_deref(), couplings.as_deref(), &pairs, &cfg),
        Command::CheckInv { target, exp, inv, couplings, pairs } => {
            check_loop(PairMode::Sync, &target, exp.as_deref(), inv.as_deref(), couplings.as_deref(), &pairs, &cfg)
        }
        Command::CheckAsync { target, exp, inv, couplings, pairs } => {
            check_loop(PairMode::Async, &target, exp.as_deref(), inv.as_deref(), couplings.as_deref(), &pairs, &cfg)
        }
        Command::CheckOmega { target, f, family, limit, states } => check_omega(&target, &f, &family, &limit, &states, &cfg),
        Command::Wpe { program, f, states } => wpe(&program, &f, &states, &cfg),
        Command::LowerBound { target, f, pairs } => lower_bound(&target, &f, &pairs, &cfg),
        Command::Mix { case, ks, simulate, trials } => {
            let c = input::need_case(&case)?;
            let mode = if simulate { MixMode::Simulated { trials, seed: g.seed } } else { MixMode::Exact };
            mix(&c, ks.as_deref(), mode, &cfg)
        }
        Command::Uniformity { case } => uniformity(&input::need_case(&case)?, &cfg),
        Command::Simulate { target, exp, couplings, pairs, trials, keep_traces } => {
            let opts = SimOptions { trials, seed: g.seed, keep_traces };
            simulate(&target, exp.as_deref(), couplings.as_deref(), &pairs, &opts, &cfg)
        }
        Command::Cases { action: CasesAction::List } => cases_list(),
        Command::Cases { action: CasesAction::Show { case } } => cases_show(&input::need_case(&case)?),
    }
}

fn project(d: &SubDist, vars: &Option<Vec<String>>) -> SubDist {
    match vars {
        Some(v) => d.project(&v.iter().map(|s| s.as_str()).collect::<Vec<_>>()),
        None => d.clone(),
    }
}

#[derive(Serialize)]
struct Entry {
    state: State,
    probability: String,
    probability_float: f64,
}

#[derive(Serialize)]
struct RunReport {
    status: Status,
    mass: String,
    residual: String,
    iterations: usize,
    entries: Vec<Entry>,
}

fn run(program: &Path, state: &str, vars: Option<&str>, cfg: &Config) -> Result<Outcome> {
    let p = input::program(program)?;
    let d = denote(&p.body, &input::state(state)?, cfg)?;
    let dist = project(&d.dist, &input::projection(vars));
    let entries: Vec<Entry> = dist
        .iter()
        .map(|(s, q)| Entry { state: s.clone(), probability: fmt_rat(q), probability_float: rat_to_f64(q) })
        .collect();
    let rows: Vec<Vec<String>> =
        entries.iter().map(|e| vec![e.state.to_string(), e.probability.clone(), e.probability_float.to_string()]).collect();
    let header = ["state", "probability", "probability_float"];
    let mut table = columns(&header, &rows);
    table.push_str(&format!(
        "status {:?}, mass {}, residual {}\n",
        d.status,
        output::rat(dist.mass()),
        output::rat(&d.residual)
    ));
    let report = RunReport {
        status: d.status,
        mass: fmt_rat(dist.mass()),
        residual: fmt_rat(&d.residual),
        iterations: d.iterations,
        entries,
    };
    let code = if d.status == Status::BudgetExceeded { output::INCONCLUSIVE } else { output::HOLDS };
    Ok(Outcome::new("run", &report, table)?.csv(csv_rows(&header, &rows)?).code(code))
}

struct DistInputs {
    a: Option<std::path::PathBuf>,
    b: Option<std::path::PathBuf>,
    state: Option<String>,
    s1: Option<String>,
    s2: Option<String>,
    d1: Option<String>,
    d2: Option<String>,
}

#[derive(Serialize)]
struct PlanRow {
    left: State,
    right: State,
    probability: String,
    probability_float: f64,
}

#[derive(Serialize)]
struct DistReport {
    mode: &'static str,
    value: String,
    value_float: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    plan: Option<Vec<PlanRow>>,
}

fn inline_dist(src: &str) -> Result<(SubDist, kantorel::lang::Program)> {
    let p = parse_program(&format!("x :~ {src}")).with_context(|| format!("inline distribution `{src}`"))?;
    let d = denote_exact(&p.body, &State::new(), &Config::sequential())?;
    Ok((d, p))
}

fn dist(inp: DistInputs, cost: &str, vars: Option<&str>, want_plan: bool, g: &Global, cfg: &Config) -> Result<Outcome> {
    let (mu1, mu2, p) = match (&inp.d1, &inp.d2, &inp.a) {
        (Some(d1), Some(d2), None) => {
            let (mu1, p) = inline_dist(d1)?;
            (mu1, inline_dist(d2)?.0, p)
        }
        (None, None, Some(a)) => {
            let pa = input::program(a)?;
            let pb = match &inp.b {
                Some(b) => input::program(b)?,
                None => pa.clone(),
            };
            let Some(s1) = inp.s1.as_ref().or(inp.state.as_ref()) else {
                return usage("give --state, or --s1 and --s2");
            };
            let s2 = inp.s2.as_ref().or(inp.state.as_ref()).unwrap_or(s1);
            let mu1 = denote_exact(&pa.body, &input::state(s1)?, cfg)?;
            let mu2 = denote_exact(&pb.body, &input::state(s2)?, cfg)?;
            (mu1, mu2, pa)
        }
        _ => return usage("give one or two programs, or both --d1 and --d2"),
    };
    let vars = input::projection(vars);
    let (mu1, mu2) = (project(&mu1, &vars), project(&mu2, &vars));
    let relexp = match cost {
        "discrete" => None,
        c => Some(input::relexp(&p, c)?),
    };
    let cost_fn = |a: &State, b: &State| match &relexp {
        None => Ok(if a == b { Ext::zero() } else { Ext::one() }),
        Some(e) => eval_relexp(e, a, b),
    };
    let report = match g.mode {
        Mode::Float => {
            let v = kantorovich_f64(&mu1, &mu2, cost_fn, g.epsilon)?;
            let value_float = v.unwrap_or(f64::INFINITY);
            let value = v.map_or("inf".to_string(), |x| x.to_string());
            DistReport { mode: "float", value, value_float, plan: None }
        }
        Mode::Exact => {
            let (v, plan) = kantorovich(&mu1, &mu2, cost_fn)?;
            let plan = plan.filter(|_| want_plan).map(|pl| {
                pl.joint
                    .iter()
                    .map(|(a, b, q)| PlanRow {
                        left: a.clone(),
                        right: b.clone(),
                        probability: fmt_rat(q),
                        probability_float: rat_to_f64(q),
                    })
                    .collect::<Vec<_>>()
            });
            DistReport { mode: "exact", value: v.to_string(), value_float: v.to_f64(), plan }
        }
    };
    let mut table = format!("distance {} ({})\n", report.value, report.value_float);
    let plan_rows: Vec<Vec<String>> = report
        .plan
        .iter()
        .flatten()
        .map(|r| vec![r.left.to_string(), r.right.to_string(), r.probability.clone(), r.probability_float.to_string()])
        .collect();
    let plan_header = ["left", "right", "probability", "probability_float"];
    let csv = if report.plan.is_some() {
        table.push_str(&columns(&plan_header, &plan_rows));
        csv_rows(&plan_header, &plan_rows)?
    } else {
        csv_rows(&["value", "value_float"], &[vec![report.value.clone(), report.value_float.to_string()]])?
    };
    Ok(Outcome::new("dist", &report, table)?.csv(csv))
}

fn pair_rows(entries: &[((State, State), Ext)]) -> Vec<Vec<String>> {
    entries.iter().map(|((a, b), v)| vec![a.to_string(), b.to_string(), v.to_string(), v.to_f64().to_string()]).collect()
}

fn rpe(target: &Target, exp: Option<&str>, couplings: Option<&str>, pairs: &PairArgs, cfg: &Config) -> Result<Outcome> {
    let subject = Subject::resolve(target)?;
    let e = subject.distance(exp)?;
    let specs = subject.specs(couplings)?;
    let pairs = subject.pairs(pairs)?;
    let t = rpe_with_specs(&subject.program().body, &e, &specs, &pairs, cfg)?;
    let header = ["s1", "s2", "value", "value_float"];
    let rows = pair_rows(&t.entries);
    let mut table = columns(&header, &rows);
    if t.lower_approx {
        table.push_str("some loop fixpoint stopped early: the values are lower approximations\n");
    }
    let code = if t.lower_approx { output::INCONCLUSIVE } else { output::HOLDS };
    Ok(Outcome::new("rpe", &t, table)?.csv(csv_rows(&header, &rows)?).code(code))
}

/// Loop, prelude and initial loop-head pairs of a subject.
fn loop_setup(subject: &Subject, pairs: &PairArgs, cfg: &Config) -> Result<(Cmd, Vec<(State, State)>)> {
    let given = input::pairs(pairs)?;
    match subject {
        Subject::Case(c) => {
            let init = if given.is_empty() { c.invariant_init()? } else { input::loop_heads(&c.prelude(), &given, cfg)? };
            Ok((c.main_loop().clone(), init))
        }
        Subject::File(p) => {
            let (prelude, lp) = input::split_loop(p)?;
            if given.is_empty() {
                return usage("give at least one --pair or a --pairs file");
            }
            Ok((lp, input::loop_heads(&prelude, &given, cfg)?))
        }
    }
}

fn check_loop(
    mode: PairMode,
    target: &Target,
    exp: Option<&str>,
    inv: Option<&str>,
    couplings: Option<&str>,
    pairs: &PairArgs,
    cfg: &Config,
) -> Result<Outcome> {
    let subject = Subject::resolve(target)?;
    let e = subject.distance(exp)?;
    let inv = match (inv, subject.as_case().and_then(|c| c.invariant.clone())) {
        (Some(i), _) => input::relexp(subject.program(), i)?,
        (None, Some(i)) => i,
        (None, None) => return usage("--inv is required"),
    };
    let specs = subject.specs(couplings)?;
    let (lp, init) = loop_setup(&subject, pairs, cfg)?;
    let space = PairSpace::explore(&lp, &init, &specs, mode, cfg)?;
    let (name, report) = match mode {
        PairMode::Sync => ("check-inv", check_invariant(&lp, &e, &inv, &specs, &space, cfg)?),
        PairMode::Async => ("check-async", check_async_invariant(&lp, &e, &inv, &specs, &space, cfg)?),
    };
    let mut table = format!("invariant {}\n", expr_to_string(&inv));
    table.push_str(&report_table(&report));
    Ok(Outcome::new(name, &report, table)?.code(verdict_code(report.verdict)))
}

#[derive(Serialize)]
struct OmegaOutput {
    verdict: Verdict,
    states: usize,
    certificate: kantorel::wpe::OmegaCertificate,
}

fn check_omega(target: &Target, f: &str, family: &str, limit: &str, states: &[String], cfg: &Config) -> Result<Outcome> {
    let subject = Subject::resolve(target)?;
    let p = subject.program();
    let f = input::unary(p, f)?;
    let family = input::family(p, family, Ctx::Unary)?;
    let limit = input::family(p, limit, Ctx::Unary)?;
    let given = states.iter().map(|s| input::state(s)).collect::<Result<Vec<_>>>()?;
    let (prelude, lp, init) = match &subject {
        Subject::Case(c) => {
            let init = if !given.is_empty() {
                given
            } else {
                match c.all_inputs() {
                    Ok(v) => v,
                    Err(_) => vec![c.canonical_inputs().0, c.canonical_inputs().1],
                }
            };
            (c.prelude(), c.main_loop().clone(), init)
        }
        Subject::File(p) => {
            if given.is_empty() {
                return usage("give at least one --state");
            }
            let (prelude, lp) = input::split_loop(p)?;
            (prelude, lp, given)
        }
    };
    let mut heads = Vec::new();
    for s in &init {
        for (t, _) in denote_exact(&prelude, s, cfg)?.iter() {
            heads.push(t.clone());
        }
    }
    let reach = reachable_states(&lp, &heads)?;
    let cert = certify_omega(&lp, &f, &family, &limit, &reach, cfg)?;
    let r = omega_report(&cert);
    let mut table = format!("{} loop-head states, n_max {}\n", reach.len(), cfg.n_max);
    table.push_str(&report_table(&cert.upper));
    table.push_str(&report_table(&cert.lower));
    table.push_str(&format!(
        "limit gap at n_max: {}\n{}: {}\n",
        cert.limit_gap.as_ref().map_or("inf".to_string(), ext),
        output::verdict_name(r.verdict),
        r.message
    ));
    let out = OmegaOutput { verdict: r.verdict, states: reach.len(), certificate: cert };
    Ok(Outcome::new("check-omega", &out, table)?.code(verdict_code(r.verdict)))
}

fn wpe(program: &Path, f: &str, states: &[String], cfg: &Config) -> Result<Outcome> {
    let p = input::program(program)?;
    let f = input::unary(&p, f)?;
    let states = states.iter().map(|s| input::state(s)).collect::<Result<Vec<_>>>()?;
    let t = wpe_exact(&p.body, &f, &states, cfg)?;
    let header = ["state", "value", "value_float"];
    let rows: Vec<Vec<String>> = t.values.iter().map(|(s, v)| vec![s.to_string(), v.to_string(), v.to_f64().to_string()]).collect();
    let mut table = columns(&header, &rows);
    if t.lower_approx {
        table.push_str("some loop fixpoint stopped early: the values are lower approximations\n");
    }
    let code = if t.lower_approx { output::INCONCLUSIVE } else { output::HOLDS };
    Ok(Outcome::new("wpe", &t, table)?.csv(csv_rows(&header, &rows)?).code(code))
}

#[derive(Serialize)]
struct BoundRow {
    s1: State,
    s2: State,
    #[serde(flatten)]
    bound: kantorel::wpe::LowerBound,
    value_float: f64,
}

fn lower_bound(target: &Target, f: &str, pairs: &PairArgs, cfg: &Config) -> Result<Outcome> {
    let subject = Subject::resolve(target)?;
    let f = input::unary(subject.program(), f)?;
    let mut out = Vec::new();
    for (s1, s2) in subject.pairs(pairs)? {
        let bound = tv_lower_bound(&subject.program().body, &s1, &s2, &f, cfg)?;
        let value_float = rat_to_f64(&bound.value);
        out.push(BoundRow { s1, s2, bound, value_float });
    }
    let header = ["s1", "s2", "lower_bound", "lower_bound_float", "wpe1", "wpe2"];
    let rows: Vec<Vec<String>> = out
        .iter()
        .map(|r| {
            vec![
                r.s1.to_string(),
                r.s2.to_string(),
                fmt_rat(&r.bound.value),
                r.value_float.to_string(),
                fmt_rat(&r.bound.wpe1),
                fmt_rat(&r.bound.wpe2),
            ]
        })
        .collect();
    Ok(Outcome::new("lower-bound", &out, columns(&header, &rows))?.csv(csv_rows(&header, &rows)?))
}

fn parse_ks(src: &str) -> Result<Vec<usize>> {
    let bad = || input::Usage(format!("bad step list `{src}`; use `0,2,4`, `0..8` or `0..=8`"));
    if let Some((lo, hi)) = src.split_once("..") {
        let lo: usize = lo.trim().parse().map_err(|_| bad())?;
        let (hi, inclusive) = match hi.strip_prefix('=') {
            Some(h) => (h, true),
            None => (hi, false),
        };
        let hi: usize = hi.trim().parse().map_err(|_| bad())?;
        return Ok(if inclusive { (lo..=hi).collect() } else { (lo..hi).collect() });
    }
    Ok(src.split(',').map(|k| k.trim().parse().map_err(|_| bad())).collect::<std::result::Result<_, _>>()?)
}

fn mix(c: &CaseStudy, ks: Option<&str>, mode: MixMode, cfg: &Config) -> Result<Outcome> {
    let ks = match ks {
        Some(s) => parse_ks(s)?,
        None => (0..=c.param_nat("K").unwrap_or(0)).collect(),
    };
    let rows = mixing_curve(c, &ks, mode, cfg)?;
    let fails = rows.iter().any(|r| {
        r.within_bound() == Some(false)
            || matches!((&r.bound, r.ci_lo), (Some(b), Some(lo)) if lo > rat_to_f64(b))
    });
    let header = ["K", "tv_exact", "bound", "tv_uniform", "mean", "ci_lo", "ci_hi"];
    let f = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.6}"));
    let table_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.k.to_string(),
                output::opt_rat(&r.tv_exact),
                output::opt_rat(&r.bound),
                output::opt_rat(&r.tv_uniform),
                f(r.mean),
                f(r.ci_lo),
                f(r.ci_hi),
            ]
        })
        .collect();
    let mut table = format!("{} with {}\n", c.name, c.params);
    table.push_str(&columns(&header, &table_rows));
    let csv = to_csv(&rows)?;
    Ok(Outcome::new("mix", &rows, table)?.csv(csv).code(if fails { output::FAILS } else { output::HOLDS }))
}

fn uniformity(c: &CaseStudy, cfg: &Config) -> Result<Outcome> {
    let k = c.param_nat("K").unwrap_or(0);
    let u = uniformity_check(c, k, cfg)?;
    let ok = u.within_bound && u.artifacts.as_ref().is_none_or(|a| a.holds());
    let mut table = format!(
        "{} N={} K={}: tv to uniform {}, bound {}\n",
        u.case,
        u.n,
        u.k,
        output::rat(&u.tv_uniform),
        u.bound.as_ref().map_or("-".to_string(), output::rat)
    );
    if let Some(a) = &u.artifacts {
        table.push_str(&report_table(a));
    }
    Ok(Outcome::new("uniformity", &u, table)?.code(if ok { output::HOLDS } else { output::FAILS }))
}

#[derive(Serialize)]
struct SimRun {
    s1: State,
    s2: State,
    #[serde(flatten)]
    summary: kantorel::casebook::SimSummary,
}

#[derive(Serialize)]
struct SimReport {
    #[serde(serialize_with = "kantorel::num::ser_opt_rat")]
    bound: Option<kantorel::Rat>,
    runs: Vec<SimRun>,
}

fn simulate(
    target: &Target,
    exp: Option<&str>,
    couplings: Option<&str>,
    pairs: &PairArgs,
    opts: &SimOptions,
    cfg: &Config,
) -> Result<Outcome> {
    let subject = Subject::resolve(target)?;
    let e = subject.distance(exp)?;
    let specs = subject.specs(couplings)?;
    let given = input::pairs(pairs)?;
    let bound = match subject.as_case() {
        Some(c) if given.is_empty() => c.analytic_bound().cloned(),
        _ => None,
    };
    let mut runs = Vec::new();
    for (s1, s2) in subject.pairs(pairs)? {
        let summary = coupled_simulate(&subject.program().body, &s1, &s2, &specs, &e, opts, cfg)?;
        runs.push(SimRun { s1, s2, summary });
    }
    let fails = bound.as_ref().is_some_and(|b| runs.iter().any(|r| r.summary.ci_lo > rat_to_f64(b)));
    let header = ["s1", "s2", "trials", "mean", "mean_float", "std_err", "ci_lo", "ci_hi", "max"];
    let rows: Vec<Vec<String>> = runs
        .iter()
        .map(|r| {
            let s = &r.summary;
            vec![
                r.s1.to_string(),
                r.s2.to_string(),
                s.trials.to_string(),
                s.mean.to_string(),
                s.mean_float.to_string(),
                s.std_err.to_string(),
                s.ci_lo.to_string(),
                s.ci_hi.to_string(),
                s.max.to_string(),
            ]
        })
        .collect();
    let mut table = columns(&header, &rows);
    if let Some(b) = &bound {
        table.push_str(&format!("analytic bound {}\n", output::rat(b)));
    }
    let report = SimReport { bound, runs };
    let code = if fails { output::FAILS } else { output::HOLDS };
    Ok(Outcome::new("simulate", &report, table)?.csv(csv_rows(&header, &rows)?).code(code))
}

#[derive(Serialize)]
struct CaseEntry {
    name: &'static str,
    description: &'static str,
}

fn cases_list() -> Result<Outcome> {
    let list: Vec<CaseEntry> = CASES.iter().map(|&name| CaseEntry { name, description: describe(name) }).collect();
    let rows: Vec<Vec<String>> = list.iter().map(|c| vec![c.name.to_string(), c.description.to_string()]).collect();
    let table = columns(&["name", "description"], &rows);
    Ok(Outcome::new("cases list", &list, table)?.csv(to_csv(&list)?))
}

#[derive(Serialize)]
struct CaseInfo {
    name: &'static str,
    params: String,
    source: String,
    distance: String,
    invariant: Option<String>,
    couplings: Vec<String>,
    #[serde(serialize_with = "kantorel::num::ser_opt_rat")]
    bound: Option<kantorel::Rat>,
}

fn cases_show(c: &CaseStudy) -> Result<Outcome> {
    let info = CaseInfo {
        name: c.name,
        params: c.params.to_string(),
        source: c.source.clone(),
        distance: expr_to_string(&c.distance),
        invariant: c.invariant.as_ref().map(expr_to_string),
        couplings: c.specs.iter().map(|(site, s)| format!("#{site} : {s}")).collect(),
        bound: c.analytic_bound().cloned(),
    };
    let mut table = format!("{} ({})\n\n{}\n\ndistance: {}\n", info.name, info.params, info.source.trim_end(), info.distance);
    if let Some(i) = &info.invariant {
        table.push_str(&format!("invariant: {i}\n"));
    }
    for s in &info.couplings {
        table.push_str(&format!("coupling {s}\n"));
    }
    if let Some(b) = &info.bound {
        table.push_str(&format!("analytic bound: {}\n", output::rat(b)));
    }
    Outcome::new("cases show", &info, table)
}
