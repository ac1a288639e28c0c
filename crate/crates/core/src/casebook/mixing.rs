use num_traits::{One, Zero};
use serde::Serialize;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::lang::ast::{Command, Expr};
use crate::lang::eval::eval_relexp;
use crate::lang::{parse_relexp, signature};
use crate::num::{ser_opt_rat, ser_rat, Ext, Rat};
use crate::report::{CheckReport, Witness};
use crate::rpe::{rpe_spec_at, Engine};
use crate::semantics::{denote_exact, SubDist};
use crate::state::{State, Value};
use crate::transport::tv;
use crate::wpe::tv_lower_bound;

use super::cases::{all_perms, exact_limit, CaseKind, CaseStudy};
use super::simulate::{coupled_simulate, wilson, SimOptions, Z95};

/// Largest `N` for which every ordered pair of start states is compared.
pub const ALL_PAIRS_LIMIT: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MixMode {
    Exact,
    /// Probability that the coupled runs have not met, a Monte-Carlo upper
    /// bound on the distance, with Wilson intervals.
    Simulated { trials: usize, seed: u64 },
}

/// One row of a mixing curve; also the CSV row of the CLI.
#[derive(Clone, Debug, Serialize)]
pub struct MixRow {
    pub case: String,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(serialize_with = "ser_opt_rat")]
    pub tv_exact: Option<Rat>,
    #[serde(serialize_with = "ser_opt_rat")]
    pub bound: Option<Rat>,
    #[serde(serialize_with = "ser_opt_rat")]
    pub tv_uniform: Option<Rat>,
    pub trials: Option<usize>,
    pub mean: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    pub seed: Option<u64>,
    /// Start inputs attaining `tv_exact`.
    #[serde(skip)]
    pub worst: Option<(State, State)>,
}

impl MixRow {
    fn empty(case: &CaseStudy, n: usize, k: usize) -> MixRow {
        MixRow {
            case: case.name.to_string(),
            n,
            k,
            tv_exact: None,
            bound: case.bound_at(k),
            tv_uniform: None,
            trials: None,
            mean: None,
            ci_lo: None,
            ci_hi: None,
            seed: None,
            worst: None,
        }
    }

    /// Exact distance within the analytic bound.
    pub fn within_bound(&self) -> Option<bool> {
        Some(self.tv_exact.as_ref()? <= self.bound.as_ref()?)
    }
}

fn require_mixing(case: &CaseStudy) -> Result<usize> {
    match case.kind {
        CaseKind::Bits | CaseKind::Perm => Ok(case.param_nat("N").unwrap_or(0)),
        _ => Err(Error::Precondition(format!(
            "mixing curves are defined for the hypercube and shuffle cases, not {}",
            case.name
        ))),
    }
}

fn observed(case: &CaseStudy) -> Vec<&str> {
    case.observed.iter().map(|s| s.as_str()).collect()
}

/// Output distribution of the case from `input` with `K = k`, restricted to
/// the observed variables.
pub fn output_at(case: &CaseStudy, input: &State, k: usize, cfg: &Config) -> Result<SubDist> {
    let s = input.with("K", Value::int(k as i64));
    Ok(denote_exact(&case.program.body, &s, cfg)?.project(&observed(case)))
}

/// Uniform distribution over every observed state of the case.
pub fn uniform_target(case: &CaseStudy) -> Result<SubDist> {
    let obs = observed(case);
    Ok(SubDist::uniform(case.all_inputs()?.iter().map(|s| s.project(&obs)).collect()))
}

/// Start inputs of the worst-pair search: all of them for small `N`, the
/// canonical pair (complementary bitvectors, reversed decks) above that.
fn starts(case: &CaseStudy, n: usize) -> Result<(Vec<State>, Vec<(usize, usize)>)> {
    if n > exact_limit(case.kind) {
        return Err(Error::StateSpace(format!(
            "{} with N = {n} exceeds the exact limit N <= {}; use simulated mode",
            case.name,
            exact_limit(case.kind)
        )));
    }
    if n <= ALL_PAIRS_LIMIT {
        let all = case.all_inputs()?;
        let m = all.len();
        let pairs = (0..m).flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j))).collect();
        return Ok((all, pairs));
    }
    let (a, b) = case.canonical_inputs();
    Ok((vec![a, b], vec![(0, 1)]))
}

/// Worst-pair distance, analytic bound and distance to uniform for every
/// `K` in `ks`.
pub fn mixing_curve(case: &CaseStudy, ks: &[usize], mode: MixMode, cfg: &Config) -> Result<Vec<MixRow>> {
    let n = require_mixing(case)?;
    match mode {
        MixMode::Exact => {
            let (inputs, pairs) = starts(case, n)?;
            let target = uniform_target(case)?;
            let canon = case.canonical_inputs().0;
            crate::par::try_map(cfg.parallel, ks, |&k| {
                let seq = Config { parallel: false, ..cfg.clone() };
                let outs = inputs.iter().map(|s| output_at(case, s, k, &seq)).collect::<Result<Vec<_>>>()?;
                let mut best: Option<(Rat, usize, usize)> = None;
                for &(i, j) in &pairs {
                    let d = tv(&outs[i], &outs[j]);
                    if best.as_ref().is_none_or(|b| d > b.0) {
                        best = Some((d, i, j));
                    }
                }
                let mut row = MixRow::empty(case, n, k);
                if let Some((d, i, j)) = best {
                    row.tv_exact = Some(d);
                    row.worst = Some((inputs[i].clone(), inputs[j].clone()));
                }
                row.tv_uniform = Some(tv(&output_at(case, &canon, k, &seq)?, &target));
                Ok(row)
            })
        }
        MixMode::Simulated { trials, seed } => {
            let var = case.array_var().unwrap_or("pos");
            let sig = signature(&case.program)?;
            let meet = parse_relexp(&format!("[{var}<1> != {var}<2>]"), &sig)?;
            let (a, b) = case.canonical_inputs();
            let opts = SimOptions { trials, seed, keep_traces: 0 };
            ks.iter()
                .map(|&k| {
                    let kv = Value::int(k as i64);
                    let s = coupled_simulate(&case.program.body, &a.with("K", kv.clone()), &b.with("K", kv), &case.specs, &meet, &opts, cfg)?;
                    let hits = (s.mean_float * trials as f64).round() as usize;
                    let (lo, hi) = wilson(hits, trials, Z95);
                    let mut row = MixRow::empty(case, n, k);
                    row.trials = Some(trials);
                    row.mean = Some(s.mean_float);
                    row.ci_lo = Some(lo);
                    row.ci_hi = Some(hi);
                    row.seed = Some(seed);
                    Ok(row)
                })
                .collect()
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct UniformityReport {
    pub case: String,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(serialize_with = "ser_rat")]
    pub tv_uniform: Rat,
    #[serde(serialize_with = "ser_opt_rat")]
    pub bound: Option<Rat>,
    pub within_bound: bool,
    /// Check that the permutation distance dominates the difference of the
    /// indicator functions of matching targets; shuffle cases only.
    pub artifacts: Option<CheckReport>,
}

/// Distance to the uniform distribution from the canonical start after `k`
/// steps, against the case's analytic bound.
pub fn uniformity_check(case: &CaseStudy, k: usize, cfg: &Config) -> Result<UniformityReport> {
    let n = require_mixing(case)?;
    if n > exact_limit(case.kind) {
        return Err(Error::StateSpace(format!("{} with N = {n} is too large for the exact uniformity check", case.name)));
    }
    let canon = case.canonical_inputs().0;
    let d = tv(&output_at(case, &canon, k, cfg)?, &uniform_target(case)?);
    let bound = case.bound_at(k);
    let within_bound = bound.as_ref().is_none_or(|b| &d <= b);
    let artifacts = match case.kind {
        CaseKind::Perm => Some(uniformity_artifacts(n)),
        _ => None,
    };
    Ok(UniformityReport { case: case.name.to_string(), n, k, tv_uniform: d, bound, within_bound, artifacts })
}

/// `sum_i [deck2[i] != pi(deck1[i])]`: positions whose pair of cards is
/// outside the relation given by the permutation `pi`.
pub fn perm_distance(deck1: &[usize], deck2: &[usize], pi: &[usize]) -> usize {
    deck1.iter().zip(deck2).filter(|(a, b)| pi[**a] != **b).count()
}

fn deck_state(name: &str, d: &[usize], pi: &[usize]) -> State {
    let v = |xs: &[usize]| Value::ints(&xs.iter().map(|&x| x as i64).collect::<Vec<_>>());
    State::from_pairs([(name, v(d)), ("pi", v(pi))])
}

/// For every relation `pi`, deck pair and target `R`: the distance
/// `perm_distance(deck1, deck2, pi)` is at least
/// `|[deck1 = R] - [deck2 = pi . R]|`. Exhaustive for `N <= 4`; above that
/// the first deck is the identity.
pub fn uniformity_artifacts(n: usize) -> CheckReport {
    let perms = all_perms(n);
    let firsts: Vec<&Vec<usize>> = if n <= ALL_PAIRS_LIMIT { perms.iter().collect() } else { vec![&perms[0]] };
    let mut r = CheckReport::new("uniformity_artifacts");
    for pi in &perms {
        for d1 in &firsts {
            for d2 in &perms {
                let d = perm_distance(d1, d2, pi);
                let worst = perms
                    .iter()
                    .map(|t| {
                        let image: Vec<usize> = t.iter().map(|&c| pi[c]).collect();
                        ((*d1 == t) as i64 - (**d2 == image) as i64).unsigned_abs() as usize
                    })
                    .max()
                    .unwrap_or(0);
                let ok = d >= worst;
                r.record(ok, d > worst, || {
                    Witness::pair(
                        &deck_state("deck", d1, pi),
                        &deck_state("deck", d2, pi),
                        Ext::from_int(worst as i64),
                        Ext::from_int(d as i64),
                    )
                });
            }
        }
    }
    r.finish()
}

fn loop_body(lp: &Command) -> Result<&Command> {
    match lp {
        Command::While { body, .. } => Ok(body),
        _ => Err(Error::Precondition("expected a while loop".into())),
    }
}

/// One riffle step under the same-bits-per-card coupling halves the block
/// distance in expectation: `E_b[dBD(after)] <= dBD / 2`, over every
/// ordered pair of decks and all `2^N` bitvectors.
pub fn riffle_halving(case: &CaseStudy, cfg: &Config) -> Result<CheckReport> {
    if case.name != "riffle" {
        return Err(Error::Precondition("the halving check applies to the riffle case".into()));
    }
    let body = loop_body(case.main_loop())?;
    let sig = signature(&case.program)?;
    let e = parse_relexp("dBD(deck<1>, deck<2>)", &sig)?;
    let heads = case.all_inputs()?.iter().map(|s| case.loop_head(s)).collect::<Result<Vec<_>>>()?;
    let pairs: Vec<(State, State)> = heads.iter().flat_map(|a| heads.iter().map(move |b| (a.clone(), b.clone()))).collect();
    let half = Rat::one() / Rat::from_integer(2.into());
    let rows = crate::par::try_map(cfg.parallel, &pairs, |(s1, s2)| {
        let lhs = rpe_spec_at(body, &e, &case.specs, s1, s2, cfg)?;
        let rhs = eval_relexp(&e, s1, s2)?.mul_rat(&half);
        Ok((lhs, rhs))
    })?;
    let mut r = CheckReport::new("riffle_halving");
    for ((s1, s2), (lhs, rhs)) in pairs.iter().zip(rows) {
        r.record(lhs <= rhs, lhs < rhs, || Witness::pair(s1, s2, lhs, rhs));
    }
    Ok(r.finish())
}

/// Lower bound, exact distance and rpe-derived upper bound at one pair.
#[derive(Clone, Debug, Serialize)]
pub struct Sandwich {
    #[serde(serialize_with = "ser_rat")]
    pub lower: Rat,
    #[serde(serialize_with = "ser_rat")]
    pub tv: Rat,
    pub upper: Ext,
}

impl Sandwich {
    pub fn holds(&self) -> bool {
        self.lower <= self.tv && Ext::Fin(self.tv.clone()) <= self.upper
    }
}

/// `|wpe(c, f)(s1) - wpe(c, f)(s2)| <= tv <= rpe(c, E)(s1, s2) / rho` for
/// the canonical inputs with `K = k`, where `f` must take values in `[0, 1]`.
pub fn sandwich(case: &CaseStudy, f: &Expr, k: usize, cfg: &Config) -> Result<Sandwich> {
    require_mixing(case)?;
    let (a, b) = case.canonical_inputs();
    let kv = Value::int(k as i64);
    let (a, b) = (a.with("K", kv.clone()), b.with("K", kv));
    let body = &case.program.body;
    let lower = tv_lower_bound(body, &a, &b, f, cfg)?.value;
    let obs = observed(case);
    let d = tv(&denote_exact(body, &a, cfg)?.project(&obs), &denote_exact(body, &b, cfg)?.project(&obs));
    let engine = Engine::with_specs(cfg, &case.specs);
    let rpe = engine.pre(body, &|x: &State, y: &State| eval_relexp(&case.distance, x, y), &a, &b)?;
    let upper = if case.rho.is_zero() { Ext::Inf } else { rpe.mul_rat(&(Rat::one() / &case.rho)) };
    Ok(Sandwich { lower, tv: d, upper })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_relation_on_equal_decks_is_zero() {
        assert_eq!(perm_distance(&[2, 0, 1], &[2, 0, 1], &[0, 1, 2]), 0);
        assert_eq!(perm_distance(&[0, 1, 2], &[1, 0, 2], &[0, 1, 2]), 2);
    }

    #[test]
    fn artifacts_hold_for_three_cards() {
        assert!(uniformity_artifacts(3).holds());
    }
}
