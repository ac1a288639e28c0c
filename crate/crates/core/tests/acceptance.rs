//! Acceptance suite: one line per criterion, nonzero exit on any failure.
//!
//! Expected values are computed here from closed forms or by direct
//! summation, never read back from the engine under test.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use kantorel::casebook::*;
use kantorel::config::Config;
use kantorel::lang::{parse_family, parse_program, parse_relexp, parse_unary, signature, Ctx};
use kantorel::num::{fmt_rat, int, rat, rat_to_f64, Ext, Rat};
use kantorel::rpe::{
    check_rule_property, check_samp_rule, lift_exact, soundness_probe, CouplingSpec, ExpRule, PairFn,
};
use kantorel::semantics::{denote_exact, SubDist};
use kantorel::state::{State, Value};
use kantorel::transport::{kantorovich_value, tv};
use kantorel::wpe::{certify_omega, reachable_states, tv_lower_bound};
use num_traits::{One, Zero};
use rand::Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn case(name: &str, p: &str) -> Result<CaseStudy, String> {
    make_case(name, &Params::parse(p).map_err(err)?).map_err(err)
}

fn pow(q: &Rat, k: usize) -> Rat {
    (0..k).fold(Rat::one(), |acc, _| acc * q)
}

fn exact_cfg() -> Config {
    Config::default()
}

/// Non-compositionality of the exact Kantorovich pre-expectation.
fn c1() -> Outcome {
    let decl = "input b: bool, x: int, y: int;\n";
    let c = "if b then x :~ bernoulli(1/2) else y :~ bernoulli(1/2) end";
    let c2 = "if b then y :~ bernoulli(1/2) else x :~ bernoulli(1/2) end";
    let pc = parse_program(&format!("{decl}{c}")).map_err(err)?;
    let pc2 = parse_program(&format!("{decl}{c2}")).map_err(err)?;
    let both = parse_program(&format!("{decl}{c}; {c2}")).map_err(err)?;
    let e = parse_relexp("[x<1> != x<2> || y<1> != y<2>]", &signature(&both).map_err(err)?).map_err(err)?;
    let s = |b: bool| State::from_pairs([("b", Value::Bool(b)), ("x", Value::int(0)), ("y", Value::int(0))]);
    let (s1, s2) = (s(true), s(false));
    let cfg = exact_cfg();
    let post = |a: &State, b: &State| kantorel::lang::eval_relexp(&e, a, b);
    let whole = lift_exact(&both.body, &post, &s1, &s2, &cfg).map_err(err)?;
    let inner: &PairFn = &|a: &State, b: &State| lift_exact(&pc2.body, &post, a, b, &cfg);
    let nested = lift_exact(&pc.body, inner, &s1, &s2, &cfg).map_err(err)?;
    ensure(whole == Ext::zero(), || format!("whole program gives {whole}, expected 0"))?;
    ensure(nested == Ext::ratio(1, 2), || format!("nested gives {nested}, expected 1/2"))?;
    Ok(format!("rpe(c;c', E) = {whole}, rpe(c, rpe(c', E)) = {nested}"))
}

fn random_dist(r: &mut impl Rng, points: usize) -> SubDist<i64> {
    let mut w: Vec<i64> = (0..points).map(|_| r.gen_range(0..6)).collect();
    if w.iter().all(|&x| x == 0) {
        w[0] = 1;
    }
    let total: i64 = w.iter().sum();
    SubDist::from_entries(w.iter().enumerate().map(|(i, &x)| (i as i64, rat(x, total)))).unwrap()
}

/// Discrete-metric Kantorovich equals TV on full distributions.
fn c2() -> Outcome {
    let mut r = common::rng(2);
    for i in 0..200 {
        let n = r.gen_range(1..=8);
        let (a, b) = (random_dist(&mut r, n), random_dist(&mut r, n));
        let k = kantorovich_value(&a, &b, |x, y| Ok(if x == y { Ext::zero() } else { Ext::one() })).map_err(err)?;
        // TV as the total positive excess of a over b.
        let oracle: Rat = (0..n as i64).map(|x| (a.get(&x) - b.get(&x)).max(Rat::zero())).sum();
        ensure(k == Ext::Fin(oracle.clone()), || format!("pair {i}: kantorovich {k} != tv {oracle}"))?;
    }
    Ok("200 pairs, exact equality".into())
}

/// Hypercube walk upper bound from all-zeros and all-ones.
fn c3() -> Outcome {
    let n = 3;
    let cfg = exact_cfg();
    let ratio = Rat::one() - rat(2, n + 1);
    let mut worst = String::new();
    for k in 0..=8usize {
        let c = case("hwalk", &format!("N={n},K={k}"))?;
        let (a, b) = c.canonical_inputs();
        let d = tv(&output_at(&c, &a, k, &cfg).map_err(err)?, &output_at(&c, &b, k, &cfg).map_err(err)?);
        let bound = int(n) * pow(&ratio, k);
        ensure(d <= bound, || format!("K={k}: tv {} > bound {}", fmt_rat(&d), fmt_rat(&bound)))?;
        worst = format!("K=8 tv {} <= {}", fmt_rat(&d), fmt_rat(&bound));
    }
    let inv = case("hwalk", "N=3,K=8")?.check_canonical_invariant(&cfg).map_err(err)?;
    ensure(inv.holds(), || format!("invariant: {}", inv.message))?;
    Ok(format!("{worst}; invariant {}", inv.message))
}

/// Hypercube lower bound through `w_H`, the sandwich, and the omega family.
fn c4() -> Outcome {
    let cfg = exact_cfg();
    let ratio = rat(2, 4);
    for k in 1..=5usize {
        let c = case("hwalk", &format!("N=3,K={k}"))?;
        let sig = signature(&c.program).map_err(err)?;
        let f = parse_unary("wH(pos)", &sig).map_err(err)?;
        let (a, b) = c.canonical_inputs();
        let lb = tv_lower_bound(&c.program.body, &a, &b, &f, &cfg).map_err(err)?;
        let want = pow(&ratio, k);
        ensure(lb.value == want, || format!("K={k}: lower bound {} != {}", fmt_rat(&lb.value), fmt_rat(&want)))?;
        let sw = sandwich(&c, &f, k, &cfg).map_err(err)?;
        ensure(sw.holds(), || format!("K={k}: sandwich {sw:?} fails"))?;
    }
    let c = case("hwalk", "N=3,K=8")?;
    let sig = signature(&c.program).map_err(err)?;
    let f = parse_unary("wH(pos)", &sig).map_err(err)?;
    let tail = "sum(j in 0 .. monus(K, k), (1/(N+1)) * ((N-1)/(N+1))^j) + ((N-1)/(N+1))^monus(K, k) * wH(pos)";
    let family = parse_family(&format!("[K - $n <= k] * ({tail})"), &sig, Ctx::Unary).map_err(err)?;
    let limit = parse_family(tail, &sig, Ctx::Unary).map_err(err)?;
    let heads: Vec<State> = c.all_inputs().map_err(err)?.iter().map(|s| c.loop_head(s)).collect::<Result<_, _>>().map_err(err)?;
    let states = reachable_states(c.main_loop(), &heads).map_err(err)?;
    let cfg12 = Config { n_max: 12, ..exact_cfg() };
    let cert = certify_omega(c.main_loop(), &f, &family, &limit, &states, &cfg12).map_err(err)?;
    ensure(cert.upper.holds() && cert.lower.holds(), || {
        format!("omega checks: upper {}, lower {}", cert.upper.message, cert.lower.message)
    })?;
    ensure(cert.certified, || "omega limit does not match".into())?;
    Ok(format!("lower bound = (1/2)^K for K 1..5, sandwich holds, omega certified on {} states", states.len()))
}

fn mixing(name: &str, n: i64, ks: std::ops::RangeInclusive<usize>, factor: Rat, scale: Rat) -> Result<String, String> {
    let cfg = exact_cfg();
    let c = case(name, &format!("N={n},K=0"))?;
    let ks: Vec<usize> = ks.collect();
    let rows = mixing_curve(&c, &ks, MixMode::Exact, &cfg).map_err(err)?;
    for row in &rows {
        let tv = row.tv_exact.clone().ok_or("missing exact tv")?;
        let bound = &scale * pow(&factor, row.k);
        ensure(tv <= bound, || format!("{name} K={}: tv {} > bound {}", row.k, fmt_rat(&tv), fmt_rat(&bound)))?;
    }
    let last = rows.last().ok_or("empty curve")?;
    Ok(format!("K={} tv {}", last.k, fmt_rat(last.tv_exact.as_ref().unwrap())))
}

fn invariant(name: &str, p: &str) -> Result<String, String> {
    let r = case(name, p)?.check_canonical_invariant(&exact_cfg()).map_err(err)?;
    ensure(r.holds(), || format!("{name} invariant: {}", r.message))?;
    Ok(r.message)
}

/// Random-to-top: worst-pair curve, invariant, distance to uniform.
fn c5() -> Outcome {
    let curve = mixing("rtop", 4, 0..=12, rat(3, 4), int(4))?;
    let inv = invariant("rtop", "N=4,K=4")?;
    let c = case("rtop", "N=4,K=12")?;
    let u = uniformity_check(&c, 12, &exact_cfg()).map_err(err)?;
    let bound = int(4) * pow(&rat(3, 4), 12);
    ensure(u.tv_uniform <= bound, || format!("tv to uniform {} > {}", fmt_rat(&u.tv_uniform), fmt_rat(&bound)))?;
    Ok(format!("{curve}; invariant {inv}; tv to uniform at K=12 = {}", fmt_rat(&u.tv_uniform)))
}

/// Random transpositions.
fn c6() -> Outcome {
    let curve = mixing("rtrans", 3, 0..=10, Rat::one() - rat(1, 9), int(3))?;
    let inv = invariant("rtrans", "N=3,K=4")?;
    Ok(format!("{curve}; invariant {inv}"))
}

/// Riffle shuffle: halving of the block distance and the tv curve.
fn c7() -> Outcome {
    let cfg = exact_cfg();
    let h = riffle_halving(&case("riffle", "N=4,K=1")?, &cfg).map_err(err)?;
    ensure(h.holds(), || format!("halving: {}", h.message))?;
    let curve = mixing("riffle", 4, 0..=8, rat(1, 2), int(16))?;
    Ok(format!("halving {}; {curve}", h.message))
}

/// Binomial samplers of different lengths, compared asynchronously.
fn c8() -> Outcome {
    let cfg = exact_cfg();
    let mut points = 0;
    for (n1, n2) in [(2, 4), (3, 5)] {
        for p in [rat(1, 2), rat(1, 3)] {
            let c = case("binom", &format!("N={n1},N2={n2},p={}", fmt_rat(&p)))?;
            let r = c.check_canonical_invariant(&cfg).map_err(err)?;
            ensure(r.holds(), || format!("({n1},{n2}) p={}: {}", fmt_rat(&p), r.message))?;
            points += r.stats.pairs_checked;
            let (a, b) = c.canonical_inputs();
            let d1 = denote_exact(&c.program.body, &a, &cfg).map_err(err)?.project(&["k"]);
            let d2 = denote_exact(&c.program.body, &b, &cfg).map_err(err)?.project(&["k"]);
            let k = kantorovich_value(&d1, &d2, |x, y| {
                let kx = x.get("k").unwrap().as_num()?.clone();
                Ok(kx.sub(y.get("k").unwrap().as_num()?)?.abs())
            })
            .map_err(err)?;
            let want = &p * int((n1 - n2 as i64).abs());
            ensure(k == Ext::Fin(want.clone()), || format!("({n1},{n2}) p={}: kantorovich {k} != {}", fmt_rat(&p), fmt_rat(&want)))?;
        }
    }
    Ok(format!("async invariant on 4 instances ({points} points); kantorovich = p*|N1-N2|"))
}

fn sim_mean_plus_3se(c: &CaseStudy, trials: usize, seed: u64) -> Result<(f64, f64), String> {
    let (a, b) = c.canonical_inputs();
    let opts = SimOptions { trials, seed, keep_traces: 0 };
    let s = coupled_simulate(&c.program.body, &a, &b, &c.specs, &c.distance, &opts, &exact_cfg()).map_err(err)?;
    Ok((s.mean_float, s.upper(3.0)))
}

/// TD(0) on the three-state MDP.
fn c9() -> Outcome {
    let (alpha, gamma) = (rat(1, 2), rat(1, 2));
    let k = Rat::one() - &alpha + &alpha * &gamma;
    // V1 = [0, 0, 0], V2 = [1, 1/2, 1/4]
    let gap = Rat::one();
    let mut out = Vec::new();
    for n in 1..=5usize {
        let c = case("td0", &format!("N={n}"))?;
        let bound = rat_to_f64(&(pow(&k, n) * &gap));
        let (mean, upper) = sim_mean_plus_3se(&c, 10_000, 9)?;
        ensure(upper <= bound, || format!("N={n}: mean + 3se = {upper} > {bound}"))?;
        out.push(format!("N={n} {mean:.4}<={bound:.4}"));
    }
    Ok(out.join(", "))
}

/// SGD stability on the desk-scale instance.
fn c10() -> Outcome {
    let (l, n, t, beta) = (2i64, 10i64, 20i64, int(2));
    let sum: Rat = (1..=t).map(|s| Rat::one() / (&beta * int(s))).sum();
    let gamma = rat(2 * l, n) * sum;
    let bound = rat_to_f64(&(&gamma * int(l)));
    let c = case("sgd", "T=20,n=10,beta=2")?;
    let (mean, upper) = sim_mean_plus_3se(&c, 10_000, 10)?;
    ensure(upper <= bound, || format!("mean + 3se = {upper} > gamma*L = {bound}"))?;
    Ok(format!("mean {mean:.5}, mean + 3se {upper:.5} <= gamma*L {bound:.5}"))
}

/// Soundness of the operator against exact transport.
fn c11() -> Outcome {
    let cfg = exact_cfg();
    let mut r = common::rng(11);
    let mut strict = 0;
    for i in 0..120 {
        let src = if i < 100 { common::loop_free_source(&mut r) } else { common::bounded_loop_source(&mut r) };
        let p = common::program(&src);
        let e = common::relexp(&p, common::relexp_source(&mut r));
        let pairs = common::pairs(&mut r, 3);
        let rep = soundness_probe(&p.body, &e, &pairs, &cfg).map_err(err)?;
        ensure(rep.holds(), || format!("instance {i}: {}\n{src}", rep.message))?;
        strict += rep.stats.strict;
    }
    Ok(format!("100 loop-free + 20 bounded-loop programs, {strict} strict points"))
}

/// Algebraic rules and the sampling rule.
fn c12() -> Outcome {
    let cfg = exact_cfg();
    let mut r = common::rng(12);
    let mut parts = Vec::new();
    for rule in ExpRule::ALL {
        for i in 0..100 {
            let inst = common::fig3_instance(&mut r, rule);
            let rep = check_rule_property(rule, &inst, &cfg).map_err(err)?;
            ensure(rep.holds(), || format!("{} instance {i}: {}", rule.name(), rep.message))?;
        }
        parts.push(rule.name());
    }
    let mut sites = 0;
    for _ in 0..100 {
        let p = common::program(&common::loop_free_source(&mut r));
        let e = common::relexp(&p, common::relexp_source(&mut r));
        let pairs = common::pairs(&mut r, 3);
        let same: Vec<(State, State)> = pairs.iter().map(|(a, _)| (a.clone(), a.clone())).collect();
        for s in common::samples(&p.body) {
            for (spec, pairs) in [(CouplingSpec::Independent, &pairs), (CouplingSpec::Identity, &same)] {
                let rep = check_samp_rule(&s, &e, &spec, pairs).map_err(err)?;
                ensure(rep.holds(), || format!("samp {spec}: {}", rep.message))?;
            }
            sites += 1;
        }
    }
    Ok(format!("{} on 100 instances each; samp on {sites} sites", parts.join("/")))
}

fn main() -> ExitCode {
    let criteria: [(&str, Duration, fn() -> Outcome); 12] = [
        ("non-compositionality", Duration::from_secs(1), c1),
        ("kantorovich-tv", Duration::from_secs(10), c2),
        ("hwalk-upper", Duration::from_secs(30), c3),
        ("hwalk-lower", Duration::from_secs(30), c4),
        ("rtop", Duration::from_secs(120), c5),
        ("rtrans", Duration::from_secs(60), c6),
        ("riffle", Duration::from_secs(120), c7),
        ("binom-async", Duration::from_secs(30), c8),
        ("td0", Duration::from_secs(60), c9),
        ("sgd", Duration::from_secs(60), c10),
        ("soundness", Duration::from_secs(120), c11),
        ("rules", Duration::from_secs(120), c12),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let res = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let dt = t.elapsed();
        let res = res.and_then(|msg| {
            if dt > *budget {
                Err(format!("took {dt:.1?}, budget {budget:?} ({msg})"))
            } else {
                Ok(msg)
            }
        });
        match res {
            Ok(msg) => println!("PASS {:>2} {name} [{dt:.2?}] {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {:>2} {name} [{dt:.2?}] {msg}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
