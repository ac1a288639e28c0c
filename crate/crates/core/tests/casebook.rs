use std::collections::BTreeMap;

use kantorel::casebook::*;
use kantorel::config::Config;
use kantorel::lang::parse_program;
use kantorel::num::{int, rat, Ext, Rat};
use kantorel::rpe::{CouplingSpec, Specs};
use kantorel::semantics::denote_exact;
use kantorel::state::{State, Value};
use num_traits::One;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn case(name: &str, p: &str) -> CaseStudy {
    make_case(name, &Params::parse(p).unwrap()).unwrap()
}

fn pow(q: &Rat, k: usize) -> Rat {
    (0..k).fold(Rat::one(), |acc, _| acc * q)
}

#[test]
fn canonical_invariants_hold_at_small_parameters() {
    let cfg = Config::default();
    for (name, p) in [
        ("hwalk", "N=2,K=2"),
        ("rtop", "N=3,K=2"),
        ("rtrans", "N=3,K=2"),
        ("riffle", "N=3,K=2"),
        ("binom", "N=1,N2=2"),
    ] {
        let r = case(name, p).check_canonical_invariant(&cfg).unwrap();
        assert!(r.holds(), "{name}: {}", r.message);
    }
}

#[test]
fn case_list_is_complete() {
    assert_eq!(CASES.len(), 8);
    for name in CASES {
        assert!(!describe(name).is_empty());
        make_case(name, &Params::new()).unwrap();
    }
    assert!(make_case("nope", &Params::new()).is_err());
}

#[test]
fn parameters_are_validated() {
    assert!(make_case("hwalk", &Params::parse("N=0").unwrap()).is_err());
    assert!(make_case("hwalk", &Params::parse("M=3").unwrap()).is_err());
    assert!(make_case("pgd", &Params::parse("alpha=1/3").unwrap()).is_err());
    assert!(Params::parse("N").is_err());
    let p = Params::parse("N=3 K=2").unwrap();
    assert_eq!(p.get("K"), Some(&int(2)));
}

#[test]
fn oversized_cases_point_to_simulation() {
    let c = case("rtop", "N=8,K=1");
    let e = c.all_inputs().unwrap_err().to_string();
    assert!(e.contains("simulated"), "{e}");
}

#[test]
fn rtop_one_step_bound_is_three() {
    assert_eq!(case("rtop", "N=4,K=1").bound_at(1), Some(int(3)));
}

#[test]
fn rtop_uniformity_small_deck() {
    let cfg = Config::default();
    let c = case("rtop", "N=3,K=20");
    let u = uniformity_check(&c, 20, &cfg).unwrap();
    assert!(u.tv_uniform < int(3) * pow(&rat(2, 3), 20));
    assert!(u.artifacts.unwrap().holds());
    let u0 = uniformity_check(&c, 0, &cfg).unwrap();
    assert_eq!(u0.tv_uniform, Rat::one() - rat(1, 6));
}

#[test]
fn riffle_halves_block_distance() {
    let r = riffle_halving(&case("riffle", "N=4,K=1"), &Config::default()).unwrap();
    assert!(r.holds(), "{}", r.message);
}

#[test]
fn mixing_curves_respect_bounds() {
    let cfg = Config::default();
    for (name, ks) in [("hwalk", 0..=6), ("rtop", 0..=6), ("rtrans", 0..=6), ("riffle", 0..=3)] {
        let c = case(name, "N=3,K=0");
        let rows = mixing_curve(&c, &ks.collect::<Vec<_>>(), MixMode::Exact, &cfg).unwrap();
        for r in rows {
            assert_eq!(r.within_bound(), Some(true), "{name} K={}", r.k);
            assert!(r.tv_uniform.is_some());
        }
    }
}

#[test]
fn exact_curve_is_sequentially_reproducible() {
    let c = case("rtrans", "N=3,K=0");
    let ks = [0, 2, 5];
    let par = mixing_curve(&c, &ks, MixMode::Exact, &Config::default()).unwrap();
    let seq = mixing_curve(&c, &ks, MixMode::Exact, &Config::sequential()).unwrap();
    for (a, b) in par.iter().zip(&seq) {
        assert_eq!(a.tv_exact, b.tv_exact);
    }
}

#[test]
fn simulated_curve_has_wilson_intervals() {
    let c = case("hwalk", "N=6,K=0");
    let rows = mixing_curve(&c, &[0, 10, 40], MixMode::Simulated { trials: 400, seed: 3 }, &Config::default()).unwrap();
    assert_eq!(rows[0].mean, Some(1.0));
    for r in &rows {
        let (lo, m, hi) = (r.ci_lo.unwrap(), r.mean.unwrap(), r.ci_hi.unwrap());
        assert!(lo <= m && m <= hi);
        assert_eq!(r.trials, Some(400));
    }
    assert!(rows[2].mean.unwrap() < rows[1].mean.unwrap());
}

#[test]
fn hwalk_sandwich() {
    let cfg = Config::default();
    let c = case("hwalk", "N=3,K=3");
    let sig = kantorel::lang::signature(&c.program).unwrap();
    let f = kantorel::lang::parse_unary("wH(pos)", &sig).unwrap();
    for k in 0..=4 {
        let s = sandwich(&c, &f, k, &cfg).unwrap();
        assert!(s.holds(), "K={k}: {s:?}");
    }
}

#[test]
fn branch_free_hwalk_matches_conditional_form() {
    let cfg = Config::default();
    let src = "input pos: array, N: int, K: int;
        k := 0;
        while k < K do
          i :~ uniform(0 .. N + 1);
          if i != 0 then pos[i - 1] := 1 - pos[i - 1] end;
          k := k + 1
        end";
    let cond = parse_program(src).unwrap();
    let c = case("hwalk", "N=3,K=3");
    for s in c.all_inputs().unwrap() {
        let a = denote_exact(&c.program.body, &s, &cfg).unwrap().project(&["pos"]);
        let b = denote_exact(&cond.body, &s, &cfg).unwrap().project(&["pos"]);
        assert_eq!(a, b, "from {s}");
    }
}

#[test]
fn block_decomposition_of_reversal() {
    let bd = block_decomposition(&[0, 1, 2], &[2, 1, 0]).unwrap();
    assert_eq!(bd.d, rat(2, 3));
    assert!(bd.bounds_displacement(&[0, 1, 2], &[2, 1, 0]));
}

#[test]
fn binom_of_length_zero_is_a_point_mass() {
    let c = case("binom", "N=0,N2=2");
    let (a, _) = c.canonical_inputs();
    let d = denote_exact(&c.program.body, &a, &Config::default()).unwrap().project(&["k"]);
    assert_eq!(d.len(), 1);
    assert_eq!(d.get(&State::from_pairs([("k", Value::int(0))])), Rat::one());
}

#[test]
fn identical_inputs_under_identity_stay_at_distance_zero() {
    let c = case("hwalk", "N=4,K=6");
    let (a, _) = c.canonical_inputs();
    let specs = Specs::new().with(0, CouplingSpec::Identity);
    let opts = SimOptions { trials: 500, seed: 17, keep_traces: 5 };
    let s = coupled_simulate(&c.program.body, &a, &a, &specs, &c.distance, &opts, &Config::default()).unwrap();
    assert_eq!(s.max, Ext::zero());
    assert_eq!(s.mean, Ext::zero());
    assert_eq!(s.traces.len(), 5);
    assert!(s.traces.iter().all(|t| t.draws.iter().all(|d| d.left == d.right)));
}

#[test]
fn replay_reproduces_kept_traces() {
    let cfg = Config::default();
    let c = case("rtrans", "N=4,K=5");
    let (a, b) = c.canonical_inputs();
    let opts = SimOptions { trials: 50, seed: 99, keep_traces: 3 };
    let s = coupled_simulate(&c.program.body, &a, &b, &c.specs, &c.distance, &opts, &cfg).unwrap();
    let again = coupled_simulate(&c.program.body, &a, &b, &c.specs, &c.distance, &opts, &Config::sequential()).unwrap();
    assert_eq!(s.mean, again.mean);
    for t in &s.traces {
        let r = replay(&c.program.body, &a, &b, &c.specs, &c.distance, 99, t.trial, &cfg).unwrap();
        assert_eq!(&r, t);
    }
}

fn chi_square_ok(counts: &BTreeMap<State, usize>, n: usize, exact: &kantorel::semantics::SubDist) -> bool {
    let mut stat = 0.0;
    for (s, p) in exact.iter() {
        let e = kantorel::num::rat_to_f64(p) * n as f64;
        let o = *counts.get(s).unwrap_or(&0) as f64;
        stat += (o - e).powi(2) / e;
    }
    let unexpected = counts.keys().any(|s| exact.get(s) == Rat::from_integer(0.into()));
    let df = (exact.len() - 1).max(1) as f64;
    !unexpected && stat <= ChiSquared::new(df).unwrap().inverse_cdf(0.99)
}

#[test]
fn coupled_marginals_match_unilateral_runs() {
    let cfg = Config::default();
    let c = case("hwalk", "N=2,K=2");
    let (a, b) = c.canonical_inputs();
    let n = 10_000;
    let proj = |s: &State| s.project(&["pos"]);
    let (mut left, mut right, mut solo) = (BTreeMap::new(), BTreeMap::new(), BTreeMap::new());
    for t in 0..n as u64 {
        let (x, y) = simulate_pair(&c.program.body, &a, &b, &c.specs, 5, t, &cfg).unwrap();
        *left.entry(proj(&x)).or_insert(0) += 1;
        *right.entry(proj(&y)).or_insert(0) += 1;
        let z = simulate_solo(&c.program.body, &a, 6, t, SIDE_LEFT, &cfg).unwrap();
        *solo.entry(proj(&z)).or_insert(0) += 1;
    }
    let ea = denote_exact(&c.program.body, &a, &cfg).unwrap().project(&["pos"]);
    let eb = denote_exact(&c.program.body, &b, &cfg).unwrap().project(&["pos"]);
    assert!(chi_square_ok(&left, n, &ea));
    assert!(chi_square_ok(&right, n, &eb));
    assert!(chi_square_ok(&solo, n, &ea));
}

#[test]
fn td0_single_step_mean_is_within_bound() {
    let c = case("td0", "N=1");
    let (a, b) = c.canonical_inputs();
    let opts = SimOptions { trials: 2000, seed: 1, keep_traces: 0 };
    let s = coupled_simulate(&c.program.body, &a, &b, &c.specs, &c.distance, &opts, &Config::default()).unwrap();
    assert!(s.upper(3.0) <= 0.75);
    assert_eq!(c.analytic_bound(), Some(&rat(3, 4)));
}

#[test]
fn sgd_stability_constant() {
    let g = sgd_gamma(10, 20, &int(2));
    let harmonic: Rat = (1..=20).map(|t| rat(1, t)).sum();
    assert_eq!(g, rat(2 * SGD_LIPSCHITZ, 10) * harmonic / int(2));
    assert_eq!(td0_contraction(&rat(1, 2), &rat(1, 2)), rat(3, 4));
}

#[test]
fn pgd_runs_are_bounded_by_the_analytic_rate() {
    let c = case("pgd", "T=6");
    let (a, b) = c.canonical_inputs();
    let opts = SimOptions { trials: 200, seed: 4, keep_traces: 0 };
    let s = coupled_simulate(&c.program.body, &a, &b, &c.specs, &c.distance, &opts, &Config::default()).unwrap();
    let bound = kantorel::num::rat_to_f64(c.analytic_bound().unwrap());
    assert!(s.upper(3.0) <= bound);
}
