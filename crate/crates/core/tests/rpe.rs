mod common;

use kantorel::casebook::{make_case, CaseStudy, Params};
use kantorel::config::Config;
use kantorel::lang::ast::Side;
use kantorel::lang::{eval_relexp, parse_family, parse_program, parse_relexp, signature, Ctx, Program};
use kantorel::num::{rat, Ext};
use kantorel::report::Verdict;
use kantorel::rpe::*;
use kantorel::state::{State, Value};
use proptest::prelude::*;

fn case(name: &str, p: &str) -> CaseStudy {
    make_case(name, &Params::parse(p).unwrap()).unwrap()
}

fn xs(pairs: &[(&str, i64)]) -> State {
    State::from_pairs(pairs.iter().map(|&(k, v)| (k, Value::int(v))))
}

fn rel(p: &Program, src: &str) -> kantorel::lang::ast::Expr {
    parse_relexp(src, &signature(p).unwrap()).unwrap()
}

#[test]
fn disagreeing_guards_give_inf() {
    let p = parse_program("input x: int; while x < 2 do x := x + 1 end").unwrap();
    let e = rel(&p, "abs(x<1> - x<2>)");
    let cfg = Config::default();
    assert_eq!(rpe_at(&p.body, &e, &xs(&[("x", 0)]), &xs(&[("x", 5)]), &cfg).unwrap(), Ext::Inf);
    assert_eq!(rpe_at(&p.body, &e, &xs(&[("x", 0)]), &xs(&[("x", 1)]), &cfg).unwrap(), Ext::Inf);
    assert_eq!(rpe_at(&p.body, &e, &xs(&[("x", 0)]), &xs(&[("x", 0)]), &cfg).unwrap(), Ext::zero());
    let p = parse_program("input x: int; if x == 0 then skip else skip end").unwrap();
    assert_eq!(rpe_at(&p.body, &e, &xs(&[("x", 0)]), &xs(&[("x", 1)]), &cfg).unwrap(), Ext::Inf);
}

#[test]
fn hwalk_one_step_matches_hand_computation() {
    // From 00 and 11 with N = 2 the flips 10 and 01 can be matched, leaving
    // 00 against 11 with probability 1/3.
    let cfg = Config::default();
    let c = case("hwalk", "N=2,K=1");
    let (a, b) = c.canonical_inputs();
    let v = rpe_at(&c.program.body, &c.distance, &a, &b, &cfg).unwrap();
    assert_eq!(v, Ext::ratio(1, 3));
    let post = |x: &State, y: &State| eval_relexp(&c.distance, x, y);
    assert_eq!(lift_exact(&c.program.body, &post, &a, &b, &cfg).unwrap(), v);
}

#[test]
fn certified_invariant_bounds_the_semantic_distance() {
    let cfg = Config::default();
    let c = case("hwalk", "N=3,K=3");
    assert!(c.check_canonical_invariant(&cfg).unwrap().holds());
    let inputs = c.all_inputs().unwrap();
    let post = |x: &State, y: &State| eval_relexp(&c.distance, x, y);
    let factor = rat(1, 8);
    for s1 in &inputs {
        for s2 in &inputs {
            let lifted = lift_exact(&c.program.body, &post, s1, s2, &cfg).unwrap();
            let bound = eval_relexp(&c.distance, s1, s2).unwrap().mul_rat(&factor);
            assert!(lifted <= bound, "{s1} {s2}: {lifted} > {bound}");
        }
    }
}

#[test]
fn rtop_with_a_too_small_factor_fails_with_a_witness() {
    let cfg = Config::default();
    let c = case("rtop", "N=3,K=2");
    let wrong = rel(&c.program, "inf * [k<1> != k<2>] + [k<1> == k<2>] * dM(deck<1>, deck<2>) * ((N<1> - 2) / N<1>) ^ monus(K<1>, k<1>)");
    let r = c.check_invariant_expr(&wrong, &cfg).unwrap();
    assert_eq!(r.verdict, Verdict::Fails);
    let w = &r.witnesses[0];
    assert!(w.lhs > w.rhs);
    assert!(c.check_canonical_invariant(&cfg).unwrap().holds());
}

#[test]
fn binom_async_equal_lengths() {
    let cfg = Config::default();
    let c = case("binom", "N=3,N2=3");
    assert!(c.check_canonical_invariant(&cfg).unwrap().holds());
    let (a, b) = c.canonical_inputs();
    let post = |x: &State, y: &State| eval_relexp(&c.distance, x, y);
    assert_eq!(lift_exact(&c.program.body, &post, &a, &b, &cfg).unwrap(), Ext::zero());
}

#[test]
fn async_rule_is_inconclusive_for_unbounded_loops() {
    let p = parse_program("input x: int; while x != 0 do x :~ uniform{0, 1} end").unwrap();
    let e = rel(&p, "abs(x<1> - x<2>)");
    let space = PairSpace::from_pairs(vec![(xs(&[("x", 0)]), xs(&[("x", 1)]))]);
    let r = check_async_invariant(&p.body, &e, &e, &Specs::new(), &space, &Config::default()).unwrap();
    assert_eq!(r.verdict, Verdict::Inconclusive);
}

#[test]
fn one_sided_examples() {
    let cfg = Config::default();
    let p = parse_program("input x: int; x :~ uniform{0, 2}").unwrap();
    let e = rel(&p, "abs(x<1> - x<2>)");
    let (s1, s2) = (xs(&[("x", 7)]), xs(&[("x", 1)]));
    assert_eq!(rpe_one_sided(Side::Left, &p.body, &e, &s1, &s2, &cfg).unwrap(), Ext::one());
    assert_eq!(rpe_one_sided(Side::Right, &p.body, &e, &s1, &s2, &cfg).unwrap(), Ext::from_int(6));
    let p = parse_program("input x: int; while x != 0 do x :~ uniform{0, 1} end").unwrap();
    assert!(rpe_one_sided(Side::Left, &p.body, &e, &s1, &s2, &cfg).is_err());
}

#[test]
fn continuity_probes() {
    let p = parse_program("input x: int; y :~ uniform{0, 1, 2}; x := x + y").unwrap();
    let sig = signature(&p).unwrap();
    let cfg = Config { n_max: 12, epsilon: 0.2, ..Config::default() };
    let pairs = vec![(xs(&[("x", 0)]), xs(&[("x", 2)])), (xs(&[("x", 1)]), xs(&[("x", 1)]))];
    let fam = parse_family("($n / ($n + 1)) * abs(x<1> - x<2>)", &sig, Ctx::Relational).unwrap();
    let lim = rel(&p, "abs(x<1> - x<2>)");
    assert!(continuity_probe(&p.body, &fam, &lim, &pairs, &cfg).unwrap().holds());
    let fam = parse_family("$n * [x<1> != x<2>]", &sig, Ctx::Relational).unwrap();
    let lim = rel(&p, "inf * [x<1> != x<2>]");
    assert!(continuity_probe(&p.body, &fam, &lim, &pairs, &cfg).unwrap().holds());
    let lim = rel(&p, "2 * abs(x<1> - x<2>)");
    let fam = parse_family("($n / ($n + 1)) * abs(x<1> - x<2>)", &sig, Ctx::Relational).unwrap();
    assert!(!continuity_probe(&p.body, &fam, &lim, &pairs, &cfg).unwrap().holds());
}

#[test]
fn superadditivity_can_be_strict() {
    let p = parse_program("input x: int; x :~ bernoulli(1/2)").unwrap();
    let cfg = Config::default();
    let (e1, e2) = (rel(&p, "[x<1> != x<2>]"), rel(&p, "[x<1> == x<2>]"));
    let sum = rel(&p, "[x<1> != x<2>] + [x<1> == x<2>]");
    let s = xs(&[("x", 0)]);
    assert_eq!(rpe_at(&p.body, &e1, &s, &s, &cfg).unwrap(), Ext::zero());
    assert_eq!(rpe_at(&p.body, &e2, &s, &s, &cfg).unwrap(), Ext::zero());
    assert_eq!(rpe_at(&p.body, &sum, &s, &s, &cfg).unwrap(), Ext::one());
    let inst = RuleInstance { program: p.body.clone(), e: e1, e2: Some(e2), factor: None, pairs: vec![(s.clone(), s)] };
    let r = check_rule_property(ExpRule::SupAdd, &inst, &cfg).unwrap();
    assert!(r.holds());
    assert_eq!(r.stats.strict, 1);
}

#[test]
fn fixpoint_approximants_increase_to_the_invariant() {
    // The loop stops with x uniform on {0, 1}, so the limit is 1/2.
    let p = parse_program("input x: int; t := 0; while t == 0 do x :~ uniform{0, 1}; t :~ bernoulli(1/2) end").unwrap();
    let e = rel(&p, "x<1> + x<2>");
    let s = xs(&[("x", 0)]);
    let mut last = Ext::zero();
    for n in [1, 2, 4, 8, 16, 32] {
        let cfg = Config { max_iters: n, ..Config::default() };
        let engine = Engine::optimal(&cfg);
        let v = engine.pre(&p.body, &|a: &State, b: &State| eval_relexp(&e, a, b), &s, &s).unwrap();
        assert!(v >= last, "budget {n}: {v} < {last}");
        assert!(v <= Ext::one());
        last = v;
    }
    assert!(last.to_f64() > 0.99, "{last}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fixed_couplings_never_beat_the_optimal_one(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let p = common::program(&common::loop_free_source(&mut r));
        let e = common::relexp(&p, common::relexp_source(&mut r));
        for c in common::samples(&p.body) {
            for (s1, s2) in common::pairs(&mut r, 3) {
                let opt = rpe_sample_bound(&c, &e, &CouplingSpec::Optimal, &s1, &s2).unwrap();
                let ind = rpe_sample_bound(&c, &e, &CouplingSpec::Independent, &s1, &s2).unwrap();
                prop_assert!(opt <= ind);
                if s1 == s2 {
                    let id = rpe_sample_bound(&c, &e, &CouplingSpec::Identity, &s1, &s2).unwrap();
                    prop_assert!(opt <= id);
                }
            }
        }
    }

    #[test]
    fn rpe_is_sound_on_generated_programs(seed in any::<u64>(), looped in any::<bool>()) {
        let mut r = common::rng(seed);
        let src = if looped { common::bounded_loop_source(&mut r) } else { common::loop_free_source(&mut r) };
        let p = common::program(&src);
        let e = common::relexp(&p, common::relexp_source(&mut r));
        let rep = soundness_probe(&p.body, &e, &common::pairs(&mut r, 4), &Config::default()).unwrap();
        prop_assert!(rep.holds(), "{}", rep.message);
    }

    #[test]
    fn algebraic_rules_hold(seed in any::<u64>(), rule in prop::sample::select(ExpRule::ALL.to_vec())) {
        let mut r = common::rng(seed);
        let inst = common::fig3_instance(&mut r, rule);
        let rep = check_rule_property(rule, &inst, &Config::default()).unwrap();
        prop_assert!(rep.holds(), "{}: {}", rule.name(), rep.message);
    }

    #[test]
    fn identical_inputs_are_at_distance_zero(seed in any::<u64>(), k in 0usize..3) {
        let mut r = common::rng(seed);
        let p = common::program(&common::bounded_loop_source(&mut r));
        let src = ["abs(x<1> - x<2>)", "[x<1> != x<2> || y<1> != y<2>]", "[x<1> + y<1> != x<2> + y<2>] * (z<1> + 1)"][k];
        let e = common::relexp(&p, src);
        let s = common::state(&mut r);
        prop_assert_eq!(rpe_at(&p.body, &e, &s, &s, &Config::default()).unwrap(), Ext::zero());
    }
}
