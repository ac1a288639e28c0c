mod common;

use kantorel::casebook::{make_case, CaseStudy, Params};
use kantorel::config::Config;
use kantorel::lang::ast::Expr;
use kantorel::lang::{eval_exp, parse_family, parse_program, parse_unary, signature, Ctx, Program};
use kantorel::num::{int, rat, Ext};
use kantorel::report::Verdict;
use kantorel::semantics::denote_exact;
use kantorel::state::{State, Value};
use kantorel::wpe::*;
use proptest::prelude::*;

const UNARY: [&str; 5] = ["x", "[b] * y", "x * y + 1", "z", "abs(x - 2 * y)"];

fn unary(p: &Program, src: &str) -> Expr {
    parse_unary(src, &signature(p).unwrap()).unwrap()
}

fn case(name: &str, p: &str) -> CaseStudy {
    make_case(name, &Params::parse(p).unwrap()).unwrap()
}

struct Omega {
    lp: kantorel::lang::ast::Command,
    f: Expr,
    limit: Expr,
    states: Vec<State>,
    sig: kantorel::lang::Signature,
}

fn hwalk_omega() -> Omega {
    let c = case("hwalk", "N=3,K=3");
    let sig = signature(&c.program).unwrap();
    let f = parse_unary("wH(pos)", &sig).unwrap();
    let tail = "sum(j in 0 .. monus(K, k), (1/(N+1)) * ((N-1)/(N+1))^j) + ((N-1)/(N+1))^monus(K, k) * wH(pos)";
    let limit = parse_family(tail, &sig, Ctx::Unary).unwrap();
    let heads: Vec<State> = c.all_inputs().unwrap().iter().map(|s| c.loop_head(s).unwrap()).collect();
    let states = reachable_states(c.main_loop(), &heads).unwrap();
    Omega { lp: c.main_loop().clone(), f, limit, states, sig }
}

#[test]
fn bernoulli_weight() {
    let p = parse_program("input x: int; x :~ bernoulli(2/7)").unwrap();
    let f = unary(&p, "x");
    let s = State::from_pairs([("x", Value::int(5))]);
    assert_eq!(wpe_at(&p.body, &f, &s, &Config::default()).unwrap(), Ext::ratio(2, 7));
}

#[test]
fn geometric_loop_expectation() {
    let p = parse_program("input c: int; t := 0; while t == 0 do if c < 3 then c := c + 1 end; t :~ bernoulli(1/2) end").unwrap();
    let f = unary(&p, "[c <= 2]");
    let s = State::from_pairs([("c", Value::int(0))]);
    assert_eq!(wpe_at(&p.body, &f, &s, &Config::default()).unwrap(), Ext::ratio(3, 4));
}

#[test]
fn constant_tests_separate_nothing() {
    let c = case("hwalk", "N=3,K=2");
    let f = unary(&c.program, "1/2");
    let (a, b) = c.canonical_inputs();
    let lb = tv_lower_bound(&c.program.body, &a, &b, &f, &Config::default()).unwrap();
    assert_eq!(lb.value, int(0));
    assert_eq!(lb.wpe1, rat(1, 2));
    let g = unary(&c.program, "2 * wH(pos)");
    assert!(tv_lower_bound(&c.program.body, &a, &b, &g, &Config::default()).is_err());
}

#[test]
fn hwalk_family_is_certified() {
    let o = hwalk_omega();
    let cfg = Config { n_max: 8, ..Config::default() };
    let fam = parse_family(
        "[K - $n <= k] * (sum(j in 0 .. monus(K, k), (1/(N+1)) * ((N-1)/(N+1))^j) + ((N-1)/(N+1))^monus(K, k) * wH(pos))",
        &o.sig,
        Ctx::Unary,
    )
    .unwrap();
    let cert = certify_omega(&o.lp, &o.f, &fam, &o.limit, &o.states, &cfg).unwrap();
    assert!(cert.certified);
    assert_eq!(omega_report(&cert).verdict, Verdict::Holds);
}

#[test]
fn perturbed_family_fails() {
    let o = hwalk_omega();
    let cfg = Config { n_max: 8, ..Config::default() };
    let fam = parse_family(
        "[K - $n <= k] * (sum(j in 0 .. monus(K, k), (1/(N+2)) * ((N-1)/(N+1))^j) + ((N-1)/(N+1))^monus(K, k) * wH(pos))",
        &o.sig,
        Ctx::Unary,
    )
    .unwrap();
    let cert = certify_omega(&o.lp, &o.f, &fam, &o.limit, &o.states, &cfg).unwrap();
    assert!(!cert.certified);
    let r = omega_report(&cert);
    assert_eq!(r.verdict, Verdict::Fails);
    assert!(!r.witnesses.is_empty());
}

#[test]
fn zero_family_is_only_a_lower_invariant() {
    let o = hwalk_omega();
    let cfg = Config { n_max: 6, ..Config::default() };
    let zero = parse_family("0 * $n", &o.sig, Ctx::Unary).unwrap();
    let lower = check_omega_invariant(&o.lp, &o.f, &zero, OmegaKind::Lower, &o.states, &cfg).unwrap();
    assert!(lower.holds());
    let upper = check_omega_invariant(&o.lp, &o.f, &zero, OmegaKind::Upper, &o.states, &cfg).unwrap();
    assert_eq!(upper.verdict, Verdict::Fails);
    let cert = certify_omega(&o.lp, &o.f, &zero, &o.limit, &o.states, &cfg).unwrap();
    assert_eq!(omega_report(&cert).verdict, Verdict::Fails);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wpe_is_the_expected_final_value(seed in any::<u64>(), looped in any::<bool>(), k in 0usize..5) {
        let mut r = common::rng(seed);
        let src = if looped { common::bounded_loop_source(&mut r) } else { common::loop_free_source(&mut r) };
        let p = common::program(&src);
        let f = unary(&p, UNARY[k]);
        let s = common::state(&mut r);
        let cfg = Config::default();
        let oracle = denote_exact(&p.body, &s, &cfg).unwrap().expected(|t| eval_exp(&f, t, &[])).unwrap();
        prop_assert_eq!(wpe_at(&p.body, &f, &s, &cfg).unwrap(), oracle);
    }

    #[test]
    fn wpe_is_linear(seed in any::<u64>(), i in 0usize..5, j in 0usize..5, a in 0i64..4) {
        let mut r = common::rng(seed);
        let p = common::program(&common::bounded_loop_source(&mut r));
        let (f, g) = (unary(&p, UNARY[i]), unary(&p, UNARY[j]));
        let h = unary(&p, &format!("{a} * ({}) + ({})", UNARY[i], UNARY[j]));
        let s = common::state(&mut r);
        let cfg = Config::default();
        let lhs = wpe_at(&p.body, &h, &s, &cfg).unwrap();
        let rhs = wpe_at(&p.body, &f, &s, &cfg).unwrap().mul_rat(&int(a)).add(&wpe_at(&p.body, &g, &s, &cfg).unwrap());
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn bounded_programs_terminate(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let p = common::program(&common::bounded_loop_source(&mut r));
        prop_assert!(terminates_surely(&p.body, &common::state(&mut r), &Config::default()).unwrap());
    }

    #[test]
    fn separating_tests_bound_total_variation(seed in any::<u64>(), k in 0usize..3) {
        let mut r = common::rng(seed);
        let p = common::program(&common::loop_free_source(&mut r));
        let f = unary(&p, ["[x == y]", "[b] / 2", "[x + y >= 2] * (1/3)"][k]);
        let (s1, s2) = (common::state(&mut r), common::state(&mut r));
        let cfg = Config::default();
        let lb = tv_lower_bound(&p.body, &s1, &s2, &f, &cfg).unwrap();
        let d1 = denote_exact(&p.body, &s1, &cfg).unwrap();
        let d2 = denote_exact(&p.body, &s2, &cfg).unwrap();
        prop_assert!(lb.value <= kantorel::transport::tv(&d1, &d2));
    }
}
