mod common;

use kantorel::config::Config;
use kantorel::lang::ast::Command;
use kantorel::lang::{parse_program, parse_state};
use kantorel::num::{int, rat, Ext, Rat};
use kantorel::semantics::{bind, denote, denote_dist, denote_exact, dirac, eval_dist, expected, SubDist, Status};
use kantorel::state::{State, Value};
use num_traits::{One, Zero};
use proptest::prelude::*;

fn run(src: &str, input: &str) -> SubDist {
    let p = parse_program(src).unwrap();
    denote_exact(&p.body, &parse_state(input).unwrap(), &Config::default()).unwrap()
}

fn seq_parts(c: &Command) -> Option<(Command, Command)> {
    match c {
        Command::Seq(cs) if cs.len() >= 2 => {
            let first = cs[0].clone();
            let rest = if cs.len() == 2 { cs[1].clone() } else { Command::Seq(cs[1..].to_vec()) };
            Some((first, rest))
        }
        _ => None,
    }
}

#[test]
fn hwalk_one_step_from_the_origin() {
    let src = "input pos: array, N: int, K: int;
        k := 0;
        while k < K do
          i :~ uniform(0 .. N + 1);
          if i != 0 then pos[i - 1] := 1 - pos[i - 1] end;
          k := k + 1
        end";
    let d = run(src, "{pos = [0, 0], N = 2, K = 1}").project(&["pos"]);
    assert_eq!(d.len(), 3);
    for pos in [[0, 0], [1, 0], [0, 1]] {
        assert_eq!(d.get(&State::from_pairs([("pos", Value::ints(&pos))])), rat(1, 3));
    }
}

#[test]
fn binomial_pmf() {
    let src = "input N: int; k := 0; i := 0; while i < N do b :~ bernoulli(1/2); k := k + b; i := i + 1 end";
    let d = run(src, "{N = 4}").project(&["k"]);
    for (k, c) in [(0, 1), (1, 4), (2, 6), (3, 4), (4, 1)] {
        assert_eq!(d.get(&State::from_pairs([("k", Value::int(k))])), rat(c, 16));
    }
}

#[test]
fn distribution_expressions() {
    let s = parse_state("{x = 3}").unwrap();
    let p = parse_program("input x: int; y :~ table{0: 1/4, 1: 3/4}").unwrap();
    let d = denote_exact(&p.body, &s, &Config::default()).unwrap().project(&["y"]);
    assert_eq!(d.get(&State::from_pairs([("y", Value::int(1))])), rat(3, 4));
    assert!(parse_program("input x: int; y :~ table{0: 1/2, 1: 3/4}")
        .map(|p| denote(&p.body, &s, &Config::default()).is_err())
        .unwrap_or(true));
    let p = parse_program("input x: int; y :~ uniform(x .. x)").unwrap();
    assert!(denote(&p.body, &s, &Config::default()).is_err());
    let Command::Sample { dist, .. } = common::samples(&parse_program("input x: int; y :~ uniform{x, x, 1}").unwrap().body).remove(0)
    else {
        unreachable!()
    };
    let d = eval_dist(&dist, &s).unwrap();
    assert_eq!(d.get(&Value::int(3)), rat(2, 3));
}

#[test]
fn monad_laws_on_small_distributions() {
    let s0 = State::from_pairs([("x", Value::int(0))]);
    let s1 = State::from_pairs([("x", Value::int(1))]);
    let mu = SubDist::from_entries([(s0.clone(), rat(1, 3)), (s1.clone(), rat(1, 2))]).unwrap();
    let f = |s: &State| -> kantorel::error::Result<SubDist> {
        let x = s.get("x").unwrap().as_index()?;
        Ok(SubDist::uniform(vec![s.with("x", Value::int(x + 1)), s.with("x", Value::int(x + 2))]))
    };
    assert_eq!(bind(&dirac(s0.clone()), f).unwrap(), f(&s0).unwrap());
    assert_eq!(bind(&mu, |s| Ok(dirac(s.clone()))).unwrap(), mu);
    let x = |s: &State| Ok(s.get("x").unwrap().as_num()?.clone());
    assert_eq!(expected(&mu, x).unwrap(), Ext::Fin(rat(1, 2)));
    assert_eq!(expected(&bind(&mu, f).unwrap(), x).unwrap(), Ext::Fin(rat(1, 3) * rat(3, 2) + rat(1, 2) * rat(5, 2)));
    let inf = SubDist::from_entries([(s0, Rat::zero()), (s1, rat(1, 2))]).unwrap();
    assert_eq!(expected(&inf, |_| Ok(Ext::Inf)).unwrap(), Ext::Inf);
}

#[test]
fn diverging_loop_reports_its_residual() {
    let p = parse_program("input b: bool; while b do b :~ uniform{true, false}; x := 1; b := b end").unwrap();
    let cfg = Config { max_iters: 30, ..Config::default() };
    let d = denote(&p.body, &parse_state("{b = true}").unwrap(), &cfg).unwrap();
    assert_ne!(d.status, Status::Exact);
    assert_eq!(d.residual.clone() + d.dist.mass(), Rat::one());
    let p = parse_program("input b: bool; while b do skip end").unwrap();
    let d = denote(&p.body, &parse_state("{b = true}").unwrap(), &cfg).unwrap();
    assert!(d.dist.is_empty());
    assert_eq!(d.residual, Rat::one());
    assert!(denote_exact(&p.body, &parse_state("{b = true}").unwrap(), &cfg).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn output_mass_is_at_most_one(seed in any::<u64>(), looped in any::<bool>()) {
        let mut r = common::rng(seed);
        let src = if looped { common::bounded_loop_source(&mut r) } else { common::loop_free_source(&mut r) };
        let p = common::program(&src);
        let d = denote(&p.body, &common::state(&mut r), &Config::default()).unwrap();
        prop_assert_eq!(d.status, Status::Exact);
        prop_assert_eq!(d.dist.mass(), &Rat::one());
        prop_assert!(d.residual.is_zero());
    }

    #[test]
    fn approximant_mass_grows_with_the_budget(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let body = common::loop_free_source(&mut r);
        let body = body.trim_start_matches(common::HEADER);
        let src = format!("{}t := 0;\nwhile t == 0 do {body}; t :~ bernoulli(1/3) end", common::HEADER);
        let p = common::program(&src);
        let s = common::state(&mut r);
        let mut last = Rat::zero();
        for n in [1, 2, 4, 8, 16] {
            let cfg = Config { max_iters: n, ..Config::default() };
            let d = denote(&p.body, &s, &cfg).unwrap();
            prop_assert!(d.dist.mass() >= &last);
            last = d.dist.mass().clone();
        }
        prop_assert!(last <= Rat::one());
    }

    #[test]
    fn sequencing_is_bind(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let p = common::program(&common::loop_free_source(&mut r));
        let s = common::state(&mut r);
        let cfg = Config::default();
        if let Some((c1, c2)) = seq_parts(&p.body) {
            let whole = denote_exact(&p.body, &s, &cfg).unwrap();
            let mid = denote_exact(&c1, &s, &cfg).unwrap();
            let composed = bind(&mid, |t| denote_exact(&c2, t, &cfg)).unwrap();
            prop_assert_eq!(whole, composed);
        }
    }

    #[test]
    fn denotation_is_linear_in_the_input(seed in any::<u64>(), w in 1i64..8) {
        let mut r = common::rng(seed);
        let p = common::program(&common::loop_free_source(&mut r));
        let (s1, s2) = (common::state(&mut r), common::state(&mut r));
        let cfg = Config::default();
        let q = rat(w, 9);
        let mut mu = SubDist::empty();
        mu.add(s1.clone(), q.clone());
        mu.add(s2.clone(), Rat::one() - &q);
        let lhs = denote_dist(&p.body, mu, &cfg).unwrap().dist;
        let mut rhs = denote_exact(&p.body, &s1, &cfg).unwrap().scale(&q);
        rhs.add_all(&denote_exact(&p.body, &s2, &cfg).unwrap().scale(&(Rat::one() - &q)));
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn sampling_splits_over_the_support(lo in -3i64..3, width in 1i64..5) {
        let p = parse_program(&format!("input x: int; y :~ uniform({lo} .. {lo} + {width}); x := x + y")).unwrap();
        let d = denote_exact(&p.body, &parse_state("{x = 10}").unwrap(), &Config::default()).unwrap().project(&["x"]);
        prop_assert_eq!(d.len() as i64, width);
        for v in lo..lo + width {
            prop_assert_eq!(d.get(&State::from_pairs([("x", Value::int(10 + v))])), rat(1, width));
        }
    }

    #[test]
    fn parallel_and_sequential_agree(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let p = common::program(&common::bounded_loop_source(&mut r));
        let s = common::state(&mut r);
        let a = denote_exact(&p.body, &s, &Config::default()).unwrap();
        let b = denote_exact(&p.body, &s, &Config::sequential()).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn expectation_of_a_sum_program() {
    let d = run("input x: int; y :~ uniform(0 .. 4); z :~ bernoulli(1/4); w := y + z", "{x = 0}");
    let e = expected(&d, |s| Ok(s.get("w").unwrap().as_num()?.clone())).unwrap();
    assert_eq!(e, Ext::Fin(rat(3, 2) + rat(1, 4)));
    assert_eq!(d.mass(), &int(1));
}
