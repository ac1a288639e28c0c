//! Random pWhile programs, relational expectations and state pairs shared by
//! the acceptance suite and the property tests.

#![allow(dead_code)]

use kantorel::lang::ast::{Command, Expr};
use kantorel::lang::{parse_program, parse_relexp, signature, Program};
use kantorel::rpe::{RuleInstance, ExpRule};
use kantorel::state::{State, Value};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const HEADER: &str = "input x: int, y: int, z: int, b: bool;\n";

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn num_expr(r: &mut ChaCha8Rng) -> String {
    let atoms = ["x", "y", "z", "0", "1", "2"];
    match r.gen_range(0..6) {
        0 => atoms.choose(r).unwrap().to_string(),
        1 => format!("{} + 1", ["x", "y"].choose(r).unwrap()),
        2 => format!("monus({}, 1)", ["x", "y"].choose(r).unwrap()),
        3 => "2 - y".into(),
        4 => "x * y".into(),
        _ => format!("[{}] * 2", bool_expr(r)),
    }
}

fn bool_expr(r: &mut ChaCha8Rng) -> String {
    match r.gen_range(0..5) {
        0 => "b".into(),
        1 => "x < y".into(),
        2 => "x == 0".into(),
        3 => "!b".into(),
        _ => "y != z".into(),
    }
}

fn dist_expr(r: &mut ChaCha8Rng) -> String {
    match r.gen_range(0..5) {
        0 => format!("uniform(0 .. {})", r.gen_range(1..4)),
        1 => format!("bernoulli({}/{})", r.gen_range(0..4), 3),
        2 => "uniform{x, y, 2}".into(),
        3 => "table{0: 1/4, 1: 1/2, 2: 1/4}".into(),
        _ => "uniform(x .. x + 2)".into(),
    }
}

fn atomic(r: &mut ChaCha8Rng) -> String {
    let v = ["x", "y"].choose(r).unwrap();
    match r.gen_range(0..5) {
        0 => "skip".into(),
        1 | 2 => format!("{v} := {}", num_expr(r)),
        3 => format!("{v} :~ {}", dist_expr(r)),
        _ => format!("b := {}", bool_expr(r)),
    }
}

fn command(r: &mut ChaCha8Rng, depth: usize) -> String {
    if depth == 0 {
        return atomic(r);
    }
    match r.gen_range(0..6) {
        0 | 1 => format!("{}; {}", command(r, depth - 1), command(r, depth - 1)),
        2 => format!("if {} then {} else {} end", bool_expr(r), command(r, depth - 1), command(r, depth - 1)),
        _ => atomic(r),
    }
}

/// A loop-free program over `x, y, z, b`; `z` is never written.
pub fn loop_free_source(r: &mut ChaCha8Rng) -> String {
    let depth = r.gen_range(1..4);
    format!("{HEADER}{}", command(r, depth))
}

/// A counter loop with a loop-free body and 1 to 3 iterations.
pub fn bounded_loop_source(r: &mut ChaCha8Rng) -> String {
    let depth = r.gen_range(1..3);
    let body = command(r, depth);
    let n = r.gen_range(1..4);
    format!("{HEADER}i := 0;\nwhile i < {n} do\n  {body};\n  i := i + 1\nend")
}

pub fn program(src: &str) -> Program {
    parse_program(src).unwrap_or_else(|e| panic!("generated program does not parse: {e}\n{src}"))
}

const RELEXPS: [&str; 8] = [
    "abs(x<1> - x<2>)",
    "[x<1> != x<2>]",
    "[x<1> != x<2> || y<1> != y<2>]",
    "abs(x<1> - x<2>) + abs(y<1> - y<2>)",
    "(1/2) * [b<1> != b<2>] + abs(y<1> - x<2>)",
    "max(abs(x<1> - y<2>), [b<1> != b<2>])",
    "abs(x<1> * y<2> - y<1>)",
    "[x<1> + y<1> != x<2> + y<2>] * (z<1> + 1)",
];

pub fn relexp_source(r: &mut ChaCha8Rng) -> &'static str {
    RELEXPS.choose(r).unwrap()
}

pub fn relexp(p: &Program, src: &str) -> Expr {
    parse_relexp(src, &signature(p).unwrap()).unwrap_or_else(|e| panic!("bad relational expectation {src}: {e}"))
}

pub fn state(r: &mut ChaCha8Rng) -> State {
    State::from_pairs([
        ("x", Value::int(r.gen_range(0..3))),
        ("y", Value::int(r.gen_range(0..3))),
        ("z", Value::int(r.gen_range(0..3))),
        ("b", Value::Bool(r.gen_bool(0.5))),
    ])
}

/// Pairs that agree on the guard variables half of the time, so that the
/// synchronous rules are exercised as well as the `inf` branches.
pub fn pairs(r: &mut ChaCha8Rng, n: usize) -> Vec<(State, State)> {
    (0..n)
        .map(|_| {
            let s1 = state(r);
            let s2 = if r.gen_bool(0.5) { s1.clone() } else { state(r) };
            (s1, s2)
        })
        .collect()
}

/// An instance for one algebraic rule. `e2` dominates `e` for Mono and
/// mentions only the unwritten `z` for Const.
pub fn fig3_instance(r: &mut ChaCha8Rng, rule: ExpRule) -> RuleInstance {
    let p = program(&loop_free_source(r));
    let e_src = relexp_source(r);
    let e = relexp(&p, e_src);
    let e2_src = match rule {
        ExpRule::Mono if r.gen_bool(0.5) => format!("{e_src} + [y<1> != y<2>]"),
        ExpRule::Mono => format!("({e_src}) * 2"),
        ExpRule::Const => ["abs(z<1> - z<2>)", "1/3", "z<1> + 2 * z<2>"].choose(r).unwrap().to_string(),
        _ => relexp_source(r).to_string(),
    };
    let e2 = relexp(&p, &e2_src);
    let factor = [(0, 1), (1, 2), (1, 1), (2, 1), (7, 3)].choose(r).map(|&(n, d)| kantorel::num::rat(n, d));
    RuleInstance { program: p.body, e, e2: Some(e2), factor, pairs: pairs(r, 4) }
}

/// All sampling commands of a program, in site order.
pub fn samples(c: &Command) -> Vec<Command> {
    let mut out = Vec::new();
    c.visit(&mut |c| {
        if matches!(c, Command::Sample { .. }) {
            out.push(c.clone());
        }
    });
    out
}
