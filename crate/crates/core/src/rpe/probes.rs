//! Finite-scale checks of soundness, continuity and the algebraic rules of
//! the relational pre-expectation operator.

use serde::Serialize;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::lang::analysis::all_loops_bounded;
use crate::lang::ast::{Command, Expr};
use crate::lang::eval::{eval_exp, eval_relexp, Pair};
use crate::num::{Ext, Rat};
use crate::report::{CheckReport, Verdict, Witness};
use crate::semantics::denote_exact;
use crate::state::{State, Value};

use super::coupling::CouplingSpec;
use super::engine::{lift_exact, rpe_sample_bound, Engine, PairFn};

/// Checks `K_E([[c]]s1, [[c]]s2) <= rpe(c, E)(s1, s2)` on every pair.
pub fn soundness_probe(c: &Command, e: &Expr, pairs: &[(State, State)], cfg: &Config) -> Result<CheckReport> {
    if !all_loops_bounded(c) {
        return Err(Error::NotTerminating("soundness probes need bounded loops".into()));
    }
    let post = |a: &State, b: &State| eval_relexp(e, a, b);
    let rows = crate::par::try_map(cfg.parallel, pairs, |(s1, s2)| {
        let lhs = lift_exact(c, &post, s1, s2, cfg)?;
        let rhs = Engine::optimal(cfg).pre(c, &post, s1, s2)?;
        Ok((lhs, rhs))
    })?;
    let mut r = CheckReport::new("soundness");
    for ((s1, s2), (lhs, rhs)) in pairs.iter().zip(rows) {
        let (ok, strict) = (lhs <= rhs, lhs < rhs);
        r.record(ok, strict, || Witness::pair(s1, s2, lhs, rhs));
    }
    Ok(r.finish())
}

/// `E_n` at a pair with `$n` bound to `n`.
pub fn family_pair(family: &Expr, s1: &State, s2: &State, n: usize) -> Result<Ext> {
    eval_exp(family, &Pair(s1, s2), &[("$n", Value::int(n as i64))])
}

/// For a chain `E_n` increasing to `E`, checks that `rpe(c, E_n)` is monotone
/// in `n <= cfg.n_max` and approaches `rpe(c, E)`: within `cfg.epsilon` when
/// the limit is finite; for an infinite limit the sequence must reach `inf`
/// or still be strictly increasing over the upper half of the range.
pub fn continuity_probe(c: &Command, family: &Expr, limit: &Expr, pairs: &[(State, State)], cfg: &Config) -> Result<CheckReport> {
    let eps = Ext::Fin(cfg.epsilon_rat());
    let rows = crate::par::try_map(cfg.parallel, pairs, |(s1, s2)| {
        let engine = Engine::optimal(cfg);
        let mut seq = Vec::with_capacity(cfg.n_max + 1);
        for n in 0..=cfg.n_max {
            let post = |a: &State, b: &State| family_pair(family, a, b, n);
            seq.push(engine.pre(c, &post, s1, s2)?);
        }
        let lim = engine.pre(c, &|a: &State, b: &State| eval_relexp(limit, a, b), s1, s2)?;
        Ok((seq, lim))
    })?;
    let mut r = CheckReport::new("continuity");
    for ((s1, s2), (seq, lim)) in pairs.iter().zip(rows) {
        for n in 0..seq.len() - 1 {
            if seq[n] > seq[n + 1] {
                let w = Witness { n: Some(n), ..Witness::pair(s1, s2, seq[n].clone(), seq[n + 1].clone()) };
                r.record(false, false, || w);
            }
        }
        let last = seq.last().cloned().unwrap_or(Ext::zero());
        let close = match (&lim, &last) {
            (Ext::Fin(_), Ext::Fin(_)) => lim.sub(&last).map(|d| d <= eps).unwrap_or(false),
            (Ext::Inf, Ext::Inf) => true,
            (Ext::Inf, Ext::Fin(_)) => {
                let half = seq.len() / 2;
                seq[half..].windows(2).all(|w| w[0] < w[1])
            }
            (Ext::Fin(_), Ext::Inf) => false,
        };
        let w = Witness { n: Some(cfg.n_max), ..Witness::pair(s1, s2, last.clone(), lim.clone()) };
        r.record(close, false, || w);
    }
    Ok(r.finish())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ExpRule {
    /// `E <= E'` implies `rpe(c, E) <= rpe(c, E')`.
    Mono,
    /// `E'` not mentioning modified variables gives
    /// `rpe(c, E + E') <= rpe(c, E) + E'`.
    Const,
    /// `rpe(c, E) + rpe(c, E') <= rpe(c, E + E')`.
    SupAdd,
    /// For `f(z) = a * z` with `f(inf) = inf`, `rpe(c, f . E) = f . rpe(c, E)`.
    Scale,
}

impl ExpRule {
    pub const ALL: [ExpRule; 4] = [ExpRule::Mono, ExpRule::Const, ExpRule::SupAdd, ExpRule::Scale];

    pub fn name(self) -> &'static str {
        match self {
            ExpRule::Mono => "mono",
            ExpRule::Const => "const",
            ExpRule::SupAdd => "supadd",
            ExpRule::Scale => "scale",
        }
    }
}

/// A program, expectations and pairs for one rule check. `e2` is the second
/// expectation of Mono, Const and SupAdd; `factor` is the slope of Scale.
#[derive(Clone, Debug)]
pub struct RuleInstance {
    pub program: Command,
    pub e: Expr,
    pub e2: Option<Expr>,
    pub factor: Option<Rat>,
    pub pairs: Vec<(State, State)>,
}

/// `a * z` with `f(inf) = inf`, also for `a = 0`.
pub fn linear(a: &Rat, z: &Ext) -> Ext {
    match z {
        Ext::Inf => Ext::Inf,
        Ext::Fin(q) => Ext::Fin(a * q),
    }
}

fn output_pairs(c: &Command, s1: &State, s2: &State, cfg: &Config) -> Result<Vec<(State, State)>> {
    let d1 = denote_exact(c, s1, cfg)?;
    let d2 = denote_exact(c, s2, cfg)?;
    let mut out = Vec::new();
    for (a, _) in d1.iter() {
        for (b, _) in d2.iter() {
            out.push((a.clone(), b.clone()));
        }
    }
    Ok(out)
}

pub fn check_rule_property(rule: ExpRule, inst: &RuleInstance, cfg: &Config) -> Result<CheckReport> {
    let c = &inst.program;
    let e = |a: &State, b: &State| eval_relexp(&inst.e, a, b);
    let e2_expr = || inst.e2.as_ref().ok_or_else(|| Error::Params(format!("{} needs a second expectation", rule.name())));
    let mut r = CheckReport::new(format!("rule_{}", rule.name()));
    match rule {
        ExpRule::Const => {
            let e2 = e2_expr()?;
            let written = c.modified_vars();
            if e2.free_vars().iter().any(|(x, _)| written.contains(x)) {
                return Ok(CheckReport::inconclusive(r.check, "the constant term mentions a modified variable"));
            }
        }
        ExpRule::Mono => {
            let e2 = e2_expr()?;
            for (s1, s2) in &inst.pairs {
                for (a, b) in output_pairs(c, s1, s2, cfg)? {
                    if e(&a, &b)? > eval_relexp(e2, &a, &b)? {
                        return Ok(CheckReport::inconclusive(r.check, format!("premise E <= E' fails at ({a}, {b})")));
                    }
                }
            }
        }
        ExpRule::SupAdd => {
            e2_expr()?;
        }
        ExpRule::Scale => {
            if inst.factor.is_none() {
                return Err(Error::Params("scale needs a factor".into()));
            }
        }
    }
    let rows = crate::par::try_map(cfg.parallel, &inst.pairs, |(s1, s2)| {
        let engine = Engine::optimal(cfg);
        let rpe = |post: &PairFn| engine.pre(c, post, s1, s2);
        Ok(match rule {
            ExpRule::Mono => {
                let e2 = inst.e2.as_ref().unwrap();
                let lhs = rpe(&e)?;
                let rhs = rpe(&|a: &State, b: &State| eval_relexp(e2, a, b))?;
                (lhs <= rhs, lhs, rhs)
            }
            ExpRule::Const => {
                let e2 = inst.e2.as_ref().unwrap();
                let sum = |a: &State, b: &State| Ok(e(a, b)?.add(&eval_relexp(e2, a, b)?));
                let lhs = rpe(&sum)?;
                let rhs = rpe(&e)?.add(&eval_relexp(e2, s1, s2)?);
                (lhs <= rhs, lhs, rhs)
            }
            ExpRule::SupAdd => {
                let e2 = inst.e2.as_ref().unwrap();
                let f = |a: &State, b: &State| eval_relexp(e2, a, b);
                let sum = |a: &State, b: &State| Ok(e(a, b)?.add(&f(a, b)?));
                let lhs = rpe(&e)?.add(&rpe(&f)?);
                let rhs = rpe(&sum)?;
                (lhs <= rhs, lhs, rhs)
            }
            ExpRule::Scale => {
                let a = inst.factor.as_ref().unwrap();
                let scaled = |x: &State, y: &State| Ok(linear(a, &e(x, y)?));
                let lhs = rpe(&scaled)?;
                let rhs = linear(a, &rpe(&e)?);
                (lhs == rhs, lhs, rhs)
            }
        })
    })?;
    for ((s1, s2), (ok, lhs, rhs)) in inst.pairs.iter().zip(rows) {
        let strict = ok && lhs != rhs;
        if strict && rule == ExpRule::SupAdd && r.stats.strict == 0 {
            r.note(Witness::pair(s1, s2, lhs.clone(), rhs.clone()));
        }
        r.record(ok, strict, || Witness::pair(s1, s2, lhs, rhs));
    }
    if r.verdict == Verdict::Fails {
        r.witnesses.retain(|w| match rule {
            ExpRule::Scale => w.lhs != w.rhs,
            _ => w.lhs > w.rhs,
        });
    }
    Ok(r.finish())
}

/// Samp rule: the bound from any coupling dominates the optimal value at
/// the site, on every pair.
pub fn check_samp_rule(sample: &Command, e: &Expr, spec: &CouplingSpec, pairs: &[(State, State)]) -> Result<CheckReport> {
    let mut r = CheckReport::new("rule_samp");
    for (s1, s2) in pairs {
        let bound = rpe_sample_bound(sample, e, spec, s1, s2)?;
        let opt = rpe_sample_bound(sample, e, &CouplingSpec::Optimal, s1, s2)?;
        let (ok, strict) = (bound >= opt, bound > opt);
        r.record(ok, strict, || Witness::pair(s1, s2, opt, bound));
    }
    Ok(r.finish())
}
