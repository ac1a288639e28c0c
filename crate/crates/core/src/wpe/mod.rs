//! Unary weakest pre-expectations, omega-invariant checks for loops, and
//! lower bounds on Total Variation distance from separating expectations.

use std::cell::{Cell, RefCell};
use std::collections::HashMap;

use num_traits::{One, Signed};
use serde::Serialize;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::lang::analysis::classify_loop;
use crate::lang::ast::{Command, Expr};
use crate::lang::eval::{eval, eval_bool, eval_exp};
use crate::num::{Ext, Rat};
use crate::report::{CheckReport, Verdict, Witness};
use crate::semantics::eval_dist;
use crate::state::{State, Value};

/// A unary expectation given as a function on states.
pub type StateFn<'a> = dyn Fn(&State) -> Result<Ext> + 'a;

/// Upper bound on the states explored for one loop.
pub const MAX_STATES: usize = 1 << 21;

/// Evaluates `wpe(c, F)` at single states.
pub struct Wpe<'a> {
    cfg: &'a Config,
    lower_approx: Cell<bool>,
    rounds: Cell<usize>,
}

impl<'a> Wpe<'a> {
    pub fn new(cfg: &'a Config) -> Wpe<'a> {
        Wpe { cfg, lower_approx: Cell::new(false), rounds: Cell::new(0) }
    }

    pub fn lower_approx(&self) -> bool {
        self.lower_approx.get()
    }

    pub fn rounds(&self) -> usize {
        self.rounds.get()
    }

    pub fn pre(&self, c: &Command, post: &StateFn, s: &State) -> Result<Ext> {
        match c {
            Command::Skip => post(s),
            Command::Assign { var, expr, .. } => post(&s.with(var, eval(expr, s)?)),
            Command::Sample { var, dist, .. } => eval_dist(dist, s)?.expected(|v| post(&s.with(var, v.clone()))),
            Command::Seq(cs) => self.pre_seq(cs, post, s),
            Command::If { cond, then_, else_ } => {
                if eval_bool(cond, s)? {
                    self.pre(then_, post, s)
                } else {
                    self.pre(else_, post, s)
                }
            }
            Command::While { cond, body, .. } => self.pre_while(cond, body, post, s),
        }
    }

    fn pre_seq(&self, cs: &[Command], post: &StateFn, s: &State) -> Result<Ext> {
        match cs.split_first() {
            None => post(s),
            Some((c, [])) => self.pre(c, post, s),
            Some((c, rest)) => self.pre(c, &|t: &State| self.pre_seq(rest, post, t), s),
        }
    }

    fn pre_while(&self, cond: &Expr, body: &Command, post: &StateFn, s: &State) -> Result<Ext> {
        let (states, inside) = explore(cond, body, s)?;
        let index: HashMap<&State, usize> = states.iter().enumerate().map(|(i, t)| (t, i)).collect();
        let mut init = Vec::with_capacity(states.len());
        for (t, &g) in states.iter().zip(&inside) {
            init.push(if g { Ext::zero() } else { post(t)? });
        }
        let values = RefCell::new(init);
        let bounded = classify_loop(cond, body).is_some();
        let eps = Ext::Fin(self.cfg.epsilon_rat());
        let lookup = |t: &State| -> Result<Ext> {
            match index.get(t) {
                Some(&j) => Ok(values.borrow()[j].clone()),
                None => Err(Error::Unclosed(format!("loop successor {t} was not explored"))),
            }
        };
        let order: Vec<usize> = (0..states.len()).rev().filter(|&i| inside[i]).collect();
        let mut round = 0;
        loop {
            let mut changed = false;
            let mut small_steps = true;
            for &i in &order {
                let new = self.pre(body, &lookup, &states[i])?;
                let mut vals = values.borrow_mut();
                if new != vals[i] {
                    small_steps &= matches!(new.sub(&vals[i]), Ok(ref d) if *d <= eps);
                    vals[i] = new;
                    changed = true;
                }
            }
            round += 1;
            if !changed {
                break;
            }
            if round >= self.cfg.max_iters || (!bounded && small_steps) {
                self.lower_approx.set(true);
                break;
            }
        }
        self.rounds.set(self.rounds.get() + round);
        let v = values.borrow()[0].clone();
        Ok(v)
    }
}

/// Successor states of one run of `c` from `s`.
pub fn successors(c: &Command, s: &State, out: &mut Vec<State>) -> Result<()> {
    match c {
        Command::Skip => out.push(s.clone()),
        Command::Assign { var, expr, .. } => out.push(s.with(var, eval(expr, s)?)),
        Command::Sample { var, dist, .. } => {
            for (v, _) in eval_dist(dist, s)?.iter() {
                out.push(s.with(var, v.clone()));
            }
        }
        Command::Seq(cs) => {
            let mut cur = vec![s.clone()];
            for c in cs {
                let mut next = Vec::new();
                for t in &cur {
                    successors(c, t, &mut next)?;
                }
                next.sort();
                next.dedup();
                cur = next;
            }
            out.extend(cur);
        }
        Command::If { cond, then_, else_ } => {
            if eval_bool(cond, s)? {
                successors(then_, s, out)?
            } else {
                successors(else_, s, out)?
            }
        }
        Command::While { cond, body, .. } => {
            let (states, inside) = explore(cond, body, s)?;
            out.extend(states.into_iter().zip(inside).filter(|(_, g)| !g).map(|(t, _)| t));
        }
    }
    Ok(())
}

/// States reachable at the head of a loop, with their guard values.
fn explore(cond: &Expr, body: &Command, s: &State) -> Result<(Vec<State>, Vec<bool>)> {
    let mut states = vec![s.clone()];
    let mut seen: HashMap<State, usize> = HashMap::from([(s.clone(), 0)]);
    let mut inside = Vec::new();
    let mut i = 0;
    while i < states.len() {
        let t = states[i].clone();
        let g = eval_bool(cond, &t)?;
        if g {
            let mut succ = Vec::new();
            successors(body, &t, &mut succ)?;
            for u in succ {
                if !seen.contains_key(&u) {
                    seen.insert(u.clone(), states.len());
                    states.push(u);
                }
            }
            if states.len() > MAX_STATES {
                return Err(Error::StateSpace(format!("loop state space exceeds {MAX_STATES} states")));
            }
        }
        inside.push(g);
        i += 1;
    }
    Ok((states, inside))
}

/// States at the loop head reachable from `init`, in discovery order.
pub fn reachable_states(lp: &Command, init: &[State]) -> Result<Vec<State>> {
    let (cond, body) = loop_parts(lp)?;
    let mut out: Vec<State> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for s in init {
        for t in explore(cond, body, s)?.0 {
            if seen.insert(t.clone()) {
                out.push(t);
            }
        }
    }
    Ok(out)
}

/// `wpe(c, F)` at one state.
pub fn wpe_at(c: &Command, f: &Expr, s: &State, cfg: &Config) -> Result<Ext> {
    Wpe::new(cfg).pre(c, &|t: &State| eval_exp(f, t, &[]), s)
}

#[derive(Clone, Debug, Serialize)]
pub struct WpeTable {
    pub values: Vec<(State, Ext)>,
    /// Some loop stopped before its fixpoint; values are lower bounds.
    pub lower_approx: bool,
    pub rounds: usize,
}

impl WpeTable {
    pub fn get(&self, s: &State) -> Option<&Ext> {
        self.values.iter().find(|(t, _)| t == s).map(|(_, v)| v)
    }
}

pub fn wpe_exact(c: &Command, f: &Expr, states: &[State], cfg: &Config) -> Result<WpeTable> {
    let rows = crate::par::try_map(cfg.parallel, states, |s| {
        let w = Wpe::new(cfg);
        let v = w.pre(c, &|t: &State| eval_exp(f, t, &[]), s)?;
        Ok((s.clone(), v, w.lower_approx(), w.rounds()))
    })?;
    let lower_approx = rows.iter().any(|r| r.2);
    let rounds = rows.iter().map(|r| r.3).sum();
    Ok(WpeTable { values: rows.into_iter().map(|(s, v, _, _)| (s, v)).collect(), lower_approx, rounds })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaKind {
    Upper,
    Lower,
}

fn loop_parts(lp: &Command) -> Result<(&Expr, &Command)> {
    match lp {
        Command::While { cond, body, .. } => Ok((cond, body)),
        _ => Err(Error::Precondition("expected a while loop".into())),
    }
}

/// `I_n` at `s`, with `$n` bound to `n`.
pub fn family_at(family: &Expr, s: &State, n: usize) -> Result<Ext> {
    eval_exp(family, s, &[("$n", Value::int(n as i64))])
}

/// Checks `[!b]*F <= I_0` and `[b]*wpe(body, I_n) + [!b]*F <= I_(n+1)` for
/// `n < cfg.n_max` on every state (`>=` for lower invariants).
pub fn check_omega_invariant(
    lp: &Command,
    f: &Expr,
    family: &Expr,
    kind: OmegaKind,
    states: &[State],
    cfg: &Config,
) -> Result<CheckReport> {
    let (cond, body) = loop_parts(lp)?;
    let name = match kind {
        OmegaKind::Upper => "omega_upper",
        OmegaKind::Lower => "omega_lower",
    };
    let rows = crate::par::try_map(cfg.parallel, states, |s| {
        let mut out = Vec::new();
        let g = eval_bool(cond, s)?;
        for n in 0..=cfg.n_max {
            let lhs = if n == 0 {
                if g {
                    Ext::zero()
                } else {
                    eval_exp(f, s, &[])?
                }
            } else if g {
                Wpe::new(cfg).pre(body, &|t: &State| family_at(family, t, n - 1), s)?
            } else {
                eval_exp(f, s, &[])?
            };
            let rhs = family_at(family, s, n)?;
            let ok = match kind {
                OmegaKind::Upper => lhs <= rhs,
                OmegaKind::Lower => lhs >= rhs,
            };
            out.push((n, ok, lhs, rhs));
        }
        Ok(out)
    })?;
    let mut report = CheckReport::new(name);
    for (s, row) in states.iter().zip(rows) {
        for (n, ok, lhs, rhs) in row {
            let strict = ok && lhs != rhs;
            report.record(ok, strict, || Witness::single(s, Some(n), lhs, rhs));
        }
    }
    report.stats.iterations = cfg.n_max;
    Ok(report.finish())
}

#[derive(Clone, Debug, Serialize)]
pub struct OmegaCertificate {
    pub upper: CheckReport,
    pub lower: CheckReport,
    /// Largest `|I_inf - I_n_max|` over the states, `None` if infinite.
    pub limit_gap: Option<Ext>,
    /// Both checks pass and the supplied limit matches at depth `n_max`:
    /// `wpe(loop, F) = I_inf` on the states.
    pub certified: bool,
}

/// Upper and lower checks of one family plus the limit comparison.
pub fn certify_omega(
    lp: &Command,
    f: &Expr,
    family: &Expr,
    limit: &Expr,
    states: &[State],
    cfg: &Config,
) -> Result<OmegaCertificate> {
    let upper = check_omega_invariant(lp, f, family, OmegaKind::Upper, states, cfg)?;
    let lower = check_omega_invariant(lp, f, family, OmegaKind::Lower, states, cfg)?;
    let eps = Ext::Fin(cfg.epsilon_rat());
    let mut gap = Some(Ext::zero());
    for s in states {
        let a = eval_exp(limit, s, &[])?;
        let b = family_at(family, s, cfg.n_max)?;
        let d = match (&a, &b) {
            (Ext::Fin(x), Ext::Fin(y)) => Some(Ext::Fin((x - y).abs())),
            (Ext::Inf, Ext::Inf) => Some(Ext::zero()),
            _ => None,
        };
        gap = match (gap, d) {
            (Some(g), Some(d)) => Some(g.max(d)),
            _ => None,
        };
    }
    let certified = upper.holds() && lower.holds() && gap.as_ref().is_some_and(|g| *g <= eps);
    Ok(OmegaCertificate { upper, lower, limit_gap: gap, certified })
}

#[derive(Clone, Debug, Serialize)]
pub struct LowerBound {
    #[serde(serialize_with = "crate::num::ser_rat")]
    pub value: Rat,
    #[serde(serialize_with = "crate::num::ser_rat")]
    pub wpe1: Rat,
    #[serde(serialize_with = "crate::num::ser_rat")]
    pub wpe2: Rat,
}

/// `|wpe(c, f)(s1) - wpe(c, f)(s2)|`, a lower bound on the TV distance of
/// the outputs when `0 <= f <= 1` on every reachable final state.
pub fn tv_lower_bound(c: &Command, s1: &State, s2: &State, f: &Expr, cfg: &Config) -> Result<LowerBound> {
    for s in [s1, s2] {
        let mut outs = Vec::new();
        successors(c, s, &mut outs)?;
        for t in outs {
            let v = eval_exp(f, &t, &[])?;
            if v > Ext::one() {
                return Err(Error::Precondition(format!("f = {v} > 1 at reachable state {t}")));
            }
        }
    }
    let w = Wpe::new(cfg);
    let post = |t: &State| eval_exp(f, t, &[]);
    let a = w.pre(c, &post, s1)?;
    let b = w.pre(c, &post, s2)?;
    if w.lower_approx() {
        return Err(Error::Budget("weakest pre-expectation did not reach its fixpoint".into()));
    }
    match (a, b) {
        (Ext::Fin(a), Ext::Fin(b)) => Ok(LowerBound { value: (&a - &b).abs(), wpe1: a, wpe2: b }),
        _ => Err(Error::eval("weakest pre-expectation is infinite")),
    }
}

/// Verdict of the omega certificate in the shape of a single report.
pub fn omega_report(cert: &OmegaCertificate) -> CheckReport {
    let mut r = CheckReport::new("omega");
    r.stats.pairs_checked = cert.upper.stats.pairs_checked + cert.lower.stats.pairs_checked;
    r.stats.violations = cert.upper.stats.violations + cert.lower.stats.violations;
    r.witnesses = cert.upper.witnesses.iter().chain(&cert.lower.witnesses).cloned().collect();
    r.verdict = if !cert.upper.holds() || !cert.lower.holds() {
        Verdict::Fails
    } else if cert.certified {
        Verdict::Holds
    } else {
        Verdict::Inconclusive
    };
    r.message = match r.verdict {
        Verdict::Holds => "upper and lower checks pass; the limit matches at depth n_max".into(),
        Verdict::Fails => "an omega-invariant check fails".into(),
        Verdict::Inconclusive => "both checks pass but the supplied limit does not match at depth n_max".into(),
    };
    r
}

/// `wpe(c, 1)` is exactly 1: the program terminates almost surely from `s`.
pub fn terminates_surely(c: &Command, s: &State, cfg: &Config) -> Result<bool> {
    let w = Wpe::new(cfg);
    let v = w.pre(c, &|_: &State| Ok(Ext::one()), s)?;
    Ok(!w.lower_approx() && v.finite().is_some_and(|q| q.is_one()))
}
