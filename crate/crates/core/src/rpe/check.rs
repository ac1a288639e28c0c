use std::collections::HashSet;

use serde::Serialize;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::lang::analysis::{all_loops_bounded, classify_loop};
use crate::lang::ast::{Command, Expr, Side};
use crate::lang::eval::{eval_bool, eval_relexp};
use crate::num::Ext;
use crate::report::{CheckReport, Witness};
use crate::semantics::denote_exact;
use crate::state::State;
use crate::wpe::Wpe;

use super::coupling::Specs;
use super::engine::{Engine, MAX_PAIRS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairMode {
    /// Both runs take the same guard; disagreeing pairs are terminal.
    Sync,
    /// All four guard combinations; a lone live run steps by itself.
    Async,
}

/// A finite set of state pairs at the head of a loop.
#[derive(Clone, Debug, Serialize)]
pub struct PairSpace {
    pairs: Vec<(State, State)>,
    closed_under: Option<PairMode>,
}

fn loop_parts(lp: &Command) -> Result<(&Expr, &Command)> {
    match lp {
        Command::While { cond, body, .. } => Ok((cond, body)),
        _ => Err(Error::Precondition("expected a while loop".into())),
    }
}

fn step(
    engine: &Engine,
    cond: &Expr,
    body: &Command,
    mode: PairMode,
    s1: &State,
    s2: &State,
    cfg: &Config,
    out: &mut Vec<(State, State)>,
) -> Result<()> {
    match (eval_bool(cond, s1)?, eval_bool(cond, s2)?, mode) {
        (true, true, _) => engine.successors(body, s1, s2, out)?,
        (true, false, PairMode::Async) => {
            for (t, _) in denote_exact(body, s1, cfg)?.iter() {
                out.push((t.clone(), s2.clone()));
            }
        }
        (false, true, PairMode::Async) => {
            for (t, _) in denote_exact(body, s2, cfg)?.iter() {
                out.push((s1.clone(), t.clone()));
            }
        }
        _ => {}
    }
    Ok(())
}

impl PairSpace {
    /// Pairs given directly; callers of the checkers must make them closed.
    pub fn from_pairs(pairs: Vec<(State, State)>) -> PairSpace {
        PairSpace { pairs, closed_under: None }
    }

    /// Forward closure of `init` under one iteration of the loop body, using
    /// the coupling supports of `specs` (product supports at optimal sites).
    pub fn explore(lp: &Command, init: &[(State, State)], specs: &Specs, mode: PairMode, cfg: &Config) -> Result<PairSpace> {
        let (cond, body) = loop_parts(lp)?;
        let engine = Engine::with_specs(cfg, specs);
        let mut seen: HashSet<(State, State)> = HashSet::new();
        let mut pairs = Vec::new();
        for p in init {
            if seen.insert(p.clone()) {
                pairs.push(p.clone());
            }
        }
        let mut i = 0;
        while i < pairs.len() {
            let (a, b) = pairs[i].clone();
            let mut succ = Vec::new();
            step(&engine, cond, body, mode, &a, &b, cfg, &mut succ)?;
            for p in succ {
                if seen.insert(p.clone()) {
                    pairs.push(p);
                }
            }
            if pairs.len() > MAX_PAIRS {
                return Err(Error::StateSpace(format!("pair space exceeds {MAX_PAIRS} pairs")));
            }
            i += 1;
        }
        Ok(PairSpace { pairs, closed_under: Some(mode) })
    }

    pub fn pairs(&self) -> &[(State, State)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn closed_under(&self) -> Option<PairMode> {
        self.closed_under
    }

    /// A successor outside the space, if any.
    pub fn missing_successor(&self, lp: &Command, specs: &Specs, mode: PairMode, cfg: &Config) -> Result<Option<(State, State)>> {
        let (cond, body) = loop_parts(lp)?;
        let engine = Engine::with_specs(cfg, specs);
        let members: HashSet<&(State, State)> = self.pairs.iter().collect();
        for (a, b) in &self.pairs {
            let mut succ = Vec::new();
            step(&engine, cond, body, mode, a, b, cfg, &mut succ)?;
            if let Some(p) = succ.into_iter().find(|p| !members.contains(p)) {
                return Ok(Some(p));
            }
        }
        Ok(None)
    }

    fn require_closed(&self, lp: &Command, specs: &Specs, mode: PairMode, cfg: &Config) -> Result<()> {
        if self.closed_under == Some(mode) || (self.closed_under == Some(PairMode::Async) && mode == PairMode::Sync) {
            return Ok(());
        }
        match self.missing_successor(lp, specs, mode, cfg)? {
            None => Ok(()),
            Some((a, b)) => Err(Error::Unclosed(format!("successor ({a}, {b}) is missing"))),
        }
    }
}

/// Values of a relational expectation on a pair space.
#[derive(Clone, Debug, Serialize)]
pub struct RelExpTable {
    pub entries: Vec<((State, State), Ext)>,
    /// Some loop fixpoint stopped early; every entry is then a lower bound.
    pub lower_approx: bool,
    pub rounds: usize,
    pub pairs_explored: usize,
}

impl RelExpTable {
    pub fn get(&self, s1: &State, s2: &State) -> Option<&Ext> {
        self.entries.iter().find(|((a, b), _)| a == s1 && b == s2).map(|(_, v)| v)
    }
}

/// `rpe(c, E)` on every pair, with optimal couplings at every site. When `c`
/// is itself a loop the space must be closed under its body.
pub fn rpe_exact(c: &Command, e: &Expr, space: &PairSpace, cfg: &Config) -> Result<RelExpTable> {
    if matches!(c, Command::While { .. }) {
        space.require_closed(c, &Specs::new(), PairMode::Sync, cfg)?;
    }
    rpe_table(c, e, None, space.pairs(), cfg)
}

/// Like [`rpe_exact`] but with the couplings in `specs` where given.
pub fn rpe_with_specs(c: &Command, e: &Expr, specs: &Specs, pairs: &[(State, State)], cfg: &Config) -> Result<RelExpTable> {
    rpe_table(c, e, Some(specs), pairs, cfg)
}

fn rpe_table(c: &Command, e: &Expr, specs: Option<&Specs>, pairs: &[(State, State)], cfg: &Config) -> Result<RelExpTable> {
    let rows = crate::par::try_map(cfg.parallel, pairs, |(s1, s2)| {
        let engine = match specs {
            Some(sp) => Engine::with_specs(cfg, sp),
            None => Engine::optimal(cfg),
        };
        let v = engine.pre(c, &|a: &State, b: &State| eval_relexp(e, a, b), s1, s2)?;
        Ok((v, engine.lower_approx(), engine.rounds(), engine.pairs_explored()))
    })?;
    let mut t = RelExpTable { entries: Vec::with_capacity(pairs.len()), lower_approx: false, rounds: 0, pairs_explored: 0 };
    for (p, (v, approx, rounds, explored)) in pairs.iter().zip(rows) {
        t.entries.push((p.clone(), v));
        t.lower_approx |= approx;
        t.rounds += rounds;
        t.pairs_explored += explored;
    }
    Ok(t)
}

/// Park induction for `rpe(while b do body, E) <= I`: checks
/// `[b1 & b2] * rpe(body, I) + [!b1 & !b2] * E + [b1 != b2] * inf <= I`
/// on every pair, with `specs` at the sampling sites of the body.
pub fn check_invariant(lp: &Command, e: &Expr, inv: &Expr, specs: &Specs, space: &PairSpace, cfg: &Config) -> Result<CheckReport> {
    let (cond, body) = loop_parts(lp)?;
    space.require_closed(lp, specs, PairMode::Sync, cfg)?;
    let rows = crate::par::try_map(cfg.parallel, space.pairs(), |(s1, s2)| {
        let lhs = match (eval_bool(cond, s1)?, eval_bool(cond, s2)?) {
            (true, true) => {
                Engine::with_specs(cfg, specs).pre(body, &|a: &State, b: &State| eval_relexp(inv, a, b), s1, s2)?
            }
            (false, false) => eval_relexp(e, s1, s2)?,
            _ => Ext::Inf,
        };
        Ok((lhs, eval_relexp(inv, s1, s2)?))
    })?;
    Ok(collect("invariant", space, rows))
}

fn collect(name: &str, space: &PairSpace, rows: Vec<(Ext, Ext)>) -> CheckReport {
    let mut report = CheckReport::new(name);
    for ((s1, s2), (lhs, rhs)) in space.pairs().iter().zip(rows) {
        let ok = lhs <= rhs;
        let strict = lhs < rhs;
        report.record(ok, strict, || Witness::pair(s1, s2, lhs, rhs));
    }
    report.stats.pairs_explored = space.len();
    report.finish()
}

/// One-sided pre-expectation: the right (left) state is held fixed while
/// `c` runs on the other side, `E_{t ~ [[c]]s1}[E(t, s2)]` for `Left`.
pub fn rpe_one_sided(side: Side, c: &Command, e: &Expr, s1: &State, s2: &State, cfg: &Config) -> Result<Ext> {
    if !all_loops_bounded(c) {
        return Err(Error::NotTerminating("one-sided analysis needs every loop to be a bounded counter loop".into()));
    }
    let w = Wpe::new(cfg);
    let v = match side {
        Side::Left => w.pre(c, &|t: &State| eval_relexp(e, t, s2), s1)?,
        Side::Right => w.pre(c, &|t: &State| eval_relexp(e, s1, t), s2)?,
    };
    if w.lower_approx() {
        return Err(Error::Budget("one-sided fixpoint did not stabilize".into()));
    }
    Ok(v)
}

/// Asynchronous loop rule: checks
/// `[b1 & b2] * rpe(body, I) + [b1 & !b2] * rpe_left(body, I) + [!b1 & b2] * rpe_right(body, I) + [!b1 & !b2] * E <= I`.
///
/// The side condition of the rule holds for bounded counter loops; other
/// loops give an inconclusive report.
pub fn check_async_invariant(
    lp: &Command,
    e: &Expr,
    inv: &Expr,
    specs: &Specs,
    space: &PairSpace,
    cfg: &Config,
) -> Result<CheckReport> {
    let (cond, body) = loop_parts(lp)?;
    if classify_loop(cond, body).is_none() || !all_loops_bounded(body) {
        return Ok(CheckReport::inconclusive(
            "async_invariant",
            "the loop is not a bounded counter loop, so the side condition of the asynchronous rule cannot be discharged",
        ));
    }
    space.require_closed(lp, specs, PairMode::Async, cfg)?;
    let rows = crate::par::try_map(cfg.parallel, space.pairs(), |(s1, s2)| {
        let lhs = match (eval_bool(cond, s1)?, eval_bool(cond, s2)?) {
            (true, true) => {
                Engine::with_specs(cfg, specs).pre(body, &|a: &State, b: &State| eval_relexp(inv, a, b), s1, s2)?
            }
            (true, false) => rpe_one_sided(Side::Left, body, inv, s1, s2, cfg)?,
            (false, true) => rpe_one_sided(Side::Right, body, inv, s1, s2, cfg)?,
            (false, false) => eval_relexp(e, s1, s2)?,
        };
        Ok((lhs, eval_relexp(inv, s1, s2)?))
    })?;
    Ok(collect("async_invariant", space, rows))
}
