use std::cell::{Cell, RefCell};
use std::collections::HashMap;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::lang::analysis::classify_loop;
use crate::lang::ast::{Command, DistExpr, Expr, Site};
use crate::lang::eval::{eval, eval_bool, eval_relexp};
use crate::num::Ext;
use crate::semantics::{denote, eval_dist, JointDist, Status, SubDist};
use crate::state::{State, Value};
use crate::transport::kantorovich_value;

use super::coupling::{CouplingSpec, Specs};

/// A relational expectation given as a function on state pairs.
pub type PairFn<'a> = dyn Fn(&State, &State) -> Result<Ext> + 'a;

/// Upper bound on the pairs explored for one loop.
pub const MAX_PAIRS: usize = 1 << 21;

/// Evaluates the relational pre-expectation operator on single pairs.
///
/// Sampling uses the coupling from `specs` when there is one for the site,
/// and the optimal (Kantorovich) coupling otherwise.
pub struct Engine<'a> {
    cfg: &'a Config,
    specs: Option<&'a Specs>,
    lower_approx: Cell<bool>,
    rounds: Cell<usize>,
    pairs: Cell<usize>,
}

enum Node {
    Body,
    Exit,
    Disagree,
}

impl<'a> Engine<'a> {
    pub fn optimal(cfg: &'a Config) -> Engine<'a> {
        Engine { cfg, specs: None, lower_approx: Cell::new(false), rounds: Cell::new(0), pairs: Cell::new(0) }
    }

    pub fn with_specs(cfg: &'a Config, specs: &'a Specs) -> Engine<'a> {
        Engine { specs: Some(specs), ..Engine::optimal(cfg) }
    }

    /// True once some loop stopped before its fixpoint was reached.
    pub fn lower_approx(&self) -> bool {
        self.lower_approx.get()
    }

    /// Fixpoint rounds summed over all loops solved so far.
    pub fn rounds(&self) -> usize {
        self.rounds.get()
    }

    /// Loop pairs explored so far.
    pub fn pairs_explored(&self) -> usize {
        self.pairs.get()
    }

    fn spec(&self, site: Site) -> &CouplingSpec {
        static OPT: CouplingSpec = CouplingSpec::Optimal;
        self.specs.map_or(&OPT, |s| s.get(site.index))
    }

    /// `rpe(c, post)(s1, s2)`.
    pub fn pre(&self, c: &Command, post: &PairFn, s1: &State, s2: &State) -> Result<Ext> {
        match c {
            Command::Skip => post(s1, s2),
            Command::Assign { var, expr, .. } => {
                let v1 = eval(expr, s1)?;
                let v2 = eval(expr, s2)?;
                post(&s1.with(var, v1), &s2.with(var, v2))
            }
            Command::Sample { var, dist, site } => {
                let cont = |v1: &Value, v2: &Value| post(&s1.with(var, v1.clone()), &s2.with(var, v2.clone()));
                self.sample_with(*site, var, dist, &cont, s1, s2)
            }
            Command::Seq(cs) => self.pre_seq(cs, post, s1, s2),
            Command::If { cond, then_, else_ } => match (eval_bool(cond, s1)?, eval_bool(cond, s2)?) {
                (true, true) => self.pre(then_, post, s1, s2),
                (false, false) => self.pre(else_, post, s1, s2),
                _ => Ok(Ext::Inf),
            },
            Command::While { cond, body, .. } => self.pre_while(cond, body, post, s1, s2),
        }
    }

    fn pre_seq(&self, cs: &[Command], post: &PairFn, s1: &State, s2: &State) -> Result<Ext> {
        match cs.split_first() {
            None => post(s1, s2),
            Some((c, [])) => self.pre(c, post, s1, s2),
            Some((c, rest)) => self.pre(c, &|t1: &State, t2: &State| self.pre_seq(rest, post, t1, t2), s1, s2),
        }
    }

    /// The joint distribution used at a site, or `None` for the optimal one.
    pub fn coupling(
        &self,
        site: Site,
        var: &str,
        d1: &SubDist<Value>,
        d2: &SubDist<Value>,
        s1: &State,
        s2: &State,
    ) -> Result<Option<JointDist<Value>>> {
        let name = format!("#{} ({var} at {}:{})", site.index, site.span.line, site.span.col);
        self.spec(site).couple(&name, d1, d2, s1, s2)
    }

    fn sample_with(
        &self,
        site: Site,
        var: &str,
        dist: &DistExpr,
        cont: &dyn Fn(&Value, &Value) -> Result<Ext>,
        s1: &State,
        s2: &State,
    ) -> Result<Ext> {
        let d1 = eval_dist(dist, s1)?;
        let d2 = eval_dist(dist, s2)?;
        match self.coupling(site, var, &d1, &d2, s1, s2)? {
            None => kantorovich_value(&d1, &d2, |a, b| cont(a, b)),
            Some(j) => j.expected(|a, b| cont(a, b)),
        }
    }

    /// Pairs reachable in one synchronized step of `c` along the supports of
    /// the couplings in use. Guard disagreement has no successors.
    pub fn successors(&self, c: &Command, s1: &State, s2: &State, out: &mut Vec<(State, State)>) -> Result<()> {
        match c {
            Command::Skip => out.push((s1.clone(), s2.clone())),
            Command::Assign { var, expr, .. } => {
                out.push((s1.with(var, eval(expr, s1)?), s2.with(var, eval(expr, s2)?)));
            }
            Command::Sample { var, dist, site } => {
                let d1 = eval_dist(dist, s1)?;
                let d2 = eval_dist(dist, s2)?;
                match self.coupling(*site, var, &d1, &d2, s1, s2)? {
                    None => {
                        for (a, _) in d1.iter() {
                            for (b, _) in d2.iter() {
                                out.push((s1.with(var, a.clone()), s2.with(var, b.clone())));
                            }
                        }
                    }
                    Some(j) => {
                        for (a, b, _) in j.iter() {
                            out.push((s1.with(var, a.clone()), s2.with(var, b.clone())));
                        }
                    }
                }
            }
            Command::Seq(cs) => {
                let mut cur = vec![(s1.clone(), s2.clone())];
                for c in cs {
                    let mut next = Vec::new();
                    for (a, b) in &cur {
                        self.successors(c, a, b, &mut next)?;
                    }
                    next.sort();
                    next.dedup();
                    cur = next;
                }
                out.extend(cur);
            }
            Command::If { cond, then_, else_ } => match (eval_bool(cond, s1)?, eval_bool(cond, s2)?) {
                (true, true) => self.successors(then_, s1, s2, out)?,
                (false, false) => self.successors(else_, s1, s2, out)?,
                _ => {}
            },
            Command::While { cond, body, .. } => {
                let (nodes, kinds, _) = self.explore(cond, body, s1, s2)?;
                for (p, k) in nodes.into_iter().zip(kinds) {
                    if matches!(k, Node::Exit) {
                        out.push(p);
                    }
                }
            }
        }
        Ok(())
    }

    #[allow(clippy::type_complexity)]
    fn explore(
        &self,
        cond: &Expr,
        body: &Command,
        s1: &State,
        s2: &State,
    ) -> Result<(Vec<(State, State)>, Vec<Node>, HashMap<(State, State), usize>)> {
        let mut index = HashMap::new();
        let mut nodes = vec![(s1.clone(), s2.clone())];
        index.insert(nodes[0].clone(), 0);
        let mut kinds = Vec::new();
        let mut i = 0;
        while i < nodes.len() {
            let (a, b) = nodes[i].clone();
            let kind = match (eval_bool(cond, &a)?, eval_bool(cond, &b)?) {
                (true, true) => Node::Body,
                (false, false) => Node::Exit,
                _ => Node::Disagree,
            };
            if matches!(kind, Node::Body) {
                let mut succ = Vec::new();
                self.successors(body, &a, &b, &mut succ)?;
                for p in succ {
                    if !index.contains_key(&p) {
                        index.insert(p.clone(), nodes.len());
                        nodes.push(p);
                    }
                }
                if nodes.len() > MAX_PAIRS {
                    return Err(Error::StateSpace(format!("loop pair space exceeds {MAX_PAIRS} pairs")));
                }
            }
            kinds.push(kind);
            i += 1;
        }
        Ok((nodes, kinds, index))
    }

    /// Least fixed point of the loop functional over the pairs reachable
    /// from `(s1, s2)`, by monotone iteration from 0. Pairs are updated in
    /// place in reverse discovery order, so every intermediate table is
    /// below the fixpoint and bounded loops settle in few rounds.
    fn pre_while(&self, cond: &Expr, body: &Command, post: &PairFn, s1: &State, s2: &State) -> Result<Ext> {
        let (nodes, kinds, index) = self.explore(cond, body, s1, s2)?;
        self.pairs.set(self.pairs.get() + nodes.len());
        let mut init = Vec::with_capacity(nodes.len());
        for ((a, b), k) in nodes.iter().zip(&kinds) {
            init.push(match k {
                Node::Body => Ext::zero(),
                Node::Exit => post(a, b)?,
                Node::Disagree => Ext::Inf,
            });
        }
        let values = RefCell::new(init);
        let bounded = classify_loop(cond, body).is_some();
        let eps = Ext::Fin(self.cfg.epsilon_rat());
        let lookup = |t1: &State, t2: &State| -> Result<Ext> {
            match index.get(&(t1.clone(), t2.clone())) {
                Some(&j) => Ok(values.borrow()[j].clone()),
                None => Err(Error::Unclosed(format!("loop successor ({t1}, {t2}) was not explored"))),
            }
        };
        let order: Vec<usize> = (0..nodes.len()).rev().filter(|&i| matches!(kinds[i], Node::Body)).collect();
        let mut round = 0;
        loop {
            let mut changed = false;
            let mut small_steps = true;
            for &i in &order {
                let (a, b) = &nodes[i];
                let new = self.pre(body, &lookup, a, b)?;
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

/// `rpe(c, E)` at one pair with optimal couplings at every site.
pub fn rpe_at(c: &Command, e: &Expr, s1: &State, s2: &State, cfg: &Config) -> Result<Ext> {
    Engine::optimal(cfg).pre(c, &|a: &State, b: &State| eval_relexp(e, a, b), s1, s2)
}

/// `rpe(c, E)` at one pair using the given couplings.
pub fn rpe_spec_at(c: &Command, e: &Expr, specs: &Specs, s1: &State, s2: &State, cfg: &Config) -> Result<Ext> {
    Engine::with_specs(cfg, specs).pre(c, &|a: &State, b: &State| eval_relexp(e, a, b), s1, s2)
}

/// Kantorovich lifting of `post` through the exact output distributions:
/// `inf` over couplings of `[[c]]s1` and `[[c]]s2` of the expected value.
pub fn lift_exact(c: &Command, post: &PairFn, s1: &State, s2: &State, cfg: &Config) -> Result<Ext> {
    let exact = |s: &State| -> Result<SubDist> {
        let d = denote(c, s, cfg)?;
        if d.status != Status::Exact {
            return Err(Error::Budget(format!("output distribution from {s} is not exact")));
        }
        Ok(d.dist)
    };
    kantorovich_value(&exact(s1)?, &exact(s2)?, |a, b| post(a, b))
}

/// Sampling-rule bound at a single site: the expected value of `E` after
/// the sample under the coupling `spec` (exact transport for `Optimal`).
pub fn rpe_sample_bound(sample: &Command, e: &Expr, spec: &CouplingSpec, s1: &State, s2: &State) -> Result<Ext> {
    let Command::Sample { var, dist, site } = sample else {
        return Err(Error::Precondition("expected a sampling command".into()));
    };
    let specs = Specs::new().with(site.index, spec.clone());
    let cfg = Config::default();
    let engine = Engine::with_specs(&cfg, &specs);
    let cont = |v1: &Value, v2: &Value| eval_relexp(e, &s1.with(var, v1.clone()), &s2.with(var, v2.clone()));
    engine.sample_with(*site, var, dist, &cont, s1, s2)
}
