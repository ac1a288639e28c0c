//! Coupled Monte-Carlo simulation: two runs of a program driven by shared
//! randomness, sampled jointly from the coupling at each site.
//!
//! Randomness comes from ChaCha8 keyed by the user seed. Every
//! `(trial, side, site)` triple owns its own stream, so the draws of one
//! trial never depend on how many trials ran before it or on the thread
//! that ran it.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::lang::ast::{Command, Expr, Site};
use crate::lang::eval::{eval, eval_bool, eval_relexp};
use crate::num::{Ext, Rat};
use crate::rpe::{Engine, Specs};
use crate::semantics::{eval_dist, JointDist, SubDist};
use crate::state::{State, Value};

/// Stream tags: a coupled draw, or a draw of one run on its own.
pub const SIDE_JOINT: u64 = 0;
pub const SIDE_LEFT: u64 = 1;
pub const SIDE_RIGHT: u64 = 2;

/// Normal quantile of the 95% confidence intervals.
pub const Z95: f64 = 1.96;

/// ChaCha8 stream number of a `(trial, side, site)` triple.
pub fn substream(trial: u64, side: u64, site: usize) -> u64 {
    (trial << 20) | (side << 16) | (site as u64 & 0xffff)
}

pub fn stream_rng(seed: u64, trial: u64, side: u64, site: usize) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(substream(trial, side, site));
    r
}

/// Index of the entry selected by `u`: the first `i` with
/// `u / 2^64 < w_0 + ... + w_i`. `None` when `u` falls past the total mass.
pub fn pick(weights: &[&Rat], u: u64) -> Option<usize> {
    let x = Rat::new(BigInt::from(u), BigInt::one() << 64);
    let mut acc = Rat::zero();
    for (i, w) in weights.iter().enumerate() {
        acc += *w;
        if x < acc {
            return Some(i);
        }
    }
    None
}

/// Coupling maximizing the probability that both values agree.
pub fn maximal_coupling(d1: &SubDist<Value>, d2: &SubDist<Value>) -> JointDist<Value> {
    let mut j = JointDist::new();
    let mut r1 = SubDist::empty();
    let mut r2 = SubDist::empty();
    for (v, p) in d1.iter() {
        let q = d2.get(v);
        let m = if &q < p { q } else { p.clone() };
        j.add(v.clone(), v.clone(), m.clone());
        r1.add(v.clone(), p - &m);
    }
    for (v, q) in d2.iter() {
        let m = d1.get(v);
        r2.add(v.clone(), if &m < q { q - &m } else { Rat::zero() });
    }
    let rest = r1.mass().clone();
    if !rest.is_zero() {
        for (a, p) in r1.iter() {
            for (b, q) in r2.iter() {
                j.add(a.clone(), b.clone(), p * q / &rest);
            }
        }
    }
    j
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Draw {
    pub site: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub left: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub right: Option<Value>,
}

/// Record of one coupled run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoupledTrace {
    pub seed: u64,
    pub trial: u64,
    pub draws: Vec<Draw>,
    /// State pairs at the head of each top-level loop iteration, then the
    /// final pair.
    pub trajectory: Vec<(State, State)>,
    /// The distance at each trajectory point, where it is defined.
    pub distances: Vec<Option<Ext>>,
}

#[derive(Clone, Debug)]
pub struct SimOptions {
    pub trials: usize,
    pub seed: u64,
    /// Number of leading trials whose full trace is kept.
    pub keep_traces: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { trials: 10_000, seed: 0, keep_traces: 0 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SimSummary {
    pub trials: usize,
    pub seed: u64,
    /// Exact sample mean of the distance.
    pub mean: Ext,
    pub mean_float: f64,
    pub std_err: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub max: Ext,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub traces: Vec<CoupledTrace>,
}

impl SimSummary {
    /// Sample mean plus `k` standard errors.
    pub fn upper(&self, k: f64) -> f64 {
        self.mean_float + k * self.std_err
    }
}

struct Runner<'a> {
    engine: Engine<'a>,
    cfg: &'a Config,
    seed: u64,
    trial: u64,
    rngs: HashMap<(u64, usize), ChaCha8Rng>,
    trace: bool,
    draws: Vec<Draw>,
    trajectory: Vec<(State, State)>,
    steps: usize,
}

impl Runner<'_> {
    fn next(&mut self, side: u64, site: usize) -> u64 {
        let (seed, trial) = (self.seed, self.trial);
        self.rngs
            .entry((side, site))
            .or_insert_with(|| stream_rng(seed, trial, side, site))
            .next_u64()
    }

    fn tick(&mut self) -> Result<()> {
        self.steps += 1;
        if self.steps > self.cfg.max_iters {
            return Err(Error::Budget(format!("a simulated run exceeded {} loop iterations", self.cfg.max_iters)));
        }
        Ok(())
    }

    fn record(&mut self, site: usize, left: Option<Value>, right: Option<Value>) {
        if self.trace {
            self.draws.push(Draw { site, left, right });
        }
    }

    fn draw_joint(&mut self, site: Site, var: &str, d1: &SubDist<Value>, d2: &SubDist<Value>, s1: &State, s2: &State) -> Result<(Value, Value)> {
        let joint = match self.engine.coupling(site, var, d1, d2, s1, s2)? {
            Some(j) => j,
            None => maximal_coupling(d1, d2),
        };
        let entries: Vec<(&Value, &Value, &Rat)> = joint.iter().collect();
        let weights: Vec<&Rat> = entries.iter().map(|e| e.2).collect();
        let u = self.next(SIDE_JOINT, site.index);
        let i = pick(&weights, u).ok_or_else(|| {
            Error::Distribution(format!("the coupling at site #{} has mass below 1", site.index))
        })?;
        Ok((entries[i].0.clone(), entries[i].1.clone()))
    }

    fn pair(&mut self, c: &Command, s1: &mut State, s2: &mut State, top: bool) -> Result<()> {
        match c {
            Command::Skip => {}
            Command::Assign { var, expr, .. } => {
                let a = eval(expr, &*s1)?;
                let b = eval(expr, &*s2)?;
                s1.set(var, a);
                s2.set(var, b);
            }
            Command::Sample { var, dist, site } => {
                let d1 = eval_dist(dist, s1)?;
                let d2 = eval_dist(dist, s2)?;
                let (a, b) = self.draw_joint(*site, var, &d1, &d2, s1, s2)?;
                self.record(site.index, Some(a.clone()), Some(b.clone()));
                s1.set(var, a);
                s2.set(var, b);
            }
            Command::Seq(cs) => {
                for c in cs {
                    self.pair(c, s1, s2, top)?;
                }
            }
            Command::If { cond, then_, else_ } => {
                let (g1, g2) = (eval_bool(cond, &*s1)?, eval_bool(cond, &*s2)?);
                if g1 == g2 {
                    self.pair(if g1 { then_ } else { else_ }, s1, s2, false)?;
                } else {
                    self.solo(SIDE_LEFT, if g1 { then_ } else { else_ }, s1)?;
                    self.solo(SIDE_RIGHT, if g2 { then_ } else { else_ }, s2)?;
                }
            }
            Command::While { cond, body, .. } => loop {
                if top && self.trace {
                    self.trajectory.push((s1.clone(), s2.clone()));
                }
                match (eval_bool(cond, &*s1)?, eval_bool(cond, &*s2)?) {
                    (true, true) => {
                        self.tick()?;
                        self.pair(body, s1, s2, false)?;
                    }
                    (false, false) => break,
                    _ => {
                        self.solo(SIDE_LEFT, c, s1)?;
                        self.solo(SIDE_RIGHT, c, s2)?;
                        break;
                    }
                }
            },
        }
        Ok(())
    }

    fn solo(&mut self, side: u64, c: &Command, s: &mut State) -> Result<()> {
        match c {
            Command::Skip => {}
            Command::Assign { var, expr, .. } => {
                let v = eval(expr, &*s)?;
                s.set(var, v);
            }
            Command::Sample { var, dist, site } => {
                let d = eval_dist(dist, s)?;
                let entries: Vec<(&Value, &Rat)> = d.iter().collect();
                let weights: Vec<&Rat> = entries.iter().map(|e| e.1).collect();
                let u = self.next(side, site.index);
                let i = pick(&weights, u).ok_or_else(|| {
                    Error::Distribution(format!("the distribution at site #{} has mass below 1", site.index))
                })?;
                let v = entries[i].0.clone();
                let (l, r) = if side == SIDE_RIGHT { (None, Some(v.clone())) } else { (Some(v.clone()), None) };
                self.record(site.index, l, r);
                s.set(var, v);
            }
            Command::Seq(cs) => {
                for c in cs {
                    self.solo(side, c, s)?;
                }
            }
            Command::If { cond, then_, else_ } => {
                let g = eval_bool(cond, &*s)?;
                self.solo(side, if g { then_ } else { else_ }, s)?;
            }
            Command::While { cond, body, .. } => {
                while eval_bool(cond, &*s)? {
                    self.tick()?;
                    self.solo(side, body, s)?;
                }
            }
        }
        Ok(())
    }
}

fn run_trial(
    c: &Command,
    s1: &State,
    s2: &State,
    specs: &Specs,
    e: &Expr,
    seed: u64,
    trial: u64,
    trace: bool,
    cfg: &Config,
) -> Result<(Ext, Option<CoupledTrace>)> {
    let mut r = Runner {
        engine: Engine::with_specs(cfg, specs),
        cfg,
        seed,
        trial,
        rngs: HashMap::new(),
        trace,
        draws: Vec::new(),
        trajectory: Vec::new(),
        steps: 0,
    };
    let (mut a, mut b) = (s1.clone(), s2.clone());
    r.pair(c, &mut a, &mut b, true)?;
    let d = eval_relexp(e, &a, &b)?;
    if !trace {
        return Ok((d, None));
    }
    r.trajectory.push((a, b));
    let distances = r.trajectory.iter().map(|(x, y)| eval_relexp(e, x, y).ok()).collect();
    let t = CoupledTrace { seed, trial, draws: r.draws, trajectory: r.trajectory, distances };
    Ok((d, Some(t)))
}

/// Runs `trials` coupled executions of `c` from `(s1, s2)` and summarizes
/// the distance `e` between the final states. The interval is
/// `mean +- 1.96 * s / sqrt(n)` with `s` the sample standard deviation.
pub fn coupled_simulate(
    c: &Command,
    s1: &State,
    s2: &State,
    specs: &Specs,
    e: &Expr,
    opts: &SimOptions,
    cfg: &Config,
) -> Result<SimSummary> {
    if opts.trials == 0 {
        return Err(Error::Params("at least one trial is needed".into()));
    }
    let rows = crate::par::try_map_range(cfg.parallel, opts.trials, |t| {
        run_trial(c, s1, s2, specs, e, opts.seed, t as u64, t < opts.keep_traces, cfg)
    })?;
    let n = rows.len();
    let mut sum = Ext::zero();
    let mut max = Ext::zero();
    let mut fl = Vec::with_capacity(n);
    let mut traces = Vec::new();
    for (d, t) in rows {
        sum = sum.add(&d);
        fl.push(d.to_f64());
        if d > max {
            max = d;
        }
        traces.extend(t);
    }
    let mean = match sum {
        Ext::Fin(q) => Ext::Fin(q / Rat::from_integer(n.into())),
        Ext::Inf => Ext::Inf,
    };
    let mean_float = mean.to_f64();
    let var = if n > 1 {
        fl.iter().map(|x| (x - mean_float).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let std_err = (var / n as f64).sqrt();
    Ok(SimSummary {
        trials: n,
        seed: opts.seed,
        mean,
        mean_float,
        std_err,
        ci_lo: mean_float - Z95 * std_err,
        ci_hi: mean_float + Z95 * std_err,
        max,
        traces,
    })
}

/// Reruns one trial and returns its full trace.
pub fn replay(c: &Command, s1: &State, s2: &State, specs: &Specs, e: &Expr, seed: u64, trial: u64, cfg: &Config) -> Result<CoupledTrace> {
    let (_, t) = run_trial(c, s1, s2, specs, e, seed, trial, true, cfg)?;
    Ok(t.expect("traced run"))
}

/// Final state of one run of `c` on its own, using the streams of `side`.
pub fn simulate_solo(c: &Command, s: &State, seed: u64, trial: u64, side: u64, cfg: &Config) -> Result<State> {
    let specs = Specs::new();
    let mut r = Runner {
        engine: Engine::with_specs(cfg, &specs),
        cfg,
        seed,
        trial,
        rngs: HashMap::new(),
        trace: false,
        draws: Vec::new(),
        trajectory: Vec::new(),
        steps: 0,
    };
    let mut out = s.clone();
    r.solo(side, c, &mut out)?;
    Ok(out)
}

/// Final state pair of one coupled run.
pub fn simulate_pair(c: &Command, s1: &State, s2: &State, specs: &Specs, seed: u64, trial: u64, cfg: &Config) -> Result<(State, State)> {
    let mut r = Runner {
        engine: Engine::with_specs(cfg, specs),
        cfg,
        seed,
        trial,
        rngs: HashMap::new(),
        trace: false,
        draws: Vec::new(),
        trajectory: Vec::new(),
        steps: 0,
    };
    let (mut a, mut b) = (s1.clone(), s2.clone());
    r.pair(c, &mut a, &mut b, true)?;
    Ok((a, b))
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson(k: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let (k, n) = (k as f64, n as f64);
    let p = k / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    ((centre - half).max(0.0), (centre + half).min(1.0))
}
