use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive};
use serde::Serialize;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::lang::analysis::classify_loop;
use crate::lang::ast::{Command, DistExpr};
use crate::lang::eval::{eval, eval_bool};
use crate::num::{Ext, Rat};
use crate::semantics::SubDist;
use crate::state::{State, Value};

/// Largest `n` accepted by `bits(n)`.
pub const MAX_BITS: usize = 20;

/// How a loop's output was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    /// Every execution path terminated; the distribution is exact.
    Exact,
    /// Iteration stopped once the unfinished mass fell below epsilon.
    Approximate,
    /// Iteration stopped at `max_iters` with mass above epsilon still live.
    BudgetExceeded,
}

#[derive(Clone, Debug)]
pub struct Denotation {
    pub dist: SubDist,
    pub status: Status,
    /// Input mass minus output mass: non-termination plus truncation.
    pub residual: Rat,
    /// Largest number of iterations any loop ran.
    pub iterations: usize,
}

/// Distribution of a primitive distribution expression in state `s`.
pub fn eval_dist(d: &DistExpr, s: &State) -> Result<SubDist<Value>> {
    match d {
        DistExpr::UniformRange { lo, hi } => {
            let lo = eval(lo, s)?.as_index()?;
            let hi = eval(hi, s)?.as_index()?;
            if hi <= lo {
                return Err(Error::Distribution(format!("empty range {lo}..{hi}")));
            }
            Ok(SubDist::uniform((lo..hi).map(Value::int).collect()))
        }
        DistExpr::UniformSet(vs) => {
            let vals = vs.iter().map(|e| eval(e, s)).collect::<Result<Vec<_>>>()?;
            Ok(SubDist::uniform(vals))
        }
        DistExpr::Bernoulli(p) => {
            let p = prob(&eval(p, s)?)?;
            let mut d = SubDist::empty();
            d.add(Value::int(1), p.clone());
            d.add(Value::int(0), Rat::one() - p);
            Ok(d)
        }
        DistExpr::UniformBits(n) => {
            let n = eval(n, s)?.as_index()?;
            if n < 0 || n as usize > MAX_BITS {
                return Err(Error::Distribution(format!(
                    "bits({n}) outside 0..={MAX_BITS}"
                )));
            }
            let n = n as usize;
            let pts = (0u64..(1 << n))
                .map(|m| {
                    Value::Array(
                        (0..n)
                            .map(|i| Rat::from_integer(BigInt::from((m >> i) & 1)))
                            .collect(),
                    )
                })
                .collect();
            Ok(SubDist::uniform(pts))
        }
        DistExpr::Table(rows) => {
            let mut d = SubDist::empty();
            for (v, p) in rows {
                let p = prob(&eval(p, s)?)?;
                d.add(eval(v, s)?, p);
            }
            if !d.mass().is_one() {
                return Err(Error::Distribution(format!(
                    "table probabilities sum to {}, not 1",
                    crate::num::fmt_rat(d.mass())
                )));
            }
            Ok(d)
        }
    }
}

fn prob(v: &Value) -> Result<Rat> {
    match v.as_num()? {
        Ext::Fin(p) if !p.is_negative() && *p <= Rat::one() => Ok(p.clone()),
        other => Err(Error::Distribution(format!(
            "probability {other} outside [0, 1]"
        ))),
    }
}

struct Run<'a> {
    cfg: &'a Config,
    status: Status,
    iterations: usize,
}

impl Run<'_> {
    fn exec(&mut self, c: &Command, mu: SubDist) -> Result<SubDist> {
        match c {
            Command::Skip => Ok(mu),
            Command::Assign { var, expr, .. } => {
                let mut out = SubDist::empty();
                for (s, p) in mu.iter() {
                    let v = eval(expr, s)?;
                    if v == Value::Num(Ext::Inf) {
                        return Err(Error::eval("cannot assign inf"));
                    }
                    out.add(s.with(var, v), p.clone());
                }
                Ok(out)
            }
            Command::Sample { var, dist, .. } => {
                let mut out = SubDist::empty();
                for (s, p) in mu.iter() {
                    for (v, q) in eval_dist(dist, s)?.iter() {
                        out.add(s.with(var, v.clone()), p * q);
                    }
                }
                Ok(out)
            }
            Command::Seq(cs) => {
                let mut mu = mu;
                for c in cs {
                    mu = self.exec(c, mu)?;
                }
                Ok(mu)
            }
            Command::If { cond, then_, else_ } => {
                let (mut yes, mut no) = (SubDist::empty(), SubDist::empty());
                for (s, p) in mu.iter() {
                    if eval_bool(cond, s)? {
                        yes.add(s.clone(), p.clone());
                    } else {
                        no.add(s.clone(), p.clone());
                    }
                }
                let mut out = self.exec(then_, yes)?;
                out.add_all(&self.exec(else_, no)?);
                Ok(out)
            }
            Command::While { cond, body, .. } => {
                let bounded = classify_loop(cond, body).is_some();
                let eps = self.cfg.epsilon_rat();
                let mut out = SubDist::empty();
                let mut live = mu;
                let mut i = 0;
                loop {
                    let mut next_in = SubDist::empty();
                    for (s, p) in live.iter() {
                        if eval_bool(cond, s)? {
                            next_in.add(s.clone(), p.clone());
                        } else {
                            out.add(s.clone(), p.clone());
                        }
                    }
                    if next_in.is_empty() {
                        break;
                    }
                    if !bounded && *next_in.mass() <= eps {
                        self.status = self.status.max(Status::Approximate);
                        break;
                    }
                    if i >= self.cfg.max_iters {
                        self.status = self.status.max(Status::BudgetExceeded);
                        break;
                    }
                    live = self.exec(body, next_in)?;
                    i += 1;
                }
                self.iterations = self.iterations.max(i);
                Ok(out)
            }
        }
    }
}

/// Output sub-distribution of `c` from `mu`.
pub fn denote_dist(c: &Command, mu: SubDist, cfg: &Config) -> Result<Denotation> {
    let before = mu.mass().clone();
    let mut run = Run {
        cfg,
        status: Status::Exact,
        iterations: 0,
    };
    let dist = run.exec(c, mu)?;
    let residual = before - dist.mass();
    Ok(Denotation {
        dist,
        status: run.status,
        residual,
        iterations: run.iterations,
    })
}

/// `[[c]]s`: exact for loop-free programs and for loops whose paths all
/// terminate within the budget; otherwise a lower approximation with the
/// missing mass reported as `residual`.
pub fn denote(c: &Command, s: &State, cfg: &Config) -> Result<Denotation> {
    denote_dist(c, SubDist::dirac(s.clone()), cfg)
}

/// Like [`denote`] but fails unless the result is exact.
pub fn denote_exact(c: &Command, s: &State, cfg: &Config) -> Result<SubDist> {
    let d = denote(c, s, cfg)?;
    match d.status {
        Status::Exact => Ok(d.dist),
        st => Err(Error::Budget(format!(
            "output distribution is not exact ({st:?}, residual {})",
            crate::num::rat_to_f64(&d.residual)
        ))),
    }
}

/// Rounds `n` into a `usize` for enumeration sizes.
pub fn small(n: &Rat) -> Option<usize> {
    n.is_integer().then(|| n.to_integer().to_usize()).flatten()
}
