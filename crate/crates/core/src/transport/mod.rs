//! Total Variation and Kantorovich distances between finite
//! sub-distributions, with optimal couplings.

pub mod simplex;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::lang::ast::Expr;
use crate::lang::eval::eval_relexp;
use crate::num::{fmt_rat, Ext, Rat};
use crate::semantics::{JointDist, SubDist};
use crate::state::State;

use simplex::Instance;

/// Pivot cap for the exact solver; far above what any instance here needs.
const MAX_PIVOTS: usize = 1_000_000;

/// Costs between the supports of two sub-distributions.
#[derive(Clone, Debug)]
pub struct CostMatrix<T: Ord = State> {
    pub rows: Vec<T>,
    pub cols: Vec<T>,
    pub cost: Vec<Vec<Ext>>,
}

impl<T: Ord + Clone> CostMatrix<T> {
    pub fn build(
        mu1: &SubDist<T>,
        mu2: &SubDist<T>,
        mut cost: impl FnMut(&T, &T) -> Result<Ext>,
    ) -> Result<Self> {
        let rows = mu1.support();
        let cols = mu2.support();
        let mut m = Vec::with_capacity(rows.len());
        for a in &rows {
            let mut row = Vec::with_capacity(cols.len());
            for b in &cols {
                let c = cost(a, b)?;
                if c.is_negative() {
                    return Err(Error::eval(format!("negative transport cost {c}")));
                }
                row.push(c);
            }
            m.push(row);
        }
        Ok(CostMatrix { rows, cols, cost: m })
    }
}

/// A coupling of two sub-distributions together with its expected cost.
#[derive(Clone, Debug)]
pub struct CouplingPlan<T: Ord = State> {
    pub joint: JointDist<T>,
    pub left: SubDist<T>,
    pub right: SubDist<T>,
    pub cost: Ext,
}

impl<T: Ord + Clone> CouplingPlan<T> {
    /// Both marginal equations, recomputed from the joint entries.
    pub fn is_valid(&self) -> bool {
        self.joint.has_marginals(&self.left, &self.right)
    }
}

/// `(1/2) * sum_x |mu1(x) - mu2(x)|`.
pub fn tv<T: Ord + Clone>(mu1: &SubDist<T>, mu2: &SubDist<T>) -> Rat {
    let mut acc = Rat::zero();
    for (x, p) in mu1.iter() {
        acc += (p - mu2.get(x)).abs();
    }
    for (x, q) in mu2.iter() {
        if mu1.get(x).is_zero() {
            acc += q;
        }
    }
    acc / Rat::from_integer(2.into())
}

/// Exact transportation solve on index level: `None` when no coupling
/// avoids infinite-cost cells, otherwise the optimal value and flows.
pub fn solve_transport(
    supply: &[Rat],
    demand: &[Rat],
    cost: &[Vec<Ext>],
) -> Result<Option<(Rat, Vec<(usize, usize, Rat)>)>> {
    let inst = Instance {
        supply: supply.to_vec(),
        demand: demand.to_vec(),
        cost: cost.iter().map(|r| r.iter().map(|c| c.finite().cloned()).collect()).collect(),
    };
    let zero = Rat::zero();
    if simplex::max_flow(&inst, &zero) != supply.iter().sum::<Rat>() {
        return Ok(None);
    }
    let sol = simplex::solve(&inst, &zero, MAX_PIVOTS)?;
    let sol = sol.ok_or_else(|| Error::eval("transport solver disagrees with the feasibility check"))?;
    Ok(Some((sol.value, sol.flows)))
}

/// Floating-point counterpart of [`solve_transport`] for large instances.
pub fn solve_transport_f64(
    supply: &[f64],
    demand: &[f64],
    cost: &[Vec<Option<f64>>],
    tol: f64,
) -> Result<Option<(f64, Vec<(usize, usize, f64)>)>> {
    let inst = Instance { supply: supply.to_vec(), demand: demand.to_vec(), cost: cost.to_vec() };
    let total: f64 = supply.iter().sum();
    if (simplex::max_flow(&inst, &tol) - total).abs() > tol.max(total * tol) {
        return Ok(None);
    }
    Ok(simplex::solve(&inst, &tol, MAX_PIVOTS)?.map(|s| (s.value, s.flows)))
}

/// Kantorovich lifting of `cost` to `(mu1, mu2)`: `inf` over couplings of the
/// expected cost, `inf` when the masses differ or every coupling hits an
/// infinite cost. The plan is returned whenever the value is finite.
pub fn kantorovich<T: Ord + Clone>(
    mu1: &SubDist<T>,
    mu2: &SubDist<T>,
    cost: impl FnMut(&T, &T) -> Result<Ext>,
) -> Result<(Ext, Option<CouplingPlan<T>>)> {
    if mu1.mass() != mu2.mass() {
        return Ok((Ext::Inf, None));
    }
    let cm = CostMatrix::build(mu1, mu2, cost)?;
    let supply: Vec<Rat> = cm.rows.iter().map(|x| mu1.get(x)).collect();
    let demand: Vec<Rat> = cm.cols.iter().map(|y| mu2.get(y)).collect();
    match solve_transport(&supply, &demand, &cm.cost)? {
        None => Ok((Ext::Inf, None)),
        Some((value, flows)) => {
            let mut joint = JointDist::new();
            for (i, j, q) in flows {
                joint.add(cm.rows[i].clone(), cm.cols[j].clone(), q);
            }
            let cost = Ext::Fin(value);
            let plan = CouplingPlan { joint, left: mu1.clone(), right: mu2.clone(), cost: cost.clone() };
            Ok((cost, Some(plan)))
        }
    }
}

pub fn kantorovich_value<T: Ord + Clone>(
    mu1: &SubDist<T>,
    mu2: &SubDist<T>,
    cost: impl FnMut(&T, &T) -> Result<Ext>,
) -> Result<Ext> {
    Ok(kantorovich(mu1, mu2, cost)?.0)
}

/// Kantorovich distance under a relational expectation over state pairs.
pub fn kantorovich_relexp(mu1: &SubDist, mu2: &SubDist, e: &Expr) -> Result<(Ext, Option<CouplingPlan>)> {
    kantorovich(mu1, mu2, |a, b| eval_relexp(e, a, b))
}

/// Float-mode Kantorovich value; probabilities and costs are rounded to f64.
pub fn kantorovich_f64<T: Ord + Clone>(
    mu1: &SubDist<T>,
    mu2: &SubDist<T>,
    cost: impl FnMut(&T, &T) -> Result<Ext>,
    tol: f64,
) -> Result<Option<f64>> {
    let cm = CostMatrix::build(mu1, mu2, cost)?;
    let f = |q: &Rat| crate::num::rat_to_f64(q);
    let supply: Vec<f64> = cm.rows.iter().map(|x| f(&mu1.get(x))).collect();
    let demand: Vec<f64> = cm.cols.iter().map(|y| f(&mu2.get(y))).collect();
    let (s, d): (f64, f64) = (supply.iter().sum(), demand.iter().sum());
    if (s - d).abs() > tol {
        return Ok(None);
    }
    let cost: Vec<Vec<Option<f64>>> =
        cm.cost.iter().map(|r| r.iter().map(|c| c.finite().map(f)).collect()).collect();
    Ok(solve_transport_f64(&supply, &demand, &cost, tol)?.map(|(v, _)| v))
}

fn discrete<T: PartialEq>(a: &T, b: &T) -> Result<Ext> {
    Ok(if a == b { Ext::zero() } else { Ext::one() })
}

/// Kantorovich under the discrete metric equals TV on full distributions.
pub fn check_tv_as_kantorovich<T: Ord + Clone>(mu1: &SubDist<T>, mu2: &SubDist<T>) -> Result<bool> {
    if !mu1.is_full() || !mu2.is_full() {
        return Err(Error::Precondition("both distributions must have mass 1".into()));
    }
    let k = kantorovich_value(mu1, mu2, discrete)?;
    Ok(k == Ext::Fin(tv(mu1, mu2)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bound {
    pub lhs: Ext,
    pub rhs: Ext,
    pub holds: bool,
}

/// `|E_mu1[f1] - E_mu2[f2]|` against the Kantorovich distance under
/// `|f1(x1) - f2(x2)|`.
pub fn expected_diff_bound<T: Ord + Clone>(
    mu1: &SubDist<T>,
    mu2: &SubDist<T>,
    f1: impl Fn(&T) -> Result<Ext>,
    f2: impl Fn(&T) -> Result<Ext>,
) -> Result<Bound> {
    if !mu1.is_full() || !mu2.is_full() {
        return Err(Error::Precondition("both distributions must have mass 1".into()));
    }
    let e1 = mu1.expected(&f1)?;
    let e2 = mu2.expected(&f2)?;
    let lhs = match (&e1, &e2) {
        (Ext::Fin(a), Ext::Fin(b)) => Ext::Fin((a - b).abs()),
        _ => Ext::Inf,
    };
    let rhs = kantorovich_value(mu1, mu2, |a, b| match (f1(a)?, f2(b)?) {
        (Ext::Fin(x), Ext::Fin(y)) => Ok(Ext::Fin((x - y).abs())),
        (Ext::Inf, Ext::Inf) => Ok(Ext::zero()),
        _ => Ok(Ext::Inf),
    })?;
    let holds = lhs <= rhs;
    Ok(Bound { lhs, rhs, holds })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScaledTv {
    pub tv: Rat,
    pub bound: Ext,
    pub holds: bool,
}

/// `TV <= (1/rho) * K_E(mu1, mu2)` for a cost with `E >= rho * [x1 != x2]`.
/// The premise is checked on every pair of support points.
pub fn scaled_tv_bound(mu1: &SubDist, mu2: &SubDist, e: &Expr, rho: &Rat) -> Result<ScaledTv> {
    scaled_tv_bound_with(mu1, mu2, |a, b| eval_relexp(e, a, b), rho)
}

pub fn scaled_tv_bound_with<T: Ord + Clone + std::fmt::Display>(
    mu1: &SubDist<T>,
    mu2: &SubDist<T>,
    mut cost: impl FnMut(&T, &T) -> Result<Ext>,
    rho: &Rat,
) -> Result<ScaledTv> {
    if !rho.is_positive() {
        return Err(Error::Precondition("rho must be positive".into()));
    }
    if !mu1.is_full() || !mu2.is_full() {
        return Err(Error::Precondition("both distributions must have mass 1".into()));
    }
    for (a, _) in mu1.iter() {
        for (b, _) in mu2.iter() {
            if a != b && cost(a, b)? < Ext::Fin(rho.clone()) {
                return Err(Error::Precondition(format!(
                    "cost at ({a}, {b}) is {} < rho = {}",
                    cost(a, b)?,
                    fmt_rat(rho)
                )));
            }
        }
    }
    let k = kantorovich_value(mu1, mu2, cost)?;
    let bound = k.mul_rat(&(Rat::one() / rho));
    let t = tv(mu1, mu2);
    let holds = Ext::Fin(t.clone()) <= bound;
    Ok(ScaledTv { tv: t, bound, holds })
}

/// The coupling of `Unif(domain)` with itself putting `1/|D|` on `(v, f(v))`.
pub fn coupling_from_bijection<V: Ord + Clone + std::fmt::Debug>(
    domain: &[V],
    f: impl Fn(&V) -> V,
) -> Result<CouplingPlan<V>> {
    let mut seen = std::collections::BTreeSet::new();
    for v in domain {
        let w = f(v);
        if !domain.contains(&w) {
            return Err(Error::Coupling { site: "bijection".into(), msg: format!("{v:?} maps to {w:?} outside the domain") });
        }
        if !seen.insert(w.clone()) {
            return Err(Error::Coupling { site: "bijection".into(), msg: format!("{w:?} is hit twice") });
        }
    }
    let u = SubDist::uniform(domain.to_vec());
    let p = Rat::new(1.into(), domain.len().into());
    let mut joint = JointDist::new();
    for v in domain {
        joint.add(v.clone(), f(v), p.clone());
    }
    Ok(CouplingPlan { joint, left: u.clone(), right: u, cost: Ext::zero() })
}
