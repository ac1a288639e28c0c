//! Transportation simplex (network simplex on a complete bipartite graph)
//! with Bland's pivoting rule and big-M costs for forbidden cells.

use std::cmp::Ordering;
use std::collections::VecDeque;
use std::fmt::Debug;
use std::ops::{Add, Mul, Sub};

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::num::Rat;

/// Ordered field used by the solvers. `cmp_tol` compares up to a tolerance,
/// which is zero for exact rationals.
pub trait Scalar:
    Clone + Debug + PartialOrd + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Send + Sync
{
    fn zero() -> Self;
    fn one() -> Self;
    fn cmp_tol(&self, other: &Self, tol: &Self) -> Ordering;
    fn is_pos(&self, tol: &Self) -> bool {
        self.cmp_tol(&Self::zero(), tol) == Ordering::Greater
    }
    fn is_neg(&self, tol: &Self) -> bool {
        self.cmp_tol(&Self::zero(), tol) == Ordering::Less
    }
}

impl Scalar for Rat {
    fn zero() -> Self {
        <Rat as Zero>::zero()
    }
    fn one() -> Self {
        <Rat as num_traits::One>::one()
    }
    fn cmp_tol(&self, other: &Self, _tol: &Self) -> Ordering {
        self.cmp(other)
    }
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn cmp_tol(&self, other: &Self, tol: &Self) -> Ordering {
        let d = self - other;
        if d.abs() <= *tol {
            Ordering::Equal
        } else if d < 0.0 {
            Ordering::Less
        } else {
            Ordering::Greater
        }
    }
}

/// `big * M + small` for an arbitrarily large `M`, compared lexicographically.
#[derive(Clone, Debug)]
struct Lex<S> {
    big: S,
    small: S,
}

impl<S: Scalar> Lex<S> {
    fn zero() -> Self {
        Lex { big: S::zero(), small: S::zero() }
    }
    fn sub(&self, o: &Self) -> Self {
        Lex { big: self.big.clone() - o.big.clone(), small: self.small.clone() - o.small.clone() }
    }
    fn is_neg(&self, tol: &S) -> bool {
        match self.big.cmp_tol(&S::zero(), tol) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => self.small.is_neg(tol),
        }
    }
}

/// A transportation instance: `cost[i][j] == None` forbids the cell.
#[derive(Clone, Debug)]
pub struct Instance<S> {
    pub supply: Vec<S>,
    pub demand: Vec<S>,
    pub cost: Vec<Vec<Option<S>>>,
}

#[derive(Clone, Debug)]
pub struct Solution<S> {
    pub value: S,
    /// Cells with positive flow.
    pub flows: Vec<(usize, usize, S)>,
    pub pivots: usize,
}

/// Minimum-cost plan, or `None` when no plan avoids forbidden cells.
/// Supplies and demands must be positive with equal totals.
pub fn solve<S: Scalar>(inst: &Instance<S>, tol: &S, max_pivots: usize) -> Result<Option<Solution<S>>> {
    let (m, n) = (inst.supply.len(), inst.demand.len());
    if m == 0 || n == 0 {
        return Ok(Some(Solution { value: S::zero(), flows: Vec::new(), pivots: 0 }));
    }
    let cost: Vec<Lex<S>> = (0..m * n)
        .map(|k| match &inst.cost[k / n][k % n] {
            Some(c) => Lex { big: S::zero(), small: c.clone() },
            None => Lex { big: S::one(), small: S::zero() },
        })
        .collect();

    // Northwest corner start; a tie exhausts the row first, leaving a
    // degenerate zero cell so the basis stays a spanning tree.
    let mut x = vec![S::zero(); m * n];
    let mut basic = vec![false; m * n];
    let mut a = inst.supply.clone();
    let mut b = inst.demand.clone();
    let (mut i, mut j) = (0, 0);
    loop {
        let q = if a[i] < b[j] { a[i].clone() } else { b[j].clone() };
        x[i * n + j] = q.clone();
        basic[i * n + j] = true;
        a[i] = a[i].clone() - q.clone();
        b[j] = b[j].clone() - q;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if (a[i].cmp_tol(&S::zero(), tol) != Ordering::Greater && i < m - 1) || j == n - 1 {
            i += 1;
        } else {
            j += 1;
        }
    }

    let mut pivots = 0;
    loop {
        let (u, v) = potentials(m, n, &basic, &cost);
        let entering = (0..m * n).find(|&k| !basic[k] && cost[k].sub(&u[k / n]).sub(&v[k % n]).is_neg(tol));
        let Some(e) = entering else { break };
        if pivots >= max_pivots {
            return Err(Error::Budget(format!("transport solver exceeded {max_pivots} pivots")));
        }
        pivots += 1;
        let cycle = tree_path(m, n, &basic, e / n, e % n);
        let mut theta: Option<S> = None;
        for (idx, &k) in cycle.iter().enumerate() {
            if idx % 2 == 0 && theta.as_ref().is_none_or(|t| x[k] < *t) {
                theta = Some(x[k].clone());
            }
        }
        let theta = theta.expect("a pivot cycle has a decreasing cell");
        let leaving = cycle
            .iter()
            .enumerate()
            .filter(|(idx, &k)| idx % 2 == 0 && x[k].cmp_tol(&theta, tol) == Ordering::Equal)
            .map(|(_, &k)| k)
            .min()
            .expect("the minimum is attained");
        for (idx, &k) in cycle.iter().enumerate() {
            x[k] = if idx % 2 == 0 { x[k].clone() - theta.clone() } else { x[k].clone() + theta.clone() };
        }
        x[e] = x[e].clone() + theta;
        basic[e] = true;
        basic[leaving] = false;
        x[leaving] = S::zero();
    }

    let mut value = S::zero();
    let mut flows = Vec::new();
    for k in 0..m * n {
        if basic[k] && x[k].is_pos(tol) {
            match &inst.cost[k / n][k % n] {
                Some(c) => value = value + c.clone() * x[k].clone(),
                None => return Ok(None),
            }
            flows.push((k / n, k % n, x[k].clone()));
        }
    }
    Ok(Some(Solution { value, flows, pivots }))
}

/// Dual potentials with `u[0] = 0`, solving `u[i] + v[j] = c[i][j]` on the basis.
fn potentials<S: Scalar>(m: usize, n: usize, basic: &[bool], cost: &[Lex<S>]) -> (Vec<Lex<S>>, Vec<Lex<S>>) {
    let mut u: Vec<Option<Lex<S>>> = vec![None; m];
    let mut v: Vec<Option<Lex<S>>> = vec![None; n];
    u[0] = Some(Lex::zero());
    let mut queue = VecDeque::from([(true, 0usize)]);
    while let Some((is_row, idx)) = queue.pop_front() {
        if is_row {
            let ui = u[idx].clone().unwrap();
            for j in 0..n {
                if basic[idx * n + j] && v[j].is_none() {
                    v[j] = Some(cost[idx * n + j].sub(&ui));
                    queue.push_back((false, j));
                }
            }
        } else {
            let vj = v[idx].clone().unwrap();
            for i in 0..m {
                if basic[i * n + idx] && u[i].is_none() {
                    u[i] = Some(cost[i * n + idx].sub(&vj));
                    queue.push_back((true, i));
                }
            }
        }
    }
    let lift = |xs: Vec<Option<Lex<S>>>| xs.into_iter().map(|x| x.expect("basis is a spanning tree")).collect();
    (lift(u), lift(v))
}

/// Basic cells on the tree path from column `j0` to row `i0`, in order.
/// Even positions lose flow when `(i0, j0)` enters.
fn tree_path(m: usize, n: usize, basic: &[bool], i0: usize, j0: usize) -> Vec<usize> {
    // Nodes: rows 0..m, columns m..m+n. BFS from row i0.
    let mut parent = vec![usize::MAX; m + n];
    parent[i0] = i0;
    let mut queue = VecDeque::from([i0]);
    while let Some(node) = queue.pop_front() {
        if node < m {
            for j in 0..n {
                if basic[node * n + j] && parent[m + j] == usize::MAX {
                    parent[m + j] = node;
                    queue.push_back(m + j);
                }
            }
        } else {
            let j = node - m;
            for i in 0..m {
                if basic[i * n + j] && parent[i] == usize::MAX {
                    parent[i] = node;
                    queue.push_back(i);
                }
            }
        }
    }
    let mut path = Vec::new();
    let mut node = m + j0;
    while node != i0 {
        let p = parent[node];
        let cell = if node < m { node * n + (p - m) } else { p * n + (node - m) };
        path.push(cell);
        node = p;
    }
    path
}

/// Maximum flow through the cells allowed by `cost`, by shortest augmenting
/// paths. Equal to the total supply exactly when a plan exists.
pub fn max_flow<S: Scalar>(inst: &Instance<S>, tol: &S) -> S {
    let (m, n) = (inst.supply.len(), inst.demand.len());
    let total = inst.supply.iter().cloned().fold(S::zero(), |a, b| a + b);
    let (src, sink) = (m + n, m + n + 1);
    let nodes = m + n + 2;
    let mut cap = vec![vec![S::zero(); nodes]; nodes];
    for i in 0..m {
        cap[src][i] = inst.supply[i].clone();
        for j in 0..n {
            if inst.cost[i][j].is_some() {
                cap[i][m + j] = total.clone();
            }
        }
    }
    for j in 0..n {
        cap[m + j][sink] = inst.demand[j].clone();
    }
    let mut flow = S::zero();
    loop {
        let mut prev = vec![usize::MAX; nodes];
        prev[src] = src;
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            if u == sink {
                break;
            }
            for w in 0..nodes {
                if prev[w] == usize::MAX && cap[u][w].is_pos(tol) {
                    prev[w] = u;
                    queue.push_back(w);
                }
            }
        }
        if prev[sink] == usize::MAX {
            return flow;
        }
        let mut bottleneck: Option<S> = None;
        let mut w = sink;
        while w != src {
            let u = prev[w];
            if bottleneck.as_ref().is_none_or(|b| cap[u][w] < *b) {
                bottleneck = Some(cap[u][w].clone());
            }
            w = u;
        }
        let b = bottleneck.unwrap();
        let mut w = sink;
        while w != src {
            let u = prev[w];
            cap[u][w] = cap[u][w].clone() - b.clone();
            cap[w][u] = cap[w][u].clone() + b.clone();
            w = u;
        }
        flow = flow + b;
    }
}
