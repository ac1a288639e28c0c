use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::num::{Ext, Rat};
use crate::state::State;

/// Finite sub-distribution with exact probabilities. Zero entries are never
/// stored; the total mass is cached.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SubDist<T: Ord = State> {
    map: BTreeMap<T, Rat>,
    mass: Rat,
}

impl<T: Ord> Default for SubDist<T> {
    fn default() -> Self {
        SubDist {
            map: BTreeMap::new(),
            mass: Rat::zero(),
        }
    }
}

impl<T: Ord + Clone> SubDist<T> {
    pub fn empty() -> Self {
        SubDist::default()
    }

    pub fn dirac(x: T) -> Self {
        let mut d = SubDist::empty();
        d.add(x, Rat::one());
        d
    }

    /// Uniform over the listed points; repeated points accumulate.
    pub fn uniform(points: Vec<T>) -> Self {
        let mut d = SubDist::empty();
        if points.is_empty() {
            return d;
        }
        let p = Rat::new(1.into(), points.len().into());
        for x in points {
            d.add(x, p.clone());
        }
        d
    }

    /// Builds from entries, rejecting negative weights and mass above 1.
    pub fn from_entries<I: IntoIterator<Item = (T, Rat)>>(entries: I) -> Result<Self> {
        let mut d = SubDist::empty();
        for (x, p) in entries {
            if p.is_negative() {
                return Err(Error::Distribution("negative probability".into()));
            }
            d.add(x, p);
        }
        if d.mass > Rat::one() {
            return Err(Error::Distribution(format!(
                "total mass {} exceeds 1",
                d.mass
            )));
        }
        Ok(d)
    }

    pub fn add(&mut self, x: T, p: Rat) {
        if p.is_zero() {
            return;
        }
        self.mass += &p;
        let slot = self.map.entry(x).or_insert_with(Rat::zero);
        *slot += p;
    }

    pub fn get(&self, x: &T) -> Rat {
        self.map.get(x).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn mass(&self) -> &Rat {
        &self.mass
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&T, &Rat)> {
        self.map.iter()
    }

    pub fn support(&self) -> Vec<T> {
        self.map.keys().cloned().collect()
    }

    pub fn scale(&self, q: &Rat) -> Self {
        let mut d = SubDist::empty();
        for (x, p) in &self.map {
            d.add(x.clone(), p * q);
        }
        d
    }

    pub fn add_all(&mut self, other: &Self) {
        for (x, p) in &other.map {
            self.add(x.clone(), p.clone());
        }
    }

    /// Pushforward along `f`.
    pub fn map<U: Ord + Clone>(&self, mut f: impl FnMut(&T) -> U) -> SubDist<U> {
        let mut d = SubDist::empty();
        for (x, p) in &self.map {
            d.add(f(x), p.clone());
        }
        d
    }

    pub fn try_map<U: Ord + Clone>(
        &self,
        mut f: impl FnMut(&T) -> Result<U>,
    ) -> Result<SubDist<U>> {
        let mut d = SubDist::empty();
        for (x, p) in &self.map {
            d.add(f(x)?, p.clone());
        }
        Ok(d)
    }

    /// `(bind mu f)(t) = sum_s mu(s) * f(s)(t)`.
    pub fn bind<U: Ord + Clone>(
        &self,
        mut f: impl FnMut(&T) -> Result<SubDist<U>>,
    ) -> Result<SubDist<U>> {
        let mut d = SubDist::empty();
        for (x, p) in &self.map {
            for (y, q) in f(x)?.iter() {
                d.add(y.clone(), p * q);
            }
        }
        Ok(d)
    }

    /// `E_mu[f]`; infinite as soon as a point of positive mass maps to inf.
    pub fn expected(&self, mut f: impl FnMut(&T) -> Result<Ext>) -> Result<Ext> {
        let mut acc = Rat::zero();
        for (x, p) in &self.map {
            match f(x)? {
                Ext::Fin(v) => acc += v * p,
                Ext::Inf => return Ok(Ext::Inf),
            }
        }
        Ok(Ext::Fin(acc))
    }

    pub fn is_full(&self) -> bool {
        self.mass.is_one()
    }
}

impl SubDist<State> {
    /// Marginal on the given variables.
    pub fn project(&self, names: &[&str]) -> SubDist<State> {
        self.map(|s| s.project(names))
    }
}

/// Finite joint sub-distribution over pairs with cached marginals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JointDist<T: Ord = State> {
    map: BTreeMap<(T, T), Rat>,
    left: SubDist<T>,
    right: SubDist<T>,
}

impl<T: Ord + Clone> Default for JointDist<T> {
    fn default() -> Self {
        JointDist {
            map: BTreeMap::new(),
            left: SubDist::empty(),
            right: SubDist::empty(),
        }
    }
}

impl<T: Ord + Clone> JointDist<T> {
    pub fn new() -> Self {
        JointDist::default()
    }

    pub fn add(&mut self, a: T, b: T, p: Rat) {
        if p.is_zero() {
            return;
        }
        self.left.add(a.clone(), p.clone());
        self.right.add(b.clone(), p.clone());
        *self.map.entry((a, b)).or_insert_with(Rat::zero) += p;
    }

    pub fn product(a: &SubDist<T>, b: &SubDist<T>) -> Self {
        let mut j = JointDist::new();
        for (x, p) in a.iter() {
            for (y, q) in b.iter() {
                j.add(x.clone(), y.clone(), p * q);
            }
        }
        j
    }

    pub fn iter(&self) -> impl Iterator<Item = (&T, &T, &Rat)> {
        self.map.iter().map(|((a, b), p)| (a, b, p))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn mass(&self) -> &Rat {
        self.left.mass()
    }

    pub fn left(&self) -> &SubDist<T> {
        &self.left
    }

    pub fn right(&self) -> &SubDist<T> {
        &self.right
    }

    /// Marginals recomputed from the entries, ignoring the caches.
    pub fn marginals(&self) -> (SubDist<T>, SubDist<T>) {
        let mut l = SubDist::empty();
        let mut r = SubDist::empty();
        for ((a, b), p) in &self.map {
            l.add(a.clone(), p.clone());
            r.add(b.clone(), p.clone());
        }
        (l, r)
    }

    /// True when the recomputed marginals are exactly `mu1` and `mu2`.
    pub fn has_marginals(&self, mu1: &SubDist<T>, mu2: &SubDist<T>) -> bool {
        let (l, r) = self.marginals();
        &l == mu1 && &r == mu2
    }

    pub fn expected(&self, mut f: impl FnMut(&T, &T) -> Result<Ext>) -> Result<Ext> {
        let mut acc = Rat::zero();
        for ((a, b), p) in &self.map {
            match f(a, b)? {
                Ext::Fin(v) => acc += v * p,
                Ext::Inf => return Ok(Ext::Inf),
            }
        }
        Ok(Ext::Fin(acc))
    }
}
