use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::lang::ast::{Command, Expr, Program};
use crate::lang::{parse_program, parse_relexp, signature};
use crate::num::{fmt_rat, int, parse_rat, rat, Rat};
use crate::report::CheckReport;
use crate::rpe::{check_async_invariant, check_invariant, CouplingSpec, PairMode, PairSpace, Specs};
use crate::semantics::denote_exact;
use crate::state::{State, Value};

pub const CASES: [&str; 8] = ["hwalk", "rtop", "rtrans", "riffle", "binom", "td0", "sgd", "pgd"];

/// One-line description of each case, for `cases list`.
pub fn describe(name: &str) -> &'static str {
    match name {
        "hwalk" => "lazy random walk on the hypercube {0,1}^N",
        "rtop" => "random-to-top shuffle of an N-card deck",
        "rtrans" => "random transposition shuffle of an N-card deck",
        "riffle" => "inverse riffle shuffle of an N-card deck",
        "binom" => "binomial sampler run for different numbers of trials",
        "td0" => "TD(0) policy evaluation on a 3-state, 2-action MDP",
        "sgd" => "stochastic gradient descent on 1-D clamped quadratic losses",
        "pgd" => "projected gradient descent on [0, 1] with two quadratic losses",
        _ => "",
    }
}

/// Named rational parameters, e.g. `N=3,K=2`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Params(BTreeMap<String, Rat>);

impl Params {
    pub fn new() -> Params {
        Params::default()
    }

    pub fn with(mut self, key: &str, v: Rat) -> Params {
        self.0.insert(key.to_string(), v);
        self
    }

    pub fn with_int(self, key: &str, n: i64) -> Params {
        self.with(key, int(n))
    }

    pub fn get(&self, key: &str) -> Option<&Rat> {
        self.0.get(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Rat)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Parses `key=value` items separated by commas or whitespace.
    pub fn parse(text: &str) -> Result<Params> {
        let mut p = Params::new();
        for item in text.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::Params(format!("expected key=value, found `{item}`")))?;
            let q = parse_rat(v).ok_or_else(|| Error::Params(format!("`{v}` is not a rational number")))?;
            p.0.insert(k.trim().to_string(), q);
        }
        Ok(p)
    }

    fn nat(&self, key: &str, default: usize, lo: usize, hi: usize) -> Result<usize> {
        let n = match self.get(key) {
            None => default,
            Some(q) => q
                .is_integer()
                .then(|| q.to_integer().to_usize())
                .flatten()
                .ok_or_else(|| Error::Params(format!("{key} must be a natural number, found {}", fmt_rat(q))))?,
        };
        if n < lo || n > hi {
            return Err(Error::Params(format!("{key} = {n} is outside {lo}..={hi}")));
        }
        Ok(n)
    }

    fn frac(&self, key: &str, default: Rat, lo: Rat, hi: Rat) -> Result<Rat> {
        let q = self.get(key).cloned().unwrap_or(default);
        if q < lo || q > hi {
            return Err(Error::Params(format!(
                "{key} = {} is outside [{}, {}]",
                fmt_rat(&q),
                fmt_rat(&lo),
                fmt_rat(&hi)
            )));
        }
        Ok(q)
    }

    fn only(&self, keys: &[&str]) -> Result<()> {
        match self.0.keys().find(|k| !keys.contains(&k.as_str())) {
            Some(k) => Err(Error::Params(format!("unknown parameter `{k}`; expected one of {}", keys.join(", ")))),
            None => Ok(()),
        }
    }
}

impl fmt::Display for Params {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}={}", fmt_rat(v))).collect();
        f.write_str(&items.join(","))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseKind {
    /// State is a bitvector `pos`.
    Bits,
    /// State is a permutation `deck` of `0..N`.
    Perm,
    /// Integer counters only.
    Counter,
    /// Rational-valued state; analysed by simulation.
    Continuous,
}

/// A fully instantiated case study.
#[derive(Clone, Debug)]
pub struct CaseStudy {
    pub name: &'static str,
    pub params: Params,
    pub kind: CaseKind,
    pub source: String,
    pub program: Program,
    /// Distance between final states.
    pub distance: Expr,
    /// Loop invariant certifying the analytic bound, for discrete cases.
    pub invariant: Option<Expr>,
    pub specs: Specs,
    pub pair_mode: PairMode,
    /// Variables whose distribution the bounds talk about.
    pub observed: Vec<String>,
    /// `distance >= rho * [observed differ]`, so `tv <= rpe / rho`.
    pub rho: Rat,
    canonical: (State, State),
    bound: Option<Rat>,
}

fn bits_value(bits: &[bool]) -> Value {
    Value::ints(&bits.iter().map(|&b| b as i64).collect::<Vec<_>>())
}

fn perm_value(p: &[usize]) -> Value {
    Value::ints(&p.iter().map(|&x| x as i64).collect::<Vec<_>>())
}

fn rats(xs: &[Rat]) -> String {
    xs.iter().map(fmt_rat).collect::<Vec<_>>().join(", ")
}

fn pow(q: &Rat, k: usize) -> Rat {
    (0..k).fold(Rat::one(), |acc, _| acc * q)
}

fn nat_rat(n: usize) -> Rat {
    int(n as i64)
}

/// The body flips `pos[i - 1]` when `i != 0`, as a single assignment.
const HWALK: &str = "\
input pos: array, N: int, K: int;
k := 0;
while k < K do
  i :~ uniform(0 .. N + 1);
  pos[monus(i, 1)] := pos[monus(i, 1)] + [i != 0] * (1 - 2 * pos[monus(i, 1)]);
  k := k + 1
end
";

const RTOP: &str = "\
input deck: array, N: int, K: int;
k := 0;
while k < K do
  p :~ uniform(0 .. N);
  deck := shiftR(deck, p);
  k := k + 1
end
";

const RTRANS: &str = "\
input deck: array, N: int, K: int;
k := 0;
while k < K do
  p :~ uniform(0 .. N);
  q :~ uniform(0 .. N);
  c := deck[p];
  d := deck[q];
  deck[p] := d;
  deck[q] := c;
  k := k + 1
end
";

const RIFFLE: &str = "\
input deck: array, N: int, K: int;
k := 0;
while k < K do
  b :~ bits(N);
  deck := cat(select(deck, negBits(b)), select(deck, b));
  k := k + 1
end
";

/// Policy, reward and transition tables of the TD(0) MDP: `PI[i]` is the
/// probability of action 1 in state `i`, `RW[2i+a]` the probability of
/// reward 1, and `TR[6i+3a+j]` the probability of moving to `j`.
pub const TD0_PI: [(i64, i64); 3] = [(1, 2), (1, 3), (2, 3)];
pub const TD0_RW: [(i64, i64); 6] = [(1, 4), (3, 4), (1, 2), (1, 1), (0, 1), (1, 3)];
pub const TD0_TR: [(i64, i64); 18] = [
    (1, 2), (1, 2), (0, 1),
    (0, 1), (1, 3), (2, 3),
    (1, 4), (1, 4), (1, 2),
    (1, 1), (0, 1), (0, 1),
    (1, 3), (1, 3), (1, 3),
    (0, 1), (1, 2), (1, 2),
];

fn table(xs: &[(i64, i64)]) -> String {
    rats(&xs.iter().map(|&(n, d)| rat(n, d)).collect::<Vec<_>>())
}

fn td0_source(alpha: &Rat, gamma: &Rat) -> String {
    format!(
        "\
input V: array, N: int;
PI := [{pi}];
RW := [{rw}];
TR := [{tr}];
W := V;
n := 0;
while n < N do
  i := 0;
  while i < 3 do
    a :~ bernoulli(PI[i]);
    r :~ bernoulli(RW[2 * i + a]);
    j :~ table{{0: TR[6 * i + 3 * a], 1: TR[6 * i + 3 * a + 1], 2: TR[6 * i + 3 * a + 2]}};
    W[i] := (1 - {alpha}) * V[i] + {alpha} * (r + {gamma} * V[j]);
    i := i + 1
  end;
  V := W;
  n := n + 1
end
",
        pi = table(&TD0_PI),
        rw = table(&TD0_RW),
        tr = table(&TD0_TR),
        alpha = paren(alpha),
        gamma = paren(gamma),
    )
}

fn paren(q: &Rat) -> String {
    format!("({})", fmt_rat(q))
}

fn sgd_source(beta: &Rat) -> String {
    format!(
        "\
input Z: array, w0: num, T: int;
w := w0;
t := 0;
while t < T do
  s :~ uniform(0 .. len(Z));
  g := 2 * (w - Z[s]);
  w := min(max(w - g / ({beta} * (t + 1)), 0), 1);
  t := t + 1
end
",
        beta = paren(beta)
    )
}

fn pgd_source(alpha: &Rat) -> String {
    format!(
        "\
input z: num, w0: num, T: int;
w := w0;
t := 1;
while t < T do
  g := 2 * (w - z);
  w := min(max(w - {alpha} / t * g, 0), 1);
  t := t + 1
end
",
        alpha = paren(alpha)
    )
}

fn binom_source(p: &Rat) -> String {
    format!(
        "\
input N: int;
n := 0;
k := 0;
while n < N do
  b :~ bernoulli({p});
  if b == 1 then
    k := k + 1
  end;
  n := n + 1
end
",
        p = paren(p)
    )
}

/// Example data of the SGD case: `n` points spread over `[0, 1]`, and the
/// neighbouring data set that replaces the first point by 1.
pub fn sgd_data(n: usize) -> (Vec<Rat>, Vec<Rat>) {
    let z1: Vec<Rat> = (0..n).map(|j| rat(j as i64, (n - 1) as i64)).collect();
    let mut z2 = z1.clone();
    z2[0] = Rat::one();
    (z1, z2)
}

/// Test point at which SGD losses are compared.
pub fn sgd_test_point() -> Rat {
    rat(1, 2)
}

/// `L` and `beta` of the loss `(w - z)^2` on `[0, 1]`: the gradient
/// `2(w - z)` is bounded by 2 and 2-Lipschitz.
pub const SGD_LIPSCHITZ: i64 = 2;
pub const LOSS_SMOOTHNESS: i64 = 2;

/// `gamma = (2L/n) * sum_{t=1..T} 1/(beta t)`.
pub fn sgd_gamma(n: usize, t_max: usize, beta: &Rat) -> Rat {
    let l = int(SGD_LIPSCHITZ);
    let steps: Rat = (1..=t_max).map(|t| Rat::one() / (beta * nat_rat(t))).sum();
    int(2) * l / nat_rat(n) * steps
}

pub fn make_case(name: &str, params: &Params) -> Result<CaseStudy> {
    match name {
        "hwalk" => deck_like(name, params, CaseKind::Bits, 12, 3, 3),
        "rtop" => deck_like(name, params, CaseKind::Perm, 8, 4, 4),
        "rtrans" => deck_like(name, params, CaseKind::Perm, 8, 3, 3),
        "riffle" => deck_like(name, params, CaseKind::Perm, 8, 4, 2),
        "binom" => binom(params),
        "td0" => td0(params),
        "sgd" => sgd(params),
        "pgd" => pgd(params),
        other => Err(Error::Params(format!("unknown case `{other}`; expected one of {}", CASES.join(", ")))),
    }
}

struct Parts {
    source: String,
    distance: String,
    invariant: Option<String>,
    specs: Vec<(usize, &'static str)>,
}

fn assemble(
    name: &'static str,
    params: Params,
    kind: CaseKind,
    parts: Parts,
    pair_mode: PairMode,
    observed: &[&str],
    rho: Rat,
    canonical: (State, State),
    bound: Option<Rat>,
) -> Result<CaseStudy> {
    let program = parse_program(&parts.source)?;
    let sig = signature(&program)?;
    let distance = parse_relexp(&parts.distance, &sig)?;
    let invariant = parts.invariant.as_deref().map(|s| parse_relexp(s, &sig)).transpose()?;
    let mut specs = Specs::new();
    for (site, spec) in parts.specs {
        specs.set(site, CouplingSpec::parse(spec)?);
    }
    Ok(CaseStudy {
        name,
        params,
        kind,
        source: parts.source,
        program,
        distance,
        invariant,
        specs,
        pair_mode,
        observed: observed.iter().map(|s| s.to_string()).collect(),
        rho,
        canonical,
        bound,
    })
}

fn deck_like(name: &str, params: &Params, kind: CaseKind, n_max: usize, n_def: usize, k_def: usize) -> Result<CaseStudy> {
    params.only(&["N", "K"])?;
    let n = params.nat("N", n_def, 1, n_max)?;
    let k = params.nat("K", k_def, 0, 10_000)?;
    let fixed = Params::new().with_int("N", n as i64).with_int("K", k as i64);
    let (name, source, var, distance, factor, specs, rho, scale): (&'static str, _, _, _, _, Vec<(usize, &'static str)>, _, _) =
        match name {
            "hwalk" => (
                "hwalk",
                HWALK,
                "pos",
                "dH(pos<1>, pos<2>)",
                "((N<1> - 1) / (N<1> + 1))",
                vec![(0, "cycle_diff(pos)")],
                rat(1, n as i64),
                nat_rat(n),
            ),
            "rtop" => (
                "rtop",
                RTOP,
                "deck",
                "dM(deck<1>, deck<2>)",
                "((N<1> - 1) / N<1>)",
                vec![(0, "match_card(deck)")],
                rat(1, n as i64),
                nat_rat(n),
            ),
            "rtrans" => (
                "rtrans",
                RTRANS,
                "deck",
                "dH(deck<1>, deck<2>)",
                "(1 - 1 / (N<1> * N<1>))",
                vec![(0, "identity"), (1, "deck_bijection(deck)")],
                rat(1, n as i64),
                nat_rat(n),
            ),
            _ => (
                "riffle",
                RIFFLE,
                "deck",
                "dP(deck<1>, deck<2>)",
                "(1 / 2)",
                vec![(0, "same_bits_per_card(deck)")],
                rat(1, (n * n) as i64),
                nat_rat(n * n),
            ),
        };
    let inv_dist = if name == "riffle" { "dBD(deck<1>, deck<2>)" } else { distance };
    let invariant = format!("inf * [k<1> != k<2>] + [k<1> == k<2>] * {inv_dist} * {factor} ^ monus(K<1>, k<1>)");
    let base = deck_factor(name, n);
    let bound = Some(scale.clone() * pow(&base, k));
    let mk = |v: Value| State::from_pairs([(var, v), ("N", Value::int(n as i64)), ("K", Value::int(k as i64))]);
    let canonical = match kind {
        CaseKind::Bits => (mk(bits_value(&vec![false; n])), mk(bits_value(&vec![true; n]))),
        _ => {
            let id: Vec<usize> = (0..n).collect();
            let rev: Vec<usize> = (0..n).rev().collect();
            (mk(perm_value(&id)), mk(perm_value(&rev)))
        }
    };
    let parts = Parts { source: source.to_string(), distance: distance.to_string(), invariant: Some(invariant), specs };
    assemble(name, fixed, kind, parts, PairMode::Sync, &[var], rho, canonical, bound)
}

/// Per-step contraction factor of the deck and hypercube cases.
fn deck_factor(name: &str, n: usize) -> Rat {
    let n = n as i64;
    match name {
        "hwalk" => rat(n - 1, n + 1),
        "rtop" => rat(n - 1, n),
        "rtrans" => Rat::one() - rat(1, n * n),
        _ => rat(1, 2),
    }
}

fn binom(params: &Params) -> Result<CaseStudy> {
    params.only(&["N", "N2", "p"])?;
    let n1 = params.nat("N", 2, 0, 64)?;
    let n2 = params.nat("N2", n1 + 2, 0, 64)?;
    let p = params.frac("p", rat(1, 2), Rat::zero(), Rat::one())?;
    let fixed = Params::new().with_int("N", n1 as i64).with_int("N2", n2 as i64).with("p", p.clone());
    let ps = paren(&p);
    let parts = Parts {
        source: binom_source(&p),
        distance: "abs(k<1> - k<2>)".into(),
        invariant: Some(format!("abs(k<1> - k<2> + {ps} * monus(N<1>, n<1>) - {ps} * monus(N<2>, n<2>))")),
        specs: vec![(0, "identity")],
    };
    let canonical = (
        State::from_pairs([("N", Value::int(n1 as i64))]),
        State::from_pairs([("N", Value::int(n2 as i64))]),
    );
    let bound = Some(&p * nat_rat(n1.abs_diff(n2)));
    assemble("binom", fixed, CaseKind::Counter, parts, PairMode::Async, &["k"], Rat::one(), canonical, bound)
}

/// `k = 1 - alpha + alpha * gamma`.
pub fn td0_contraction(alpha: &Rat, gamma: &Rat) -> Rat {
    Rat::one() - alpha + alpha * gamma
}

fn td0(params: &Params) -> Result<CaseStudy> {
    params.only(&["N", "alpha", "gamma"])?;
    let n = params.nat("N", 2, 0, 50)?;
    let alpha = params.frac("alpha", rat(1, 2), Rat::zero(), Rat::one())?;
    let gamma = params.frac("gamma", rat(1, 2), Rat::zero(), Rat::one())?;
    let fixed = Params::new().with_int("N", n as i64).with("alpha", alpha.clone()).with("gamma", gamma.clone());
    let parts = Parts {
        source: td0_source(&alpha, &gamma),
        distance: "infNorm(V<1>, V<2>)".into(),
        invariant: None,
        specs: vec![
            (0, "identity"),
            (1, "if a<1> == a<2> then identity else independent"),
            (2, "if a<1> == a<2> then identity else independent"),
        ],
    };
    let v1 = vec![Rat::zero(); 3];
    let v2 = vec![Rat::one(), rat(1, 2), rat(1, 4)];
    let gap = v1.iter().zip(&v2).map(|(a, b)| (a - b).abs()).max().unwrap_or_else(Rat::zero);
    let mk = |v: Vec<Rat>| State::from_pairs([("V", Value::Array(v)), ("N", Value::int(n as i64))]);
    let bound = Some(pow(&td0_contraction(&alpha, &gamma), n) * gap);
    assemble("td0", fixed, CaseKind::Continuous, parts, PairMode::Sync, &["V"], Rat::one(), (mk(v1), mk(v2)), bound)
}

fn sgd(params: &Params) -> Result<CaseStudy> {
    params.only(&["T", "n", "beta"])?;
    let t = params.nat("T", 20, 0, 1000)?;
    let n = params.nat("n", 10, 2, 100)?;
    let beta = params.frac("beta", int(LOSS_SMOOTHNESS), int(LOSS_SMOOTHNESS), int(1000))?;
    let fixed = Params::new().with_int("T", t as i64).with_int("n", n as i64).with("beta", beta.clone());
    let zt = paren(&sgd_test_point());
    let distance = format!("abs((w<1> - {zt}) * (w<1> - {zt}) - (w<2> - {zt}) * (w<2> - {zt}))");
    let parts = Parts { source: sgd_source(&beta), distance, invariant: None, specs: vec![(0, "identity")] };
    let (z1, z2) = sgd_data(n);
    let mk = |z: Vec<Rat>| {
        State::from_pairs([("Z", Value::Array(z)), ("w0", Value::rat(rat(1, 2))), ("T", Value::int(t as i64))])
    };
    let bound = Some(sgd_gamma(n, t, &beta) * int(SGD_LIPSCHITZ));
    assemble("sgd", fixed, CaseKind::Continuous, parts, PairMode::Sync, &["w"], Rat::one(), (mk(z1), mk(z2)), bound)
}

fn pgd(params: &Params) -> Result<CaseStudy> {
    params.only(&["T", "alpha"])?;
    let t = params.nat("T", 10, 1, 1000)?;
    let alpha = params.frac("alpha", rat(1, 2), rat(1, 2), int(4))?;
    let ab = &alpha * int(LOSS_SMOOTHNESS);
    if !ab.is_integer() {
        return Err(Error::Params("alpha * beta must be an integer so that the bound stays rational".into()));
    }
    let fixed = Params::new().with_int("T", t as i64).with("alpha", alpha.clone());
    let parts = Parts { source: pgd_source(&alpha), distance: "abs(w<1> - w<2>)".into(), invariant: None, specs: vec![] };
    let (z1, z2) = (rat(1, 4), rat(3, 4));
    let gamma = int(2) * (&z1 - &z2).abs();
    let mk = |z: Rat| State::from_pairs([("z", Value::rat(z)), ("w0", Value::rat(rat(1, 2))), ("T", Value::int(t as i64))]);
    let e = ab.to_integer().to_usize().unwrap_or(0) + 1;
    let bound = Some(&alpha * gamma * pow(&nat_rat(t), e));
    assemble("pgd", fixed, CaseKind::Continuous, parts, PairMode::Sync, &["w"], Rat::one(), (mk(z1), mk(z2)), bound)
}

/// All bitvectors of length `n` in binary counting order.
pub fn all_bitvectors(n: usize) -> Vec<Vec<bool>> {
    (0..1usize << n).map(|m| (0..n).map(|j| m >> (n - 1 - j) & 1 == 1).collect()).collect()
}

/// All permutations of `0..n` in lexicographic order.
pub fn all_perms(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        out.push(p.clone());
        let Some(i) = (1..n).rev().find(|&i| p[i - 1] < p[i]) else { break };
        let j = (i..n).rev().find(|&j| p[j] > p[i - 1]).unwrap();
        p.swap(i - 1, j);
        p[i..].reverse();
    }
    out
}

/// Largest `N` for which the exact engine enumerates all start states.
pub fn exact_limit(kind: CaseKind) -> usize {
    match kind {
        CaseKind::Bits => 12,
        CaseKind::Perm => 6,
        _ => 0,
    }
}

impl CaseStudy {
    /// The same case with one parameter changed.
    pub fn with_param(&self, key: &str, v: Rat) -> Result<CaseStudy> {
        make_case(self.name, &self.params.clone().with(key, v))
    }

    pub fn param_nat(&self, key: &str) -> Option<usize> {
        self.params.get(key).and_then(|q| q.to_integer().to_usize())
    }

    /// The analytic bound at the case's parameters and canonical inputs.
    pub fn analytic_bound(&self) -> Option<&Rat> {
        self.bound.as_ref()
    }

    /// Input states for the canonical pair: all-zeros against all-ones,
    /// the identity deck against the reversed deck, or the case's
    /// neighbouring inputs.
    pub fn canonical_inputs(&self) -> (State, State) {
        self.canonical.clone()
    }

    /// The array variable of bitvector and permutation cases.
    pub fn array_var(&self) -> Option<&str> {
        match self.kind {
            CaseKind::Bits => Some("pos"),
            CaseKind::Perm => Some("deck"),
            _ => None,
        }
    }

    /// Input state carrying `data` in the array variable.
    pub fn input_with(&self, data: &[i64]) -> Result<State> {
        let var = self
            .array_var()
            .ok_or_else(|| Error::Precondition(format!("{} has no array input", self.name)))?;
        let n = self.param_nat("N").unwrap_or(0);
        if data.len() != n {
            return Err(Error::Params(format!("expected {n} entries, found {}", data.len())));
        }
        Ok(self.canonical.0.with(var, Value::ints(data)))
    }

    /// Every input state of a bitvector or permutation case.
    pub fn all_inputs(&self) -> Result<Vec<State>> {
        let n = self.param_nat("N").unwrap_or(0);
        if n > exact_limit(self.kind) {
            return Err(Error::StateSpace(format!(
                "{} with N = {n} is too large to enumerate (limit {}); use simulated mode",
                self.name,
                exact_limit(self.kind)
            )));
        }
        let data: Vec<Vec<i64>> = match self.kind {
            CaseKind::Bits => all_bitvectors(n).into_iter().map(|b| b.into_iter().map(i64::from).collect()).collect(),
            CaseKind::Perm => all_perms(n).into_iter().map(|p| p.into_iter().map(|x| x as i64).collect()).collect(),
            _ => return Err(Error::Precondition(format!("{} has no enumerable inputs", self.name))),
        };
        data.iter().map(|d| self.input_with(d)).collect()
    }

    fn split(&self) -> (Vec<&Command>, &Command) {
        let cs: Vec<&Command> = match &self.program.body {
            Command::Seq(cs) => cs.iter().collect(),
            c => vec![c],
        };
        let at = cs.iter().position(|c| matches!(c, Command::While { .. })).unwrap_or(cs.len() - 1);
        (cs[..at].to_vec(), cs[at])
    }

    /// The top-level loop of the program.
    pub fn main_loop(&self) -> &Command {
        self.split().1
    }

    /// Commands before the top-level loop.
    pub fn prelude(&self) -> Command {
        Command::seq(self.split().0.into_iter().cloned().collect())
    }

    /// The state reached at the loop head from an input state.
    pub fn loop_head(&self, input: &State) -> Result<State> {
        let d = denote_exact(&self.prelude(), input, &Config::sequential())?;
        match d.iter().collect::<Vec<_>>().as_slice() {
            [(s, p)] if p.is_one() => Ok((*s).clone()),
            _ => Err(Error::Precondition("the prelude of the case is not deterministic".into())),
        }
    }

    /// Loop-head pairs the canonical invariant is checked from: all ordered
    /// pairs of inputs for enumerable cases, the canonical pair otherwise.
    pub fn invariant_init(&self) -> Result<Vec<(State, State)>> {
        let heads = match self.kind {
            CaseKind::Bits | CaseKind::Perm => self
                .all_inputs()?
                .iter()
                .map(|s| self.loop_head(s))
                .collect::<Result<Vec<_>>>()?,
            _ => {
                let (a, b) = self.canonical_inputs();
                return Ok(vec![(self.loop_head(&a)?, self.loop_head(&b)?)]);
            }
        };
        let mut out = Vec::with_capacity(heads.len() * heads.len());
        for a in &heads {
            for b in &heads {
                out.push((a.clone(), b.clone()));
            }
        }
        Ok(out)
    }

    /// Checks the canonical invariant over the pair space explored from
    /// [`CaseStudy::invariant_init`].
    pub fn check_canonical_invariant(&self, cfg: &Config) -> Result<CheckReport> {
        let inv = self
            .invariant
            .as_ref()
            .ok_or_else(|| Error::Precondition(format!("{} has no canonical invariant", self.name)))?;
        self.check_invariant_expr(inv, cfg)
    }

    pub fn check_invariant_expr(&self, inv: &Expr, cfg: &Config) -> Result<CheckReport> {
        let lp = self.main_loop();
        let init = self.invariant_init()?;
        let space = PairSpace::explore(lp, &init, &self.specs, self.pair_mode, cfg)?;
        match self.pair_mode {
            PairMode::Sync => check_invariant(lp, &self.distance, inv, &self.specs, &space, cfg),
            PairMode::Async => check_async_invariant(lp, &self.distance, inv, &self.specs, &space, cfg),
        }
    }

    /// The analytic bound of a deck or hypercube case at `K = k`.
    pub fn bound_at(&self, k: usize) -> Option<Rat> {
        let n = self.param_nat("N")?;
        match self.kind {
            CaseKind::Bits | CaseKind::Perm => {
                let scale = if self.name == "riffle" { nat_rat(n * n) } else { nat_rat(n) };
                Some(scale * pow(&deck_factor(self.name, n), k))
            }
            _ => None,
        }
    }
}
