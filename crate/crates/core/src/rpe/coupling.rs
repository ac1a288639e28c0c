//! Per-site coupling annotations and the joint distributions they induce.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::ToPrimitive;

use crate::error::{Error, Result};
use crate::lang::ast::{Command, Expr, ExprKind};
use crate::lang::eval::{eval, eval_bool, Pair};
use crate::lang::parse_expr;
use crate::lang::perm::{as_perm, inverse};
use crate::lang::printer::expr_to_string;
use crate::num::Rat;
use crate::semantics::{JointDist, SubDist};
use crate::state::{State, Value};

/// Value bijections indexed by the pair of states before sampling.
#[derive(Clone, Debug, PartialEq)]
pub enum Bijection {
    Id,
    /// Exchanges the two values and fixes everything else.
    SwapWith(Expr, Expr),
    /// Hypercube step: cycles through the coordinates where the two
    /// bitvectors differ, using value `j + 1` for coordinate `j`.
    CycleDiff(String),
    /// Draw position `p` on the left; draw the position of the same card on
    /// the right.
    MatchCard(String),
    /// Like `MatchCard`, kept separate for the second draw of a transposition.
    DeckBijection(String),
    /// Position `p` on the left maps to the position of card `pi[deck[p]]` on
    /// the right.
    MatchPerm(String, Expr),
    /// A bitvector indexed by position on the left is relabelled so that each
    /// card gets the same bit on both sides.
    SameBitsPerCard(String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum CouplingSpec {
    Identity,
    Bijection(Bijection),
    Independent,
    Optimal,
    /// Chooses between two specs with a relational guard.
    Conditional(Expr, Box<CouplingSpec>, Box<CouplingSpec>),
}

static OPTIMAL: CouplingSpec = CouplingSpec::Optimal;

fn arr(s: &State, name: &str) -> Result<Vec<usize>> {
    let v = s
        .get(name)
        .ok_or_else(|| Error::eval(format!("coupling refers to unknown variable `{name}`")))?;
    as_perm(v.as_array()?)
}

fn raw(s: &State, name: &str) -> Result<Vec<Rat>> {
    let v = s
        .get(name)
        .ok_or_else(|| Error::eval(format!("coupling refers to unknown variable `{name}`")))?;
    Ok(v.as_array()?.to_vec())
}

fn idx(v: &Value) -> Result<usize> {
    v.as_index()?
        .to_usize()
        .ok_or_else(|| Error::eval(format!("coupling expects a natural number, found {v}")))
}

impl Bijection {
    pub fn apply(&self, v: &Value, s1: &State, s2: &State) -> Result<Value> {
        match self {
            Bijection::Id => Ok(v.clone()),
            Bijection::SwapWith(a, b) => {
                let a = eval(a, &Pair(s1, s2))?;
                let b = eval(b, &Pair(s1, s2))?;
                Ok(if *v == a {
                    b
                } else if *v == b {
                    a
                } else {
                    v.clone()
                })
            }
            Bijection::CycleDiff(name) => {
                let (p1, p2) = (raw(s1, name)?, raw(s2, name)?);
                let diff: Vec<usize> = (0..p1.len().min(p2.len()))
                    .filter(|&j| p1[j] != p2[j])
                    .map(|j| j + 1)
                    .collect();
                let i = idx(v)?;
                let out = match diff.len() {
                    0 => i,
                    1 if i == diff[0] => 0,
                    1 if i == 0 => diff[0],
                    1 => i,
                    m => match diff.iter().position(|&d| d == i) {
                        Some(k) => diff[(k + 1) % m],
                        None => i,
                    },
                };
                Ok(Value::int(out as i64))
            }
            Bijection::MatchCard(name) | Bijection::DeckBijection(name) => {
                let (d1, d2) = (arr(s1, name)?, arr(s2, name)?);
                let p = idx(v)?;
                let card = *d1.get(p).ok_or_else(|| Error::OutOfBounds { index: p.to_string(), len: d1.len() })?;
                let inv2 = inverse(&d2);
                let q = *inv2.get(card).ok_or_else(|| Error::eval("decks have different lengths"))?;
                Ok(Value::int(q as i64))
            }
            Bijection::MatchPerm(name, pi) => {
                let (d1, d2) = (arr(s1, name)?, arr(s2, name)?);
                let pi = as_perm(eval(pi, &Pair(s1, s2))?.as_array()?)?;
                let p = idx(v)?;
                let card = *d1.get(p).ok_or_else(|| Error::OutOfBounds { index: p.to_string(), len: d1.len() })?;
                let target = *pi.get(card).ok_or_else(|| Error::eval("permutation has the wrong length"))?;
                let q = *inverse(&d2).get(target).ok_or_else(|| Error::eval("decks have different lengths"))?;
                Ok(Value::int(q as i64))
            }
            Bijection::SameBitsPerCard(name) => {
                let (d1, d2) = (arr(s1, name)?, arr(s2, name)?);
                let b1 = v.as_array()?;
                if b1.len() != d1.len() || d2.len() != d1.len() {
                    return Err(Error::eval("bitvector and decks have different lengths"));
                }
                let inv1 = inverse(&d1);
                Ok(Value::Array(d2.iter().map(|&card| b1[inv1[card]].clone()).collect()))
            }
        }
    }
}

impl CouplingSpec {
    /// The joint distribution of the two sampled values, or `None` when the
    /// optimal coupling is requested.
    pub fn couple(
        &self,
        site: &str,
        d1: &SubDist<Value>,
        d2: &SubDist<Value>,
        s1: &State,
        s2: &State,
    ) -> Result<Option<JointDist<Value>>> {
        let bad = |msg: String| Error::Coupling { site: site.to_string(), msg };
        match self {
            CouplingSpec::Optimal => Ok(None),
            CouplingSpec::Independent => Ok(Some(JointDist::product(d1, d2))),
            CouplingSpec::Identity => {
                if d1 != d2 {
                    return Err(bad(format!("identity coupling needs equal distributions at ({s1}, {s2})")));
                }
                let mut j = JointDist::new();
                for (v, p) in d1.iter() {
                    j.add(v.clone(), v.clone(), p.clone());
                }
                Ok(Some(j))
            }
            CouplingSpec::Bijection(f) => {
                let mut j = JointDist::new();
                for (v, p) in d1.iter() {
                    j.add(v.clone(), f.apply(v, s1, s2)?, p.clone());
                }
                let (_, right) = j.marginals();
                if &right != d2 {
                    let witness = right
                        .iter()
                        .find(|(w, q)| d2.get(w) != **q)
                        .map(|(w, _)| w.clone())
                        .or_else(|| d2.iter().find(|(w, _)| right.get(w) != d2.get(w)).map(|(w, _)| w.clone()));
                    let w = witness.map(|w| w.to_string()).unwrap_or_default();
                    return Err(bad(format!("bijection is not measure preserving at value {w} for ({s1}, {s2})")));
                }
                Ok(Some(j))
            }
            CouplingSpec::Conditional(g, a, b) => {
                if eval_bool(g, &Pair(s1, s2))? {
                    a.couple(site, d1, d2, s1, s2)
                } else {
                    b.couple(site, d1, d2, s1, s2)
                }
            }
        }
    }

    pub fn parse(src: &str) -> Result<CouplingSpec> {
        let src = src.trim();
        if let Some(rest) = strip_keyword(src, "if") {
            let (guard, rest) = split_keyword(rest, "then")
                .ok_or_else(|| spec_err(src, "expected `then`"))?;
            let (then_src, else_src) = if rest.trim_start().starts_with('(') {
                let r = rest.trim_start();
                let close = matching_paren(r).ok_or_else(|| spec_err(src, "unbalanced parentheses"))?;
                let after = strip_keyword(&r[close + 1..], "else").ok_or_else(|| spec_err(src, "expected `else`"))?;
                (&r[1..close], after)
            } else {
                split_keyword(rest, "else").ok_or_else(|| spec_err(src, "expected `else`"))?
            };
            return Ok(CouplingSpec::Conditional(
                parse_expr(guard)?,
                Box::new(CouplingSpec::parse(then_src)?),
                Box::new(CouplingSpec::parse(else_src)?),
            ));
        }
        if src.starts_with('(') && matching_paren(src) == Some(src.len() - 1) {
            return CouplingSpec::parse(&src[1..src.len() - 1]);
        }
        let (name, args) = match src.find('(') {
            Some(i) if src.ends_with(')') => (src[..i].trim(), split_args(&src[i + 1..src.len() - 1])),
            _ => (src, Vec::new()),
        };
        let var = |k: usize| -> Result<String> {
            let a = args.get(k).ok_or_else(|| spec_err(src, "missing argument"))?;
            match parse_expr(a)?.kind {
                ExprKind::Var(x, None) => Ok(x.to_string()),
                _ => Err(spec_err(src, "expected a variable name")),
            }
        };
        let want = |n: usize| -> Result<()> {
            if args.len() == n {
                Ok(())
            } else {
                Err(spec_err(src, &format!("`{name}` takes {n} argument(s)")))
            }
        };
        let b = |x| Ok(CouplingSpec::Bijection(x));
        match name {
            "identity" => want(0).map(|_| CouplingSpec::Identity),
            "independent" => want(0).map(|_| CouplingSpec::Independent),
            "optimal" => want(0).map(|_| CouplingSpec::Optimal),
            "id" => want(0).and_then(|_| b(Bijection::Id)),
            "swap_with" => {
                want(2)?;
                b(Bijection::SwapWith(parse_expr(&args[0])?, parse_expr(&args[1])?))
            }
            "cycle_diff" => want(1).and_then(|_| b(Bijection::CycleDiff(var(0)?))),
            "match_card" => want(1).and_then(|_| b(Bijection::MatchCard(var(0)?))),
            "deck_bijection" => want(1).and_then(|_| b(Bijection::DeckBijection(var(0)?))),
            "same_bits_per_card" => want(1).and_then(|_| b(Bijection::SameBitsPerCard(var(0)?))),
            "match_perm" => {
                want(2)?;
                b(Bijection::MatchPerm(var(0)?, parse_expr(&args[1])?))
            }
            _ => Err(spec_err(src, "unknown coupling")),
        }
    }
}

impl fmt::Display for CouplingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CouplingSpec::Identity => write!(f, "identity"),
            CouplingSpec::Independent => write!(f, "independent"),
            CouplingSpec::Optimal => write!(f, "optimal"),
            CouplingSpec::Bijection(b) => match b {
                Bijection::Id => write!(f, "id"),
                Bijection::SwapWith(a, c) => write!(f, "swap_with({}, {})", expr_to_string(a), expr_to_string(c)),
                Bijection::CycleDiff(x) => write!(f, "cycle_diff({x})"),
                Bijection::MatchCard(x) => write!(f, "match_card({x})"),
                Bijection::DeckBijection(x) => write!(f, "deck_bijection({x})"),
                Bijection::SameBitsPerCard(x) => write!(f, "same_bits_per_card({x})"),
                Bijection::MatchPerm(x, p) => write!(f, "match_perm({x}, {})", expr_to_string(p)),
            },
            CouplingSpec::Conditional(g, a, b) => {
                write!(f, "if {} then ({a}) else {b}", expr_to_string(g))
            }
        }
    }
}

fn spec_err(src: &str, msg: &str) -> Error {
    Error::Params(format!("coupling `{src}`: {msg}"))
}

fn strip_keyword<'a>(s: &'a str, kw: &str) -> Option<&'a str> {
    let s = s.trim_start();
    let rest = s.strip_prefix(kw)?;
    rest.starts_with(|c: char| c.is_whitespace() || c == '(').then_some(rest)
}

/// Splits at the first top-level occurrence of the keyword.
fn split_keyword<'a>(s: &'a str, kw: &str) -> Option<(&'a str, &'a str)> {
    let bytes = s.as_bytes();
    let mut depth = 0i32;
    for (i, c) in s.char_indices() {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            _ if depth == 0 && s[i..].starts_with(kw) => {
                let before = i == 0 || bytes[i - 1].is_ascii_whitespace() || bytes[i - 1] == b')';
                let j = i + kw.len();
                let after = j < s.len() && (bytes[j].is_ascii_whitespace() || bytes[j] == b'(');
                if before && after {
                    return Some((&s[..i], &s[j..]));
                }
            }
            _ => {}
        }
    }
    None
}

fn matching_paren(s: &str) -> Option<usize> {
    let mut depth = 0i32;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

fn split_args(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for c in s.chars() {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            ',' if depth == 0 => {
                out.push(cur.trim().to_string());
                cur.clear();
                continue;
            }
            _ => {}
        }
        cur.push(c);
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

/// Coupling choices for the sampling sites of one program. Sites without an
/// entry use the optimal coupling.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Specs {
    by_site: BTreeMap<usize, CouplingSpec>,
}

impl Specs {
    pub fn new() -> Specs {
        Specs::default()
    }

    pub fn with(mut self, site: usize, spec: CouplingSpec) -> Specs {
        self.by_site.insert(site, spec);
        self
    }

    pub fn set(&mut self, site: usize, spec: CouplingSpec) {
        self.by_site.insert(site, spec);
    }

    pub fn get(&self, site: usize) -> &CouplingSpec {
        self.by_site.get(&site).unwrap_or(&OPTIMAL)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &CouplingSpec)> {
        self.by_site.iter().map(|(k, v)| (*k, v))
    }

    pub fn is_empty(&self) -> bool {
        self.by_site.is_empty()
    }

    /// Reads `key : spec` lines. A key is `#n` (the n-th sampling statement,
    /// from 0), `line:col` of the statement, or the sampled variable when
    /// only one statement samples it. `//` starts a comment.
    pub fn parse(src: &str, program: &Command) -> Result<Specs> {
        let sites = program.sites();
        let mut specs = Specs::new();
        for line in src.lines() {
            let line = line.split("//").next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, spec) = split_key(line).ok_or_else(|| Error::Params(format!("expected `site : coupling`, found `{line}`")))?;
            let key = key.trim();
            let site = if let Some(n) = key.strip_prefix('#') {
                let n: usize = n.parse().map_err(|_| Error::Params(format!("bad site ordinal `{key}`")))?;
                sites.iter().find(|(s, _)| s.index == n).map(|(s, _)| s.index)
            } else if let Some((l, c)) = key.split_once(':') {
                let (l, c): (usize, usize) = match (l.trim().parse(), c.trim().parse()) {
                    (Ok(l), Ok(c)) => (l, c),
                    _ => return Err(Error::Params(format!("bad site position `{key}`"))),
                };
                sites.iter().find(|(s, _)| s.span.line == l && s.span.col == c).map(|(s, _)| s.index)
            } else {
                let hits: Vec<usize> = sites.iter().filter(|(_, v)| &**v == key).map(|(s, _)| s.index).collect();
                if hits.len() > 1 {
                    return Err(Error::Params(format!("`{key}` is sampled at several sites; use `#n` or `line:col`")));
                }
                hits.first().copied()
            };
            let site = site.ok_or_else(|| Error::Params(format!("no sampling site matches `{key}`")))?;
            specs.set(site, CouplingSpec::parse(spec)?);
        }
        Ok(specs)
    }
}

/// Splits `key : spec`, where the key itself may be `line:col`.
fn split_key(line: &str) -> Option<(&str, &str)> {
    let mut parts = line.match_indices(':').map(|(i, _)| i);
    let first = parts.next()?;
    let head = line[..first].trim();
    if head.chars().all(|c| c.is_ascii_digit()) && !head.is_empty() {
        let second = parts.next()?;
        Some((&line[..second], &line[second + 1..]))
    } else {
        Some((&line[..first], &line[first + 1..]))
    }
}
