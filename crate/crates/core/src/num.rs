//! Exact numbers: arbitrary-precision rationals extended with `+inf`.
//!
//! Multiplication follows the measure-theoretic convention `0 * inf = 0`.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rat = BigRational;

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// A rational number or positive infinity.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Ext {
    Fin(Rat),
    Inf,
}

impl Ext {
    pub fn zero() -> Ext {
        Ext::Fin(Rat::zero())
    }

    pub fn one() -> Ext {
        Ext::Fin(Rat::one())
    }

    pub fn from_int(n: i64) -> Ext {
        Ext::Fin(int(n))
    }

    pub fn ratio(n: i64, d: i64) -> Ext {
        Ext::Fin(rat(n, d))
    }

    pub fn is_inf(&self) -> bool {
        matches!(self, Ext::Inf)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Ext::Fin(q) if q.is_zero())
    }

    pub fn is_negative(&self) -> bool {
        matches!(self, Ext::Fin(q) if q.is_negative())
    }

    pub fn finite(&self) -> Option<&Rat> {
        match self {
            Ext::Fin(q) => Some(q),
            Ext::Inf => None,
        }
    }

    pub fn into_finite(self) -> Option<Rat> {
        match self {
            Ext::Fin(q) => Some(q),
            Ext::Inf => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Ext::Fin(q) => rat_to_f64(q),
            Ext::Inf => f64::INFINITY,
        }
    }

    pub fn add(&self, o: &Ext) -> Ext {
        match (self, o) {
            (Ext::Fin(a), Ext::Fin(b)) => Ext::Fin(a + b),
            _ => Ext::Inf,
        }
    }

    /// Subtraction; fails when the result would be `inf - inf` or `q - inf`.
    pub fn sub(&self, o: &Ext) -> Result<Ext> {
        match (self, o) {
            (Ext::Fin(a), Ext::Fin(b)) => Ok(Ext::Fin(a - b)),
            (Ext::Inf, Ext::Fin(_)) => Ok(Ext::Inf),
            _ => Err(Error::eval("subtraction of inf is undefined")),
        }
    }

    pub fn mul(&self, o: &Ext) -> Result<Ext> {
        match (self, o) {
            (Ext::Fin(a), Ext::Fin(b)) => Ok(Ext::Fin(a * b)),
            (Ext::Fin(a), Ext::Inf) | (Ext::Inf, Ext::Fin(a)) => {
                if a.is_zero() {
                    Ok(Ext::zero())
                } else if a.is_positive() {
                    Ok(Ext::Inf)
                } else {
                    Err(Error::eval("negative multiple of inf"))
                }
            }
            (Ext::Inf, Ext::Inf) => Ok(Ext::Inf),
        }
    }

    pub fn mul_rat(&self, q: &Rat) -> Ext {
        match self {
            Ext::Fin(a) => Ext::Fin(a * q),
            Ext::Inf if q.is_zero() => Ext::zero(),
            Ext::Inf => Ext::Inf,
        }
    }

    pub fn div(&self, o: &Ext) -> Result<Ext> {
        match (self, o) {
            (_, Ext::Fin(b)) if b.is_zero() => Err(Error::eval("division by zero")),
            (Ext::Fin(a), Ext::Fin(b)) => Ok(Ext::Fin(a / b)),
            (Ext::Fin(_), Ext::Inf) => Ok(Ext::zero()),
            (Ext::Inf, Ext::Fin(b)) if b.is_positive() => Ok(Ext::Inf),
            _ => Err(Error::eval("undefined division involving inf")),
        }
    }

    pub fn neg(&self) -> Result<Ext> {
        match self {
            Ext::Fin(a) => Ok(Ext::Fin(-a)),
            Ext::Inf => Err(Error::eval("negation of inf")),
        }
    }

    pub fn abs(&self) -> Ext {
        match self {
            Ext::Fin(a) => Ext::Fin(a.abs()),
            Ext::Inf => Ext::Inf,
        }
    }

    /// Truncated subtraction `max(a - b, 0)`.
    pub fn monus(&self, o: &Ext) -> Result<Ext> {
        match (self, o) {
            (_, Ext::Inf) => Ok(Ext::zero()),
            _ => Ok(self.sub(o)?.max(Ext::zero())),
        }
    }

    pub fn pow(&self, e: &Ext) -> Result<Ext> {
        let n = e
            .finite()
            .filter(|q| q.is_integer() && !q.is_negative())
            .and_then(|q| q.to_integer().to_u32())
            .ok_or_else(|| Error::eval("exponent must be a small natural number"))?;
        match self {
            Ext::Fin(a) => Ok(Ext::Fin(num_traits::pow(a.clone(), n as usize))),
            Ext::Inf if n == 0 => Ok(Ext::one()),
            Ext::Inf => Ok(Ext::Inf),
        }
    }
}

impl PartialOrd for Ext {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ext {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Ext::Fin(a), Ext::Fin(b)) => a.cmp(b),
            (Ext::Fin(_), Ext::Inf) => Ordering::Less,
            (Ext::Inf, Ext::Fin(_)) => Ordering::Greater,
            (Ext::Inf, Ext::Inf) => Ordering::Equal,
        }
    }
}

impl From<Rat> for Ext {
    fn from(q: Rat) -> Self {
        Ext::Fin(q)
    }
}

impl fmt::Display for Ext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ext::Fin(q) => write!(f, "{}", fmt_rat(q)),
            Ext::Inf => write!(f, "inf"),
        }
    }
}

pub fn fmt_rat(q: &Rat) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

pub fn rat_to_f64(q: &Rat) -> f64 {
    q.to_f64().unwrap_or_else(|| {
        // Huge numerators and denominators: scale both down before dividing.
        let n = q.numer().bits() as i64;
        let d = q.denom().bits() as i64;
        let shift = (n.max(d) - 1000).max(0) as u64;
        let nf = (q.numer() >> shift).to_f64().unwrap_or(f64::NAN);
        let df = (q.denom() >> shift).to_f64().unwrap_or(f64::NAN);
        nf / df
    })
}

/// Parses `3`, `-2/7`, `0.125` or `inf`.
pub fn parse_ext(s: &str) -> Option<Ext> {
    let s = s.trim();
    if s == "inf" {
        return Some(Ext::Inf);
    }
    parse_rat(s).map(Ext::Fin)
}

pub fn parse_rat(s: &str) -> Option<Rat> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Rat::new(n, d));
    }
    if let Some((i, frac)) = s.split_once('.') {
        let neg = i.starts_with('-');
        let digits = format!("{}{}", i.trim_start_matches('-'), frac);
        let n: BigInt = digits.parse().ok()?;
        let d = num_traits::pow(BigInt::from(10), frac.len());
        let q = Rat::new(n, d);
        return Some(if neg { -q } else { q });
    }
    s.parse::<BigInt>().ok().map(Rat::from_integer)
}

impl serde::Serialize for Ext {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Serializes a rational as its exact fraction string.
pub fn ser_rat<S: serde::Serializer>(q: &Rat, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&fmt_rat(q))
}

pub fn ser_opt_rat<S: serde::Serializer>(q: &Option<Rat>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match q {
        Some(q) => s.serialize_str(&fmt_rat(q)),
        None => s.serialize_none(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_times_inf_is_zero() {
        assert_eq!(Ext::zero().mul(&Ext::Inf).unwrap(), Ext::zero());
        assert_eq!(Ext::Inf.mul_rat(&Rat::zero()), Ext::zero());
    }

    #[test]
    fn inf_absorbs_addition() {
        assert_eq!(Ext::Inf.add(&Ext::from_int(3)), Ext::Inf);
        assert!(Ext::Inf <= Ext::Inf);
        assert!(Ext::from_int(1_000_000) < Ext::Inf);
    }

    #[test]
    fn monus_clamps() {
        let a = Ext::from_int(2);
        let b = Ext::from_int(5);
        assert_eq!(a.monus(&b).unwrap(), Ext::zero());
        assert_eq!(b.monus(&a).unwrap(), Ext::from_int(3));
    }

    #[test]
    fn parses_literals() {
        assert_eq!(parse_rat("0.125"), Some(rat(1, 8)));
        assert_eq!(parse_rat("-3/6"), Some(rat(-1, 2)));
        assert_eq!(parse_ext("inf"), Some(Ext::Inf));
        assert_eq!(parse_rat("1/0"), None);
    }

    #[test]
    fn pow_natural_only() {
        let q = Ext::ratio(2, 3);
        assert_eq!(q.pow(&Ext::from_int(3)).unwrap(), Ext::ratio(8, 27));
        assert!(q.pow(&Ext::ratio(1, 2)).is_err());
    }
}
