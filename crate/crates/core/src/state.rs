//! Program values and canonical states.

use std::fmt;
use std::sync::Arc;

use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::num::{fmt_rat, Ext, Rat};

pub type Ident = Arc<str>;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Num(Ext),
    Bool(bool),
    Array(Vec<Rat>),
}

impl Value {
    pub fn int(n: i64) -> Value {
        Value::Num(Ext::from_int(n))
    }

    pub fn rat(q: Rat) -> Value {
        Value::Num(Ext::Fin(q))
    }

    pub fn ints(xs: &[i64]) -> Value {
        Value::Array(xs.iter().map(|&x| crate::num::int(x)).collect())
    }

    pub fn as_num(&self) -> Result<&Ext> {
        match self {
            Value::Num(x) => Ok(x),
            other => Err(Error::eval(format!(
                "expected a number, found {}",
                other.kind()
            ))),
        }
    }

    pub fn as_bool(&self) -> Result<bool> {
        match self {
            Value::Bool(b) => Ok(*b),
            other => Err(Error::eval(format!(
                "expected a boolean, found {}",
                other.kind()
            ))),
        }
    }

    pub fn as_array(&self) -> Result<&[Rat]> {
        match self {
            Value::Array(a) => Ok(a),
            other => Err(Error::eval(format!(
                "expected an array, found {}",
                other.kind()
            ))),
        }
    }

    /// Integer view of a finite integral number.
    pub fn as_index(&self) -> Result<i64> {
        let x = self.as_num()?;
        match x {
            Ext::Fin(q) if q.is_integer() => q
                .to_integer()
                .to_i64()
                .ok_or_else(|| Error::eval("integer too large for an index")),
            _ => Err(Error::eval(format!("expected an integer, found {x}"))),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Value::Num(_) => "number",
            Value::Bool(_) => "boolean",
            Value::Array(_) => "array",
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(x) => write!(f, "{x}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Array(a) => {
                write!(f, "[")?;
                for (i, x) in a.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{}", fmt_rat(x))?;
                }
                write!(f, "]")
            }
        }
    }
}

/// A program state: variables sorted by name.
///
/// The derived ordering and hash follow the canonical encoding, so two states
/// are equal exactly when [`State::encode`] agrees.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State {
    vars: Vec<(Ident, Value)>,
}

impl State {
    pub fn new() -> State {
        State::default()
    }

    pub fn from_pairs<I, S>(pairs: I) -> State
    where
        I: IntoIterator<Item = (S, Value)>,
        S: AsRef<str>,
    {
        let mut s = State::new();
        for (k, v) in pairs {
            s.set(k.as_ref(), v);
        }
        s
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.vars
            .binary_search_by(|(k, _)| k.as_ref().cmp(name))
            .ok()
            .map(|i| &self.vars[i].1)
    }

    pub fn set(&mut self, name: &str, v: Value) {
        match self.vars.binary_search_by(|(k, _)| k.as_ref().cmp(name)) {
            Ok(i) => self.vars[i].1 = v,
            Err(i) => self.vars.insert(i, (Arc::from(name), v)),
        }
    }

    pub fn with(&self, name: &str, v: Value) -> State {
        let mut s = self.clone();
        s.set(name, v);
        s
    }

    pub fn remove(&mut self, name: &str) -> Option<Value> {
        self.vars
            .binary_search_by(|(k, _)| k.as_ref().cmp(name))
            .ok()
            .map(|i| self.vars.remove(i).1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Value)> {
        self.vars.iter().map(|(k, v)| (k.as_ref(), v))
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    /// Restriction to the given variables; missing ones are skipped.
    pub fn project(&self, names: &[&str]) -> State {
        State {
            vars: self
                .vars
                .iter()
                .filter(|(k, _)| names.contains(&k.as_ref()))
                .cloned()
                .collect(),
        }
    }

    /// Canonical text encoding, e.g. `{K=3,pos=[0,1,1]}`.
    pub fn encode(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (k, v)) in self.vars.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{k}={v}")?;
        }
        write!(f, "}}")
    }
}

/// Checks that an array is a bitvector.
pub fn bits_of(a: &[Rat]) -> Result<Vec<bool>> {
    a.iter()
        .map(|x| {
            if x.is_zero() {
                Ok(false)
            } else if x.is_one() {
                Ok(true)
            } else {
                Err(Error::eval(format!(
                    "bitvector entry {} is not 0 or 1",
                    fmt_rat(x)
                )))
            }
        })
        .collect()
}

impl serde::Serialize for Value {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl serde::Serialize for State {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}
