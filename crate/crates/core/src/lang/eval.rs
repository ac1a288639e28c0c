//! Expression evaluation over one state or a pair of states.

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::lang::ast::*;
use crate::lang::perm;
use crate::num::{Ext, Rat};
use crate::state::{bits_of, State, Value};

/// Variable environment for evaluation.
pub trait Env {
    fn lookup(&self, name: &str, tag: Option<Side>) -> Option<&Value>;
}

impl Env for State {
    fn lookup(&self, name: &str, tag: Option<Side>) -> Option<&Value> {
        match tag {
            None => self.get(name),
            Some(_) => None,
        }
    }
}

/// A pair of states addressed through `x<1>` and `x<2>`.
#[derive(Clone, Copy)]
pub struct Pair<'a>(pub &'a State, pub &'a State);

impl Env for Pair<'_> {
    fn lookup(&self, name: &str, tag: Option<Side>) -> Option<&Value> {
        match tag {
            Some(Side::Left) => self.0.get(name),
            Some(Side::Right) => self.1.get(name),
            None => None,
        }
    }
}

pub fn eval<E: Env + ?Sized>(e: &Expr, env: &E) -> Result<Value> {
    Ev {
        env,
        locals: Vec::new(),
    }
    .eval(e)
}

/// Evaluation with extra bindings such as `$n`.
pub fn eval_with<E: Env + ?Sized>(e: &Expr, env: &E, binds: &[(&str, Value)]) -> Result<Value> {
    let locals = binds
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect();
    Ev { env, locals }.eval(e)
}

/// Evaluates an expectation to a non-negative extended rational.
pub fn eval_exp<E: Env + ?Sized>(e: &Expr, env: &E, binds: &[(&str, Value)]) -> Result<Ext> {
    let v = eval_with(e, env, binds)?;
    let x = v.as_num()?.clone();
    if x.is_negative() {
        return Err(Error::eval(format!(
            "expectation evaluated to the negative value {x}"
        )));
    }
    Ok(x)
}

/// `E(s1, s2)` for a relational expectation.
pub fn eval_relexp(e: &Expr, s1: &State, s2: &State) -> Result<Ext> {
    eval_exp(e, &Pair(s1, s2), &[])
}

pub fn eval_bool<E: Env + ?Sized>(e: &Expr, env: &E) -> Result<bool> {
    eval(e, env)?.as_bool()
}

struct Ev<'a, E: Env + ?Sized> {
    env: &'a E,
    locals: Vec<(String, Value)>,
}

fn num(v: Value) -> Result<Ext> {
    match v {
        Value::Num(x) => Ok(x),
        other => Err(Error::eval(format!(
            "expected a number, found {}",
            other.kind()
        ))),
    }
}

fn array(v: Value) -> Result<Vec<Rat>> {
    match v {
        Value::Array(a) => Ok(a),
        other => Err(Error::eval(format!(
            "expected an array, found {}",
            other.kind()
        ))),
    }
}

fn finite(x: Ext) -> Result<Rat> {
    x.into_finite()
        .ok_or_else(|| Error::eval("arrays cannot hold inf"))
}

pub fn index_of(i: &Value, len: usize) -> Result<usize> {
    let k = i.as_index().map_err(|_| Error::OutOfBounds {
        index: i.to_string(),
        len,
    })?;
    if k < 0 || k as usize >= len {
        return Err(Error::OutOfBounds {
            index: k.to_string(),
            len,
        });
    }
    Ok(k as usize)
}

impl<E: Env + ?Sized> Ev<'_, E> {
    fn eval(&mut self, e: &Expr) -> Result<Value> {
        match &e.kind {
            ExprKind::Num(q) => Ok(Value::rat(q.clone())),
            ExprKind::Bool(b) => Ok(Value::Bool(*b)),
            ExprKind::Inf => Ok(Value::Num(Ext::Inf)),
            ExprKind::Var(x, tag) => {
                if tag.is_none() {
                    if let Some((_, v)) = self.locals.iter().rev().find(|(k, _)| k == x.as_ref()) {
                        return Ok(v.clone());
                    }
                }
                self.env.lookup(x, *tag).cloned().ok_or_else(|| {
                    let shown = match tag {
                        Some(s) => format!("{x}<{}>", s.tag()),
                        None => x.to_string(),
                    };
                    Error::eval(format!("variable `{shown}` is not defined in the state"))
                })
            }
            ExprKind::ArrayLit(items) => {
                if items.len() == 1 {
                    if let Value::Bool(b) = self.eval(&items[0])? {
                        return Ok(Value::int(b as i64));
                    }
                }
                let mut out = Vec::with_capacity(items.len());
                for it in items {
                    out.push(finite(num(self.eval(it)?)?)?);
                }
                Ok(Value::Array(out))
            }
            ExprKind::Index(a, i) => {
                let a = array(self.eval(a)?)?;
                let i = self.eval(i)?;
                let k = index_of(&i, a.len())?;
                Ok(Value::rat(a[k].clone()))
            }
            ExprKind::Unary(UnOp::Neg, a) => Ok(Value::Num(num(self.eval(a)?)?.neg()?)),
            ExprKind::Unary(UnOp::Not, a) => Ok(Value::Bool(!self.eval(a)?.as_bool()?)),
            ExprKind::Binary(op, a, b) => self.binary(*op, a, b),
            ExprKind::Call(f, args) => self.call(*f, args),
            ExprKind::Iverson(a) => Ok(Value::int(self.eval(a)?.as_bool()? as i64)),
            ExprKind::Bounded {
                op,
                var,
                lo,
                hi,
                body,
            } => {
                let lo = self.eval(lo)?.as_index()?;
                let hi = self.eval(hi)?.as_index()?;
                let mut acc = Ext::zero();
                for i in lo..hi.max(lo) {
                    self.locals.push((var.to_string(), Value::int(i)));
                    let r = self.eval(body).and_then(num);
                    self.locals.pop();
                    let x = r?;
                    acc = match op {
                        BoundOp::Sum => acc.add(&x),
                        BoundOp::Max => acc.max(x),
                    };
                }
                Ok(Value::Num(acc))
            }
        }
    }

    fn binary(&mut self, op: BinOp, a: &Expr, b: &Expr) -> Result<Value> {
        match op {
            BinOp::And => {
                if !self.eval(a)?.as_bool()? {
                    return Ok(Value::Bool(false));
                }
                Ok(Value::Bool(self.eval(b)?.as_bool()?))
            }
            BinOp::Or => {
                if self.eval(a)?.as_bool()? {
                    return Ok(Value::Bool(true));
                }
                Ok(Value::Bool(self.eval(b)?.as_bool()?))
            }
            BinOp::Eq => Ok(Value::Bool(self.eval(a)? == self.eval(b)?)),
            BinOp::Ne => Ok(Value::Bool(self.eval(a)? != self.eval(b)?)),
            _ => {
                let x = num(self.eval(a)?)?;
                let y = num(self.eval(b)?)?;
                Ok(match op {
                    BinOp::Add => Value::Num(x.add(&y)),
                    BinOp::Sub => Value::Num(x.sub(&y)?),
                    BinOp::Mul => Value::Num(x.mul(&y)?),
                    BinOp::Div => Value::Num(x.div(&y)?),
                    BinOp::Pow => Value::Num(x.pow(&y)?),
                    BinOp::Lt => Value::Bool(x < y),
                    BinOp::Le => Value::Bool(x <= y),
                    BinOp::Gt => Value::Bool(x > y),
                    BinOp::Ge => Value::Bool(x >= y),
                    _ => unreachable!(),
                })
            }
        }
    }

    fn call(&mut self, f: Builtin, args: &[Expr]) -> Result<Value> {
        let mut vs = Vec::with_capacity(args.len());
        for a in args {
            vs.push(self.eval(a)?);
        }
        let mut it = vs.into_iter();
        let mut next = || it.next().expect("arity checked by the parser");
        Ok(match f {
            Builtin::Max => Value::Num(num(next())?.max(num(next())?)),
            Builtin::Min => Value::Num(num(next())?.min(num(next())?)),
            Builtin::Abs => Value::Num(num(next())?.abs()),
            Builtin::Monus => {
                let a = num(next())?;
                Value::Num(a.monus(&num(next())?)?)
            }
            Builtin::Len => Value::int(array(next())?.len() as i64),
            Builtin::Update => {
                let mut a = array(next())?;
                let i = index_of(&next(), a.len())?;
                a[i] = finite(num(next())?)?;
                Value::Array(a)
            }
            Builtin::ShiftR => {
                let a = array(next())?;
                let j = index_of(&next(), a.len())?;
                Value::Array(shift_r(&a, j))
            }
            Builtin::Cat => {
                let mut a = array(next())?;
                a.extend(array(next())?);
                Value::Array(a)
            }
            Builtin::Select => {
                let a = array(next())?;
                let b = array(next())?;
                Value::Array(select(&a, &b)?)
            }
            Builtin::NegBits => Value::Array(neg_bits(&array(next())?)?),
            Builtin::InvPerm => {
                let a = array(next())?;
                let v = finite(num(next())?)?;
                let i = a
                    .iter()
                    .position(|x| *x == v)
                    .ok_or_else(|| Error::eval("invPerm: value not found in array"))?;
                Value::int(i as i64)
            }
            Builtin::IsPerm => Value::Bool(perm::is_perm(&array(next())?)),
            Builtin::DH => {
                let (a, b) = same_len(next(), next())?;
                Value::rat(hamming(&a, &b))
            }
            Builtin::DM => {
                let (a, b) = same_len(next(), next())?;
                Value::rat(prefix_distance(&a, &b))
            }
            Builtin::DBD => {
                let (a, b) = same_len(next(), next())?;
                Value::rat(block_distance(&a, &b)?)
            }
            Builtin::DP => {
                let (a, b) = same_len(next(), next())?;
                Value::rat(position_distance(&a, &b)?)
            }
            Builtin::InfNorm => {
                let (a, b) = same_len(next(), next())?;
                let m = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).max();
                Value::rat(m.unwrap_or_else(Rat::zero))
            }
            Builtin::WH => {
                let a = array(next())?;
                if a.is_empty() {
                    Value::int(0)
                } else {
                    let s: Rat = a.iter().sum();
                    Value::rat(s / Rat::from_integer(a.len().into()))
                }
            }
        })
    }
}

fn same_len(a: Value, b: Value) -> Result<(Vec<Rat>, Vec<Rat>)> {
    let a = array(a)?;
    let b = array(b)?;
    if a.len() != b.len() {
        return Err(Error::eval(format!(
            "distance between arrays of lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok((a, b))
}

fn over_n(count: usize, n: usize) -> Rat {
    if n == 0 {
        return Rat::zero();
    }
    Rat::new(count.into(), n.into())
}

/// Block `a[0..=j]` cycled right by one: `a[j]` moves to the top.
pub fn shift_r(a: &[Rat], j: usize) -> Vec<Rat> {
    let mut out = a.to_vec();
    out[..=j].rotate_right(1);
    out
}

/// Entries of `a` at the positions where `bits` is 1, in order.
pub fn select(a: &[Rat], bits: &[Rat]) -> Result<Vec<Rat>> {
    if a.len() != bits.len() {
        return Err(Error::eval("select: array and bitvector lengths differ"));
    }
    let bits = bits_of(bits)?;
    Ok(a.iter()
        .zip(bits)
        .filter(|(_, b)| *b)
        .map(|(x, _)| x.clone())
        .collect())
}

pub fn neg_bits(b: &[Rat]) -> Result<Vec<Rat>> {
    Ok(bits_of(b)?
        .into_iter()
        .map(|x| if x { Rat::zero() } else { Rat::one() })
        .collect())
}

/// Normalized Hamming distance.
pub fn hamming(a: &[Rat], b: &[Rat]) -> Rat {
    over_n(a.iter().zip(b).filter(|(x, y)| x != y).count(), a.len())
}

/// `(N - l) / N` with `l` the length of the longest common prefix.
pub fn prefix_distance(a: &[Rat], b: &[Rat]) -> Rat {
    let l = a.iter().zip(b).take_while(|(x, y)| x == y).count();
    over_n(a.len() - l, a.len())
}

/// `(1/N^2) * sum_c (|BD(c)| - 1)` over the minimal block decomposition.
pub fn block_distance(a: &[Rat], b: &[Rat]) -> Result<Rat> {
    let (p, q) = (perm::as_perm(a)?, perm::as_perm(b)?);
    let n = p.len();
    let total: usize = perm::block_distances(&p, &q).iter().sum();
    Ok(over_n(total, n * n))
}

/// `(1/N^2) * sum_c |a^-1(c) - b^-1(c)|`.
pub fn position_distance(a: &[Rat], b: &[Rat]) -> Result<Rat> {
    let (p, q) = (perm::as_perm(a)?, perm::as_perm(b)?);
    let (ip, iq) = (perm::inverse(&p), perm::inverse(&q));
    let n = p.len();
    let total: usize = ip.iter().zip(&iq).map(|(x, y)| x.abs_diff(*y)).sum();
    Ok(over_n(total, n * n))
}
