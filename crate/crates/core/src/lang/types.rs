//! Type checking and conservative definite-assignment analysis.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::lang::ast::*;
use crate::state::Ident;

/// Variable types of a program: inputs plus everything it assigns.
pub type Signature = BTreeMap<Ident, Type>;

/// Where an expression is used.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ctx {
    /// Inside a program: no tags, no `inf`, no parameters.
    Program,
    /// Relational expectation: program variables must carry a tag.
    Relational,
    /// Unary expectation over untagged program variables.
    Unary,
}

struct Scope<'a> {
    ctx: Ctx,
    vars: &'a dyn Fn(&Ident, Span) -> Result<Type>,
    bound: Vec<Ident>,
    allow_params: bool,
}

fn type_err<T>(span: Span, expected: impl ToString, found: impl ToString) -> Result<T> {
    Err(Error::Type {
        line: span.line,
        col: span.col,
        expected: expected.to_string(),
        found: found.to_string(),
    })
}

impl Scope<'_> {
    fn expect(&mut self, e: &Expr, want: Type) -> Result<()> {
        let t = self.ty(e)?;
        if t != want {
            return type_err(e.span, want, t);
        }
        Ok(())
    }

    fn ty(&mut self, e: &Expr) -> Result<Type> {
        match &e.kind {
            ExprKind::Num(_) => Ok(Type::Num),
            ExprKind::Bool(_) => Ok(Type::Bool),
            ExprKind::Inf => {
                if self.ctx == Ctx::Program {
                    return Err(Error::Syntax {
                        line: e.span.line,
                        col: e.span.col,
                        msg: "`inf` is only allowed in expectations".into(),
                    });
                }
                Ok(Type::Num)
            }
            ExprKind::Var(x, tag) => {
                if tag.is_none() && (self.bound.contains(x)) {
                    return Ok(Type::Num);
                }
                if x.starts_with('$') {
                    if !self.allow_params {
                        return Err(Error::Undeclared {
                            name: x.to_string(),
                            line: e.span.line,
                            col: e.span.col,
                        });
                    }
                    return Ok(Type::Num);
                }
                match (self.ctx, tag) {
                    (Ctx::Program | Ctx::Unary, Some(_)) => Err(Error::Syntax {
                        line: e.span.line,
                        col: e.span.col,
                        msg: format!("tagged variable `{x}` outside a relational expectation"),
                    }),
                    (Ctx::Relational, None) => Err(Error::Syntax {
                        line: e.span.line,
                        col: e.span.col,
                        msg: format!("variable `{x}` needs a tag <1> or <2>"),
                    }),
                    _ => (self.vars)(x, e.span),
                }
            }
            ExprKind::ArrayLit(items) => {
                // `[b]` with a boolean `b` is an indicator.
                if items.len() == 1 && self.ty(&items[0])? == Type::Bool {
                    return Ok(Type::Num);
                }
                for it in items {
                    self.expect(it, Type::Num)?;
                }
                Ok(Type::Array)
            }
            ExprKind::Index(a, i) => {
                self.expect(a, Type::Array)?;
                self.expect(i, Type::Num)?;
                Ok(Type::Num)
            }
            ExprKind::Unary(UnOp::Neg, a) => {
                self.expect(a, Type::Num)?;
                Ok(Type::Num)
            }
            ExprKind::Unary(UnOp::Not, a) => {
                self.expect(a, Type::Bool)?;
                Ok(Type::Bool)
            }
            ExprKind::Binary(op, a, b) => match op {
                BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Pow => {
                    self.expect(a, Type::Num)?;
                    self.expect(b, Type::Num)?;
                    Ok(Type::Num)
                }
                BinOp::Eq | BinOp::Ne => {
                    let ta = self.ty(a)?;
                    self.expect(b, ta)?;
                    Ok(Type::Bool)
                }
                BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                    self.expect(a, Type::Num)?;
                    self.expect(b, Type::Num)?;
                    Ok(Type::Bool)
                }
                BinOp::And | BinOp::Or => {
                    self.expect(a, Type::Bool)?;
                    self.expect(b, Type::Bool)?;
                    Ok(Type::Bool)
                }
            },
            ExprKind::Call(f, args) => {
                use Builtin::*;
                use Type::{Array as A, Bool as B, Num as N};
                let (params, ret): (&[Type], Type) = match f {
                    Max | Min | Monus => (&[N, N], N),
                    Abs => (&[N], N),
                    Len | WH => (&[A], N),
                    Update => (&[A, N, N], A),
                    ShiftR => (&[A, N], A),
                    Cat | Select => (&[A, A], A),
                    NegBits => (&[A], A),
                    InvPerm => (&[A, N], N),
                    IsPerm => (&[A], B),
                    DH | DM | DBD | DP | InfNorm => (&[A, A], N),
                };
                for (arg, want) in args.iter().zip(params) {
                    self.expect(arg, *want)?;
                }
                Ok(ret)
            }
            ExprKind::Iverson(a) => {
                self.expect(a, Type::Bool)?;
                Ok(Type::Num)
            }
            ExprKind::Bounded {
                var, lo, hi, body, ..
            } => {
                self.expect(lo, Type::Num)?;
                self.expect(hi, Type::Num)?;
                self.bound.push(var.clone());
                let r = self.expect(body, Type::Num);
                self.bound.pop();
                r?;
                Ok(Type::Num)
            }
        }
    }
}

struct ProgramChecker {
    sig: Signature,
}

impl ProgramChecker {
    fn expr_type(&self, e: &Expr, defined: &BTreeSet<Ident>) -> Result<Type> {
        let lookup = |x: &Ident, span: Span| -> Result<Type> {
            if !defined.contains(x) {
                return Err(Error::Undeclared {
                    name: x.to_string(),
                    line: span.line,
                    col: span.col,
                });
            }
            Ok(self.sig[x])
        };
        Scope {
            ctx: Ctx::Program,
            vars: &lookup,
            bound: Vec::new(),
            allow_params: false,
        }
        .ty(e)
    }

    fn bind(&mut self, var: &Ident, ty: Type, span: Span) -> Result<()> {
        match self.sig.get(var) {
            Some(t) if *t != ty => type_err(span, t, ty),
            _ => {
                self.sig.insert(var.clone(), ty);
                Ok(())
            }
        }
    }

    fn dist_type(&self, d: &DistExpr, defined: &BTreeSet<Ident>, span: Span) -> Result<Type> {
        let want = |e: &Expr, t: Type| -> Result<()> {
            let got = self.expr_type(e, defined)?;
            if got != t {
                return type_err(e.span, t, got);
            }
            Ok(())
        };
        match d {
            DistExpr::UniformRange { lo, hi } => {
                want(lo, Type::Num)?;
                want(hi, Type::Num)?;
                Ok(Type::Num)
            }
            DistExpr::Bernoulli(p) => {
                want(p, Type::Num)?;
                Ok(Type::Num)
            }
            DistExpr::UniformBits(n) => {
                want(n, Type::Num)?;
                Ok(Type::Array)
            }
            DistExpr::UniformSet(vs) => {
                let t = self.expr_type(&vs[0], defined)?;
                for v in &vs[1..] {
                    want(v, t)?;
                }
                Ok(t)
            }
            DistExpr::Table(rows) => {
                if rows.is_empty() {
                    return type_err(span, "a non-empty table", "an empty one");
                }
                let t = self.expr_type(&rows[0].0, defined)?;
                for (v, p) in rows {
                    want(v, t)?;
                    want(p, Type::Num)?;
                }
                Ok(t)
            }
        }
    }

    fn cmd(&mut self, c: &Command, defined: &mut BTreeSet<Ident>) -> Result<()> {
        match c {
            Command::Skip => Ok(()),
            Command::Assign { var, expr, span } => {
                let t = self.expr_type(expr, defined)?;
                self.bind(var, t, *span)?;
                defined.insert(var.clone());
                Ok(())
            }
            Command::Sample { var, dist, site } => {
                let t = self.dist_type(dist, defined, site.span)?;
                self.bind(var, t, site.span)?;
                defined.insert(var.clone());
                Ok(())
            }
            Command::Seq(cs) => {
                for c in cs {
                    self.cmd(c, defined)?;
                }
                Ok(())
            }
            Command::If { cond, then_, else_ } => {
                let t = self.expr_type(cond, defined)?;
                if t != Type::Bool {
                    return type_err(cond.span, Type::Bool, t);
                }
                let mut d1 = defined.clone();
                let mut d2 = defined.clone();
                self.cmd(then_, &mut d1)?;
                self.cmd(else_, &mut d2)?;
                *defined = d1.intersection(&d2).cloned().collect();
                Ok(())
            }
            Command::While { cond, body, .. } => {
                let t = self.expr_type(cond, defined)?;
                if t != Type::Bool {
                    return type_err(cond.span, Type::Bool, t);
                }
                let mut d = defined.clone();
                self.cmd(body, &mut d)?;
                Ok(())
            }
        }
    }
}

/// Checks guards, expression types and definite assignment; returns the
/// program signature.
pub fn check_program(p: &Program) -> Result<Signature> {
    let mut ch = ProgramChecker {
        sig: Signature::new(),
    };
    let mut defined = BTreeSet::new();
    for d in &p.inputs {
        if ch.sig.insert(d.name.clone(), d.ty).is_some() {
            return Err(Error::Syntax {
                line: d.span.line,
                col: d.span.col,
                msg: format!("input `{}` declared twice", d.name),
            });
        }
        defined.insert(d.name.clone());
    }
    ch.cmd(&p.body, &mut defined)?;
    Ok(ch.sig)
}

/// Checks an expectation against a program signature. The result must be
/// numeric. `$`-parameters are accepted only when `allow_params` is set.
pub fn check_expectation(e: &Expr, sig: &Signature, ctx: Ctx, allow_params: bool) -> Result<()> {
    let lookup = |x: &Ident, span: Span| -> Result<Type> {
        sig.get(x).copied().ok_or_else(|| Error::Undeclared {
            name: x.to_string(),
            line: span.line,
            col: span.col,
        })
    };
    let mut sc = Scope {
        ctx,
        vars: &lookup,
        bound: Vec::new(),
        allow_params,
    };
    sc.expect(e, Type::Num)
}

/// Checks a boolean formula (coupling guards and the like).
pub fn check_formula(e: &Expr, sig: &Signature, ctx: Ctx) -> Result<()> {
    let lookup = |x: &Ident, span: Span| -> Result<Type> {
        sig.get(x).copied().ok_or_else(|| Error::Undeclared {
            name: x.to_string(),
            line: span.line,
            col: span.col,
        })
    };
    let mut sc = Scope {
        ctx,
        vars: &lookup,
        bound: Vec::new(),
        allow_params: false,
    };
    sc.expect(e, Type::Bool)
}

/// Type of an expression under a signature with no tagging discipline.
pub fn infer(e: &Expr, sig: &Signature, ctx: Ctx) -> Result<Type> {
    let lookup = |x: &Ident, span: Span| -> Result<Type> {
        sig.get(x).copied().ok_or_else(|| Error::Undeclared {
            name: x.to_string(),
            line: span.line,
            col: span.col,
        })
    };
    Scope {
        ctx,
        vars: &lookup,
        bound: Vec::new(),
        allow_params: true,
    }
    .ty(e)
}
