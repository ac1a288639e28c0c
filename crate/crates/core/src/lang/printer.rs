//! Pretty-printer producing concrete syntax that reparses to the same AST.

use std::fmt::Write;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};

use crate::lang::ast::*;
use crate::num::{fmt_rat, Rat};

const P_OR: u8 = 1;
const P_AND: u8 = 2;
const P_NOT: u8 = 3;
const P_CMP: u8 = 4;
const P_ADD: u8 = 5;
const P_MUL: u8 = 6;
const P_NEG: u8 = 7;
const P_POW: u8 = 8;
const P_POST: u8 = 9;

pub fn expr_to_string(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e, 0);
    s
}

/// Decimal text when the rational has a terminating expansion.
fn literal(q: &Rat) -> String {
    if q.is_integer() {
        return q.numer().to_string();
    }
    let mut d = q.denom().clone();
    let mut digits = 0usize;
    let (two, five) = (BigInt::from(2), BigInt::from(5));
    while (&d % &two).is_zero() || (&d % &five).is_zero() {
        if (&d % &two).is_zero() {
            d /= &two;
        } else {
            d /= &five;
        }
        digits += 1;
    }
    if d != BigInt::from(1) {
        return format!("({})", fmt_rat(q));
    }
    let scale = num_traits::pow(BigInt::from(10), digits);
    let n = (q * Rat::from_integer(scale.clone())).to_integer();
    let (ip, fp) = (n.abs() / &scale, n.abs() % &scale);
    let sign = if q.is_negative() { "-" } else { "" };
    format!("{sign}{ip}.{:0>width$}", fp.to_string(), width = digits)
}

fn prec(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Binary(op, ..) => match op {
            BinOp::Or => P_OR,
            BinOp::And => P_AND,
            BinOp::Add | BinOp::Sub => P_ADD,
            BinOp::Mul | BinOp::Div => P_MUL,
            BinOp::Pow => P_POW,
            _ => P_CMP,
        },
        ExprKind::Unary(UnOp::Not, _) => P_NOT,
        ExprKind::Unary(UnOp::Neg, _) => P_NEG,
        ExprKind::Num(q) if q.is_negative() => P_NEG,
        ExprKind::Index(..) => P_POST,
        _ => u8::MAX,
    }
}

fn write_list(out: &mut String, es: &[Expr]) {
    for (i, e) in es.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_expr(out, e, 0);
    }
}

fn write_expr(out: &mut String, e: &Expr, ctx: u8) {
    let p = prec(e);
    let paren = p < ctx;
    if paren {
        out.push('(');
    }
    match &e.kind {
        ExprKind::Num(q) => out.push_str(&literal(q)),
        ExprKind::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        ExprKind::Inf => out.push_str("inf"),
        ExprKind::Var(x, None) => out.push_str(x),
        ExprKind::Var(x, Some(s)) => {
            let _ = write!(out, "{x}<{}>", s.tag());
        }
        ExprKind::ArrayLit(items) => {
            out.push('[');
            write_list(out, items);
            out.push(']');
        }
        ExprKind::Index(a, i) => {
            write_expr(out, a, P_POST);
            out.push('[');
            write_expr(out, i, 0);
            out.push(']');
        }
        ExprKind::Unary(UnOp::Neg, a) => {
            out.push('-');
            write_expr(out, a, P_NEG);
        }
        ExprKind::Unary(UnOp::Not, a) => {
            out.push('!');
            write_expr(out, a, P_NOT);
        }
        ExprKind::Binary(op, a, b) => {
            let (l, r) = match op {
                BinOp::Pow => (P_POST, P_NEG),
                BinOp::Or | BinOp::And | BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div => {
                    (p, p + 1)
                }
                _ => (P_ADD, P_ADD),
            };
            write_expr(out, a, l);
            let _ = write!(out, " {} ", op.symbol());
            write_expr(out, b, r);
        }
        ExprKind::Call(f, args) => {
            out.push_str(f.name());
            out.push('(');
            write_list(out, args);
            out.push(')');
        }
        ExprKind::Iverson(a) => {
            out.push('[');
            write_expr(out, a, 0);
            out.push(']');
        }
        ExprKind::Bounded {
            op,
            var,
            lo,
            hi,
            body,
        } => {
            out.push_str(match op {
                BoundOp::Sum => "sum(",
                BoundOp::Max => "max(",
            });
            let _ = write!(out, "{var} in ");
            write_expr(out, lo, 0);
            out.push_str(" .. ");
            write_expr(out, hi, 0);
            out.push_str(", ");
            write_expr(out, body, 0);
            out.push(')');
        }
    }
    if paren {
        out.push(')');
    }
}

pub fn dist_to_string(d: &DistExpr) -> String {
    let mut s = String::new();
    match d {
        DistExpr::UniformRange { lo, hi } => {
            s.push_str("uniform(");
            write_expr(&mut s, lo, 0);
            s.push_str(" .. ");
            write_expr(&mut s, hi, 0);
            s.push(')');
        }
        DistExpr::UniformSet(vs) => {
            s.push_str("uniform{");
            write_list(&mut s, vs);
            s.push('}');
        }
        DistExpr::Bernoulli(p) => {
            s.push_str("bernoulli(");
            write_expr(&mut s, p, 0);
            s.push(')');
        }
        DistExpr::UniformBits(n) => {
            s.push_str("bits(");
            write_expr(&mut s, n, 0);
            s.push(')');
        }
        DistExpr::Table(rows) => {
            s.push_str("table{");
            for (i, (v, p)) in rows.iter().enumerate() {
                if i > 0 {
                    s.push_str(", ");
                }
                write_expr(&mut s, v, 0);
                s.push_str(": ");
                write_expr(&mut s, p, 0);
            }
            s.push('}');
        }
    }
    s
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn write_cmd(out: &mut String, c: &Command, depth: usize) {
    match c {
        Command::Skip => {
            indent(out, depth);
            out.push_str("skip");
        }
        Command::Assign { var, expr, .. } => {
            indent(out, depth);
            if let ExprKind::Call(Builtin::Update, args) = &expr.kind {
                if matches!(&args[0].kind, ExprKind::Var(x, None) if x == var) {
                    let _ = write!(
                        out,
                        "{var}[{}] := {}",
                        expr_to_string(&args[1]),
                        expr_to_string(&args[2])
                    );
                    return;
                }
            }
            let _ = write!(out, "{var} := {}", expr_to_string(expr));
        }
        Command::Sample { var, dist, .. } => {
            indent(out, depth);
            let _ = write!(out, "{var} :~ {}", dist_to_string(dist));
        }
        Command::Seq(cs) => {
            if cs.is_empty() {
                indent(out, depth);
                out.push_str("skip");
            }
            for (i, c) in cs.iter().enumerate() {
                if i > 0 {
                    out.push_str(";\n");
                }
                write_cmd(out, c, depth);
            }
        }
        Command::If { cond, then_, else_ } => {
            indent(out, depth);
            let _ = writeln!(out, "if {} then", expr_to_string(cond));
            write_cmd(out, then_, depth + 1);
            out.push('\n');
            if **else_ != Command::Skip {
                indent(out, depth);
                out.push_str("else\n");
                write_cmd(out, else_, depth + 1);
                out.push('\n');
            }
            indent(out, depth);
            out.push_str("end");
        }
        Command::While { cond, body, .. } => {
            indent(out, depth);
            let _ = writeln!(out, "while {} do", expr_to_string(cond));
            write_cmd(out, body, depth + 1);
            out.push('\n');
            indent(out, depth);
            out.push_str("end");
        }
    }
}

pub fn command_to_string(c: &Command) -> String {
    let mut s = String::new();
    write_cmd(&mut s, c, 0);
    s
}

pub fn program_to_string(p: &Program) -> String {
    let mut s = String::new();
    if !p.inputs.is_empty() {
        s.push_str("input ");
        for (i, d) in p.inputs.iter().enumerate() {
            if i > 0 {
                s.push_str(", ");
            }
            let _ = write!(s, "{}: {}", d.name, d.ty);
            if let Some(n) = d.len {
                let _ = write!(s, "[{n}]");
            }
        }
        s.push_str(";\n");
    }
    write_cmd(&mut s, &p.body, 0);
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::rat;

    #[test]
    fn decimal_literals() {
        assert_eq!(literal(&rat(1, 8)), "0.125");
        assert_eq!(literal(&rat(5, 2)), "2.5");
        assert_eq!(literal(&rat(1, 3)), "(1/3)");
    }
}
