//! Syntactic loop classification.

use crate::lang::ast::*;
use crate::state::Ident;

/// A loop `while ctr < bound do ...` whose body adds 1 to `ctr` exactly once
/// on every path and never writes the variables of `bound`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundedLoop {
    pub counter: Ident,
    pub bound: Expr,
}

pub fn classify_loop(cond: &Expr, body: &Command) -> Option<BoundedLoop> {
    let ExprKind::Binary(BinOp::Lt, lhs, rhs) = &cond.kind else {
        return None;
    };
    let ExprKind::Var(ctr, None) = &lhs.kind else {
        return None;
    };
    let written = body.modified_vars();
    if rhs.free_vars().iter().any(|(x, _)| written.contains(x)) {
        return None;
    }
    if increments(body, ctr) != Some(1) {
        return None;
    }
    Some(BoundedLoop {
        counter: ctr.clone(),
        bound: (**rhs).clone(),
    })
}

fn is_increment(var: &Ident, expr: &Expr, ctr: &Ident) -> bool {
    if var != ctr {
        return false;
    }
    match &expr.kind {
        ExprKind::Binary(BinOp::Add, a, b) => {
            let one = |e: &Expr| matches!(&e.kind, ExprKind::Num(q) if *q == crate::num::int(1));
            let me = |e: &Expr| matches!(&e.kind, ExprKind::Var(x, None) if x == ctr);
            (me(a) && one(b)) || (one(a) && me(b))
        }
        _ => false,
    }
}

/// Number of `ctr := ctr + 1` steps along every path, if the same on all
/// paths and there is no other write to `ctr`.
fn increments(c: &Command, ctr: &Ident) -> Option<usize> {
    match c {
        Command::Skip => Some(0),
        Command::Assign { var, expr, .. } => {
            if is_increment(var, expr, ctr) {
                Some(1)
            } else if var == ctr {
                None
            } else {
                Some(0)
            }
        }
        Command::Sample { var, .. } => (var != ctr).then_some(0),
        Command::Seq(cs) => cs
            .iter()
            .try_fold(0, |acc, c| Some(acc + increments(c, ctr)?)),
        Command::If { then_, else_, .. } => {
            let a = increments(then_, ctr)?;
            let b = increments(else_, ctr)?;
            (a == b).then_some(a)
        }
        Command::While { body, .. } => (!body.modified_vars().contains(ctr)).then_some(0),
    }
}

/// True when every loop in `c` is a bounded counter loop.
pub fn all_loops_bounded(c: &Command) -> bool {
    c.loops().iter().all(|l| match l {
        Command::While { cond, body, .. } => classify_loop(cond, body).is_some(),
        _ => unreachable!(),
    })
}
