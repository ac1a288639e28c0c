//! Concrete syntax, parser, type checker and evaluator for pWhile programs
//! and expectation expressions.

pub mod analysis;
pub mod ast;
pub mod eval;
pub mod parser;
pub mod perm;
pub mod printer;
pub mod types;

pub use ast::*;
pub use eval::{eval, eval_bool, eval_exp, eval_relexp, eval_with, Env, Pair};
pub use parser::{parse_expr, parse_state, parse_state_pair};
pub use printer::{command_to_string, expr_to_string, program_to_string};
pub use types::{Ctx, Signature};

use crate::error::Result;

/// Parses and type-checks a program.
pub fn parse_program(src: &str) -> Result<Program> {
    let p = parser::parse_program_untyped(src)?;
    types::check_program(&p)?;
    Ok(p)
}

pub fn signature(p: &Program) -> Result<Signature> {
    types::check_program(p)
}

/// Parses a relational expectation; tagged names must exist in `sig`.
pub fn parse_relexp(src: &str, sig: &Signature) -> Result<Expr> {
    let e = parse_expr(src)?;
    types::check_expectation(&e, sig, Ctx::Relational, false)?;
    Ok(e)
}

/// Parses a unary expectation over untagged program variables.
pub fn parse_unary(src: &str, sig: &Signature) -> Result<Expr> {
    let e = parse_expr(src)?;
    types::check_expectation(&e, sig, Ctx::Unary, false)?;
    Ok(e)
}

/// Parses an expectation family that may mention parameters like `$n`.
pub fn parse_family(src: &str, sig: &Signature, ctx: Ctx) -> Result<Expr> {
    let e = parse_expr(src)?;
    types::check_expectation(&e, sig, ctx, true)?;
    Ok(e)
}

/// Strips `//` comments and surrounding whitespace from an expectation file.
pub fn read_expectation_text(src: &str) -> String {
    src.lines()
        .map(|l| l.split("//").next().unwrap_or(""))
        .collect::<Vec<_>>()
        .join(" ")
        .trim()
        .to_string()
}
