//! Lexer and recursive-descent parser for programs, expectations and state
//! literals. The grammar is documented in `docs/grammar.md`.

use crate::error::{Error, Result};
use crate::lang::ast::*;
use crate::num::{parse_rat, Ext, Rat};
use crate::state::{Ident, State, Value};

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Ident(String),
    Tagged(String, Side),
    Param(String),
    Num(Rat),
    Kw(&'static str),
    Sym(&'static str),
    Eof,
}

const KEYWORDS: &[&str] = &[
    "skip",
    "if",
    "then",
    "else",
    "end",
    "while",
    "do",
    "true",
    "false",
    "inf",
    "input",
    "in",
    "int",
    "num",
    "bool",
    "array",
    "uniform",
    "bernoulli",
    "bits",
    "table",
    "sum",
];

// Longest symbols first.
const SYMBOLS: &[&str] = &[
    ":=", ":~", "..", "==", "!=", "<=", ">=", "&&", "||", ";", ",", "(", ")", "[", "]", "{", "}",
    "+", "-", "*", "/", "^", "<", ">", "!", "=", ":", "|",
];

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

pub fn lex(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let bump = |i: &mut usize, line: &mut usize, col: &mut usize, c: char| {
        *i += 1;
        if c == '\n' {
            *line += 1;
            *col = 1;
        } else {
            *col += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            bump(&mut i, &mut line, &mut col, c);
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                {
                    let ch = chars[i];
                    bump(&mut i, &mut line, &mut col, ch);
                }
            }
            continue;
        }
        let span = Span { line, col };
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                {
                    let ch = chars[i];
                    bump(&mut i, &mut line, &mut col, ch);
                }
            }
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                bump(&mut i, &mut line, &mut col, '.');
                while i < chars.len() && chars[i].is_ascii_digit() {
                    {
                        let ch = chars[i];
                        bump(&mut i, &mut line, &mut col, ch);
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let q = parse_rat(&text).ok_or_else(|| Error::Syntax {
                line: span.line,
                col: span.col,
                msg: format!("bad number `{text}`"),
            })?;
            out.push(Token {
                tok: Tok::Num(q),
                span,
            });
            continue;
        }
        if c.is_alphabetic() || c == '_' || c == '$' {
            let start = i;
            bump(&mut i, &mut line, &mut col, c);
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                {
                    let ch = chars[i];
                    bump(&mut i, &mut line, &mut col, ch);
                }
            }
            let text: String = chars[start..i].iter().collect();
            if c == '$' {
                if text.len() == 1 {
                    return Err(Error::Syntax {
                        line: span.line,
                        col: span.col,
                        msg: "`$` must be followed by a parameter name".into(),
                    });
                }
                out.push(Token {
                    tok: Tok::Param(text),
                    span,
                });
                continue;
            }
            // Tag suffix `<1>` or `<2>` directly after an identifier.
            if i + 2 < chars.len()
                && chars[i] == '<'
                && (chars[i + 1] == '1' || chars[i + 1] == '2')
                && chars[i + 2] == '>'
            {
                let side = if chars[i + 1] == '1' {
                    Side::Left
                } else {
                    Side::Right
                };
                for _ in 0..3 {
                    bump(&mut i, &mut line, &mut col, ' ');
                }
                out.push(Token {
                    tok: Tok::Tagged(text, side),
                    span,
                });
                continue;
            }
            let tok = match KEYWORDS.iter().find(|k| **k == text) {
                Some(k) => Tok::Kw(k),
                None => Tok::Ident(text),
            };
            out.push(Token { tok, span });
            continue;
        }
        let rest: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(s) => {
                for _ in 0..s.len() {
                    bump(&mut i, &mut line, &mut col, ' ');
                }
                out.push(Token {
                    tok: Tok::Sym(s),
                    span,
                });
            }
            None => {
                return Err(Error::Syntax {
                    line,
                    col,
                    msg: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        span: Span { line, col },
    });
    Ok(out)
}

pub struct Parser {
    toks: Vec<Token>,
    pos: usize,
    next_site: usize,
}

impl Parser {
    pub fn new(src: &str) -> Result<Parser> {
        Ok(Parser {
            toks: lex(src)?,
            pos: 0,
            next_site: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn advance(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        let sp = self.span();
        let found = match self.peek() {
            Tok::Eof => "end of input".to_string(),
            t => describe(t),
        };
        Err(Error::Syntax {
            line: sp.line,
            col: sp.col,
            msg: format!("{}, found {}", msg.into(), found),
        })
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Kw(x) if *x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, s: &str) -> bool {
        if self.is_kw(s) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.err(format!("expected `{s}`"))
        }
    }

    fn expect_kw(&mut self, s: &str) -> Result<()> {
        if self.eat_kw(s) {
            Ok(())
        } else {
            self.err(format!("expected `{s}`"))
        }
    }

    fn expect_ident(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Ident(x) => {
                self.advance();
                Ok(x)
            }
            _ => self.err("expected an identifier"),
        }
    }

    pub fn expect_eof(&self) -> Result<()> {
        if matches!(self.peek(), Tok::Eof) {
            Ok(())
        } else {
            self.err("expected end of input")
        }
    }

    pub fn program(&mut self) -> Result<Program> {
        let mut inputs = Vec::new();
        if self.eat_kw("input") {
            loop {
                inputs.push(self.decl()?);
                if !self.eat_sym(",") {
                    break;
                }
            }
            self.expect_sym(";")?;
        }
        let body = self.seq()?;
        self.expect_eof()?;
        Ok(Program { inputs, body })
    }

    fn decl(&mut self) -> Result<Decl> {
        let span = self.span();
        let name = self.expect_ident()?;
        self.expect_sym(":")?;
        let ty = if self.eat_kw("int") || self.eat_kw("num") {
            Type::Num
        } else if self.eat_kw("bool") {
            Type::Bool
        } else if self.eat_kw("array") {
            Type::Array
        } else {
            return self.err("expected a type (int, bool or array)");
        };
        let mut len = None;
        if ty == Type::Array && self.eat_sym("[") {
            match self.advance() {
                Tok::Num(q) if q.is_integer() => {
                    len = Some(q.to_integer().try_into().map_err(|_| Error::Syntax {
                        line: span.line,
                        col: span.col,
                        msg: "array length too large".into(),
                    })?)
                }
                _ => return self.err("expected an array length"),
            }
            self.expect_sym("]")?;
        }
        Ok(Decl {
            name: Ident::from(name.as_str()),
            ty,
            len,
            span,
        })
    }

    fn at_seq_end(&self) -> bool {
        matches!(self.peek(), Tok::Eof) || self.is_kw("end") || self.is_kw("else")
    }

    fn seq(&mut self) -> Result<Command> {
        let mut cs = vec![self.command()?];
        while self.eat_sym(";") {
            if self.at_seq_end() {
                break;
            }
            cs.push(self.command()?);
        }
        Ok(Command::seq(cs))
    }

    fn command(&mut self) -> Result<Command> {
        let span = self.span();
        if self.eat_kw("skip") {
            return Ok(Command::Skip);
        }
        if self.eat_kw("if") {
            let cond = self.expr()?;
            self.expect_kw("then")?;
            let then_ = self.seq()?;
            let else_ = if self.eat_kw("else") {
                self.seq()?
            } else {
                Command::Skip
            };
            self.expect_kw("end")?;
            return Ok(Command::If {
                cond,
                then_: Box::new(then_),
                else_: Box::new(else_),
            });
        }
        if self.eat_kw("while") {
            let cond = self.expr()?;
            self.expect_kw("do")?;
            let body = self.seq()?;
            self.expect_kw("end")?;
            return Ok(Command::While {
                cond,
                body: Box::new(body),
                span,
            });
        }
        let name = match self.peek().clone() {
            Tok::Ident(x) => {
                self.advance();
                x
            }
            _ => return self.err("expected a command"),
        };
        let var = Ident::from(name.as_str());
        if self.eat_sym("[") {
            let idx = self.expr()?;
            self.expect_sym("]")?;
            self.expect_sym(":=")?;
            let val = self.expr()?;
            let arr = Expr::new(ExprKind::Var(var.clone(), None), span);
            let expr = Expr::new(ExprKind::Call(Builtin::Update, vec![arr, idx, val]), span);
            return Ok(Command::Assign { var, expr, span });
        }
        if self.eat_sym(":=") {
            let expr = self.expr()?;
            return Ok(Command::Assign { var, expr, span });
        }
        if self.eat_sym(":~") {
            let dist = self.dist()?;
            let site = Site {
                index: self.next_site,
                span,
            };
            self.next_site += 1;
            return Ok(Command::Sample { var, dist, site });
        }
        self.err("expected `:=` or `:~`")
    }

    fn dist(&mut self) -> Result<DistExpr> {
        if self.eat_kw("uniform") {
            if self.eat_sym("(") {
                let lo = self.expr()?;
                self.expect_sym("..")?;
                let hi = self.expr()?;
                self.expect_sym(")")?;
                return Ok(DistExpr::UniformRange { lo, hi });
            }
            self.expect_sym("{")?;
            let mut vs = vec![self.expr()?];
            while self.eat_sym(",") {
                vs.push(self.expr()?);
            }
            self.expect_sym("}")?;
            return Ok(DistExpr::UniformSet(vs));
        }
        if self.eat_kw("bernoulli") {
            self.expect_sym("(")?;
            let p = self.expr()?;
            self.expect_sym(")")?;
            return Ok(DistExpr::Bernoulli(p));
        }
        if self.eat_kw("bits") {
            self.expect_sym("(")?;
            let n = self.expr()?;
            self.expect_sym(")")?;
            return Ok(DistExpr::UniformBits(n));
        }
        if self.eat_kw("table") {
            self.expect_sym("{")?;
            let mut rows = Vec::new();
            loop {
                let v = self.expr()?;
                self.expect_sym(":")?;
                let p = self.expr()?;
                rows.push((v, p));
                if !self.eat_sym(",") {
                    break;
                }
            }
            self.expect_sym("}")?;
            return Ok(DistExpr::Table(rows));
        }
        self.err("expected a distribution (uniform, bernoulli, bits or table)")
    }

    pub fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.and_expr()?;
        while self.is_sym("||") {
            let span = self.span();
            self.advance();
            let rhs = self.and_expr()?;
            lhs = Expr::new(
                ExprKind::Binary(BinOp::Or, Box::new(lhs), Box::new(rhs)),
                span,
            );
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr> {
        let mut lhs = self.not_expr()?;
        while self.is_sym("&&") {
            let span = self.span();
            self.advance();
            let rhs = self.not_expr()?;
            lhs = Expr::new(
                ExprKind::Binary(BinOp::And, Box::new(lhs), Box::new(rhs)),
                span,
            );
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> Result<Expr> {
        let span = self.span();
        if self.eat_sym("!") {
            let e = self.not_expr()?;
            return Ok(Expr::new(ExprKind::Unary(UnOp::Not, Box::new(e)), span));
        }
        self.cmp_expr()
    }

    fn cmp_expr(&mut self) -> Result<Expr> {
        let lhs = self.add_expr()?;
        let span = self.span();
        let op = match self.peek() {
            Tok::Sym("==") | Tok::Sym("=") => BinOp::Eq,
            Tok::Sym("!=") => BinOp::Ne,
            Tok::Sym("<") => BinOp::Lt,
            Tok::Sym("<=") => BinOp::Le,
            Tok::Sym(">") => BinOp::Gt,
            Tok::Sym(">=") => BinOp::Ge,
            _ => return Ok(lhs),
        };
        self.advance();
        let rhs = self.add_expr()?;
        Ok(Expr::new(
            ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)),
            span,
        ))
    }

    fn add_expr(&mut self) -> Result<Expr> {
        let mut lhs = self.mul_expr()?;
        loop {
            let span = self.span();
            let op = match self.peek() {
                Tok::Sym("+") => BinOp::Add,
                Tok::Sym("-") => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.mul_expr()?;
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span);
        }
    }

    fn mul_expr(&mut self) -> Result<Expr> {
        let mut lhs = self.unary_expr()?;
        loop {
            let span = self.span();
            let op = match self.peek() {
                Tok::Sym("*") => BinOp::Mul,
                Tok::Sym("/") => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.unary_expr()?;
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span);
        }
    }

    fn unary_expr(&mut self) -> Result<Expr> {
        let span = self.span();
        if self.eat_sym("-") {
            let e = self.unary_expr()?;
            return Ok(Expr::new(ExprKind::Unary(UnOp::Neg, Box::new(e)), span));
        }
        self.pow_expr()
    }

    fn pow_expr(&mut self) -> Result<Expr> {
        let base = self.postfix_expr()?;
        let span = self.span();
        if self.eat_sym("^") {
            let exp = self.unary_expr()?;
            return Ok(Expr::new(
                ExprKind::Binary(BinOp::Pow, Box::new(base), Box::new(exp)),
                span,
            ));
        }
        Ok(base)
    }

    fn postfix_expr(&mut self) -> Result<Expr> {
        let mut e = self.primary()?;
        while self.is_sym("[") {
            let span = self.span();
            self.advance();
            let idx = self.expr()?;
            self.expect_sym("]")?;
            e = Expr::new(ExprKind::Index(Box::new(e), Box::new(idx)), span);
        }
        Ok(e)
    }

    fn primary(&mut self) -> Result<Expr> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Num(q) => {
                self.advance();
                Ok(Expr::new(ExprKind::Num(q), span))
            }
            Tok::Kw("true") => {
                self.advance();
                Ok(Expr::new(ExprKind::Bool(true), span))
            }
            Tok::Kw("false") => {
                self.advance();
                Ok(Expr::new(ExprKind::Bool(false), span))
            }
            Tok::Kw("inf") => {
                self.advance();
                Ok(Expr::new(ExprKind::Inf, span))
            }
            Tok::Tagged(x, side) => {
                self.advance();
                Ok(Expr::new(
                    ExprKind::Var(Ident::from(x.as_str()), Some(side)),
                    span,
                ))
            }
            Tok::Param(x) => {
                self.advance();
                Ok(Expr::new(
                    ExprKind::Var(Ident::from(x.as_str()), None),
                    span,
                ))
            }
            Tok::Sym("(") => {
                self.advance();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Sym("[") => {
                self.advance();
                let mut items = Vec::new();
                if !self.is_sym("]") {
                    items.push(self.expr()?);
                    while self.eat_sym(",") {
                        items.push(self.expr()?);
                    }
                }
                self.expect_sym("]")?;
                if items.len() == 1 && items[0].is_syntactically_bool() {
                    let e = items.pop().unwrap();
                    return Ok(Expr::new(ExprKind::Iverson(Box::new(e)), span));
                }
                Ok(Expr::new(ExprKind::ArrayLit(items), span))
            }
            Tok::Kw("sum") => {
                self.advance();
                self.bounded(BoundOp::Sum, span)
            }
            Tok::Ident(x) => {
                self.advance();
                if !self.is_sym("(") {
                    return Ok(Expr::new(
                        ExprKind::Var(Ident::from(x.as_str()), None),
                        span,
                    ));
                }
                if x == "max"
                    && matches!(self.peek_at(1), Tok::Ident(_))
                    && matches!(self.peek_at(2), Tok::Kw("in"))
                {
                    return self.bounded(BoundOp::Max, span);
                }
                let b = Builtin::from_name(&x).ok_or_else(|| Error::Syntax {
                    line: span.line,
                    col: span.col,
                    msg: format!("unknown function `{x}`"),
                })?;
                self.expect_sym("(")?;
                let mut args = Vec::new();
                if !self.is_sym(")") {
                    args.push(self.expr()?);
                    while self.eat_sym(",") {
                        args.push(self.expr()?);
                    }
                }
                self.expect_sym(")")?;
                if args.len() != b.arity() {
                    return Err(Error::Syntax {
                        line: span.line,
                        col: span.col,
                        msg: format!("`{x}` takes {} arguments, found {}", b.arity(), args.len()),
                    });
                }
                Ok(Expr::new(ExprKind::Call(b, args), span))
            }
            _ => self.err("expected an expression"),
        }
    }

    fn bounded(&mut self, op: BoundOp, span: Span) -> Result<Expr> {
        self.expect_sym("(")?;
        let var = self.expect_ident()?;
        self.expect_kw("in")?;
        let lo = self.expr()?;
        self.expect_sym("..")?;
        let hi = self.expr()?;
        self.expect_sym(",")?;
        let body = self.expr()?;
        self.expect_sym(")")?;
        Ok(Expr::new(
            ExprKind::Bounded {
                op,
                var: Ident::from(var.as_str()),
                lo: Box::new(lo),
                hi: Box::new(hi),
                body: Box::new(body),
            },
            span,
        ))
    }

    /// `{x = 1, pos = [0, 1], b = true}`; values are constant expressions.
    pub fn state_literal(&mut self) -> Result<State> {
        self.expect_sym("{")?;
        let mut s = State::new();
        if !self.is_sym("}") {
            loop {
                let name = self.expect_ident()?;
                if !self.eat_sym("=") {
                    self.expect_sym(":=")?;
                }
                let e = self.expr()?;
                let v = crate::lang::eval::eval(&e, &State::new())?;
                if matches!(v, Value::Num(Ext::Inf)) {
                    return Err(Error::eval("states cannot hold inf"));
                }
                s.set(&name, v);
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        self.expect_sym("}")?;
        Ok(s)
    }

    pub fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    pub fn eat(&mut self, s: &str) -> bool {
        self.eat_sym(s)
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(x) => format!("identifier `{x}`"),
        Tok::Tagged(x, s) => format!("`{x}<{}>`", s.tag()),
        Tok::Param(x) => format!("parameter `{x}`"),
        Tok::Num(q) => format!("number `{}`", crate::num::fmt_rat(q)),
        Tok::Kw(k) => format!("keyword `{k}`"),
        Tok::Sym(s) => format!("`{s}`"),
        Tok::Eof => "end of input".into(),
    }
}

/// Parses a program without type checking.
pub fn parse_program_untyped(src: &str) -> Result<Program> {
    Parser::new(src)?.program()
}

pub fn parse_expr(src: &str) -> Result<Expr> {
    let mut p = Parser::new(src)?;
    let e = p.expr()?;
    p.expect_eof()?;
    Ok(e)
}

pub fn parse_state(src: &str) -> Result<State> {
    let mut p = Parser::new(src)?;
    let s = p.state_literal()?;
    p.expect_eof()?;
    Ok(s)
}

/// Parses `{...} | {...}`.
pub fn parse_state_pair(src: &str) -> Result<(State, State)> {
    let mut p = Parser::new(src)?;
    let a = p.state_literal()?;
    if !p.eat_sym("|") && !p.eat_sym(",") {
        return p.err("expected `|` between the two states");
    }
    let b = p.state_literal()?;
    p.expect_eof()?;
    Ok((a, b))
}
