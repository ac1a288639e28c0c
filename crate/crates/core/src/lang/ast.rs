use std::collections::BTreeSet;
use std::hash::{Hash, Hasher};

use crate::num::Rat;
use crate::state::Ident;

/// Source position. Spans never take part in equality or hashing, so ASTs
/// compare structurally.
#[derive(Clone, Copy, Debug, Default)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

impl PartialEq for Span {
    fn eq(&self, _: &Span) -> bool {
        true
    }
}

impl Eq for Span {}

impl Hash for Span {
    fn hash<H: Hasher>(&self, _: &mut H) {}
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn tag(self) -> u8 {
        match self {
            Side::Left => 1,
            Side::Right => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Builtin {
    Max,
    Min,
    Abs,
    Monus,
    Len,
    Update,
    ShiftR,
    Cat,
    Select,
    NegBits,
    InvPerm,
    IsPerm,
    DH,
    DM,
    DBD,
    DP,
    InfNorm,
    WH,
}

impl Builtin {
    pub const ALL: [Builtin; 18] = [
        Builtin::Max,
        Builtin::Min,
        Builtin::Abs,
        Builtin::Monus,
        Builtin::Len,
        Builtin::Update,
        Builtin::ShiftR,
        Builtin::Cat,
        Builtin::Select,
        Builtin::NegBits,
        Builtin::InvPerm,
        Builtin::IsPerm,
        Builtin::DH,
        Builtin::DM,
        Builtin::DBD,
        Builtin::DP,
        Builtin::InfNorm,
        Builtin::WH,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Max => "max",
            Builtin::Min => "min",
            Builtin::Abs => "abs",
            Builtin::Monus => "monus",
            Builtin::Len => "len",
            Builtin::Update => "update",
            Builtin::ShiftR => "shiftR",
            Builtin::Cat => "cat",
            Builtin::Select => "select",
            Builtin::NegBits => "negBits",
            Builtin::InvPerm => "invPerm",
            Builtin::IsPerm => "isPerm",
            Builtin::DH => "dH",
            Builtin::DM => "dM",
            Builtin::DBD => "dBD",
            Builtin::DP => "dP",
            Builtin::InfNorm => "infNorm",
            Builtin::WH => "wH",
        }
    }

    pub fn from_name(s: &str) -> Option<Builtin> {
        Builtin::ALL.iter().copied().find(|b| b.name() == s)
    }

    pub fn arity(self) -> usize {
        match self {
            Builtin::Abs | Builtin::Len | Builtin::NegBits | Builtin::IsPerm | Builtin::WH => 1,
            Builtin::Update => 3,
            _ => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundOp {
    Sum,
    Max,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ExprKind {
    Num(Rat),
    Bool(bool),
    Inf,
    /// Variable, optionally tagged with the execution it refers to. Names
    /// starting with `$` are family parameters such as `$n`.
    Var(Ident, Option<Side>),
    ArrayLit(Vec<Expr>),
    Index(Box<Expr>, Box<Expr>),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Builtin, Vec<Expr>),
    Iverson(Box<Expr>),
    /// `sum(i in lo..hi, body)` or `max(i in lo..hi, body)`, `hi` exclusive.
    Bounded {
        op: BoundOp,
        var: Ident,
        lo: Box<Expr>,
        hi: Box<Expr>,
        body: Box<Expr>,
    },
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Expr {
        Expr { kind, span }
    }

    pub fn bare(kind: ExprKind) -> Expr {
        Expr::new(kind, Span::default())
    }

    pub fn var(name: &str) -> Expr {
        Expr::bare(ExprKind::Var(Ident::from(name), None))
    }

    pub fn num(q: Rat) -> Expr {
        Expr::bare(ExprKind::Num(q))
    }

    pub fn binary(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::bare(ExprKind::Binary(op, Box::new(a), Box::new(b)))
    }

    /// Variables read by the expression, with tags, excluding bound ones.
    pub fn free_vars(&self) -> BTreeSet<(Ident, Option<Side>)> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut Vec::new(), &mut out);
        out
    }

    fn collect_vars(&self, bound: &mut Vec<Ident>, out: &mut BTreeSet<(Ident, Option<Side>)>) {
        match &self.kind {
            ExprKind::Num(_) | ExprKind::Bool(_) | ExprKind::Inf => {}
            ExprKind::Var(x, tag) => {
                if tag.is_some() || !bound.contains(x) {
                    out.insert((x.clone(), *tag));
                }
            }
            ExprKind::ArrayLit(es) | ExprKind::Call(_, es) => {
                es.iter().for_each(|e| e.collect_vars(bound, out))
            }
            ExprKind::Index(a, b) | ExprKind::Binary(_, a, b) => {
                a.collect_vars(bound, out);
                b.collect_vars(bound, out);
            }
            ExprKind::Unary(_, a) | ExprKind::Iverson(a) => a.collect_vars(bound, out),
            ExprKind::Bounded {
                var, lo, hi, body, ..
            } => {
                lo.collect_vars(bound, out);
                hi.collect_vars(bound, out);
                bound.push(var.clone());
                body.collect_vars(bound, out);
                bound.pop();
            }
        }
    }

    /// True when the top-level form can only be boolean.
    pub fn is_syntactically_bool(&self) -> bool {
        match &self.kind {
            ExprKind::Bool(_) => true,
            ExprKind::Unary(UnOp::Not, _) => true,
            ExprKind::Binary(op, _, _) => {
                op.is_comparison() || matches!(op, BinOp::And | BinOp::Or)
            }
            ExprKind::Call(Builtin::IsPerm, _) => true,
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum DistExpr {
    /// Uniform over the integers `lo, lo+1, ..., hi-1`.
    UniformRange {
        lo: Expr,
        hi: Expr,
    },
    UniformSet(Vec<Expr>),
    /// `1` with probability `p`, `0` otherwise.
    Bernoulli(Expr),
    /// Uniform over bitvectors of the given length.
    UniformBits(Expr),
    Table(Vec<(Expr, Expr)>),
}

impl DistExpr {
    pub fn exprs(&self) -> Vec<&Expr> {
        match self {
            DistExpr::UniformRange { lo, hi } => vec![lo, hi],
            DistExpr::UniformSet(es) => es.iter().collect(),
            DistExpr::Bernoulli(p) | DistExpr::UniformBits(p) => vec![p],
            DistExpr::Table(rows) => rows.iter().flat_map(|(v, p)| [v, p]).collect(),
        }
    }
}

/// Sampling site: ordinal in source order plus the statement position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Site {
    pub index: usize,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Command {
    Skip,
    Assign {
        var: Ident,
        expr: Expr,
        span: Span,
    },
    Sample {
        var: Ident,
        dist: DistExpr,
        site: Site,
    },
    Seq(Vec<Command>),
    If {
        cond: Expr,
        then_: Box<Command>,
        else_: Box<Command>,
    },
    While {
        cond: Expr,
        body: Box<Command>,
        span: Span,
    },
}

impl Command {
    pub fn seq(cs: Vec<Command>) -> Command {
        let mut flat = Vec::new();
        for c in cs {
            match c {
                Command::Seq(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        if flat.is_empty() {
            Command::Skip
        } else if flat.len() == 1 {
            flat.pop().unwrap()
        } else {
            Command::Seq(flat)
        }
    }

    /// Variables possibly written by the command.
    pub fn modified_vars(&self) -> BTreeSet<Ident> {
        let mut out = BTreeSet::new();
        self.visit(&mut |c| match c {
            Command::Assign { var, .. } | Command::Sample { var, .. } => {
                out.insert(var.clone());
            }
            _ => {}
        });
        out
    }

    pub fn sites(&self) -> Vec<(Site, Ident)> {
        let mut out = Vec::new();
        self.visit(&mut |c| {
            if let Command::Sample { var, site, .. } = c {
                out.push((*site, var.clone()));
            }
        });
        out
    }

    pub fn has_loops(&self) -> bool {
        let mut found = false;
        self.visit(&mut |c| found |= matches!(c, Command::While { .. }));
        found
    }

    /// Pre-order traversal.
    pub fn visit<F: FnMut(&Command)>(&self, f: &mut F) {
        f(self);
        match self {
            Command::Seq(cs) => cs.iter().for_each(|c| c.visit(f)),
            Command::If { then_, else_, .. } => {
                then_.visit(f);
                else_.visit(f);
            }
            Command::While { body, .. } => body.visit(f),
            _ => {}
        }
    }

    /// Loops in pre-order, so index 0 is the first loop in the source.
    pub fn loops(&self) -> Vec<&Command> {
        let mut out = Vec::new();
        collect_loops(self, &mut out);
        out
    }
}

fn collect_loops<'a>(c: &'a Command, out: &mut Vec<&'a Command>) {
    match c {
        Command::While { body, .. } => {
            out.push(c);
            collect_loops(body, out);
        }
        Command::Seq(cs) => cs.iter().for_each(|c| collect_loops(c, out)),
        Command::If { then_, else_, .. } => {
            collect_loops(then_, out);
            collect_loops(else_, out);
        }
        _ => {}
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Type {
    Num,
    Bool,
    Array,
}

impl std::fmt::Display for Type {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Type::Num => "int",
            Type::Bool => "bool",
            Type::Array => "array",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Decl {
    pub name: Ident,
    pub ty: Type,
    /// Declared static length of an array input.
    pub len: Option<usize>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Program {
    pub inputs: Vec<Decl>,
    pub body: Command,
}
