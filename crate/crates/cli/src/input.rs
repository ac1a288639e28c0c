//! Reading programs, expectations, states and case selections.

use std::path::Path;

use anyhow::{bail, Context, Result};
use kantorel::casebook::{make_case, CaseStudy, Params};
use kantorel::config::Config;
use kantorel::lang::ast::{Command, Expr};
use kantorel::lang::{
    parse_family, parse_program, parse_relexp, parse_state, parse_state_pair, parse_unary, read_expectation_text,
    signature, Ctx, Program,
};
use kantorel::rpe::Specs;
use kantorel::semantics::denote_exact;
use kantorel::state::State;

use crate::{CaseArgs, Global, PairArgs, Target};

/// A usage problem that is not a parse error of the inputs themselves.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Usage(msg.into()).into())
}

pub fn config(g: &Global) -> Config {
    Config {
        max_iters: g.max_iters,
        epsilon: g.epsilon,
        n_max: g.n_max,
        parallel: g.jobs != Some(1),
    }
}

/// The argument itself, or the contents of the file it names.
pub fn text(arg: &str) -> Result<String> {
    let p = Path::new(arg);
    if p.is_file() {
        std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))
    } else {
        Ok(arg.to_string())
    }
}

pub fn program(path: &Path) -> Result<Program> {
    let src = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_program(&src).with_context(|| format!("in {}", path.display()))
}

pub fn state(arg: &str) -> Result<State> {
    Ok(parse_state(text(arg)?.trim())?)
}

pub fn relexp(p: &Program, arg: &str) -> Result<Expr> {
    Ok(parse_relexp(&read_expectation_text(&text(arg)?), &signature(p)?)?)
}

pub fn unary(p: &Program, arg: &str) -> Result<Expr> {
    Ok(parse_unary(&read_expectation_text(&text(arg)?), &signature(p)?)?)
}

pub fn family(p: &Program, arg: &str, ctx: Ctx) -> Result<Expr> {
    Ok(parse_family(&read_expectation_text(&text(arg)?), &signature(p)?, ctx)?)
}

pub fn specs(p: &Program, arg: Option<&str>) -> Result<Specs> {
    match arg {
        None => Ok(Specs::new()),
        Some(a) => Ok(Specs::parse(&text(a)?, &p.body)?),
    }
}

pub fn pairs(args: &PairArgs) -> Result<Vec<(State, State)>> {
    let mut out = Vec::new();
    for p in &args.pair {
        out.push(parse_state_pair(p)?);
    }
    if let Some(f) = &args.pairs {
        let src = std::fs::read_to_string(f).with_context(|| format!("reading {}", f.display()))?;
        for (i, line) in src.lines().enumerate() {
            let line = line.split("//").next().unwrap_or("").trim();
            if !line.is_empty() {
                out.push(parse_state_pair(line).with_context(|| format!("{}:{}", f.display(), i + 1))?);
            }
        }
    }
    Ok(out)
}

pub fn case(args: &CaseArgs) -> Result<Option<CaseStudy>> {
    let Some(name) = &args.case else {
        if args.n.is_some() || args.k.is_some() || !args.params.is_empty() {
            return usage("-N, -K and --param need --case");
        }
        return Ok(None);
    };
    let mut items = Vec::new();
    if let Some(n) = &args.n {
        items.push(format!("N={n}"));
    }
    if let Some(k) = &args.k {
        items.push(format!("K={k}"));
    }
    items.extend(args.params.iter().cloned());
    Ok(Some(make_case(name, &Params::parse(&items.join(","))?)?))
}

pub fn need_case(args: &CaseArgs) -> Result<CaseStudy> {
    match case(args)? {
        Some(c) => Ok(c),
        None => usage("this subcommand needs --case"),
    }
}

/// The analysed program: a file or the program of a case study.
pub enum Subject {
    File(Program),
    Case(Box<CaseStudy>),
}

impl Subject {
    pub fn resolve(t: &Target) -> Result<Subject> {
        match (&t.program, case(&t.case)?) {
            (Some(_), Some(_)) => usage("give either a program file or --case, not both"),
            (Some(p), None) => Ok(Subject::File(program(p)?)),
            (None, Some(c)) => Ok(Subject::Case(Box::new(c))),
            (None, None) => usage("a program file or --case is required"),
        }
    }

    pub fn program(&self) -> &Program {
        match self {
            Subject::File(p) => p,
            Subject::Case(c) => &c.program,
        }
    }

    pub fn as_case(&self) -> Option<&CaseStudy> {
        match self {
            Subject::Case(c) => Some(c),
            Subject::File(_) => None,
        }
    }

    /// `--exp`, or the case distance.
    pub fn distance(&self, exp: Option<&str>) -> Result<Expr> {
        match (exp, self) {
            (Some(e), _) => relexp(self.program(), e),
            (None, Subject::Case(c)) => Ok(c.distance.clone()),
            (None, Subject::File(_)) => usage("--exp is required for a program file"),
        }
    }

    /// `--couplings`, or the couplings of the case.
    pub fn specs(&self, arg: Option<&str>) -> Result<Specs> {
        match (arg, self) {
            (None, Subject::Case(c)) => Ok(c.specs.clone()),
            _ => specs(self.program(), arg),
        }
    }

    /// Given pairs, or the canonical inputs of the case.
    pub fn pairs(&self, args: &PairArgs) -> Result<Vec<(State, State)>> {
        let given = pairs(args)?;
        match (given.is_empty(), self) {
            (false, _) => Ok(given),
            (true, Subject::Case(c)) => Ok(vec![c.canonical_inputs()]),
            (true, Subject::File(_)) => usage("give at least one --pair or a --pairs file"),
        }
    }
}

/// Splits a program into the commands before its top-level loop and the loop.
pub fn split_loop(p: &Program) -> Result<(Command, Command)> {
    let cs: Vec<Command> = match &p.body {
        Command::Seq(cs) => cs.clone(),
        c => vec![c.clone()],
    };
    let Some(at) = cs.iter().position(|c| matches!(c, Command::While { .. })) else {
        return usage("the program has no top-level while loop");
    };
    if at + 1 != cs.len() {
        return usage("the top-level loop must be the last statement of the program");
    }
    Ok((Command::seq(cs[..at].to_vec()), cs[at].clone()))
}

/// Runs the prelude on both sides and pairs up every outcome.
pub fn loop_heads(prelude: &Command, pairs: &[(State, State)], cfg: &Config) -> Result<Vec<(State, State)>> {
    let mut out = Vec::new();
    for (s1, s2) in pairs {
        let d1 = denote_exact(prelude, s1, cfg)?;
        let d2 = denote_exact(prelude, s2, cfg)?;
        for (a, _) in d1.iter() {
            for (b, _) in d2.iter() {
                out.push((a.clone(), b.clone()));
            }
        }
    }
    if out.is_empty() {
        bail!("no loop-head pairs");
    }
    Ok(out)
}

pub fn projection(arg: Option<&str>) -> Option<Vec<String>> {
    arg.map(|s| s.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect())
}
