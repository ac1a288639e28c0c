//! Check reports and the versioned JSON envelope used by the CLI.

use serde::Serialize;

use crate::num::Ext;
use crate::state::State;

pub const SCHEMA: &str = "kantorel.report/v1";

/// Witnesses kept per report; the count of violations is always exact.
pub const MAX_WITNESSES: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    Inconclusive,
}

/// One violating (or noteworthy) point of a check.
#[derive(Clone, Debug, Serialize)]
pub struct Witness {
    pub s1: State,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s2: Option<State>,
    /// Depth for indexed families.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub lhs: Ext,
    pub rhs: Ext,
    pub lhs_float: f64,
    pub rhs_float: f64,
}

impl Witness {
    pub fn pair(s1: &State, s2: &State, lhs: Ext, rhs: Ext) -> Witness {
        Witness {
            s1: s1.clone(),
            s2: Some(s2.clone()),
            n: None,
            lhs_float: lhs.to_f64(),
            rhs_float: rhs.to_f64(),
            lhs,
            rhs,
        }
    }

    pub fn single(s: &State, n: Option<usize>, lhs: Ext, rhs: Ext) -> Witness {
        Witness {
            s1: s.clone(),
            s2: None,
            n,
            lhs_float: lhs.to_f64(),
            rhs_float: rhs.to_f64(),
            lhs,
            rhs,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Stats {
    pub pairs_checked: usize,
    pub violations: usize,
    /// Points where the inequality held strictly.
    pub strict: usize,
    pub iterations: usize,
    pub pairs_explored: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub verdict: Verdict,
    pub message: String,
    pub witnesses: Vec<Witness>,
    pub stats: Stats,
}

impl CheckReport {
    pub fn new(check: impl Into<String>) -> CheckReport {
        CheckReport {
            check: check.into(),
            verdict: Verdict::Holds,
            message: String::new(),
            witnesses: Vec::new(),
            stats: Stats::default(),
        }
    }

    pub fn inconclusive(check: impl Into<String>, why: impl Into<String>) -> CheckReport {
        CheckReport {
            verdict: Verdict::Inconclusive,
            message: why.into(),
            ..CheckReport::new(check)
        }
    }

    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }

    /// Records one checked point; a failing point turns the verdict to
    /// `Fails` and is kept as a witness.
    pub fn record(&mut self, ok: bool, strict: bool, w: impl FnOnce() -> Witness) {
        self.stats.pairs_checked += 1;
        if strict {
            self.stats.strict += 1;
        }
        if !ok {
            self.stats.violations += 1;
            self.verdict = Verdict::Fails;
            if self.witnesses.len() < MAX_WITNESSES {
                self.witnesses.push(w());
            }
        }
    }

    /// Keeps a non-violating witness, e.g. a point of strict inequality.
    pub fn note(&mut self, w: Witness) {
        if self.witnesses.len() < MAX_WITNESSES {
            self.witnesses.push(w);
        }
    }

    pub fn finish(mut self) -> CheckReport {
        if self.message.is_empty() {
            self.message = match self.verdict {
                Verdict::Holds => format!("holds on {} points", self.stats.pairs_checked),
                Verdict::Fails => format!(
                    "fails at {} of {} points",
                    self.stats.violations, self.stats.pairs_checked
                ),
                Verdict::Inconclusive => "inconclusive".into(),
            };
        }
        self
    }
}

/// Top-level JSON document written by the CLI.
#[derive(Clone, Debug, Serialize)]
pub struct Envelope<T: Serialize> {
    pub schema: &'static str,
    pub command: String,
    pub result: T,
}

impl<T: Serialize> Envelope<T> {
    pub fn new(command: impl Into<String>, result: T) -> Envelope<T> {
        Envelope { schema: SCHEMA, command: command.into(), result }
    }
}
