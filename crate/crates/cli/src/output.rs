//! Rendering of results and the mapping from outcomes to exit codes.

use std::io::Write;
use std::process::ExitCode;

use kantorel::num::{fmt_rat, Ext, Rat};
use kantorel::report::{CheckReport, Envelope, Verdict};
use kantorel::Error;
use serde::Serialize;

use crate::input::Usage;
use crate::{Format, Global};

pub const HOLDS: u8 = 0;
pub const FAILS: u8 = 1;
pub const USAGE: u8 = 2;
pub const INCONCLUSIVE: u8 = 3;

/// What a subcommand produced, in every output format.
pub struct Outcome {
    pub code: u8,
    pub json: serde_json::Value,
    pub table: String,
    /// Commands without a tabular result print the table form for `csv`.
    pub csv: Option<String>,
}

impl Outcome {
    pub fn new<T: Serialize>(command: &str, result: &T, table: String) -> anyhow::Result<Outcome> {
        Ok(Outcome { code: HOLDS, json: serde_json::to_value(Envelope::new(command, result))?, table, csv: None })
    }

    pub fn code(mut self, code: u8) -> Outcome {
        self.code = code;
        self
    }

    pub fn csv(mut self, csv: String) -> Outcome {
        self.csv = Some(csv);
        self
    }

    pub fn emit(self, g: &Global) -> ExitCode {
        let text = match g.format {
            Format::Json => serde_json::to_string_pretty(&self.json).unwrap_or_default() + "\n",
            Format::Csv => self.csv.unwrap_or(self.table),
            Format::Table => self.table,
        };
        // A closed pipe (`| head`) is not an analysis failure.
        let _ = std::io::stdout().lock().write_all(text.as_bytes());
        ExitCode::from(self.code)
    }
}

pub fn verdict_code(v: Verdict) -> u8 {
    match v {
        Verdict::Holds => HOLDS,
        Verdict::Fails => FAILS,
        Verdict::Inconclusive => INCONCLUSIVE,
    }
}

pub fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Holds => "holds",
        Verdict::Fails => "fails",
        Verdict::Inconclusive => "inconclusive",
    }
}

pub fn error_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<Usage>().is_some() || e.downcast_ref::<std::io::Error>().is_some() {
        return USAGE;
    }
    match e.downcast_ref::<Error>() {
        Some(Error::Budget(_) | Error::NotTerminating(_) | Error::StateSpace(_) | Error::Unclosed(_)) => INCONCLUSIVE,
        _ => USAGE,
    }
}

/// `3/8 (0.375)`.
pub fn ext(e: &Ext) -> String {
    match e {
        Ext::Inf => "inf".into(),
        Ext::Fin(q) => rat(q),
    }
}

pub fn rat(q: &Rat) -> String {
    format!("{} ({})", fmt_rat(q), kantorel::num::rat_to_f64(q))
}

pub fn opt_rat(q: &Option<Rat>) -> String {
    q.as_ref().map_or("-".into(), fmt_rat)
}

/// Left-aligned columns separated by two spaces.
pub fn columns(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (i, (c, w)) in cells.iter().zip(&width).enumerate() {
            if i + 1 == cells.len() {
                s.push_str(c);
            } else {
                s.push_str(&format!("{c:<w$}  "));
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    for r in rows {
        out.push_str(&line(r.iter().map(|s| s.as_str()).collect()));
    }
    out
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn csv_rows(header: &[&str], rows: &[Vec<String>]) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn report_table(r: &CheckReport) -> String {
    let mut out = format!("{}: {}: {}\n", r.check, verdict_name(r.verdict), r.message);
    out.push_str(&format!(
        "points checked {}, violations {}, strict {}, pairs explored {}\n",
        r.stats.pairs_checked, r.stats.violations, r.stats.strict, r.stats.pairs_explored
    ));
    if !r.witnesses.is_empty() {
        let rows: Vec<Vec<String>> = r
            .witnesses
            .iter()
            .map(|w| {
                vec![
                    w.s1.to_string(),
                    w.s2.as_ref().map_or("-".into(), |s| s.to_string()),
                    w.n.map_or("-".into(), |n| n.to_string()),
                    ext(&w.lhs),
                    ext(&w.rhs),
                ]
            })
            .collect();
        out.push_str(&columns(&["s1", "s2", "n", "lhs", "rhs"], &rows));
    }
    out
}
