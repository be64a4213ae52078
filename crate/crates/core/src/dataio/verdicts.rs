//! Per-point verdict dump.
//!
//! Plain CSV with header `sweep,point,verdict`. `point` is the index of the
//! return in its scan file. An undetermined point appears twice: once when
//! it is deferred and again, with the same key, when it is resolved. Readers
//! keep the last row for each key.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use crate::detector::Verdict;
use crate::error::{Error, Result};
use crate::pipeline::SweepOutcome;

pub const HEADER: &str = "sweep,point,verdict";

pub type VerdictTable = BTreeMap<(u64, u32), Verdict>;

pub struct VerdictWriter<W: Write> {
    out: W,
}

impl<W: Write> VerdictWriter<W> {
    pub fn new(mut out: W) -> io::Result<Self> {
        writeln!(out, "{HEADER}")?;
        Ok(Self { out })
    }

    pub fn write_row(&mut self, sweep: u64, point: u32, verdict: Verdict) -> io::Result<()> {
        writeln!(self.out, "{sweep},{point},{verdict}")
    }

    pub fn write_outcome(&mut self, sweep: u64, outcome: &SweepOutcome) -> io::Result<()> {
        for p in &outcome.points {
            self.write_row(sweep, p.source_index, p.verdict)?;
        }
        for r in &outcome.resolutions {
            self.write_row(r.entry.birth_sweep, r.entry.source_index, r.verdict)?;
        }
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

/// Collects the same rows a [`VerdictWriter`] would produce, in memory.
pub fn apply_outcome(table: &mut VerdictTable, sweep: u64, outcome: &SweepOutcome) {
    for p in &outcome.points {
        table.insert((sweep, p.source_index), p.verdict);
    }
    for r in &outcome.resolutions {
        table.insert((r.entry.birth_sweep, r.entry.source_index), r.verdict);
    }
}

pub fn parse_verdicts(text: &str) -> Result<VerdictTable, (usize, String)> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == HEADER => {}
        _ => return Err((1, format!("expected header `{HEADER}`"))),
    }
    let mut table = VerdictTable::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.trim().split(',');
        let (Some(s), Some(p), Some(v), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
            return Err((line_no, "expected 3 comma-separated fields".into()));
        };
        let sweep = s.parse::<u64>().map_err(|_| (line_no, format!("bad sweep `{s}`")))?;
        let point = p.parse::<u32>().map_err(|_| (line_no, format!("bad point index `{p}`")))?;
        let verdict = v.parse::<Verdict>().map_err(|e| (line_no, e))?;
        table.insert((sweep, point), verdict);
    }
    Ok(table)
}

pub fn read_verdicts(path: &Path) -> Result<VerdictTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_verdicts(&text).map_err(|(line, msg)| Error::format_at(path, line, msg))
}
