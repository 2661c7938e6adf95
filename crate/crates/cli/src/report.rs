//! JSON report envelopes. Schemas for each live in `schemas/`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use lsgrec::evaluation::Metric;
use lsgrec::linkstream::StreamStats;
use lsgrec::tuning::{LeaderboardEntry, SearchOutcome};
use lsgrec::{EvaluationReport, Flavor};
use serde::Serialize;

use crate::config::RunConfig;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct Tool {
    pub name: &'static str,
    pub version: &'static str,
}

pub const TOOL: Tool = Tool {
    name: "lsgrec",
    version: env!("CARGO_PKG_VERSION"),
};

#[derive(Debug, Serialize)]
pub struct EvaluationFile<'a> {
    pub format_version: u32,
    pub kind: &'static str,
    pub tool: Tool,
    pub config: &'a RunConfig,
    /// Counts after filtering.
    pub dataset: &'a StreamStats,
    pub report: &'a EvaluationReport,
}

#[derive(Debug, Serialize)]
pub struct SearchFile<'a> {
    pub format_version: u32,
    pub kind: &'static str,
    pub tool: Tool,
    pub config: &'a RunConfig,
    pub dataset: &'a StreamStats,
    pub outcome: &'a SearchOutcome,
}

#[derive(Debug, Serialize)]
pub struct BestFile<'a> {
    pub format_version: u32,
    pub kind: &'static str,
    pub tool: Tool,
    pub config: &'a RunConfig,
    pub flavor: Flavor,
    pub metric: Metric,
    pub best: Option<&'a LeaderboardEntry>,
}

#[derive(Debug, Serialize)]
pub struct GraphStats {
    pub flavor: Flavor,
    pub nodes: usize,
    pub edges: usize,
    /// Parameters the graph was built with, if any.
    pub delta_days: Option<f64>,
    pub eta_s: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct InspectFile {
    pub format_version: u32,
    pub kind: &'static str,
    pub tool: Tool,
    pub dataset: StreamStats,
    pub graphs: Vec<GraphStats>,
}

/// Writes through a temporary sibling and renames it into place, so a
/// crash never leaves a half-written report.
pub fn write_file(path: &Path, fill: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let mut tmp = PathBuf::from(path);
    tmp.as_mut_os_string().push(".tmp");
    let file = File::create(&tmp).with_context(|| format!("cannot create {}", tmp.display()))?;
    let mut w = BufWriter::new(file);
    fill(&mut w)?;
    w.flush()?;
    drop(w);
    std::fs::rename(&tmp, path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")?;
        Ok(())
    })
}
