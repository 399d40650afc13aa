//! Result files written into the output directory.
//!
//! * `trials.csv`: one row per completed trial, in trial order. Columns are
//!   [`TRIALS_HEADER`]; the layout is versioned by [`TRIALS_SCHEMA`] and
//!   contains no timing, so repeated runs are byte-identical.
//! * `timing.csv`: `trial,users,ebn0_db,wall_time_s` for the same rows.
//! * `trace.jsonl`: with `--trace`, one JSON object per receiver iteration.
//! * `plot.csv`: sweep and find-ebn0 modes, one row per operating point,
//!   columns [`PLOT_HEADER`].
//! * `summary.toml` and `manifest.toml`: campaign statistics and the
//!   resolved manifest.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use fasura_core::harness::{CampaignStats, Estimate, SearchStep};
use fasura_core::receiver::IterationTrace;
use fasura_core::TrialResult;
use serde::Serialize;

pub const TRIALS_SCHEMA: u32 = 1;
pub const TRIALS_HEADER: [&str; 8] = ["trial", "seed", "ebn0_db", "users", "n_ms", "n_fa", "k_declared", "iterations"];
pub const PLOT_HEADER: [&str; 12] = [
    "users", "ebn0_db", "trials", "p_md", "p_md_low", "p_md_high", "p_fa", "p_fa_low", "p_fa_high", "p_e", "p_e_low",
    "p_e_high",
];

/// A finished trial with its side information.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub result: TrialResult,
    pub wall_time: Duration,
    pub trace: Vec<IterationTrace>,
}

#[derive(Serialize)]
struct TraceLine<'a> {
    trial: u64,
    users: usize,
    ebn0_db: f64,
    #[serde(flatten)]
    iteration: &'a IterationTrace,
}

/// Streaming writers for per-trial files, flushed after every row.
pub struct TrialSink {
    trials: csv::Writer<File>,
    timing: csv::Writer<File>,
    trace: Option<BufWriter<File>>,
    rows: usize,
}

fn create(path: &Path) -> io::Result<File> {
    File::create(path).map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

impl TrialSink {
    pub fn create(dir: &Path, trace: bool) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        let mut trials = csv::Writer::from_writer(create(&dir.join("trials.csv"))?);
        trials.write_record(TRIALS_HEADER)?;
        let mut timing = csv::Writer::from_writer(create(&dir.join("timing.csv"))?);
        timing.write_record(["trial", "users", "ebn0_db", "wall_time_s"])?;
        let trace = if trace { Some(BufWriter::new(create(&dir.join("trace.jsonl"))?)) } else { None };
        trials.flush()?;
        timing.flush()?;
        Ok(TrialSink { trials, timing, trace, rows: 0 })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn record(&mut self, rec: &TrialRecord) -> io::Result<()> {
        let r = &rec.result;
        self.trials.write_record([
            r.trial.to_string(),
            r.seed.to_string(),
            r.ebn0_db.to_string(),
            r.users.to_string(),
            r.missed.to_string(),
            r.false_alarms.to_string(),
            r.declared.to_string(),
            r.iterations.to_string(),
        ])?;
        self.trials.flush()?;
        self.timing.write_record([
            r.trial.to_string(),
            r.users.to_string(),
            r.ebn0_db.to_string(),
            format!("{:.6}", rec.wall_time.as_secs_f64()),
        ])?;
        self.timing.flush()?;
        if let Some(w) = &mut self.trace {
            for it in &rec.trace {
                let line = TraceLine { trial: r.trial, users: r.users, ebn0_db: r.ebn0_db, iteration: it };
                serde_json::to_writer(&mut *w, &line)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
        }
        self.rows += 1;
        Ok(())
    }
}

fn estimate_fields(e: &Estimate) -> [String; 3] {
    [e.value.to_string(), e.low.to_string(), e.high.to_string()]
}

pub fn plot_row(stats: &CampaignStats) -> Vec<String> {
    let mut row = vec![stats.users.to_string(), stats.ebn0_db.to_string(), stats.trials.to_string()];
    for e in [&stats.p_md, &stats.p_fa, &stats.p_e] {
        row.extend(estimate_fields(e));
    }
    row
}

pub fn write_plot(path: &Path, points: &[CampaignStats]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(PLOT_HEADER)?;
    for p in points {
        w.write_record(plot_row(p))?;
    }
    w.flush()
}

/// One search outcome in the summary.
#[derive(Debug, Clone, Serialize)]
pub struct SearchSummary {
    pub users: usize,
    pub target_pe: f64,
    /// Absent when the bracket did not straddle the target.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub required_ebn0_db: Option<f64>,
    pub bisections: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub steps: Vec<StepSummary>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct StepSummary {
    pub ebn0_db: f64,
    pub p_e: f64,
}

impl From<SearchStep> for StepSummary {
    fn from(s: SearchStep) -> Self {
        StepSummary { ebn0_db: s.ebn0_db, p_e: s.p_e }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub trials_schema: u32,
    pub mode: String,
    pub completed: bool,
    pub trials_written: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub point: Vec<CampaignStats>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub search: Vec<SearchSummary>,
}

pub fn write_summary(path: &Path, summary: &Summary) -> io::Result<()> {
    let text = toml::to_string(summary).map_err(io::Error::other)?;
    fs::write(path, text)
}

/// Paths of the files a run produces.
pub struct OutputPaths {
    pub dir: PathBuf,
}

impl OutputPaths {
    pub fn trials(&self) -> PathBuf {
        self.dir.join("trials.csv")
    }

    pub fn summary(&self) -> PathBuf {
        self.dir.join("summary.toml")
    }

    pub fn plot(&self) -> PathBuf {
        self.dir.join("plot.csv")
    }

    pub fn manifest(&self) -> PathBuf {
        self.dir.join("manifest.toml")
    }
}
