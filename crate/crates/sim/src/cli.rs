//! Command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::Ordering;

use clap::Parser;
use fasura_core::harness::{find_required_ebn0, SearchError, TrialSetup};
use fasura_core::{CampaignStats, PolarSpec};

use crate::cache;
use crate::campaign::{RunError, Runner};
use crate::manifest::{parse_bracket, Mode, RunManifest, Search, Sweep};
use crate::output::{self, OutputPaths, SearchSummary, Summary, TrialSink, TRIALS_SCHEMA};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "FASURA_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "fasura-out";

#[derive(Debug, Parser)]
#[command(name = "fasura", version, about = "Unsourced random access link simulator for fading massive MIMO")]
pub struct Args {
    /// Built-in configuration: smoke, full-k100, full-k200, .., full-k500.
    #[arg(long, conflicts_with = "config")]
    pub preset: Option<String>,
    /// Manifest file (TOML); flags override its values.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Eb/N0 in dB for trial and campaign modes.
    #[arg(long, value_name = "DB", allow_negative_numbers = true)]
    pub ebn0: Option<f64>,
    /// Eb/N0 grid `start:step:end` in dB; implies sweep mode.
    #[arg(long, value_name = "GRID", allow_hyphen_values = true)]
    pub sweep: Option<String>,
    #[arg(long, value_name = "N")]
    pub trials: Option<usize>,
    /// First trial index (trial mode runs only this one).
    #[arg(long, value_name = "T")]
    pub first_trial: Option<u64>,
    /// Master seed for the codebook and the trial seed ladder.
    #[arg(long, value_name = "S")]
    pub seed: Option<u64>,
    /// Active users K; the CRC length follows unless --crc-len is given.
    #[arg(long, value_name = "K")]
    pub users: Option<usize>,
    #[arg(long, value_name = "BITS")]
    pub crc_len: Option<usize>,
    /// Worker threads; results do not depend on it.
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,
    /// Disable channel re-estimation from tentative codewords.
    #[arg(long, conflicts_with = "nopice_rounds")]
    pub no_nopice: bool,
    #[arg(long, value_name = "R")]
    pub nopice_rounds: Option<usize>,
    /// Output directory (default: $FASURA_OUT_DIR, else ./fasura-out).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Write per-iteration receiver traces to trace.jsonl.
    #[arg(long)]
    pub trace: bool,
    /// Directory for cached codebooks.
    #[arg(long, value_name = "DIR")]
    pub cache_dir: Option<PathBuf>,
    /// find-ebn0: target P_e.
    #[arg(long, value_name = "P")]
    pub target_pe: Option<f64>,
    /// find-ebn0: initial bracket `low:high` in dB.
    #[arg(long, value_name = "LOW:HIGH", allow_hyphen_values = true)]
    pub bracket: Option<String>,
    /// find-ebn0: stop when the bracket is this narrow (dB).
    #[arg(long, value_name = "DB")]
    pub tol: Option<f64>,
    /// find-ebn0: additional user counts, comma separated.
    #[arg(long, value_name = "K,..", value_delimiter = ',')]
    pub users_sweep: Vec<usize>,
    /// Print the resolved manifest and exit.
    #[arg(long)]
    pub print_manifest: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Manifest(#[from] crate::manifest::ManifestError),
    #[error(transparent)]
    Cache(#[from] cache::CacheError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

/// Builds the manifest from an optional file or preset, then applies flags.
pub fn resolve(args: &Args) -> Result<RunManifest, CliError> {
    let mut m = match (&args.config, &args.preset) {
        (Some(path), _) => RunManifest::load(path)?,
        (None, Some(p)) => RunManifest::preset(p)?,
        (None, None) => RunManifest::preset("smoke")?,
    };
    if let Some(k) = args.users {
        m.set_users(k);
    }
    if let Some(c) = args.crc_len {
        m.config.crc_len = c;
    }
    if let Some(s) = args.seed {
        m.config.seed = s;
    }
    if args.no_nopice {
        m.config.nopice_rounds = 0;
    }
    if let Some(r) = args.nopice_rounds {
        m.config.nopice_rounds = r;
    }
    if let Some(db) = args.ebn0 {
        m.ebn0_db = Some(db);
    }
    if let Some(s) = &args.sweep {
        m.sweep = Some(s.parse::<Sweep>()?);
        if args.mode.is_none() {
            m.mode = Mode::Sweep;
        }
    }
    if let Some(mode) = args.mode {
        m.mode = mode;
    }
    if let Some(t) = args.trials {
        m.trials = t;
    }
    if let Some(t) = args.first_trial {
        m.first_trial = t;
    }
    if m.mode == Mode::FindEbn0 || args.target_pe.is_some() || args.bracket.is_some() || args.tol.is_some() {
        let mut s = m.search.unwrap_or_default();
        if let Some(p) = args.target_pe {
            s.target_pe = p;
        }
        if let Some(b) = &args.bracket {
            (s.low_db, s.high_db) = parse_bracket(b)?;
        }
        if let Some(t) = args.tol {
            s.tol_db = t;
        }
        m.search = Some(s);
    }
    if !args.users_sweep.is_empty() {
        m.users_sweep = args.users_sweep.clone();
    }
    if let Some(w) = args.workers {
        m.workers = Some(w);
    }
    if args.trace {
        m.trace = true;
    }
    if let Some(d) = &args.cache_dir {
        m.cache_dir = Some(d.clone());
    }
    if let Some(o) = &args.out {
        m.out_dir = Some(o.clone());
    }
    if m.mode == Mode::Trial {
        m.trials = 1;
    }
    m.validate()?;
    Ok(m)
}

fn output_dir(m: &RunManifest) -> PathBuf {
    m.out_dir
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

struct Outcome {
    points: Vec<CampaignStats>,
    searches: Vec<SearchSummary>,
    error: Option<RunError>,
}

fn run_search(
    m: &RunManifest,
    search: Search,
    runner: &Runner,
    sink: &mut TrialSink,
    out: &mut Outcome,
) -> Result<(), CliError> {
    for users in m.search_users() {
        let mut config = m.config.clone();
        if users != config.users {
            config.users = users;
            config.crc_len = fasura_core::config::crc_len_for_users(users);
        }
        let codebook = cache::load_or_generate(m.cache_dir.as_deref(), &config)?;
        let spec = PolarSpec::from_config(&config);
        let setup = TrialSetup::new(&config, &codebook, &spec);
        let mut evaluated: Vec<CampaignStats> = Vec::new();
        let res = find_required_ebn0(search.target_pe, (search.low_db, search.high_db), search.tol_db, |db| {
            let s = runner.stats(&setup, db, m.first_trial, m.trials, sink)?;
            let pe = s.p_e.value;
            evaluated.push(s);
            Ok::<f64, RunError>(pe)
        });
        let mut summary = SearchSummary {
            users,
            target_pe: search.target_pe,
            required_ebn0_db: None,
            bisections: 0,
            error: None,
            steps: evaluated.iter().map(|s| output::StepSummary { ebn0_db: s.ebn0_db, p_e: s.p_e.value }).collect(),
        };
        match res {
            Ok(r) => {
                summary.required_ebn0_db = Some(r.ebn0_db);
                summary.bisections = r.bisections;
                if let Some(s) = evaluated.iter().find(|s| s.ebn0_db == r.ebn0_db) {
                    out.points.push(s.clone());
                }
                eprintln!("K = {users}: required Eb/N0 {:.3} dB after {} bisections", r.ebn0_db, r.bisections);
            }
            Err(SearchError::Campaign(e)) => {
                out.searches.push(summary);
                out.error = Some(e);
                return Ok(());
            }
            Err(e) => {
                eprintln!("K = {users}: {e}");
                summary.error = Some(e.to_string());
            }
        }
        out.searches.push(summary);
    }
    Ok(())
}

fn execute(m: &RunManifest, runner: &Runner, sink: &mut TrialSink) -> Result<Outcome, CliError> {
    let mut out = Outcome { points: Vec::new(), searches: Vec::new(), error: None };
    match m.mode {
        Mode::Trial | Mode::Campaign | Mode::Sweep => {
            let codebook = cache::load_or_generate(m.cache_dir.as_deref(), &m.config)?;
            let spec = PolarSpec::from_config(&m.config);
            let setup = TrialSetup::new(&m.config, &codebook, &spec);
            let grid = match m.mode {
                Mode::Sweep => m.sweep.expect("validated").points(),
                _ => vec![m.ebn0_db.expect("validated")],
            };
            for db in grid {
                match runner.stats(&setup, db, m.first_trial, m.trials, sink) {
                    Ok(s) => {
                        eprintln!(
                            "K = {} Eb/N0 = {db} dB: P_md {:.4} P_fa {:.4} P_e {:.4} [{:.4}, {:.4}] over {} trials",
                            s.users, s.p_md.value, s.p_fa.value, s.p_e.value, s.p_e.low, s.p_e.high, s.trials
                        );
                        out.points.push(s);
                    }
                    Err(e) => {
                        out.error = Some(e);
                        break;
                    }
                }
            }
        }
        Mode::FindEbn0 => {
            let search = m.search.unwrap_or_default();
            run_search(m, search, runner, sink, &mut out)?;
        }
    }
    Ok(out)
}

/// Runs a resolved manifest, writing every output file into its directory.
pub fn run_manifest(m: &RunManifest, install_handler: bool) -> Result<PathBuf, CliError> {
    let dir = output_dir(m);
    let paths = OutputPaths { dir: dir.clone() };
    let mut sink = TrialSink::create(&dir, m.trace)?;
    std::fs::write(paths.manifest(), m.to_toml()?)?;
    let runner = Runner::new(m.workers.unwrap_or(1), m.trace)?;
    if install_handler {
        let flag = runner.stop_flag();
        // A second handler cannot be installed; campaigns then run to completion.
        let _ = ctrlc::set_handler(move || {
            eprintln!("interrupt: finishing running trials");
            flag.store(true, Ordering::Relaxed);
        });
    }
    let out = execute(m, &runner, &mut sink)?;
    let summary = Summary {
        trials_schema: TRIALS_SCHEMA,
        mode: m.mode.to_string(),
        completed: out.error.is_none(),
        trials_written: sink.rows(),
        point: out.points.clone(),
        search: out.searches,
    };
    output::write_summary(&paths.summary(), &summary)?;
    if matches!(m.mode, Mode::Sweep | Mode::FindEbn0) {
        output::write_plot(&paths.plot(), &out.points)?;
    }
    match out.error {
        Some(e) => Err(e.into()),
        None => Ok(dir),
    }
}

pub fn run(args: Args) -> Result<PathBuf, CliError> {
    let m = resolve(&args)?;
    if args.print_manifest {
        print!("{}", m.to_toml()?);
        return Ok(PathBuf::new());
    }
    run_manifest(&m, true)
}

pub fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(dir) => {
            if dir != Path::new("") {
                eprintln!("results in {}", dir.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Run(RunError::Interrupted { .. }) => ExitCode::from(130),
                _ => ExitCode::from(2),
            }
        }
    }
}
