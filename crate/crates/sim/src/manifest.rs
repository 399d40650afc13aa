//! Run manifests: the full system configuration plus what to run and where
//! to write it. Stored as TOML.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fasura_core::config::{crc_len_for_users, ConfigError};
use fasura_core::SystemConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Users covered by the `full-k*` presets.
pub const FULL_USER_POINTS: [usize; 5] = [100, 200, 300, 400, 500];

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("unknown preset `{0}` (expected smoke or full-k100 .. full-k500)")]
    Preset(String),
    #[error("invalid sweep `{0}`: expected start:step:end with step > 0 and end >= start")]
    Sweep(String),
    #[error("invalid bracket `{0}`: expected low:high with low < high")]
    Bracket(String),
    #[error("mode `{0}` needs {1}")]
    Missing(Mode, &'static str),
    #[error("trials must be at least 1")]
    Trials,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error(transparent)]
    Emit(#[from] toml::ser::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Trial,
    Campaign,
    Sweep,
    FindEbn0,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Trial => "trial",
            Mode::Campaign => "campaign",
            Mode::Sweep => "sweep",
            Mode::FindEbn0 => "find-ebn0",
        })
    }
}

/// Inclusive Eb/N0 grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub start: f64,
    pub step: f64,
    pub end: f64,
}

impl Sweep {
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.end - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.start + i as f64 * self.step).collect()
    }
}

impl FromStr for Sweep {
    type Err = ManifestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ManifestError::Sweep(s.to_string());
        let parts: Vec<f64> = s.split(':').map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
        let [start, step, end] = parts[..] else { return Err(bad()) };
        if !(step > 0.0) || !(end >= start) || !start.is_finite() || !end.is_finite() {
            return Err(bad());
        }
        Ok(Sweep { start, step, end })
    }
}

/// Bisection settings for the required Eb/N0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Search {
    pub target_pe: f64,
    pub low_db: f64,
    pub high_db: f64,
    pub tol_db: f64,
}

impl Default for Search {
    fn default() -> Self {
        Search { target_pe: 0.05, low_db: -14.0, high_db: -8.0, tol_db: 0.1 }
    }
}

pub fn parse_bracket(s: &str) -> Result<(f64, f64), ManifestError> {
    let bad = || ManifestError::Bracket(s.to_string());
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let lo: f64 = a.trim().parse().map_err(|_| bad())?;
    let hi: f64 = b.trim().parse().map_err(|_| bad())?;
    if !(lo < hi) {
        return Err(bad());
    }
    Ok((lo, hi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub mode: Mode,
    /// Trials per campaign, or the number of trials in a single campaign.
    pub trials: usize,
    /// Index of the first trial; trial `t` draws from the seed ladder at `t`.
    #[serde(default)]
    pub first_trial: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ebn0_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<Search>,
    /// Extra user counts for a find-ebn0 run; the CRC length follows each.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub users_sweep: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    #[serde(default)]
    pub trace: bool,
    /// Worker threads; does not affect results.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    pub config: SystemConfig,
}

impl RunManifest {
    pub fn new(config: SystemConfig) -> Self {
        RunManifest {
            mode: Mode::Campaign,
            trials: 25,
            first_trial: 0,
            ebn0_db: None,
            sweep: None,
            search: None,
            users_sweep: Vec::new(),
            out_dir: None,
            cache_dir: None,
            trace: false,
            workers: None,
            config,
        }
    }

    pub fn preset(name: &str) -> Result<Self, ManifestError> {
        if name == "smoke" {
            return Ok(Self::new(SystemConfig::smoke()));
        }
        let users = name
            .strip_prefix("full-k")
            .and_then(|k| k.parse::<usize>().ok())
            .filter(|k| FULL_USER_POINTS.contains(k))
            .ok_or_else(|| ManifestError::Preset(name.to_string()))?;
        Ok(Self::new(SystemConfig::full(users)))
    }

    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ManifestError> {
        toml::from_str(text).map_err(|source| ManifestError::Parse { path: path.to_path_buf(), source })
    }

    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> Result<String, ManifestError> {
        Ok(toml::to_string(self)?)
    }

    /// Sets `K` and the CRC length that goes with it.
    pub fn set_users(&mut self, users: usize) {
        self.config.users = users;
        self.config.crc_len = crc_len_for_users(users);
    }

    /// Checks that the manifest describes a runnable job.
    pub fn validate(&self) -> Result<(), ManifestError> {
        self.config.validate()?;
        if self.trials == 0 {
            return Err(ManifestError::Trials);
        }
        match self.mode {
            Mode::Trial | Mode::Campaign if self.ebn0_db.is_none() => Err(ManifestError::Missing(self.mode, "an Eb/N0 (--ebn0)")),
            Mode::Sweep if self.sweep.is_none() => Err(ManifestError::Missing(self.mode, "a grid (--sweep)")),
            _ => Ok(()),
        }
    }

    /// User counts a find-ebn0 run covers, the configured one first.
    pub fn search_users(&self) -> Vec<usize> {
        let mut users = vec![self.config.users];
        for &k in &self.users_sweep {
            if !users.contains(&k) {
                users.push(k);
            }
        }
        users
    }
}
