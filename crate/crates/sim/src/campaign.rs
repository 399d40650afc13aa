//! Parallel execution of seeded trials.
//!
//! Trials run in chunks on a rayon pool; each chunk is written to the sink
//! in trial order once it completes, so the output does not depend on the
//! number of workers. A stop flag is checked before every trial; trials
//! already finished when it is raised are still written.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Instant;

use fasura_core::harness::TrialSetup;
use fasura_core::receiver::ReceiverError;
use fasura_core::{CampaignStats, TrialResult};
use rayon::prelude::*;
use thiserror::Error;

use crate::output::{TrialRecord, TrialSink};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("receiver failed on trial {trial}: {source}")]
    Receiver { trial: u64, source: ReceiverError },
    #[error("interrupted after {completed} trials")]
    Interrupted { completed: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

pub struct Runner {
    pool: rayon::ThreadPool,
    workers: usize,
    stop: Arc<AtomicBool>,
    trace: bool,
}

impl Runner {
    pub fn new(workers: usize, trace: bool) -> Result<Self, RunError> {
        let workers = workers.max(1);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
        Ok(Runner { pool, workers, stop: Arc::new(AtomicBool::new(false)), trace })
    }

    /// Flag that makes running campaigns stop starting new trials.
    pub fn stop_flag(&self) -> Arc<AtomicBool> {
        Arc::clone(&self.stop)
    }

    fn run_one(&self, setup: &TrialSetup<'_>, ebn0_db: f64, trial: u64) -> Option<Result<TrialRecord, RunError>> {
        if self.stop.load(Ordering::Relaxed) {
            return None;
        }
        let start = Instant::now();
        let mut setup_t = TrialSetup { options: setup.options, ..*setup };
        setup_t.options.trace = self.trace;
        Some(
            setup_t
                .run_detailed(ebn0_db, trial)
                .map(|(result, out)| TrialRecord { result, wall_time: start.elapsed(), trace: out.trace })
                .map_err(|source| RunError::Receiver { trial, source }),
        )
    }

    /// Runs trials `first..first + count` at `ebn0_db`, writing each to
    /// `sink`, and returns their results in trial order.
    pub fn campaign(
        &self,
        setup: &TrialSetup<'_>,
        ebn0_db: f64,
        first: u64,
        count: usize,
        sink: &mut TrialSink,
    ) -> Result<Vec<TrialResult>, RunError> {
        let mut results = Vec::with_capacity(count);
        let chunk = self.workers as u64;
        let end = first + count as u64;
        let mut start = first;
        while start < end {
            let stop = (start + chunk).min(end);
            let batch: Vec<Option<Result<TrialRecord, RunError>>> =
                self.pool.install(|| (start..stop).into_par_iter().map(|t| self.run_one(setup, ebn0_db, t)).collect());
            let mut interrupted = false;
            for item in batch {
                match item {
                    Some(Ok(rec)) => {
                        sink.record(&rec)?;
                        results.push(rec.result);
                    }
                    Some(Err(e)) => return Err(e),
                    None => interrupted = true,
                }
            }
            if interrupted || self.stop.load(Ordering::Relaxed) {
                return Err(RunError::Interrupted { completed: results.len() });
            }
            start = stop;
        }
        Ok(results)
    }

    /// Campaign statistics at one point.
    pub fn stats(
        &self,
        setup: &TrialSetup<'_>,
        ebn0_db: f64,
        first: u64,
        count: usize,
        sink: &mut TrialSink,
    ) -> Result<CampaignStats, RunError> {
        let results = self.campaign(setup, ebn0_db, first, count, sink)?;
        Ok(CampaignStats::from_trials(&results))
    }
}
