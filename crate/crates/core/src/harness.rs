//! Monte Carlo trials, error-rate estimation and the required-Eb/N0 search.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use rand::Rng;
use thiserror::Error;

use crate::channel::{sigma2_from_ebn0, transmit, ChannelRealization};
use crate::codebook::Codebook;
use crate::polar::PolarSpec;
use crate::receiver::{Receiver, ReceiverError, ReceiverOptions, ReceiverOutput};
use crate::rng::{stream, trial_seed, Stream};
use crate::transmitter::{encode_message, Message};
use crate::SystemConfig;

/// Scored outcome of one trial.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrialResult {
    pub trial: u64,
    pub seed: u64,
    pub ebn0_db: f64,
    pub users: usize,
    /// Transmitted messages absent from the declared list.
    pub missed: usize,
    /// Declared messages that were never transmitted.
    pub false_alarms: usize,
    pub declared: usize,
    pub iterations: usize,
}

impl TrialResult {
    pub fn miss_ratio(&self) -> f64 {
        self.missed as f64 / self.users as f64
    }

    /// `n_fa / K̂` with `0 / 0 = 0`.
    pub fn false_alarm_ratio(&self) -> f64 {
        if self.declared == 0 {
            0.0
        } else {
            self.false_alarms as f64 / self.declared as f64
        }
    }
}

/// `K` messages; exact duplicates are redrawn unless the config allows them.
pub fn draw_messages<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> Vec<Message> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(config.users);
    while out.len() < config.users {
        let bits: Vec<u8> = (0..config.message_bits).map(|_| rng.random_range(0..2u8)).collect();
        if config.allow_duplicate_messages || seen.insert(bits.clone()) {
            out.push(Message::new(bits).expect("binary bits"));
        }
    }
    out
}

/// `(missed, false_alarms)` by set comparison.
pub fn score(transmitted: &[Message], declared: &[Message]) -> (usize, usize) {
    let tx: BTreeSet<&Message> = transmitted.iter().collect();
    let rx: BTreeSet<&Message> = declared.iter().collect();
    let missed = transmitted.iter().filter(|m| !rx.contains(m)).count();
    let false_alarms = declared.iter().filter(|m| !tx.contains(m)).count();
    (missed, false_alarms)
}

/// Everything one trial needs besides its index.
pub struct TrialSetup<'a> {
    pub config: &'a SystemConfig,
    pub codebook: &'a Codebook,
    pub spec: &'a PolarSpec,
    pub options: ReceiverOptions,
}

impl<'a> TrialSetup<'a> {
    pub fn new(config: &'a SystemConfig, codebook: &'a Codebook, spec: &'a PolarSpec) -> Self {
        TrialSetup { config, codebook, spec, options: ReceiverOptions::from_config(config) }
    }

    /// Runs trial `trial` of the campaign keyed by `config.seed`, returning
    /// the scored result and the raw receiver output.
    pub fn run_detailed(&self, ebn0_db: f64, trial: u64) -> Result<(TrialResult, ReceiverOutput), ReceiverError> {
        let config = self.config;
        let seed = trial_seed(config.seed, trial);
        let messages = draw_messages(config, &mut stream(seed, Stream::Messages));
        let signals: Vec<_> = messages
            .iter()
            .map(|m| encode_message(m, self.codebook, self.spec).expect("message matches config"))
            .collect();
        let channel = ChannelRealization::draw(config.users, config.antennas, &mut stream(seed, Stream::Fading));
        let sigma2 = sigma2_from_ebn0(ebn0_db, config.message_bits);
        let y = transmit(&signals, &channel, sigma2, &mut stream(seed, Stream::Noise));
        let out = Receiver::new(self.codebook, self.spec, self.options).decode(&y, sigma2)?;
        let declared: Vec<Message> = out.messages.iter().map(|d| d.message.clone()).collect();
        let (missed, false_alarms) = score(&messages, &declared);
        let result = TrialResult {
            trial,
            seed,
            ebn0_db,
            users: config.users,
            missed,
            false_alarms,
            declared: declared.len(),
            iterations: out.iterations,
        };
        Ok((result, out))
    }

    pub fn run(&self, ebn0_db: f64, trial: u64) -> Result<TrialResult, ReceiverError> {
        self.run_detailed(ebn0_db, trial).map(|r| r.0)
    }
}

/// Wilson score interval at 95 % for `successes` out of `n`.
pub fn wilson_interval(successes: f64, n: f64) -> (f64, f64) {
    const Z: f64 = 1.959_963_984_540_054;
    if n <= 0.0 {
        return (0.0, 1.0);
    }
    let p = successes / n;
    let z2 = Z * Z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z * libm::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Estimate {
    pub value: f64,
    pub low: f64,
    pub high: f64,
}

/// Aggregated error rates over a set of trials.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CampaignStats {
    pub trials: usize,
    pub users: usize,
    pub ebn0_db: f64,
    pub p_md: Estimate,
    pub p_fa: Estimate,
    /// `P_md + P_fa`; the interval adds the component bounds.
    pub p_e: Estimate,
    pub missed: usize,
    pub false_alarms: usize,
    pub declared: usize,
}

impl CampaignStats {
    /// # Panics
    /// On an empty slice.
    pub fn from_trials(results: &[TrialResult]) -> Self {
        assert!(!results.is_empty(), "no trials");
        let n = results.len() as f64;
        let users = results[0].users;
        let missed: usize = results.iter().map(|r| r.missed).sum();
        let false_alarms: usize = results.iter().map(|r| r.false_alarms).sum();
        let declared: usize = results.iter().map(|r| r.declared).sum();
        let md = results.iter().map(|r| r.miss_ratio()).sum::<f64>() / n;
        let fa = results.iter().map(|r| r.false_alarm_ratio()).sum::<f64>() / n;
        let total_users: usize = results.iter().map(|r| r.users).sum();
        let (md_lo, md_hi) = wilson_interval(missed as f64, total_users as f64);
        let (fa_lo, fa_hi) = wilson_interval(false_alarms as f64, declared as f64);
        let fa_est = if declared == 0 {
            Estimate { value: 0.0, low: 0.0, high: 0.0 }
        } else {
            Estimate { value: fa, low: fa_lo.min(fa), high: fa_hi.max(fa) }
        };
        let md_est = Estimate { value: md, low: md_lo.min(md), high: md_hi.max(md) };
        CampaignStats {
            trials: results.len(),
            users,
            ebn0_db: results[0].ebn0_db,
            p_md: md_est,
            p_fa: fa_est,
            p_e: Estimate {
                value: md + fa,
                low: md_est.low + fa_est.low,
                high: md_est.high + fa_est.high,
            },
            missed,
            false_alarms,
            declared,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError<E> {
    #[error("bracket [{low_db}, {high_db}] dB does not straddle the target (P_e {low_pe} and {high_pe})")]
    Bracket { low_db: f64, high_db: f64, low_pe: f64, high_pe: f64 },
    #[error("invalid bracket or tolerance")]
    Invalid,
    #[error("campaign failed: {0}")]
    Campaign(E),
}

/// One evaluated point of the search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchStep {
    pub ebn0_db: f64,
    pub p_e: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    /// Upper end of the final bracket.
    pub ebn0_db: f64,
    pub bisections: usize,
    pub steps: Vec<SearchStep>,
}

/// Bisection for the smallest Eb/N0 meeting `P_e ≤ target`, assuming
/// `P_e` decreases with Eb/N0. `evaluate` returns the campaign `P_e` at a
/// point.
pub fn find_required_ebn0<E>(
    target_pe: f64,
    bracket_db: (f64, f64),
    tol_db: f64,
    mut evaluate: impl FnMut(f64) -> Result<f64, E>,
) -> Result<SearchResult, SearchError<E>> {
    let (mut lo, mut hi) = bracket_db;
    if !(lo < hi) || !(tol_db > 0.0) {
        return Err(SearchError::Invalid);
    }
    let mut steps = Vec::new();
    let lo_pe = evaluate(lo).map_err(SearchError::Campaign)?;
    steps.push(SearchStep { ebn0_db: lo, p_e: lo_pe });
    let hi_pe = evaluate(hi).map_err(SearchError::Campaign)?;
    steps.push(SearchStep { ebn0_db: hi, p_e: hi_pe });
    if !(lo_pe > target_pe && hi_pe <= target_pe) {
        return Err(SearchError::Bracket { low_db: lo, high_db: hi, low_pe: lo_pe, high_pe: hi_pe });
    }
    let mut bisections = 0;
    while hi - lo > tol_db {
        let mid = 0.5 * (lo + hi);
        let pe = evaluate(mid).map_err(SearchError::Campaign)?;
        steps.push(SearchStep { ebn0_db: mid, p_e: pe });
        if pe <= target_pe {
            hi = mid;
        } else {
            lo = mid;
        }
        bisections += 1;
    }
    Ok(SearchResult { ebn0_db: hi, bisections, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn msg(bits: &[u8]) -> Message {
        Message::new(bits.to_vec()).unwrap()
    }

    fn result(missed: usize, fa: usize, declared: usize) -> TrialResult {
        TrialResult { trial: 0, seed: 0, ebn0_db: 0.0, users: 10, missed, false_alarms: fa, declared, iterations: 1 }
    }

    #[test]
    fn scoring_matches_set_difference() {
        let tx = vec![msg(&[0, 0]), msg(&[0, 1]), msg(&[1, 0])];
        let rx = vec![msg(&[0, 1]), msg(&[1, 1])];
        assert_eq!(score(&tx, &rx), (2, 1));
        assert_eq!(score(&tx, &[]), (3, 0));
        assert_eq!(score(&tx, &tx), (0, 0));
    }

    #[test]
    fn single_trial_stats_are_its_ratios() {
        let s = CampaignStats::from_trials(&[result(2, 1, 9)]);
        assert_eq!(s.p_md.value, 0.2);
        assert!((s.p_fa.value - 1.0 / 9.0).abs() < 1e-15);
        assert_eq!(s.p_e.value, s.p_md.value + s.p_fa.value);
        let empty = CampaignStats::from_trials(&[result(10, 0, 0)]);
        assert_eq!((empty.p_md.value, empty.p_fa.value, empty.p_e.value), (1.0, 0.0, 1.0));
    }

    #[test]
    fn wilson_reference_values() {
        // 0 of 25: upper bound z²/(n + z²).
        let (lo, hi) = wilson_interval(0.0, 25.0);
        assert!(lo < 1e-12);
        assert!((hi - 0.133_2).abs() < 1e-4);
        let (lo, hi) = wilson_interval(5.0, 100.0);
        assert!((lo - 0.021_5).abs() < 1e-4 && (hi - 0.111_8).abs() < 1e-4, "{lo} {hi}");
    }

    #[test]
    fn messages_are_distinct_by_default() {
        let mut c = SystemConfig::smoke();
        c.message_bits = 11;
        c.index_bits = 4;
        c.users = 100;
        let m = draw_messages(&c, &mut stream(1, Stream::Messages));
        let set: BTreeSet<_> = m.iter().collect();
        assert_eq!(set.len(), 100);
        c.allow_duplicate_messages = true;
        c.message_bits = 5;
        let m = draw_messages(&c, &mut stream(1, Stream::Messages));
        assert_eq!(m.len(), 100);
    }

    #[test]
    fn bisection_on_a_step() {
        let r = find_required_ebn0::<()>(0.05, (-4.0, 8.0), 0.5, |x| Ok(if x >= 1.3 { 0.0 } else { 1.0 })).unwrap();
        assert!(r.bisections <= 5);
        assert!(r.ebn0_db >= 1.3 && r.ebn0_db - 1.3 <= 0.5);
        let err = find_required_ebn0::<()>(0.05, (-4.0, 8.0), 0.5, |_| Ok(0.01)).unwrap_err();
        assert!(matches!(err, SearchError::Bracket { .. }));
    }

    #[test]
    fn high_snr_smoke_trial_is_clean_and_repeatable() {
        let c = SystemConfig::smoke();
        let cb = Codebook::generate(&c).unwrap();
        let spec = PolarSpec::from_config(&c);
        let setup = TrialSetup::new(&c, &cb, &spec);
        let a = setup.run(10.0, 3).unwrap();
        assert_eq!((a.missed, a.false_alarms), (0, 0));
        assert_eq!(a, setup.run(10.0, 3).unwrap());
    }
}
