//! Iterative receiver: energy detection, pilot channel estimation, symbol
//! MMSE, list decoding, channel re-estimation from tentative codewords and
//! successive interference cancellation.

mod detect;
mod estimate;

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use thiserror::Error;

use crate::channel::{superimpose, Observation};
use crate::codebook::{phi_inverse, Codebook, SeqIndex};
use crate::linalg::{CMatrix, NotPositiveDefinite};
use crate::polar::{crc_select, Kernel, PolarSpec, SclDecoder};
use crate::transmitter::{rebuild_signal, symbols_from_info, Message};
use crate::SystemConfig;

pub use detect::{energy_detect, energy_statistics, top_columns, Detection};
pub use estimate::{
    estimate_channel_pilot, estimate_symbols, llrs_for_user, mmse_channel, pilot_rows, SymbolEstimates, GAIN_EPS,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReceiverError {
    #[error("observation is {got_n} x {got_m}, expected {n} x {m}")]
    Shape { got_n: usize, got_m: usize, n: usize, m: usize },
    #[error(transparent)]
    Linalg(#[from] NotPositiveDefinite),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverOptions {
    /// Number of messages to declare, `K`.
    pub users: usize,
    pub nopice_rounds: usize,
    pub max_sic_iters: usize,
    pub list_size: usize,
    pub prior_weight: f64,
    pub kernel: Kernel,
    pub trace: bool,
}

impl ReceiverOptions {
    pub fn from_config(config: &SystemConfig) -> Self {
        ReceiverOptions {
            users: config.users,
            nopice_rounds: config.nopice_rounds,
            max_sic_iters: config.max_sic_iters,
            list_size: config.list_size,
            prior_weight: config.symbol_prior.weight(),
            kernel: Kernel::MinSum,
            trace: false,
        }
    }
}

/// Hard decision for one detected column.
#[derive(Debug, Clone, PartialEq)]
pub struct UserDecision {
    pub index: SeqIndex,
    /// `B_c` information bits of the selected list entry.
    pub info: Vec<u8>,
    pub list_rank: usize,
    pub consistent: bool,
    /// Re-encoded transmit signal.
    pub signal: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedMessage {
    pub message: Message,
    pub index: SeqIndex,
    /// SIC iteration (from zero) in which it was declared.
    pub iteration: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IterationTrace {
    pub iteration: usize,
    pub detected: Vec<SeqIndex>,
    pub statistics: Vec<f64>,
    /// CRC outcome per detected column after the final decoding pass.
    pub consistent: Vec<bool>,
    pub new_messages: usize,
    pub declared: usize,
    /// `‖residual‖²` entering this iteration.
    pub residual_energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverOutput {
    pub messages: Vec<DecodedMessage>,
    pub iterations: usize,
    pub trace: Vec<IterationTrace>,
}

/// `Y − Σ_k x_k h_kᵀ`.
pub fn cancel(y: &Observation, signals: &[&[Complex64]], channels: &CMatrix) -> Observation {
    let mut out = y.clone();
    if signals.is_empty() {
        return out;
    }
    let est = superimpose(signals, channels, y.pilot_len());
    for (a, b) in out.matrix_mut().as_mut_slice().iter_mut().zip(est.matrix().as_slice()) {
        *a -= b;
    }
    out
}

/// Re-estimates every channel from the original observation given the
/// declared signals and removes their contribution.
pub fn sic_subtract(y: &Observation, signals: &[&[Complex64]], sigma2: f64) -> Result<Observation, NotPositiveDefinite> {
    if signals.is_empty() {
        return Ok(y.clone());
    }
    let x = stack(signals);
    let h = mmse_channel(&x, y.matrix().as_slice(), y.antennas(), sigma2)?;
    Ok(cancel(y, signals, &h))
}

fn stack(signals: &[&[Complex64]]) -> CMatrix {
    let n = signals[0].len();
    let mut x = CMatrix::zeros(signals.len(), n);
    for (k, s) in signals.iter().enumerate() {
        x.row_mut(k).copy_from_slice(s);
    }
    x
}

/// Channel estimate over all `n` channel uses from tentative signals.
pub fn nopice_pass(y: &Observation, decisions: &[UserDecision], sigma2: f64) -> Result<CMatrix, NotPositiveDefinite> {
    let views: Vec<&[Complex64]> = decisions.iter().map(|d| d.signal.as_slice()).collect();
    mmse_channel(&stack(&views), y.matrix().as_slice(), y.antennas(), sigma2)
}

pub struct Receiver<'a> {
    codebook: &'a Codebook,
    spec: &'a PolarSpec,
    options: ReceiverOptions,
    decoder: SclDecoder,
}

impl<'a> Receiver<'a> {
    pub fn new(codebook: &'a Codebook, spec: &'a PolarSpec, options: ReceiverOptions) -> Self {
        let decoder = SclDecoder::new(spec.code_len(), options.list_size, options.kernel);
        Receiver { codebook, spec, options, decoder }
    }

    pub fn options(&self) -> &ReceiverOptions {
        &self.options
    }

    fn decide(&mut self, est: &SymbolEstimates, k: usize, index: SeqIndex) -> UserDecision {
        let llr = llrs_for_user(est.user_symbols(k), est.user_gains(k), self.codebook.interleaver(index));
        let list = self.decoder.decode(&llr, self.codebook.frozen_column(index), self.spec);
        let sel = crc_select(&list, self.spec.crc());
        let symbols = symbols_from_info(&sel.info, index, self.codebook, self.spec);
        let signal = rebuild_signal(index, &symbols, self.codebook).expect("re-encoded symbols are QPSK").into_samples();
        UserDecision { index, info: sel.info, list_rank: sel.rank, consistent: sel.consistent, signal }
    }

    /// Decodes every detected column, reusing decisions already in `fixed`.
    pub fn decode_round(
        &mut self,
        est: &SymbolEstimates,
        indices: &[SeqIndex],
        fixed: &[Option<UserDecision>],
    ) -> Vec<UserDecision> {
        indices
            .iter()
            .enumerate()
            .map(|(k, &j)| match &fixed[k] {
                Some(d) => d.clone(),
                None => self.decide(est, k, j),
            })
            .collect()
    }

    fn message_of(&self, d: &UserDecision) -> Message {
        let mut bits = phi_inverse(d.index, self.codebook.shape().index_bits);
        bits.extend_from_slice(&d.info[..self.spec.payload_len()]);
        Message::new(bits).expect("binary bits")
    }

    pub fn decode(&mut self, y: &Observation, sigma2: f64) -> Result<ReceiverOutput, ReceiverError> {
        let shape = *self.codebook.shape();
        if y.channel_uses() != shape.channel_uses() || y.pilot_len() != shape.pilot_len {
            return Err(ReceiverError::Shape {
                got_n: y.channel_uses(),
                got_m: y.antennas(),
                n: shape.channel_uses(),
                m: y.antennas(),
            });
        }
        let m = y.antennas();
        let opts = self.options;
        let mut messages: Vec<DecodedMessage> = Vec::new();
        let mut declared_signals: Vec<Vec<Complex64>> = Vec::new();
        let mut trace = Vec::new();
        let mut residual = y.clone();
        let mut iterations = 0;

        for iter in 0..opts.max_sic_iters {
            let remaining = opts.users.saturating_sub(messages.len());
            if remaining == 0 {
                break;
            }
            iterations = iter + 1;
            let exclude: Vec<SeqIndex> = messages.iter().map(|d| d.index).collect();
            let det = energy_detect(&residual, self.codebook, remaining, &exclude);
            if det.indices.is_empty() {
                break;
            }
            let idx = &det.indices;
            let h = estimate_channel_pilot(residual.pilot_rows(), m, &pilot_rows(self.codebook, idx), sigma2)?;
            let mut est =
                estimate_symbols(residual.payload_rows(), m, self.codebook, idx, &h, sigma2, opts.prior_weight)?;

            let mut fixed: Vec<Option<UserDecision>> = vec![None; idx.len()];
            for _ in 0..opts.nopice_rounds {
                let decisions = self.decode_round(&est, idx, &fixed);
                for (f, d) in fixed.iter_mut().zip(&decisions) {
                    if d.consistent {
                        *f = Some(d.clone());
                    }
                }
                let h = nopice_pass(&residual, &decisions, sigma2)?;
                est = estimate_symbols(residual.payload_rows(), m, self.codebook, idx, &h, sigma2, opts.prior_weight)?;
            }
            let decisions = self.decode_round(&est, idx, &fixed);

            let mut new = 0;
            for d in decisions.iter().filter(|d| d.consistent) {
                if messages.len() >= opts.users {
                    break;
                }
                let message = self.message_of(d);
                if messages.iter().any(|p| p.message == message) {
                    continue;
                }
                messages.push(DecodedMessage { message, index: d.index, iteration: iter });
                declared_signals.push(d.signal.clone());
                new += 1;
            }
            if opts.trace {
                trace.push(IterationTrace {
                    iteration: iter,
                    detected: det.indices.clone(),
                    statistics: det.statistics.clone(),
                    consistent: decisions.iter().map(|d| d.consistent).collect(),
                    new_messages: new,
                    declared: messages.len(),
                    residual_energy: residual.energy(),
                });
            }
            if new == 0 || messages.len() >= opts.users {
                break;
            }
            let views: Vec<&[Complex64]> = declared_signals.iter().map(|s| s.as_slice()).collect();
            residual = sic_subtract(y, &views, sigma2)?;
        }
        Ok(ReceiverOutput { messages, iterations, trace })
    }
}

/// One-shot convenience wrapper around [`Receiver`].
pub fn decode_all(
    y: &Observation,
    codebook: &Codebook,
    spec: &PolarSpec,
    config: &SystemConfig,
    sigma2: f64,
) -> Result<ReceiverOutput, ReceiverError> {
    Receiver::new(codebook, spec, ReceiverOptions::from_config(config)).decode(y, sigma2)
}
