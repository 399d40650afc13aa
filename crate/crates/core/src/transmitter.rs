//! Per-user encoder: index selection, CRC-aided polar coset code,
//! interleaving, QPSK, pilot insertion and spreading.

use alloc::vec::Vec;

use num_complex::Complex64;
use thiserror::Error;

use crate::codebook::{interleave, phi, Codebook, SeqIndex};
use crate::polar::{polar_encode, qpsk_modulate, PolarSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransmitError {
    #[error("message has {got} bits, expected {expected}")]
    MessageLength { got: usize, expected: usize },
    #[error("non-binary message bit at {0}")]
    NonBinary(usize),
    #[error("expected {expected} coded symbols, got {got}")]
    SymbolCount { got: usize, expected: usize },
    #[error("symbol {0} is not in the QPSK alphabet")]
    NotQpsk(usize),
}

/// A `B`-bit message; the first `B_f` bits pick the codebook column.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Message(Vec<u8>);

impl Message {
    pub fn new(bits: Vec<u8>) -> Result<Self, TransmitError> {
        if let Some(i) = bits.iter().position(|&b| b > 1) {
            return Err(TransmitError::NonBinary(i));
        }
        Ok(Message(bits))
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `(m_f, m_s)`.
    pub fn split(&self, index_bits: usize) -> (&[u8], &[u8]) {
        self.0.split_at(index_bits)
    }

    pub fn index(&self, index_bits: usize) -> SeqIndex {
        phi(&self.0[..index_bits])
    }
}

/// The `n` channel-use signal of one user: pilot column then `T` spread symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitSignal {
    samples: Vec<Complex64>,
    pilot_len: usize,
}

impl TransmitSignal {
    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn pilot(&self) -> &[Complex64] {
        &self.samples[..self.pilot_len]
    }

    pub fn payload(&self) -> &[Complex64] {
        &self.samples[self.pilot_len..]
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }
}

/// Polar-codes `payload ‖ crc` with the frozen values of `index`, interleaves
/// with `π_index` and maps to `T` QPSK symbols.
///
/// # Panics
/// If `payload` does not have `spec.payload_len()` bits.
pub fn coded_symbols(payload: &[u8], index: SeqIndex, codebook: &Codebook, spec: &PolarSpec) -> Vec<Complex64> {
    assert_eq!(payload.len(), spec.payload_len(), "payload length");
    symbols_from_info(&spec.crc().append(payload), index, codebook, spec)
}

/// Same chain from the full `B_c` information word, CRC included, which need
/// not be CRC-consistent.
pub fn symbols_from_info(info: &[u8], index: SeqIndex, codebook: &Codebook, spec: &PolarSpec) -> Vec<Complex64> {
    let code = polar_encode(info, codebook.frozen_column(index), spec);
    qpsk_modulate(&interleave(&code, codebook.interleaver(index)))
}

pub fn encode_message(message: &Message, codebook: &Codebook, spec: &PolarSpec) -> Result<TransmitSignal, TransmitError> {
    let shape = codebook.shape();
    let expected = shape.index_bits + spec.payload_len();
    if message.len() != expected {
        return Err(TransmitError::MessageLength { got: message.len(), expected });
    }
    let (_, m_s) = message.split(shape.index_bits);
    let index = message.index(shape.index_bits);
    let symbols = coded_symbols(m_s, index, codebook, spec);
    rebuild_signal(index, &symbols, codebook)
}

/// `[p_j ; s_1 a_{1,j} ; … ; s_T a_{T,j}]`, shared by the transmitter and the
/// receiver's reconstruction of decoded users.
pub fn rebuild_signal(index: SeqIndex, symbols: &[Complex64], codebook: &Codebook) -> Result<TransmitSignal, TransmitError> {
    let shape = codebook.shape();
    if symbols.len() != shape.symbols {
        return Err(TransmitError::SymbolCount { got: symbols.len(), expected: shape.symbols });
    }
    if let Some(i) = symbols.iter().position(|s| s.re.abs() != 1.0 || s.im.abs() != 1.0) {
        return Err(TransmitError::NotQpsk(i));
    }
    let mut samples = codebook.pilot_column(index);
    samples.reserve(shape.symbols * shape.spread_len);
    for (t, &s) in symbols.iter().enumerate() {
        for r in 0..shape.spread_len {
            samples.push(s * codebook.spread_entry(t, r, index));
        }
    }
    Ok(TransmitSignal { samples, pilot_len: shape.pilot_len })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::{deinterleave, phi_inverse};
    use crate::polar::qpsk_hard_demap;
    use crate::SystemConfig;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (SystemConfig, Codebook, PolarSpec) {
        let c = SystemConfig::smoke();
        let cb = Codebook::generate(&c).unwrap();
        let spec = PolarSpec::from_config(&c);
        (c, cb, spec)
    }

    fn random_message(c: &SystemConfig, rng: &mut ChaCha8Rng) -> Message {
        Message::new((0..c.message_bits).map(|_| rng.random_range(0..2u8)).collect()).unwrap()
    }

    #[test]
    fn unit_energy() {
        let (c, cb, spec) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let x = encode_message(&random_message(&c, &mut rng), &cb, &spec).unwrap();
            assert_eq!(x.samples().len(), c.channel_uses);
            assert!((x.energy() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pilot_prefix_and_spread_blocks() {
        let (c, cb, spec) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = random_message(&c, &mut rng);
        let j = m.index(c.index_bits);
        let x = encode_message(&m, &cb, &spec).unwrap();
        assert_eq!(x.pilot(), cb.pilot_column(j).as_slice());
        // Each block is a scalar multiple of the spreading column; despread
        // and recover the coded bits.
        let mut symbols = vec![];
        for t in 0..c.symbols() {
            let a = cb.spread_column(t, j);
            let block = &x.payload()[t * c.spread_len..(t + 1) * c.spread_len];
            let s: Complex64 = a.iter().zip(block).map(|(a, y)| a.conj() * y).sum::<Complex64>()
                / a.iter().map(|a| a.norm_sqr()).sum::<f64>();
            for (a, y) in a.iter().zip(block) {
                assert!((s * a - y).norm() < 1e-12);
            }
            symbols.push(s);
        }
        let coded = deinterleave(&qpsk_hard_demap(&symbols), cb.interleaver(j));
        let (_, m_s) = m.split(c.index_bits);
        let expect = polar_encode(&spec.crc().append(m_s), cb.frozen_column(j), &spec);
        assert_eq!(coded, expect);
    }

    #[test]
    fn index_is_phi_of_prefix() {
        let (c, _, _) = setup();
        let mut bits = phi_inverse(SeqIndex(0x2A5), c.index_bits);
        bits.extend(core::iter::repeat_n(0, c.payload_bits()));
        assert_eq!(Message::new(bits).unwrap().index(c.index_bits), SeqIndex(0x2A5));
    }

    #[test]
    fn rejects_malformed_input() {
        let (c, cb, spec) = setup();
        let short = Message::new(vec![0; c.message_bits - 1]).unwrap();
        assert!(matches!(encode_message(&short, &cb, &spec), Err(TransmitError::MessageLength { .. })));
        assert_eq!(Message::new(vec![0, 2]), Err(TransmitError::NonBinary(1)));
        let mut s = vec![Complex64::new(1.0, -1.0); c.symbols()];
        s[3] = Complex64::new(0.5, 1.0);
        assert_eq!(rebuild_signal(SeqIndex(0), &s, &cb), Err(TransmitError::NotQpsk(3)));
        assert!(matches!(rebuild_signal(SeqIndex(0), &s[1..], &cb), Err(TransmitError::SymbolCount { .. })));
    }
}
