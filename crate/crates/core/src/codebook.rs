//! Shared random ensemble: pilot matrix, per-symbol spreading matrices,
//! frozen-value matrix and interleavers.
//!
//! Pilot and spreading entries come from a four-point alphabet
//! `scale * (±1 ± j)`, so each entry is stored as a 2-bit code (bit 0 set
//! means negative real part, bit 1 negative imaginary part). Four codes are
//! packed per byte along the rows of a column and the packed bytes are laid
//! out plane by plane: byte `g` of every column is contiguous over the `J`
//! columns. The energy detector sweeps all columns one plane at a time, which
//! is the hot loop of the receiver.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::RngCore;
use thiserror::Error;

use crate::config::{ConfigError, SystemConfig};
use crate::rng::{stream, Stream, StreamRng};

/// Zero-based column of the codebook, the image of the first message part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SeqIndex(pub u32);

impl SeqIndex {
    pub fn get(self) -> usize {
        self.0 as usize
    }

    /// Position counted from one, as in `[J] = {1, .., J}`.
    pub fn one_based(self) -> usize {
        self.0 as usize + 1
    }
}

/// Maps the index bits `m_f` (most significant bit first) to a column.
///
/// # Panics
/// If `bits` is longer than 32 or holds values other than 0 and 1.
pub fn phi(bits: &[u8]) -> SeqIndex {
    assert!(bits.len() <= 32, "index part longer than 32 bits");
    let mut v: u32 = 0;
    for &b in bits {
        assert!(b <= 1, "non-binary bit {b}");
        v = (v << 1) | b as u32;
    }
    SeqIndex(v)
}

/// Inverse of [`phi`] for an index part of `len` bits.
pub fn phi_inverse(index: SeqIndex, len: usize) -> Vec<u8> {
    (0..len).map(|i| ((index.0 >> (len - 1 - i)) & 1) as u8).collect()
}

/// Unscaled chip `(±1 ± j)` encoded by a 2-bit code.
#[inline]
pub(crate) fn chip(code: u8) -> Complex64 {
    Complex64::new(1.0 - 2.0 * (code & 1) as f64, 1.0 - 2.0 * ((code >> 1) & 1) as f64)
}

#[inline]
fn code_at(planes: &[u8], plane_len: usize, row: usize, col: usize) -> u8 {
    (planes[(row / 4) * plane_len + col] >> (2 * (row % 4))) & 3
}

/// Dimensions a codebook was generated for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodebookShape {
    pub pilot_len: usize,
    pub spread_len: usize,
    pub symbols: usize,
    pub index_bits: usize,
    pub code_len: usize,
    pub frozen_len: usize,
    pub seed: u64,
}

impl CodebookShape {
    pub fn of(config: &SystemConfig) -> Self {
        CodebookShape {
            pilot_len: config.pilot_len,
            spread_len: config.spread_len,
            symbols: config.symbols(),
            index_bits: config.index_bits,
            code_len: config.code_len,
            frozen_len: config.frozen_len(),
            seed: config.seed,
        }
    }

    pub fn num_sequences(&self) -> usize {
        1 << self.index_bits
    }

    pub fn channel_uses(&self) -> usize {
        self.pilot_len + self.symbols * self.spread_len
    }

    pub fn pilot_planes(&self) -> usize {
        self.pilot_len.div_ceil(4)
    }

    pub fn spread_planes(&self) -> usize {
        self.spread_len.div_ceil(4)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CodebookError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{what}: expected {expected} entries, found {found}")]
    Length { what: &'static str, expected: usize, found: usize },
    #[error("interleaver {0} is not a permutation")]
    NotPermutation(usize),
    #[error("frozen matrix holds a non-binary value")]
    NonBinary,
}

/// Raw storage of a codebook, for caching on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodebookParts {
    pub shape: CodebookShape,
    pub pilot_codes: Vec<u8>,
    pub spread_codes: Vec<u8>,
    pub frozen: Vec<u8>,
    pub interleavers: Vec<u16>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    shape: CodebookShape,
    pilot_scale: f64,
    spread_scale: f64,
    /// `pilot_planes × J`.
    pilot_codes: Vec<u8>,
    /// `T × spread_planes × J`.
    spread_codes: Vec<u8>,
    /// `J × frozen_len`, column by column.
    frozen: Vec<u8>,
    /// `J × n_c`, one permutation per column.
    interleavers: Vec<u16>,
}

struct CodeSource {
    rng: StreamRng,
    word: u64,
    left: u32,
}

impl CodeSource {
    fn new(rng: StreamRng) -> Self {
        CodeSource { rng, word: 0, left: 0 }
    }

    /// Next `bits` (1 or 2) random bits, least significant first.
    fn take(&mut self, bits: u32) -> u8 {
        if self.left < bits {
            self.word = self.rng.next_u64();
            self.left = 64;
        }
        let v = (self.word & ((1 << bits) - 1)) as u8;
        self.word >>= bits;
        self.left -= bits;
        v
    }
}

/// Draws a column-major 2-bit code matrix and stores it in plane layout.
///
/// `planes` is indexed `[(block * n_planes + g) * cols + col]`.
fn fill_codes(src: &mut CodeSource, planes: &mut [u8], block: usize, rows: usize, cols: usize) {
    let n_planes = rows.div_ceil(4);
    let base = block * n_planes * cols;
    for col in 0..cols {
        for row in 0..rows {
            let code = src.take(2);
            planes[base + (row / 4) * cols + col] |= code << (2 * (row % 4));
        }
    }
}

impl Codebook {
    /// Generates the ensemble for `config` from `config.seed`.
    ///
    /// Streams: pilots draw 2 bits per entry column by column, spreading
    /// matrices likewise for `t = 0..T`, frozen values one bit per entry
    /// column by column, and interleavers are Fisher-Yates shuffles of the
    /// identity, one per column.
    pub fn generate(config: &SystemConfig) -> Result<Self, CodebookError> {
        config.validate()?;
        let shape = CodebookShape::of(config);
        let j = shape.num_sequences();

        let mut pilot_codes = vec![0u8; shape.pilot_planes() * j];
        let mut src = CodeSource::new(stream(shape.seed, Stream::Pilots));
        fill_codes(&mut src, &mut pilot_codes, 0, shape.pilot_len, j);

        let mut spread_codes = vec![0u8; shape.symbols * shape.spread_planes() * j];
        let mut src = CodeSource::new(stream(shape.seed, Stream::Spreading));
        for t in 0..shape.symbols {
            fill_codes(&mut src, &mut spread_codes, t, shape.spread_len, j);
        }

        let mut src = CodeSource::new(stream(shape.seed, Stream::Frozen));
        let frozen: Vec<u8> = (0..j * shape.frozen_len).map(|_| src.take(1)).collect();

        let mut rng = stream(shape.seed, Stream::Interleavers);
        let mut interleavers = Vec::with_capacity(j * shape.code_len);
        let mut perm: Vec<u16> = Vec::with_capacity(shape.code_len);
        for _ in 0..j {
            perm.clear();
            perm.extend((0..shape.code_len).map(|i| i as u16));
            perm.shuffle(&mut rng);
            interleavers.extend_from_slice(&perm);
        }

        Ok(Self::assemble(shape, pilot_codes, spread_codes, frozen, interleavers))
    }

    fn assemble(
        shape: CodebookShape,
        pilot_codes: Vec<u8>,
        spread_codes: Vec<u8>,
        frozen: Vec<u8>,
        interleavers: Vec<u16>,
    ) -> Self {
        let n = shape.channel_uses() as f64;
        Codebook {
            shape,
            pilot_scale: 1.0 / libm::sqrt(2.0 * n),
            spread_scale: 1.0 / (2.0 * libm::sqrt(n)),
            pilot_codes,
            spread_codes,
            frozen,
            interleavers,
        }
    }

    /// Rebuilds a codebook from raw parts, checking every invariant that
    /// does not depend on the generator.
    pub fn from_parts(parts: CodebookParts) -> Result<Self, CodebookError> {
        let s = parts.shape;
        let j = s.num_sequences();
        if s.code_len > 1 << 16 {
            return Err(ConfigError::CodeLength(s.code_len).into());
        }
        let check = |what, expected: usize, found: usize| {
            if expected == found {
                Ok(())
            } else {
                Err(CodebookError::Length { what, expected, found })
            }
        };
        check("pilot codes", s.pilot_planes() * j, parts.pilot_codes.len())?;
        check("spreading codes", s.symbols * s.spread_planes() * j, parts.spread_codes.len())?;
        check("frozen values", s.frozen_len * j, parts.frozen.len())?;
        check("interleavers", s.code_len * j, parts.interleavers.len())?;
        if parts.frozen.iter().any(|&b| b > 1) {
            return Err(CodebookError::NonBinary);
        }
        let mut seen = vec![false; s.code_len];
        for (col, perm) in parts.interleavers.chunks_exact(s.code_len).enumerate() {
            seen.iter_mut().for_each(|x| *x = false);
            for &p in perm {
                let p = p as usize;
                if p >= s.code_len || seen[p] {
                    return Err(CodebookError::NotPermutation(col));
                }
                seen[p] = true;
            }
        }
        Ok(Self::assemble(s, parts.pilot_codes, parts.spread_codes, parts.frozen, parts.interleavers))
    }

    pub fn into_parts(self) -> CodebookParts {
        CodebookParts {
            shape: self.shape,
            pilot_codes: self.pilot_codes,
            spread_codes: self.spread_codes,
            frozen: self.frozen,
            interleavers: self.interleavers,
        }
    }

    pub fn shape(&self) -> &CodebookShape {
        &self.shape
    }

    /// Whether this codebook was generated for `config`.
    pub fn matches(&self, config: &SystemConfig) -> bool {
        self.shape == CodebookShape::of(config)
    }

    pub fn num_sequences(&self) -> usize {
        self.shape.num_sequences()
    }

    /// Real and imaginary magnitude of every pilot entry, `1/sqrt(2n)`.
    pub fn pilot_scale(&self) -> f64 {
        self.pilot_scale
    }

    /// Real and imaginary magnitude of every spreading entry, `1/(2 sqrt(n))`.
    pub fn spread_scale(&self) -> f64 {
        self.spread_scale
    }

    #[inline]
    pub(crate) fn pilot_code(&self, row: usize, col: SeqIndex) -> u8 {
        code_at(&self.pilot_codes, self.num_sequences(), row, col.get())
    }

    #[inline]
    pub(crate) fn spread_code(&self, t: usize, row: usize, col: SeqIndex) -> u8 {
        let j = self.num_sequences();
        let block = &self.spread_codes[t * self.shape.spread_planes() * j..];
        code_at(block, j, row, col.get())
    }

    pub fn pilot_entry(&self, row: usize, col: SeqIndex) -> Complex64 {
        chip(self.pilot_code(row, col)) * self.pilot_scale
    }

    pub fn spread_entry(&self, t: usize, row: usize, col: SeqIndex) -> Complex64 {
        chip(self.spread_code(t, row, col)) * self.spread_scale
    }

    /// `P[:, col]`.
    pub fn pilot_column(&self, col: SeqIndex) -> Vec<Complex64> {
        (0..self.shape.pilot_len).map(|r| self.pilot_entry(r, col)).collect()
    }

    /// `A_t[:, col]`.
    pub fn spread_column(&self, t: usize, col: SeqIndex) -> Vec<Complex64> {
        (0..self.shape.spread_len).map(|r| self.spread_entry(t, r, col)).collect()
    }

    /// Packed pilot plane `g` over all columns.
    pub(crate) fn pilot_plane(&self, g: usize) -> &[u8] {
        let j = self.num_sequences();
        &self.pilot_codes[g * j..(g + 1) * j]
    }

    /// Packed plane `g` of `A_t` over all columns.
    pub(crate) fn spread_plane(&self, t: usize, g: usize) -> &[u8] {
        let j = self.num_sequences();
        let start = (t * self.shape.spread_planes() + g) * j;
        &self.spread_codes[start..start + j]
    }

    /// `F[:, col]`.
    pub fn frozen_column(&self, col: SeqIndex) -> &[u8] {
        let f = self.shape.frozen_len;
        &self.frozen[col.get() * f..(col.get() + 1) * f]
    }

    /// Permutation `π_col`: interleaved position `i` carries codeword bit `π_col[i]`.
    pub fn interleaver(&self, col: SeqIndex) -> &[u16] {
        let n = self.shape.code_len;
        &self.interleavers[col.get() * n..(col.get() + 1) * n]
    }
}

/// `out[i] = bits[π[i]]`.
pub fn interleave<T: Copy>(bits: &[T], perm: &[u16]) -> Vec<T> {
    perm.iter().map(|&p| bits[p as usize]).collect()
}

/// Inverse of [`interleave`].
pub fn deinterleave<T: Copy + Default>(values: &[T], perm: &[u16]) -> Vec<T> {
    let mut out = vec![T::default(); values.len()];
    for (v, &p) in values.iter().zip(perm) {
        out[p as usize] = *v;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SystemConfig {
        let mut c = SystemConfig::smoke();
        c.index_bits = 8;
        c.message_bits = 48;
        c
    }

    #[test]
    fn phi_orders_msb_first() {
        assert_eq!(phi(&[0; 16]).one_based(), 1);
        let mut b = [0u8; 16];
        b[15] = 1;
        assert_eq!(phi(&b).one_based(), 2);
        b[0] = 1;
        assert_eq!(phi(&b).get(), 0x8001);
    }

    #[test]
    fn phi_is_a_permutation_of_all_columns() {
        let mut seen = vec![false; 1 << 16];
        for v in 0..(1u32 << 16) {
            let bits = phi_inverse(SeqIndex(v), 16);
            let idx = phi(&bits);
            assert_eq!(idx.0, v);
            assert!(!seen[idx.get()]);
            seen[idx.get()] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn generation_is_deterministic() {
        let c = small();
        assert_eq!(Codebook::generate(&c).unwrap(), Codebook::generate(&c).unwrap());
        let mut other = c.clone();
        other.seed += 1;
        assert_ne!(Codebook::generate(&c).unwrap(), Codebook::generate(&other).unwrap());
    }

    #[test]
    fn entries_lie_in_the_alphabets() {
        let c = small();
        let cb = Codebook::generate(&c).unwrap();
        let n = c.channel_uses as f64;
        let p = 1.0 / (2.0 * n).sqrt();
        let a = 1.0 / (2.0 * n.sqrt());
        for j in 0..cb.num_sequences() as u32 {
            for z in cb.pilot_column(SeqIndex(j)) {
                assert!((z.re.abs() - p).abs() < 1e-15 && (z.im.abs() - p).abs() < 1e-15);
            }
            for t in 0..c.symbols() {
                for z in cb.spread_column(t, SeqIndex(j)) {
                    assert!((z.re.abs() - a).abs() < 1e-15 && (z.im.abs() - a).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn column_energy_budget_is_one() {
        let c = small();
        let cb = Codebook::generate(&c).unwrap();
        for j in [0u32, 17, 255] {
            let col = SeqIndex(j);
            let mut e: f64 = cb.pilot_column(col).iter().map(|z| z.norm_sqr()).sum();
            for t in 0..c.symbols() {
                e += 2.0 * cb.spread_column(t, col).iter().map(|z| z.norm_sqr()).sum::<f64>();
            }
            assert!((e - 1.0).abs() < 1e-12, "{e}");
        }
    }

    #[test]
    fn codes_are_roughly_balanced() {
        let cb = Codebook::generate(&small()).unwrap();
        let mut counts = [0usize; 4];
        for j in 0..cb.num_sequences() as u32 {
            for r in 0..cb.shape().pilot_len {
                counts[cb.pilot_code(r, SeqIndex(j)) as usize] += 1;
            }
        }
        let total: usize = counts.iter().sum();
        for c in counts {
            let f = c as f64 / total as f64;
            assert!((f - 0.25).abs() < 0.01, "{counts:?}");
        }
    }

    #[test]
    fn interleavers_are_permutations() {
        let c = small();
        let cb = Codebook::generate(&c).unwrap();
        for j in 0..cb.num_sequences() as u32 {
            let mut p: Vec<u16> = cb.interleaver(SeqIndex(j)).to_vec();
            p.sort_unstable();
            assert!(p.iter().enumerate().all(|(i, &v)| v as usize == i));
        }
    }

    #[test]
    fn parts_round_trip_and_validation() {
        let cb = Codebook::generate(&small()).unwrap();
        let parts = cb.clone().into_parts();
        assert_eq!(Codebook::from_parts(parts.clone()).unwrap(), cb);
        let mut bad = parts.clone();
        bad.interleavers[1] = bad.interleavers[0];
        assert_eq!(Codebook::from_parts(bad), Err(CodebookError::NotPermutation(0)));
        let mut bad = parts;
        bad.frozen.pop();
        assert!(matches!(Codebook::from_parts(bad), Err(CodebookError::Length { .. })));
    }

    #[test]
    fn pilot_columns_are_nearly_uncorrelated() {
        let c = SystemConfig::full(100);
        let mut small = c.clone();
        small.index_bits = 11;
        let cb = Codebook::generate(&small).unwrap();
        let n = c.channel_uses as f64;
        // E|<p_i, p_j>|^2 = n_p / n^2 for independent columns.
        let scale = (c.pilot_len as f64).sqrt() / n;
        for pair in 0..1000u32 {
            let a = cb.pilot_column(SeqIndex(2 * pair));
            let b = cb.pilot_column(SeqIndex(2 * pair + 1));
            let ip: Complex64 = a.iter().zip(&b).map(|(x, y)| x.conj() * y).sum();
            assert!(ip.norm() <= 5.0 * scale, "pair {pair}: {}", ip.norm() / scale);
        }
    }
}
