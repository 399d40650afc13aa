//! Single-user coding chain: CRC, polar coset code, QPSK and list decoding.
//!
//! Bits are `u8` values in `{0, 1}`. The polar transform is `x = u F^{⊗m}`
//! in natural order with `F = [[1, 0], [1, 1]]`; no bit reversal is applied,
//! so bit channel `i` of `u` splits on the most significant bit of `i` first.

mod crc;
mod scl;

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

pub use crc::Crc;
pub use scl::{crc_select, scl_decode, Kernel, ListCandidate, SclDecoder, Selection};

/// Code length, information set and CRC of the per-user polar code.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarSpec {
    code_len: usize,
    info_positions: Vec<usize>,
    frozen_positions: Vec<usize>,
    /// `true` at information positions.
    is_info: Vec<bool>,
    crc: Crc,
}

impl PolarSpec {
    /// Picks the `info_len` most reliable bit channels at design parameter
    /// `design_z`.
    ///
    /// # Panics
    /// If `code_len` is not a power of two, `info_len > code_len` or the CRC
    /// length is unsupported.
    pub fn new(code_len: usize, info_len: usize, crc_len: usize, design_z: f64) -> Self {
        assert!(info_len <= code_len, "info length exceeds code length");
        let crc = Crc::with_len(crc_len).expect("unsupported CRC length");
        let order = reliability_order(code_len, design_z);
        let mut info_positions: Vec<usize> = order[..info_len].to_vec();
        info_positions.sort_unstable();
        Self::with_info_positions(code_len, info_positions, crc)
    }

    /// Explicit information set, sorted ascending.
    pub fn with_info_positions(code_len: usize, info_positions: Vec<usize>, crc: Crc) -> Self {
        assert!(code_len.is_power_of_two(), "code length must be a power of two");
        let mut is_info = vec![false; code_len];
        for &p in &info_positions {
            assert!(p < code_len && !is_info[p], "bad information position {p}");
            is_info[p] = true;
        }
        assert!(info_positions.windows(2).all(|w| w[0] < w[1]), "positions must be sorted");
        let frozen_positions = (0..code_len).filter(|&i| !is_info[i]).collect();
        PolarSpec { code_len, info_positions, frozen_positions, is_info, crc }
    }

    pub fn from_config(config: &crate::SystemConfig) -> Self {
        Self::new(config.code_len, config.info_len(), config.crc_len, config.design_z)
    }

    pub fn code_len(&self) -> usize {
        self.code_len
    }

    pub fn info_len(&self) -> usize {
        self.info_positions.len()
    }

    pub fn frozen_len(&self) -> usize {
        self.frozen_positions.len()
    }

    pub fn info_positions(&self) -> &[usize] {
        &self.info_positions
    }

    pub fn frozen_positions(&self) -> &[usize] {
        &self.frozen_positions
    }

    pub fn is_info(&self, pos: usize) -> bool {
        self.is_info[pos]
    }

    pub fn crc(&self) -> Crc {
        self.crc
    }

    /// Payload bits carried before the CRC.
    pub fn payload_len(&self) -> usize {
        self.info_len() - self.crc.len
    }
}

/// Bit-channel ranking, most reliable first.
///
/// Bhattacharyya parameters follow `z⁻ = 2z − z²`, `z⁺ = z²` from `design_z`
/// at the channel; ties keep the lower index first.
pub fn reliability_order(code_len: usize, design_z: f64) -> Vec<usize> {
    assert!(code_len.is_power_of_two(), "code length must be a power of two");
    let z = bhattacharyya(code_len, design_z);
    let mut order: Vec<usize> = (0..code_len).collect();
    order.sort_by(|&a, &b| z[a].total_cmp(&z[b]).then(a.cmp(&b)));
    order
}

/// Bhattacharyya parameter of every bit channel in natural order.
pub fn bhattacharyya(code_len: usize, design_z: f64) -> Vec<f64> {
    let mut z = vec![design_z];
    while z.len() < code_len {
        // Each doubling appends the innermost split as the new low bit.
        z = z.iter().flat_map(|&v| [2.0 * v - v * v, v * v]).collect();
    }
    z
}

/// In-place `x = u F^{⊗m}`.
pub fn polar_transform(bits: &mut [u8]) {
    let n = bits.len();
    let mut half = 1;
    while half < n {
        for block in bits.chunks_exact_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter()) {
                *a ^= *b;
            }
        }
        half *= 2;
    }
}

/// Places `info` and `frozen` on their positions and applies the transform.
///
/// # Panics
/// On length mismatch with `spec`.
pub fn polar_encode(info: &[u8], frozen: &[u8], spec: &PolarSpec) -> Vec<u8> {
    assert_eq!(info.len(), spec.info_len(), "info length");
    assert_eq!(frozen.len(), spec.frozen_len(), "frozen length");
    let mut u = vec![0u8; spec.code_len];
    for (&p, &b) in spec.info_positions.iter().zip(info) {
        u[p] = b;
    }
    for (&p, &b) in spec.frozen_positions.iter().zip(frozen) {
        u[p] = b;
    }
    polar_transform(&mut u);
    u
}

/// Gray-mapped QPSK: `(b_re, b_im) → (1 − 2 b_re) + j (1 − 2 b_im)`.
///
/// # Panics
/// If `bits` has odd length.
pub fn qpsk_modulate(bits: &[u8]) -> Vec<Complex64> {
    assert!(bits.len() % 2 == 0, "odd number of bits");
    bits.chunks_exact(2)
        .map(|p| Complex64::new(1.0 - 2.0 * p[0] as f64, 1.0 - 2.0 * p[1] as f64))
        .collect()
}

/// Hard decisions on QPSK symbols, inverse of [`qpsk_modulate`].
pub fn qpsk_hard_demap(symbols: &[Complex64]) -> Vec<u8> {
    symbols.iter().flat_map(|s| [(s.re < 0.0) as u8, (s.im < 0.0) as u8]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn z_by_index(code_len: usize, z0: f64, i: usize) -> f64 {
        // Walk the bits of `i` from the most significant one.
        let m = code_len.trailing_zeros();
        let mut z = z0;
        for level in (0..m).rev() {
            z = if (i >> level) & 1 == 1 { z * z } else { 2.0 * z - z * z };
        }
        z
    }

    #[test]
    fn two_kernel_plus_channel_is_better() {
        assert_eq!(reliability_order(2, 0.32), vec![1, 0]);
    }

    #[test]
    fn bec_half_ordering_for_eight() {
        let z = bhattacharyya(8, 0.5);
        for (i, &v) in z.iter().enumerate() {
            assert!((v - z_by_index(8, 0.5, i)).abs() < 1e-15);
        }
        assert_eq!(reliability_order(8, 0.5), vec![7, 6, 5, 3, 4, 2, 1, 0]);
    }

    #[test]
    fn ranking_is_a_permutation() {
        let mut o = reliability_order(512, 0.32);
        o.sort_unstable();
        assert!(o.iter().enumerate().all(|(i, &v)| i == v));
        let z = bhattacharyya(512, 0.32);
        for i in [0, 1, 100, 511] {
            assert!((z[i] - z_by_index(512, 0.32, i)).abs() < 1e-12);
        }
    }

    #[test]
    fn transform_matches_kronecker_matrix_for_four() {
        // F^{⊗2} rows, natural order.
        let g = [[1u8, 0, 0, 0], [1, 1, 0, 0], [1, 0, 1, 0], [1, 1, 1, 1]];
        let spec = PolarSpec::new(4, 2, 12, 0.32);
        // z = [.., 0.289, 0.194, 0.010]: the two plus-heavy channels carry data.
        assert_eq!(spec.info_positions(), &[2, 3]);
        for v in 0..16u8 {
            let u: Vec<u8> = (0..4).map(|i| (v >> i) & 1).collect();
            let mut x = [0u8; 4];
            for (row, &ui) in g.iter().zip(&u) {
                for c in 0..4 {
                    x[c] ^= row[c] & ui;
                }
            }
            let info = [u[2], u[3]];
            let frozen = [u[0], u[1]];
            assert_eq!(polar_encode(&info, &frozen, &spec), x.to_vec());
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let spec = PolarSpec::new(512, 96, 12, 0.32);
        assert!(polar_encode(&[0; 96], &[0; 416], &spec).iter().all(|&b| b == 0));
    }

    #[test]
    fn qpsk_convention() {
        assert_eq!(qpsk_modulate(&[0, 0]), vec![Complex64::new(1.0, 1.0)]);
        assert_eq!(qpsk_modulate(&[1, 1]), vec![Complex64::new(-1.0, -1.0)]);
        assert_eq!(qpsk_modulate(&[1, 0]), vec![Complex64::new(-1.0, 1.0)]);
    }

    #[test]
    #[should_panic(expected = "odd")]
    fn qpsk_rejects_odd_length() {
        qpsk_modulate(&[0, 1, 1]);
    }

    #[test]
    #[should_panic(expected = "frozen length")]
    fn encode_rejects_bad_frozen_length() {
        let spec = PolarSpec::new(16, 8, 12, 0.32);
        polar_encode(&[0; 8], &[0; 7], &spec);
    }

    fn bits(n: usize) -> impl Strategy<Value = Vec<u8>> {
        proptest::collection::vec(0u8..2, n)
    }

    proptest! {
        #[test]
        fn coset_linearity(u in bits(24), v in bits(24), f in bits(40), g in bits(40)) {
            let spec = PolarSpec::new(64, 24, 12, 0.32);
            let xor = |a: &[u8], b: &[u8]| a.iter().zip(b).map(|(x, y)| x ^ y).collect::<Vec<u8>>();
            let lhs = xor(&polar_encode(&u, &f, &spec), &polar_encode(&v, &g, &spec));
            prop_assert_eq!(lhs, polar_encode(&xor(&u, &v), &xor(&f, &g), &spec));
        }

        #[test]
        fn qpsk_round_trip(c in bits(64)) {
            prop_assert_eq!(qpsk_hard_demap(&qpsk_modulate(&c)), c);
        }
    }
}
