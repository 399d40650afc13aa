//! CRC-aided successive cancellation list decoding.
//!
//! Lazy-copy list decoder in the style of Tal and Vardy, working on LLRs.
//! Every path owns one array per layer through an index table; arrays are
//! shared between paths after a fork and copied only when a path writes to
//! a shared one. Layer `λ` holds `n / 2^λ` LLRs and partial-sum pairs, and
//! layer `λ` is computed from the two halves of layer `λ − 1`, which matches
//! the natural-order transform used by the encoder.
//!
//! Path metrics accumulate a non-negative penalty: `|L|` when a decision
//! disagrees with the hard decision of its LLR under min-sum kernels, or
//! `ln(1 + e^{−(1−2u)L})` under sum-product kernels.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::{Crc, PolarSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Kernel {
    #[default]
    MinSum,
    SumProduct,
}

impl Kernel {
    #[inline]
    fn f(self, a: f64, b: f64) -> f64 {
        match self {
            Kernel::MinSum => {
                let m = a.abs().min(b.abs());
                if (a < 0.0) != (b < 0.0) {
                    -m
                } else {
                    m
                }
            }
            Kernel::SumProduct => {
                let p = libm::tanh(0.5 * a) * libm::tanh(0.5 * b);
                2.0 * libm::atanh(p.clamp(-0.999_999_999_999, 0.999_999_999_999))
            }
        }
    }

    #[inline]
    fn penalty(self, llr: f64, bit: u8) -> f64 {
        match self {
            Kernel::MinSum => {
                if (llr < 0.0) as u8 != bit {
                    llr.abs()
                } else {
                    0.0
                }
            }
            Kernel::SumProduct => {
                let x = if bit == 0 { -llr } else { llr };
                if x > 30.0 {
                    x
                } else {
                    libm::log1p(libm::exp(x))
                }
            }
        }
    }
}

#[inline]
fn g(a: f64, b: f64, left: u8) -> f64 {
    if left == 0 {
        b + a
    } else {
        b - a
    }
}

/// One decoded path: the `B_c` information bits in position order.
#[derive(Debug, Clone, PartialEq)]
pub struct ListCandidate {
    pub info: Vec<u8>,
    pub metric: f64,
}

/// Reusable list decoder for one code length and list size.
#[derive(Debug, Clone)]
pub struct SclDecoder {
    m: usize,
    n: usize,
    list: usize,
    kernel: Kernel,
    llr: Vec<Vec<f64>>,
    bits: Vec<Vec<[u8; 2]>>,
    path_array: Vec<Vec<usize>>,
    refs: Vec<Vec<u32>>,
    free_arrays: Vec<Vec<usize>>,
    free_paths: Vec<usize>,
    metric: Vec<f64>,
    info: Vec<Vec<u8>>,
    /// Active paths, best rank first.
    order: Vec<usize>,
    cands: Vec<(f64, usize, u8)>,
}

impl SclDecoder {
    pub fn new(code_len: usize, list_size: usize, kernel: Kernel) -> Self {
        assert!(code_len.is_power_of_two() && code_len >= 2, "code length must be a power of two");
        assert!(list_size >= 1, "list size must be positive");
        let m = code_len.trailing_zeros() as usize;
        let layers = m + 1;
        SclDecoder {
            m,
            n: code_len,
            list: list_size,
            kernel,
            llr: (0..layers).map(|l| vec![0.0; list_size * (code_len >> l)]).collect(),
            bits: (0..layers).map(|l| vec![[0u8; 2]; list_size * (code_len >> l)]).collect(),
            path_array: vec![vec![0; list_size]; layers],
            refs: vec![vec![0; list_size]; layers],
            free_arrays: vec![Vec::with_capacity(list_size); layers],
            free_paths: Vec::with_capacity(list_size),
            metric: vec![0.0; list_size],
            info: vec![Vec::new(); list_size],
            order: Vec::with_capacity(list_size),
            cands: Vec::with_capacity(2 * list_size),
        }
    }

    pub fn list_size(&self) -> usize {
        self.list
    }

    fn reset(&mut self) {
        for lam in 0..=self.m {
            self.refs[lam].iter_mut().for_each(|r| *r = 0);
            self.free_arrays[lam].clear();
            self.free_arrays[lam].extend((0..self.list).rev());
        }
        self.free_paths.clear();
        self.free_paths.extend((0..self.list).rev());
        self.order.clear();
    }

    fn assign_initial_path(&mut self) -> usize {
        let l = self.free_paths.pop().expect("free path");
        for lam in 0..=self.m {
            let s = self.free_arrays[lam].pop().expect("free array");
            self.path_array[lam][l] = s;
            self.refs[lam][s] = 1;
        }
        self.metric[l] = 0.0;
        self.info[l].clear();
        l
    }

    fn clone_path(&mut self, l: usize) -> usize {
        let c = self.free_paths.pop().expect("free path");
        for lam in 0..=self.m {
            let s = self.path_array[lam][l];
            self.path_array[lam][c] = s;
            self.refs[lam][s] += 1;
        }
        self.metric[c] = self.metric[l];
        let src = core::mem::take(&mut self.info[l]);
        self.info[c].clear();
        self.info[c].extend_from_slice(&src);
        self.info[l] = src;
        c
    }

    fn kill_path(&mut self, l: usize) {
        self.free_paths.push(l);
        for lam in 0..=self.m {
            let s = self.path_array[lam][l];
            self.refs[lam][s] -= 1;
            if self.refs[lam][s] == 0 {
                self.free_arrays[lam].push(s);
            }
        }
    }

    /// Array of path `l` at layer `lam`, made private to the path.
    fn own(&mut self, lam: usize, l: usize) -> usize {
        let s = self.path_array[lam][l];
        if self.refs[lam][s] == 1 {
            return s;
        }
        let t = self.free_arrays[lam].pop().expect("free array");
        let size = self.n >> lam;
        self.llr[lam].copy_within(s * size..(s + 1) * size, t * size);
        self.bits[lam].copy_within(s * size..(s + 1) * size, t * size);
        self.refs[lam][s] -= 1;
        self.refs[lam][t] = 1;
        self.path_array[lam][l] = t;
        t
    }

    fn calc_llr(&mut self, lam: usize, phase: usize) {
        if lam == 0 {
            return;
        }
        if phase % 2 == 0 {
            self.calc_llr(lam - 1, phase >> 1);
        }
        let size = self.n >> lam;
        let kernel = self.kernel;
        for i in 0..self.order.len() {
            let l = self.order[i];
            let s = self.own(lam, l);
            let sp = self.path_array[lam - 1][l];
            let (lo, hi) = self.llr.split_at_mut(lam);
            let prev = &lo[lam - 1][sp * 2 * size..(sp + 1) * 2 * size];
            let (a, b) = prev.split_at(size);
            let cur = &mut hi[0][s * size..(s + 1) * size];
            if phase % 2 == 0 {
                for ((c, &x), &y) in cur.iter_mut().zip(a).zip(b) {
                    *c = kernel.f(x, y);
                }
            } else {
                let left = &self.bits[lam][s * size..(s + 1) * size];
                for (((c, &x), &y), u) in cur.iter_mut().zip(a).zip(b).zip(left) {
                    *c = g(x, y, u[0]);
                }
            }
        }
    }

    fn update_bits(&mut self, lam: usize, phase: usize) {
        let size = self.n >> lam;
        let half = (phase >> 1) & 1;
        for i in 0..self.order.len() {
            let l = self.order[i];
            let s = self.path_array[lam][l];
            let sp = self.own(lam - 1, l);
            let (lo, hi) = self.bits.split_at_mut(lam);
            let cur = &hi[0][s * size..(s + 1) * size];
            let prev = &mut lo[lam - 1][sp * 2 * size..(sp + 1) * 2 * size];
            for (beta, c) in cur.iter().enumerate() {
                prev[beta][half] = c[0] ^ c[1];
                prev[beta + size][half] = c[1];
            }
        }
        let parent = phase >> 1;
        if parent % 2 == 1 && lam > 1 {
            self.update_bits(lam - 1, parent);
        }
    }

    fn set_bit(&mut self, l: usize, phase: usize, bit: u8) {
        let s = self.own(self.m, l);
        self.bits[self.m][s][phase & 1] = bit;
    }

    fn leaf_llr(&self, l: usize) -> f64 {
        self.llr[self.m][self.path_array[self.m][l]]
    }

    fn fork(&mut self, phase: usize) {
        let kernel = self.kernel;
        self.cands.clear();
        for (rank, &l) in self.order.iter().enumerate() {
            let llr = self.llr[self.m][self.path_array[self.m][l]];
            let pm = self.metric[l];
            self.cands.push((pm + kernel.penalty(llr, 0), rank, 0));
            self.cands.push((pm + kernel.penalty(llr, 1), rank, 1));
        }
        // Stable: equal metrics keep (rank, bit) order.
        self.cands.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));
        let keep = self.list.min(self.cands.len());
        let paths = self.order.len();
        let mut kept = vec![[false; 2]; paths];
        for &(_, r, b) in &self.cands[..keep] {
            kept[r][b as usize] = true;
        }
        for (r, k) in kept.iter().enumerate() {
            if !k[0] && !k[1] {
                self.kill_path(self.order[r]);
            }
        }
        let mut slot = vec![[usize::MAX; 2]; paths];
        for (r, k) in kept.iter().enumerate() {
            let l = self.order[r];
            match (k[0], k[1]) {
                (true, true) => {
                    slot[r][0] = l;
                    slot[r][1] = self.clone_path(l);
                }
                (true, false) => slot[r][0] = l,
                (false, true) => slot[r][1] = l,
                (false, false) => {}
            }
        }
        self.order.clear();
        for i in 0..keep {
            let (pm, r, b) = self.cands[i];
            let l = slot[r][b as usize];
            self.set_bit(l, phase, b);
            self.metric[l] = pm;
            self.info[l].push(b);
            self.order.push(l);
        }
    }

    /// Decodes channel LLRs (positive favours bit 0) in codeword order.
    ///
    /// Returns up to `list_size` candidates sorted by ascending path metric;
    /// equal metrics keep the order of their parents.
    pub fn decode(&mut self, llrs: &[f64], frozen: &[u8], spec: &PolarSpec) -> Vec<ListCandidate> {
        assert_eq!(spec.code_len(), self.n, "code length mismatch");
        assert_eq!(llrs.len(), self.n, "LLR length");
        assert_eq!(frozen.len(), spec.frozen_len(), "frozen length");
        self.reset();
        let root = self.assign_initial_path();
        let s0 = self.path_array[0][root];
        self.llr[0][s0 * self.n..(s0 + 1) * self.n].copy_from_slice(llrs);
        self.order.push(root);

        let mut next_frozen = 0;
        for phase in 0..self.n {
            self.calc_llr(self.m, phase);
            if spec.is_info(phase) {
                self.fork(phase);
            } else {
                let fv = frozen[next_frozen];
                next_frozen += 1;
                for i in 0..self.order.len() {
                    let l = self.order[i];
                    let llr = self.leaf_llr(l);
                    self.metric[l] += self.kernel.penalty(llr, fv);
                    self.set_bit(l, phase, fv);
                }
            }
            if phase % 2 == 1 {
                self.update_bits(self.m, phase);
            }
        }

        let metric = &self.metric;
        let mut ranked = self.order.clone();
        ranked.sort_by(|&a, &b| metric[a].partial_cmp(&metric[b]).unwrap_or(Ordering::Equal));
        ranked
            .into_iter()
            .map(|l| ListCandidate { info: self.info[l].clone(), metric: self.metric[l] })
            .collect()
    }
}

/// One-shot min-sum list decode.
pub fn scl_decode(llrs: &[f64], frozen: &[u8], spec: &PolarSpec, list_size: usize) -> Vec<ListCandidate> {
    SclDecoder::new(spec.code_len(), list_size, Kernel::MinSum).decode(llrs, frozen, spec)
}

/// Outcome of CRC screening of a decoded list.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Zero-based rank in the list.
    pub rank: usize,
    pub info: Vec<u8>,
    pub consistent: bool,
}

/// Best-metric candidate passing the CRC, or the best candidate flagged
/// inconsistent when none passes.
///
/// # Panics
/// On an empty list.
pub fn crc_select(list: &[ListCandidate], crc: Crc) -> Selection {
    assert!(!list.is_empty(), "empty candidate list");
    match list.iter().position(|c| crc.check(&c.info)) {
        Some(rank) => Selection { rank, info: list[rank].info.clone(), consistent: true },
        None => Selection { rank: 0, info: list[0].info.clone(), consistent: false },
    }
}

#[cfg(test)]
mod tests {
    use super::super::{polar_encode, PolarSpec};
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bpsk_llrs(code: &[u8], mag: f64) -> Vec<f64> {
        code.iter().map(|&b| if b == 0 { mag } else { -mag }).collect()
    }

    #[test]
    fn noiseless_codeword_ranks_first() {
        let spec = PolarSpec::new(512, 96, 12, 0.32);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5 {
            let payload: Vec<u8> = (0..84).map(|_| rng.random_range(0..2)).collect();
            let info = spec.crc().append(&payload);
            let frozen: Vec<u8> = (0..416).map(|_| rng.random_range(0..2)).collect();
            let code = polar_encode(&info, &frozen, &spec);
            let list = scl_decode(&bpsk_llrs(&code, 20.0), &frozen, &spec, 64);
            assert_eq!(list[0].info, info);
            assert_eq!(list[0].metric, 0.0);
            assert!(list.len() <= 64);
            assert!(list.windows(2).all(|w| w[0].metric <= w[1].metric));
        }
    }

    #[test]
    fn zero_llrs_give_full_list() {
        let spec = PolarSpec::new(64, 20, 12, 0.32);
        let a = scl_decode(&[0.0; 64], &[0; 44], &spec, 16);
        assert_eq!(a.len(), 16);
        assert_eq!(a, scl_decode(&[0.0; 64], &[0; 44], &spec, 16));
        assert!(a[0].info.iter().all(|&b| b == 0));
    }

    #[test]
    fn list_of_one_is_successive_cancellation() {
        let spec = PolarSpec::new(8, 4, 12, 0.5);
        let info = [1, 0, 1, 1];
        let code = polar_encode(&info, &[0; 4], &spec);
        let list = scl_decode(&bpsk_llrs(&code, 3.0), &[0; 4], &spec, 1);
        assert_eq!(list.len(), 1);
        assert_eq!(list[0].info, info);
    }

    #[test]
    fn sum_product_kernel_decodes_noiseless() {
        let spec = PolarSpec::new(128, 52, 12, 0.32);
        let info: Vec<u8> = (0..52).map(|i| (i % 3 == 0) as u8).collect();
        let frozen: Vec<u8> = (0..76).map(|i| (i % 5 == 0) as u8).collect();
        let code = polar_encode(&info, &frozen, &spec);
        let mut dec = SclDecoder::new(128, 8, Kernel::SumProduct);
        assert_eq!(dec.decode(&bpsk_llrs(&code, 6.0), &frozen, &spec)[0].info, info);
    }

    #[test]
    fn crc_select_rules() {
        let crc = Crc::CRC12;
        let good = crc.append(&[1, 0, 1, 1, 0, 1]);
        let mut bad1 = good.clone();
        bad1[0] ^= 1;
        let mut bad2 = good.clone();
        bad2[3] ^= 1;
        let cand = |info: &Vec<u8>, metric| ListCandidate { info: info.clone(), metric };
        let list = vec![cand(&bad1, 0.0), cand(&bad2, 1.0), cand(&good, 2.0)];
        let sel = crc_select(&list, crc);
        assert_eq!((sel.rank, sel.consistent), (2, true));
        assert_eq!(sel.info, good);

        let sel = crc_select(&list[..2], crc);
        assert_eq!((sel.rank, sel.consistent), (0, false));
        assert_eq!(sel.info, bad1);

        let sel = crc_select(&list[2..], crc);
        assert_eq!((sel.rank, sel.consistent), (0, true));
    }

    #[test]
    #[should_panic(expected = "empty")]
    fn crc_select_rejects_empty() {
        crc_select(&[], Crc::CRC12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn positive_scaling_keeps_ranking(
            llrs in proptest::collection::vec(-4.0f64..4.0, 64),
            scale in prop_oneof![Just(0.25f64), Just(8.0), 0.1f64..10.0],
        ) {
            let spec = PolarSpec::new(64, 24, 12, 0.32);
            let frozen = [0u8; 40];
            let a = scl_decode(&llrs, &frozen, &spec, 8);
            let scaled: Vec<f64> = llrs.iter().map(|x| x * scale).collect();
            let b = scl_decode(&scaled, &frozen, &spec, 8);
            let ia: Vec<_> = a.iter().map(|c| &c.info).collect();
            let ib: Vec<_> = b.iter().map(|c| &c.info).collect();
            prop_assert_eq!(ia, ib);
        }
    }

    #[test]
    fn exhaustive_list_bounds_every_smaller_list() {
        // 2^8 paths fit in a list of 256, so that decode keeps every path.
        let spec = PolarSpec::new(16, 8, 12, 0.32);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let llrs: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..3.0)).collect();
            let full = scl_decode(&llrs, &[0; 8], &spec, 256)[0].metric;
            for list in [1, 2, 4, 8, 16, 64] {
                assert!(full <= scl_decode(&llrs, &[0; 8], &spec, list)[0].metric + 1e-12);
            }
        }
    }

    #[test]
    fn doubling_the_list_rarely_worsens_best_metric() {
        // Pruning is greedy, so a larger list can lose the path a smaller
        // list kept; on noisy codewords this should be rare.
        let spec = PolarSpec::new(128, 52, 12, 0.32);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (mut worse, mut total) = (0, 0);
        for _ in 0..200 {
            let info: Vec<u8> = (0..52).map(|_| rng.random_range(0..2)).collect();
            let code = polar_encode(&info, &[0; 76], &spec);
            let llrs: Vec<f64> = code
                .iter()
                .map(|&b| 2.0 * ((1.0 - 2.0 * b as f64) + rng.random_range(-1.2..1.2)))
                .collect();
            for list in [1, 2, 4, 8, 16] {
                let a = scl_decode(&llrs, &[0; 76], &spec, list)[0].metric;
                let b = scl_decode(&llrs, &[0; 76], &spec, 2 * list)[0].metric;
                total += 1;
                worse += (b > a + 1e-12) as usize;
            }
        }
        assert!(worse * 100 <= total, "{worse} of {total}");
    }
}
