//! Linear MMSE estimation of channels and coded symbols, and soft demapping.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::codebook::{Codebook, SeqIndex};
use crate::linalg::{axpy, cdot, CMatrix, Cholesky, NotPositiveDefinite};

/// Clipping of the effective gain before forming LLRs.
pub const GAIN_EPS: f64 = 1e-6;

/// Channel estimate `(SᴴS + σ² I)⁻¹ Sᴴ Y` for known signals `S`.
///
/// Row `k` of `signals` is the signal of user `k` over the rows of `y`
/// (`len × M`, row-major). Returns `K̂ × M`.
pub fn mmse_channel(signals: &CMatrix, y: &[Complex64], antennas: usize, sigma2: f64) -> Result<CMatrix, NotPositiveDefinite> {
    let k = signals.rows();
    let len = signals.cols();
    assert_eq!(y.len(), len * antennas, "observation rows");
    let mut gram = signals.row_gram();
    gram.add_to_diagonal(sigma2);
    let mut rhs = CMatrix::zeros(k, antennas);
    for u in 0..k {
        let s = signals.row(u);
        let out = rhs.row_mut(u);
        for (r, yr) in y.chunks_exact(antennas).enumerate() {
            axpy(out, s[r].conj(), yr);
        }
    }
    let chol = Cholesky::factor(gram)?;
    chol.solve_in_place(&mut rhs);
    Ok(rhs)
}

/// Pilot columns of `indices` as rows (`K̂ × n_p`).
pub fn pilot_rows(codebook: &Codebook, indices: &[SeqIndex]) -> CMatrix {
    let n_p = codebook.shape().pilot_len;
    let mut out = CMatrix::zeros(indices.len(), n_p);
    for (k, &j) in indices.iter().enumerate() {
        for r in 0..n_p {
            out[(k, r)] = codebook.pilot_entry(r, j);
        }
    }
    out
}

/// Pilot-only channel estimate from the first `n_p` rows of `Y`.
pub fn estimate_channel_pilot(
    y_pilot: &[Complex64],
    antennas: usize,
    pilots: &CMatrix,
    sigma2: f64,
) -> Result<CMatrix, NotPositiveDefinite> {
    mmse_channel(pilots, y_pilot, antennas, sigma2)
}

/// Symbol estimates `r̂_t` and effective gains `μ_t = diag(W_t B_t)`, both
/// `K̂ × T`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolEstimates {
    pub symbols: CMatrix,
    pub gains: Vec<f64>,
    users: usize,
    len: usize,
}

impl SymbolEstimates {
    pub fn users(&self) -> usize {
        self.users
    }

    pub fn symbols_per_user(&self) -> usize {
        self.len
    }

    pub fn user_symbols(&self, k: usize) -> &[Complex64] {
        self.symbols.row(k)
    }

    pub fn user_gains(&self, k: usize) -> &[f64] {
        &self.gains[k * self.len..(k + 1) * self.len]
    }
}

/// Per-symbol MMSE: `r̂_t = (B_tᴴ B_t + w σ² I)⁻¹ B_tᴴ vec(Y_t)` with
/// `B_t = [a_{t,k} ⊗ ĥ_k]_k`.
///
/// `B_tᴴ B_t = Ĝ ∘ C_t` with `Ĝ = conj(Ĥ) Ĥᵀ` and `C_t = A_tᴴ A_t`, so the
/// `(L M)`-dimensional stacking is never formed.
pub fn estimate_symbols(
    y_payload: &[Complex64],
    antennas: usize,
    codebook: &Codebook,
    indices: &[SeqIndex],
    channel: &CMatrix,
    sigma2: f64,
    prior_weight: f64,
) -> Result<SymbolEstimates, NotPositiveDefinite> {
    let shape = codebook.shape();
    let k = indices.len();
    let len = shape.symbols;
    let l = shape.spread_len;
    assert_eq!(channel.rows(), k, "one channel row per user");
    assert_eq!(y_payload.len(), len * l * antennas, "payload rows");
    let g_hat = channel.row_gram();
    let reg = prior_weight * sigma2;

    let mut symbols = CMatrix::zeros(k, len);
    let mut gains = vec![0.0; k * len];
    let mut spread = CMatrix::zeros(k, l);
    let mut z = vec![Complex64::new(0.0, 0.0); antennas];
    for t in 0..len {
        for (u, &j) in indices.iter().enumerate() {
            for r in 0..l {
                spread[(u, r)] = codebook.spread_entry(t, r, j);
            }
        }
        let block = &y_payload[t * l * antennas..(t + 1) * l * antennas];
        let c = spread.row_gram();
        let mut gram = CMatrix::from_fn(k, k, |a, b| g_hat[(a, b)] * c[(a, b)]);
        gram.add_to_diagonal(reg);
        let mut rhs = CMatrix::zeros(k, 1);
        for u in 0..k {
            z.fill(Complex64::new(0.0, 0.0));
            for (r, yr) in block.chunks_exact(antennas).enumerate() {
                axpy(&mut z, spread[(u, r)].conj(), yr);
            }
            rhs[(u, 0)] = cdot(channel.row(u), &z);
        }
        let chol = Cholesky::factor(gram)?;
        chol.solve_in_place(&mut rhs);
        let inv_diag = chol.inverse_diagonal();
        for u in 0..k {
            symbols[(u, t)] = rhs[(u, 0)];
            gains[u * len + t] = 1.0 - reg * inv_diag[u];
        }
    }
    Ok(SymbolEstimates { symbols, gains, users: k, len })
}

/// Bit LLRs (positive favours 0) of one user in codeword order.
///
/// With `r̂ = μ s + e`, `E|e|² = 2 μ (1 − μ)` and the real and imaginary
/// parts of `s` in `{±1}`: `LLR = 2√2 Re(r̂) μ / ν` per component with
/// `ν = 2 μ (1 − μ)`, `μ` clipped to `[ε, 1 − ε]`.
///
/// # Panics
/// On non-finite symbol estimates or gains.
pub fn llrs_for_user(symbols: &[Complex64], gains: &[f64], interleaver: &[u16]) -> Vec<f64> {
    assert_eq!(symbols.len(), gains.len(), "symbol and gain lengths");
    assert_eq!(interleaver.len(), 2 * symbols.len(), "interleaver length");
    let mut out = vec![0.0; interleaver.len()];
    let scale = 2.0 * core::f64::consts::SQRT_2;
    for (t, (r, &mu)) in symbols.iter().zip(gains).enumerate() {
        assert!(r.re.is_finite() && r.im.is_finite() && mu.is_finite(), "non-finite estimate at {t}");
        let mu = mu.clamp(GAIN_EPS, 1.0 - GAIN_EPS);
        let nu = 2.0 * mu * (1.0 - mu);
        let w = scale * mu / nu;
        out[interleaver[2 * t] as usize] = w * r.re;
        out[interleaver[2 * t + 1] as usize] = w * r.im;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{complex_gaussian, stream, Stream};
    use crate::SystemConfig;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// 2×2 Hermitian inverse by the adjugate.
    fn inv2(a: [[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        [[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]]
    }

    #[test]
    fn pilot_estimate_matches_explicit_inverse() {
        let mut rng = stream(21, Stream::Noise);
        for _ in 0..100 {
            let sigma2 = 0.1 + complex_gaussian(&mut rng, 1.0).norm();
            let p = CMatrix::from_fn(2, 4, |_, _| complex_gaussian(&mut rng, 1.0));
            let y: Vec<Complex64> = (0..4 * 3).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
            let h = estimate_channel_pilot(&y, 3, &p, sigma2).unwrap();
            let mut g = [[c(0.0, 0.0); 2]; 2];
            for a in 0..2 {
                for b in 0..2 {
                    g[a][b] = (0..4).map(|r| p[(a, r)].conj() * p[(b, r)]).sum();
                }
                g[a][a] += sigma2;
            }
            let gi = inv2(g);
            for k in 0..2 {
                for m in 0..3 {
                    let want: Complex64 = (0..2)
                        .map(|b| gi[k][b] * (0..4).map(|r| p[(b, r)].conj() * y[r * 3 + m]).sum::<Complex64>())
                        .sum();
                    assert!((h[(k, m)] - want).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn nopice_form_matches_explicit_inverse() {
        // One user over eight channel uses: (‖x‖² + σ²)⁻¹ xᴴ y.
        let mut rng = stream(22, Stream::Noise);
        for _ in 0..100 {
            let x = CMatrix::from_fn(1, 8, |_, _| complex_gaussian(&mut rng, 1.0));
            let y: Vec<Complex64> = (0..8 * 2).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
            let h = mmse_channel(&x, &y, 2, 0.3).unwrap();
            let e: f64 = x.row(0).iter().map(|v| v.norm_sqr()).sum();
            for m in 0..2 {
                let want: Complex64 = (0..8).map(|r| x[(0, r)].conj() * y[r * 2 + m]).sum::<Complex64>() / (e + 0.3);
                assert!((h[(0, m)] - want).norm() < 1e-9);
            }
        }
    }

    fn toy_codebook() -> Codebook {
        // L = 2, one symbol block of interest.
        let mut cfg = SystemConfig::smoke();
        cfg.spread_len = 2;
        cfg.pilot_len = 4;
        cfg.channel_uses = 4 + 64 * 2;
        cfg.antennas = 1;
        Codebook::generate(&cfg).unwrap()
    }

    #[test]
    fn symbol_estimate_matches_scalar_formula() {
        let cb = toy_codebook();
        let j = SeqIndex(17);
        let mut rng = stream(23, Stream::Noise);
        let t_len = cb.shape().symbols;
        for trial in 0..100 {
            let h = CMatrix::from_fn(1, 1, |_, _| complex_gaussian(&mut rng, 1.0));
            let y: Vec<Complex64> = (0..t_len * 2).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
            let sigma2 = 0.05 + 0.01 * trial as f64;
            for w in [2.0, 0.5] {
                let est = estimate_symbols(&y, 1, &cb, &[j], &h, sigma2, w).unwrap();
                for t in [0, 5, t_len - 1] {
                    // b = a ĥ (2 × 1): r̂ = bᴴ y / (‖b‖² + w σ²), μ = ‖b‖² / (‖b‖² + w σ²).
                    let b: Vec<Complex64> = (0..2).map(|r| cb.spread_entry(t, r, j) * h[(0, 0)]).collect();
                    let bb: f64 = b.iter().map(|v| v.norm_sqr()).sum();
                    let by: Complex64 = (0..2).map(|r| b[r].conj() * y[t * 2 + r]).sum();
                    let denom = bb + w * sigma2;
                    assert!((est.user_symbols(0)[t] - by / denom).norm() < 1e-9);
                    assert!((est.user_gains(0)[t] - bb / denom).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn symbol_estimate_matches_stacked_system() {
        // Two users, M = 3: build B_t (L M × 2) explicitly and invert 2 × 2.
        let mut cfg = SystemConfig::smoke();
        cfg.antennas = 3;
        let cb = Codebook::generate(&cfg).unwrap();
        let s = *cb.shape();
        let idx = [SeqIndex(5), SeqIndex(600)];
        let mut rng = stream(24, Stream::Noise);
        let h = CMatrix::from_fn(2, 3, |_, _| complex_gaussian(&mut rng, 1.0));
        let y: Vec<Complex64> = (0..s.symbols * s.spread_len * 3).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
        let (sigma2, w) = (0.2, 2.0);
        let est = estimate_symbols(&y, 3, &cb, &idx, &h, sigma2, w).unwrap();
        for t in [0, 17, s.symbols - 1] {
            let lm = s.spread_len * 3;
            // vec(Y_t) stacked row by row: entry (r, m) at r * M + m.
            let b: Vec<[Complex64; 2]> = (0..lm)
                .map(|i| {
                    let (r, m) = (i / 3, i % 3);
                    core::array::from_fn(|k| cb.spread_entry(t, r, idx[k]) * h[(k, m)])
                })
                .collect();
            let yt = &y[t * lm..(t + 1) * lm];
            let mut g = [[c(0.0, 0.0); 2]; 2];
            for a in 0..2 {
                for bb in 0..2 {
                    g[a][bb] = b.iter().map(|row| row[a].conj() * row[bb]).sum();
                }
                g[a][a] += w * sigma2;
            }
            let gi = inv2(g);
            let rhs: [Complex64; 2] = core::array::from_fn(|a| b.iter().zip(yt).map(|(row, v)| row[a].conj() * v).sum());
            for k in 0..2 {
                let want = gi[k][0] * rhs[0] + gi[k][1] * rhs[1];
                assert!((est.user_symbols(k)[t] - want).norm() < 1e-9);
                assert!((est.user_gains(k)[t] - (1.0 - w * sigma2 * gi[k][k].re)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn llr_sign_scale_and_deinterleaving() {
        let perm = [2u16, 0, 3, 1];
        let llr = llrs_for_user(&[c(0.5, -0.25), c(-1.0, 2.0)], &[0.5, 0.5], &perm);
        // μ = 0.5 → ν = 0.5, weight 2√2.
        let w = 2.0 * core::f64::consts::SQRT_2;
        assert!((llr[2] - w * 0.5).abs() < 1e-12);
        assert!((llr[0] + w * 0.25).abs() < 1e-12);
        assert!((llr[3] + w).abs() < 1e-12);
        assert!((llr[1] - 2.0 * w).abs() < 1e-12);
        // Clipping keeps everything finite.
        assert!(llrs_for_user(&[c(1.0, 1.0)], &[1.0], &[0, 1]).iter().all(|v| v.is_finite()));
        assert!(llrs_for_user(&[c(1.0, 1.0)], &[-0.3], &[0, 1]).iter().all(|v| v.is_finite()));
    }

    #[test]
    #[should_panic(expected = "non-finite")]
    fn llr_rejects_nan() {
        llrs_for_user(&[c(f64::NAN, 0.0)], &[0.5], &[0, 1]);
    }
}
