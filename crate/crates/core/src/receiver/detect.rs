//! Energy detection of active codebook columns.
//!
//! `λ_j = ‖p_jᴴ Y_p‖² + Σ_t ‖a_{t,j}ᴴ Y_t‖²`. Every entry of a column is one
//! of four scaled chips, so for each packed plane of four rows the partial
//! correlation `Σ_r conj(c_r) y_r` takes at most 256 values. Those are
//! tabulated once per plane and the sweep over `J` columns becomes table
//! lookups and additions.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use num_complex::Complex64;

use crate::channel::Observation;
use crate::codebook::{chip, Codebook, SeqIndex};

/// Columns processed together in the pilot sweep.
const PILOT_BLOCK: usize = 1024;

/// Detected columns in decreasing statistic order.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub indices: Vec<SeqIndex>,
    pub statistics: Vec<f64>,
}

/// Fills `table[c * m..(c + 1) * m]` with `Σ_r conj(chip(c_r)) y_r` for every
/// code byte `c` over `rows.len() ≤ 4` rows.
fn build_table(rows: &[&[Complex64]], m: usize, table: &mut Vec<Complex64>) {
    let size = 1usize << (2 * rows.len());
    table.clear();
    table.resize(size * m, Complex64::new(0.0, 0.0));
    let mut filled = 1;
    for y in rows {
        let rotated: [Vec<Complex64>; 4] =
            core::array::from_fn(|code| y.iter().map(|v| chip(code as u8).conj() * v).collect());
        for hi in (0..4).rev() {
            for lo in 0..filled {
                let dst = (hi * filled + lo) * m;
                for i in 0..m {
                    table[dst + i] = table[lo * m + i] + rotated[hi][i];
                }
            }
        }
        filled *= 4;
    }
}

#[inline]
fn accumulate(acc: &mut [Complex64], entry: &[Complex64]) {
    for (a, e) in acc.iter_mut().zip(entry) {
        *a += e;
    }
}

#[inline]
fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `λ_j` for every column.
pub fn energy_statistics(y: &Observation, codebook: &Codebook) -> Vec<f64> {
    let shape = codebook.shape();
    let j_total = codebook.num_sequences();
    let m = y.antennas();
    assert_eq!(y.channel_uses(), shape.channel_uses(), "observation length");
    let mut lambda = vec![0.0; j_total];
    let mut table = Vec::new();

    let pilot_planes = shape.pilot_planes();
    let ps = codebook.pilot_scale() * codebook.pilot_scale();
    let mut acc = vec![Complex64::new(0.0, 0.0); PILOT_BLOCK.min(j_total) * m];
    for start in (0..j_total).step_by(PILOT_BLOCK) {
        let end = (start + PILOT_BLOCK).min(j_total);
        let acc = &mut acc[..(end - start) * m];
        acc.fill(Complex64::new(0.0, 0.0));
        for g in 0..pilot_planes {
            let rows: Vec<&[Complex64]> = (4 * g..(4 * g + 4).min(shape.pilot_len)).map(|r| y.row(r)).collect();
            build_table(&rows, m, &mut table);
            let plane = &codebook.pilot_plane(g)[start..end];
            for (a, &c) in acc.chunks_exact_mut(m).zip(plane) {
                let c = c as usize * m;
                accumulate(a, &table[c..c + m]);
            }
        }
        for (l, a) in lambda[start..end].iter_mut().zip(acc.chunks_exact(m)) {
            *l = ps * norm_sqr(a);
        }
    }

    let spread_planes = shape.spread_planes();
    let ss = codebook.spread_scale() * codebook.spread_scale();
    let mut tables: Vec<Vec<Complex64>> = vec![Vec::new(); spread_planes];
    let mut corr = vec![Complex64::new(0.0, 0.0); m];
    for t in 0..shape.symbols {
        let base = shape.pilot_len + t * shape.spread_len;
        for (g, tab) in tables.iter_mut().enumerate() {
            let rows: Vec<&[Complex64]> =
                (4 * g..(4 * g + 4).min(shape.spread_len)).map(|r| y.row(base + r)).collect();
            build_table(&rows, m, tab);
        }
        let planes: Vec<&[u8]> = (0..spread_planes).map(|g| codebook.spread_plane(t, g)).collect();
        for (j, l) in lambda.iter_mut().enumerate() {
            let c0 = planes[0][j] as usize * m;
            corr.copy_from_slice(&tables[0][c0..c0 + m]);
            for g in 1..spread_planes {
                let c = planes[g][j] as usize * m;
                accumulate(&mut corr, &tables[g][c..c + m]);
            }
            *l += ss * norm_sqr(&corr);
        }
    }
    lambda
}

/// The `count` columns with the largest statistic among those not in
/// `exclude`; ties go to the lower index.
pub fn energy_detect(y: &Observation, codebook: &Codebook, count: usize, exclude: &[SeqIndex]) -> Detection {
    let lambda = energy_statistics(y, codebook);
    top_columns(&lambda, count, exclude)
}

pub fn top_columns(lambda: &[f64], count: usize, exclude: &[SeqIndex]) -> Detection {
    let mut skip = vec![false; lambda.len()];
    for e in exclude {
        skip[e.get()] = true;
    }
    let mut cand: Vec<(f64, u32)> =
        lambda.iter().enumerate().filter(|(j, _)| !skip[*j]).map(|(j, &l)| (l, j as u32)).collect();
    let cmp = |a: &(f64, u32), b: &(f64, u32)| -> Ordering { b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)) };
    let count = count.min(cand.len());
    if count == 0 {
        return Detection { indices: Vec::new(), statistics: Vec::new() };
    }
    if count < cand.len() {
        cand.select_nth_unstable_by(count - 1, cmp);
        cand.truncate(count);
    }
    cand.sort_unstable_by(cmp);
    Detection {
        indices: cand.iter().map(|c| SeqIndex(c.1)).collect(),
        statistics: cand.iter().map(|c| c.0).collect(),
    }
}
