//! Dense complex matrices and Hermitian positive-definite solves.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("matrix is not positive definite (pivot {pivot} = {value})")]
pub struct NotPositiveDefinite {
    pub pivot: usize,
    pub value: f64,
}

/// Row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length");
        CMatrix { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        CMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [Complex64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Squared Frobenius norm.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `A^H A` when the rows of `self` are the columns of `A`, i.e.
    /// `G[k][l] = <row k, row l>` with the first argument conjugated.
    pub fn row_gram(&self) -> CMatrix {
        let k = self.rows;
        let mut g = CMatrix::zeros(k, k);
        for a in 0..k {
            for b in a..k {
                let v = cdot(self.row(a), self.row(b));
                g[(a, b)] = v;
                g[(b, a)] = v.conj();
            }
        }
        g
    }

    pub fn add_to_diagonal(&mut self, v: f64) {
        let n = self.rows.min(self.cols);
        for i in 0..n {
            self.data[i * self.cols + i] += v;
        }
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.cols + c]
    }
}

/// `Σ conj(a_i) b_i`.
#[inline]
pub fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re + x.im * y.im;
        im += x.re * y.im - x.im * y.re;
    }
    Complex64::new(re, im)
}

/// `acc += alpha * x`.
#[inline]
pub fn axpy(acc: &mut [Complex64], alpha: Complex64, x: &[Complex64]) {
    for (a, v) in acc.iter_mut().zip(x) {
        *a += alpha * v;
    }
}

/// Lower Cholesky factor `L` of a Hermitian positive-definite matrix,
/// `A = L L^H`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: CMatrix,
}

impl Cholesky {
    pub fn factor(mut a: CMatrix) -> Result<Self, NotPositiveDefinite> {
        assert_eq!(a.rows, a.cols, "square matrix required");
        let n = a.rows;
        for i in 0..n {
            for j in 0..=i {
                let (upper, lower) = a.data.split_at_mut(i * n);
                let row_i = &lower[..n];
                let row_j = if j == i { row_i } else { &upper[j * n..j * n + n] };
                // Σ_{k<j} L[i][k] conj(L[j][k]) = conj(<row_i, row_j>) over the prefix.
                let s = row_i[j] - cdot(&row_j[..j], &row_i[..j]);
                if i == j {
                    if !(s.re > 0.0) || !s.re.is_finite() {
                        return Err(NotPositiveDefinite { pivot: i, value: s.re });
                    }
                    lower[i] = Complex64::new(libm::sqrt(s.re), 0.0);
                } else {
                    let d = upper[j * n + j].re;
                    lower[j] = s / d;
                }
            }
            for c in i + 1..n {
                a.data[i * n + c] = Complex64::new(0.0, 0.0);
            }
        }
        Ok(Cholesky { l: a })
    }

    pub fn dim(&self) -> usize {
        self.l.rows
    }

    pub fn factor_matrix(&self) -> &CMatrix {
        &self.l
    }

    /// Solves `A X = B` in place; `b` has `dim` rows and any number of columns.
    pub fn solve_in_place(&self, b: &mut CMatrix) {
        let n = self.dim();
        assert_eq!(b.rows, n, "right-hand side rows");
        let w = b.cols;
        let l = &self.l;
        // L Y = B
        for i in 0..n {
            let (done, rest) = b.data.split_at_mut(i * w);
            let row = &mut rest[..w];
            for k in 0..i {
                let c = l[(i, k)];
                if c != Complex64::new(0.0, 0.0) {
                    axpy(row, -c, &done[k * w..(k + 1) * w]);
                }
            }
            let d = 1.0 / l[(i, i)].re;
            row.iter_mut().for_each(|z| *z *= d);
        }
        // L^H X = Y
        for i in (0..n).rev() {
            let (head, tail) = b.data.split_at_mut((i + 1) * w);
            let row = &mut head[i * w..];
            for k in i + 1..n {
                let c = l[(k, i)].conj();
                if c != Complex64::new(0.0, 0.0) {
                    axpy(row, -c, &tail[(k - i - 1) * w..(k - i) * w]);
                }
            }
            let d = 1.0 / l[(i, i)].re;
            row.iter_mut().for_each(|z| *z *= d);
        }
    }

    pub fn solve_vec(&self, b: &[Complex64]) -> Vec<Complex64> {
        let mut m = CMatrix::from_vec(b.len(), 1, b.to_vec());
        self.solve_in_place(&mut m);
        m.data
    }

    /// Diagonal of `A^{-1}`, from the rows of `L^{-1}`.
    pub fn inverse_diagonal(&self) -> Vec<f64> {
        let n = self.dim();
        let l = &self.l;
        let mut v = CMatrix::zeros(n, n);
        let mut diag = vec![0.0; n];
        for i in 0..n {
            let (done, rest) = v.data.split_at_mut(i * n);
            let row = &mut rest[..n];
            row[i] = Complex64::new(1.0, 0.0);
            for k in 0..i {
                let c = l[(i, k)];
                if c != Complex64::new(0.0, 0.0) {
                    axpy(&mut row[..=k], -c, &done[k * n..k * n + k + 1]);
                }
            }
            let d = 1.0 / l[(i, i)].re;
            for (k, z) in row[..=i].iter_mut().enumerate() {
                *z *= d;
                diag[k] += z.norm_sqr();
            }
        }
        diag
    }
}
