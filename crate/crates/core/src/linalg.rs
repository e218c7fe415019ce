//! Small dense and sparse complex linear-algebra helpers.

use alloc::vec::Vec;

use crate::{CMatrix, Complex64};

pub const I: Complex64 = Complex64::new(0.0, 1.0);
pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub fn dagger(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn anticommutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b + b * a
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().copied().sum()
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// `max |m - m^dagger|` entrywise.
pub fn hermiticity_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// Hermitian part `(m + m^dagger) / 2`.
pub fn symmetrize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Eigenvalues and eigenvectors of the Hermitian part of `m`, ascending.
pub(crate) fn eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = symmetrize(m).symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = symmetrize(m).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Trace distance `||a - b||_1 / 2` of two Hermitian matrices.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    0.5 * hermitian_eigenvalues(&(a - b)).iter().map(|x| x.abs()).sum::<f64>()
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).first().copied().unwrap_or(0.0)
}

/// `tr(rho^2)`, real for Hermitian `rho`.
pub fn purity(rho: &CMatrix) -> f64 {
    rho.iter().map(|z| z.norm_sqr()).sum()
}

/// `<v| m |v>` for a column vector `v`.
pub fn expectation(m: &CMatrix, v: &nalgebra::DVectorView<'_, Complex64>) -> Complex64 {
    let mv = m * v;
    v.iter().zip(mv.iter()).map(|(a, b)| a.conj() * b).sum()
}

/// Operator stored as its nonzero entries, for products with dense
/// column-major blocks in the hierarchy kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    entries: Vec<(usize, usize, Complex64)>,
}

impl SparseOperator {
    pub fn from_dense(m: &CMatrix) -> Self {
        let dim = m.nrows();
        let mut entries = Vec::new();
        for k in 0..dim {
            for i in 0..dim {
                let z = m[(i, k)];
                if z != ZERO {
                    entries.push((i, k, z));
                }
            }
        }
        Self { dim, entries }
    }

    /// Replaces the stored entries by the nonzeros of `m`, reusing storage.
    pub fn assign_dense(&mut self, m: &CMatrix) {
        self.assign_scaled(m, ONE);
    }

    /// Replaces the stored entries by the nonzeros of `alpha * m`.
    pub fn assign_scaled(&mut self, m: &CMatrix, alpha: Complex64) {
        self.dim = m.nrows();
        self.entries.clear();
        for k in 0..self.dim {
            for i in 0..self.dim {
                let z = m[(i, k)];
                if z != ZERO {
                    self.entries.push((i, k, alpha * z));
                }
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// `y += alpha * A x` for column-major `dim x dim` blocks `x`, `y`.
    #[inline]
    pub fn mul_add(&self, alpha: Complex64, x: &[Complex64], y: &mut [Complex64]) {
        if alpha == ONE {
            return self.mul_acc(x, y);
        }
        let d = self.dim;
        debug_assert_eq!(x.len(), d * d);
        debug_assert_eq!(y.len(), d * d);
        for (yc, xc) in y.chunks_exact_mut(d).zip(x.chunks_exact(d)) {
            for &(i, k, a) in &self.entries {
                yc[i] += alpha * a * xc[k];
            }
        }
    }

    /// `y += A x` for column-major `dim x dim` blocks `x`, `y`.
    #[inline]
    pub fn mul_acc(&self, x: &[Complex64], y: &mut [Complex64]) {
        let d = self.dim;
        debug_assert_eq!(x.len(), d * d);
        debug_assert_eq!(y.len(), d * d);
        for (yc, xc) in y.chunks_exact_mut(d).zip(x.chunks_exact(d)) {
            for &(i, k, a) in &self.entries {
                yc[i] += a * xc[k];
            }
        }
    }
}
