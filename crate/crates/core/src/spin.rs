//! Collective-spin representation of the symmetric `j = N/2` subspace.
//!
//! Basis order is `|j, m>` with `m` ascending from `-j` to `+j`.

use alloc::vec::Vec;

use nalgebra::DVector;

#[allow(unused_imports)]
use crate::prelude::*;
use crate::error::invalid;
use crate::linalg::{self, ONE, ZERO};
use crate::{CMatrix, Complex64, Error, Result};

/// Relative gap below which two levels count as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-10;

/// A point `(lambda, chi)` of the control plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlPoint {
    pub lambda: f64,
    pub chi: f64,
}

impl ControlPoint {
    pub const fn new(lambda: f64, chi: f64) -> Self {
        Self { lambda, chi }
    }

    /// `self + s (other - self)`.
    pub fn lerp(self, other: ControlPoint, s: f64) -> ControlPoint {
        ControlPoint {
            lambda: self.lambda + s * (other.lambda - self.lambda),
            chi: self.chi + s * (other.chi - self.chi),
        }
    }

    pub fn distance(self, other: ControlPoint) -> f64 {
        libm::hypot(other.lambda - self.lambda, other.chi - self.chi)
    }
}

/// Quasispin matrices of `N` qubits restricted to the fully symmetric subspace.
#[derive(Debug, Clone)]
pub struct SpinSystem {
    n_qubits: usize,
    jx: CMatrix,
    jy: CMatrix,
    jz: CMatrix,
    blocks: HamiltonianBlocks,
}

/// The four fixed operators whose combination gives the LMG Hamiltonian:
/// `H = jz - (lambda/N) jx^2 - (chi/N) {jx, jz+N/2} - (chi^2/N) (jz+N/2)^2`.
#[derive(Debug, Clone)]
pub struct HamiltonianBlocks {
    pub jz: CMatrix,
    pub jx_sq: CMatrix,
    pub cross: CMatrix,
    pub shifted_sq: CMatrix,
    n: f64,
}

impl HamiltonianBlocks {
    pub fn at(&self, point: ControlPoint) -> CMatrix {
        let mut h = self.jz.clone();
        self.add_interaction(point, &mut h);
        h
    }

    /// Adds the bracketed interaction terms to `h`.
    pub fn add_interaction(&self, point: ControlPoint, h: &mut CMatrix) {
        let ControlPoint { lambda, chi } = point;
        let n = self.n;
        h.zip_zip_apply(&self.jx_sq, &self.cross, |hv, a, b| {
            *hv -= a * (lambda / n) + b * (chi / n);
        });
        h.zip_apply(&self.shifted_sq, |hv, c| *hv -= c * (chi * chi / n));
    }

    /// `dH/dlambda`.
    pub fn d_lambda(&self) -> CMatrix {
        self.jx_sq.scale(-1.0 / self.n)
    }

    /// `dH/dchi` at the given `chi`.
    pub fn d_chi(&self, chi: f64) -> CMatrix {
        (&self.cross + self.shifted_sq.scale(2.0 * chi)).scale(-1.0 / self.n)
    }
}

/// Builds `jx`, `jy`, `jz` for `n` qubits.
pub fn build_spin_operators(n: usize) -> Result<SpinSystem> {
    SpinSystem::new(n)
}

impl SpinSystem {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSize(n));
        }
        let dim = n + 1;
        let j = n as f64 / 2.0;
        let mut jplus = CMatrix::zeros(dim, dim);
        for a in 0..n {
            let m = a as f64 - j;
            jplus[(a + 1, a)] = Complex64::new((j * (j + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
        }
        let jminus = jplus.adjoint();
        let jx = (&jplus + &jminus).scale(0.5);
        let jy = (&jplus - &jminus) * Complex64::new(0.0, -0.5);
        let jz = CMatrix::from_diagonal(&DVector::from_fn(dim, |a, _| {
            Complex64::new(a as f64 - j, 0.0)
        }));
        let shifted = &jz + CMatrix::identity(dim, dim).scale(j);
        let blocks = HamiltonianBlocks {
            jx_sq: &jx * &jx,
            cross: linalg::anticommutator(&jx, &shifted),
            shifted_sq: &shifted * &shifted,
            jz: jz.clone(),
            n: n as f64,
        };
        Ok(Self { n_qubits: n, jx, jy, jz, blocks })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.n_qubits + 1
    }

    /// Total spin quantum number `j = N/2`.
    pub fn j(&self) -> f64 {
        self.n_qubits as f64 / 2.0
    }

    pub fn jx(&self) -> &CMatrix {
        &self.jx
    }

    pub fn jy(&self) -> &CMatrix {
        &self.jy
    }

    pub fn jz(&self) -> &CMatrix {
        &self.jz
    }

    pub fn blocks(&self) -> &HamiltonianBlocks {
        &self.blocks
    }
}

/// System Hamiltonian at `point`, optionally renormalized by the
/// counterterm `(q/N) Q^2` with `Q = sin(theta) jx + cos(theta) jz`.
pub fn build_hamiltonian(
    sys: &SpinSystem,
    point: ControlPoint,
    renormalize: bool,
    q: f64,
    theta: f64,
) -> CMatrix {
    let mut h = sys.blocks.at(point);
    if renormalize {
        let coupling = build_coupling_operator(sys, theta);
        h += (&coupling * &coupling).scale(q / sys.n_qubits as f64);
    }
    h
}

/// `Q = sin(theta) jx + cos(theta) jz`.
pub fn build_coupling_operator(sys: &SpinSystem, theta: f64) -> CMatrix {
    sys.jx.scale(theta.sin()) + sys.jz.scale(theta.cos())
}

/// `(-1)^(jz - N/2)`, diagonal with entries `(-1)^(m + j)`.
pub fn parity_operator(sys: &SpinSystem) -> CMatrix {
    CMatrix::from_diagonal(&DVector::from_fn(sys.dim(), |a, _| {
        if a % 2 == 0 { ONE } else { -ONE }
    }))
}

/// Ordered eigen-decomposition of a Hermitian operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Nondecreasing energies.
    pub energies: Vec<f64>,
    /// Eigenvectors as columns, each with its largest-modulus entry real positive.
    pub states: CMatrix,
    /// Parity of each level when the decomposition was parity resolved.
    pub parities: Option<Vec<i8>>,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// `E_1 - E_0`.
    pub fn gap10(&self) -> f64 {
        if self.energies.len() < 2 {
            return f64::INFINITY;
        }
        self.energies[1] - self.energies[0]
    }

    pub fn state(&self, n: usize) -> nalgebra::DVectorView<'_, Complex64> {
        self.states.column(n)
    }

    /// Scale used by the relative degeneracy tests.
    pub fn energy_scale(&self) -> f64 {
        self.energies.iter().fold(1.0f64, |acc, e| acc.max(e.abs()))
    }
}

fn check_hermitian(h: &CMatrix) -> Result<()> {
    let dev = linalg::hermiticity_deviation(h);
    if !(dev <= 1e-10 * linalg::max_abs(h).max(1.0)) {
        return Err(Error::NotHermitian(dev));
    }
    Ok(())
}

fn fix_phases(states: &mut CMatrix) {
    for mut col in states.column_iter_mut() {
        let max = col.iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
        if max == 0.0 {
            continue;
        }
        // First entry within rounding of the maximum wins.
        let pivot = col
            .iter()
            .position(|z| z.norm() >= max * (1.0 - 1e-12))
            .unwrap_or(0);
        let z = col[pivot];
        let phase = z.conj() / z.norm();
        for v in col.iter_mut() {
            *v *= phase;
        }
    }
}

/// Diagonalizes a Hermitian matrix: ascending energies, deterministic phases.
pub fn eigendecompose(h: &CMatrix) -> Result<Spectrum> {
    check_hermitian(h)?;
    let (energies, mut states) = linalg::eigh(h);
    fix_phases(&mut states);
    Ok(Spectrum { energies, states, parities: None })
}

/// Diagonalizes `h` separately in the two sectors of a diagonal parity
/// operator so that every eigenvector carries an exact parity label.
///
/// Falls back to [`eigendecompose`] (no labels) when `h` mixes the sectors.
pub fn eigendecompose_parity_resolved(h: &CMatrix, parity: &CMatrix) -> Result<Spectrum> {
    check_hermitian(h)?;
    let dim = h.nrows();
    let comm = linalg::commutator(h, parity);
    if linalg::max_abs(&comm) > 1e-12 * linalg::max_abs(h).max(1.0) {
        return eigendecompose(h);
    }
    let mut levels: Vec<(f64, i8, DVector<Complex64>)> = Vec::with_capacity(dim);
    for sign in [1.0, -1.0] {
        let idx: Vec<usize> = (0..dim).filter(|&a| parity[(a, a)].re == sign).collect();
        if idx.is_empty() {
            continue;
        }
        let sub = CMatrix::from_fn(idx.len(), idx.len(), |a, b| h[(idx[a], idx[b])]);
        let (vals, vecs) = linalg::eigh(&sub);
        for (k, e) in vals.into_iter().enumerate() {
            let mut v = DVector::from_element(dim, ZERO);
            for (a, &row) in idx.iter().enumerate() {
                v[row] = vecs[(a, k)];
            }
            levels.push((e, sign as i8, v));
        }
    }
    levels.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
    let energies = levels.iter().map(|l| l.0).collect();
    let parities = levels.iter().map(|l| l.1).collect();
    let mut states = CMatrix::from_fn(dim, dim, |i, k| levels[k].2[i]);
    fix_phases(&mut states);
    Ok(Spectrum { energies, states, parities: Some(parities) })
}

/// Gibbs state `exp(-beta H) / Z` from a spectrum. `beta = +inf` gives the
/// equal-weight mixture over the (possibly degenerate) ground multiplet.
pub fn thermal_state(spec: &Spectrum, beta: f64) -> Result<CMatrix> {
    if beta.is_nan() || beta < 0.0 {
        return Err(Error::InvalidTemperature(beta));
    }
    let e0 = spec.energies[0];
    let weights: Vec<f64> = if beta.is_infinite() {
        let tol = DEGENERACY_TOL * spec.energy_scale();
        spec.energies
            .iter()
            .map(|&e| if e - e0 <= tol { 1.0 } else { 0.0 })
            .collect()
    } else {
        spec.energies.iter().map(|&e| (-beta * (e - e0)).exp()).collect()
    };
    let z: f64 = weights.iter().sum();
    let dim = spec.dim();
    let mut rho = CMatrix::zeros(dim, dim);
    for (k, w) in weights.iter().enumerate() {
        if *w == 0.0 {
            continue;
        }
        let v = spec.states.column(k);
        rho += (v * v.adjoint()).scale(w / z);
    }
    Ok(rho)
}

/// Thermodynamic-limit critical coupling `lambda_c(chi) = 1 - chi^2 / (1 - chi^2)`.
pub fn critical_lambda(chi: f64) -> Result<f64> {
    if !(chi.abs() < 1.0) {
        return Err(Error::CriticalDomain(chi));
    }
    let c2 = chi * chi;
    Ok(1.0 - c2 / (1.0 - c2))
}

/// One grid point of a spectrum scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub s: f64,
    pub point: ControlPoint,
    pub energies: Vec<f64>,
    pub gap10: f64,
    pub parities: Option<Vec<i8>>,
}

/// Diagonalizes `H_S` on `points` equally spaced values of `s` along the
/// segment `start -> end`. Rows carry parity labels when the whole segment
/// lies on `chi = 0`.
pub fn spectrum_scan(
    sys: &SpinSystem,
    start: ControlPoint,
    end: ControlPoint,
    points: usize,
) -> Result<Vec<ScanRow>> {
    if points < 2 {
        return Err(invalid("points", "a scan needs at least two grid points"));
    }
    let on_parity_line = start.chi == 0.0 && end.chi == 0.0;
    let parity = parity_operator(sys);
    (0..points)
        .map(|i| {
            let s = i as f64 / (points - 1) as f64;
            let point = start.lerp(end, s);
            let h = sys.blocks.at(point);
            let spec = if on_parity_line {
                eigendecompose_parity_resolved(&h, &parity)?
            } else {
                eigendecompose(&h)?
            };
            Ok(ScanRow { s, point, gap10: spec.gap10(), energies: spec.energies, parities: spec.parities })
        })
        .collect()
}

/// Index of the smallest `gap10` in a scan.
pub fn min_gap_row(rows: &[ScanRow]) -> Option<&ScanRow> {
    rows.iter().min_by(|a, b| a.gap10.total_cmp(&b.gap10))
}
