//! Time-dependent Lindblad dynamics in the instantaneous eigenbasis.
//!
//! With `H_S(t) = sum_n E_n |E_n><E_n|` the jump operators are
//! `S(e) = sum_{E_m - E_n = e} <E_n|Q|E_m> |E_n><E_m|`, so `S(e)` with `e > 0`
//! lowers the energy by `e`. The generator is
//!
//! ```text
//! d rho/dt = -i[H_S + H_L, rho] + (1/N) sum_e G(e) [S rho S^dagger - {S^dagger S, rho}/2]
//! ```
//!
//! with rates `G(e) = 2 J(e) (1 + n(e))` and the Lamb shift `H_L` built
//! from the truncated correlation expansion.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use crate::prelude::*;
use crate::bath::{matsubara_expansion, power_spectrum, BathModel, ExpansionTerm};
use crate::error::invalid;
use crate::hamiltonian::HamiltonianSource;
use crate::linalg::{self, I, ZERO};
use crate::ode::{self, Method, OdeOptions, OdeStats, OdeSystem};
use crate::spin::Spectrum;
use crate::trajectory::{check_density_matrix, Trajectory};
use crate::{CMatrix, Complex64, Result};

/// Default gap binning tolerance relative to the largest `|E_n|`.
pub const DEFAULT_BIN_REL_TOL: f64 = 1e-9;

/// Jump operators of one instantaneous spectrum, grouped by Bohr frequency.
///
/// Operators are stored sparsely in the eigenbasis `basis`; entry
/// `(row, col, value)` of bin `b` stands for `value |E_row><E_col|`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpDecomposition {
    /// Ascending Bohr frequencies, symmetric about 0.
    pub gaps: Vec<f64>,
    /// `G(e)` per gap; zero until [`JumpDecomposition::assign_rates`].
    pub rates: Vec<f64>,
    pub entries: Vec<Vec<(usize, usize, Complex64)>>,
    /// Eigenvectors as columns.
    pub basis: CMatrix,
    /// Energies of the basis vectors.
    pub energies: Vec<f64>,
}

impl JumpDecomposition {
    pub fn len(&self) -> usize {
        self.gaps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaps.is_empty()
    }

    /// Position of the bin whose gap is `-gaps[b]`.
    pub fn mirror(&self, b: usize) -> usize {
        self.gaps.len() - 1 - b
    }

    /// `S(gaps[b])` in the eigenbasis.
    pub fn eigenbasis_operator(&self, b: usize) -> CMatrix {
        let d = self.basis.nrows();
        let mut s = CMatrix::zeros(d, d);
        for &(r, c, v) in &self.entries[b] {
            s[(r, c)] += v;
        }
        s
    }

    /// `S(gaps[b])` in the original basis.
    pub fn jump_operator(&self, b: usize) -> CMatrix {
        &self.basis * self.eigenbasis_operator(b) * self.basis.adjoint()
    }

    /// Fills `rates` with `G(e)` of `bath`.
    pub fn assign_rates(&mut self, bath: &BathModel) {
        self.rates = self.gaps.iter().map(|&e| rate(bath, e)).collect();
    }
}

/// Groups all Bohr frequencies `E_m - E_n` of `spec` into bins of absolute
/// width `bin_tol` and collects the matrix elements of `q` per bin.
///
/// Bins are formed on `|e|` and mirrored, so `S(-e) = S(e)^dagger` holds
/// exactly; the bin containing `e = 0` is pinned to zero.
pub fn jump_operators(spec: &Spectrum, q: &CMatrix, bin_tol: f64) -> Result<JumpDecomposition> {
    if !(bin_tol > 0.0) {
        return Err(invalid("bin_tol", "gap binning tolerance must be positive"));
    }
    let d = spec.dim();
    if q.nrows() != d || q.ncols() != d {
        return Err(invalid("q", "coupling operator dimension differs from the spectrum"));
    }
    let qe = spec.states.adjoint() * q * &spec.states;
    let e = &spec.energies;
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(d * (d + 1) / 2);
    for m in 0..d {
        for n in 0..=m {
            pairs.push(((e[m] - e[n]).abs(), m, n));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Clusters of nonnegative gaps; cluster 0 always holds the diagonal pairs.
    let mut cluster_of = vec![0usize; pairs.len()];
    let mut reps: Vec<(f64, usize)> = vec![(0.0, 0)];
    let mut first = 0.0;
    for (i, p) in pairs.iter().enumerate() {
        if p.0 - first > bin_tol {
            reps.push((0.0, 0));
            first = p.0;
        }
        let c = reps.len() - 1;
        cluster_of[i] = c;
        reps[c].0 += p.0;
        reps[c].1 += 1;
    }
    let positive: Vec<f64> = reps.iter().skip(1).map(|&(s, k)| s / k as f64).collect();
    let np = positive.len();
    let mut gaps: Vec<f64> = positive.iter().rev().map(|g| -g).collect();
    gaps.push(0.0);
    gaps.extend_from_slice(&positive);
    let zero = np;
    let mut entries: Vec<Vec<(usize, usize, Complex64)>> = vec![Vec::new(); gaps.len()];
    let floor = 1e-14 * linalg::max_abs(&qe);
    for (p, &c) in pairs.iter().zip(&cluster_of) {
        let (_, m, n) = *p;
        // Orient so that E_hi >= E_lo; then S(+e) gets |E_lo><E_hi|.
        let (hi, lo) = if e[m] >= e[n] { (m, n) } else { (n, m) };
        let (down, up) = if c == 0 { (zero, zero) } else { (zero + c, zero - c) };
        let v = qe[(lo, hi)];
        if v.norm() > floor {
            entries[down].push((lo, hi, v));
        }
        if hi != lo {
            let w = qe[(hi, lo)];
            if w.norm() > floor {
                entries[up].push((hi, lo, w));
            }
        }
    }
    let rates = vec![0.0; gaps.len()];
    Ok(JumpDecomposition { gaps, rates, entries, basis: spec.states.clone(), energies: e.clone() })
}

/// Transition rate `G(e) = 2 [1 + n(e)] [J(e) H(e) - J(-e) H(-e)]`, equal to
/// the bath power spectrum; `G(0) = 4 q T / gamma`.
pub fn rate(bath: &BathModel, epsilon: f64) -> f64 {
    power_spectrum(bath, epsilon)
}

/// Real part of `c_0 e/(gamma^2 + e^2) + sum_{k=1..M} c_k e/(nu_k^2 + e^2)`.
fn lamb_coefficient(terms: &[ExpansionTerm], epsilon: f64) -> f64 {
    terms
        .iter()
        .map(|t| (t.c * (epsilon / (t.nu * t.nu + epsilon * epsilon))).re)
        .sum()
}

/// Upper bound on the Matsubara terms `k > M` dropped from the Lamb-shift
/// coefficient at gap `epsilon`; infinite when `nu_{M+1} <= gamma`.
pub fn lamb_shift_tail_bound(bath: &BathModel, epsilon: f64) -> f64 {
    let m = bath.m_cut;
    let nu = bath.matsubara_frequency(m + 1);
    let g = bath.gamma;
    if nu <= g {
        return f64::INFINITY;
    }
    // |c_k| e / nu_k^2 <= 4 q gamma T |e| / nu_k^3 * nu_{M+1}^2/(nu_{M+1}^2 - gamma^2),
    // and sum_{k > M} k^{-3} <= 1/(2 M^2) (or zeta(3) < 1.21 for M = 0).
    let two_pi_t = 2.0 * core::f64::consts::PI * bath.temperature;
    let zeta_tail = if m == 0 { 1.21 } else { 0.5 / (m * m) as f64 };
    4.0 * bath.q * g * bath.temperature * epsilon.abs() / two_pi_t.powi(3) * zeta_tail * nu * nu
        / (nu * nu - g * g)
}

/// Lamb-shift Hamiltonian
/// `H_L = (1/N) sum_e Re[c_0 e/(gamma^2+e^2) + sum_k c_k e/(nu_k^2+e^2)] S^dagger(e) S(e)`
/// in the original basis, with the Matsubara sum truncated at the bath's `M`.
pub fn lamb_shift(bath: &BathModel, decomposition: &JumpDecomposition, n_qubits: usize) -> Result<CMatrix> {
    let terms = matsubara_expansion(bath)?;
    let he = eigenbasis_lamb_shift(&terms, decomposition, n_qubits);
    Ok(&decomposition.basis * he * decomposition.basis.adjoint())
}

fn eigenbasis_lamb_shift(terms: &[ExpansionTerm], dec: &JumpDecomposition, n_qubits: usize) -> CMatrix {
    let d = dec.basis.nrows();
    let mut h = CMatrix::zeros(d, d);
    for (b, &gap) in dec.gaps.iter().enumerate() {
        if gap == 0.0 {
            continue;
        }
        let eta = lamb_coefficient(terms, gap) / n_qubits as f64;
        add_sdag_s(&dec.entries[b], eta, &mut h);
    }
    h
}

/// `h += scale * S^dagger S` for sparse `S`.
fn add_sdag_s(entries: &[(usize, usize, Complex64)], scale: f64, h: &mut CMatrix) {
    for &(r1, c1, v1) in entries {
        for &(r2, c2, v2) in entries {
            if r1 == r2 {
                h[(c1, c2)] += v1.conj() * v2 * scale;
            }
        }
    }
}

/// `(1/N) sum_e G(e) [S rho S^dagger - {S^dagger S, rho}/2]` for `rho` given
/// in the eigenbasis, accumulated into `out`.
fn add_dissipator(dec: &JumpDecomposition, n_qubits: usize, rho: &CMatrix, out: &mut CMatrix, sds: &mut CMatrix) {
    let inv_n = 1.0 / n_qubits as f64;
    let d = rho.nrows();
    sds.fill(ZERO);
    for (b, list) in dec.entries.iter().enumerate() {
        let g = dec.rates[b] * inv_n;
        if g == 0.0 || list.is_empty() {
            continue;
        }
        for &(r1, c1, v1) in list {
            for &(r2, c2, v2) in list {
                out[(r1, r2)] += v1 * rho[(c1, c2)] * v2.conj() * g;
            }
        }
        add_sdag_s(list, g, sds);
    }
    for c in 0..d {
        for r in 0..d {
            let mut acc = ZERO;
            for k in 0..d {
                acc += sds[(r, k)] * rho[(k, c)] + rho[(r, k)] * sds[(k, c)];
            }
            out[(r, c)] -= acc * 0.5;
        }
    }
}

/// Everything the generator needs besides `H_S(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LindbladModel {
    /// Unscaled coupling operator `Q`.
    pub coupling: CMatrix,
    pub bath: BathModel,
    pub n_qubits: usize,
    pub bin_rel_tol: f64,
}

impl LindbladModel {
    pub fn new(coupling: CMatrix, bath: BathModel, n_qubits: usize) -> Self {
        Self { coupling, bath, n_qubits, bin_rel_tol: DEFAULT_BIN_REL_TOL }
    }

    /// Jump decomposition with rates for the Hamiltonian `h`.
    pub fn decompose(&self, h: &CMatrix) -> Result<JumpDecomposition> {
        let (energies, states) = linalg::eigh(h);
        let scale = energies.iter().fold(0.0f64, |a, e| a.max(e.abs())).max(1e-300);
        let spec = Spectrum { energies, states, parities: None };
        let mut dec = jump_operators(&spec, &self.coupling, self.bin_rel_tol * scale)?;
        dec.assign_rates(&self.bath);
        Ok(dec)
    }
}

/// Generator applied to `rho` at Hamiltonian `h`, in the original basis.
pub fn lindblad_rhs(model: &LindbladModel, h: &CMatrix, rho: &CMatrix) -> Result<CMatrix> {
    let terms = matsubara_expansion(&model.bath)?;
    let mut work = Workspace::new(h.nrows());
    eigenbasis_rhs(model, &terms, h, rho, &mut work)
}

struct Workspace {
    out: CMatrix,
    sds: CMatrix,
}

impl Workspace {
    fn new(d: usize) -> Self {
        Self { out: CMatrix::zeros(d, d), sds: CMatrix::zeros(d, d) }
    }
}

fn eigenbasis_rhs(
    model: &LindbladModel,
    terms: &[ExpansionTerm],
    h: &CMatrix,
    rho: &CMatrix,
    work: &mut Workspace,
) -> Result<CMatrix> {
    let dec = model.decompose(h)?;
    let v = &dec.basis;
    let rho_e = v.adjoint() * rho * v;
    let mut a = eigenbasis_lamb_shift(terms, &dec, model.n_qubits);
    for (k, &e) in dec.energies.iter().enumerate() {
        a[(k, k)] += e;
    }
    work.out.copy_from(&((&a * &rho_e - &rho_e * &a) * (-I)));
    add_dissipator(&dec, model.n_qubits, &rho_e, &mut work.out, &mut work.sds);
    Ok(v * &work.out * v.adjoint())
}

struct LindbladSystem<'a, H> {
    ham: &'a H,
    model: &'a LindbladModel,
    terms: Vec<ExpansionTerm>,
    h: CMatrix,
    work: Workspace,
}

impl<H: HamiltonianSource> OdeSystem for LindbladSystem<'_, H> {
    fn dim(&self) -> usize {
        self.h.len()
    }

    fn eval(&mut self, t: f64, y: &[Complex64], dy: &mut [Complex64]) -> Result<()> {
        self.ham.write_at(t, &mut self.h)?;
        let d = self.h.nrows();
        let rho = CMatrix::from_column_slice(d, d, y);
        let out = eigenbasis_rhs(self.model, &self.terms, &self.h, &rho, &mut self.work)?;
        dy.copy_from_slice(out.as_slice());
        Ok(())
    }
}

/// Integration settings of a Lindblad run.
#[derive(Debug, Clone, PartialEq)]
pub struct LindbladConfig {
    pub method: Method,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub output_grid: Vec<f64>,
}

impl LindbladConfig {
    pub fn new(output_grid: Vec<f64>) -> Self {
        Self { method: Method::DormandPrince, rel_tol: 1e-8, abs_tol: 1e-10, max_step: f64::INFINITY, output_grid }
    }
}

/// Result of a Lindblad run.
#[derive(Debug, Clone)]
pub struct LindbladRun {
    pub trajectory: Trajectory,
    pub stats: OdeStats,
}

/// Propagates `rho0` from `t = 0`, rediagonalizing `H_S(t)` at every
/// right-hand-side evaluation.
pub fn lindblad_evolve<H: HamiltonianSource>(
    rho0: &CMatrix,
    ham: &H,
    model: &LindbladModel,
    config: &LindbladConfig,
) -> Result<LindbladRun> {
    check_density_matrix(rho0, 1e-10)?;
    let d = ham.dim();
    if rho0.nrows() != d || model.coupling.nrows() != d {
        return Err(invalid("rho0", "dimension differs from the Hamiltonian"));
    }
    if config.rel_tol <= 0.0 || config.abs_tol <= 0.0 {
        return Err(invalid("tolerance", "rel_tol and abs_tol must be positive"));
    }
    let mut sys = LindbladSystem {
        ham,
        model,
        terms: matsubara_expansion(&model.bath)?,
        h: CMatrix::zeros(d, d),
        work: Workspace::new(d),
    };
    let opts = OdeOptions {
        method: config.method,
        rel_tol: config.rel_tol,
        abs_tol: config.abs_tol,
        max_step: config.max_step,
        ..OdeOptions::default()
    };
    let mut states = Vec::with_capacity(config.output_grid.len());
    let (_, stats) = ode::solve(&mut sys, 0.0, rho0.as_slice(), &config.output_grid, d * d, &opts, |_, y| {
        states.push(linalg::symmetrize(&CMatrix::from_column_slice(d, d, y)));
        Ok(())
    })?;
    Ok(LindbladRun { trajectory: Trajectory { times: config.output_grid.clone(), states }, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driving::{DrivePath, DriveSchedule};
    use crate::hamiltonian::{DrivenHamiltonian, StaticHamiltonian};
    use crate::linalg::{hermiticity_deviation, max_abs, trace_distance};
    use crate::spin::{build_coupling_operator, eigendecompose, thermal_state, ControlPoint, SpinSystem};
    use crate::trajectory::uniform_grid;
    use crate::unitary::{evolve_unitary, UnitaryConfig};

    struct Lcg(u64);

    impl Lcg {
        fn uniform(&mut self) -> f64 {
            self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (self.0 >> 11) as f64 / (1u64 << 53) as f64
        }
    }

    fn dense_dissipator(dec: &JumpDecomposition, n: usize, rho: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(rho.nrows(), rho.ncols());
        for b in 0..dec.len() {
            let s = dec.jump_operator(b);
            let sds = s.adjoint() * &s;
            out += (&s * rho * s.adjoint() - linalg::anticommutator(&sds, rho).scale(0.5))
                .scale(dec.rates[b] / n as f64);
        }
        out
    }

    fn nonempty(dec: &JumpDecomposition) -> Vec<f64> {
        (0..dec.len()).filter(|&b| !dec.entries[b].is_empty()).map(|b| dec.gaps[b]).collect()
    }

    #[test]
    fn diagonal_coupling_only_dephases() {
        let sys = SpinSystem::new(6).unwrap();
        let spec = eigendecompose(&sys.blocks().at(ControlPoint::new(0.0, 0.0))).unwrap();
        let dec = jump_operators(&spec, sys.jz(), 1e-9).unwrap();
        assert_eq!(nonempty(&dec), vec![0.0]);
        let zero = dec.gaps.iter().position(|&g| g == 0.0).unwrap();
        assert!(max_abs(&(dec.jump_operator(zero) - sys.jz())) < 1e-12);
    }

    #[test]
    fn transverse_coupling_has_unit_ladder_bins() {
        let sys = SpinSystem::new(6).unwrap();
        let spec = eigendecompose(&sys.blocks().at(ControlPoint::new(0.0, 0.0))).unwrap();
        let dec = jump_operators(&spec, sys.jx(), 1e-9).unwrap();
        let gaps = nonempty(&dec);
        assert_eq!(gaps.len(), 2);
        assert!((gaps[0] + 1.0).abs() < 1e-12 && (gaps[1] - 1.0).abs() < 1e-12);
        // S(+1) lowers m: it is the superdiagonal half of jx in the ascending-m basis.
        let down = dec.gaps.iter().position(|&g| (g - 1.0).abs() < 1e-12).unwrap();
        let s = dec.jump_operator(down);
        let expected = CMatrix::from_fn(7, 7, |i, j| if j == i + 1 { sys.jx()[(i, j)] } else { ZERO });
        assert!(max_abs(&(s - expected)) < 1e-12);
    }

    #[test]
    fn jump_operators_are_complete_and_mirrored() {
        let sys = SpinSystem::new(8).unwrap();
        let mut rng = Lcg(3);
        for _ in 0..10 {
            let point = ControlPoint::new(4.0 * rng.uniform() - 2.0, 2.0 * rng.uniform() - 1.0);
            let theta = 1.5 * rng.uniform();
            let q = build_coupling_operator(&sys, theta);
            let spec = eigendecompose(&sys.blocks().at(point)).unwrap();
            let dec = jump_operators(&spec, &q, 1e-9).unwrap();
            let mut total = CMatrix::zeros(9, 9);
            for b in 0..dec.len() {
                total += dec.jump_operator(b);
                assert_eq!(dec.gaps[dec.mirror(b)], -dec.gaps[b]);
                let mirrored = dec.jump_operator(dec.mirror(b));
                assert!(max_abs(&(mirrored - dec.jump_operator(b).adjoint())) < 1e-12);
            }
            assert!(max_abs(&(total - q)) < 1e-10);
        }
    }

    #[test]
    fn rate_values_and_detailed_balance() {
        let bath = BathModel::new(1.0, 10.0, 1.0, 5).unwrap();
        assert!((rate(&bath, 0.0) - 0.4).abs() < 1e-14);
        assert!((rate(&bath, 1e-9) - 0.4).abs() < 1e-8);
        let warm = BathModel::new(0.1, 10.0, 2.5, 5).unwrap();
        for k in 1..=10 {
            let e = 0.37 * k as f64;
            assert!(rate(&warm, e) > 0.0 && rate(&warm, -e) > 0.0);
            let ratio = rate(&warm, -e) / rate(&warm, e);
            assert!((ratio / (-e / 2.5).exp() - 1.0).abs() < 1e-10);
        }
        let off = BathModel::new(0.0, 10.0, 1.0, 5).unwrap();
        assert_eq!(rate(&off, 0.7), 0.0);
    }

    #[test]
    fn lamb_shift_properties() {
        let sys = SpinSystem::new(6).unwrap();
        let h = sys.blocks().at(ControlPoint::new(0.8, 0.4));
        let spec = eigendecompose(&h).unwrap();
        let q = build_coupling_operator(&sys, 0.9);
        let dec = jump_operators(&spec, &q, 1e-9).unwrap();
        let bath = BathModel::new(0.5, 10.0, 0.7, 18).unwrap();
        let terms = matsubara_expansion(&bath).unwrap();
        assert_eq!(lamb_coefficient(&terms, 0.0), 0.0);
        let hl = lamb_shift(&bath, &dec, 6).unwrap();
        assert!(hermiticity_deviation(&hl) < 1e-12);
        assert!(max_abs(&linalg::commutator(&hl, &h)) < 1e-10);
        assert!(max_abs(&hl) > 1e-4);
        let off = BathModel::new(0.0, 10.0, 0.7, 18).unwrap();
        assert_eq!(max_abs(&lamb_shift(&off, &dec, 6).unwrap()), 0.0);
    }

    #[test]
    fn lamb_shift_tail_bound_shrinks_with_cutoff() {
        let coarse = BathModel::new(0.1, 10.0, 0.5, 5).unwrap();
        let fine = BathModel::new(0.1, 10.0, 0.5, 18).unwrap();
        let b5 = lamb_shift_tail_bound(&coarse, 3.0);
        let b18 = lamb_shift_tail_bound(&fine, 3.0);
        assert!(b5.is_finite() && b18 < b5 && b18 > 0.0);
        // The bound dominates the actual next terms.
        let longer = BathModel::new(0.1, 10.0, 0.5, 400).unwrap();
        let all = lamb_coefficient(&matsubara_expansion(&longer).unwrap(), 3.0);
        let kept = lamb_coefficient(&matsubara_expansion(&fine).unwrap(), 3.0);
        assert!((all - kept).abs() <= b18);
        let tight = BathModel::new(0.1, 10.0, 0.1, 5).unwrap();
        assert!(lamb_shift_tail_bound(&tight, 1.0).is_infinite());
    }

    #[test]
    fn sparse_dissipator_matches_dense_and_ignores_phases() {
        let sys = SpinSystem::new(5).unwrap();
        let h = sys.blocks().at(ControlPoint::new(1.1, 0.3));
        let q = build_coupling_operator(&sys, 1.2);
        let bath = BathModel::new(0.3, 10.0, 0.8, 18).unwrap();
        let model = LindbladModel::new(q.clone(), bath, 5);
        let spec = eigendecompose(&h).unwrap();
        let rho = thermal_state(&eigendecompose(&sys.blocks().at(ControlPoint::new(0.0, 0.0))).unwrap(), 1.0).unwrap();

        let mut dec = jump_operators(&spec, &q, 1e-9 * 10.0).unwrap();
        dec.assign_rates(&bath);
        let hl = lamb_shift(&bath, &dec, 5).unwrap();
        let reference = linalg::commutator(&(&h + &hl), &rho) * (-I) + dense_dissipator(&dec, 5, &rho);
        let fast = lindblad_rhs(&model, &h, &rho).unwrap();
        assert!(max_abs(&(fast - &reference)) < 1e-12);

        let mut rephased = spec.clone();
        let mut rng = Lcg(9);
        for k in 0..rephased.dim() {
            let phase = Complex64::from_polar(1.0, 6.0 * rng.uniform());
            let col = rephased.states.column(k) * phase;
            rephased.states.set_column(k, &col);
        }
        let mut dec2 = jump_operators(&rephased, &q, 1e-8).unwrap();
        dec2.assign_rates(&bath);
        let other = dense_dissipator(&dec2, 5, &rho);
        assert!(max_abs(&(other - dense_dissipator(&dec, 5, &rho))) < 1e-12);
    }

    #[test]
    fn gibbs_state_is_fixed_point() {
        let sys = SpinSystem::new(4).unwrap();
        let h = sys.blocks().at(ControlPoint::new(0.6, 0.2));
        let bath = BathModel::new(1.0, 10.0, 1.0, 18).unwrap();
        let model = LindbladModel::new(build_coupling_operator(&sys, core::f64::consts::FRAC_PI_2), bath, 4);
        let gibbs = thermal_state(&eigendecompose(&h).unwrap(), 1.0).unwrap();
        assert!(max_abs(&lindblad_rhs(&model, &h, &gibbs).unwrap()) < 1e-12);

        let spec = eigendecompose(&h).unwrap();
        let psi = spec.state(0);
        let rho0 = psi * psi.adjoint();
        let run = lindblad_evolve(&rho0, &StaticHamiltonian(h), &model, &LindbladConfig::new(vec![400.0])).unwrap();
        let last = run.trajectory.final_state().unwrap();
        assert!(trace_distance(last, &gibbs) < 1e-6);
    }

    #[test]
    fn zero_coupling_matches_unitary() {
        let sys = SpinSystem::new(4).unwrap();
        let schedule = DriveSchedule::linear(DrivePath::first_order(), 15.0).unwrap();
        let ham = DrivenHamiltonian::new(&sys, schedule, None);
        let bath = BathModel::with_default_cutoff(0.0, 10.0, 1.0).unwrap();
        let model = LindbladModel::new(build_coupling_operator(&sys, 0.0), bath, 4);
        let rho0 = thermal_state(&eigendecompose(&ham.at(0.0).unwrap()).unwrap(), 2.0).unwrap();
        let grid = uniform_grid(15.0, 6);
        let mut cfg = LindbladConfig::new(grid.clone());
        cfg.rel_tol = 1e-11;
        cfg.abs_tol = 1e-13;
        let run = lindblad_evolve(&rho0, &ham, &model, &cfg).unwrap();
        let exact = evolve_unitary(&rho0, &ham, &grid, &UnitaryConfig { max_step: 0.005 }).unwrap();
        for (a, b) in run.trajectory.states.iter().zip(&exact.states) {
            assert!(trace_distance(a, b) < 1e-8);
        }
    }

    #[test]
    fn invalid_tolerance_is_rejected() {
        let sys = SpinSystem::new(2).unwrap();
        let spec = eigendecompose(sys.jz()).unwrap();
        assert!(jump_operators(&spec, sys.jx(), 0.0).is_err());
    }
}
