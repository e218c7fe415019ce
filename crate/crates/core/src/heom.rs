//! Hierarchical equations of motion for the Drude-Lorentz bath.
//!
//! Auxiliary density operators (ADOs) `rho_n` are labelled by multi-indices
//! `n = (n_0, ..., n_M)` with `|n| <= L`; `rho_0` is the physical state. Each
//! obeys
//!
//! ```text
//! d rho_n/dt = -i[H, rho_n] - (sum_k n_k nu_k) rho_n - i sum_k [Q, rho_{n+e_k}]
//!              - i sum_k n_k (c_k Q rho_{n-e_k} - c_k^* rho_{n-e_k} Q)
//!              - Delta_M [Q, [Q, rho_n]]
//! ```
//!
//! with `Q` the system coupling operator scaled by `1/sqrt(N)` and
//! `Delta_M` the terminator weight of the discarded Matsubara terms.
//! Every ADO of this form stays Hermitian, which the production kernel
//! exploits; [`heom_rhs`] is a literal reference implementation.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use crate::prelude::*;
use crate::bath::{matsubara_expansion, terminator_residual, BathModel, ExpansionTerm};
use crate::error::invalid;
use crate::hamiltonian::HamiltonianSource;
use crate::linalg::{self, SparseOperator, I, ZERO};
use crate::ode::{self, Method, OdeOptions, OdeStats, OdeSystem};
use crate::trajectory::{check_density_matrix, Trajectory};
use crate::{CMatrix, Complex64, Error, Result};

/// Default bound on the number of ADOs.
pub const DEFAULT_ADO_CAP: usize = 1_000_000;

const NONE: u32 = u32::MAX;

/// Multi-index `(n_0, ..., n_M)` of one ADO.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HierarchyIndex {
    counts: Vec<u8>,
}

impl HierarchyIndex {
    pub fn counts(&self) -> &[u8] {
        &self.counts
    }

    /// `|n| = sum_k n_k`.
    pub fn level(&self) -> usize {
        self.counts.iter().map(|&c| c as usize).sum()
    }
}

/// `C(L + M + 1, M + 1)`: multi-indices over `M + 1` modes with level `<= L`.
pub fn ado_count(depth: usize, m_cut: usize) -> u128 {
    let modes = m_cut as u128 + 1;
    let mut c: u128 = 1;
    for i in 1..=depth as u128 {
        // C(modes + i, i) built incrementally; exact at every step.
        c = c * (modes + i) / i;
    }
    c
}

/// Index set with precomputed neighbour tables `n +- e_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hierarchy {
    depth: usize,
    modes: usize,
    indices: Vec<HierarchyIndex>,
    plus: Vec<u32>,
    minus: Vec<u32>,
}

fn push_level(level: usize, modes: usize, prefix: &mut Vec<u8>, out: &mut Vec<HierarchyIndex>) {
    if prefix.len() == modes - 1 {
        prefix.push(level as u8);
        out.push(HierarchyIndex { counts: prefix.clone() });
        prefix.pop();
        return;
    }
    // Larger leading counts first, so e_0 precedes e_1 within a level.
    for first in (0..=level).rev() {
        prefix.push(first as u8);
        push_level(level - first, modes, prefix, out);
        prefix.pop();
    }
}

impl Hierarchy {
    /// Enumerates all indices in graded lexicographic order.
    pub fn new(depth: usize, m_cut: usize, cap: usize) -> Result<Self> {
        if depth < 1 {
            return Err(invalid("depth", "hierarchy depth L must be at least 1"));
        }
        if depth > u8::MAX as usize {
            return Err(invalid("depth", "hierarchy depth L must be at most 255"));
        }
        let required = ado_count(depth, m_cut);
        if required > cap as u128 {
            return Err(Error::ResourceCap { required, cap });
        }
        let modes = m_cut + 1;
        let mut indices = Vec::with_capacity(required as usize);
        let mut prefix = Vec::with_capacity(modes);
        for level in 0..=depth {
            push_level(level, modes, &mut prefix, &mut indices);
        }
        let lookup: BTreeMap<&[u8], u32> = indices
            .iter()
            .enumerate()
            .map(|(i, n)| (n.counts.as_slice(), i as u32))
            .collect();
        let mut plus = vec![NONE; indices.len() * modes];
        let mut minus = vec![NONE; indices.len() * modes];
        let mut probe = vec![0u8; modes];
        for (i, n) in indices.iter().enumerate() {
            for k in 0..modes {
                probe.copy_from_slice(&n.counts);
                if n.level() < depth {
                    probe[k] += 1;
                    plus[i * modes + k] = lookup[probe.as_slice()];
                    probe[k] -= 1;
                }
                if n.counts[k] > 0 {
                    probe[k] -= 1;
                    minus[i * modes + k] = lookup[probe.as_slice()];
                }
            }
        }
        Ok(Self { depth, modes, indices, plus, minus })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Number of bath modes `M + 1`.
    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Occupation label of ADO `i`.
    pub fn label(&self, i: usize) -> &HierarchyIndex {
        &self.indices[i]
    }

    pub fn position(&self, counts: &[u8]) -> Option<usize> {
        self.indices.iter().position(|n| n.counts == counts)
    }

    /// Position of `n_i + e_k`, if it is inside the hierarchy.
    pub fn plus(&self, i: usize, k: usize) -> Option<usize> {
        let v = self.plus[i * self.modes + k];
        (v != NONE).then_some(v as usize)
    }

    /// Position of `n_i - e_k`, if `n_k > 0`.
    pub fn minus(&self, i: usize, k: usize) -> Option<usize> {
        let v = self.minus[i * self.modes + k];
        (v != NONE).then_some(v as usize)
    }
}

/// All ADOs in one contiguous column-major block per index.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyState {
    hierarchy: Hierarchy,
    dim: usize,
    data: Vec<Complex64>,
    pub time: f64,
}

/// All-zero hierarchy of depth `L` over `M + 1` modes for `dim x dim` ADOs,
/// with the default size cap.
pub fn build_hierarchy(depth: usize, m_cut: usize, dim: usize) -> Result<HierarchyState> {
    HierarchyState::new(Hierarchy::new(depth, m_cut, DEFAULT_ADO_CAP)?, dim)
}

impl HierarchyState {
    pub fn new(hierarchy: Hierarchy, dim: usize) -> Result<Self> {
        let len = hierarchy
            .len()
            .checked_mul(dim * dim)
            .ok_or(Error::ResourceCap { required: hierarchy.len() as u128, cap: usize::MAX })?;
        Ok(Self { hierarchy, dim, data: vec![ZERO; len], time: 0.0 })
    }

    pub fn hierarchy(&self) -> &Hierarchy {
        &self.hierarchy
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn ado_slice(&self, i: usize) -> &[Complex64] {
        let b = self.dim * self.dim;
        &self.data[i * b..(i + 1) * b]
    }

    pub fn ado_slice_mut(&mut self, i: usize) -> &mut [Complex64] {
        let b = self.dim * self.dim;
        &mut self.data[i * b..(i + 1) * b]
    }

    pub fn ado(&self, i: usize) -> CMatrix {
        CMatrix::from_column_slice(self.dim, self.dim, self.ado_slice(i))
    }

    pub fn set_ado(&mut self, i: usize, m: &CMatrix) {
        self.ado_slice_mut(i).copy_from_slice(m.as_slice());
    }

    /// The physical reduced density matrix (zero multi-index).
    pub fn rho_s(&self) -> CMatrix {
        self.ado(0)
    }
}

/// Bath-side data entering the hierarchy: scaled coupling operator,
/// expansion terms and terminator weight.
#[derive(Debug, Clone, PartialEq)]
pub struct HeomCoupling {
    pub q_scaled: CMatrix,
    pub terms: Vec<ExpansionTerm>,
    pub delta: f64,
}

impl HeomCoupling {
    /// Couples `coupling / sqrt(n_qubits)` to `bath`.
    pub fn new(coupling: &CMatrix, n_qubits: usize, bath: &BathModel) -> Result<Self> {
        Ok(Self {
            q_scaled: coupling.scale(1.0 / (n_qubits as f64).sqrt()),
            terms: matsubara_expansion(bath)?,
            delta: terminator_residual(bath)?,
        })
    }

    /// Largest ADO decay rate reachable at depth `L`.
    pub fn max_rate(&self, depth: usize) -> f64 {
        self.terms.iter().map(|e| e.nu).fold(0.0, f64::max) * depth as f64
    }
}

fn decay_rate(n: &HierarchyIndex, terms: &[ExpansionTerm]) -> f64 {
    n.counts.iter().zip(terms).map(|(&c, e)| c as f64 * e.nu).sum()
}

/// Literal evaluation of the hierarchy right-hand side with dense products.
pub fn heom_rhs<H: HamiltonianSource>(
    state: &HierarchyState,
    t: f64,
    ham: &H,
    coupling: &HeomCoupling,
) -> Result<HierarchyState> {
    let hier = &state.hierarchy;
    if coupling.terms.len() != hier.modes() {
        return Err(invalid("coupling", "number of expansion terms differs from the hierarchy modes"));
    }
    let h = ham.at(t)?;
    let q = &coupling.q_scaled;
    let mut out = HierarchyState::new(hier.clone(), state.dim)?;
    out.time = t;
    for i in 0..hier.len() {
        let rho = state.ado(i);
        let n = hier.label(i);
        let mut d = (linalg::commutator(&h, &rho) * (-I)) - rho.scale(decay_rate(n, &coupling.terms));
        for (k, term) in coupling.terms.iter().enumerate() {
            if let Some(j) = hier.plus(i, k) {
                d -= linalg::commutator(q, &state.ado(j)) * I;
            }
            if let Some(j) = hier.minus(i, k) {
                let lower = state.ado(j);
                let nk = n.counts[k] as f64;
                d -= ((q * &lower) * term.c - (&lower * q) * term.c.conj()) * (I * nk);
            }
        }
        if coupling.delta != 0.0 {
            d -= linalg::commutator(q, &linalg::commutator(q, &rho)).scale(coupling.delta);
        }
        out.set_ado(i, &d);
    }
    Ok(out)
}

/// Production right-hand side. Relies on every ADO being Hermitian: it
/// builds `W` from left products only and returns `W + W^dagger`.
struct HeomSystem<'a, H> {
    hier: &'a Hierarchy,
    dim: usize,
    ham: &'a H,
    delta: f64,
    rates: Vec<f64>,
    /// Per-ADO neighbour couplings `(j, w)` entering `X = sum w rho_j`,
    /// delimited by `link_start`.
    links: Vec<(usize, Complex64)>,
    link_start: Vec<usize>,
    h_dense: CMatrix,
    /// `-i H(t)`.
    h_sparse: SparseOperator,
    q_sparse: SparseOperator,
    w: Vec<Complex64>,
    x: Vec<Complex64>,
    v: Vec<Complex64>,
}

impl<'a, H: HamiltonianSource> HeomSystem<'a, H> {
    fn new(hier: &'a Hierarchy, ham: &'a H, coupling: &'a HeomCoupling) -> Self {
        let dim = ham.dim();
        let b = dim * dim;
        let rates = hier.indices.iter().map(|n| decay_rate(n, &coupling.terms)).collect();
        let mut links = Vec::new();
        let mut link_start = Vec::with_capacity(hier.len() + 1);
        for i in 0..hier.len() {
            link_start.push(links.len());
            for k in 0..hier.modes {
                if let Some(j) = hier.plus(i, k) {
                    links.push((j, -I));
                }
            }
            for (k, term) in coupling.terms.iter().enumerate() {
                if let Some(j) = hier.minus(i, k) {
                    links.push((j, -I * term.c * hier.indices[i].counts[k] as f64));
                }
            }
        }
        link_start.push(links.len());
        Self {
            hier,
            dim,
            ham,
            delta: coupling.delta,
            rates,
            links,
            link_start,
            h_dense: CMatrix::zeros(dim, dim),
            h_sparse: SparseOperator::from_dense(&CMatrix::zeros(dim, dim)),
            q_sparse: SparseOperator::from_dense(&coupling.q_scaled),
            w: vec![ZERO; b],
            x: vec![ZERO; b],
            v: vec![ZERO; b],
        }
    }

    fn kernel(&mut self, t: f64, y: &[Complex64], dy: &mut [Complex64], with_decay: bool) -> Result<()> {
        self.ham.write_at(t, &mut self.h_dense)?;
        self.h_sparse.assign_scaled(&self.h_dense, -I);
        let d = self.dim;
        let b = d * d;
        let delta = self.delta;
        for i in 0..self.hier.len() {
            let rho = &y[i * b..(i + 1) * b];
            let w = &mut self.w;
            let x = &mut self.x;
            w.fill(ZERO);
            self.h_sparse.mul_acc(rho, w);
            if with_decay && self.rates[i] != 0.0 {
                let half = -0.5 * self.rates[i];
                for (wz, r) in w.iter_mut().zip(rho) {
                    *wz += r * half;
                }
            }
            // X = -i (sum_k rho_{n+e_k} + sum_k n_k c_k rho_{n-e_k}) - Delta [Q, rho]
            let links = &self.links[self.link_start[i]..self.link_start[i + 1]];
            x.fill(ZERO);
            for &(j, coef) in links {
                for (xz, s) in x.iter_mut().zip(&y[j * b..(j + 1) * b]) {
                    *xz += coef * s;
                }
            }
            let mut any = !links.is_empty();
            if delta != 0.0 {
                // D = Q rho - (Q rho)^dagger = [Q, rho] for Hermitian rho.
                let v = &mut self.v;
                v.fill(ZERO);
                self.q_sparse.mul_acc(rho, v);
                for c in 0..d {
                    for r in 0..d {
                        x[r + c * d] -= (v[r + c * d] - v[c + r * d].conj()) * delta;
                    }
                }
                any = true;
            }
            if any {
                self.q_sparse.mul_acc(x, w);
            }
            let out = &mut dy[i * b..(i + 1) * b];
            for c in 0..d {
                for r in 0..d {
                    out[r + c * d] = w[r + c * d] + w[c + r * d].conj();
                }
            }
        }
        Ok(())
    }
}

impl<H: HamiltonianSource> OdeSystem for HeomSystem<'_, H> {
    fn dim(&self) -> usize {
        self.hier.len() * self.dim * self.dim
    }

    fn eval(&mut self, t: f64, y: &[Complex64], dy: &mut [Complex64]) -> Result<()> {
        self.kernel(t, y, dy, true)
    }

    fn decay(&self) -> Option<(usize, &[f64])> {
        Some((self.dim * self.dim, &self.rates))
    }

    fn eval_nonstiff(&mut self, t: f64, y: &[Complex64], dy: &mut [Complex64]) -> Result<()> {
        self.kernel(t, y, dy, false)
    }
}

/// Evaluates the production kernel once; exposed for cross-checks against
/// [`heom_rhs`]. All ADOs of `state` must be Hermitian.
pub fn heom_rhs_hermitian<H: HamiltonianSource>(
    state: &HierarchyState,
    t: f64,
    ham: &H,
    coupling: &HeomCoupling,
) -> Result<HierarchyState> {
    let mut sys = HeomSystem::new(&state.hierarchy, ham, coupling);
    let mut out = HierarchyState::new(state.hierarchy.clone(), state.dim)?;
    out.time = t;
    sys.eval(t, &state.data, &mut out.data)?;
    Ok(out)
}

/// Integration settings of a hierarchy run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Hierarchy depth `L`.
    pub depth: usize,
    pub method: Method,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Sample times of `rho_S`, starting at or after 0.
    pub output_grid: Vec<f64>,
    pub ado_cap: usize,
}

impl SolverConfig {
    pub fn new(output_grid: Vec<f64>) -> Self {
        Self {
            depth: 3,
            method: Method::DormandPrince,
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_step: f64::INFINITY,
            output_grid,
            ado_cap: DEFAULT_ADO_CAP,
        }
    }

    fn ode_options(&self) -> OdeOptions {
        OdeOptions {
            method: self.method,
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step: self.max_step,
            ..OdeOptions::default()
        }
    }
}

/// Result of a hierarchy run.
#[derive(Debug, Clone)]
pub struct HeomRun {
    pub trajectory: Trajectory,
    pub final_state: HierarchyState,
    pub stats: OdeStats,
}

/// Trace drift beyond which a run is reported as inaccurate.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-4;

/// Propagates the factorized initial state `rho0 (x) rho_B` from `t = 0`:
/// `rho_0(0) = rho0`, all other ADOs zero. `rho_S` is sampled at the output
/// grid and symmetrized only there.
pub fn evolve<H: HamiltonianSource>(
    rho0: &CMatrix,
    ham: &H,
    coupling: &HeomCoupling,
    config: &SolverConfig,
) -> Result<HeomRun> {
    check_density_matrix(rho0, 1e-10)?;
    let dim = ham.dim();
    if rho0.nrows() != dim || coupling.q_scaled.nrows() != dim {
        return Err(invalid("rho0", "dimension differs from the Hamiltonian"));
    }
    if config.rel_tol <= 0.0 || config.abs_tol <= 0.0 {
        return Err(invalid("tolerance", "rel_tol and abs_tol must be positive"));
    }
    let hier = Hierarchy::new(config.depth, coupling.terms.len() - 1, config.ado_cap)?;
    let mut state = HierarchyState::new(hier, dim)?;
    state.set_ado(0, rho0);
    let hier = state.hierarchy.clone();
    let mut sys = HeomSystem::new(&hier, ham, coupling);
    let mut states = Vec::with_capacity(config.output_grid.len());
    let (y, stats) = ode::solve(
        &mut sys,
        0.0,
        &state.data,
        &config.output_grid,
        dim * dim,
        &config.ode_options(),
        |_, rho| {
            let m = CMatrix::from_column_slice(dim, dim, rho);
            states.push(linalg::symmetrize(&m));
            Ok(())
        },
    )?;
    state.data = y;
    state.time = config.output_grid.last().copied().unwrap_or(0.0);
    let trajectory = Trajectory { times: config.output_grid.clone(), states };
    let drift = trajectory.trace_drift();
    if drift > TRACE_DRIFT_LIMIT {
        return Err(Error::Accuracy { what: "trace drift", value: drift, limit: TRACE_DRIFT_LIMIT });
    }
    Ok(HeomRun { trajectory, final_state: state, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::power_spectrum;
    use crate::driving::{DrivePath, DriveSchedule};
    use crate::hamiltonian::{DrivenHamiltonian, StaticHamiltonian};
    use crate::linalg::{hermiticity_deviation, max_abs, trace_distance};
    use crate::spin::{build_coupling_operator, eigendecompose, SpinSystem};
    use crate::trajectory::uniform_grid;
    use crate::unitary::{evolve_unitary, UnitaryConfig};

    fn random_hermitian(d: usize, seed: u64) -> CMatrix {
        let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15) | 1;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let m = CMatrix::from_fn(d, d, |_, _| Complex64::new(next(), next()));
        linalg::symmetrize(&m)
    }

    fn binomial(n: u128, k: u128) -> u128 {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn ado_counts_match_binomial() {
        assert_eq!(ado_count(3, 5), 84);
        assert_eq!(ado_count(1, 0), 2);
        for l in 1..6 {
            for m in 0..8 {
                let expected = binomial((l + m + 1) as u128, (m + 1) as u128);
                assert_eq!(ado_count(l, m), expected);
                assert_eq!(Hierarchy::new(l, m, usize::MAX).unwrap().len() as u128, expected);
            }
        }
    }

    #[test]
    fn hierarchy_is_graded_and_neighbours_are_consistent() {
        let h = Hierarchy::new(3, 4, DEFAULT_ADO_CAP).unwrap();
        assert!(h.label(0).counts().iter().all(|&c| c == 0));
        assert_eq!(h.label(1).counts(), &[1, 0, 0, 0, 0]);
        let levels: Vec<usize> = (0..h.len()).map(|i| h.label(i).level()).collect();
        assert!(levels.windows(2).all(|w| w[0] <= w[1]));
        for i in 0..h.len() {
            for k in 0..h.modes() {
                if let Some(j) = h.plus(i, k) {
                    assert_eq!(h.minus(j, k), Some(i));
                    assert_eq!(h.label(j).level(), h.label(i).level() + 1);
                } else {
                    assert_eq!(h.label(i).level(), 3);
                }
                assert_eq!(h.minus(i, k).is_some(), h.label(i).counts()[k] > 0);
            }
        }
    }

    #[test]
    fn resource_cap_is_enforced() {
        match Hierarchy::new(18, 40, 1_000_000) {
            Err(Error::ResourceCap { required, cap }) => {
                assert_eq!(required, ado_count(18, 40));
                assert_eq!(cap, 1_000_000);
            }
            other => panic!("expected cap error, got {other:?}"),
        }
        assert!(Hierarchy::new(0, 3, 10).is_err());
    }

    fn test_setup(q: f64, temperature: f64) -> (SpinSystem, DrivenHamiltonian, HeomCoupling) {
        let sys = SpinSystem::new(3).unwrap();
        let schedule = DriveSchedule::linear(DrivePath::first_order(), 5.0).unwrap();
        let ham = DrivenHamiltonian::new(&sys, schedule, Some((q, 0.7)));
        let bath = BathModel::new(q, 10.0, temperature, 2).unwrap();
        let coupling = HeomCoupling::new(&build_coupling_operator(&sys, 0.7), 3, &bath).unwrap();
        (sys, ham, coupling)
    }

    fn random_state(depth: usize, coupling: &HeomCoupling, dim: usize) -> HierarchyState {
        let hier = Hierarchy::new(depth, coupling.terms.len() - 1, DEFAULT_ADO_CAP).unwrap();
        let mut state = HierarchyState::new(hier, dim).unwrap();
        for i in 0..state.hierarchy().len() {
            state.set_ado(i, &random_hermitian(dim, i as u64 + 11));
        }
        state
    }

    #[test]
    fn fast_kernel_matches_reference() {
        let (sys, ham, coupling) = test_setup(0.3, 2.0);
        assert!(coupling.delta > 0.0);
        let state = random_state(2, &coupling, sys.dim());
        let reference = heom_rhs(&state, 1.3, &ham, &coupling).unwrap();
        let fast = heom_rhs_hermitian(&state, 1.3, &ham, &coupling).unwrap();
        let err = reference.data().iter().zip(fast.data()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "kernel mismatch {err:e}");
    }

    #[test]
    fn reference_rhs_preserves_hermiticity_and_trace() {
        let (sys, ham, coupling) = test_setup(0.3, 2.0);
        let state = random_state(3, &coupling, sys.dim());
        let d = heom_rhs(&state, 0.4, &ham, &coupling).unwrap();
        for i in 0..d.hierarchy().len() {
            assert!(hermiticity_deviation(&d.ado(i)) < 1e-12);
        }
        assert!(linalg::trace(&d.rho_s()).norm() < 1e-12);
    }

    #[test]
    fn zero_coupling_keeps_auxiliaries_empty() {
        let (sys, ham, coupling) = test_setup(0.0, 1.0);
        assert_eq!(coupling.delta, 0.0);
        let hier = Hierarchy::new(2, coupling.terms.len() - 1, DEFAULT_ADO_CAP).unwrap();
        let mut state = HierarchyState::new(hier, sys.dim()).unwrap();
        let rho = random_hermitian(sys.dim(), 5);
        state.set_ado(0, &rho);
        let d = heom_rhs(&state, 2.0, &ham, &coupling).unwrap();
        let h = ham.at(2.0).unwrap();
        assert!(max_abs(&(d.rho_s() - linalg::commutator(&h, &rho) * (-I))) < 1e-12);
        for i in 1..state.hierarchy().len() {
            assert!(max_abs(&d.ado(i)) == 0.0);
        }
    }

    #[test]
    fn zero_coupling_matches_unitary_evolution() {
        let sys = SpinSystem::new(4).unwrap();
        let schedule = DriveSchedule::linear(DrivePath::first_order(), 20.0).unwrap();
        let ham = DrivenHamiltonian::new(&sys, schedule, None);
        let bath = BathModel::with_default_cutoff(0.0, 10.0, 1.0).unwrap();
        let coupling = HeomCoupling::new(&build_coupling_operator(&sys, 0.0), 4, &bath).unwrap();
        let h0 = ham.at(0.0).unwrap();
        let spec = eigendecompose(&h0).unwrap();
        let psi = spec.state(0);
        let rho0 = psi * psi.adjoint();
        let grid = uniform_grid(20.0, 11);
        let run = evolve(&rho0, &ham, &coupling, &SolverConfig::new(grid.clone())).unwrap();
        let exact = evolve_unitary(&rho0, &ham, &grid, &UnitaryConfig { max_step: 0.01 }).unwrap();
        for (a, b) in run.trajectory.states.iter().zip(&exact.states) {
            assert!(trace_distance(a, b) < 1e-6);
        }
    }

    #[test]
    fn weak_coupling_relaxation_follows_golden_rule() {
        // Two-level system H = diag(-1/2, 1/2) with coupling sigma_x.
        let gap = 1.0;
        let mut h = CMatrix::zeros(2, 2);
        h[(0, 0)] = Complex64::new(-0.5 * gap, 0.0);
        h[(1, 1)] = Complex64::new(0.5 * gap, 0.0);
        let mut sx = CMatrix::zeros(2, 2);
        sx[(0, 1)] = Complex64::new(1.0, 0.0);
        sx[(1, 0)] = Complex64::new(1.0, 0.0);
        let bath = BathModel::with_default_cutoff(0.005, 10.0, 1.0).unwrap();
        let coupling = HeomCoupling::new(&sx, 1, &bath).unwrap();
        let mut rho0 = CMatrix::zeros(2, 2);
        rho0[(1, 1)] = Complex64::new(1.0, 0.0);
        let (t1, t2) = (50.0, 250.0);
        let run = evolve(&rho0, &StaticHamiltonian(h), &coupling, &SolverConfig::new(vec![t1, t2])).unwrap();

        let down = power_spectrum(&bath, gap);
        let up = power_spectrum(&bath, -gap);
        let rate = down + up;
        let p_eq = up / rate;
        let excess = |rho: &CMatrix| rho[(1, 1)].re - p_eq;
        let fitted = (excess(&run.trajectory.states[0]) / excess(&run.trajectory.states[1])).ln() / (t2 - t1);
        assert!((fitted / rate - 1.0).abs() < 0.05, "fitted {fitted} vs golden rule {rate}");
    }

    #[test]
    fn evolve_rejects_invalid_initial_state() {
        let (sys, ham, coupling) = test_setup(0.1, 1.0);
        let bad = CMatrix::identity(sys.dim(), sys.dim());
        assert!(evolve(&bad, &ham, &coupling, &SolverConfig::new(vec![1.0])).is_err());
    }
}
