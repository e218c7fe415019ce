//! Sampled reduced-density-matrix trajectories and their physical contracts.

use alloc::vec::Vec;

use crate::linalg;
use crate::{CMatrix, Error, Result};

/// `rho_S(t)` at the requested output times.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<CMatrix>,
}

/// Worst-case diagnostics over all samples of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contracts {
    pub trace_drift: f64,
    pub hermiticity: f64,
    pub min_eigenvalue: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> Option<&CMatrix> {
        self.states.last()
    }

    /// `max_t |tr rho(t) - 1|`.
    pub fn trace_drift(&self) -> f64 {
        self.states
            .iter()
            .map(|r| (linalg::trace(r) - linalg::ONE).norm())
            .fold(0.0, f64::max)
    }

    pub fn contracts(&self) -> Contracts {
        let mut c = Contracts { trace_drift: self.trace_drift(), hermiticity: 0.0, min_eigenvalue: f64::INFINITY };
        for r in &self.states {
            c.hermiticity = c.hermiticity.max(linalg::hermiticity_deviation(r));
            c.min_eigenvalue = c.min_eigenvalue.min(linalg::min_eigenvalue(r));
        }
        c
    }

    /// Fails with an accuracy error if any contract is violated.
    pub fn check(&self, trace_tol: f64, hermiticity_tol: f64, positivity_tol: f64) -> Result<Contracts> {
        let c = self.contracts();
        if !(c.trace_drift <= trace_tol) {
            return Err(Error::Accuracy { what: "trace drift", value: c.trace_drift, limit: trace_tol });
        }
        if !(c.hermiticity <= hermiticity_tol) {
            return Err(Error::Accuracy { what: "hermiticity", value: c.hermiticity, limit: hermiticity_tol });
        }
        if !(c.min_eigenvalue >= -positivity_tol) {
            return Err(Error::Accuracy { what: "negative eigenvalue", value: -c.min_eigenvalue, limit: positivity_tol });
        }
        Ok(c)
    }
}

/// Validates a physical initial state: Hermitian, unit trace and PSD to `tol`.
pub fn check_density_matrix(rho: &CMatrix, tol: f64) -> Result<()> {
    let herm = linalg::hermiticity_deviation(rho);
    if herm > tol {
        return Err(Error::NotHermitian(herm));
    }
    let tr = (linalg::trace(rho) - linalg::ONE).norm();
    if tr > tol {
        return Err(Error::Accuracy { what: "initial trace deviation", value: tr, limit: tol });
    }
    let min = linalg::min_eigenvalue(rho);
    if min < -tol {
        return Err(Error::Accuracy { what: "initial negative eigenvalue", value: -min, limit: tol });
    }
    Ok(())
}

/// Checks that output times are finite, nondecreasing and inside `[t0, t1]`.
pub(crate) fn check_output_grid(times: &[f64], t0: f64, t1: f64) -> Result<()> {
    let mut prev = t0;
    for &t in times {
        if !(t >= prev && t <= t1 * (1.0 + 1e-12) + 1e-300) {
            return Err(Error::OutOfRange { t, t_final: t1 });
        }
        prev = t;
    }
    Ok(())
}

/// `n` equally spaced times from 0 to `t_final` inclusive.
pub fn uniform_grid(t_final: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    let mut v: Vec<f64> = (0..n).map(|i| t_final * i as f64 / (n - 1) as f64).collect();
    v[n - 1] = t_final;
    v
}
