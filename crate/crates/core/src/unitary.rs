//! Closed-system reference propagator (fourth-order Magnus expansion).
//!
//! Independent of the hierarchy code: each step exponentiates
//! `K = (H1 + H2)/2 - i (sqrt(3) h / 12) [H2, H1]` exactly through its
//! eigen-decomposition, with `H1, H2` sampled at the two Gauss points.

use alloc::vec::Vec;

#[allow(unused_imports)]
use crate::prelude::*;
use crate::error::invalid;
use crate::hamiltonian::HamiltonianSource;
use crate::linalg::{self, I};
use crate::trajectory::{check_density_matrix, check_output_grid, Trajectory};
use crate::{CMatrix, Complex64, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitaryConfig {
    /// Largest Magnus step.
    pub max_step: f64,
}

impl Default for UnitaryConfig {
    fn default() -> Self {
        Self { max_step: 0.02 }
    }
}

fn magnus_step<H: HamiltonianSource>(h: &H, t: f64, dt: f64, h1: &mut CMatrix, h2: &mut CMatrix) -> Result<CMatrix> {
    let off = 3f64.sqrt() / 6.0;
    h.write_at(t + dt * (0.5 - off), h1)?;
    h.write_at(t + dt * (0.5 + off), h2)?;
    let comm = linalg::commutator(h2, h1);
    let k = (&*h1 + &*h2).scale(0.5) - comm * (I * (3f64.sqrt() * dt / 12.0));
    let (vals, vecs) = linalg::eigh(&k);
    let phases = nalgebra::DVector::from_iterator(
        vals.len(),
        vals.iter().map(|&e| Complex64::from_polar(1.0, -e * dt)),
    );
    let mut scaled = vecs.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= phases[j];
    }
    Ok(scaled * vecs.adjoint())
}

fn steps_for(span: f64, cfg: &UnitaryConfig) -> usize {
    ((span / cfg.max_step).ceil() as usize).max(1)
}

/// Time-ordered propagator `U(t1, t0)`.
pub fn propagator<H: HamiltonianSource>(h: &H, t0: f64, t1: f64, cfg: &UnitaryConfig) -> Result<CMatrix> {
    if !(cfg.max_step > 0.0) {
        return Err(invalid("max_step", "must be positive"));
    }
    let d = h.dim();
    let mut u = CMatrix::identity(d, d);
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(u);
    }
    let n = steps_for(span.abs(), cfg);
    let dt = span / n as f64;
    let (mut h1, mut h2) = (CMatrix::zeros(d, d), CMatrix::zeros(d, d));
    for i in 0..n {
        let step = magnus_step(h, t0 + i as f64 * dt, dt, &mut h1, &mut h2)?;
        u = step * u;
    }
    Ok(u)
}

/// Propagates `rho(t) = U rho0 U^dagger` and samples it at `output_times`
/// (starting from `t = 0`).
pub fn evolve_unitary<H: HamiltonianSource>(
    rho0: &CMatrix,
    h: &H,
    output_times: &[f64],
    cfg: &UnitaryConfig,
) -> Result<Trajectory> {
    check_density_matrix(rho0, 1e-10)?;
    let t_end = output_times.last().copied().unwrap_or(0.0);
    check_output_grid(output_times, 0.0, t_end)?;
    let d = h.dim();
    let mut u = CMatrix::identity(d, d);
    let mut t = 0.0;
    let mut states = Vec::with_capacity(output_times.len());
    for &target in output_times {
        if target > t {
            u = propagator(h, t, target, cfg)? * u;
            t = target;
        }
        states.push(linalg::symmetrize(&(&u * rho0 * u.adjoint())));
    }
    Ok(Trajectory { times: output_times.to_vec(), states })
}
