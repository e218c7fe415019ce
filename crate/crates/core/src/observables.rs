//! Derived quantities: fidelities, instantaneous occupations, purity,
//! parity and the two-state adiabatic timescale.

use alloc::vec::Vec;

#[allow(unused_imports)]
use crate::prelude::*;
use crate::driving::{DrivePath, DriveSchedule};
use crate::error::invalid;
use crate::linalg::{self, hermitian_eigenvalues};
use crate::spin::{eigendecompose, ControlPoint, Spectrum, SpinSystem};
use crate::trajectory::Trajectory;
use crate::{CMatrix, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FidelityKind {
    /// Ground-state overlap.
    F1,
    /// Overlap with the two lowest levels.
    F2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FidelityResult {
    pub value: f64,
    pub kind: FidelityKind,
    pub target: ControlPoint,
}

/// `<E_n|rho|E_n>`.
pub fn population(rho: &CMatrix, spec: &Spectrum, n: usize) -> f64 {
    linalg::expectation(rho, &spec.state(n)).re
}

/// `F1 = <E_0|rho|E_0>` for the spectrum at the target point.
pub fn fidelity_f1(rho: &CMatrix, spec: &Spectrum, target: ControlPoint) -> FidelityResult {
    FidelityResult { value: population(rho, spec, 0), kind: FidelityKind::F1, target }
}

/// `F2 = <E_0|rho|E_0> + <E_1|rho|E_1>`; the target must lie on the `chi = 0`
/// line, where the two lowest levels form the quasidegenerate doublet.
pub fn fidelity_f2(rho: &CMatrix, spec: &Spectrum, target: ControlPoint) -> Result<FidelityResult> {
    if target.chi != 0.0 {
        return Err(invalid("target", "F2 is defined for targets with chi = 0"));
    }
    if spec.dim() < 2 {
        return Err(invalid("spectrum", "F2 needs at least two levels"));
    }
    let value = population(rho, spec, 0) + population(rho, spec, 1);
    Ok(FidelityResult { value, kind: FidelityKind::F2, target })
}

/// Instantaneous occupations `P_n = <E_n|rho|E_n>`.
pub fn occupations(rho: &CMatrix, spec: &Spectrum) -> Vec<f64> {
    (0..spec.dim()).map(|n| population(rho, spec, n)).collect()
}

/// `tr(rho^2)`.
pub fn purity(rho: &CMatrix) -> f64 {
    linalg::purity(rho)
}

/// `tr(P rho)`.
pub fn parity_expectation(rho: &CMatrix, parity: &CMatrix) -> f64 {
    linalg::trace(&(parity * rho)).re
}

/// Largest deviation of `tr(P rho(t))` from its initial value.
pub fn parity_drift(trajectory: &Trajectory, parity: &CMatrix) -> f64 {
    let Some(first) = trajectory.states.first() else {
        return 0.0;
    };
    let p0 = parity_expectation(first, parity);
    trajectory
        .states
        .iter()
        .map(|rho| (parity_expectation(rho, parity) - p0).abs())
        .fold(0.0, f64::max)
}

/// One trajectory sample with its instantaneous-basis diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableRow {
    pub t: f64,
    pub s: f64,
    pub point: ControlPoint,
    pub trace: f64,
    pub purity: f64,
    pub occupations: Vec<f64>,
}

/// Occupations in the eigenbasis of `H_S(Lambda(t))` for every sample.
pub fn observe_trajectory(sys: &SpinSystem, schedule: &DriveSchedule, trajectory: &Trajectory) -> Result<Vec<ObservableRow>> {
    trajectory
        .times
        .iter()
        .zip(&trajectory.states)
        .map(|(&t, rho)| {
            let s = schedule.s_at(t)?;
            let point = schedule.path().point(s);
            let spec = eigendecompose(&sys.blocks().at(point))?;
            Ok(ObservableRow {
                t,
                s,
                point,
                trace: linalg::trace(rho).re,
                purity: purity(rho),
                occupations: occupations(rho, &spec),
            })
        })
        .collect()
}

fn gap_at(sys: &SpinSystem, path: &DrivePath, s: f64) -> f64 {
    let e = hermitian_eigenvalues(&sys.blocks().at(path.point(s)));
    e[1] - e[0]
}

/// Location and shape of the minimum of `Delta_10(s)` along a path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapMinimum {
    pub s: f64,
    pub gap: f64,
    /// Asymptotic slope `alpha` of the local hyperbola
    /// `Delta^2 = Delta_min^2 + alpha^2 (s - s_min)^2`.
    pub slope: f64,
}

/// Scans `Delta_10` on `grid` points over `s in [0, 1]`, refines the
/// minimum by golden-section search and measures the hyperbola slope from
/// central second differences of `Delta^2`.
pub fn gap_minimum(sys: &SpinSystem, path: &DrivePath, grid: usize) -> Result<GapMinimum> {
    if grid < 5 {
        return Err(invalid("grid", "gap scan needs at least 5 points"));
    }
    let h = 1.0 / (grid - 1) as f64;
    let gaps: Vec<f64> = (0..grid).map(|i| gap_at(sys, path, i as f64 * h)).collect();
    let imin = (0..grid).min_by(|&a, &b| gaps[a].total_cmp(&gaps[b])).unwrap_or(0);
    if imin == 0 || imin == grid - 1 {
        return Err(Error::ScanRange { s: imin as f64 * h });
    }
    // Golden-section refinement on [s_{i-1}, s_{i+1}].
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = ((imin - 1) as f64 * h, (imin + 1) as f64 * h);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (gap_at(sys, path, c), gap_at(sys, path, d));
    for _ in 0..200 {
        if b - a < 1e-14 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = gap_at(sys, path, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = gap_at(sys, path, d);
        }
    }
    let s0 = 0.5 * (a + b);
    let g0 = gap_at(sys, path, s0);
    let slope_at = |step: f64| {
        let plus = gap_at(sys, path, (s0 + step).min(1.0));
        let minus = gap_at(sys, path, (s0 - step).max(0.0));
        let second = (plus * plus + minus * minus - 2.0 * g0 * g0) / (2.0 * step * step);
        second.max(0.0).sqrt()
    };
    let mut step = h;
    let mut slope = slope_at(step);
    for _ in 0..40 {
        let next = slope_at(0.5 * step);
        let converged = (next - slope).abs() <= 1e-4 * slope.abs().max(1e-300);
        step *= 0.5;
        slope = next;
        if converged || step < 1e-7 {
            break;
        }
    }
    Ok(GapMinimum { s: s0, gap: g0, slope })
}

/// Two-state adiabatic timescale `2 |dDelta/ds| / (pi Delta_10^2)` at the
/// gap minimum, with `|dDelta/ds|` the asymptotic slope of the avoided
/// crossing. A flat gap has no interior minimum and is reported as a
/// scan-range error.
pub fn adiabatic_timescale(sys: &SpinSystem, path: &DrivePath) -> Result<f64> {
    let m = gap_minimum(sys, path, 2001)?;
    Ok(2.0 * m.slope / (core::f64::consts::PI * m.gap * m.gap))
}
