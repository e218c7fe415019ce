//! Driving schedules `t -> s(t) -> Lambda(t)` along straight paths in the
//! control plane, and the ground-state metric that defines protocol B.

use alloc::vec::Vec;

#[allow(unused_imports)]
use crate::prelude::*;
use crate::error::invalid;
use crate::spin::{critical_lambda, eigendecompose, ControlPoint, SpinSystem, DEGENERACY_TOL};
use crate::{Error, Result};

/// Smallest admissible protocol-B grid.
pub const MIN_GRID: usize = 256;
/// Default protocol-B grid.
pub const DEFAULT_GRID: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PathLabel {
    FirstOrder,
    SecondOrder,
    Custom,
}

/// Straight segment `Lambda_I -> Lambda_F`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrivePath {
    pub start: ControlPoint,
    pub end: ControlPoint,
    pub label: PathLabel,
}

impl DrivePath {
    /// `(0, 0) -> (0.25, 1.2)`, crossing the first-order transition.
    pub const fn first_order() -> Self {
        Self {
            start: ControlPoint::new(0.0, 0.0),
            end: ControlPoint::new(0.25, 1.2),
            label: PathLabel::FirstOrder,
        }
    }

    /// `(0, 0) -> (2, 0)`, crossing the second-order transition.
    pub const fn second_order() -> Self {
        Self {
            start: ControlPoint::new(0.0, 0.0),
            end: ControlPoint::new(2.0, 0.0),
            label: PathLabel::SecondOrder,
        }
    }

    pub const fn custom(start: ControlPoint, end: ControlPoint) -> Self {
        Self { start, end, label: PathLabel::Custom }
    }

    pub fn point(&self, s: f64) -> ControlPoint {
        self.start.lerp(self.end, s)
    }

    /// Euclidean length `|Lambda_F - Lambda_I|`.
    pub fn planar_length(&self) -> f64 {
        self.start.distance(self.end)
    }

    /// `dLambda/ds = Lambda_F - Lambda_I`.
    pub fn tangent(&self) -> (f64, f64) {
        (self.end.lambda - self.start.lambda, self.end.chi - self.start.chi)
    }

    /// Parameter `s` at which the path meets the thermodynamic-limit critical
    /// line `lambda = lambda_c(chi)`, if it does.
    pub fn critical_crossing(&self) -> Option<f64> {
        let f = |s: f64| {
            let p = self.point(s);
            critical_lambda(p.chi).ok().map(|lc| p.lambda - lc)
        };
        const GRID: usize = 4096;
        let mut prev: Option<(f64, f64)> = None;
        for i in 0..=GRID {
            let s = i as f64 / GRID as f64;
            let Some(v) = f(s) else {
                prev = None;
                continue;
            };
            if v == 0.0 {
                return Some(s);
            }
            if let Some((s0, v0)) = prev {
                if v0.signum() != v.signum() {
                    let (mut lo, mut hi, mut flo) = (s0, s, v0);
                    for _ in 0..200 {
                        let mid = 0.5 * (lo + hi);
                        let fm = f(mid)?;
                        if fm.signum() == flo.signum() {
                            lo = mid;
                            flo = fm;
                        } else {
                            hi = mid;
                        }
                    }
                    return Some(0.5 * (lo + hi));
                }
            }
            prev = Some((s, v));
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Protocol {
    /// Constant planar speed, `s = t / t_F`.
    A,
    /// Constant geometric speed in the ground-state metric.
    B,
}

/// Ground-state metric `g_{mu nu}` at one control point, `mu, nu in {lambda, chi}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricTensor {
    pub g_ll: f64,
    pub g_lc: f64,
    pub g_cc: f64,
}

impl MetricTensor {
    /// `g_{mu nu} d^mu d^nu`.
    pub fn contract(&self, d: (f64, f64)) -> f64 {
        self.g_ll * d.0 * d.0 + 2.0 * self.g_lc * d.0 * d.1 + self.g_cc * d.1 * d.1
    }

    pub fn is_positive_semidefinite(&self, tol: f64) -> bool {
        self.g_ll >= -tol && self.g_cc >= -tol && self.g_ll * self.g_cc - self.g_lc * self.g_lc >= -tol
    }
}

/// Spectral-sum metric
/// `g = Re sum_{n>0} <0|d_mu H|n><n|d_nu H|0> / (E_n - E_0)^2`.
pub fn metric_tensor(sys: &SpinSystem, point: ControlPoint) -> Result<MetricTensor> {
    let blocks = sys.blocks();
    let spec = eigendecompose(&blocks.at(point))?;
    let gap = spec.gap10();
    if gap < DEGENERACY_TOL * spec.energy_scale() {
        return Err(Error::Degenerate { gap, s: None });
    }
    let ground = spec.state(0);
    let dl = blocks.d_lambda() * ground;
    let dc = blocks.d_chi(point.chi) * ground;
    let mut g = MetricTensor { g_ll: 0.0, g_lc: 0.0, g_cc: 0.0 };
    for n in 1..spec.dim() {
        let v = spec.state(n);
        let a = v.dotc(&dl);
        let b = v.dotc(&dc);
        let w = 1.0 / (spec.energies[n] - spec.energies[0]).powi(2);
        g.g_ll += a.norm_sqr() * w;
        g.g_lc += (a.conj() * b).re * w;
        g.g_cc += b.norm_sqr() * w;
    }
    Ok(g)
}

/// Metric line element along the path, `w(s) = sqrt(g(Lambda(s)) Lambda' Lambda')`.
pub fn metric_speed(sys: &SpinSystem, path: &DrivePath, s: f64) -> Result<f64> {
    let g = metric_tensor(sys, path.point(s)).map_err(|e| match e {
        Error::Degenerate { gap, .. } => Error::Degenerate { gap, s: Some(s) },
        other => other,
    })?;
    Ok(g.contract(path.tangent()).max(0.0).sqrt())
}

fn check_grid(grid_size: usize) -> Result<()> {
    if grid_size < MIN_GRID {
        return Err(invalid("grid_size", "protocol-B grids need at least 256 points"));
    }
    Ok(())
}

/// Cumulative trapezoid arc length on a uniform `s` grid.
fn cumulative_length(sys: &SpinSystem, path: &DrivePath, grid_size: usize) -> Result<Vec<f64>> {
    let h = 1.0 / (grid_size - 1) as f64;
    let mut w_prev = metric_speed(sys, path, 0.0)?;
    let mut ell = Vec::with_capacity(grid_size);
    ell.push(0.0);
    for i in 1..grid_size {
        let w = metric_speed(sys, path, i as f64 * h)?;
        let last = ell[i - 1];
        ell.push(last + 0.5 * h * (w + w_prev));
        w_prev = w;
    }
    Ok(ell)
}

/// Total metric length `l(1) = int_0^1 w(s) ds` by the trapezoid rule.
pub fn geometric_length(sys: &SpinSystem, path: &DrivePath, grid_size: usize) -> Result<f64> {
    check_grid(grid_size)?;
    if path.planar_length() == 0.0 {
        return Ok(0.0);
    }
    Ok(*cumulative_length(sys, path, grid_size)?.last().unwrap_or(&0.0))
}

/// Monotone map `t -> s(t)` over `[0, t_F]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveSchedule {
    path: DrivePath,
    protocol: Protocol,
    t_final: f64,
    /// Protocol-B table (`times[i]`, `s_values[i]`); empty for protocol A.
    times: Vec<f64>,
    s_values: Vec<f64>,
    length: Option<f64>,
}

/// Builds the schedule of `protocol` on `path` with total time `t_final`.
pub fn build_schedule(
    sys: &SpinSystem,
    path: DrivePath,
    protocol: Protocol,
    t_final: f64,
    grid_size: usize,
) -> Result<DriveSchedule> {
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(invalid("t_final", "must be positive and finite"));
    }
    check_grid(grid_size)?;
    let mut schedule = DriveSchedule {
        path,
        protocol,
        t_final,
        times: Vec::new(),
        s_values: Vec::new(),
        length: None,
    };
    if protocol == Protocol::B && path.planar_length() > 0.0 {
        let ell = cumulative_length(sys, &path, grid_size)?;
        let total = ell[grid_size - 1];
        if !(total > 0.0) {
            return Err(Error::Degenerate { gap: 0.0, s: None });
        }
        schedule.times = ell.iter().map(|l| t_final * l / total).collect();
        schedule.times[grid_size - 1] = t_final;
        schedule.s_values = (0..grid_size).map(|i| i as f64 / (grid_size - 1) as f64).collect();
        schedule.length = Some(total);
    }
    Ok(schedule)
}

impl DriveSchedule {
    /// Linear schedule that needs no spectrum (protocol A).
    pub fn linear(path: DrivePath, t_final: f64) -> Result<Self> {
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(invalid("t_final", "must be positive and finite"));
        }
        Ok(Self {
            path,
            protocol: Protocol::A,
            t_final,
            times: Vec::new(),
            s_values: Vec::new(),
            length: None,
        })
    }

    pub fn path(&self) -> &DrivePath {
        &self.path
    }

    pub fn protocol(&self) -> Protocol {
        self.protocol
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    /// Metric length of the path for protocol B.
    pub fn geometric_length(&self) -> Option<f64> {
        self.length
    }

    /// Constant geometric speed `l(1) / t_F` for protocol B.
    pub fn geometric_speed(&self) -> Option<f64> {
        self.length.map(|l| l / self.t_final)
    }

    fn check_time(&self, t: f64) -> Result<f64> {
        let slack = 1e-12 * self.t_final;
        if !(t >= -slack && t <= self.t_final + slack) {
            return Err(Error::OutOfRange { t, t_final: self.t_final });
        }
        Ok(t.clamp(0.0, self.t_final))
    }

    fn segment(&self, t: f64) -> usize {
        // Index i with times[i] <= t < times[i+1], clamped to the last segment.
        let i = self.times.partition_point(|&x| x <= t);
        i.saturating_sub(1).min(self.times.len() - 2)
    }

    /// `s(t)` by piecewise-linear interpolation of the table.
    pub fn s_at(&self, t: f64) -> Result<f64> {
        let t = self.check_time(t)?;
        if self.times.is_empty() {
            return Ok(t / self.t_final);
        }
        let i = self.segment(t);
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let (s0, s1) = (self.s_values[i], self.s_values[i + 1]);
        let s = if t1 > t0 { s0 + (s1 - s0) * (t - t0) / (t1 - t0) } else { s1 };
        Ok(s.clamp(0.0, 1.0))
    }

    /// `Lambda(t) = Lambda_I + s(t) (Lambda_F - Lambda_I)`.
    pub fn lambda_at(&self, t: f64) -> Result<ControlPoint> {
        Ok(self.path.point(self.s_at(t)?))
    }

    /// `ds/dt`; slope of the table segment containing `t`, one-sided at the ends.
    pub fn ds_dt(&self, t: f64) -> Result<f64> {
        let t = self.check_time(t)?;
        if self.times.is_empty() {
            return Ok(1.0 / self.t_final);
        }
        let i = self.segment(t);
        let dt = self.times[i + 1] - self.times[i];
        Ok(if dt > 0.0 { (self.s_values[i + 1] - self.s_values[i]) / dt } else { f64::INFINITY })
    }

    /// Planar speed `u(t) = |Lambda_F - Lambda_I| ds/dt`.
    pub fn planar_speed(&self, t: f64) -> Result<f64> {
        Ok(self.path.planar_length() * self.ds_dt(t)?)
    }

    /// Table nodes `(t, s)`; protocol A reports `n` equally spaced samples.
    pub fn samples(&self, n: usize) -> Vec<(f64, f64)> {
        if self.times.is_empty() {
            let n = n.max(2);
            return (0..n)
                .map(|i| {
                    let s = i as f64 / (n - 1) as f64;
                    (s * self.t_final, s)
                })
                .collect();
        }
        self.times.iter().copied().zip(self.s_values.iter().copied()).collect()
    }
}

/// Planar speed of `schedule` at `t`.
pub fn planar_speed(schedule: &DriveSchedule, t: f64) -> Result<f64> {
    schedule.planar_speed(t)
}

/// Control point of `schedule` at `t`.
pub fn lambda_at(schedule: &DriveSchedule, t: f64) -> Result<ControlPoint> {
    schedule.lambda_at(t)
}

/// Instantaneous geometric speed `w(s(t)) ds/dt`.
pub fn geometric_speed_at(sys: &SpinSystem, schedule: &DriveSchedule, t: f64) -> Result<f64> {
    let s = schedule.s_at(t)?;
    Ok(metric_speed(sys, &schedule.path, s)? * schedule.ds_dt(t)?)
}

/// Fidelity-distance element `1 - |<E_0(a)|E_0(b)>|^2`, used to cross-check
/// the metric.
pub fn ground_state_infidelity(sys: &SpinSystem, a: ControlPoint, b: ControlPoint) -> Result<f64> {
    let sa = eigendecompose(&sys.blocks().at(a))?;
    let sb = eigendecompose(&sys.blocks().at(b))?;
    let overlap = sa.state(0).dotc(&sb.state(0));
    Ok(1.0 - overlap.norm_sqr())
}
