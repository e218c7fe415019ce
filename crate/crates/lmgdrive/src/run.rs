//! Single-point runs: build the model for one grid point, propagate it with
//! the selected solver and evaluate the final fidelity.

use lmgdrive_core::bath::{default_matsubara_cutoff, BathModel};
use lmgdrive_core::driving::build_schedule;
use lmgdrive_core::hamiltonian::DrivenHamiltonian;
use lmgdrive_core::heom::{self, HeomCoupling, SolverConfig};
use lmgdrive_core::lindblad::{lindblad_evolve, LindbladConfig, LindbladModel};
use lmgdrive_core::observables::{fidelity_f1, fidelity_f2, observe_trajectory, FidelityResult, ObservableRow};
use lmgdrive_core::ode::{Method, OdeStats};
use lmgdrive_core::spin::{build_coupling_operator, eigendecompose, thermal_state, Spectrum, SpinSystem};
use lmgdrive_core::trajectory::{uniform_grid, Trajectory};
use lmgdrive_core::unitary::{evolve_unitary, propagator, UnitaryConfig};
use lmgdrive_core::{linalg, CMatrix, Error, Result};

use crate::config::{GridPoint, NumericSettings, PathKind, SolverKind};

/// Fidelity and diagnostics of one finished point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointValue {
    pub fidelity: f64,
    pub trace_drift: f64,
}

/// Full trajectory of one point with its observables.
#[derive(Debug, Clone)]
pub struct DriveOutcome {
    pub trajectory: Trajectory,
    pub observables: Vec<ObservableRow>,
    pub fidelity: FidelityResult,
    /// Integrator counters; `None` for the unitary solver.
    pub stats: Option<OdeStats>,
}

impl DriveOutcome {
    pub fn value(&self) -> PointValue {
        PointValue { fidelity: self.fidelity.value, trace_drift: self.trajectory.trace_drift() }
    }
}

struct Model {
    sys: SpinSystem,
    ham: DrivenHamiltonian,
    initial: Spectrum,
    target: Spectrum,
}

impl Model {
    /// The initial Gibbs state and the fidelity target use the bare `H_S`;
    /// the counterterm (for `r = 1`) enters only the propagation.
    fn new(point: &GridPoint, settings: &NumericSettings) -> Result<Self> {
        let sys = SpinSystem::new(point.n)?;
        let path = point.path.drive_path();
        let schedule = build_schedule(&sys, path, point.protocol.protocol(), point.t_final, settings.schedule_grid)?;
        let counterterm = (point.r == 1).then_some((point.q, point.theta));
        let ham = DrivenHamiltonian::new(&sys, schedule, counterterm);
        let initial = eigendecompose(&sys.blocks().at(path.start))?;
        let target = eigendecompose(&sys.blocks().at(path.end))?;
        Ok(Self { sys, ham, initial, target })
    }

    fn rho0(&self, temperature: f64) -> Result<CMatrix> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::InvalidTemperature(temperature));
        }
        thermal_state(&self.initial, 1.0 / temperature)
    }

    /// `F1` on the first-order path, `F2` on the second-order path.
    fn fidelity(&self, path: PathKind, rho: &CMatrix) -> Result<FidelityResult> {
        let end = path.drive_path().end;
        match path {
            PathKind::FirstOrder => Ok(fidelity_f1(rho, &self.target, end)),
            PathKind::SecondOrder => fidelity_f2(rho, &self.target, end),
        }
    }
}

fn bath_for(point: &GridPoint, settings: &NumericSettings) -> Result<BathModel> {
    let m_cut = if point.m_cut > 0 { point.m_cut } else { default_matsubara_cutoff(point.temperature) };
    BathModel::new(point.q, settings.gamma, point.temperature, m_cut)
}

fn propagate(model: &Model, point: &GridPoint, settings: &NumericSettings, grid: Vec<f64>) -> Result<(Trajectory, Option<OdeStats>)> {
    let rho0 = model.rho0(point.temperature)?;
    match point.solver {
        SolverKind::Unitary => {
            if point.q != 0.0 {
                return Err(Error::InvalidParameter {
                    name: "q",
                    reason: lmgdrive_core::error::Reason("the unitary solver ignores the bath; q must be 0"),
                });
            }
            Ok((evolve_unitary(&rho0, &model.ham, &grid, &UnitaryConfig::default())?, None))
        }
        SolverKind::Heom => {
            let bath = bath_for(point, settings)?;
            let q_op = build_coupling_operator(&model.sys, point.theta);
            let coupling = HeomCoupling::new(&q_op, point.n, &bath)?;
            let mut cfg = SolverConfig::new(grid);
            cfg.depth = point.depth;
            cfg.method = settings.integrator.method();
            cfg.rel_tol = settings.rel_tol;
            cfg.abs_tol = settings.abs_tol;
            cfg.ado_cap = settings.ado_cap;
            let run = heom::evolve(&rho0, &model.ham, &coupling, &cfg)?;
            Ok((run.trajectory, Some(run.stats)))
        }
        SolverKind::Lindblad => {
            let bath = bath_for(point, settings)?;
            let q_op = build_coupling_operator(&model.sys, point.theta);
            let lindblad = LindbladModel::new(q_op, bath, point.n);
            let mut cfg = LindbladConfig::new(grid);
            cfg.method = Method::DormandPrince;
            cfg.rel_tol = settings.rel_tol;
            cfg.abs_tol = settings.abs_tol;
            let run = lindblad_evolve(&rho0, &model.ham, &lindblad, &cfg)?;
            Ok((run.trajectory, Some(run.stats)))
        }
    }
}

/// Propagates one point and samples `samples` equally spaced times in
/// `[0, t_F]`. The Lindblad solver always integrates with Dormand-Prince;
/// `settings.integrator` selects the hierarchy integrator.
pub fn drive(point: &GridPoint, settings: &NumericSettings, samples: usize) -> Result<DriveOutcome> {
    let model = Model::new(point, settings)?;
    let (trajectory, stats) = propagate(&model, point, settings, uniform_grid(point.t_final, samples))?;
    let observables = observe_trajectory(&model.sys, model.ham.schedule(), &trajectory)?;
    let last = trajectory.final_state().ok_or(Error::OutOfRange { t: point.t_final, t_final: point.t_final })?;
    let fidelity = model.fidelity(point.path, last)?;
    Ok(DriveOutcome { trajectory, observables, fidelity, stats })
}

/// Final fidelity of one point.
pub fn point_value(point: &GridPoint, settings: &NumericSettings) -> Result<PointValue> {
    if point.solver == SolverKind::Unitary {
        return unitary_values(std::slice::from_ref(point), settings)?
            .pop()
            .ok_or(Error::OutOfRange { t: point.t_final, t_final: point.t_final });
    }
    let model = Model::new(point, settings)?;
    let (trajectory, _) = propagate(&model, point, settings, vec![point.t_final])?;
    let rho = trajectory.final_state().ok_or(Error::OutOfRange { t: point.t_final, t_final: point.t_final })?;
    Ok(PointValue { fidelity: model.fidelity(point.path, rho)?.value, trace_drift: trajectory.trace_drift() })
}

/// Closed-system fidelities of points that share `(path, protocol, N, t_F)`
/// and differ only in temperature: one propagator serves them all.
pub fn unitary_values(points: &[GridPoint], settings: &NumericSettings) -> Result<Vec<PointValue>> {
    let Some(first) = points.first() else {
        return Ok(Vec::new());
    };
    let same_drive = |p: &GridPoint| {
        p.solver == SolverKind::Unitary
            && p.q == 0.0
            && (p.path, p.protocol, p.n, p.t_final, p.r) == (first.path, first.protocol, first.n, first.t_final, first.r)
    };
    if !points.iter().all(same_drive) {
        return Err(Error::InvalidParameter {
            name: "points",
            reason: lmgdrive_core::error::Reason("a unitary batch needs one closed-system drive"),
        });
    }
    let model = Model::new(first, settings)?;
    let u = propagator(&model.ham, 0.0, first.t_final, &UnitaryConfig::default())?;
    points
        .iter()
        .map(|p| {
            let rho = linalg::symmetrize(&(&u * model.rho0(p.temperature)? * u.adjoint()));
            Ok(PointValue {
                fidelity: model.fidelity(p.path, &rho)?.value,
                trace_drift: (linalg::trace(&rho) - linalg::ONE).norm(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ProtocolKind;

    fn point(solver: SolverKind, q: f64, temperature: f64) -> GridPoint {
        GridPoint {
            path: PathKind::FirstOrder,
            protocol: ProtocolKind::A,
            solver,
            n: 4,
            temperature,
            t_final: 5.0,
            q,
            theta: std::f64::consts::FRAC_PI_2,
            r: 0,
            m_cut: if solver == SolverKind::Heom { 5 } else { 0 },
            depth: if solver == SolverKind::Heom { 3 } else { 0 },
        }
    }

    #[test]
    fn batched_unitary_values_match_trajectories() {
        let settings = NumericSettings::default();
        let pts: Vec<_> = [0.3, 1.0, 4.0].iter().map(|&t| point(SolverKind::Unitary, 0.0, t)).collect();
        let batch = unitary_values(&pts, &settings).unwrap();
        for (p, v) in pts.iter().zip(&batch) {
            let full = drive(p, &settings, 11).unwrap();
            assert!((full.fidelity.value - v.fidelity).abs() < 1e-10);
            assert!(v.trace_drift < 1e-12);
        }
    }

    #[test]
    fn all_solvers_agree_without_coupling() {
        let settings = NumericSettings::default();
        let u = point_value(&point(SolverKind::Unitary, 0.0, 0.5), &settings).unwrap();
        let h = point_value(&point(SolverKind::Heom, 0.0, 0.5), &settings).unwrap();
        let l = point_value(&point(SolverKind::Lindblad, 0.0, 0.5), &settings).unwrap();
        assert!((u.fidelity - h.fidelity).abs() < 1e-6);
        assert!((u.fidelity - l.fidelity).abs() < 1e-6);
    }

    #[test]
    fn second_order_path_reports_doublet_fidelity() {
        let mut p = point(SolverKind::Unitary, 0.0, 0.2);
        p.path = PathKind::SecondOrder;
        let out = drive(&p, &NumericSettings::default(), 3).unwrap();
        assert_eq!(out.fidelity.kind, lmgdrive_core::observables::FidelityKind::F2);
        assert_eq!(out.observables.len(), 3);
    }

    #[test]
    fn unitary_solver_refuses_a_bath() {
        let err = point_value(&point(SolverKind::Unitary, 0.1, 1.0), &NumericSettings::default());
        assert!(matches!(err, Err(Error::InvalidParameter { .. })));
    }
}
