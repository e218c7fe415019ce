//! Cross-module checks of the three propagators on small systems.

use core::f64::consts::FRAC_PI_2;

use lmgdrive_core::bath::BathModel;
use lmgdrive_core::driving::{build_schedule, DrivePath, DriveSchedule, Protocol};
use lmgdrive_core::hamiltonian::{DrivenHamiltonian, HamiltonianSource, StaticHamiltonian};
use lmgdrive_core::heom::{evolve, HeomCoupling, SolverConfig};
use lmgdrive_core::lindblad::{lindblad_evolve, LindbladConfig, LindbladModel};
use lmgdrive_core::linalg::trace_distance;
use lmgdrive_core::observables::{adiabatic_timescale, fidelity_f1, parity_drift};
use lmgdrive_core::ode::Method;
use lmgdrive_core::spin::{
    build_coupling_operator, eigendecompose, parity_operator, thermal_state, ControlPoint, SpinSystem,
};
use lmgdrive_core::trajectory::uniform_grid;
use lmgdrive_core::unitary::{evolve_unitary, UnitaryConfig};
use lmgdrive_core::CMatrix;

fn ground_state(h: &CMatrix) -> CMatrix {
    let spec = eigendecompose(h).unwrap();
    let g = spec.state(0);
    g * g.adjoint()
}

struct Setup {
    sys: SpinSystem,
    ham: DrivenHamiltonian,
    rho0: CMatrix,
}

fn driven(n: usize, path: DrivePath, t_final: f64, temperature: f64) -> Setup {
    let sys = SpinSystem::new(n).unwrap();
    let schedule = DriveSchedule::linear(path, t_final).unwrap();
    let ham = DrivenHamiltonian::new(&sys, schedule, None);
    let spec = eigendecompose(&ham.at(0.0).unwrap()).unwrap();
    let rho0 = thermal_state(&spec, 1.0 / temperature).unwrap();
    Setup { sys, ham, rho0 }
}

#[test]
fn hierarchy_thermalizes_to_lindblad_steady_state() {
    let sys = SpinSystem::new(4).unwrap();
    let h = sys.blocks().at(ControlPoint::new(0.6, 0.3));
    let q = build_coupling_operator(&sys, FRAC_PI_2);
    let bath = BathModel::with_default_cutoff(0.1, 10.0, 1.0).unwrap();
    let rho0 = ground_state(&h);
    // The hierarchy settles within t ~ 600; the secular Lindblad relaxation
    // is slower and needs t ~ 1500 to reach its fixed point to 1e-6.
    let (t_heom, t_lindblad) = (600.0, 2000.0);

    let mut cfg = SolverConfig::new(vec![t_heom]);
    cfg.method = Method::Exponential;
    let heom = evolve(&rho0, &StaticHamiltonian(h.clone()), &HeomCoupling::new(&q, 4, &bath).unwrap(), &cfg).unwrap();
    let model = LindbladModel::new(q, bath, 4);
    let lindblad = lindblad_evolve(&rho0, &StaticHamiltonian(h.clone()), &model, &LindbladConfig::new(vec![t_lindblad])).unwrap();
    let gibbs = thermal_state(&eigendecompose(&h).unwrap(), 1.0).unwrap();

    let a = heom.trajectory.final_state().unwrap();
    let b = lindblad.trajectory.final_state().unwrap();
    assert!(trace_distance(b, &gibbs) < 1e-6);
    assert!(trace_distance(a, b) < 0.05, "HEOM vs steady state {}", trace_distance(a, b));
}

#[test]
fn landau_zener_estimate_matches_closed_dynamics() {
    // Protocol A moves s uniformly, so the two-state survival probability of
    // the ground state is 1 - exp(-t_F / tau).
    let path = DrivePath::first_order();
    let sys = SpinSystem::new(10).unwrap();
    let tau = adiabatic_timescale(&sys, &path).unwrap();
    for log_tf in [2.8, 3.6] {
        let t_final = 10f64.powf(log_tf);
        let schedule = build_schedule(&sys, path, Protocol::A, t_final, 2048).unwrap();
        let ham = DrivenHamiltonian::new(&sys, schedule, None);
        let rho0 = ground_state(&ham.at(0.0).unwrap());
        let run = evolve_unitary(&rho0, &ham, &[t_final], &UnitaryConfig::default()).unwrap();
        let target = eigendecompose(&sys.blocks().at(path.end)).unwrap();
        let f1 = fidelity_f1(run.final_state().unwrap(), &target, path.end).value;
        let predicted = 1.0 - (-t_final / tau).exp();
        assert!((f1 - predicted).abs() < 0.02, "t_F=10^{log_tf}: F1 {f1} vs two-state {predicted}");
    }
}

#[test]
fn hierarchy_depth_is_converged() {
    let s = driven(4, DrivePath::first_order(), 20.0, 1.0);
    let bath = BathModel::with_default_cutoff(0.1, 10.0, 1.0).unwrap();
    let coupling = HeomCoupling::new(&build_coupling_operator(&s.sys, FRAC_PI_2), 4, &bath).unwrap();
    let target = eigendecompose(&s.sys.blocks().at(DrivePath::first_order().end)).unwrap();
    let fidelity = |depth: usize| {
        let mut cfg = SolverConfig::new(vec![20.0]);
        cfg.depth = depth;
        let run = evolve(&s.rho0, &s.ham, &coupling, &cfg).unwrap();
        fidelity_f1(run.trajectory.final_state().unwrap(), &target, DrivePath::first_order().end).value
    };
    let (f3, f4) = (fidelity(3), fidelity(4));
    assert!((f3 - f4).abs() < 1e-3, "L=3 {f3} vs L=4 {f4}");
}

#[test]
fn integrators_agree_and_runs_are_deterministic() {
    let s = driven(4, DrivePath::first_order(), 10.0, 0.5);
    let bath = BathModel::with_default_cutoff(0.1, 10.0, 0.5).unwrap();
    let coupling = HeomCoupling::new(&build_coupling_operator(&s.sys, FRAC_PI_2), 4, &bath).unwrap();
    let grid = uniform_grid(10.0, 6);
    let dp = SolverConfig::new(grid.clone());
    let mut etd = dp.clone();
    etd.method = Method::Exponential;
    let a = evolve(&s.rho0, &s.ham, &coupling, &dp).unwrap();
    let b = evolve(&s.rho0, &s.ham, &coupling, &etd).unwrap();
    let c = evolve(&s.rho0, &s.ham, &coupling, &dp).unwrap();
    for ((x, y), z) in a.trajectory.states.iter().zip(&b.trajectory.states).zip(&c.trajectory.states) {
        assert!(trace_distance(x, y) < 1e-6);
        assert_eq!(x, z);
    }
}

#[test]
fn trajectories_satisfy_density_matrix_contracts() {
    let s = driven(5, DrivePath::first_order(), 30.0, 0.5);
    let bath = BathModel::with_default_cutoff(1.0, 10.0, 0.5).unwrap();
    let q = build_coupling_operator(&s.sys, FRAC_PI_2);
    let grid = uniform_grid(30.0, 31);
    let heom = evolve(&s.rho0, &s.ham, &HeomCoupling::new(&q, 5, &bath).unwrap(), &SolverConfig::new(grid.clone()))
        .unwrap();
    heom.trajectory.check(1e-6, 1e-8, 1e-6).unwrap();
    let lindblad = lindblad_evolve(&s.rho0, &s.ham, &LindbladModel::new(q, bath, 5), &LindbladConfig::new(grid)).unwrap();
    lindblad.trajectory.check(1e-8, 1e-8, 1e-8).unwrap();
}

#[test]
fn parity_is_conserved_with_longitudinal_coupling() {
    let s = driven(4, DrivePath::second_order(), 10.0, 0.3);
    let bath = BathModel::with_default_cutoff(1.0, 10.0, 0.3).unwrap();
    let coupling = HeomCoupling::new(&build_coupling_operator(&s.sys, 0.0), 4, &bath).unwrap();
    let run = evolve(&s.rho0, &s.ham, &coupling, &SolverConfig::new(uniform_grid(10.0, 21))).unwrap();
    assert!(parity_drift(&run.trajectory, &parity_operator(&s.sys)) < 1e-6);
}
