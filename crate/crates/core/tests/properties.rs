//! Invariants checked over randomized inputs.

use lmgdrive_core::bath::{
    matsubara_expansion, power_spectrum, terminator_residual, BathModel,
};
use lmgdrive_core::driving::{ground_state_infidelity, metric_tensor};
use lmgdrive_core::heom::{ado_count, Hierarchy};
use lmgdrive_core::lindblad::{jump_operators, rate};
use lmgdrive_core::linalg::{commutator, hermiticity_deviation, max_abs, I};
use lmgdrive_core::observables::{fidelity_f1, fidelity_f2, occupations};
use lmgdrive_core::spin::{
    build_coupling_operator, eigendecompose, parity_operator, thermal_state, ControlPoint, SpinSystem,
};
use lmgdrive_core::CMatrix;
use proptest::prelude::*;

fn point() -> impl Strategy<Value = ControlPoint> {
    (-2.0f64..3.0, -1.5f64..1.5).prop_map(|(l, c)| ControlPoint::new(l, c))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn su2_algebra_and_casimir(n in 2usize..40) {
        let sys = SpinSystem::new(n).unwrap();
        let (jx, jy, jz) = (sys.jx(), sys.jy(), sys.jz());
        let scale = 1e-12 * (n * n) as f64;
        prop_assert!(max_abs(&(commutator(jx, jy) - jz * I)) < scale);
        prop_assert!(max_abs(&(commutator(jy, jz) - jx * I)) < scale);
        prop_assert!(max_abs(&(commutator(jz, jx) - jy * I)) < scale);
        let j = sys.j();
        let casimir = jx * jx + jy * jy + jz * jz - CMatrix::identity(n + 1, n + 1).scale(j * (j + 1.0));
        prop_assert!(max_abs(&casimir) < scale);
    }

    #[test]
    fn hamiltonian_is_hermitian_and_parity_symmetric_on_axis(n in 2usize..16, p in point()) {
        let sys = SpinSystem::new(n).unwrap();
        let h = sys.blocks().at(p);
        prop_assert!(hermiticity_deviation(&h) < 1e-12);
        let on_axis = sys.blocks().at(ControlPoint::new(p.lambda, 0.0));
        prop_assert!(max_abs(&commutator(&on_axis, &parity_operator(&sys))) < 1e-12);
    }

    #[test]
    fn metric_matches_finite_difference_infidelity(p in point(), angle in 0.0f64..std::f64::consts::TAU) {
        let sys = SpinSystem::new(6).unwrap();
        let g = match metric_tensor(&sys, p) {
            Ok(g) => g,
            Err(_) => return Ok(()),
        };
        prop_assert!(g.is_positive_semidefinite(1e-12));
        let eps = 1e-4;
        let d = (eps * angle.cos(), eps * angle.sin());
        let plus = ControlPoint::new(p.lambda + d.0, p.chi + d.1);
        let minus = ControlPoint::new(p.lambda - d.0, p.chi - d.1);
        let predicted = g.contract(d);
        // Averaging both directions cancels the cubic term of the expansion.
        let measured = 0.5
            * (ground_state_infidelity(&sys, p, plus).unwrap() + ground_state_infidelity(&sys, p, minus).unwrap());
        prop_assume!(predicted > 1e-12);
        prop_assert!((measured - predicted).abs() < 1e-2 * predicted,
            "metric {predicted:e} vs infidelity {measured:e}");
    }

    #[test]
    fn rates_obey_detailed_balance(eps in 0.01f64..40.0, log_t in -0.8f64..1.4, q in 0.01f64..1.0) {
        let t = 10f64.powf(log_t);
        let bath = BathModel::new(q, 10.0, t, 18).unwrap();
        let up = rate(&bath, -eps);
        let down = rate(&bath, eps);
        prop_assert!(up >= 0.0 && down > 0.0);
        prop_assert!((up / down - (-eps / t).exp()).abs() <= 1e-10 * (-eps / t).exp().max(1e-300));
        prop_assert_eq!(rate(&bath, eps), power_spectrum(&bath, eps));
    }

    #[test]
    fn terminator_is_nonnegative_for_default_cutoff(log_t in -0.8f64..1.4, q in 0.0f64..1.0) {
        let t = 10f64.powf(log_t);
        let bath = match BathModel::with_default_cutoff(q, 10.0, t) {
            Ok(b) => b,
            Err(_) => return Ok(()),
        };
        match terminator_residual(&bath) {
            Ok(delta) => prop_assert!(delta >= 0.0),
            Err(e) => prop_assert!(matches!(e, lmgdrive_core::Error::PoleCollision { .. }), "{e}"),
        }
        if let Ok(terms) = matsubara_expansion(&bath) {
            prop_assert_eq!(terms.len(), bath.m_cut + 1);
            prop_assert!(terms.iter().all(|e| e.nu > 0.0));
        }
    }

    #[test]
    fn hierarchy_size_matches_count(l in 1usize..5, m in 0usize..12) {
        let h = Hierarchy::new(l, m, 1_000_000).unwrap();
        prop_assert_eq!(h.len() as u128, ado_count(l, m));
        for i in 0..h.len() {
            prop_assert!(h.label(i).level() <= l);
        }
    }

    #[test]
    fn jump_operators_reconstruct_coupling(p in point(), theta in 0.0f64..1.6) {
        let sys = SpinSystem::new(7).unwrap();
        let spec = eigendecompose(&sys.blocks().at(p)).unwrap();
        let q = build_coupling_operator(&sys, theta);
        let dec = jump_operators(&spec, &q, 1e-9 * spec.energy_scale()).unwrap();
        let mut total = CMatrix::zeros(8, 8);
        for b in 0..dec.len() {
            total += dec.jump_operator(b);
        }
        prop_assert!(max_abs(&(total - q)) < 1e-10);
    }

    #[test]
    fn fidelities_are_linear_and_ordered(p in point(), beta_a in 0.0f64..5.0, beta_b in 0.0f64..5.0, alpha in 0.0f64..1.0) {
        let sys = SpinSystem::new(6).unwrap();
        let start = eigendecompose(&sys.blocks().at(ControlPoint::new(0.0, 0.0))).unwrap();
        let a = thermal_state(&start, beta_a).unwrap();
        let b = thermal_state(&start, beta_b).unwrap();
        let target = ControlPoint::new(p.lambda, 0.0);
        let spec = eigendecompose(&sys.blocks().at(target)).unwrap();
        let mix = a.scale(alpha) + b.scale(1.0 - alpha);
        let f = |rho: &CMatrix| fidelity_f1(rho, &spec, target).value;
        prop_assert!((f(&mix) - alpha * f(&a) - (1.0 - alpha) * f(&b)).abs() < 1e-12);
        let f2 = fidelity_f2(&mix, &spec, target).unwrap().value;
        prop_assert!(f2 >= f(&mix) - 1e-15);
        prop_assert!(f2 <= 1.0 + 1e-9);
        let pops = occupations(&mix, &spec);
        prop_assert!((pops.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(pops.iter().all(|&x| x >= -1e-14));
    }
}

