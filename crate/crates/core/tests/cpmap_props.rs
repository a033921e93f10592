mod common;

use cph_core::cpmap::{
    adjoint_apply, apply, apply_power, cesaro_invariant_state, limit_phi_n_identity, neumann_series,
    peripheral_projection, superoperator, NeumannOutcome,
};
use cph_core::dilation::generalized_power;
use cph_core::opcore::{is_psd, max_abs, min_eigenvalue, op_norm, unvec, vec, CMatrix};
use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kraus_and_superoperator_agree(seed: u64, n in 1usize..5, d in 1usize..4) {
        let mut r = rng(seed);
        let phi = random_contraction(&mut r, n, d, 0.9);
        let x = random_matrix(&mut r, n, n);
        let direct = apply(&phi, &x).unwrap();
        let via = superoperator(&phi).apply(&x).unwrap();
        prop_assert!(max_abs(&(direct - via)) <= 1e-12);
    }

    #[test]
    fn positive_inputs_stay_positive(seed: u64, n in 1usize..5, d in 1usize..4) {
        let mut r = rng(seed);
        let phi = random_contraction(&mut r, n, d, 1.0);
        let g = random_matrix(&mut r, n, n);
        prop_assert!(is_psd(&apply(&phi, &(&g * g.adjoint())).unwrap(), &tol()).unwrap());
    }

    #[test]
    fn powers_compose(seed: u64, n in 1usize..4, d in 1usize..3, a in 0usize..4, b in 0usize..4) {
        let mut r = rng(seed);
        let phi = random_contraction(&mut r, n, d, 1.0);
        let x = random_matrix(&mut r, n, n);
        let split = apply_power(&phi, &apply_power(&phi, &x, b).unwrap(), a).unwrap();
        let joint = apply_power(&phi, &x, a + b).unwrap();
        prop_assert!(max_abs(&(&split - &joint)) <= 1e-12);
        if a > 0 {
            let family = apply(&phi.power(a), &apply_power(&phi, &x, b).unwrap()).unwrap();
            prop_assert!(max_abs(&(family - joint)) <= 1e-12);
        }
    }

    #[test]
    fn dual_is_the_trace_adjoint(seed: u64, n in 1usize..5, d in 1usize..4) {
        let mut r = rng(seed);
        let phi = random_contraction(&mut r, n, d, 1.0);
        let (x, rho) = (random_matrix(&mut r, n, n), random_matrix(&mut r, n, n));
        let lhs = (apply(&phi, &x).unwrap() * &rho).trace();
        let rhs = (&x * adjoint_apply(&phi, &rho).unwrap()).trace();
        prop_assert!((lhs - rhs).norm() <= 1e-11);
        let m = superoperator(&phi);
        let via = unvec(&(m.adjoint().matrix * vec(&rho)), n).unwrap();
        prop_assert!(max_abs(&(via - adjoint_apply(&phi, &rho).unwrap())) <= 1e-12);
    }

    #[test]
    fn neumann_sum_solves_the_resolvent(seed: u64, n in 1usize..5, d in 1usize..4, s in 0.1f64..0.9) {
        let mut r = rng(seed);
        let phi = random_contraction(&mut r, n, d, s);
        let g = random_matrix(&mut r, n, n);
        let rhs = &g * g.adjoint();
        match neumann_series(&phi, &rhs, &tol()).unwrap() {
            NeumannOutcome::Converged { sum, .. } => {
                let gap = &sum - apply(&phi, &sum).unwrap() - &rhs;
                prop_assert!(max_abs(&gap) <= 1e-8 * op_norm(&sum).max(1.0));
            }
            other => prop_assert!(false, "did not converge: {:?}", other),
        }
    }

    #[test]
    fn identity_orbit_decreases_to_a_fixed_point(seed: u64, n in 1usize..5, d in 1usize..4) {
        let mut r = rng(seed);
        let phi = if seed % 2 == 0 && n > 1 {
            coisometry_plus_contraction(&mut r, n, 1, d, 0.8)
        } else {
            random_contraction(&mut r, n, d, 1.0)
        };
        let id = CMatrix::identity(n, n);
        let (mut prev, mut next) = (id.clone(), apply(&phi, &id).unwrap());
        for _ in 0..20 {
            prop_assert!(min_eigenvalue(&(&prev - &next), &tol()).unwrap() >= -1e-12);
            prev = next;
            next = apply(&phi, &prev).unwrap();
        }
        let limit = limit_phi_n_identity(&phi, &tol()).unwrap();
        prop_assert!(max_abs(&(apply(&phi, &limit).unwrap() - &limit)) <= 1e-8);
        prop_assert!(min_eigenvalue(&limit, &tol()).unwrap() >= -1e-9);
        prop_assert!(min_eigenvalue(&(&id - &limit), &tol()).unwrap() >= -1e-9);
    }

    #[test]
    fn generalized_power_gram_is_the_orbit_of_identity(seed: u64, n in 1usize..4, d in 1usize..3, k in 1usize..5) {
        let mut r = rng(seed);
        let phi = random_contraction(&mut r, n, d, 1.0);
        let t = generalized_power(&phi, k);
        prop_assert_eq!(t.shape(), (n, n * d.pow(k as u32)));
        let orbit = apply_power(&phi, &CMatrix::identity(n, n), k).unwrap();
        prop_assert!(max_abs(&(&t * t.adjoint() - orbit)) <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// The exact ergodic projection against brute-force Cesàro averages of
    /// the dual orbit of the maximally mixed state. Off the peripheral
    /// spectrum the average at `N` is `E + C/N + O(ρᴺ)`, so the Richardson
    /// combination `2·avg(2N) − avg(N)` removes the `1/N` term.
    #[test]
    fn invariant_state_matches_raw_cesaro_average(seed: u64, n in 1usize..4, d in 1usize..3) {
        let mut r = rng(seed);
        let phi = if seed % 3 == 0 && n > 1 {
            structured_coisometry(&mut r, n, 1, d)
        } else {
            random_coisometry(&mut r, n, d)
        };
        let peripheral = peripheral_projection(&phi, &tol()).unwrap();
        prop_assume!(peripheral.eigenvalues.iter().all(|z| (z - 1.0).norm() < 1e-8));
        prop_assume!(peripheral.inner_radius < 0.98);
        let exact = cesaro_invariant_state(&phi, 1, &tol()).unwrap();
        let steps = 2000;
        let mut rho = CMatrix::identity(n, n).unscale(n as f64);
        let mut partial = CMatrix::zeros(n, n);
        let mut total = CMatrix::zeros(n, n);
        for m in 0..2 * steps {
            if m == steps {
                partial = total.clone();
            }
            total += &rho;
            rho = adjoint_apply(&phi, &rho).unwrap();
        }
        let short = partial.unscale(steps as f64);
        let long = total.unscale(2.0 * steps as f64);
        let extrapolated = long.scale(2.0) - short;
        let err = max_abs(&(&extrapolated - &exact.density));
        prop_assert!(err <= 1e-8, "Cesàro gap {err:e}");
        prop_assert!((exact.density.trace().re - 1.0).abs() <= 1e-9);
    }
}
