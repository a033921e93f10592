mod common;

use cph_core::opcore::{
    eigenvalues, kron, max_abs, op_norm, range_projection, spectral_radius, sqrt_psd, svd, unvec, vec, CMatrix,
    CVector, Projection,
};
use common::*;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `G G*` with `G` of the given inner dimension, so the rank is at most `k`.
fn psd(rng: &mut ChaCha8Rng, n: usize, k: usize) -> CMatrix {
    let g = random_matrix(rng, n, k);
    &g * g.adjoint()
}

fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    orthonormalize_rows(&random_matrix(rng, n, n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn square_root_squares_back(seed: u64, n in 1usize..6, k in 1usize..6) {
        let m = psd(&mut rng(seed), n, k);
        let r = sqrt_psd(&m, &tol()).unwrap();
        prop_assert!(max_abs(&(&r * &r - &m)) <= 1e-9 * op_norm(&m).max(1.0));
    }

    #[test]
    fn range_projection_fixes_the_matrix(seed: u64, n in 1usize..6, k in 1usize..6) {
        let m = psd(&mut rng(seed), n, k);
        let p = range_projection(&m, &tol()).unwrap();
        prop_assert_eq!(p.rank(), n.min(k));
        prop_assert!(max_abs(&(p.matrix() * &m - &m)) <= 1e-9 * op_norm(&m).max(1.0));
        prop_assert!(p.is_valid(1e-10));
    }

    #[test]
    fn vec_and_unvec_are_inverse(seed: u64, n in 1usize..6) {
        let x = random_matrix(&mut rng(seed), n, n);
        prop_assert_eq!(unvec(&vec(&x), n).unwrap(), x);
    }

    #[test]
    fn vec_turns_products_into_kronecker(seed: u64, n in 1usize..5) {
        let mut r = rng(seed);
        let (a, x, b) = (random_matrix(&mut r, n, n), random_matrix(&mut r, n, n), random_matrix(&mut r, n, n));
        let lhs = vec(&(&a * &x * &b));
        let rhs = kron(&b.transpose(), &a) * vec(&x);
        prop_assert!((lhs - rhs).norm() <= 1e-12 * (n * n) as f64 * 10.0);
    }

    #[test]
    fn kronecker_radius_multiplies(seed: u64, n in 1usize..4, m in 1usize..4) {
        let mut r = rng(seed);
        let (a, b) = (random_matrix(&mut r, n, n), random_matrix(&mut r, m, m));
        let (ra, rb) = (spectral_radius(&a).unwrap(), spectral_radius(&b).unwrap());
        let rk = spectral_radius(&kron(&a, &b)).unwrap();
        prop_assert!((rk - ra * rb).abs() <= 1e-8 * (ra * rb).max(1.0));
    }

    #[test]
    fn svd_reconstructs_with_orthonormal_factors(seed: u64, rows in 1usize..8, cols in 1usize..8, rank in 0usize..8) {
        let mut r = rng(seed);
        let m = if rank < rows.min(cols) {
            random_matrix(&mut r, rows, rank) * random_matrix(&mut r, rank, cols)
        } else {
            random_matrix(&mut r, rows, cols)
        };
        let s = svd(&m).unwrap();
        let k = rows.min(cols);
        prop_assert_eq!(s.singular_values.len(), k);
        prop_assert!(s.singular_values.windows(2).all(|w| w[0] >= w[1]));
        let sigma = CMatrix::from_diagonal(&CVector::from_iterator(
            k,
            s.singular_values.iter().map(|&x| Complex64::new(x, 0.0)),
        ));
        prop_assert!((&s.u * sigma * &s.v_t - &m).norm() <= 1e-12 * m.norm().max(1.0));
        prop_assert!((s.u.adjoint() * &s.u - CMatrix::identity(k, k)).norm() <= 1e-12);
        prop_assert!((&s.v_t * s.v_t.adjoint() - CMatrix::identity(k, k)).norm() <= 1e-12);
    }

    #[test]
    fn eigenvalues_of_a_rotated_triangle_are_its_diagonal(seed: u64, n in 1usize..8, repeats in 0usize..2) {
        let mut r = rng(seed);
        let mut t = random_matrix(&mut r, n, n).upper_triangle();
        // Double and zero diagonal entries are the hard cases; higher
        // multiplicities are only accurate to a higher root of epsilon.
        for i in 0..repeats.min(n.saturating_sub(1)) {
            t[(i + 1, i + 1)] = t[(0, 0)];
        }
        if r.random_bool(0.3) {
            t[(n - 1, n - 1)] = Complex64::new(0.0, 0.0);
        }
        let q = random_unitary(&mut r, n);
        let m = &q * &t * q.adjoint();
        let mut got = eigenvalues(&m).unwrap();
        let want: Vec<Complex64> = (0..n).map(|i| t[(i, i)]).collect();
        let trace: Complex64 = got.iter().sum();
        prop_assert!((trace - m.trace()).norm() <= 1e-10 * m.norm().max(1.0));
        // Greedy matching; repeated eigenvalues are only sqrt-accurate.
        for w in &want {
            let (idx, d) = got
                .iter()
                .enumerate()
                .map(|(i, z)| (i, (z - w).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            prop_assert!(d <= 1e-5 * m.norm().max(1.0), "eigenvalue {} missed by {}", w, d);
            got.swap_remove(idx);
        }
    }

    #[test]
    fn join_dominates_its_parts(seed: u64, n in 2usize..6) {
        let mut r = rng(seed);
        let p1 = range_projection(&psd(&mut r, n, 1), &tol()).unwrap();
        let p2 = range_projection(&psd(&mut r, n, 1), &tol()).unwrap();
        let j = Projection::join(n, &[&p1, &p2], &tol()).unwrap();
        prop_assert!(j.dominates(&p1, 1e-9) && j.dominates(&p2, 1e-9));
        prop_assert_eq!(j.rank(), 2);
        let c = j.complement(&tol());
        prop_assert!(c.is_orthogonal_to(&j, 1e-9));
        prop_assert_eq!(c.rank() + j.rank(), n);
    }
}
