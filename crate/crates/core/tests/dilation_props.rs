mod common;

use cph_core::dilation::{build_dilation, cnc_subspace, generalized_power, is_absolutely_continuous_finite};
use cph_core::fock::{cesaro_mean, creation_operator, fourier_coefficient, is_wandering, TruncatedFock};
use cph_core::opcore::{max_abs, op_norm, CMatrix, CVector};
use cph_core::KrausFamily;
use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Product `V_{w₁} ⋯ V_{w_k}` for a word with 0-based letters.
fn word_product(ops: &[CMatrix], word: &[usize]) -> CMatrix {
    let n = ops[0].nrows();
    word.iter().fold(CMatrix::identity(n, n), |acc, &i| acc * &ops[i])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dilation_compresses_to_the_tuple(seed: u64, n in 1usize..4, d in 1usize..3, levels in 1usize..5) {
        let mut r = rng(seed);
        let t = if seed % 2 == 0 { random_coisometry(&mut r, n, d) } else { random_contraction(&mut r, n, d, 0.7) };
        let dil = build_dilation(&t, levels, &tol()).unwrap();
        prop_assert!(dil.verification.isometry_defect <= 1e-10);
        prop_assert!(dil.verification.dilation_defect <= 1e-10);
        prop_assert!(dil.verification.defect_identity_residual <= 1e-10);
        // Independent check on products of two letters.
        if levels >= 2 {
            for i in 0..d {
                for j in 0..d {
                    let v = word_product(&dil.v, &[i, j]);
                    let compressed = v.view((0, 0), (n, n)).into_owned();
                    let expected = &t.operators()[i] * &t.operators()[j];
                    prop_assert!(max_abs(&(compressed - expected)) <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn dilation_is_isometric_below_the_top_level(seed: u64, n in 1usize..4, d in 1usize..3, levels in 2usize..5) {
        let mut r = rng(seed);
        let t = random_contraction(&mut r, n, d, 1.0);
        let dil = build_dilation(&t, levels, &tol()).unwrap();
        let rank = dil.defect_rank;
        let below_top = dil.k_dim - rank * d.pow(levels as u32 - 1);
        let row: Vec<CMatrix> = dil.v.iter().map(|v| v.columns(0, below_top).into_owned()).collect();
        // Σ Vᵢ*Vⱼ = δᵢⱼ I on those columns.
        for i in 0..d {
            for j in 0..d {
                let gram = row[i].adjoint() * &row[j];
                let expected = if i == j { CMatrix::identity(below_top, below_top) } else { CMatrix::zeros(below_top, below_top) };
                prop_assert!(max_abs(&(gram - expected)) <= 1e-10);
            }
        }
    }

    #[test]
    fn bands_reassemble_and_fejer_means_contract(seed: u64, d in 1usize..3, levels in 1usize..5, h_dim in 1usize..3, k in 1usize..6) {
        let fock = TruncatedFock::new(d, levels).unwrap();
        let size = fock.dim() * h_dim;
        let a = random_matrix(&mut rng(seed), size, size);
        let top = levels as i64 - 1;
        let mut total = CMatrix::zeros(size, size);
        for j in -top..=top {
            total += fourier_coefficient(&a, j, &fock, h_dim).unwrap();
        }
        prop_assert_eq!(total, a.clone());
        // Fejér means average the gauge action against a positive kernel.
        let mean = cesaro_mean(&a, k, &fock, h_dim).unwrap();
        prop_assert!(op_norm(&mean) <= op_norm(&a) * (1.0 + 1e-12));
    }

    #[test]
    fn vacuum_is_wandering_for_the_shifts(d in 1usize..3, levels in 2usize..5) {
        let fock = TruncatedFock::new(d, levels).unwrap();
        let shifts: Vec<CMatrix> = (1..=d).map(|j| creation_operator(j, &fock).unwrap()).collect();
        let mut vacuum = CVector::zeros(fock.dim());
        vacuum[0] = num_complex::Complex64::new(1.0, 0.0);
        prop_assert!(is_wandering(&shifts, &vacuum, levels - 1, &tol()).unwrap());
        // Creation operators are isometric off the top level.
        let below = fock.level_offset(levels - 1);
        for s in &shifts {
            let cols = s.columns(0, below).into_owned();
            prop_assert!(max_abs(&(cols.adjoint() * &cols - CMatrix::identity(below, below))) <= 1e-14);
        }
    }

    #[test]
    fn strict_contractions_are_completely_non_coisometric(seed: u64, n in 1usize..4, d in 1usize..3, s in 0.1f64..0.95) {
        let t = random_contraction(&mut rng(seed), n, d, s);
        prop_assert_eq!(cnc_subspace(&t, &tol()).unwrap().rank(), 0);
        let report = is_absolutely_continuous_finite(&t, &tol()).unwrap();
        prop_assert!(report.absolutely_continuous);
        prop_assert_eq!(report.consistent, Some(true));
    }

    #[test]
    fn coisometric_summands_are_detected(seed: u64, n in 2usize..5, d in 1usize..3) {
        let mut r = rng(seed);
        let k = 1 + (seed as usize) % (n - 1);
        let t = coisometry_plus_contraction(&mut r, n, k, d, 0.6);
        let h1 = cnc_subspace(&t, &tol()).unwrap();
        prop_assert_eq!(h1.rank(), k);
        // H₁ is where every T̃ₘ* is isometric.
        for m in 1..4 {
            let tm = generalized_power(&t, m);
            let basis = h1.basis();
            let image = tm.adjoint() * basis;
            prop_assert!(max_abs(&(image.adjoint() * image - CMatrix::identity(k, k))) <= 1e-8);
        }
    }
}

#[test]
fn single_isometry_dilates_to_itself() {
    let u = orthonormalize_rows(&random_matrix(&mut rng(3), 3, 3));
    let t = KrausFamily::new(vec![u.clone()]).unwrap();
    let dil = build_dilation(&t, 3, &tol()).unwrap();
    assert_eq!(dil.defect_rank, 0);
    assert_eq!(dil.k_dim, 3);
    assert!(max_abs(&(&dil.v[0] - u)) <= 1e-12);
}
