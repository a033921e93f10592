//! Generalized powers, the Schäffer isometric dilation on a truncated Fock
//! space, and the completely non-coisometric part of a row contraction.

use crate::cpmap::{apply, limit_phi_n_identity, require_contraction, KrausFamily};
use crate::error::Result;
use crate::fock::TruncatedFock;
use crate::opcore::{hermitian_eigen, hermitian_part, op_norm, CMatrix, CVector, Projection, ToleranceConfig};
use num_complex::Complex64;
use crate::superharmonic::{pac_bounds_seeded, PacResult};

/// `T̃ₙ`, the `m × dⁿm` row of all products `T_w` with `|w| = n`, built by
/// `T̃ₙ₊₁ = T̃ (I_d ⊗ T̃ₙ)`.
pub fn generalized_power(t: &KrausFamily, n: usize) -> CMatrix {
    let m = t.dim();
    let d = t.len();
    let row = t.row_operator();
    let mut power = CMatrix::identity(m, m);
    for _ in 0..n {
        power = &row * CMatrix::identity(d, d).kronecker(&power);
    }
    power
}

#[derive(Debug, Clone, PartialEq)]
pub struct DilationVerification {
    /// `‖Ṽ*Ṽ − I‖` on inputs not supported on the top defect level.
    pub isometry_defect: f64,
    /// Largest `‖P_H V_w|_H − T_w‖` over words with `1 ≤ |w| ≤ N`.
    pub dilation_defect: f64,
    pub words_checked: usize,
    /// `‖P_H (I − Σ VᵢVᵢ*) P_H − (I − Σ TᵢTᵢ*)‖`.
    pub defect_identity_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DilationResult {
    pub h_dim: usize,
    pub levels: usize,
    /// `(I − T̃*T̃)^{1/2}` on `ℂᵈ ⊗ H`.
    pub defect: CMatrix,
    pub defect_rank: usize,
    /// `H ⊕ (Fock levels < N) ⊗ 𝒟`.
    pub k_dim: usize,
    pub v: Vec<CMatrix>,
    pub verification: DilationVerification,
}

/// `Vᵢ h = Tᵢ h ⊕ D*Δ(eᵢ ⊗ h)` at the first defect level and
/// `Vᵢ (e_w ⊗ δ) = e_{iw} ⊗ δ` on the Fock part, with the top level sent
/// to zero. `D` is an orthonormal basis of the range of `Δ`.
pub fn build_dilation(t: &KrausFamily, levels: usize, tol: &ToleranceConfig) -> Result<DilationResult> {
    require_contraction(t, tol)?;
    let fock = TruncatedFock::new(t.len(), levels)?;
    let (m, d) = (t.dim(), t.len());
    let row = t.row_operator();
    let gap = CMatrix::identity(d * m, d * m) - row.adjoint() * &row;
    // Rank is read off I − T̃*T̃ itself: its square root would lift rounding
    // noise to the square-root scale.
    let (values, vectors) = hermitian_eigen(&hermitian_part(&gap), tol)?;
    let keep: Vec<usize> = (0..values.len()).filter(|&k| values[k] > tol.eig_tol).collect();
    let r = keep.len();
    let basis = CMatrix::from_fn(d * m, r, |row, c| vectors[(row, keep[c])]);
    let roots = CVector::from_iterator(r, keep.iter().map(|&k| Complex64::new(values[k].sqrt(), 0.0)));
    let compressed = CMatrix::from_diagonal(&roots) * basis.adjoint();
    let defect = &basis * &compressed;
    let k_dim = m + fock.dim() * r;

    let mut v = Vec::with_capacity(d);
    for (i, t_i) in t.operators().iter().enumerate() {
        let mut vi = CMatrix::zeros(k_dim, k_dim);
        vi.view_mut((0, 0), (m, m)).copy_from(t_i);
        vi.view_mut((m, 0), (r, m)).copy_from(&compressed.columns(i * m, m));
        for level in 0..levels - 1 {
            let size = fock.level_size(level);
            let from = fock.level_offset(level);
            let to = fock.level_offset(level + 1) + i * size;
            for w in 0..size {
                for delta in 0..r {
                    vi[(m + (to + w) * r + delta, m + (from + w) * r + delta)] = Complex64::new(1.0, 0.0);
                }
            }
        }
        v.push(vi);
    }

    let verification = verify(t, &v, &fock, r);
    Ok(DilationResult {
        h_dim: m,
        levels,
        defect,
        defect_rank: r,
        k_dim,
        v,
        verification,
    })
}

fn verify(t: &KrausFamily, v: &[CMatrix], fock: &TruncatedFock, r: usize) -> DilationVerification {
    let m = t.dim();
    let k_dim = v[0].nrows();
    let d = v.len();

    let mut v_row = CMatrix::zeros(k_dim, d * k_dim);
    for (i, vi) in v.iter().enumerate() {
        v_row.columns_mut(i * k_dim, k_dim).copy_from(vi);
    }
    let top_start = m + fock.level_offset(fock.levels() - 1) * r;
    let keep: Vec<usize> = (0..d)
        .flat_map(|i| (0..top_start).map(move |c| i * k_dim + c))
        .collect();
    let restricted = CMatrix::from_fn(k_dim, keep.len(), |row, c| v_row[(row, keep[c])]);
    let gram = restricted.adjoint() * &restricted;
    let isometry_defect = op_norm(&(gram - CMatrix::identity(keep.len(), keep.len())));

    let mut dilation_defect = 0.0_f64;
    let mut words_checked = 0;
    let mut frontier: Vec<(CMatrix, CMatrix)> = vec![(CMatrix::identity(k_dim, k_dim), CMatrix::identity(m, m))];
    for _ in 0..fock.levels() {
        frontier = frontier
            .iter()
            .flat_map(|(vw, tw)| {
                v.iter()
                    .zip(t.operators())
                    .map(move |(vi, ti)| (vi * vw, ti * tw))
            })
            .collect();
        for (vw, tw) in &frontier {
            let compressed = vw.view((0, 0), (m, m)).into_owned();
            dilation_defect = dilation_defect.max(op_norm(&(compressed - tw)));
            words_checked += 1;
        }
    }

    let id_k = CMatrix::identity(k_dim, k_dim);
    let mut outer = id_k;
    for vi in v {
        outer -= vi * vi.adjoint();
    }
    let id_m = CMatrix::identity(m, m);
    let target = &id_m - apply(t, &id_m).expect("dimension checked by construction");
    let defect_identity_residual = op_norm(&(outer.view((0, 0), (m, m)).into_owned() - target));

    DilationVerification {
        isometry_defect,
        dilation_defect,
        words_checked,
        defect_identity_residual,
    }
}

/// `H₁ = {h : ‖T̃ₙ* h‖ = ‖h‖ for all n}`, the eigenspace of
/// `L = lim Φⁿ(I)` for eigenvalue one.
pub fn cnc_subspace(t: &KrausFamily, tol: &ToleranceConfig) -> Result<Projection> {
    let limit = limit_phi_n_identity(t, tol)?;
    let (values, vectors) = hermitian_eigen(&limit, tol)?;
    let cutoff = 1.0 - tol.eig_tol.sqrt();
    let keep: Vec<usize> = (0..values.len()).filter(|&k| values[k] >= cutoff).collect();
    let basis = CMatrix::from_fn(t.dim(), keep.len(), |row, c| vectors[(row, keep[c])]);
    Ok(Projection::from_orthonormal_basis(basis))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbsoluteContinuityReport {
    /// No coisometric part.
    pub absolutely_continuous: bool,
    pub coisometric_rank: usize,
    pub pac: PacResult,
    /// Whether the verdict matches `P_lo = P_hi = I`; `None` when the
    /// bounds are not certified.
    pub consistent: Option<bool>,
}

pub fn is_absolutely_continuous_finite(t: &KrausFamily, tol: &ToleranceConfig) -> Result<AbsoluteContinuityReport> {
    is_absolutely_continuous_finite_seeded(t, tol, 0)
}

/// Completely non-coisometric check, cross-checked against the bounds on
/// the absolutely continuous projection.
pub fn is_absolutely_continuous_finite_seeded(
    t: &KrausFamily,
    tol: &ToleranceConfig,
    seed: u64,
) -> Result<AbsoluteContinuityReport> {
    let h1 = cnc_subspace(t, tol)?;
    let absolutely_continuous = h1.rank() == 0;
    let pac = pac_bounds_seeded(t, tol, seed)?;
    let full = pac.p_lo.rank() == t.dim();
    let consistent = pac.certified_equal.then_some(full == absolutely_continuous);
    Ok(AbsoluteContinuityReport {
        absolutely_continuous,
        coisometric_rank: h1.rank(),
        pac,
        consistent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpmap::apply_power;
    use crate::opcore::{matrix_unit, max_abs, real_diagonal};

    fn tol() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    fn swap_pair() -> KrausFamily {
        KrausFamily::new(vec![matrix_unit(2, 0, 1), matrix_unit(2, 1, 0)]).unwrap()
    }

    fn scalar(c: Complex64) -> KrausFamily {
        KrausFamily::new(vec![CMatrix::from_element(1, 1, c)]).unwrap()
    }

    #[test]
    fn generalized_power_examples() {
        let t = swap_pair();
        assert_eq!(generalized_power(&t, 0), CMatrix::identity(2, 2));
        let c = Complex64::new(0.3, 0.4);
        assert!((generalized_power(&scalar(c), 5)[(0, 0)] - c.powu(5)).norm() < 1e-15);
        for n in 0..5 {
            let p = generalized_power(&t, n);
            let lhs = &p * p.adjoint();
            let rhs = apply_power(&t, &CMatrix::identity(2, 2), n).unwrap();
            assert!(max_abs(&(lhs - rhs)) < 1e-12);
        }
    }

    #[test]
    fn zero_contraction_dilates_to_a_shift() {
        let res = build_dilation(&scalar(Complex64::new(0.0, 0.0)), 4, &tol()).unwrap();
        assert_eq!(res.defect_rank, 1);
        assert_eq!(res.k_dim, 5);
        let mut shift = CMatrix::zeros(5, 5);
        for k in 0..4 {
            shift[(k + 1, k)] = Complex64::new(1.0, 0.0);
        }
        assert!(max_abs(&(&res.v[0] - shift)) < 1e-15);
        assert!(res.verification.dilation_defect == 0.0);
        assert!(res.verification.isometry_defect < 1e-15);
    }

    #[test]
    fn scalar_dilation_compresses_powers() {
        let c = Complex64::new(0.6, 0.0);
        let res = build_dilation(&scalar(c), 5, &tol()).unwrap();
        assert!((res.defect[(0, 0)].re - 0.8).abs() < 1e-14);
        for n in 1..=5 {
            let vn = (0..n).fold(CMatrix::identity(res.k_dim, res.k_dim), |acc, _| &res.v[0] * acc);
            assert!((vn[(0, 0)] - c.powu(n)).norm() < 1e-14);
        }
        assert_eq!(res.verification.words_checked, 5);
        assert!(res.verification.isometry_defect < 1e-12);
    }

    #[test]
    fn row_coisometry_still_has_a_defect() {
        let res = build_dilation(&swap_pair(), 3, &tol()).unwrap();
        assert_eq!(res.defect_rank, 2);
        assert_eq!(res.k_dim, 2 + 7 * 2);
        assert!(res.verification.dilation_defect < 1e-12);
        assert!(res.verification.isometry_defect < 1e-12);
        assert!(res.verification.defect_identity_residual < 1e-12);
    }

    #[test]
    fn dilation_requires_contraction() {
        let big = KrausFamily::new(vec![CMatrix::identity(2, 2).scale(2.0)]).unwrap();
        assert!(matches!(build_dilation(&big, 2, &tol()), Err(crate::error::Error::Precondition(_))));
    }

    #[test]
    fn cnc_examples() {
        let half = KrausFamily::new(vec![CMatrix::identity(2, 2).scale(0.5)]).unwrap();
        assert_eq!(cnc_subspace(&half, &tol()).unwrap().rank(), 0);
        assert_eq!(cnc_subspace(&swap_pair(), &tol()).unwrap().rank(), 2);
        let mixed = KrausFamily::new(vec![real_diagonal(&[1.0, 0.5])]).unwrap();
        let p = cnc_subspace(&mixed, &tol()).unwrap();
        assert!(max_abs(&(p.matrix() - real_diagonal(&[1.0, 0.0]))) < 1e-12);
    }

    #[test]
    fn absolute_continuity_examples() {
        let r = is_absolutely_continuous_finite(&swap_pair(), &tol()).unwrap();
        assert!(!r.absolutely_continuous);
        assert_eq!(r.consistent, Some(true));

        let half = KrausFamily::new(vec![CMatrix::identity(2, 2).scale(0.5)]).unwrap();
        let r = is_absolutely_continuous_finite(&half, &tol()).unwrap();
        assert!(r.absolutely_continuous);
        assert_eq!(r.consistent, Some(true));

        let nil = KrausFamily::new(vec![matrix_unit(2, 0, 1)]).unwrap();
        let r = is_absolutely_continuous_finite(&nil, &tol()).unwrap();
        assert!(r.absolutely_continuous);
        assert_eq!(r.consistent, Some(true));
    }
}
