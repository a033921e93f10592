//! Similarity of a Kraus family to a contraction, to a `C·0` contraction,
//! and to a strict contraction.
//!
//! Each criterion asks for an invertible superharmonic `R` of a particular
//! kind. Given one, `W = R^{-1/2}` conjugates the family into the target
//! class: `Σ (WAᵢW⁻¹)(WAᵢW⁻¹)* = W Φ(R) W ≤ I`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cpmap::{
    apply, candidate_periods, ergodic_projection, limit_phi_n_identity, neumann_series_with,
    peripheral_projection_of, superoperator, KrausFamily, NeumannOutcome,
};
use crate::error::{Error, Result};
use crate::opcore::{
    hermitian_part, inv_sqrt_pd, is_psd, min_eigenvalue, min_singular_value, op_norm, range_projection, spectral_radius, unvec, vec,
    CMatrix, Projection, ToleranceConfig,
};
use crate::superharmonic::{random_psd, structured_seeds, RANDOM_SEEDS_PER_PERIOD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SimilarityKind {
    Contraction,
    C00,
    Strict,
    None,
}

impl SimilarityKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SimilarityKind::Contraction => "contraction",
            SimilarityKind::C00 => "c00",
            SimilarityKind::Strict => "strict",
            SimilarityKind::None => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityCertificate {
    pub kind: SimilarityKind,
    /// The invertible superharmonic certificate.
    pub r: Option<CMatrix>,
    /// `R^{-1/2}`.
    pub w: Option<CMatrix>,
    pub conjugated: Option<KrausFamily>,
    /// `‖Σ A'ᵢA'ᵢ*‖` for the conjugated family.
    pub achieved_norm: Option<f64>,
    /// Set when the search stopped at the spectral-radius-one boundary
    /// without a decision.
    pub indeterminate: bool,
}

impl SimilarityCertificate {
    fn none(indeterminate: bool) -> Self {
        Self {
            kind: SimilarityKind::None,
            r: None,
            w: None,
            conjugated: None,
            achieved_norm: None,
            indeterminate,
        }
    }
}

/// `{W Aᵢ W⁻¹}`.
pub fn conjugate(phi: &KrausFamily, w: &CMatrix, tol: &ToleranceConfig) -> Result<KrausFamily> {
    let n = phi.dim();
    if w.shape() != (n, n) {
        return Err(Error::Dimension(format!("conjugator must be {n}x{n}")));
    }
    let min_sv = min_singular_value(w)?;
    if min_sv <= tol.eig_tol {
        return Err(Error::Singular {
            min_singular_value: min_sv,
        });
    }
    let w_inv = w.clone().try_inverse().ok_or(Error::Singular {
        min_singular_value: min_sv,
    })?;
    Ok(phi.conjugated_by(w, &w_inv))
}

/// Checks `R ≥ eig_tol·I`, `Φ(R) ≤ R`, and the target property of the
/// conjugated family.
fn certify(phi: &KrausFamily, kind: SimilarityKind, r: CMatrix, tol: &ToleranceConfig) -> Result<Option<SimilarityCertificate>> {
    let r = hermitian_part(&r);
    let n = phi.dim();
    if min_eigenvalue(&r, tol)? < tol.eig_tol {
        return Ok(None);
    }
    if !is_psd(&hermitian_part(&(&r - apply(phi, &r)?)), tol)? {
        return Ok(None);
    }
    let w = inv_sqrt_pd(&r, tol)?;
    let conjugated = conjugate(phi, &w, tol)?;
    let achieved_norm = op_norm(&apply(&conjugated, &CMatrix::identity(n, n))?);
    let accepted = match kind {
        SimilarityKind::Contraction => achieved_norm <= 1.0 + tol.psd_tol,
        SimilarityKind::C00 => {
            achieved_norm <= 1.0 + tol.psd_tol
                && matches!(limit_phi_n_identity(&conjugated, tol), Ok(l) if op_norm(&l) <= tol.conv_tol)
        }
        SimilarityKind::Strict => achieved_norm <= 1.0 - tol.eig_tol,
        SimilarityKind::None => false,
    };
    Ok(accepted.then_some(SimilarityCertificate {
        kind,
        r: Some(r),
        w: Some(w),
        conjugated: Some(conjugated),
        achieved_norm: Some(achieved_norm),
        indeterminate: false,
    }))
}

/// Looks for an invertible superharmonic `R`: the identity when `Φ(I) ≤ I`,
/// the series `Σ Φⁿ(I)` when the spectral radius is below one, and at
/// radius one the Cesàro limit `H` of `Φⁿ(I)` plus `Σ Φⁿ(r)`, where `r`
/// projects onto the complement of the supports of the periodic states of
/// the dual map.
pub fn similar_to_contraction(phi: &KrausFamily, tol: &ToleranceConfig) -> Result<SimilarityCertificate> {
    let n = phi.dim();
    let id = CMatrix::identity(n, n);
    if is_psd(&hermitian_part(&(&id - apply(phi, &id)?)), tol)? {
        if let Some(cert) = certify(phi, SimilarityKind::Contraction, id.clone(), tol)? {
            return Ok(cert);
        }
    }
    let sup = superoperator(phi);
    let rho = spectral_radius(&sup.matrix)?;
    if rho > 1.0 + tol.eig_tol {
        return Ok(SimilarityCertificate::none(false));
    }
    if rho < 1.0 - tol.eig_tol {
        if let NeumannOutcome::Converged { sum, .. } = neumann_series_with(&sup, &id, tol)? {
            if let Some(cert) = certify(phi, SimilarityKind::Contraction, sum, tol)? {
                return Ok(cert);
            }
        }
        return Ok(SimilarityCertificate::none(false));
    }

    // Unbounded powers rule out similarity to a contraction.
    let peripheral = match peripheral_projection_of(&sup.matrix, tol) {
        Ok(p) => p,
        Err(Error::Structure(_)) => return Ok(SimilarityCertificate::none(false)),
        Err(e) => return Err(e),
    };
    let dual = sup.adjoint();
    let mixed = vec(&id.unscale(n as f64));
    let mut h = None;
    let mut dual_supports = Vec::new();
    for k in candidate_periods(&peripheral.eigenvalues, tol) {
        let forward = match ergodic_projection(&sup.power(k).matrix, tol) {
            Ok(e) => e,
            Err(Error::Structure(_)) | Err(Error::Singular { .. }) => return Ok(SimilarityCertificate::none(true)),
            Err(e) => return Err(e),
        };
        let backward = match ergodic_projection(&dual.power(k).matrix, tol) {
            Ok(e) => e,
            Err(Error::Structure(_)) | Err(Error::Singular { .. }) => return Ok(SimilarityCertificate::none(true)),
            Err(e) => return Err(e),
        };
        if k == 1 {
            h = Some(hermitian_part(&unvec(&(&forward * vec(&id)), n)?));
        }
        let state = hermitian_part(&unvec(&(&backward * &mixed), n)?);
        dual_supports.push(range_projection(&state, tol)?);
    }
    let h = h.expect("candidate periods always contain 1");
    // Seeds orthogonal to every periodic state of the dual have no
    // peripheral component, so their series converge.
    let parts: Vec<&Projection> = dual_supports.iter().collect();
    let recurrent = Projection::join(n, &parts, tol)?;
    let rest = &id - recurrent.matrix();
    let tail = if op_norm(&rest) <= tol.eig_tol {
        CMatrix::zeros(n, n)
    } else {
        match neumann_series_with(&sup, &hermitian_part(&rest), tol)? {
            NeumannOutcome::Converged { sum, .. } => sum,
            NeumannOutcome::Diverged { .. } => return Ok(SimilarityCertificate::none(true)),
        }
    };
    Ok(certify(phi, SimilarityKind::Contraction, h + tail, tol)?.unwrap_or_else(|| SimilarityCertificate::none(true)))
}

fn seed_sequence(n: usize, tol: &ToleranceConfig, seed: u64) -> Result<Vec<CMatrix>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seeds = vec![CMatrix::identity(n, n)];
    seeds.extend(structured_seeds(n, tol)?);
    seeds.extend((0..RANDOM_SEEDS_PER_PERIOD).map(|_| random_psd(n, &mut rng)));
    Ok(seeds)
}

pub fn similar_to_c00(phi: &KrausFamily, tol: &ToleranceConfig) -> Result<SimilarityCertificate> {
    similar_to_c00_seeded(phi, tol, 0)
}

/// First convergent `S(r) = Σ Φⁿ(r)` over the seed sequence that is
/// invertible; such a sum is pure superharmonic.
pub fn similar_to_c00_seeded(phi: &KrausFamily, tol: &ToleranceConfig, seed: u64) -> Result<SimilarityCertificate> {
    let sup = superoperator(phi);
    for r in seed_sequence(phi.dim(), tol, seed)? {
        if let NeumannOutcome::Converged { sum, .. } = neumann_series_with(&sup, &r, tol)? {
            let sum = hermitian_part(&sum);
            if min_eigenvalue(&sum, tol)? < tol.eig_tol {
                continue;
            }
            if let Some(cert) = certify(phi, SimilarityKind::C00, sum, tol)? {
                return Ok(cert);
            }
        }
    }
    Ok(SimilarityCertificate::none(false))
}

pub fn similar_to_strict(phi: &KrausFamily, tol: &ToleranceConfig) -> Result<SimilarityCertificate> {
    similar_to_strict_seeded(phi, tol, 0)
}

/// First pure superharmonic `Q = S(r)` over the seed sequence with
/// `Q − Φ(Q) ≥ eig_tol·I`.
pub fn similar_to_strict_seeded(phi: &KrausFamily, tol: &ToleranceConfig, seed: u64) -> Result<SimilarityCertificate> {
    let sup = superoperator(phi);
    for r in seed_sequence(phi.dim(), tol, seed)? {
        if let NeumannOutcome::Converged { sum, .. } = neumann_series_with(&sup, &r, tol)? {
            let q = hermitian_part(&sum);
            let gap = hermitian_part(&(&q - apply(phi, &q)?));
            if min_eigenvalue(&gap, tol)? < tol.eig_tol {
                continue;
            }
            if let Some(cert) = certify(phi, SimilarityKind::Strict, q, tol)? {
                return Ok(cert);
            }
        }
    }
    Ok(SimilarityCertificate::none(false))
}
