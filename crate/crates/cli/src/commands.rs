use cph_core::cpmap::{apply, cp_spectral_radius, is_row_contraction, limit_phi_n_identity};
use cph_core::dilation::{build_dilation, cnc_subspace, is_absolutely_continuous_finite_seeded};
use cph_core::markov::{canonical_form, invariant_vectors, markov_to_kraus, pac_markov, SubMarkovMatrix};
use cph_core::opcore::max_abs;
use cph_core::similarity::{
    similar_to_c00_seeded, similar_to_contraction, similar_to_strict_seeded, SimilarityCertificate, SimilarityKind,
};
use cph_core::superharmonic::{analyze, pac_bounds_seeded, PacResult};
use cph_core::{CMatrix, KrausFamily, Projection, ToleranceConfig};
use nalgebra::DMatrix;
use serde_json::{json, Value};

use crate::input::{InputDocument, Kind};
use crate::report::{document, matrices, matrix, projection, real_matrix, real_vector};
use crate::CliError;

/// Threshold for the pass flags of verification residuals.
pub const VERIFY_TOL: f64 = 1e-10;

/// Tolerance for comparing the general and Markov absolutely continuous
/// projections.
pub const AGREEMENT_TOL: f64 = 1e-8;

pub struct Outcome {
    pub report: Value,
    /// Set when the report was produced but a requested check failed.
    pub failure: Option<CliError>,
}

impl From<Value> for Outcome {
    fn from(report: Value) -> Self {
        Outcome { report, failure: None }
    }
}

fn require_kind(input: &InputDocument, kind: Kind) -> Result<(), CliError> {
    if input.kind == kind {
        Ok(())
    } else {
        Err(CliError::Precondition(format!(
            "expected an input of kind {}, got {}",
            kind.as_str(),
            input.kind.as_str()
        )))
    }
}

fn kraus_family(input: &InputDocument) -> Result<KrausFamily, CliError> {
    require_kind(input, Kind::Kraus)?;
    Ok(KrausFamily::new(input.matrices.clone())?)
}

fn pac_summary(pac: &PacResult) -> Value {
    let verdict = if pac.certified_equal {
        format!("certified rank {}", pac.p_lo.rank())
    } else {
        format!("indeterminate between ranks {} and {}", pac.p_lo.rank(), pac.p_hi.rank())
    };
    json!({
        "p_lo_rank": pac.p_lo.rank(),
        "p_hi_rank": pac.p_hi.rank(),
        "certified": pac.certified_equal,
        "verdict": verdict,
        "witness_count": pac.witnesses.len(),
        "periods": pac.periods,
        "seed": pac.seed,
    })
}

pub fn analyze_cpmap(input: &InputDocument, tol: &ToleranceConfig, seed: u64) -> Result<Outcome, CliError> {
    let phi = kraus_family(input)?;
    let n = phi.dim();
    let check = is_row_contraction(&phi, tol);
    let radius = cp_spectral_radius(&phi)?;
    let gram = apply(&phi, &CMatrix::identity(n, n))?;
    let coisometry_defect = max_abs(&(&gram - CMatrix::identity(n, n)));

    let mut verdicts = json!({
        "row_contraction": check.is_contraction,
        "row_coisometry": coisometry_defect <= tol.eig_tol,
    });
    let mut diagnostics = json!({
        "row_norm": check.norm,
        "coisometry_defect": coisometry_defect,
        "cp_spectral_radius": radius,
    });
    if !check.is_contraction {
        eprintln!("note: not a row contraction; contraction-only analyses skipped");
        let report = document("analyze-cpmap", input, tol, seed, verdicts, json!({}), diagnostics);
        return Ok(report.into());
    }

    let limit = limit_phi_n_identity(&phi, tol)?;
    let h1 = cnc_subspace(&phi, tol)?;
    let riesz = analyze(&phi, &CMatrix::identity(n, n), tol)?;
    let ac = is_absolutely_continuous_finite_seeded(&phi, tol, seed)?;
    let pac = &ac.pac;
    if !pac.certified_equal {
        eprintln!(
            "note: P_ac indeterminate between ranks {} and {}",
            pac.p_lo.rank(),
            pac.p_hi.rank()
        );
    }

    verdicts["identity_pure"] = json!(riesz.purity_defect <= tol.conv_tol);
    verdicts["pac_certified"] = json!(pac.certified_equal);
    verdicts["absolutely_continuous"] = json!(ac.absolutely_continuous);
    verdicts["ac_consistent_with_pac"] = json!(ac.consistent);

    let states: Vec<Value> = pac
        .invariant_states
        .iter()
        .map(|s| {
            json!({
                "period": s.period,
                "trace": s.density.trace().re,
                "density": matrix(&s.density),
                "support": projection(&s.support),
            })
        })
        .collect();
    let certificates = json!({
        "limit_identity": matrix(&limit),
        "h1": projection(&h1),
        "riesz_identity": {
            "harmonic_part": matrix(&riesz.harmonic_part),
            "pure_part": matrix(&riesz.pure_part),
        },
        "p_lo": projection(&pac.p_lo),
        "p_hi": projection(&pac.p_hi),
        "invariant_states": states,
    });
    diagnostics["h1_rank"] = json!(h1.rank());
    diagnostics["riesz_iterations"] = json!(riesz.iterations);
    diagnostics["purity_defect"] = json!(riesz.purity_defect);
    diagnostics["pac"] = pac_summary(pac);

    Ok(document("analyze-cpmap", input, tol, seed, verdicts, certificates, diagnostics).into())
}

fn sub_markov(input: &InputDocument, tol: &ToleranceConfig) -> Result<SubMarkovMatrix, CliError> {
    require_kind(input, Kind::Markov)?;
    let m = &input.matrices[0];
    Ok(SubMarkovMatrix::new(DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].re), tol)?)
}

pub fn analyze_markov(
    input: &InputDocument,
    tol: &ToleranceConfig,
    seed: u64,
    emit_kraus: bool,
    verify_general: bool,
) -> Result<Outcome, CliError> {
    let a = sub_markov(input, tol)?;
    let n = a.dim();
    let cf = canonical_form(&a, tol)?;
    let pac = pac_markov(&a, tol)?;
    let pac_indices = pac.diagonal_support();
    let vectors = invariant_vectors(&a, tol)?;

    let blocks: Vec<Value> = cf
        .recurrent_blocks
        .iter()
        .map(|b| {
            json!({
                "indices": b.indices,
                "block": real_matrix(&b.block),
                "left_eigvec": real_vector(&b.left_eigvec),
            })
        })
        .collect();
    let mut certificates = json!({
        "canonical_form": {
            "permutation": cf.permutation,
            "recurrent_blocks": blocks,
            "transient": {
                "indices": cf.transient_block.indices,
                "block": real_matrix(&cf.transient_block.block),
            },
            "permuted": real_matrix(&cf.permuted(&a)),
        },
        "pac_indices": pac_indices,
        "invariant_vectors": vectors.iter().map(real_vector).collect::<Vec<_>>(),
    });
    let mut verdicts = json!({
        "has_transient_states": !cf.transient_block.indices.is_empty(),
    });
    let mut diagnostics = json!({
        "recurrent_classes": cf.recurrent_blocks.len(),
        "pac_rank": pac.rank(),
        "transient_spectral_radius": cf.transient_block.spectral_radius,
    });

    let phi = markov_to_kraus(&a);
    if emit_kraus {
        certificates["kraus"] = matrices(phi.operators());
    }
    let mut failure = None;
    if verify_general {
        let general = pac_bounds_seeded(&phi, tol, seed)?;
        let expected = Projection::coordinate(n, &pac_indices);
        let gap = max_abs(&(general.p_lo.matrix() - expected.matrix()));
        let agrees = general.certified_equal && gap <= AGREEMENT_TOL;
        verdicts["general_agrees"] = json!(agrees);
        diagnostics["general"] = pac_summary(&general);
        diagnostics["general"]["p_lo_gap"] = json!(gap);
        if !agrees {
            failure = Some(CliError::Structure(format!(
                "general bounds disagree with the Markov projection (certified {}, gap {gap:e})",
                general.certified_equal
            )));
        }
    }
    let report = document("analyze-markov", input, tol, seed, verdicts, certificates, diagnostics);
    Ok(Outcome { report, failure })
}

fn certificate(cert: &SimilarityCertificate) -> Value {
    json!({
        "kind": cert.kind.as_str(),
        "indeterminate": cert.indeterminate,
        "r": cert.r.as_ref().map(matrix),
        "w": cert.w.as_ref().map(matrix),
        "conjugated": cert.conjugated.as_ref().map(|c| matrices(c.operators())),
        "achieved_norm": cert.achieved_norm,
    })
}

pub fn similarity(input: &InputDocument, tol: &ToleranceConfig, seed: u64) -> Result<Outcome, CliError> {
    let phi = kraus_family(input)?;
    let certs = [
        ("contraction", similar_to_contraction(&phi, tol)?),
        ("c00", similar_to_c00_seeded(&phi, tol, seed)?),
        ("strict", similar_to_strict_seeded(&phi, tol, seed)?),
    ];
    let mut verdicts = json!({});
    let mut certificates = json!({});
    let mut norms = json!({});
    for (name, cert) in &certs {
        verdicts[*name] = json!(cert.kind != SimilarityKind::None);
        certificates[*name] = certificate(cert);
        norms[*name] = json!(cert.achieved_norm);
    }
    let diagnostics = json!({
        "row_norm": is_row_contraction(&phi, tol).norm,
        "cp_spectral_radius": cp_spectral_radius(&phi)?,
        "conjugated_norms": norms,
    });
    Ok(document("similarity", input, tol, seed, verdicts, certificates, diagnostics).into())
}

pub fn dilate(
    input: &InputDocument,
    tol: &ToleranceConfig,
    seed: u64,
    levels: usize,
    emit_matrices: bool,
) -> Result<Outcome, CliError> {
    let phi = kraus_family(input)?;
    let phi = KrausFamily::new_contractive(phi.operators().to_vec(), tol)?;
    if levels == 0 {
        return Err(CliError::Precondition("--levels must be at least 1".into()));
    }
    let dil = build_dilation(&phi, levels, tol)?;
    let v = &dil.verification;
    let verdicts = json!({
        "isometric_off_top_level": v.isometry_defect <= VERIFY_TOL,
        "dilates": v.dilation_defect <= VERIFY_TOL,
    });
    let diagnostics = json!({
        "h_dim": dil.h_dim,
        "levels": dil.levels,
        "k_dim": dil.k_dim,
        "defect_rank": dil.defect_rank,
        "isometry_defect": v.isometry_defect,
        "dilation_defect": v.dilation_defect,
        "words_checked": v.words_checked,
        "defect_identity_residual": v.defect_identity_residual,
    });
    let certificates = if emit_matrices {
        json!({"defect": matrix(&dil.defect), "v": matrices(&dil.v)})
    } else {
        json!({})
    };
    Ok(document("dilate", input, tol, seed, verdicts, certificates, diagnostics).into())
}
