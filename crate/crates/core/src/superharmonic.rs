//! Superharmonic operators for a CP map, their Riesz decomposition, the
//! factorization of pure ones through the Fock space, and two-sided bounds
//! on the absolutely continuous projection.
//!
//! `Q ≥ 0` is superharmonic when `Φ(Q) ≤ Q`. The sequence `Φⁿ(Q)` then
//! decreases to a harmonic limit; `Q` minus that limit is pure, i.e. its
//! iterates tend to zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cpmap::{
    apply, apply_power, candidate_periods, cesaro_invariant_state, iterate_limit, neumann_unchecked,
    peripheral_projection_of, require_contraction, superoperator, InvariantStateResult, KrausFamily, NeumannOutcome,
    PeripheralProjection, SuperOperator,
};
use crate::error::{Error, Result};
use crate::fock::{creation_operator, TruncatedFock};
use crate::opcore::{
    ensure_square, hermitian_deviation, hermitian_eigen, hermitian_part, is_psd, op_norm, range_projection, sqrt_psd,
    unvec, vec, CMatrix, Projection, ToleranceConfig,
};

/// Random PSD seeds drawn per candidate period in the witness search.
pub const RANDOM_SEEDS_PER_PERIOD: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct SuperharmonicReport {
    pub q: CMatrix,
    /// `Q − Φ(Q)`.
    pub residual: CMatrix,
    pub is_superharmonic: bool,
    /// `lim Φⁿ(Q)`.
    pub harmonic_part: CMatrix,
    /// `Q − lim Φⁿ(Q)`.
    pub pure_part: CMatrix,
    /// Operator norm of the harmonic part.
    pub purity_defect: f64,
    /// Iterations used to settle the limit.
    pub iterations: usize,
}

fn check_hermitian_input(phi: &KrausFamily, q: &CMatrix, tol: &ToleranceConfig) -> Result<()> {
    ensure_square(q, "Q")?;
    if q.nrows() != phi.dim() {
        return Err(Error::Dimension(format!("Q must be {0}x{0}", phi.dim())));
    }
    let deviation = hermitian_deviation(q);
    if deviation > tol.herm_tol * q.norm().max(1.0) {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(())
}

pub fn analyze(phi: &KrausFamily, q: &CMatrix, tol: &ToleranceConfig) -> Result<SuperharmonicReport> {
    analyze_with(phi, &superoperator(phi), q, tol)
}

fn analyze_with(
    phi: &KrausFamily,
    sup: &SuperOperator,
    q: &CMatrix,
    tol: &ToleranceConfig,
) -> Result<SuperharmonicReport> {
    check_hermitian_input(phi, q, tol)?;
    let q = hermitian_part(q);
    let residual = hermitian_part(&(&q - apply(phi, &q)?));
    let is_superharmonic = is_psd(&q, tol)? && is_psd(&residual, tol)?;
    let limit = iterate_limit(sup, &q, tol)?;
    let harmonic_part = hermitian_part(&limit.limit);
    let pure_part = &q - &harmonic_part;
    let purity_defect = op_norm(&harmonic_part);
    Ok(SuperharmonicReport {
        q,
        residual,
        is_superharmonic,
        harmonic_part,
        pure_part,
        purity_defect,
        iterations: limit.iterations,
    })
}

/// Superharmonic with `Φⁿ(Q) → 0`. Inputs that fail the superharmonic test
/// are rejected before any iteration.
pub fn is_pure_superharmonic(phi: &KrausFamily, q: &CMatrix, tol: &ToleranceConfig) -> Result<bool> {
    is_pure_with(phi, &superoperator(phi), q, tol)
}

fn is_pure_with(phi: &KrausFamily, sup: &SuperOperator, q: &CMatrix, tol: &ToleranceConfig) -> Result<bool> {
    check_hermitian_input(phi, q, tol)?;
    let q = hermitian_part(q);
    if !is_psd(&q, tol)? || !is_psd(&hermitian_part(&(&q - apply(phi, &q)?)), tol)? {
        return Ok(false);
    }
    let report = analyze_with(phi, sup, &q, tol)?;
    Ok(report.purity_defect <= tol.conv_tol)
}

/// A factorization `Q − Φᴺ(Q) = C C*` through `N` Fock levels.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedIntertwiner {
    pub levels: usize,
    /// Rank of `r = (Q − Φ(Q))^{1/2}`; the Fock space is tensored with `ℂ^rank`.
    pub defect_rank: usize,
    /// `n × (Σ_{m<N} dᵐ)·rank`.
    pub c: CMatrix,
    /// `‖Q − C C*‖`.
    pub residual_norm: f64,
}

/// Builds `C*` level by level: the block at word `w` is `V* r T_w*`, where
/// `V` is an orthonormal basis of the range of `r = (Q − Φ(Q))^{1/2}`.
pub fn factor(phi: &KrausFamily, q: &CMatrix, levels: usize, tol: &ToleranceConfig) -> Result<TruncatedIntertwiner> {
    require_contraction(phi, tol)?;
    if levels == 0 {
        return Err(Error::Precondition("at least one Fock level is needed".into()));
    }
    if !is_pure_superharmonic(phi, q, tol)? {
        return Err(Error::Precondition("Q is not a pure superharmonic operator".into()));
    }
    let n = phi.dim();
    let q = hermitian_part(q);
    let r = sqrt_psd(&hermitian_part(&(&q - apply(phi, &q)?)), tol)?;
    let range = range_projection(&r, tol)?;
    let s = range.rank();
    let r_c = range.basis().adjoint() * &r;

    let fock = TruncatedFock::new(phi.len(), levels)?;
    let mut c_star = CMatrix::zeros(fock.dim() * s, n);
    let mut words = vec![CMatrix::identity(n, n)];
    for m in 0..levels {
        let offset = fock.level_offset(m) * s;
        for (w, t_w) in words.iter().enumerate() {
            let block = &r_c * t_w.adjoint();
            c_star.view_mut((offset + w * s, 0), (s, n)).copy_from(&block);
        }
        if m + 1 < levels {
            words = phi
                .operators()
                .iter()
                .flat_map(|t| words.iter().map(move |w| t * w))
                .collect();
        }
    }
    let c = c_star.adjoint();
    let residual_norm = op_norm(&(&q - &c * &c_star));
    Ok(TruncatedIntertwiner {
        levels,
        defect_rank: s,
        c,
        residual_norm,
    })
}

fn fock_multiplicity(c_cols: usize, fock: &TruncatedFock) -> Result<usize> {
    if !c_cols.is_multiple_of(fock.dim()) {
        return Err(Error::Dimension(format!(
            "{c_cols} is not a multiple of the Fock dimension {}",
            fock.dim()
        )));
    }
    Ok(c_cols / fock.dim())
}

/// Largest level-block norm of `Tᵢ C − C (Sᵢ ⊗ I)` over letters `i` and
/// levels below the top one.
pub fn intertwiner_defect(phi: &KrausFamily, c: &CMatrix, levels: usize) -> Result<f64> {
    let fock = TruncatedFock::new(phi.len(), levels)?;
    if c.nrows() != phi.dim() {
        return Err(Error::Dimension(format!("C must have {} rows", phi.dim())));
    }
    let s = fock_multiplicity(c.ncols(), &fock)?;
    if s == 0 {
        return Ok(0.0);
    }
    let id_s = CMatrix::identity(s, s);
    let mut worst = 0.0_f64;
    for (i, t) in phi.operators().iter().enumerate() {
        let shift = creation_operator(i + 1, &fock)?.kronecker(&id_s);
        let diff = t * c - c * shift;
        for m in 0..levels.saturating_sub(1) {
            let block = diff.columns(fock.level_offset(m) * s, fock.level_size(m) * s).into_owned();
            worst = worst.max(op_norm(&block));
        }
    }
    Ok(worst)
}

/// Outcome of testing an operator `C: H → 𝓕 ⊗ ℂˢ` against `C Tᵢ = Sᵢ C`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReverseIntertwinerCheck {
    pub norm: f64,
    /// `‖[C T₁ − S₁C ⋯ C T_d − S_dC]‖` with the shifts taken one level up,
    /// so nothing is lost to truncation.
    pub defect: f64,
    /// Word length used in the bound.
    pub word_length: usize,
    /// `‖T̃ₙ‖` for that length.
    pub power_norm: f64,
    /// `n · defect / (1 − ‖T̃ₙ‖)`, an upper bound for `‖C‖`.
    pub bound: f64,
    /// `None` when the defect exceeds `conv_tol` and the question is moot.
    pub verdict: Option<bool>,
}

/// For `‖T̃‖ < 1` every reverse intertwiner vanishes. Since the shifts form
/// a row isometry, `I ⊗ C = S̃ₙ*(C T̃ₙ − Eₙ)` with `‖Eₙ‖ ≤ n·defect`, which
/// gives `‖C‖ ≤ n·defect / (1 − ‖T̃ₙ‖)`.
pub fn reverse_intertwiner_is_zero(
    phi: &KrausFamily,
    c_rev: &CMatrix,
    levels: usize,
    tol: &ToleranceConfig,
) -> Result<ReverseIntertwinerCheck> {
    let n = phi.dim();
    let gram = apply(phi, &CMatrix::identity(n, n))?;
    let row_norm_sq = op_norm(&gram);
    if row_norm_sq >= 1.0 - tol.eig_tol {
        return Err(Error::Precondition(format!(
            "the row operator must be a strict contraction, ‖Σ AᵢAᵢ*‖ = {row_norm_sq}"
        )));
    }
    let fock = TruncatedFock::new(phi.len(), levels)?;
    if c_rev.ncols() != n {
        return Err(Error::Dimension(format!("C must have {n} columns")));
    }
    let s = fock_multiplicity(c_rev.nrows(), &fock)?;
    let norm = op_norm(c_rev);

    let wide = TruncatedFock::new(phi.len(), levels + 1)?;
    let mut embedded = CMatrix::zeros(wide.dim() * s, n);
    embedded.rows_mut(0, c_rev.nrows()).copy_from(c_rev);
    let id_s = CMatrix::identity(s, s);
    let mut row = CMatrix::zeros(wide.dim() * s, n * phi.len());
    for (i, t) in phi.operators().iter().enumerate() {
        let shift = creation_operator(i + 1, &wide)?.kronecker(&id_s);
        let d_i = &embedded * t - shift * &embedded;
        row.columns_mut(i * n, n).copy_from(&d_i);
    }
    let defect = op_norm(&row);

    let mut best = (1, row_norm_sq.sqrt(), f64::INFINITY);
    for k in 1..=levels.max(1) {
        let power_norm = op_norm(&apply_power(phi, &CMatrix::identity(n, n), k)?).sqrt();
        let bound = k as f64 * defect / (1.0 - power_norm);
        if bound < best.2 {
            best = (k, power_norm, bound);
        }
    }
    let verdict = (defect <= tol.conv_tol).then_some(norm <= tol.conv_tol);
    Ok(ReverseIntertwinerCheck {
        norm,
        defect,
        word_length: best.0,
        power_norm: best.1,
        bound: best.2,
        verdict,
    })
}

/// Two-sided bounds on the absolutely continuous projection.
#[derive(Debug, Clone, PartialEq)]
pub struct PacResult {
    /// Range of the pure superharmonic witnesses found.
    pub p_lo: Projection,
    /// Complement of the recurrent support.
    pub p_hi: Projection,
    pub certified_equal: bool,
    /// Witnesses, each scaled to unit operator norm.
    pub witnesses: Vec<CMatrix>,
    /// Join of the supports of the invariant and periodic states.
    pub recurrent_support: Projection,
    pub periods: Vec<usize>,
    pub invariant_states: Vec<InvariantStateResult>,
    pub seed: u64,
}

/// PSD part of a Hermitian matrix by spectral truncation.
fn positive_part(h: &CMatrix, tol: &ToleranceConfig) -> Result<CMatrix> {
    let (values, vectors) = hermitian_eigen(h, tol)?;
    let mut out = CMatrix::zeros(h.nrows(), h.ncols());
    for (k, &v) in values.iter().enumerate() {
        if v > 0.0 {
            let col = vectors.column(k);
            out += (col * col.adjoint()).scale(v);
        }
    }
    Ok(out)
}

/// Deterministic seeds: diagonal matrix units, then the PSD parts of
/// `Eⱼₖ + Eₖⱼ` and `i(Eⱼₖ − Eₖⱼ)` for `j < k`.
pub fn structured_seeds(n: usize, tol: &ToleranceConfig) -> Result<Vec<CMatrix>> {
    let mut seeds = Vec::with_capacity(n * n);
    for j in 0..n {
        seeds.push(crate::opcore::matrix_unit(n, j, j));
    }
    let i = num_complex::Complex64::new(0.0, 1.0);
    for j in 0..n {
        for k in j + 1..n {
            let (ejk, ekj) = (crate::opcore::matrix_unit(n, j, k), crate::opcore::matrix_unit(n, k, j));
            seeds.push(positive_part(&(&ejk + &ekj), tol)?);
            seeds.push(positive_part(&((&ejk - &ekj) * i), tol)?);
        }
    }
    Ok(seeds)
}

/// `G G*` normalized to unit norm, `G` with entries uniform in the unit
/// square of the complex plane centred at 0.
pub fn random_psd(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| {
        num_complex::Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let p = &g * g.adjoint();
    let norm = op_norm(&p);
    if norm > 0.0 {
        p.unscale(norm)
    } else {
        p
    }
}

/// Sums `Σ Sᵏⁿ(r)` for the `k`-th power superoperator after stripping the
/// part of `r` that lies in the peripheral spectral subspace. Seeds with a
/// genuine peripheral component diverge and are skipped.
fn witness_from_seed(
    sup_k: &SuperOperator,
    peripheral: &PeripheralProjection,
    seed: &CMatrix,
    tol: &ToleranceConfig,
) -> Result<Option<CMatrix>> {
    let n = sup_k.source_dim;
    if peripheral.relative_component(seed) > 1e-6 {
        return Ok(None);
    }
    let stripped = if peripheral.rank() == 0 {
        seed.clone()
    } else {
        let v = vec(seed);
        hermitian_part(&unvec(&(&v - &peripheral.projection * &v), n)?)
    };
    Ok(match neumann_unchecked(sup_k, &stripped, tol)? {
        NeumannOutcome::Converged { sum, .. } => Some(hermitian_part(&sum)),
        NeumannOutcome::Diverged { .. } => None,
    })
}

pub fn pac_bounds(phi: &KrausFamily, tol: &ToleranceConfig) -> Result<PacResult> {
    pac_bounds_seeded(phi, tol, 0)
}

/// Lower bound from witnesses `S(r) = Σ Φⁿ(r)` over a seed family, for `Φ`
/// and its powers `Φᵏ` (mapped back through `Q + Φ(Q) + ⋯ + Φ^{k−1}(Q)`).
/// Upper bound from the supports of periodic states, which are orthogonal
/// to every pure superharmonic range.
pub fn pac_bounds_seeded(phi: &KrausFamily, tol: &ToleranceConfig, seed: u64) -> Result<PacResult> {
    require_contraction(phi, tol)?;
    let n = phi.dim();
    let sup = superoperator(phi);
    let peripheral = peripheral_projection_of(&sup.matrix, tol)?;
    let periods = candidate_periods(&peripheral.eigenvalues, tol);

    let mut invariant_states = Vec::new();
    for &k in &periods {
        let state = cesaro_invariant_state(phi, k, tol)?;
        if state.support.rank() > 0 {
            invariant_states.push(state);
        }
    }
    let supports: Vec<&Projection> = invariant_states.iter().map(|s| &s.support).collect();
    let recurrent_support = Projection::join(n, &supports, tol)?;
    let p_hi = recurrent_support.complement(tol);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut candidates = Vec::new();
    let identity_report = analyze_with(phi, &sup, &CMatrix::identity(n, n), tol)?;
    candidates.push(identity_report.pure_part);

    let base = structured_seeds(n, tol)?;
    for &k in &periods {
        let sup_k = sup.power(k);
        let mut seeds = base.clone();
        seeds.extend((0..RANDOM_SEEDS_PER_PERIOD).map(|_| random_psd(n, &mut rng)));
        seeds.push(p_hi.matrix().clone());
        for seed_matrix in &seeds {
            if let Some(q) = witness_from_seed(&sup_k, &peripheral, seed_matrix, tol)? {
                let mut lifted = q.clone();
                let mut term = q;
                for _ in 1..k {
                    term = apply(phi, &term)?;
                    lifted += &term;
                }
                candidates.push(lifted);
            }
        }
    }

    let mut witnesses = Vec::new();
    let mut total = CMatrix::zeros(n, n);
    for candidate in candidates {
        let norm = op_norm(&candidate);
        if norm <= tol.conv_tol {
            continue;
        }
        let normalized = hermitian_part(&candidate.unscale(norm));
        if is_pure_with(phi, &sup, &normalized, tol)? {
            total += &normalized;
            witnesses.push(normalized);
        }
    }
    let p_lo = range_projection(&total, tol)?;
    let certified_equal = p_lo.rank() == p_hi.rank();
    Ok(PacResult {
        p_lo,
        p_hi,
        certified_equal,
        witnesses,
        recurrent_support,
        periods,
        invariant_states,
        seed,
    })
}
