//! Completely positive maps given by Kraus families.
//!
//! A family `(A₁, …, A_d)` of `n × n` matrices acts on `Mₙ` by
//! `Φ(X) = Σ Aᵢ X Aᵢ*`. The same family read as a row `T̃ = [A₁ ⋯ A_d]`
//! is the row contraction behind `Φ` whenever `‖Σ AᵢAᵢ*‖ ≤ 1`.
//!
//! Limits of powers are taken by iterating the `n² × n²` superoperator
//! matrix. Spectral questions (peripheral spectrum, ergodic projections)
//! go through the same matrix.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::opcore::{
    eigenvalues, ensure_square, hermitian_part, is_psd, min_singular_value, op_norm, range_projection, svd, unvec, vec, CMatrix,
    CVector, Projection, ToleranceConfig,
};

/// Largest period considered when snapping peripheral eigenvalues to roots
/// of unity.
pub const MAX_PERIOD: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct KrausFamily {
    dim: usize,
    kraus: Vec<CMatrix>,
    contraction_flag: Option<bool>,
}

impl KrausFamily {
    pub fn new(kraus: Vec<CMatrix>) -> Result<Self> {
        let first = kraus
            .first()
            .ok_or_else(|| Error::Dimension("a Kraus family needs at least one operator".into()))?;
        let dim = ensure_square(first, "Kraus operator")?;
        if dim == 0 {
            return Err(Error::Dimension("Kraus operators must be at least 1x1".into()));
        }
        for (i, a) in kraus.iter().enumerate() {
            if a.shape() != (dim, dim) {
                return Err(Error::Dimension(format!(
                    "Kraus operator {i} is {}x{}, expected {dim}x{dim}",
                    a.nrows(),
                    a.ncols()
                )));
            }
        }
        Ok(Self {
            dim,
            kraus,
            contraction_flag: None,
        })
    }

    /// Like [`KrausFamily::new`] but also requires the row-contraction
    /// condition and records it.
    pub fn new_contractive(kraus: Vec<CMatrix>, tol: &ToleranceConfig) -> Result<Self> {
        let mut family = Self::new(kraus)?;
        let check = is_row_contraction(&family, tol);
        if !check.is_contraction {
            return Err(Error::Precondition(format!(
                "not a row contraction: ‖Σ AᵢAᵢ*‖ = {}",
                check.norm
            )));
        }
        family.contraction_flag = Some(true);
        Ok(family)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of Kraus operators (`d`).
    pub fn len(&self) -> usize {
        self.kraus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kraus.is_empty()
    }

    pub fn operators(&self) -> &[CMatrix] {
        &self.kraus
    }

    pub fn contraction_flag(&self) -> Option<bool> {
        self.contraction_flag
    }

    /// The row operator `T̃ = [A₁ ⋯ A_d]`, of shape `n × dn`, acting on
    /// `ℂᵈ ⊗ ℂⁿ` with the letter index most significant.
    pub fn row_operator(&self) -> CMatrix {
        let n = self.dim;
        let mut row = CMatrix::zeros(n, n * self.len());
        for (i, a) in self.kraus.iter().enumerate() {
            row.view_mut((0, i * n), (n, n)).copy_from(a);
        }
        row
    }

    /// Kraus family of `Φᵏ`: products `A_{w₁}⋯A_{w_k}` over words in
    /// lexicographic order. `k = 0` gives `{I}`.
    pub fn power(&self, k: usize) -> KrausFamily {
        let mut ops = vec![CMatrix::identity(self.dim, self.dim)];
        for _ in 0..k {
            ops = ops
                .iter()
                .flat_map(|w| self.kraus.iter().map(move |a| w * a))
                .collect();
        }
        KrausFamily {
            dim: self.dim,
            kraus: ops,
            contraction_flag: self.contraction_flag,
        }
    }

    /// `{W Aᵢ W⁻¹}` for an already inverted pair.
    pub(crate) fn conjugated_by(&self, w: &CMatrix, w_inv: &CMatrix) -> KrausFamily {
        KrausFamily {
            dim: self.dim,
            kraus: self.kraus.iter().map(|a| w * a * w_inv).collect(),
            contraction_flag: None,
        }
    }
}

fn check_dim(phi: &KrausFamily, x: &CMatrix, what: &str) -> Result<()> {
    ensure_square(x, what)?;
    if x.nrows() != phi.dim {
        return Err(Error::Dimension(format!(
            "{what} is {}x{}, map acts on dimension {}",
            x.nrows(),
            x.ncols(),
            phi.dim
        )));
    }
    Ok(())
}

/// `Φ(X) = Σ Aᵢ X Aᵢ*`.
pub fn apply(phi: &KrausFamily, x: &CMatrix) -> Result<CMatrix> {
    check_dim(phi, x, "argument")?;
    let mut out = CMatrix::zeros(phi.dim, phi.dim);
    for a in &phi.kraus {
        out += a * x * a.adjoint();
    }
    Ok(out)
}

/// `Φᵏ(X)` by repeated application.
pub fn apply_power(phi: &KrausFamily, x: &CMatrix, k: usize) -> Result<CMatrix> {
    check_dim(phi, x, "argument")?;
    let mut out = x.clone();
    for _ in 0..k {
        out = apply(phi, &out)?;
    }
    Ok(out)
}

/// The trace dual `Φ†(ρ) = Σ Aᵢ* ρ Aᵢ`.
pub fn adjoint_apply(phi: &KrausFamily, rho: &CMatrix) -> Result<CMatrix> {
    check_dim(phi, rho, "density")?;
    let mut out = CMatrix::zeros(phi.dim, phi.dim);
    for a in &phi.kraus {
        out += a.adjoint() * rho * a;
    }
    Ok(out)
}

/// Matrix of `Φ` on column-stacked `n × n` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperOperator {
    pub matrix: CMatrix,
    pub source_dim: usize,
}

impl SuperOperator {
    pub fn apply(&self, x: &CMatrix) -> Result<CMatrix> {
        unvec(&(&self.matrix * vec(x)), self.source_dim)
    }

    /// Matrix of the trace dual `Φ†`.
    pub fn adjoint(&self) -> SuperOperator {
        SuperOperator {
            matrix: self.matrix.adjoint(),
            source_dim: self.source_dim,
        }
    }

    pub fn power(&self, k: usize) -> SuperOperator {
        let m = self.matrix.nrows();
        let mut out = CMatrix::identity(m, m);
        for _ in 0..k {
            out = &self.matrix * out;
        }
        SuperOperator {
            matrix: out,
            source_dim: self.source_dim,
        }
    }
}

/// `Σ conj(Aᵢ) ⊗ Aᵢ`.
pub fn superoperator(phi: &KrausFamily) -> SuperOperator {
    let n2 = phi.dim * phi.dim;
    let mut matrix = CMatrix::zeros(n2, n2);
    for a in &phi.kraus {
        matrix += a.map(|z| z.conj()).kronecker(a);
    }
    SuperOperator {
        matrix,
        source_dim: phi.dim,
    }
}

/// Spectral radius of the superoperator matrix.
pub fn cp_spectral_radius(phi: &KrausFamily) -> Result<f64> {
    crate::opcore::spectral_radius(&superoperator(phi).matrix)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowContractionCheck {
    pub is_contraction: bool,
    /// `‖Σ AᵢAᵢ*‖ = ‖T̃‖²`.
    pub norm: f64,
}

pub fn is_row_contraction(phi: &KrausFamily, tol: &ToleranceConfig) -> RowContractionCheck {
    let identity = CMatrix::identity(phi.dim, phi.dim);
    let gram = apply(phi, &identity).expect("identity has the family's dimension");
    let norm = op_norm(&gram);
    RowContractionCheck {
        is_contraction: norm <= 1.0 + tol.psd_tol,
        norm,
    }
}

pub(crate) fn require_contraction(phi: &KrausFamily, tol: &ToleranceConfig) -> Result<()> {
    if phi.contraction_flag == Some(true) {
        return Ok(());
    }
    let check = is_row_contraction(phi, tol);
    if check.is_contraction {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "not a row contraction: ‖Σ AᵢAᵢ*‖ = {}",
            check.norm
        )))
    }
}

/// Result of summing `Σₙ Φⁿ(r)`.
#[derive(Debug, Clone, PartialEq)]
pub enum NeumannOutcome {
    Converged {
        sum: CMatrix,
        /// Number of terms added.
        terms: usize,
        tail_norm: f64,
    },
    Diverged {
        terms: usize,
        tail_norm: f64,
        partial_sum_norm: f64,
    },
}

impl NeumannOutcome {
    pub fn sum(&self) -> Option<&CMatrix> {
        match self {
            NeumannOutcome::Converged { sum, .. } => Some(sum),
            NeumannOutcome::Diverged { .. } => None,
        }
    }

    pub fn into_sum(self) -> Option<CMatrix> {
        match self {
            NeumannOutcome::Converged { sum, .. } => Some(sum),
            NeumannOutcome::Diverged { .. } => None,
        }
    }
}

/// Partial sums of `Σ Φⁿ(r)` until the newest term falls below `conv_tol`.
///
/// The series is declared divergent once the partial sums exceed
/// `1 / conv_tol` in norm or `max_iter` terms have been added without the
/// tail vanishing.
pub fn neumann_series(phi: &KrausFamily, r: &CMatrix, tol: &ToleranceConfig) -> Result<NeumannOutcome> {
    neumann_series_with(&superoperator(phi), r, tol)
}

pub(crate) fn neumann_series_with(
    sup: &SuperOperator,
    r: &CMatrix,
    tol: &ToleranceConfig,
) -> Result<NeumannOutcome> {
    let n = sup.source_dim;
    ensure_square(r, "seed")?;
    if r.nrows() != n {
        return Err(Error::Dimension(format!("seed must be {n}x{n}")));
    }
    if !is_psd(r, tol)? {
        let min = crate::opcore::min_eigenvalue(&hermitian_part(r), tol)?;
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    neumann_unchecked(sup, r, tol)
}

/// Series summation without the positivity check on the seed.
pub(crate) fn neumann_unchecked(sup: &SuperOperator, r: &CMatrix, tol: &ToleranceConfig) -> Result<NeumannOutcome> {
    let n = sup.source_dim;
    let mut term = vec(r);
    let mut sum = term.clone();
    let mut tail = term.norm();
    let mut terms = 1;
    let blowup = 1.0 / tol.conv_tol;
    while tail > tol.conv_tol {
        let partial = sum.norm();
        if terms >= tol.max_iter || !partial.is_finite() || partial > blowup {
            return Ok(NeumannOutcome::Diverged {
                terms,
                tail_norm: tail,
                partial_sum_norm: partial,
            });
        }
        term = &sup.matrix * term;
        sum += &term;
        tail = term.norm();
        terms += 1;
    }
    Ok(NeumannOutcome::Converged {
        sum: unvec(&sum, n)?,
        terms,
        tail_norm: tail,
    })
}

/// A limit of `Φⁿ(Q)` obtained by iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateLimit {
    pub limit: CMatrix,
    pub iterations: usize,
    /// `true` when the iterates themselves fell below `conv_tol`.
    pub vanished: bool,
}

/// Iterates `v ↦ M v` from `vec(Q)` until either the iterate vanishes or the
/// steps have shrunk so that the geometric tail estimate is below
/// `conv_tol`.
pub(crate) fn iterate_limit(sup: &SuperOperator, q: &CMatrix, tol: &ToleranceConfig) -> Result<IterateLimit> {
    let n = sup.source_dim;
    let mut current = vec(q);
    if current.norm() <= tol.conv_tol {
        return Ok(IterateLimit {
            limit: CMatrix::zeros(n, n),
            iterations: 0,
            vanished: true,
        });
    }
    let mut prev_step = f64::INFINITY;
    for it in 1..=tol.max_iter {
        let next: CVector = &sup.matrix * &current;
        let step = (&next - &current).norm();
        current = next;
        if current.norm() <= tol.conv_tol {
            return Ok(IterateLimit {
                limit: CMatrix::zeros(n, n),
                iterations: it,
                vanished: true,
            });
        }
        // Near-zero limits keep iterating: a pure tail will vanish shortly.
        let settled = if step == 0.0 {
            true
        } else {
            let ratio = step / prev_step;
            ratio < 1.0
                && step * ratio / (1.0 - ratio) <= tol.conv_tol
                && step <= tol.conv_tol
                && current.norm() > 10.0 * tol.conv_tol
        };
        if settled {
            return Ok(IterateLimit {
                limit: unvec(&current, n)?,
                iterations: it,
                vanished: false,
            });
        }
        prev_step = step;
    }
    Err(Error::Convergence {
        context: "limit of Φⁿ".into(),
        iterations: tol.max_iter,
        last_change: prev_step,
    })
}

/// `L = lim Φⁿ(I)` for a row contraction. The sequence decreases, so the
/// limit exists and is Φ-fixed with `0 ≤ L ≤ I`.
pub fn limit_phi_n_identity(phi: &KrausFamily, tol: &ToleranceConfig) -> Result<CMatrix> {
    require_contraction(phi, tol)?;
    let identity = CMatrix::identity(phi.dim, phi.dim);
    let out = iterate_limit(&superoperator(phi), &identity, tol)?;
    Ok(hermitian_part(&out.limit))
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantStateResult {
    /// Fixed point of `(Φ†)ᵏ` reached from `I/n`; zero when all mass leaks.
    pub density: CMatrix,
    pub period: usize,
    pub support: Projection,
}

/// Projection onto `ker(C − I)` along `ran(C − I)`. For a power-bounded `C`
/// this is the limit of the Cesàro means `(1/N) Σ_{m<N} Cᵐ`.
pub fn ergodic_projection(c: &CMatrix, tol: &ToleranceConfig) -> Result<CMatrix> {
    let m = ensure_square(c, "ergodic projection input")?;
    let shifted = c - CMatrix::identity(m, m);
    let svd = svd(&shifted)?;
    let (u, v_t) = (&svd.u, &svd.v_t);
    let threshold = tol.eig_tol * svd.singular_values.iter().fold(1.0_f64, |a, &b| a.max(b));
    let kernel: Vec<usize> = (0..m).filter(|&i| svd.singular_values[i] <= threshold).collect();
    if kernel.is_empty() {
        return Ok(CMatrix::zeros(m, m));
    }
    // Right kernel of C − I from V, left kernel from U.
    let right = CMatrix::from_fn(m, kernel.len(), |r, k| v_t[(kernel[k], r)].conj());
    let left = CMatrix::from_fn(m, kernel.len(), |r, k| u[(r, kernel[k])]);
    let pairing = left.adjoint() * &right;
    let min_sv = min_singular_value(&pairing)?;
    if min_sv <= tol.eig_tol.sqrt() {
        return Err(Error::Structure(format!(
            "eigenvalue 1 is not semisimple (pairing singular value {min_sv:e})"
        )));
    }
    let inv = pairing.try_inverse().ok_or(Error::Singular {
        min_singular_value: min_sv,
    })?;
    Ok(right * inv * left.adjoint())
}

/// Cesàro limit of `(Φ†)^{km}(I/n)`: the largest-support state fixed by
/// `(Φ†)ᵏ`, computed as the mean-ergodic projection of `(Φ†)ᵏ` applied to
/// the maximally mixed state.
pub fn cesaro_invariant_state(phi: &KrausFamily, k: usize, tol: &ToleranceConfig) -> Result<InvariantStateResult> {
    if k == 0 {
        return Err(Error::Precondition("period must be positive".into()));
    }
    require_contraction(phi, tol)?;
    let n = phi.dim;
    let dual = superoperator(phi).adjoint().power(k);
    let ergodic = ergodic_projection(&dual.matrix, tol)?;
    let mixed = CMatrix::identity(n, n).unscale(n as f64);
    let density = hermitian_part(&unvec(&(&ergodic * vec(&mixed)), n)?);
    let moved = dual.apply(&density)?;
    let defect = crate::opcore::max_abs(&(moved - &density));
    if defect > tol.conv_tol.max(tol.eig_tol * density.norm()) {
        return Err(Error::Convergence {
            context: format!("Cesàro mean of (Φ†)^{k}"),
            iterations: 0,
            last_change: defect,
        });
    }
    let support = range_projection(&density, tol)?;
    Ok(InvariantStateResult {
        density,
        period: k,
        support,
    })
}

/// Spectral projection of the superoperator onto its peripheral eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct PeripheralProjection {
    /// `n² × n²` idempotent commuting with the superoperator.
    pub projection: CMatrix,
    /// Eigenvalues with `|λ| ≥ 1 − eig_tol`, with multiplicity.
    pub eigenvalues: Vec<Complex64>,
    /// Largest modulus among the remaining eigenvalues.
    pub inner_radius: f64,
}

impl PeripheralProjection {
    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Norm of the peripheral component of `vec(x)` relative to `‖x‖`.
    pub fn relative_component(&self, x: &CMatrix) -> f64 {
        let v = vec(x);
        let norm = v.norm();
        if norm == 0.0 {
            return 0.0;
        }
        (&self.projection * v).norm() / norm
    }
}

pub fn peripheral_projection(phi: &KrausFamily, tol: &ToleranceConfig) -> Result<PeripheralProjection> {
    require_contraction(phi, tol)?;
    peripheral_projection_of(&superoperator(phi).matrix, tol)
}

/// Peripheral spectral projection of a power-bounded matrix.
///
/// With `r` peripheral eigenvalues and the rest inside radius `ρ`, a high
/// power `Mᴺ` (with `ρᴺ` negligible) has rank `r` up to noise; its top `r`
/// left and right singular vectors span the peripheral invariant subspace
/// and its left counterpart, which fixes the projection
/// `U (Vʳ* U)⁻¹ Vʳ*`.
pub fn peripheral_projection_of(m: &CMatrix, tol: &ToleranceConfig) -> Result<PeripheralProjection> {
    let size = ensure_square(m, "superoperator")?;
    let spectrum = eigenvalues(m)?;
    let cutoff = 1.0 - tol.eig_tol;
    let mut peripheral: Vec<Complex64> = spectrum.iter().copied().filter(|z| z.norm() >= cutoff).collect();
    peripheral.sort_by(|a, b| a.arg().total_cmp(&b.arg()));
    let inner_radius = spectrum
        .iter()
        .map(|z| z.norm())
        .filter(|&r| r < cutoff)
        .fold(0.0_f64, f64::max);
    let r = peripheral.len();
    if r == 0 {
        return Ok(PeripheralProjection {
            projection: CMatrix::zeros(size, size),
            eigenvalues: peripheral,
            inner_radius,
        });
    }
    if peripheral.iter().any(|z| z.norm() > 1.0 + tol.eig_tol) {
        return Err(Error::Structure("eigenvalue outside the closed unit disc".into()));
    }
    if r == size {
        return Ok(PeripheralProjection {
            projection: CMatrix::identity(size, size),
            eigenvalues: peripheral,
            inner_radius,
        });
    }

    // Smallest power of two N with ρᴺ below 1e-14, and at least 4·size so
    // nilpotent parts vanish too.
    let mut needed = 4.0 * size as f64;
    if inner_radius > 0.0 {
        needed = needed.max(2.0 * (1e-14_f64).ln() / inner_radius.ln());
    }
    let squarings = needed.log2().ceil().clamp(1.0, 62.0) as usize;
    let mut power = m.clone();
    for _ in 0..squarings {
        power = &power * &power;
    }
    let next = &power * &power;
    let (n_now, n_next) = (op_norm(&power), op_norm(&next));
    if n_next > 1.5 * n_now + 1e-9 || !n_next.is_finite() {
        return Err(Error::Structure(format!(
            "powers grow ({n_now:e} -> {n_next:e}): defective peripheral eigenvalue"
        )));
    }

    let svd = svd(&power)?;
    let mut order: Vec<usize> = (0..size).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let (u, v_t) = (&svd.u, &svd.v_t);
    let range = CMatrix::from_fn(size, r, |row, k| u[(row, order[k])]);
    let corange = CMatrix::from_fn(size, r, |row, k| v_t[(order[k], row)].conj());
    let pairing = corange.adjoint() * &range;
    let min_sv = min_singular_value(&pairing)?;
    if min_sv <= tol.eig_tol.sqrt() {
        return Err(Error::Structure(format!(
            "peripheral eigenvalues are defective (pairing singular value {min_sv:e})"
        )));
    }
    let inv = pairing.try_inverse().ok_or(Error::Singular {
        min_singular_value: min_sv,
    })?;
    Ok(PeripheralProjection {
        projection: range * inv * corange.adjoint(),
        eigenvalues: peripheral,
        inner_radius,
    })
}

/// Orders `q ≤ MAX_PERIOD` of the peripheral eigenvalues that are roots of
/// unity (within `eig_tol`), closed under divisors; always contains 1.
pub fn candidate_periods(peripheral: &[Complex64], tol: &ToleranceConfig) -> Vec<usize> {
    let mut periods = vec![1];
    for z in peripheral {
        let turns = z.arg() / std::f64::consts::TAU;
        let order = (1..=MAX_PERIOD).find(|&q| {
            let x = turns * q as f64;
            (x - x.round()).abs() <= tol.eig_tol.max(1e-10) * q as f64
        });
        if let Some(q) = order {
            periods.extend((1..=q).filter(|d| q % d == 0));
        }
    }
    periods.sort_unstable();
    periods.dedup();
    periods
}

/// Real matrix helper used by the Markov module and tests.
pub(crate) fn complexify(a: &DMatrix<f64>) -> CMatrix {
    a.map(|v| Complex64::new(v, 0.0))
}
