//! Dense complex linear algebra shared by the rest of the crate.
//!
//! Matrices are `nalgebra` dynamic matrices of `Complex64`. Vectorization
//! follows the column-stacking convention, so that
//! `vec(A X B) = (Bᵀ ⊗ A) vec(X)`; this matches the column-major storage of
//! `DMatrix` and makes `vec`/`unvec` free.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix.
pub type CMatrix = DMatrix<Complex64>;
/// Dense complex column vector.
pub type CVector = DVector<Complex64>;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Numerical tolerances used throughout the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceConfig {
    /// Max entrywise deviation from Hermiticity.
    pub herm_tol: f64,
    /// Slack allowed below zero in positivity tests.
    pub psd_tol: f64,
    /// Relative threshold for rank and spectral decisions.
    pub eig_tol: f64,
    /// Stopping threshold for iterative limits.
    pub conv_tol: f64,
    pub max_iter: usize,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            herm_tol: 1e-10,
            psd_tol: 1e-10,
            eig_tol: 1e-8,
            conv_tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

impl ToleranceConfig {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("herm_tol", self.herm_tol),
            ("psd_tol", self.psd_tol),
            ("eig_tol", self.eig_tol),
            ("conv_tol", self.conv_tol),
        ];
        for (name, value) in named {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidTolerance(format!(
                    "{name} must be strictly positive, got {value}"
                )));
            }
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidTolerance("max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// An orthogonal projection together with an orthonormal basis of its range.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    matrix: CMatrix,
    basis: CMatrix,
}

impl Projection {
    /// Builds `B B*` from a matrix `B` with orthonormal columns.
    pub fn from_orthonormal_basis(basis: CMatrix) -> Self {
        let matrix = &basis * basis.adjoint();
        Self { matrix, basis }
    }

    pub fn zero(n: usize) -> Self {
        Self::from_orthonormal_basis(CMatrix::zeros(n, 0))
    }

    pub fn identity(n: usize) -> Self {
        Self::from_orthonormal_basis(CMatrix::identity(n, n))
    }

    /// Diagonal 0/1 projection onto the listed coordinates.
    pub fn coordinate(n: usize, indices: &[usize]) -> Self {
        let mut basis = CMatrix::zeros(n, indices.len());
        for (col, &i) in indices.iter().enumerate() {
            basis[(i, col)] = ONE;
        }
        Self::from_orthonormal_basis(basis)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Orthonormal basis of the range, one column per dimension.
    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn complement(&self, tol: &ToleranceConfig) -> Self {
        let n = self.dim();
        let q = CMatrix::identity(n, n) - &self.matrix;
        range_projection(&q, tol).expect("complement of a projection is Hermitian")
    }

    /// Smallest projection dominating every projection in `parts`.
    pub fn join(n: usize, parts: &[&Projection], tol: &ToleranceConfig) -> Result<Self> {
        let mut sum = CMatrix::zeros(n, n);
        for p in parts {
            if p.dim() != n {
                return Err(Error::Dimension(format!(
                    "cannot join a {}-dimensional projection into dimension {n}",
                    p.dim()
                )));
            }
            sum += &p.matrix;
        }
        range_projection(&sum, tol)
    }

    /// `true` when the range of `other` lies inside the range of `self`,
    /// i.e. `self · other = other` within `tol`.
    pub fn dominates(&self, other: &Projection, tol: f64) -> bool {
        max_abs(&(&self.matrix * &other.matrix - &other.matrix)) <= tol
    }

    pub fn is_orthogonal_to(&self, other: &Projection, tol: f64) -> bool {
        max_abs(&(&self.matrix * &other.matrix)) <= tol
    }

    /// Indices whose diagonal entry exceeds one half. Meaningful for
    /// projections that commute with the diagonal algebra.
    pub fn diagonal_support(&self) -> Vec<usize> {
        (0..self.dim())
            .filter(|&i| self.matrix[(i, i)].re > 0.5)
            .collect()
    }

    /// `P = P* = P²` within `tol`, and the rank agrees with the trace.
    pub fn is_valid(&self, tol: f64) -> bool {
        let p = &self.matrix;
        let herm = max_abs(&(p - p.adjoint())) <= tol;
        let idem = max_abs(&(p * p - p)) <= tol;
        let trace = p.trace().re;
        herm && idem && (trace - self.rank() as f64).abs() <= tol * self.dim().max(1) as f64
    }
}

pub fn ensure_square(m: &CMatrix, what: &str) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m.nrows())
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Thin singular value decomposition `M = U diag(s) Vᵗ`, singular values in
/// descending order; `Vᵗ` holds the conjugated right vectors as rows.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMatrix,
    pub singular_values: Vec<f64>,
    pub v_t: CMatrix,
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// One-sided (Hestenes) Jacobi on the columns of `w`, accumulating the
/// rotations in `v`. Requires `w.nrows() >= w.ncols()`.
fn jacobi_orthogonalize(w: &mut CMatrix, v: &mut CMatrix) -> Result<()> {
    let n = w.ncols();
    let threshold = 4.0 * f64::EPSILON * (w.nrows().max(1) as f64);
    // Columns at rounding level are left alone; rotating them against large
    // columns only regenerates noise.
    let floor = (f64::EPSILON * w.norm()).powi(2) * w.nrows() as f64;
    for sweep in 0..JACOBI_MAX_SWEEPS {
        let mut worst = 0.0_f64;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dotc(&w.column(q));
                let g = gamma.norm();
                if alpha <= floor || beta <= floor || g <= threshold * (alpha * beta).sqrt() {
                    continue;
                }
                worst = worst.max(g / (alpha * beta).sqrt());
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for m in [&mut *w, &mut *v] {
                    for r in 0..m.nrows() {
                        let x = m[(r, p)];
                        let y = m[(r, q)] * phase.conj();
                        m[(r, p)] = x * c - y * s;
                        m[(r, q)] = (x * s + y * c) * phase;
                    }
                }
            }
        }
        if worst == 0.0 {
            return Ok(());
        }
        if sweep + 1 == JACOBI_MAX_SWEEPS {
            return Err(Error::Convergence {
                context: "Jacobi singular value decomposition".into(),
                iterations: JACOBI_MAX_SWEEPS,
                last_change: worst,
            });
        }
    }
    Ok(())
}

/// Appends standard basis vectors, orthogonalized against `cols`, until
/// there are `k` orthonormal columns.
fn complete_orthonormal(mut cols: Vec<CVector>, dim: usize, k: usize) -> Vec<CVector> {
    for e in 0..dim {
        if cols.len() == k {
            break;
        }
        let mut x = CVector::zeros(dim);
        x[e] = ONE;
        for _ in 0..2 {
            for c in &cols {
                let proj = c.dotc(&x);
                x -= c * proj;
            }
        }
        let norm = x.norm();
        if norm > 1e-8 {
            cols.push(x.unscale(norm));
        }
    }
    cols
}

pub fn svd(m: &CMatrix) -> Result<Svd> {
    let (rows, cols) = m.shape();
    if rows < cols {
        let t = svd(&m.adjoint())?;
        return Ok(Svd {
            u: t.v_t.adjoint(),
            singular_values: t.singular_values,
            v_t: t.u.adjoint(),
        });
    }
    let mut w = m.clone();
    let mut v = CMatrix::identity(cols, cols);
    jacobi_orthogonalize(&mut w, &mut v)?;
    let norms: Vec<f64> = (0..cols).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    // Rounding-level columns carry no direction; their left vectors come
    // from the orthogonal completion.
    let noise = f64::EPSILON * m.norm() * (rows as f64).sqrt();
    let mut left: Vec<CVector> = order
        .iter()
        .filter(|&&j| norms[j] > noise && norms[j] > f64::MIN_POSITIVE)
        .map(|&j| w.column(j).unscale(norms[j]))
        .collect();
    left = complete_orthonormal(left, rows, cols);
    let u = CMatrix::from_columns(&left);
    let v_sorted = CMatrix::from_fn(cols, cols, |r, c| v[(r, order[c])]);
    Ok(Svd {
        u,
        singular_values: order.iter().map(|&j| norms[j]).collect(),
        v_t: v_sorted.adjoint(),
    })
}

pub fn singular_values(m: &CMatrix) -> Result<Vec<f64>> {
    Ok(svd(m)?.singular_values)
}

pub fn min_singular_value(m: &CMatrix) -> Result<f64> {
    Ok(singular_values(m)?.into_iter().fold(f64::INFINITY, f64::min))
}

/// Largest singular value.
pub fn op_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    match singular_values(m) {
        Ok(s) => s.into_iter().fold(0.0, f64::max),
        Err(_) => {
            let gram = m.adjoint() * m;
            hermitian_part(&gram).symmetric_eigenvalues().max().max(0.0).sqrt()
        }
    }
}

pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn matrix_unit(n: usize, row: usize, col: usize) -> CMatrix {
    let mut e = CMatrix::zeros(n, n);
    e[(row, col)] = ONE;
    e
}

pub fn real_diagonal(values: &[f64]) -> CMatrix {
    let diag = CVector::from_iterator(values.len(), values.iter().map(|&v| Complex64::new(v, 0.0)));
    CMatrix::from_diagonal(&diag)
}

/// Eigen-decomposition of a Hermitian matrix: eigenvalues in ascending order
/// and the matching orthonormal eigenvectors as columns.
pub fn hermitian_eigen(m: &CMatrix, tol: &ToleranceConfig) -> Result<(Vec<f64>, CMatrix)> {
    let n = ensure_square(m, "Hermitian eigenproblem input")?;
    let deviation = hermitian_deviation(m);
    if deviation > tol.herm_tol * m.norm().max(1.0) {
        return Err(Error::NotHermitian { deviation });
    }
    if n == 0 {
        return Ok((Vec::new(), CMatrix::zeros(0, 0)));
    }
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

pub fn min_eigenvalue(m: &CMatrix, tol: &ToleranceConfig) -> Result<f64> {
    let (values, _) = hermitian_eigen(m, tol)?;
    Ok(values.first().copied().unwrap_or(0.0))
}

/// Hermitian within `herm_tol` and no eigenvalue below `-psd_tol`.
pub fn is_psd(m: &CMatrix, tol: &ToleranceConfig) -> Result<bool> {
    ensure_square(m, "positivity test input")?;
    if hermitian_deviation(m) > tol.herm_tol * m.norm().max(1.0) {
        return Ok(false);
    }
    Ok(min_eigenvalue(m, tol)? >= -tol.psd_tol)
}

/// Applies a real function to the spectrum of a Hermitian matrix.
fn spectral_map(values: &[f64], vectors: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let mapped: Vec<f64> = values.iter().map(|&v| f(v)).collect();
    vectors * real_diagonal(&mapped) * vectors.adjoint()
}

/// The unique positive square root of a positive semidefinite matrix.
/// Eigenvalues in `[-psd_tol, 0)` are treated as zero.
pub fn sqrt_psd(m: &CMatrix, tol: &ToleranceConfig) -> Result<CMatrix> {
    let (values, vectors) = hermitian_eigen(m, tol)?;
    if let Some(&min) = values.first() {
        if min < -tol.psd_tol * m.norm().max(1.0) {
            return Err(Error::NotPsd { min_eigenvalue: min });
        }
    }
    Ok(spectral_map(&values, &vectors, |v| v.max(0.0).sqrt()))
}

/// `M^{-1/2}` for a positive definite `M`.
pub fn inv_sqrt_pd(m: &CMatrix, tol: &ToleranceConfig) -> Result<CMatrix> {
    let (values, vectors) = hermitian_eigen(m, tol)?;
    if let Some(&min) = values.first() {
        if min <= tol.eig_tol {
            return Err(Error::NotPsd { min_eigenvalue: min });
        }
    }
    Ok(spectral_map(&values, &vectors, |v| 1.0 / v.sqrt()))
}

/// Orthogonal projection onto the span of eigenvectors of a Hermitian `M`
/// whose eigenvalues exceed `eig_tol · max(‖M‖, 1)` in modulus.
pub fn range_projection(m: &CMatrix, tol: &ToleranceConfig) -> Result<Projection> {
    let (values, vectors) = hermitian_eigen(m, tol)?;
    let scale = values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let threshold = tol.eig_tol * scale.max(1.0);
    let keep: Vec<usize> = (0..values.len())
        .filter(|&i| values[i].abs() > threshold)
        .collect();
    let basis = CMatrix::from_fn(m.nrows(), keep.len(), |r, c| vectors[(r, keep[c])]);
    Ok(Projection::from_orthonormal_basis(basis))
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Column-stacking vectorization.
pub fn vec(x: &CMatrix) -> CVector {
    CVector::from_column_slice(x.as_slice())
}

pub fn unvec(v: &CVector, n: usize) -> Result<CMatrix> {
    if v.len() != n * n {
        return Err(Error::Dimension(format!(
            "cannot reshape a vector of length {} into {n}x{n}",
            v.len()
        )));
    }
    Ok(CMatrix::from_column_slice(n, n, v.as_slice()))
}

const QR_STEPS_PER_EIGENVALUE: usize = 120;

/// Eigenvalues of the 2×2 matrix `[[a, b], [c, d]]`, the one nearer `d`
/// first.
fn eig2(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> (Complex64, Complex64) {
    let half = (a - d) * 0.5;
    let root = (half * half + b * c).sqrt();
    let (l1, l2) = ((a + d) * 0.5 + root, (a + d) * 0.5 - root);
    if (l1 - d).norm() <= (l2 - d).norm() {
        (l1, l2)
    } else {
        (l2, l1)
    }
}

/// One explicitly shifted QR step `H − μ = QR`, `H ← RQ + μ` on the
/// Hessenberg block `lo..=hi`, using Givens rotations.
fn qr_step(h: &mut CMatrix, lo: usize, hi: usize, mu: Complex64) {
    for k in lo..=hi {
        h[(k, k)] -= mu;
    }
    let mut rotations = Vec::with_capacity(hi - lo);
    for k in lo..hi {
        let (x, y) = (h[(k, k)], h[(k + 1, k)]);
        let r = (x.norm_sqr() + y.norm_sqr()).sqrt();
        let (c, s) = if r == 0.0 { (ONE, ZERO) } else { (x / r, y / r) };
        for j in k..=hi {
            let (a, b) = (h[(k, j)], h[(k + 1, j)]);
            h[(k, j)] = c.conj() * a + s.conj() * b;
            h[(k + 1, j)] = c * b - s * a;
        }
        rotations.push((c, s));
    }
    for (offset, &(c, s)) in rotations.iter().enumerate() {
        let k = lo + offset;
        for i in lo..=(k + 1).min(hi) {
            let (a, b) = (h[(i, k)], h[(i, k + 1)]);
            h[(i, k)] = a * c + b * s;
            h[(i, k + 1)] = b * c.conj() - a * s.conj();
        }
    }
    for k in lo..=hi {
        h[(k, k)] += mu;
    }
}

/// Eigenvalues of a general complex square matrix: Householder reduction
/// to Hessenberg form, then Wilkinson-shifted QR with deflation.
pub fn eigenvalues(m: &CMatrix) -> Result<Vec<Complex64>> {
    let n = ensure_square(m, "eigenvalue input")?;
    if n == 0 {
        return Ok(Vec::new());
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Precondition("eigenvalue input has non-finite entries".into()));
    }
    let mut h = m.clone().hessenberg().h();
    let scale = h.norm().max(f64::MIN_POSITIVE);
    let mut values = vec![ZERO; n];
    let mut hi = n - 1;
    let mut steps = 0;
    loop {
        if hi == 0 {
            values[0] = h[(0, 0)];
            break;
        }
        // Deflate at the lowest negligible subdiagonal entry.
        let mut lo = hi;
        while lo > 0 {
            let size = h[(lo - 1, lo - 1)].norm() + h[(lo, lo)].norm();
            let size = if size == 0.0 { scale } else { size };
            if h[(lo, lo - 1)].norm() <= f64::EPSILON * size {
                h[(lo, lo - 1)] = ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            values[hi] = h[(hi, hi)];
            hi -= 1;
            steps = 0;
            continue;
        }
        if lo + 1 == hi {
            let (l1, l2) = eig2(h[(lo, lo)], h[(lo, hi)], h[(hi, lo)], h[(hi, hi)]);
            values[hi] = l1;
            values[lo] = l2;
            if lo == 0 {
                break;
            }
            hi = lo - 1;
            steps = 0;
            continue;
        }
        steps += 1;
        if steps > QR_STEPS_PER_EIGENVALUE {
            return Err(Error::Convergence {
                context: "shifted QR eigenvalue iteration".into(),
                iterations: steps,
                last_change: h[(hi, hi - 1)].norm(),
            });
        }
        let mu = if steps % 11 == 0 {
            // Exceptional shift to break cycles.
            h[(hi, hi)] + Complex64::new(0.75, 0.5) * h[(hi, hi - 1)].norm()
        } else {
            eig2(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)]).0
        };
        qr_step(&mut h, lo, hi, mu);
    }
    Ok(values)
}

pub fn spectral_radius(m: &CMatrix) -> Result<f64> {
    Ok(eigenvalues(m)?.iter().fold(0.0_f64, |acc, z| acc.max(z.norm())))
}
