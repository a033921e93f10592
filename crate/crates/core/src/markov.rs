//! Sub-Markov matrices and their canonical block form.
//!
//! A nonnegative `A` with row sums at most one acts on diagonal matrices by
//! `Φ(d)ⱼ = Σᵢ aⱼᵢ dᵢ`. The Kraus family `{√aⱼᵢ Eⱼᵢ}` extends this action
//! to all of `Mₙ`, and the absolutely continuous projection of that map is
//! the indicator of the transient states.

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use crate::cpmap::{complexify, KrausFamily};
use crate::error::{Error, Result};
use crate::opcore::{spectral_radius, CMatrix, Projection, ToleranceConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct SubMarkovMatrix {
    a: DMatrix<f64>,
}

impl SubMarkovMatrix {
    /// Entries of modulus at most `psd_tol` are set to zero; anything more
    /// negative, or a row sum above `1 + psd_tol`, is rejected.
    pub fn new(a: DMatrix<f64>, tol: &ToleranceConfig) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(Error::Dimension(format!(
                "sub-Markov matrix must be square and non-empty, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if let Some(bad) = a.iter().find(|v| !v.is_finite()) {
            return Err(Error::Precondition(format!("non-finite entry {bad}")));
        }
        let mut a = a;
        for v in a.iter_mut() {
            if v.abs() <= tol.psd_tol {
                *v = 0.0;
            } else if *v < 0.0 {
                return Err(Error::Precondition(format!("negative entry {v}")));
            }
        }
        for (j, row) in a.row_iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if sum > 1.0 + tol.psd_tol {
                return Err(Error::Precondition(format!("row {j} sums to {sum} > 1")));
            }
        }
        Ok(Self { a })
    }

    pub fn from_rows(rows: &[Vec<f64>], tol: &ToleranceConfig) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("rows of a sub-Markov matrix must all have length n".into()));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]), tol)
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// Edges `(j, i)` with `aⱼᵢ > 0`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.dim();
        (0..n)
            .flat_map(|j| (0..n).map(move |i| (j, i)))
            .filter(|&(j, i)| self.a[(j, i)] > 0.0)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentBlock {
    pub indices: Vec<usize>,
    pub block: DMatrix<f64>,
    /// Perron left eigenvector of `block`, normalized to sum one.
    pub left_eigvec: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransientBlock {
    pub indices: Vec<usize>,
    pub block: DMatrix<f64>,
    pub spectral_radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalForm {
    /// `permutation[p]` is the original index placed at position `p`.
    pub permutation: Vec<usize>,
    pub recurrent_blocks: Vec<RecurrentBlock>,
    pub transient_block: TransientBlock,
}

impl CanonicalForm {
    /// `SAS⁻¹`: rows and columns reordered by the permutation.
    pub fn permuted(&self, a: &SubMarkovMatrix) -> DMatrix<f64> {
        let p = &self.permutation;
        DMatrix::from_fn(p.len(), p.len(), |r, c| a.matrix()[(p[r], p[c])])
    }

    /// Undoes [`CanonicalForm::permuted`].
    pub fn unpermute(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.permutation.len();
        let mut out = DMatrix::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                out[(self.permutation[r], self.permutation[c])] = b[(r, c)];
            }
        }
        out
    }

    /// Start offsets of the blocks in permuted order, ending with `n`.
    pub fn block_offsets(&self) -> Vec<usize> {
        let mut offsets = vec![0];
        for b in &self.recurrent_blocks {
            offsets.push(offsets.last().unwrap() + b.indices.len());
        }
        offsets.push(self.permutation.len());
        offsets
    }
}

fn submatrix(a: &DMatrix<f64>, indices: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(indices.len(), indices.len(), |r, c| a[(indices[r], indices[c])])
}

/// Strongly connected components of the support graph, each sorted, in
/// order of their smallest index.
fn components(a: &SubMarkovMatrix) -> Vec<Vec<usize>> {
    let n = a.dim();
    let mut graph = DiGraph::<(), ()>::with_capacity(n, n * n);
    let nodes: Vec<NodeIndex> = (0..n).map(|_| graph.add_node(())).collect();
    for (j, i) in a.edges() {
        graph.add_edge(nodes[j], nodes[i], ());
    }
    let mut comps: Vec<Vec<usize>> = tarjan_scc(&graph)
        .into_iter()
        .map(|c| {
            let mut idx: Vec<usize> = c.into_iter().map(|v| v.index()).collect();
            idx.sort_unstable();
            idx
        })
        .collect();
    comps.sort_by_key(|c| c[0]);
    comps
}

/// Left Perron vector of an irreducible stochastic block by inverse
/// iteration on the transpose, shifted just above one.
fn perron_left_vector(block: &DMatrix<f64>, tol: &ToleranceConfig) -> Result<DVector<f64>> {
    let k = block.nrows();
    let shift = 1.0 + 1e-10;
    let shifted = block.transpose() - DMatrix::identity(k, k) * shift;
    let lu = shifted.lu();
    let mut z = DVector::from_element(k, 1.0 / k as f64);
    for it in 0..tol.max_iter.min(100) {
        let next = lu.solve(&z).ok_or(Error::Singular { min_singular_value: 0.0 })?;
        let sum: f64 = next.sum();
        if sum == 0.0 || !sum.is_finite() {
            return Err(Error::Convergence {
                context: "Perron inverse iteration".into(),
                iterations: it,
                last_change: f64::NAN,
            });
        }
        z = next / sum;
        let residual = (z.transpose() * block - z.transpose()).norm();
        if residual <= tol.conv_tol {
            return Ok(z);
        }
    }
    Err(Error::Convergence {
        context: "Perron inverse iteration".into(),
        iterations: tol.max_iter.min(100),
        last_change: (z.transpose() * block - z.transpose()).norm(),
    })
}

/// Recurrent classes are closed strongly connected components whose rows
/// sum to one inside the component; everything else is transient.
pub fn canonical_form(a: &SubMarkovMatrix, tol: &ToleranceConfig) -> Result<CanonicalForm> {
    let m = a.matrix();
    let mut recurrent_blocks = Vec::new();
    let mut transient = Vec::new();
    for comp in components(a) {
        let block = submatrix(m, &comp);
        let stochastic = block.row_iter().all(|row| (row.sum() - 1.0).abs() <= tol.psd_tol);
        let rho = if stochastic { spectral_radius(&complexify(&block))? } else { 0.0 };
        if stochastic && rho >= 1.0 - tol.eig_tol {
            let left_eigvec = perron_left_vector(&block, tol)?;
            if let Some(min) = left_eigvec.iter().copied().reduce(f64::min) {
                if min <= tol.psd_tol {
                    return Err(Error::Structure(format!(
                        "Perron vector of class {comp:?} has a zero entry ({min:e})"
                    )));
                }
            }
            recurrent_blocks.push(RecurrentBlock {
                indices: comp,
                block,
                left_eigvec,
            });
        } else {
            transient.extend(comp);
        }
    }
    transient.sort_unstable();
    let block = submatrix(m, &transient);
    let rho = if transient.is_empty() { 0.0 } else { spectral_radius(&complexify(&block))? };
    if rho >= 1.0 - tol.eig_tol {
        return Err(Error::Structure(format!(
            "transient block has spectral radius {rho}, expected < 1"
        )));
    }
    let permutation = recurrent_blocks
        .iter()
        .flat_map(|b| b.indices.iter().copied())
        .chain(transient.iter().copied())
        .collect();
    Ok(CanonicalForm {
        permutation,
        recurrent_blocks,
        transient_block: TransientBlock {
            indices: transient,
            block,
            spectral_radius: rho,
        },
    })
}

/// Diagonal projection onto the transient states.
pub fn pac_markov(a: &SubMarkovMatrix, tol: &ToleranceConfig) -> Result<Projection> {
    let form = canonical_form(a, tol)?;
    Ok(Projection::coordinate(a.dim(), &form.transient_block.indices))
}

/// One Kraus operator `√aⱼᵢ Eⱼᵢ` per edge, edges in lexicographic order.
/// The zero matrix yields the single operator `0`.
pub fn markov_to_kraus(a: &SubMarkovMatrix) -> KrausFamily {
    let n = a.dim();
    let mut ops: Vec<CMatrix> = a
        .edges()
        .into_iter()
        .map(|(j, i)| crate::opcore::matrix_unit(n, j, i).scale(a.matrix()[(j, i)].sqrt()))
        .collect();
    if ops.is_empty() {
        ops.push(CMatrix::zeros(n, n));
    }
    KrausFamily::new(ops).expect("matrix units share the dimension of A")
}

/// Perron vectors of the recurrent classes, zero-padded to length `n`.
pub fn invariant_vectors(a: &SubMarkovMatrix, tol: &ToleranceConfig) -> Result<Vec<DVector<f64>>> {
    let form = canonical_form(a, tol)?;
    let n = a.dim();
    let mut out = Vec::with_capacity(form.recurrent_blocks.len());
    for block in &form.recurrent_blocks {
        let mut z = DVector::zeros(n);
        for (k, &i) in block.indices.iter().enumerate() {
            z[i] = block.left_eigvec[k];
        }
        let residual = (z.transpose() * a.matrix() - z.transpose()).norm();
        if residual > tol.conv_tol {
            return Err(Error::Convergence {
                context: "invariant vector check".into(),
                iterations: 0,
                last_change: residual,
            });
        }
        out.push(z);
    }
    Ok(out)
}
