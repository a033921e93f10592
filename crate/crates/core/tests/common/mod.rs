#![allow(dead_code)]

use cph_core::markov::SubMarkovMatrix;
use cph_core::opcore::{inv_sqrt_pd, op_norm, CMatrix, ToleranceConfig};
use cph_core::KrausFamily;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn tol() -> ToleranceConfig {
    ToleranceConfig::default()
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

/// Splits an `n × dn` row into its `d` square blocks.
pub fn family_from_row(row: &CMatrix, d: usize) -> KrausFamily {
    let n = row.nrows();
    KrausFamily::new((0..d).map(|i| row.columns(i * n, n).into_owned()).collect()).unwrap()
}

/// Random family rescaled so that `‖Σ AᵢAᵢ*‖ = s`.
pub fn random_contraction(rng: &mut ChaCha8Rng, n: usize, d: usize, s: f64) -> KrausFamily {
    let row = random_matrix(rng, n, n * d);
    let norm = op_norm(&(&row * row.adjoint()));
    family_from_row(&row.scale((s / norm).sqrt()), d)
}

/// `(GG*)^{-1/2} G`: orthonormal rows.
pub fn orthonormalize_rows(g: &CMatrix) -> CMatrix {
    inv_sqrt_pd(&(g * g.adjoint()), &tol()).unwrap() * g
}

pub fn random_coisometry(rng: &mut ChaCha8Rng, n: usize, d: usize) -> KrausFamily {
    family_from_row(&orthonormalize_rows(&random_matrix(rng, n, n * d)), d)
}

/// Row coisometry with `Tᵢ = [[Bᵢ, 0], [Cᵢ, Dᵢ]]` on `ℂᵏ ⊕ ℂⁿ⁻ᵏ`: the first
/// `k` coordinates carry the states, the rest leak into them.
pub fn structured_coisometry(rng: &mut ChaCha8Rng, n: usize, k: usize, d: usize) -> KrausFamily {
    let b = orthonormalize_rows(&random_matrix(rng, k, k * d));
    let mut top = CMatrix::zeros(k, n * d);
    for i in 0..d {
        top.view_mut((0, i * n), (k, k)).copy_from(&b.columns(i * k, k));
    }
    let g = random_matrix(rng, n - k, n * d);
    let g = &g - &g * top.adjoint() * &top;
    let bottom = orthonormalize_rows(&g);
    let mut row = CMatrix::zeros(n, n * d);
    row.rows_mut(0, k).copy_from(&top);
    row.rows_mut(k, n - k).copy_from(&bottom);
    family_from_row(&row, d)
}

/// Block-diagonal `Tᵢ = Uᵢ ⊕ Sᵢ` with `U` a row coisometry on `ℂᵏ` and `S`
/// a strict row contraction on the complement.
pub fn coisometry_plus_contraction(rng: &mut ChaCha8Rng, n: usize, k: usize, d: usize, s: f64) -> KrausFamily {
    let u = random_coisometry(rng, k, d);
    let c = random_contraction(rng, n - k, d, s);
    let ops = (0..d)
        .map(|i| {
            let mut t = CMatrix::zeros(n, n);
            t.view_mut((0, 0), (k, k)).copy_from(&u.operators()[i]);
            t.view_mut((k, k), (n - k, n - k)).copy_from(&c.operators()[i]);
            t
        })
        .collect();
    KrausFamily::new(ops).unwrap()
}

fn random_stochastic_block(rng: &mut ChaCha8Rng, size: usize) -> DMatrix<f64> {
    // A random cycle keeps the block irreducible; chords are added to half
    // of the blocks.
    let mut order: Vec<usize> = (0..size).collect();
    order.shuffle(rng);
    let mut block = DMatrix::zeros(size, size);
    for t in 0..size {
        block[(order[t], order[(t + 1) % size])] = 1.0;
    }
    if size > 1 && rng.random_bool(0.5) {
        for r in 0..size {
            for c in 0..size {
                if rng.random_bool(0.3) {
                    block[(r, c)] += rng.random_range(0.0..1.0);
                }
            }
        }
    }
    for r in 0..size {
        let sum: f64 = block.row(r).sum();
        for c in 0..size {
            block[(r, c)] /= sum;
        }
    }
    block
}

/// Random sub-Markov matrix on `n` states: closed classes (absorbing
/// states and cycles, possibly with chords) followed by transient states
/// whose rows either leak or drain into the classes. Indices are shuffled.
pub fn random_sub_markov(rng: &mut ChaCha8Rng, n: usize, stochastic: bool) -> SubMarkovMatrix {
    let mut a = DMatrix::zeros(n, n);
    let recurrent = if stochastic { rng.random_range(1..=n) } else { rng.random_range(0..=n) };
    let mut start = 0;
    while start < recurrent {
        let size = rng.random_range(1..=recurrent - start);
        let block = random_stochastic_block(rng, size);
        a.view_mut((start, start), (size, size)).copy_from(&block);
        start += size;
    }
    for r in recurrent..n {
        let mut row: Vec<f64> = (0..n)
            .map(|_| if rng.random_bool(0.6) { rng.random_range(0.0..1.0) } else { 0.0 })
            .collect();
        let drains = recurrent > 0 && (stochastic || rng.random_bool(0.5));
        if drains {
            if row[..recurrent].iter().sum::<f64>() == 0.0 {
                row[rng.random_range(0..recurrent)] = 1.0;
            }
            let closed: f64 = row[..recurrent].iter().sum();
            let inner: f64 = row[recurrent..].iter().sum();
            let to_closed = if inner == 0.0 { 1.0 } else { rng.random_range(0.2..1.0) };
            for (c, v) in row.iter_mut().enumerate() {
                *v *= if c < recurrent {
                    to_closed / closed
                } else if inner > 0.0 {
                    (1.0 - to_closed) / inner
                } else {
                    0.0
                };
            }
        } else {
            let sum: f64 = row.iter().sum();
            if sum == 0.0 {
                continue;
            }
            let target = rng.random_range(0.3..0.95);
            for v in row.iter_mut() {
                *v *= target / sum;
            }
        }
        for c in 0..n {
            a[(r, c)] = row[c];
        }
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let shuffled = DMatrix::from_fn(n, n, |r, c| a[(perm[r], perm[c])]);
    SubMarkovMatrix::new(shuffled, &tol()).unwrap()
}
