//! Truncated full Fock space over `ℂᵈ`.
//!
//! Levels `0..N` hold words of length `< N` over the alphabet `1..=d`,
//! ordered by level and lexicographically within a level (first letter most
//! significant). Creation operators prepend a letter and annihilate the top
//! level.
//!
//! Operators on `𝓕 ⊗ H` use the Fock index as the major index, so the
//! creation operator `Sⱼ` acts there as `Sⱼ ⊗ I`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::opcore::{CMatrix, CVector, Projection, ToleranceConfig, ONE, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TruncatedFock {
    d: usize,
    levels: usize,
}

impl TruncatedFock {
    pub fn new(d: usize, levels: usize) -> Result<Self> {
        if d == 0 || levels == 0 {
            return Err(Error::Dimension(format!(
                "Fock space needs a non-empty alphabet and at least one level (d = {d}, N = {levels})"
            )));
        }
        Ok(Self { d, levels })
    }

    pub fn alphabet(&self) -> usize {
        self.d
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn level_size(&self, m: usize) -> usize {
        self.d.pow(m as u32)
    }

    /// Index of the first word of length `m`.
    pub fn level_offset(&self, m: usize) -> usize {
        (0..m).map(|l| self.level_size(l)).sum()
    }

    pub fn dim(&self) -> usize {
        self.level_offset(self.levels)
    }

    /// Index of a word with letters in `1..=d`; `None` when the word is too
    /// long or uses a letter outside the alphabet.
    pub fn index(&self, word: &[usize]) -> Option<usize> {
        if word.len() >= self.levels {
            return None;
        }
        let mut within = 0;
        for &letter in word {
            if letter == 0 || letter > self.d {
                return None;
            }
            within = within * self.d + (letter - 1);
        }
        Some(self.level_offset(word.len()) + within)
    }

    pub fn level_of(&self, index: usize) -> usize {
        let mut m = 0;
        let mut end = 1;
        while index >= end {
            m += 1;
            end += self.level_size(m);
        }
        m
    }

    pub fn word(&self, index: usize) -> Vec<usize> {
        let m = self.level_of(index);
        let mut within = index - self.level_offset(m);
        let mut letters = vec![0; m];
        for slot in letters.iter_mut().rev() {
            *slot = within % self.d + 1;
            within /= self.d;
        }
        letters
    }

    /// Diagonal projection `P_m` onto level `m`.
    pub fn level_projection(&self, m: usize) -> Projection {
        let start = self.level_offset(m);
        let indices: Vec<usize> = (start..start + self.level_size(m)).collect();
        Projection::coordinate(self.dim(), &indices)
    }

    /// All words of length exactly `m`, in index order.
    pub fn words_of_length(d: usize, m: usize) -> Vec<Vec<usize>> {
        let mut words = vec![Vec::new()];
        for _ in 0..m {
            words = words
                .into_iter()
                .flat_map(|w| {
                    (1..=d).map(move |letter| {
                        let mut next = w.clone();
                        next.push(letter);
                        next
                    })
                })
                .collect();
        }
        words
    }
}

/// Creation by the letter `j ∈ 1..=d`.
pub fn creation_operator(j: usize, fock: &TruncatedFock) -> Result<CMatrix> {
    if j == 0 || j > fock.d {
        return Err(Error::Precondition(format!("letter {j} outside 1..={}", fock.d)));
    }
    let dim = fock.dim();
    let mut s = CMatrix::zeros(dim, dim);
    for m in 0..fock.levels - 1 {
        let size = fock.level_size(m);
        let from = fock.level_offset(m);
        let to = fock.level_offset(m + 1) + (j - 1) * size;
        for w in 0..size {
            s[(to + w, from + w)] = ONE;
        }
    }
    Ok(s)
}

fn check_band_input(a: &CMatrix, fock: &TruncatedFock, h_dim: usize) -> Result<()> {
    let expected = fock.dim() * h_dim;
    if h_dim == 0 || a.shape() != (expected, expected) {
        return Err(Error::Dimension(format!(
            "operator is {}x{}, expected {expected}x{expected} on Fock ⊗ ℂ^{h_dim}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

/// `Φⱼ(a) = Σₖ P_{k+j} a P_k`: the entries of `a` whose row level exceeds
/// the column level by `j`.
pub fn fourier_coefficient(a: &CMatrix, j: i64, fock: &TruncatedFock, h_dim: usize) -> Result<CMatrix> {
    check_band_input(a, fock, h_dim)?;
    let levels: Vec<i64> = (0..fock.dim()).map(|i| fock.level_of(i) as i64).collect();
    Ok(CMatrix::from_fn(a.nrows(), a.ncols(), |r, c| {
        if levels[r / h_dim] - levels[c / h_dim] == j {
            a[(r, c)]
        } else {
            ZERO
        }
    }))
}

/// Fejér mean `Σ_{|j|<k} (1 − |j|/k) Φⱼ(a)`.
pub fn cesaro_mean(a: &CMatrix, k: usize, fock: &TruncatedFock, h_dim: usize) -> Result<CMatrix> {
    check_band_input(a, fock, h_dim)?;
    if k == 0 {
        return Err(Error::Precondition("Fejér index must be at least 1".into()));
    }
    let levels: Vec<i64> = (0..fock.dim()).map(|i| fock.level_of(i) as i64).collect();
    let k = k as i64;
    Ok(CMatrix::from_fn(a.nrows(), a.ncols(), |r, c| {
        let j = (levels[r / h_dim] - levels[c / h_dim]).abs();
        if j < k {
            a[(r, c)] * Complex64::new(1.0 - j as f64 / k as f64, 0.0)
        } else {
            ZERO
        }
    }))
}

/// Whether `x` is wandering for the tuple `ops`: the orbit vectors `S_w x`
/// for words of different lengths `≤ max_len` are orthogonal within
/// `conv_tol`.
pub fn is_wandering(ops: &[CMatrix], x: &CVector, max_len: usize, tol: &ToleranceConfig) -> Result<bool> {
    if max_len == 0 {
        return Err(Error::Precondition("word length bound must be at least 1".into()));
    }
    for (i, s) in ops.iter().enumerate() {
        if s.shape() != (x.len(), x.len()) {
            return Err(Error::Dimension(format!(
                "operator {i} is {}x{}, vector has length {}",
                s.nrows(),
                s.ncols(),
                x.len()
            )));
        }
    }
    let mut orbit: Vec<Vec<CVector>> = vec![vec![x.clone()]];
    for m in 1..=max_len {
        let next: Vec<CVector> = orbit[m - 1]
            .iter()
            .flat_map(|v| ops.iter().map(move |s| s * v))
            .collect();
        orbit.push(next);
    }
    for (m, shorter) in orbit.iter().enumerate() {
        for longer in &orbit[m + 1..] {
            for u in shorter {
                for v in longer {
                    if u.dotc(v).norm() > tol.conv_tol {
                        return Ok(false);
                    }
                }
            }
        }
    }
    Ok(true)
}
