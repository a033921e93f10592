//! Completely positive maps induced by row contractions on `ℂⁿ`.
//!
//! A Kraus family `(T₁, …, T_d)` with `‖Σ TᵢTᵢ*‖ ≤ 1` defines the CP map
//! `Φ(X) = Σ Tᵢ X Tᵢ*`. The crate analyses such maps through their
//! superharmonic operators: Riesz decompositions, the absolutely
//! continuous projection, canonical forms of sub-Markov matrices,
//! similarity certificates and truncated isometric dilations.
//!
//! ```
//! use cph_core::cpmap::{apply, KrausFamily};
//! use cph_core::opcore::{matrix_unit, CMatrix};
//!
//! let phi = KrausFamily::new(vec![matrix_unit(2, 0, 1), matrix_unit(2, 1, 0)]).unwrap();
//! assert_eq!(apply(&phi, &CMatrix::identity(2, 2)).unwrap(), CMatrix::identity(2, 2));
//! ```

pub mod cpmap;
pub mod dilation;
pub mod error;
pub mod fock;
pub mod markov;
pub mod opcore;
pub mod similarity;
pub mod superharmonic;

pub use cpmap::KrausFamily;
pub use error::{Error, Result};
pub use opcore::{CMatrix, CVector, Projection, ToleranceConfig};
