//! Numerical verification toolkit for pairs of Riemannian metrics related by
//! a (P, Q, eps) connection-difference structure on a coordinate chart.
//!
//! Everything is built from closed-form scalar expressions evaluated with
//! forward-mode dual numbers, so first derivatives of metric-derived
//! quantities are exact to machine precision. The crate certifies or refutes:
//!
//! - the algebraic conditions on (P, Q, eps) and the positivity of both
//!   metrics ([`scene::validate_scene`]);
//! - the defining connection-difference equation, the first-order PDE on the
//!   pair tensor A, and its Q-free specialization, as sampled residual
//!   reports ([`scene`]);
//! - conservation and pairwise commutation of the associated one-parameter
//!   family of quadratic geodesic-flow integrals ([`integrals`]);
//! - the eigenvalue-structure facts: multiplicity of non-constant
//!   eigenvalues, eigenvalue gradients as eigenvectors, and the structural
//!   classification of a pair ([`spectra`]).
//!
//! A catalog of constructively verified scenes (affine, projective,
//! h-projective, plus deliberately broken negatives) lives in [`catalog`].

// Tensor arithmetic reads best with explicit index loops.
#![allow(clippy::needless_range_loop)]

pub mod catalog;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod integrals;
pub mod jet;
pub mod sampling;
pub mod scene;
pub mod scene_file;
pub mod spectra;
pub mod tol;

pub use error::{Error, Result};
