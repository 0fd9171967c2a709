//! Structure-preserving numerical workbench for linear evolutionary models of
//! micro-structured elastic solids.
//!
//! The workbench builds, validates, reduces, and time-integrates first-order
//! block-operator systems of the form
//!
//! ```text
//!     (d/dt M0 + M1 + (d/dt)^{-1} M2 + A) U = f
//! ```
//!
//! on a uniform 3-D grid with homogeneous Dirichlet boundary, where `M0` is
//! selfadjoint positive definite, `M1` is skew-selfadjoint, `M2` is
//! selfadjoint, and `A` is the skew spatial block operator. Structure is
//! preserved at the discrete level: the assembled `A` is exactly skew, the
//! implicit midpoint rule conserves the quadratic energy, and subspace
//! embeddings are exact partial isometries.
//!
//! Modules:
//! - [`tensor`]: pointwise tensor values, projectors, axial maps, subspace bases
//! - [`sparse`]: compressed sparse row matrices
//! - [`blocks`]: labeled block operators, classification, Schur complements
//! - [`material`]: constitutive blocks, positivity checks, composite inverses
//! - [`grid`]: difference operators, pointwise lifting, field snapshots
//! - [`solver`]: preconditioned Krylov solver for the implicit steps
//! - [`evolution`]: time integration, energy balance, weighted norms
//! - [`reduction`]: conjugation by structured maps, descendant problems
//! - [`zoo`]: the model catalog and its reduction edges
//! - [`config`]: run configuration and reports
//! - [`cli`]: command implementations

pub mod blocks;
pub mod cli;
pub mod config;
pub mod evolution;
pub mod grid;
pub mod material;
pub mod reduction;
pub mod solver;
pub mod sparse;
pub mod tensor;
pub mod threads;
pub mod zoo;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Matrix or block dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// A block that must be invertible is singular or badly conditioned.
    #[error("singular block: {0}")]
    Singular(String),
    /// The linear solver did not reach the requested residual.
    #[error("linear solver stalled: relative residual {residual:.3e} after {iterations} iterations")]
    Solver { residual: f64, iterations: usize },
    /// A validity condition on model parameters failed.
    #[error("invalid model: {0}")]
    InvalidModel(String),
    /// Configuration parsing or semantic errors.
    #[error("config error: {0}")]
    Config(String),
    /// A reduction precondition is violated.
    #[error("reduction rejected: {0}")]
    Reduction(String),
    /// Input/output failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    /// JSON encoding or decoding failure.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
