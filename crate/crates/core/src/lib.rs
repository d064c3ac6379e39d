//! Nodally bound-preserving stabilised finite elements for linear and
//! semilinear reaction-diffusion problems on triangle meshes.
//!
//! The numerical solution is the constrained part `u+` of a discrete field
//! `u = u+ + u-`, where `u+` is the nodewise clip of `u` into a box and the
//! complementary part `u-` is penalised by a diagonal stabilisation.

pub mod analysis;
pub mod experiments;
pub mod forms;
pub mod linalg;
pub mod mesh;
pub mod oracle;
pub mod projection;
pub mod quadrature;
pub mod solver;
pub mod space;

use thiserror::Error;

pub use forms::{assemble_system, AssembledSystem, ProblemSpec, Tensor2};
pub use mesh::{Mesh, MeshError, Point, Rect};
pub use projection::BoundsBox;
pub use solver::{SolveReport, SolverConfig};
pub use space::{Degree, FeSpace, NodalField};

/// Errors from spaces, fields and form assembly.
#[derive(Debug, Error, PartialEq)]
pub enum FeError {
    #[error("unsupported polynomial degree {0} (expected 1 or 2)")]
    UnsupportedDegree(usize),
    #[error("dof {dof} out of range (space has {ndofs})")]
    DofOutOfRange { dof: usize, ndofs: usize },
    #[error("fields live on different spaces")]
    SpaceMismatch,
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("diffusion tensor not elliptic on triangle {triangle} (smallest eigenvalue {min_eigenvalue})")]
    NotElliptic { triangle: usize, min_eigenvalue: f64 },
    #[error("reaction coefficient {value} on triangle {triangle} is negative or not finite")]
    NegativeReaction { triangle: usize, value: f64 },
    #[error("reaction exponent must satisfy p >= 2, got {0}")]
    InvalidExponent(f64),
    #[error("invalid bounds at dof {dof}: [{lower}, {upper}]")]
    InvalidBounds { dof: usize, lower: f64, upper: f64 },
    #[error("{0}")]
    InvalidParameter(String),
}

/// Errors from the Galerkin, Richardson and oracle solvers.
#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Fe(#[from] FeError),
    #[error(transparent)]
    Factorization(#[from] linalg::FactorError),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("no convergence after {iterations} iterations (last update {last_update:e})")]
    NotConverged { iterations: usize, last_update: f64 },
    #[error("scalar bracket failure at dof {dof}: the local map is not monotone")]
    BracketFailure { dof: usize },
}
