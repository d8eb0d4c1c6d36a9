//! Moment-SOS solver for distributionally robust optimization (DRO) with
//! polynomial robust constraints and moment-based ambiguity sets.
//!
//! The library solves problems of the form
//!
//! ```text
//!     min  f(x)   over x in X = { c(x) >= 0 }
//!     s.t. inf over measures mu with supp(mu) in S = { g(xi) >= 0 }
//!          and E_mu[[xi]_d] in Y  of  E_mu[ h(x, xi) ] >= 0
//! ```
//!
//! via a hierarchy of semidefinite relaxations, with global-optimality
//! certificates (SOS-convexity, rank-one moment matrices), worst-case
//! measure extraction through flat truncation, and a heuristic fallback
//! for uncertified instances.

pub mod conic;
pub mod driver;
pub mod io;
pub mod model;
pub mod moment;
pub mod poly;
pub mod portfolio;
pub mod relax;
pub mod sos;

pub use driver::{run, Certificate, CertificateKind, DriverOptions, DROResult};
pub use model::DROProblem;
pub use poly::{GradedBasis, Polynomial};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degree overflow: term of degree {degree} exceeds maximum {max}")]
    DegreeOverflow { degree: u32, max: u32 },

    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    #[error("semantic error in problem description: {0}")]
    Semantic(String),

    #[error("conic solver failure: {0}")]
    Solver(String),

    #[error("atom extraction failed: {0}")]
    Extraction(String),

    #[error("unsupported construction: {0}")]
    Unsupported(String),

    #[error("psd block side {side} exceeds the configured cap {cap}")]
    DimensionCap { side: usize, cap: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
