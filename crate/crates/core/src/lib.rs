//! Numerical laboratory for a family of anisotropic degenerate elliptic
//! operators built on the diagonal gradient weight with entries |q_i|^(alpha/2).
//!
//! The crate evaluates the operator family (extremal Pucci-type envelopes,
//! coefficient-field variants, the pseudo p-Laplacian and its widely
//! degenerate cousin), audits their structural hypotheses by randomized
//! sampling, runs the eigenvalue "pinch" machinery behind the Lipschitz
//! regularity argument, assembles the regime constant systems into an
//! executable certificate, builds explicit super/sub-solution barriers, and
//! solves desk-scale Dirichlet problems on uniform grids so the comparison,
//! bracketing, strong-maximum-principle and seminorm properties can be
//! checked on actual discrete fields.
//!
//! All core math is generic over the scalar type through [`Real`]; concrete
//! f64 aliases live at the crate root.

// validation guards use `!(x > 0)` so NaN inputs are rejected too;
// indexed loops are kept where several arrays share the index
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod barriers;
pub mod config;
pub mod matkernel;
pub mod operators;
pub mod proofkit;
pub mod regularity;
pub mod rng;
pub mod scalar;
pub mod solver;
pub mod tol;

pub use scalar::Real;

/// Error type shared by every module.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("singular point: {0}")]
    Singular(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("contract violated: {0}")]
    Contract(String),
    #[error("no convergence after {iters} sweeps, residual tail {tail:?}")]
    Convergence { iters: usize, tail: Vec<f64> },
    #[error("config error: {0}")]
    Config(String),
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

// Concrete f64 instantiations of the main domain types.
pub type SymMat64 = matkernel::SymMat<f64>;
pub type EigPair64 = matkernel::EigPair<f64>;
pub type OperatorSpec64 = operators::OperatorSpec<f64>;
pub type LowerOrderSpec64 = operators::LowerOrderSpec<f64>;
pub type Jet64 = operators::Jet<f64>;
pub type RadialProfile64 = proofkit::RadialProfile<f64>;
pub type Certificate64 = proofkit::Certificate<f64>;
pub type Domain64 = barriers::Domain<f64>;
pub type Grid64 = solver::Grid<f64>;
pub type GridField64 = solver::GridField<f64>;
pub type Problem64 = solver::Problem<f64>;

