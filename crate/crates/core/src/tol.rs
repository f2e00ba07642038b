//! Central tolerances used by kernels and checks.
//!
//! Values are f64-scale; generic code goes through `Real::tol_floor` so an
//! f32 instantiation degrades to an epsilon-based floor instead of an
//! unreachable decimal.

/// Eigendecomposition reconstruction and exact algebraic identities
/// (trace splits, duality). Jacobi on 1..6 dimensional matrices converges
/// to a few ulps; 1e-12 leaves headroom for the assembly arithmetic.
pub const EXACT: f64 = 1e-12;

/// Off-diagonal mass at which the Jacobi sweep stops.
pub const JACOBI_OFF: f64 = 1e-13;

/// Semidefiniteness test threshold, relative to (1 + norm). Rounding
/// headroom that does not mask a genuine violation.
pub const PSD_SLACK: f64 = 1e-10;

/// Sampled-audit violation budget, relative to the local scale.
pub const AUDIT: f64 = 1e-9;

/// Degenerate denominators skipped inside ratio audits.
pub const RATIO_GUARD: f64 = 1e-14;

/// Finite-difference cross-checks of analytic jets (central differences at
/// step 1e-5 carry about 1e-10 truncation times the third derivative).
pub const FD_CHECK: f64 = 1e-6;

/// Default solver residual tolerance factor: tol = 1e-6 * (1 + |f|_inf).
pub const SOLVE_RESID: f64 = 1e-6;

/// Strictness margin kept when maximizing the admissible doubling radius.
pub const DELTA_MARGIN: f64 = 0.99;

/// Headroom factor applied to minimal feasible constants (M weights,
/// barrier amplitudes) so strict inequalities survive floating point.
pub const STRICT_PAD: f64 = 1.01;
