//! Numeric tolerances used across the crate.
//!
//! Everything derives from `BASE_TOL`; the individual constants exist so
//! call sites say what they check rather than how tight it is.

/// Base relative tolerance for exact f64 arithmetic with light
/// accumulation (a handful of rounding steps).
pub const BASE_TOL: f64 = 1e-12;

/// Conjugate-symmetry slack accepted when constructing a Hermitian matrix
/// from raw entries, relative to the largest entry magnitude.
pub const HERMITIAN_SYM_TOL: f64 = BASE_TOL;

/// Positive-definite solve residual: `||Ax - b|| <= SOLVE_TOL * ||A||_F * ||x||`.
pub const SOLVE_TOL: f64 = 100.0 * BASE_TOL;

/// Eigendecomposition residual: `||Av - lambda v|| <= EVD_TOL * ||A||_F`.
pub const EVD_TOL: f64 = 100.0 * BASE_TOL;

/// Tridiagonal eigenvalue accuracy, absolute, scaled by `max(1, ||T||_inf)`.
pub const TRIDIAG_TOL: f64 = BASE_TOL;

/// Lanczos breakdown threshold, relative to `||Q||_F`. A residual norm
/// below this means the Krylov subspace is (numerically) invariant.
pub const LANCZOS_BREAKDOWN_TOL: f64 = BASE_TOL;

/// Eigenvalue estimates below `RANK_DEFICIENT_TOL * lambda_max` are
/// treated as zero before the loading formula; sample covariances are PSD
/// by construction and tiny negatives are rounding noise.
pub const RANK_DEFICIENT_TOL: f64 = 0.01 * BASE_TOL;
