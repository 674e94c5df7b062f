//! Robust adaptive beamforming with white-noise-gain-constrained diagonal
//! loading.
//!
//! The library keeps an MPDR beamformer's white noise gain above a
//! configured floor by capping the condition number of the sample spatial
//! correlation matrix. The cap follows from the Kantorovich inequality,
//! and the minimal diagonal loading that enforces it needs only the
//! extreme eigenvalues of the matrix. Those extremes can be computed
//! exactly (full eigendecomposition), estimated cheaply from a k-step
//! Lanczos projection, or bounded by Gershgorin / trace arguments.
//!
//! Modules:
//! - [`hermitian`]: dense complex Hermitian kernels (matvec, Cholesky
//!   solve, Jacobi eigendecomposition, spectral bounds)
//! - [`tridiag`]: real symmetric tridiagonal eigenvalues (Sturm bisection)
//! - [`krylov`]: Lanczos tridiagonalization and Ritz extremes
//! - [`loading`]: WNG floor -> condition cap -> minimal loading
//! - [`beamformer`]: steering vectors, sliding-window SCM, MPDR weights,
//!   beampatterns and scanned responses
//! - [`scenario`]: seeded birth-death interference simulator
//! - [`metrics`]: per-frame and ensemble metrics
//! - [`sim`]: Monte Carlo orchestration (rayon-parallel trials behind the
//!   `parallel` feature) and CSV emission
//! - [`snapshot`]: the `KBF1` binary snapshot-file format
//! - [`eigbench`]: wall-clock comparison of the eigenvalue estimators

pub mod beamformer;
pub mod csvio;
pub mod cvec;
pub mod eigbench;
pub mod error;
pub mod hermitian;
pub mod krylov;
pub mod loading;
pub mod metrics;
pub mod scenario;
pub mod sim;
pub mod snapshot;
pub mod tolerances;
pub mod tridiag;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
