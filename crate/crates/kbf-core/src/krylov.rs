//! k-step Lanczos tridiagonalization of a Hermitian matrix and Ritz
//! extreme eigenvalues.
//!
//! Repeated multiplication by the matrix biases the Krylov subspace
//! toward the extreme eigenspaces, so the extreme eigenvalues of the
//! small projected tridiagonal matrix converge to the true extremes after
//! very few steps. The whole run costs `k` matrix-vector products, i.e.
//! O(kM^2) against O(M^3) for a dense eigendecomposition, and the matvec
//! count is carried in the result so callers can audit exactly that.

use num_complex::Complex64;

use crate::cvec;
use crate::error::Error;
use crate::hermitian::{BoundMethod, HermitianMatrix};
use crate::tolerances::LANCZOS_BREAKDOWN_TOL;
use crate::tridiag::RealSymTridiagonal;
use crate::Result;

/// Knobs for [`lanczos_tridiagonalize`].
#[derive(Debug, Clone, Copy, Default)]
pub struct LanczosOptions {
    /// Keep the orthonormal basis vectors in the result (needed for the
    /// projection-identity and orthogonality checks; the loading path
    /// never needs them).
    pub keep_basis: bool,
    /// Re-orthogonalize every residual against all retained basis
    /// vectors. The bare three-term recursion is fine for the small step
    /// counts used here; turn this on when running k close to M.
    pub reorthogonalize: bool,
}

/// Outcome of a k-step Lanczos run.
#[derive(Debug, Clone)]
pub struct LanczosResult {
    /// Projected tridiagonal matrix, `steps x steps`.
    pub tridiagonal: RealSymTridiagonal,
    /// Orthonormal basis vectors `v_1..v_steps` when requested.
    pub basis: Option<Vec<Vec<Complex64>>>,
    /// Steps actually completed (`<= k`).
    pub steps: usize,
    /// Matrix-vector products performed; always equals `steps`.
    pub matvec_count: usize,
    /// True when the recursion found an invariant subspace early. The
    /// truncated projection is then exact for that subspace.
    pub breakdown: bool,
}

impl LanczosResult {
    pub fn matvec_count(&self) -> usize {
        self.matvec_count
    }
}

/// Extreme eigenvalue estimates with their provenance.
#[derive(Debug, Clone, Copy)]
pub struct EigExtremes {
    /// Smallest estimate, clamped at zero (inputs are PSD covariances).
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub method: BoundMethod,
    /// Lanczos steps spent (0 for non-iterative methods).
    pub steps_used: usize,
}

/// Run up to `k` Lanczos steps on `q` starting from `start` (default: the
/// normalized all-ones vector, which for a uniform linear array equals
/// the broadside steering vector over sqrt(M)).
///
/// The recursion per step j: `w = Q v_j`, subtract `beta_{j-1} v_{j-1}`,
/// `alpha_j = Re(v_j^H w)`, subtract `alpha_j v_j`, `beta_j = ||w||`,
/// `v_{j+1} = w / beta_j`. The real part in the alpha update guards
/// against rounding-induced imaginary parts; for exact arithmetic
/// `v_j^H Q v_j` is already real. When `beta_j` falls below
/// `LANCZOS_BREAKDOWN_TOL * ||Q||_F` the subspace is invariant and the
/// run stops early with `breakdown = true`.
pub fn lanczos_tridiagonalize(
    q: &HermitianMatrix,
    k: usize,
    start: Option<&[Complex64]>,
    options: LanczosOptions,
) -> Result<LanczosResult> {
    let m = q.dim();
    if k < 1 || k > m {
        return Err(Error::invalid(format!(
            "step count k={k} must satisfy 1 <= k <= {m}"
        )));
    }
    let mut v = match start {
        Some(s) => {
            if s.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: s.len(),
                });
            }
            if !cvec::all_finite(s) {
                return Err(Error::NonFinite {
                    op: "lanczos start vector",
                });
            }
            let n = cvec::norm(s);
            if n <= 0.0 {
                return Err(Error::invalid("lanczos start vector must be nonzero"));
            }
            let mut v = s.to_vec();
            cvec::scale(&mut v, 1.0 / n);
            v
        }
        None => vec![Complex64::new(1.0 / (m as f64).sqrt(), 0.0); m],
    };

    let breakdown_eps = LANCZOS_BREAKDOWN_TOL * q.frobenius_norm();
    let keep_all = options.keep_basis || options.reorthogonalize;

    let mut alphas: Vec<f64> = Vec::with_capacity(k);
    let mut betas: Vec<f64> = Vec::with_capacity(k.saturating_sub(1));
    let mut retained: Vec<Vec<Complex64>> = Vec::new();
    let mut v_prev: Vec<Complex64> = Vec::new();
    let mut beta_prev = 0.0f64;
    let mut matvec_count = 0usize;
    let mut breakdown = false;

    for j in 0..k {
        if keep_all {
            retained.push(v.clone());
        }
        let mut w = q.matvec(&v)?;
        matvec_count += 1;
        if j > 0 {
            cvec::axpy(&mut w, Complex64::new(-beta_prev, 0.0), &v_prev);
        }
        let alpha = cvec::inner(&v, &w).re;
        if !alpha.is_finite() {
            return Err(Error::NonFinite {
                op: "lanczos recursion",
            });
        }
        alphas.push(alpha);
        if j + 1 == k {
            break;
        }
        cvec::axpy(&mut w, Complex64::new(-alpha, 0.0), &v);
        if options.reorthogonalize {
            for u in &retained {
                let c = cvec::inner(u, &w);
                cvec::axpy(&mut w, -c, u);
            }
        }
        let beta = cvec::norm(&w);
        if !beta.is_finite() {
            return Err(Error::NonFinite {
                op: "lanczos recursion",
            });
        }
        if beta <= breakdown_eps {
            breakdown = true;
            break;
        }
        betas.push(beta);
        cvec::scale(&mut w, 1.0 / beta);
        v_prev = std::mem::replace(&mut v, w);
        beta_prev = beta;
    }

    let steps = alphas.len();
    let tridiagonal = RealSymTridiagonal::new(alphas, betas)?;
    Ok(LanczosResult {
        tridiagonal,
        basis: options.keep_basis.then(|| {
            retained.truncate(steps);
            retained
        }),
        steps,
        matvec_count,
        breakdown,
    })
}

/// Extreme Ritz values after `k` Lanczos steps with the default start
/// vector: the min/max eigenvalues of the projected tridiagonal matrix.
/// By interlacing they always lie inside the true spectrum of `q`.
pub fn ritz_extremes(q: &HermitianMatrix, k: usize) -> Result<EigExtremes> {
    let run = lanczos_tridiagonalize(q, k, None, LanczosOptions::default())?;
    let eigs = run.tridiagonal.eigenvalues();
    Ok(EigExtremes {
        lambda_min: eigs[0].max(0.0),
        lambda_max: *eigs.last().expect("at least one step"),
        method: BoundMethod::Ritz,
        steps_used: run.steps,
    })
}
