//! Real symmetric tridiagonal eigenvalues by Sturm-sequence bisection.
//!
//! Deliberately independent of the dense Jacobi solver in
//! [`crate::hermitian`]: the two serve as cross-checks for each other in
//! the test suite.

use crate::error::Error;
use crate::tolerances::TRIDIAG_TOL;
use crate::Result;

/// Symmetric tridiagonal matrix stored as its diagonal `alpha` and
/// off-diagonal `beta` (all `beta[j] >= 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct RealSymTridiagonal {
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl RealSymTridiagonal {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::invalid(
                "tridiagonal needs at least one diagonal entry",
            ));
        }
        if beta.len() + 1 != alpha.len() {
            return Err(Error::DimensionMismatch {
                expected: alpha.len() - 1,
                got: beta.len(),
            });
        }
        if alpha.iter().chain(beta.iter()).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { op: "tridiagonal" });
        }
        if beta.iter().any(|&b| b < 0.0) {
            return Err(Error::invalid("off-diagonal entries must be nonnegative"));
        }
        Ok(RealSymTridiagonal { alpha, beta })
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// Max row sum (infinity norm).
    pub fn inf_norm(&self) -> f64 {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let left = if i > 0 { self.beta[i - 1] } else { 0.0 };
                let right = if i + 1 < n { self.beta[i] } else { 0.0 };
                self.alpha[i].abs() + left + right
            })
            .fold(0.0, f64::max)
    }

    /// Number of eigenvalues strictly below `x`, via the signs of the
    /// LDL^T pivots (Sturm sequence).
    pub fn count_below(&self, x: f64) -> usize {
        let n = self.dim();
        let beta_max_sqr = self.beta.iter().map(|b| b * b).fold(0.0, f64::max);
        let pivmin = f64::MIN_POSITIVE.max(1e-300 * (1.0 + beta_max_sqr));
        let mut count = 0;
        let mut d = self.alpha[0] - x;
        if d < 0.0 {
            count += 1;
        }
        for i in 1..n {
            let safe = if d.abs() < pivmin {
                if d < 0.0 {
                    -pivmin
                } else {
                    pivmin
                }
            } else {
                d
            };
            d = (self.alpha[i] - x) - self.beta[i - 1] * self.beta[i - 1] / safe;
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// All eigenvalues, ascending. Each is bisected to an absolute
    /// accuracy of `TRIDIAG_TOL * max(1, ||T||_inf)`.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let n = self.dim();
        if n == 1 {
            return vec![self.alpha[0]];
        }
        // Gershgorin bracket for the whole spectrum
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let left = if i > 0 { self.beta[i - 1] } else { 0.0 };
            let right = if i + 1 < n { self.beta[i] } else { 0.0 };
            lo = lo.min(self.alpha[i] - left - right);
            hi = hi.max(self.alpha[i] + left + right);
        }
        let scale = self.inf_norm().max(1.0);
        lo -= scale * 1e-12 + 1.0e-300;
        hi += scale * 1e-12 + 1.0e-300;
        let target = TRIDIAG_TOL * scale * 0.5;

        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let mut a = lo;
            let mut b = hi;
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if b - a <= target.max(2.0 * f64::EPSILON * mid.abs()) {
                    break;
                }
                if self.count_below(mid) <= k {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            out.push(0.5 * (a + b));
        }
        out
    }

    /// Dense Hermitian copy, mainly for test cross-checks.
    pub fn densify(&self) -> crate::hermitian::HermitianMatrix {
        use num_complex::Complex64;
        let n = self.dim();
        crate::hermitian::HermitianMatrix::from_upper_fn(n, |i, j| {
            if i == j {
                Complex64::new(self.alpha[i], 0.0)
            } else if j == i + 1 {
                Complex64::new(self.beta[i], 0.0)
            } else {
                Complex64::ZERO
            }
        })
    }
}
