//! Dense complex Hermitian matrices and the kernels the beamformer needs:
//! matrix-vector products, positive-definite (Cholesky) solves, a full
//! eigendecomposition via cyclic Jacobi rotations, and cheap spectral
//! bounds (Gershgorin, trace).
//!
//! Storage is full dense row-major. The arrays here are small (tens of
//! elements per side), so simplicity wins over packed layouts.

use num_complex::Complex64;

use crate::cvec;
use crate::error::Error;
use crate::tolerances::HERMITIAN_SYM_TOL;
use crate::Result;

const JACOBI_MAX_SWEEPS: usize = 60;

/// How a pair of spectral bounds was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundMethod {
    Gershgorin,
    Trace,
    Exact,
    Ritz,
}

impl BoundMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundMethod::Gershgorin => "gershgorin",
            BoundMethod::Trace => "trace",
            BoundMethod::Exact => "exact",
            BoundMethod::Ritz => "ritz",
        }
    }
}

/// An interval `[lower, upper]` guaranteed to contain the spectrum.
#[derive(Debug, Clone, Copy)]
pub struct SpectralBounds {
    pub lower: f64,
    pub upper: f64,
    pub method: BoundMethod,
}

/// Dense M x M complex Hermitian matrix.
///
/// Constructors enforce conjugate symmetry: entries are mirrored as exact
/// conjugates and diagonal imaginary parts are exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl HermitianMatrix {
    pub fn zeros(dim: usize) -> Self {
        HermitianMatrix {
            dim,
            data: vec![Complex64::ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn scaled_identity(dim: usize, c: f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = Complex64::new(c, 0.0);
        }
        m
    }

    /// Build from a row-major slice of raw entries. The input must be
    /// conjugate-symmetric to within [`HERMITIAN_SYM_TOL`] relative to its
    /// largest entry; the stored matrix is the exact Hermitian average.
    pub fn from_entries(dim: usize, entries: &[Complex64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        if !cvec::all_finite(entries) {
            return Err(Error::NonFinite { op: "from_entries" });
        }
        let scale = entries
            .iter()
            .map(|z| z.norm())
            .fold(0.0f64, f64::max)
            .max(f64::MIN_POSITIVE);
        for i in 0..dim {
            for j in i..dim {
                let a = entries[i * dim + j];
                let b = entries[j * dim + i].conj();
                if (a - b).norm() > HERMITIAN_SYM_TOL * scale {
                    return Err(Error::invalid(format!(
                        "entries ({i},{j}) and ({j},{i}) are not conjugate within tolerance"
                    )));
                }
            }
        }
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = Complex64::new(entries[i * dim + i].re, 0.0);
            for j in (i + 1)..dim {
                let avg = 0.5 * (entries[i * dim + j] + entries[j * dim + i].conj());
                m.data[i * dim + j] = avg;
                m.data[j * dim + i] = avg.conj();
            }
        }
        Ok(m)
    }

    /// Build from an upper-triangle generator; the lower triangle is
    /// mirrored, so the result is Hermitian by construction.
    pub fn from_upper_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = Complex64::new(f(i, i).re, 0.0);
            for j in (i + 1)..dim {
                let v = f(i, j);
                m.data[i * dim + j] = v;
                m.data[j * dim + i] = v.conj();
            }
        }
        m
    }

    /// Real diagonal matrix.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        let dim = diag.len();
        let mut m = Self::zeros(dim);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * dim + i] = Complex64::new(d, 0.0);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.dim + j]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    /// `self += alpha * x x^H`, keeping both triangles exact conjugates.
    pub fn rank_one_update(&mut self, alpha: f64, x: &[Complex64]) {
        debug_assert_eq!(x.len(), self.dim);
        let n = self.dim;
        for i in 0..n {
            self.data[i * n + i] += Complex64::new(alpha * x[i].norm_sqr(), 0.0);
            for j in (i + 1)..n {
                let v = alpha * x[i] * x[j].conj();
                self.data[i * n + j] += v;
                self.data[j * n + i] += v.conj();
            }
        }
    }

    /// `self + mu * I`.
    pub fn add_scaled_identity(&self, mu: f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.dim {
            out.data[i * self.dim + i] += Complex64::new(mu, 0.0);
        }
        out
    }

    /// Multiply every entry by a real scalar.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            *v *= c;
        }
        out
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i].re).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `A x`. One call is one matrix-vector product for anyone counting
    /// operations.
    pub fn matvec(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let n = self.dim;
        let mut y = vec![Complex64::ZERO; n];
        for (yi, row) in y.iter_mut().zip(self.data.chunks_exact(n)) {
            let mut acc = Complex64::ZERO;
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            *yi = acc;
        }
        Ok(y)
    }

    /// Cholesky factorization `A = L L^H`. Fails on the first non-positive
    /// pivot, which for a loaded SCM means the loading was insufficient.
    pub fn cholesky(&self) -> Result<CholeskyFactor> {
        let n = self.dim;
        let mut l = vec![Complex64::ZERO; n * n];
        for j in 0..n {
            let mut d = self.data[j * n + j].re;
            for k in 0..j {
                d -= l[j * n + k].norm_sqr();
            }
            if !d.is_finite() || d <= 0.0 {
                return Err(Error::NotPositiveDefinite { pivot: j, value: d });
            }
            let ljj = d.sqrt();
            l[j * n + j] = Complex64::new(ljj, 0.0);
            for i in (j + 1)..n {
                let mut s = self.data[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k].conj();
                }
                l[i * n + j] = s / ljj;
            }
        }
        Ok(CholeskyFactor { dim: n, l })
    }

    /// Solve `A x = b` for Hermitian positive definite `A`.
    pub fn solve_pd(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        if b.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: b.len(),
            });
        }
        self.cholesky()?.solve(b)
    }

    /// Full eigendecomposition by cyclic Jacobi rotations. Eigenvalues are
    /// returned ascending; eigenvectors (optional) are the matching
    /// columns, orthonormal to working precision.
    pub fn full_evd(&self, compute_vectors: bool) -> Result<Evd> {
        let n = self.dim;
        if n == 0 {
            return Ok(Evd {
                eigenvalues: Vec::new(),
                eigenvectors: compute_vectors.then(Vec::new),
            });
        }
        let mut a = self.data.clone();
        let mut v = if compute_vectors {
            let mut v = vec![Complex64::ZERO; n * n];
            for i in 0..n {
                v[i * n + i] = Complex64::ONE;
            }
            Some(v)
        } else {
            None
        };

        let anorm = self.frobenius_norm().max(f64::MIN_POSITIVE);
        let stop = 1.0e-14 * anorm;
        let mut converged = false;
        for _sweep in 0..JACOBI_MAX_SWEEPS {
            let mut off_sqr = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    off_sqr += a[i * n + j].norm_sqr();
                }
            }
            if (2.0 * off_sqr).sqrt() <= stop {
                converged = true;
                break;
            }
            for p in 0..n.saturating_sub(1) {
                for q in (p + 1)..n {
                    jacobi_rotate(&mut a, v.as_deref_mut(), n, p, q);
                }
            }
        }
        if !converged {
            // one final check: the last sweep may have finished the job
            let mut off_sqr = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    off_sqr += a[i * n + j].norm_sqr();
                }
            }
            if (2.0 * off_sqr).sqrt() > stop {
                return Err(Error::NonConvergence {
                    op: "jacobi eigendecomposition",
                    iterations: JACOBI_MAX_SWEEPS,
                });
            }
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[i * n + i].re.total_cmp(&a[j * n + j].re));
        let eigenvalues: Vec<f64> = order.iter().map(|&i| a[i * n + i].re).collect();
        if eigenvalues.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { op: "full_evd" });
        }
        let eigenvectors = v.map(|v| {
            order
                .iter()
                .map(|&col| (0..n).map(|row| v[row * n + col]).collect())
                .collect()
        });
        Ok(Evd {
            eigenvalues,
            eigenvectors,
        })
    }

    /// Gershgorin disc bounds. The lower bound is clipped at zero: the
    /// matrices fed here are sample covariances, PSD by construction, and
    /// a negative lower bound would poison the condition estimate.
    pub fn gershgorin_bounds(&self) -> SpectralBounds {
        let n = self.dim;
        let mut lower = f64::INFINITY;
        let mut upper = f64::NEG_INFINITY;
        for i in 0..n {
            let mut radius = 0.0;
            for j in 0..n {
                if j != i {
                    radius += self.data[i * n + j].norm();
                }
            }
            let d = self.data[i * n + i].re;
            lower = lower.min(d - radius);
            upper = upper.max(d + radius);
        }
        SpectralBounds {
            lower: lower.max(0.0),
            upper,
            method: BoundMethod::Gershgorin,
        }
    }

    /// Trace bounds for a PSD matrix: every eigenvalue lies in
    /// `[0, trace]`. Errors if a diagonal entry is negative, since the
    /// matrix then cannot be PSD.
    pub fn trace_bounds(&self) -> Result<SpectralBounds> {
        for i in 0..self.dim {
            let d = self.data[i * self.dim + i].re;
            if d < 0.0 {
                return Err(Error::NotPsd { index: i, value: d });
            }
        }
        Ok(SpectralBounds {
            lower: 0.0,
            upper: self.trace(),
            method: BoundMethod::Trace,
        })
    }
}

/// Result of [`HermitianMatrix::full_evd`].
#[derive(Debug, Clone)]
pub struct Evd {
    /// Ascending real eigenvalues.
    pub eigenvalues: Vec<f64>,
    /// Column eigenvectors matching `eigenvalues`, when requested.
    pub eigenvectors: Option<Vec<Vec<Complex64>>>,
}

impl Evd {
    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_max(&self) -> f64 {
        *self.eigenvalues.last().expect("non-empty spectrum")
    }
}

/// Lower Cholesky factor of a Hermitian positive definite matrix; reuse
/// it to solve against several right-hand sides.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    dim: usize,
    l: Vec<Complex64>,
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Solve `L L^H x = b`.
    pub fn solve(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        if b.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: b.len(),
            });
        }
        let n = self.dim;
        let l = &self.l;
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                let lik = l[i * n + k];
                y[i] = y[i] - lik * y[k];
            }
            y[i] /= l[i * n + i].re;
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let lki = l[k * n + i];
                y[i] = y[i] - lki.conj() * y[k];
            }
            y[i] /= l[i * n + i].re;
        }
        Ok(y)
    }
}

/// One cyclic Jacobi rotation annihilating `a[p][q]`, applied to the full
/// dense matrix and (optionally) accumulated into the eigenvector matrix.
fn jacobi_rotate(a: &mut [Complex64], v: Option<&mut [Complex64]>, n: usize, p: usize, q: usize) {
    let apq = a[p * n + q];
    let rho = apq.norm();
    if rho <= f64::MIN_POSITIVE {
        return;
    }
    let phase = apq / rho;
    let app = a[p * n + p].re;
    let aqq = a[q * n + q].re;
    let sigma = (app - aqq) / (2.0 * rho);
    let t = if sigma == 0.0 {
        1.0
    } else {
        sigma.signum() / (sigma.abs() + (1.0 + sigma * sigma).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    let s_phase = s * phase;
    let s_conj = s * phase.conj();

    // columns: [col_p col_q] <- [col_p col_q] * U
    for i in 0..n {
        let aip = a[i * n + p];
        let aiq = a[i * n + q];
        a[i * n + p] = c * aip + s_conj * aiq;
        a[i * n + q] = -s_phase * aip + c * aiq;
    }
    // rows: apply U^H on the left
    for j in 0..n {
        let apj = a[p * n + j];
        let aqj = a[q * n + j];
        a[p * n + j] = c * apj + s_phase * aqj;
        a[q * n + j] = -s_conj * apj + c * aqj;
    }
    // the rotation zeroes (p,q) analytically; pin it and keep the
    // diagonal exactly real so rounding cannot accumulate there
    a[p * n + q] = Complex64::ZERO;
    a[q * n + p] = Complex64::ZERO;
    a[p * n + p] = Complex64::new(a[p * n + p].re, 0.0);
    a[q * n + q] = Complex64::new(a[q * n + q].re, 0.0);

    if let Some(v) = v {
        for i in 0..n {
            let vip = v[i * n + p];
            let viq = v[i * n + q];
            v[i * n + p] = c * vip + s_conj * viq;
            v[i * n + q] = -s_phase * vip + c * viq;
        }
    }
}
