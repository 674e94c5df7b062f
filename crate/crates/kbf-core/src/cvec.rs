//! Small helpers on complex vectors (`&[Complex64]`).

use num_complex::Complex64;

/// Conjugated inner product `a^H b`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Squared Euclidean norm.
pub fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum()
}

/// Euclidean norm.
pub fn norm(v: &[Complex64]) -> f64 {
    norm_sqr(v).sqrt()
}

/// `y += alpha * x`.
pub fn axpy(y: &mut [Complex64], alpha: Complex64, x: &[Complex64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `v *= alpha` for a real scalar.
pub fn scale(v: &mut [Complex64], alpha: f64) {
    for x in v.iter_mut() {
        *x *= alpha;
    }
}

pub fn all_finite(v: &[Complex64]) -> bool {
    v.iter().all(|x| x.re.is_finite() && x.im.is_finite())
}
