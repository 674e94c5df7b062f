//! Steering vectors, sliding-window sample correlation, MPDR weights,
//! white noise gain, quiescent beampattern and Capon-style scanned
//! response for a uniform linear array.
//!
//! Phase convention: element 0 is the phase reference and the exponent is
//! negative, `d_m = exp(-i 2 pi rho m cos(theta))` with `rho` the element
//! spacing in wavelengths. Broadside (90 degrees) therefore maps to the
//! all-ones vector.

use std::collections::VecDeque;

use num_complex::Complex64;

use crate::cvec;
use crate::error::Error;
use crate::hermitian::{CholeskyFactor, HermitianMatrix};
use crate::Result;

/// Array response toward one direction; entries are unit modulus so
/// `d^H d = M` by construction.
#[derive(Debug, Clone)]
pub struct SteeringVector {
    pub angle_deg: f64,
    pub spacing_ratio: f64,
    d: Vec<Complex64>,
}

impl SteeringVector {
    pub fn entries(&self) -> &[Complex64] {
        &self.d
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    /// Wrap arbitrary unit-modulus entries (non-ULA geometries). The
    /// angle is kept for labeling only.
    pub fn from_unit_modulus(angle_deg: f64, entries: Vec<Complex64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("steering vector needs at least one element"));
        }
        for (i, x) in entries.iter().enumerate() {
            if (x.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!(
                    "entry {i} has modulus {}, expected 1",
                    x.norm()
                )));
            }
        }
        Ok(SteeringVector {
            angle_deg,
            spacing_ratio: f64::NAN,
            d: entries,
        })
    }
}

/// Build the steering vector for `angle_deg` (0..180, broadside = 90) on
/// an `m`-element ULA with `spacing_ratio` = element spacing / wavelength.
pub fn steering_vector(angle_deg: f64, m: usize, spacing_ratio: f64) -> SteeringVector {
    let cos_theta = angle_deg.to_radians().cos();
    let step = -2.0 * std::f64::consts::PI * spacing_ratio * cos_theta;
    let d = (0..m)
        .map(|i| Complex64::from_polar(1.0, step * i as f64))
        .collect();
    SteeringVector {
        angle_deg,
        spacing_ratio,
        d,
    }
}

/// Sliding-window sample spatial correlation matrix.
///
/// Maintains `R = (1/L') sum y y^H` over the last `L' <= L` snapshots via
/// exact-conjugate rank-one updates; a periodic full recomputation (every
/// [`DEFAULT_REBUILD_PERIOD`] pushes unless overridden) bounds
/// floating-point drift from the subtract-on-evict path.
#[derive(Debug, Clone)]
pub struct SlidingScm {
    dim: usize,
    window: usize,
    buffer: VecDeque<Vec<Complex64>>,
    sum: HermitianMatrix,
    pushes_since_rebuild: usize,
    rebuild_period: usize,
}

/// Rank-one update drift is ~eps per push; a thousand pushes keeps the
/// accumulated error orders below the solve tolerances.
pub const DEFAULT_REBUILD_PERIOD: usize = 1024;

impl SlidingScm {
    pub fn new(dim: usize, window: usize) -> Result<Self> {
        Self::with_rebuild_period(dim, window, DEFAULT_REBUILD_PERIOD)
    }

    /// Same, with an explicit drift-rebuild period.
    pub fn with_rebuild_period(dim: usize, window: usize, rebuild_period: usize) -> Result<Self> {
        if dim < 1 || window < 1 || rebuild_period < 1 {
            return Err(Error::invalid(
                "SCM needs dim >= 1, window >= 1 and rebuild_period >= 1",
            ));
        }
        Ok(SlidingScm {
            dim,
            window,
            buffer: VecDeque::with_capacity(window + 1),
            sum: HermitianMatrix::zeros(dim),
            pushes_since_rebuild: 0,
            rebuild_period,
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Snapshots currently buffered (`<= window`).
    pub fn fill(&self) -> usize {
        self.buffer.len()
    }

    pub fn push(&mut self, y: &[Complex64]) -> Result<()> {
        if y.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: y.len(),
            });
        }
        self.buffer.push_back(y.to_vec());
        self.sum.rank_one_update(1.0, y);
        if self.buffer.len() > self.window {
            let old = self.buffer.pop_front().expect("buffer non-empty");
            self.sum.rank_one_update(-1.0, &old);
        }
        self.pushes_since_rebuild += 1;
        if self.pushes_since_rebuild >= self.rebuild_period {
            self.rebuild();
        }
        Ok(())
    }

    fn rebuild(&mut self) {
        let mut sum = HermitianMatrix::zeros(self.dim);
        for y in &self.buffer {
            sum.rank_one_update(1.0, y);
        }
        self.sum = sum;
        self.pushes_since_rebuild = 0;
    }

    /// Current estimate, normalized by the fill count while the window is
    /// still filling and by the window length afterwards.
    pub fn current(&self) -> HermitianMatrix {
        let n = self.fill().max(1);
        self.sum.scaled(1.0 / n as f64)
    }
}

/// MPDR weights for one steering direction; `w^H d = 1` by construction.
#[derive(Debug, Clone)]
pub struct BeamWeights {
    w: Vec<Complex64>,
}

impl BeamWeights {
    pub fn entries(&self) -> &[Complex64] {
        &self.w
    }

    /// Quiescent (white-noise-optimal) weights `d / M`.
    pub fn quiescent(d: &SteeringVector) -> Self {
        let m = d.dim() as f64;
        BeamWeights {
            w: d.entries().iter().map(|x| x / m).collect(),
        }
    }

    /// White noise gain `1 / (w^H w)`, linear.
    pub fn wng_linear(&self) -> f64 {
        1.0 / cvec::norm_sqr(&self.w)
    }

    pub fn wng_db(&self) -> f64 {
        10.0 * self.wng_linear().log10()
    }

    /// Beamformer output `w^H y` for one snapshot.
    pub fn output(&self, y: &[Complex64]) -> Complex64 {
        cvec::inner(&self.w, y)
    }
}

/// Minimum-power distortionless weights `w = Q^{-1} d / (d^H Q^{-1} d)`
/// for positive definite `Q` (loading already applied).
pub fn mpdr_weights(q: &HermitianMatrix, d: &SteeringVector) -> Result<BeamWeights> {
    mpdr_weights_prefactored(&q.cholesky()?, d)
}

/// Same as [`mpdr_weights`] from an existing Cholesky factor, so one
/// factorization can serve several steering directions.
pub fn mpdr_weights_prefactored(
    factor: &CholeskyFactor,
    d: &SteeringVector,
) -> Result<BeamWeights> {
    let u = factor.solve(d.entries())?;
    let denom = cvec::inner(d.entries(), &u);
    if denom.norm() <= f64::MIN_POSITIVE {
        return Err(Error::NonFinite {
            op: "mpdr normalization",
        });
    }
    // dividing by the full complex denominator keeps w^H d = 1 to the
    // last ulp even when rounding leaves a tiny imaginary part
    let w = u.iter().map(|x| x / denom).collect();
    Ok(BeamWeights { w })
}

/// Quiescent beampattern `20 log10(|d(theta)^H d_t| / M)` of the target's
/// conventional weights, in dB (0 at the target angle).
pub fn quiescent_beampattern(d_target: &SteeringVector, angle_deg: f64) -> f64 {
    let d = steering_vector(angle_deg, d_target.dim(), d_target.spacing_ratio);
    let m = d_target.dim() as f64;
    20.0 * (cvec::inner(d.entries(), d_target.entries()).norm() / m).log10()
}

/// Capon scanned response `P(theta) = 1 / (d^H Q^{-1} d)` over a grid,
/// in dB normalized to the grid maximum.
pub fn scanned_response(
    q: &HermitianMatrix,
    angles_deg: &[f64],
    spacing_ratio: f64,
) -> Result<Vec<(f64, f64)>> {
    let linear = scanned_response_linear(q, angles_deg, spacing_ratio)?;
    Ok(normalize_scan_db(&linear))
}

/// The unnormalized linear Capon powers over a grid; callers that average
/// scans over time normalize at the end.
pub fn scanned_response_linear(
    q: &HermitianMatrix,
    angles_deg: &[f64],
    spacing_ratio: f64,
) -> Result<Vec<(f64, f64)>> {
    let factor = q.cholesky()?;
    let mut out = Vec::with_capacity(angles_deg.len());
    for &angle in angles_deg {
        let d = steering_vector(angle, q.dim(), spacing_ratio);
        let u = factor.solve(d.entries())?;
        let quad = cvec::inner(d.entries(), &u).re;
        out.push((angle, 1.0 / quad));
    }
    Ok(out)
}

/// Convert linear scan powers to dB relative to the grid maximum.
pub fn normalize_scan_db(linear: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let peak = linear
        .iter()
        .map(|&(_, p)| p)
        .fold(f64::MIN_POSITIVE, f64::max);
    linear
        .iter()
        .map(|&(a, p)| (a, 10.0 * (p / peak).log10()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_snapshot(m: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
        (0..m)
            .map(|_| {
                Complex64::new(
                    rng.random::<f64>() * 2.0 - 1.0,
                    rng.random::<f64>() * 2.0 - 1.0,
                )
            })
            .collect()
    }

    #[test]
    fn broadside_is_all_ones() {
        let d = steering_vector(90.0, 15, 0.5);
        for x in d.entries() {
            assert!((x - Complex64::ONE).norm() < 1e-12);
        }
    }

    #[test]
    fn steering_norm_is_m() {
        for angle in [0.0, 17.0, 60.0, 90.0, 123.4, 180.0] {
            let d = steering_vector(angle, 15, 0.5);
            let n = cvec::norm_sqr(d.entries());
            assert!((n - 15.0).abs() <= 1e-12 * 15.0);
            for x in d.entries() {
                assert!((x.norm() - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn steering_sixty_degrees_two_elements() {
        let d = steering_vector(60.0, 2, 0.5);
        assert!((d.entries()[0] - Complex64::ONE).norm() < 1e-14);
        assert!((d.entries()[1] - Complex64::new(0.0, -1.0)).norm() < 1e-14);
    }

    #[test]
    fn scm_single_push_is_outer_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y = random_snapshot(4, &mut rng);
        let mut scm = SlidingScm::new(4, 8).unwrap();
        scm.push(&y).unwrap();
        let r = scm.current();
        for i in 0..4 {
            for j in 0..4 {
                let expect = y[i] * y[j].conj();
                assert!((r.entry(i, j) - expect).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn scm_matches_batch_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let window = 7;
        let mut scm = SlidingScm::new(5, window).unwrap();
        let mut kept: VecDeque<Vec<Complex64>> = VecDeque::new();
        for _ in 0..40 {
            let y = random_snapshot(5, &mut rng);
            scm.push(&y).unwrap();
            kept.push_back(y);
            if kept.len() > window {
                kept.pop_front();
            }
            let r = scm.current();
            let mut batch = HermitianMatrix::zeros(5);
            for s in &kept {
                batch.rank_one_update(1.0 / kept.len() as f64, s);
            }
            let scale = batch.frobenius_norm().max(1e-300);
            for i in 0..5 {
                for j in 0..5 {
                    assert!((r.entry(i, j) - batch.entry(i, j)).norm() <= 1e-10 * scale);
                }
            }
        }
    }

    #[test]
    fn scm_stays_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut scm = SlidingScm::new(6, 5).unwrap();
        for _ in 0..64 {
            scm.push(&random_snapshot(6, &mut rng)).unwrap();
        }
        let r = scm.current();
        let evd = r.full_evd(false).unwrap();
        assert!(evd.lambda_min() >= -1e-10 * r.trace());
    }

    #[test]
    fn mpdr_white_noise_gives_quiescent() {
        let d = steering_vector(90.0, 15, 0.5);
        let w = mpdr_weights(&HermitianMatrix::identity(15), &d).unwrap();
        for (wi, di) in w.entries().iter().zip(d.entries()) {
            assert!((wi - di / 15.0).norm() < 1e-13);
        }
        assert!((w.wng_linear() - 15.0).abs() < 1e-9);
        assert!((w.wng_db() - 11.7609).abs() < 1e-3);
    }

    #[test]
    fn mpdr_diagonal_closed_form() {
        let qdiag = [1.0, 2.0, 4.0, 0.5];
        let q = HermitianMatrix::from_diagonal(&qdiag);
        let d = steering_vector(73.0, 4, 0.5);
        let w = mpdr_weights(&q, &d).unwrap();
        let denom: f64 = qdiag.iter().map(|x| 1.0 / x).sum();
        for ((wi, di), qi) in w.entries().iter().zip(d.entries()).zip(&qdiag) {
            let expect = di / qi / denom;
            assert!((wi - expect).norm() < 1e-13);
        }
    }

    #[test]
    fn mpdr_distortionless_constraint() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..20 {
            let mut q = HermitianMatrix::scaled_identity(8, 0.1);
            for _ in 0..12 {
                q.rank_one_update(rng.random::<f64>() + 0.1, &random_snapshot(8, &mut rng));
            }
            let d = steering_vector(rng.random::<f64>() * 180.0, 8, 0.5);
            let w = mpdr_weights(&q, &d).unwrap();
            let c = cvec::inner(w.entries(), d.entries());
            assert!((c - Complex64::ONE).norm() <= 1e-12);
            // WNG can never exceed the number of elements
            assert!(w.wng_linear() <= 8.0 + 1e-9);
        }
    }

    #[test]
    fn quiescent_pattern_zero_at_target_and_symmetric() {
        let d = steering_vector(90.0, 15, 0.5);
        assert!(quiescent_beampattern(&d, 90.0).abs() < 1e-12);
        for delta in [1.0, 5.0, 17.5, 44.0] {
            let lo = quiescent_beampattern(&d, 90.0 - delta);
            let hi = quiescent_beampattern(&d, 90.0 + delta);
            assert!((lo - hi).abs() < 1e-10, "asymmetric at +-{delta}");
        }
    }

    #[test]
    fn quiescent_pattern_matches_dirichlet_kernel() {
        let m = 15;
        let d = steering_vector(90.0, m, 0.5);
        for angle in [50.0f64, 70.0, 80.0, 95.0, 140.0] {
            let x = 0.5 * std::f64::consts::PI * angle.to_radians().cos();
            let kernel = ((m as f64 * x).sin() / (m as f64 * x.sin())).abs();
            let expect = 20.0 * kernel.log10();
            let got = quiescent_beampattern(&d, angle);
            assert!(
                (got - expect).abs() < 1e-10,
                "angle {angle}: {got} vs {expect}"
            );
        }
    }

    #[test]
    fn first_sidelobe_near_minus_thirteen_db() {
        let d = steering_vector(90.0, 15, 0.5);
        // search the first sidelobe beyond the first null (cos theta = 2/15)
        let mut peak = f64::NEG_INFINITY;
        let mut u: f64 = 2.0 / 15.0 + 1e-4;
        while u < 4.0 / 15.0 {
            let angle = u.acos().to_degrees();
            peak = peak.max(quiescent_beampattern(&d, angle));
            u += 1e-5;
        }
        assert!(
            (peak - (-13.12)).abs() < 0.05,
            "first sidelobe at {peak} dB"
        );
    }

    #[test]
    fn scan_flat_for_white_noise() {
        let q = HermitianMatrix::identity(15);
        let angles: Vec<f64> = (0..=180).map(|a| a as f64).collect();
        let linear = scanned_response_linear(&q, &angles, 0.5).unwrap();
        for &(_, p) in &linear {
            assert!((p - 1.0 / 15.0).abs() < 1e-12);
        }
        let db = scanned_response(&q, &angles, 0.5).unwrap();
        for &(_, p) in &db {
            assert!(p.abs() < 1e-9);
        }
    }

    #[test]
    fn scan_peaks_at_single_source() {
        let m = 15;
        let d0 = steering_vector(63.0, m, 0.5);
        let mut q = HermitianMatrix::identity(m);
        q.rank_one_update(4.0, d0.entries());
        let angles: Vec<f64> = (0..=360).map(|a| a as f64 * 0.5).collect();
        let scan = scanned_response(&q, &angles, 0.5).unwrap();
        let best = scan
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty grid");
        assert!((best.0 - 63.0).abs() <= 0.5, "peak at {}", best.0);
    }
}
