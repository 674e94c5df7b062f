//! White-noise-gain floor -> condition-number cap -> minimal diagonal
//! loading.
//!
//! For a Hermitian positive definite matrix with condition number kappa,
//! the Kantorovich inequality bounds the MPDR white noise gain by
//! `W / M >= 4 kappa / (kappa + 1)^2`. Inverting that relation turns a
//! WNG floor `W_min` into the largest admissible condition number
//! `kappa_max`, and the smallest loading `mu` with
//! `(lambda_max + mu) / (lambda_min + mu) <= kappa_max` follows in closed
//! form. Where the extreme eigenvalues come from is a policy choice:
//! exact eigendecomposition, a k-step Lanczos estimate, or the cheaper
//! Gershgorin / trace enclosures (which overestimate the loading).

use crate::error::Error;
use crate::hermitian::{BoundMethod, HermitianMatrix};
use crate::krylov::{ritz_extremes, EigExtremes};
use crate::tolerances::RANK_DEFICIENT_TOL;
use crate::Result;

/// A WNG floor and the condition-number cap it induces.
#[derive(Debug, Clone, Copy)]
pub struct WngBound {
    pub w_min_db: f64,
    pub w_min_linear: f64,
    /// `M / w_min_linear`, the allowed loss factor from the array maximum.
    pub array_gain_limit: f64,
    pub kappa_max: f64,
}

/// Linear WNG floor guaranteed by the Kantorovich inequality for a matrix
/// with condition number `kappa` and an M-element array: `M * 4k/(k+1)^2`.
pub fn wng_floor_from_kappa(kappa: f64, m: usize) -> Result<f64> {
    if kappa.is_nan() || kappa < 1.0 {
        return Err(Error::invalid(format!(
            "condition number must be >= 1, got {kappa}"
        )));
    }
    if kappa.is_infinite() {
        return Ok(0.0);
    }
    Ok(m as f64 * 4.0 * kappa / ((kappa + 1.0) * (kappa + 1.0)))
}

/// Invert the Kantorovich relation: the largest condition number whose
/// guaranteed WNG still meets `w_min_db`. Fails when the floor exceeds
/// the array maximum `10 log10(M)`.
pub fn kappa_max_from_wng(w_min_db: f64, m: usize) -> Result<WngBound> {
    if m < 1 {
        return Err(Error::invalid("array needs at least one element"));
    }
    if !w_min_db.is_finite() {
        return Err(Error::invalid(format!(
            "WNG floor must be finite, got {w_min_db}"
        )));
    }
    let w_min_linear = 10f64.powf(w_min_db / 10.0);
    let m_f = m as f64;
    let max_db = 10.0 * m_f.log10();
    if w_min_linear > m_f * (1.0 + 1e-12) {
        return Err(Error::WngFloorTooHigh { w_min_db, max_db });
    }
    let a_g = (m_f / w_min_linear).max(1.0);
    let kappa_max = (2.0 * a_g - 1.0) + 2.0 * (a_g * (a_g - 1.0)).sqrt();
    Ok(WngBound {
        w_min_db,
        w_min_linear,
        array_gain_limit: a_g,
        kappa_max,
    })
}

/// Smallest `mu >= 0` such that `(lambda_max + mu) / (lambda_min + mu)`
/// does not exceed `kappa_max`; zero when the spectrum already complies.
/// Estimates of `lambda_min` below `RANK_DEFICIENT_TOL * lambda_max` are
/// clamped to zero first.
pub fn required_loading(lambda_max: f64, lambda_min: f64, kappa_max: f64) -> Result<f64> {
    if !(lambda_max.is_finite() && lambda_min.is_finite() && kappa_max.is_finite()) {
        return Err(Error::NonFinite {
            op: "required_loading",
        });
    }
    if lambda_min < 0.0 || lambda_max < lambda_min {
        return Err(Error::invalid(format!(
            "need lambda_max >= lambda_min >= 0, got ({lambda_max}, {lambda_min})"
        )));
    }
    let lambda_min = if lambda_min < RANK_DEFICIENT_TOL * lambda_max {
        0.0
    } else {
        lambda_min
    };
    if kappa_max < 1.0 {
        return Err(Error::invalid("kappa_max must be >= 1"));
    }
    if kappa_max == 1.0 {
        // only a scalar matrix can be perfectly conditioned; no finite
        // loading equalizes distinct eigenvalues
        return if lambda_max > lambda_min {
            Err(Error::InfeasibleLoading)
        } else {
            Ok(0.0)
        };
    }
    Ok(((lambda_max - kappa_max * lambda_min) / (kappa_max - 1.0)).max(0.0))
}

/// How the loading level is chosen each frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LoadingMode {
    /// Extremes from the full eigendecomposition.
    ExactEvd,
    /// Extremes from `k` Lanczos steps.
    Lanczos { k: usize },
    /// Gershgorin disc enclosure.
    Gershgorin,
    /// `[0, trace]` enclosure.
    Trace,
    /// Constant loading, no eigenvalue estimation.
    Fixed { mu: f64 },
    /// No loading at all (the unstable baseline).
    None,
}

impl LoadingMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            LoadingMode::ExactEvd => "exact-evd",
            LoadingMode::Lanczos { .. } => "lanczos",
            LoadingMode::Gershgorin => "gershgorin",
            LoadingMode::Trace => "trace",
            LoadingMode::Fixed { .. } => "fixed",
            LoadingMode::None => "none",
        }
    }
}

impl std::fmt::Display for LoadingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A loading mode paired with the WNG floor it must respect.
#[derive(Debug, Clone, Copy)]
pub struct LoadingPolicy {
    pub mode: LoadingMode,
    pub bound: WngBound,
}

impl LoadingPolicy {
    pub fn new(mode: LoadingMode, bound: WngBound) -> Self {
        LoadingPolicy { mode, bound }
    }
}

/// The loading picked for one matrix: the multiplier, the eigenvalue
/// estimates that produced it (absent for fixed/none), and the mode.
#[derive(Debug, Clone, Copy)]
pub struct LoadingDecision {
    pub mu: f64,
    pub extremes: Option<EigExtremes>,
    pub mode: LoadingMode,
}

/// Estimate the extremes of `r` per the policy's mode and convert them to
/// the minimal loading for the policy's WNG floor.
pub fn compute_loading(r: &HermitianMatrix, policy: &LoadingPolicy) -> Result<LoadingDecision> {
    let kappa_max = policy.bound.kappa_max;
    let extremes = match policy.mode {
        LoadingMode::ExactEvd => {
            let evd = r.full_evd(false)?;
            Some(EigExtremes {
                lambda_min: evd.lambda_min().max(0.0),
                lambda_max: evd.lambda_max(),
                method: BoundMethod::Exact,
                steps_used: 0,
            })
        }
        LoadingMode::Lanczos { k } => Some(ritz_extremes(r, k.min(r.dim()))?),
        LoadingMode::Gershgorin => {
            let b = r.gershgorin_bounds();
            Some(EigExtremes {
                lambda_min: b.lower,
                lambda_max: b.upper,
                method: b.method,
                steps_used: 0,
            })
        }
        LoadingMode::Trace => {
            let b = r.trace_bounds()?;
            Some(EigExtremes {
                lambda_min: b.lower,
                lambda_max: b.upper,
                method: b.method,
                steps_used: 0,
            })
        }
        LoadingMode::Fixed { .. } | LoadingMode::None => None,
    };
    let mu = match policy.mode {
        LoadingMode::Fixed { mu } => {
            if mu < 0.0 {
                return Err(Error::invalid("fixed loading must be nonnegative"));
            }
            mu
        }
        LoadingMode::None => 0.0,
        _ => {
            let e = extremes.expect("estimating modes always produce extremes");
            required_loading(e.lambda_max, e.lambda_min, kappa_max)?
        }
    };
    Ok(LoadingDecision {
        mu,
        extremes,
        mode: policy.mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floor_perfect_conditioning_gives_full_array() {
        assert!((wng_floor_from_kappa(1.0, 15).unwrap() - 15.0).abs() < 1e-12);
    }

    #[test]
    fn floor_vanishes_for_huge_kappa() {
        let w = wng_floor_from_kappa(1e6, 15).unwrap();
        assert!((w - 6.0e-5).abs() < 1e-6);
        assert!(wng_floor_from_kappa(1e12, 15).unwrap() < w);
        assert_eq!(wng_floor_from_kappa(f64::INFINITY, 15).unwrap(), 0.0);
    }

    #[test]
    fn floor_direct_evaluation() {
        // 8 * 4*3/(4^2) = 6
        assert!((wng_floor_from_kappa(3.0, 8).unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn floor_rejects_kappa_below_one() {
        assert!(wng_floor_from_kappa(0.5, 4).is_err());
    }

    #[test]
    fn kappa_max_at_array_limit_is_one() {
        let m = 15;
        let bound = kappa_max_from_wng(10.0 * (m as f64).log10(), m).unwrap();
        assert!((bound.array_gain_limit - 1.0).abs() < 1e-9);
        assert!((bound.kappa_max - 1.0).abs() < 1e-6);
    }

    #[test]
    fn kappa_max_three_db_backoff() {
        // A_G = 10^0.3, kappa_max = 2A_G - 1 + 2 sqrt(A_G (A_G - 1))
        let m = 15;
        let w_min_db = 10.0 * (m as f64).log10() - 3.0;
        let bound = kappa_max_from_wng(w_min_db, m).unwrap();
        let a_g = 10f64.powf(0.3);
        assert!((bound.array_gain_limit - a_g).abs() < 1e-12);
        let expect = (2.0 * a_g - 1.0) + 2.0 * (a_g * (a_g - 1.0)).sqrt();
        assert!((bound.kappa_max - expect).abs() < 1e-12);
        assert!((bound.kappa_max - 5.8089).abs() < 1e-3);
        // the cap must reproduce exactly the requested floor
        let k = bound.kappa_max;
        let ratio = 4.0 * k / ((k + 1.0) * (k + 1.0)) * a_g;
        assert!((ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kappa_max_gain_limit_two() {
        // A_G = 2 -> kappa_max = 3 + 2 sqrt(2), and 4k/(k+1)^2 = 1/2
        let m = 16;
        let w_min_db = 10.0 * (m as f64 / 2.0).log10();
        let bound = kappa_max_from_wng(w_min_db, m).unwrap();
        assert!((bound.kappa_max - (3.0 + 2.0 * 2f64.sqrt())).abs() < 1e-10);
        let k = bound.kappa_max;
        assert!((4.0 * k / ((k + 1.0) * (k + 1.0)) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn kappa_max_rejects_unreachable_floor() {
        let m = 15;
        let err = kappa_max_from_wng(10.0 * (m as f64).log10() + 0.1, m).unwrap_err();
        assert!(matches!(err, Error::WngFloorTooHigh { .. }));
    }

    #[test]
    fn round_trip_over_db_grid() {
        let m = 15;
        let max_db = 10.0 * (m as f64).log10();
        let mut db = 0.0;
        while db <= max_db {
            let bound = kappa_max_from_wng(db, m).unwrap();
            let floor = wng_floor_from_kappa(bound.kappa_max, m).unwrap();
            assert!(
                (floor - bound.w_min_linear).abs() <= 1e-10 * bound.w_min_linear,
                "round trip failed at {db} dB"
            );
            db += 0.05;
        }
    }

    #[test]
    fn loading_zero_when_within_cap() {
        assert_eq!(required_loading(5.0, 1.0, 10.0).unwrap(), 0.0);
    }

    #[test]
    fn loading_hand_checked() {
        let mu = required_loading(10.0, 1.0, 4.0).unwrap();
        assert!((mu - 2.0).abs() < 1e-12);
        assert!(((10.0 + mu) / (1.0 + mu) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn loading_rank_deficient() {
        let mu = required_loading(1.0, 0.0, 3.0).unwrap();
        assert!((mu - 0.5).abs() < 1e-12);
        assert!(((1.0 + mu) / mu - 3.0).abs() < 1e-12);
    }

    #[test]
    fn loading_kappa_one_edge() {
        assert!(matches!(
            required_loading(2.0, 1.0, 1.0),
            Err(Error::InfeasibleLoading)
        ));
        assert_eq!(required_loading(2.0, 2.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn compute_loading_identity_needs_nothing() {
        let bound = kappa_max_from_wng(8.7, 15).unwrap();
        for mode in [
            LoadingMode::ExactEvd,
            LoadingMode::Lanczos { k: 4 },
            LoadingMode::Gershgorin,
            LoadingMode::Trace,
        ] {
            let policy = LoadingPolicy::new(mode, bound);
            let d = compute_loading(&HermitianMatrix::identity(15), &policy).unwrap();
            if matches!(mode, LoadingMode::Trace) {
                // trace enclosure [0, 15] cannot certify identity
                assert!(d.mu > 0.0);
            } else {
                assert!(d.mu.abs() < 1e-9, "{mode}: mu = {}", d.mu);
            }
        }
    }

    #[test]
    fn compute_loading_fixed_and_none() {
        let bound = kappa_max_from_wng(8.7, 15).unwrap();
        let m = HermitianMatrix::identity(15);
        let d = compute_loading(
            &m,
            &LoadingPolicy::new(LoadingMode::Fixed { mu: 0.25 }, bound),
        )
        .unwrap();
        assert_eq!(d.mu, 0.25);
        assert!(d.extremes.is_none());
        let d = compute_loading(&m, &LoadingPolicy::new(LoadingMode::None, bound)).unwrap();
        assert_eq!(d.mu, 0.0);
        assert!(d.extremes.is_none());
    }

    #[test]
    fn relaxed_bounds_load_at_least_exact() {
        use rand::Rng;
        use rand::SeedableRng;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let bound = kappa_max_from_wng(8.7609, 15).unwrap();
        for _ in 0..50 {
            // snapshot-style sample covariance
            let l = 8 + (rng.random::<u32>() % 56) as usize;
            let mut r = HermitianMatrix::zeros(15);
            for _ in 0..l {
                let y: Vec<num_complex::Complex64> = (0..15)
                    .map(|_| {
                        num_complex::Complex64::new(
                            rng.random::<f64>() * 2.0 - 1.0,
                            rng.random::<f64>() * 2.0 - 1.0,
                        )
                    })
                    .collect();
                r.rank_one_update(1.0 / l as f64, &y);
            }
            let mu_exact = compute_loading(&r, &LoadingPolicy::new(LoadingMode::ExactEvd, bound))
                .unwrap()
                .mu;
            let mu_g = compute_loading(&r, &LoadingPolicy::new(LoadingMode::Gershgorin, bound))
                .unwrap()
                .mu;
            let mu_t = compute_loading(&r, &LoadingPolicy::new(LoadingMode::Trace, bound))
                .unwrap()
                .mu;
            let mu_l = compute_loading(
                &r,
                &LoadingPolicy::new(LoadingMode::Lanczos { k: 4 }, bound),
            )
            .unwrap()
            .mu;
            assert!(mu_t >= mu_g - 1e-9, "trace {mu_t} < gershgorin {mu_g}");
            assert!(
                mu_g >= mu_exact - 1e-9,
                "gershgorin {mu_g} < exact {mu_exact}"
            );
            assert!(mu_l <= mu_exact + 1e-9, "lanczos {mu_l} > exact {mu_exact}");
        }
    }
}
