//! Seeded generator of the dynamic birth-death interference scene: up to
//! `max_interferers` statistically independent interferers appear at
//! random angles, hold for a geometrically distributed dwell, disappear,
//! and repeat; the target sits at a fixed angle. Snapshots are
//! narrowband complex baseband with circular complex Gaussian source and
//! noise amplitudes, with the sensor noise power as the 0 dB reference.
//!
//! Interferer angles are confined to the grid where the target's
//! quiescent beampattern sits inside a configured band, which keeps the
//! scene hard (interferers near the main lobe) without letting them sit
//! on top of the target.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::beamformer::{quiescent_beampattern, steering_vector, SteeringVector};
use crate::error::Error;
use crate::hermitian::HermitianMatrix;
use crate::Result;

/// Full description of one simulated experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    /// Array elements.
    pub elements: usize,
    /// Sliding-window length in snapshots.
    pub window: usize,
    /// Snapshots per trial.
    pub frames: usize,
    /// Monte Carlo trials.
    pub trials: usize,
    /// Center frequency, informational only; the geometry lives in
    /// `spacing_ratio`.
    pub f0_hz: f64,
    /// Element spacing over wavelength.
    pub spacing_ratio: f64,
    /// Target SNR in dB relative to unit sensor noise.
    pub snr_db: f64,
    /// Interferer INR in dB relative to unit sensor noise.
    pub inr_db: f64,
    pub target_angle_deg: f64,
    pub max_interferers: usize,
    /// Quiescent-beampattern band (low, high) in dB that interferer
    /// angles must fall into.
    pub quiescent_band_db: (f64, f64),
    /// Angle grid step in degrees (also used by scanned responses).
    pub angle_grid_step_deg: f64,
    /// Mean active dwell in snapshots (geometric law).
    pub mean_active: f64,
    /// Mean inactive dwell in snapshots (geometric law).
    pub mean_inactive: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    /// Desk-scale defaults: the full protocol geometry with the trial
    /// count and duration cut down for quick runs; `paper_scale()`
    /// restores the long configuration.
    fn default() -> Self {
        ScenarioConfig {
            elements: 15,
            window: 37,
            frames: 4000,
            trials: 10,
            f0_hz: 1000.0,
            spacing_ratio: 0.5,
            snr_db: -5.0,
            inr_db: 7.0,
            target_angle_deg: 90.0,
            max_interferers: 2,
            quiescent_band_db: (-13.0, -3.0),
            angle_grid_step_deg: 1.0,
            mean_active: 2000.0,
            mean_inactive: 1000.0,
            seed: 42,
        }
    }
}

impl ScenarioConfig {
    /// The long configuration: 20000 snapshots, 200 trials.
    pub fn paper_scale() -> Self {
        ScenarioConfig {
            frames: 20000,
            trials: 200,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.elements < 1 {
            return Err(Error::Config("elements must be >= 1".into()));
        }
        if self.window < 1 || self.frames < self.window {
            return Err(Error::Config(
                "need frames >= window >= 1 so the window fills at least once".into(),
            ));
        }
        if self.trials < 1 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.quiescent_band_db.0 >= self.quiescent_band_db.1 || self.quiescent_band_db.1 > 0.0 {
            return Err(Error::Config(
                "quiescent band must satisfy low < high <= 0 dB".into(),
            ));
        }
        if self.angle_grid_step_deg.is_nan() || self.angle_grid_step_deg <= 0.0 {
            return Err(Error::Config("angle grid step must be positive".into()));
        }
        if self.mean_active < 1.0 || self.mean_inactive < 1.0 {
            return Err(Error::Config("dwell means must be >= 1 snapshot".into()));
        }
        Ok(())
    }

    pub fn sigma_s_sqr(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }

    pub fn sigma_i_sqr(&self) -> f64 {
        10f64.powf(self.inr_db / 10.0)
    }

    /// The scan grid `0..=180` at `angle_grid_step_deg`.
    pub fn angle_grid(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut a = 0.0f64;
        while a <= 180.0 + 1e-9 {
            out.push(a.min(180.0));
            a += self.angle_grid_step_deg;
        }
        out
    }
}

/// Angles whose quiescent beampattern response falls inside the
/// configured band, excluding the target angle itself. Errors when the
/// band admits no grid angle.
pub fn build_allowed_grid(config: &ScenarioConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let target = steering_vector(
        config.target_angle_deg,
        config.elements,
        config.spacing_ratio,
    );
    let (low, high) = config.quiescent_band_db;
    let allowed: Vec<f64> = config
        .angle_grid()
        .into_iter()
        .filter(|&a| {
            if (a - config.target_angle_deg).abs() < 1e-12 {
                return false;
            }
            let b = quiescent_beampattern(&target, a);
            low <= b && b <= high
        })
        .collect();
    if allowed.is_empty() {
        return Err(Error::Config(format!(
            "no grid angle has a quiescent response inside [{low}, {high}] dB"
        )));
    }
    Ok(allowed)
}

/// One interferer slot of the birth-death process.
#[derive(Debug, Clone)]
pub struct InterfererSlot {
    pub active: bool,
    /// Remaining dwell in snapshots before the next transition.
    pub dwell: u64,
    /// Steering while active.
    pub steering: Option<SteeringVector>,
}

/// The target, the interferer slots and the noise reference.
#[derive(Debug, Clone)]
pub struct SourceSet {
    pub target: SteeringVector,
    pub sigma_s_sqr: f64,
    pub sigma_i_sqr: f64,
    /// Unit sensor noise power; the SNR/INR reference.
    pub sigma_v_sqr: f64,
    pub interferers: Vec<InterfererSlot>,
}

impl SourceSet {
    /// Slots start in the stationary distribution of the birth-death
    /// process: active with probability `mean_active / (mean_active +
    /// mean_inactive)`. Geometric dwells are memoryless, so drawing a
    /// fresh dwell for the initial state is exactly the equilibrium law
    /// and the scene has no startup transient.
    pub fn new(config: &ScenarioConfig, allowed: &[f64], rng: &mut ChaCha8Rng) -> Self {
        let p_active = if config.mean_inactive.is_finite() {
            config.mean_active / (config.mean_active + config.mean_inactive)
        } else {
            0.0
        };
        let interferers = (0..config.max_interferers)
            .map(|_| {
                if !allowed.is_empty() && rng.random::<f64>() < p_active {
                    let idx = rng.random_range(0..allowed.len());
                    InterfererSlot {
                        active: true,
                        dwell: sample_geometric(rng, config.mean_active),
                        steering: Some(steering_vector(
                            allowed[idx],
                            config.elements,
                            config.spacing_ratio,
                        )),
                    }
                } else {
                    InterfererSlot {
                        active: false,
                        dwell: sample_geometric(rng, config.mean_inactive),
                        steering: None,
                    }
                }
            })
            .collect();
        SourceSet {
            target: steering_vector(
                config.target_angle_deg,
                config.elements,
                config.spacing_ratio,
            ),
            sigma_s_sqr: config.sigma_s_sqr(),
            sigma_i_sqr: config.sigma_i_sqr(),
            sigma_v_sqr: 1.0,
            interferers,
        }
    }

    /// Deterministic source set with always-on interferers at the given
    /// angles; used by single-frame scans and ground-truth checks.
    pub fn with_fixed_interferers(config: &ScenarioConfig, angles_deg: &[f64]) -> Self {
        let interferers = angles_deg
            .iter()
            .map(|&a| InterfererSlot {
                active: true,
                dwell: u64::MAX,
                steering: Some(steering_vector(a, config.elements, config.spacing_ratio)),
            })
            .collect();
        SourceSet {
            target: steering_vector(
                config.target_angle_deg,
                config.elements,
                config.spacing_ratio,
            ),
            sigma_s_sqr: config.sigma_s_sqr(),
            sigma_i_sqr: config.sigma_i_sqr(),
            sigma_v_sqr: 1.0,
            interferers,
        }
    }

    pub fn active_angles(&self) -> Vec<f64> {
        self.interferers
            .iter()
            .filter(|s| s.active)
            .filter_map(|s| s.steering.as_ref().map(|d| d.angle_deg))
            .collect()
    }
}

/// Geometric dwell with the given mean (support starts at 1 snapshot).
/// Non-finite or absurd means never expire, which models "no transition".
fn sample_geometric(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if !mean.is_finite() || mean >= 1e18 {
        return u64::MAX;
    }
    let p = (1.0 / mean).clamp(0.0, 1.0);
    if p >= 1.0 {
        return 1;
    }
    let u: f64 = rng.random();
    // inverse CDF of the geometric law on {1, 2, ...}
    let d = ((1.0 - u).ln() / (1.0 - p).ln()).floor() + 1.0;
    if d >= u64::MAX as f64 {
        u64::MAX
    } else {
        d.max(1.0) as u64
    }
}

/// Advance every interferer slot by one snapshot: decrement its dwell
/// and, at zero, flip activity — births draw a fresh uniformly random
/// allowed angle and an active dwell, deaths draw an inactive dwell.
pub fn birth_death_step(
    sources: &mut SourceSet,
    config: &ScenarioConfig,
    allowed: &[f64],
    rng: &mut ChaCha8Rng,
) {
    for slot in sources.interferers.iter_mut() {
        if slot.dwell != u64::MAX {
            slot.dwell = slot.dwell.saturating_sub(1);
        }
        if slot.dwell == 0 {
            if slot.active {
                slot.active = false;
                slot.steering = None;
                slot.dwell = sample_geometric(rng, config.mean_inactive);
            } else {
                let idx = rng.random_range(0..allowed.len());
                slot.active = true;
                slot.steering = Some(steering_vector(
                    allowed[idx],
                    config.elements,
                    config.spacing_ratio,
                ));
                slot.dwell = sample_geometric(rng, config.mean_active);
            }
        }
    }
}

fn circular_gaussian(rng: &mut ChaCha8Rng, power: f64) -> Complex64 {
    let s = (power / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Draw one snapshot `y = d_t s + sum_j d_j s_j + v` with i.i.d. circular
/// complex Gaussian amplitudes; returns the target amplitude alongside
/// for error metrics.
pub fn synthesize_snapshot(
    sources: &SourceSet,
    rng: &mut ChaCha8Rng,
) -> (Vec<Complex64>, Complex64) {
    let s = circular_gaussian(rng, sources.sigma_s_sqr);
    let mut y: Vec<Complex64> = sources.target.entries().iter().map(|d| d * s).collect();
    for slot in &sources.interferers {
        if slot.active {
            let amp = circular_gaussian(rng, sources.sigma_i_sqr);
            let d = slot.steering.as_ref().expect("active slot has steering");
            for (yi, di) in y.iter_mut().zip(d.entries()) {
                *yi += di * amp;
            }
        }
    }
    for yi in y.iter_mut() {
        *yi += circular_gaussian(rng, sources.sigma_v_sqr);
    }
    (y, s)
}

/// Ensemble covariances of the current source set.
#[derive(Debug, Clone)]
pub struct TrueCovariance {
    /// Full observation covariance `R_y`.
    pub r_y: HermitianMatrix,
    /// Interference-plus-noise part (target term removed), for SINR.
    pub r_in: HermitianMatrix,
    pub target: SteeringVector,
    pub sigma_s_sqr: f64,
}

/// `R_y = sigma_s^2 d_t d_t^H + sum_active sigma_i^2 d_j d_j^H + I`.
pub fn true_covariance(sources: &SourceSet) -> TrueCovariance {
    let m = sources.target.dim();
    let mut r_in = HermitianMatrix::scaled_identity(m, sources.sigma_v_sqr);
    for slot in &sources.interferers {
        if slot.active {
            let d = slot.steering.as_ref().expect("active slot has steering");
            r_in.rank_one_update(sources.sigma_i_sqr, d.entries());
        }
    }
    let mut r_y = r_in.clone();
    r_y.rank_one_update(sources.sigma_s_sqr, sources.target.entries());
    TrueCovariance {
        r_y,
        r_in,
        target: sources.target.clone(),
        sigma_s_sqr: sources.sigma_s_sqr,
    }
}

/// Mix a master seed with a trial index so trials are decorrelated but
/// each (seed, trial) pair is exactly reproducible.
pub fn derive_trial_seed(master: u64, trial: usize) -> u64 {
    splitmix64(master.wrapping_add(splitmix64(
        (trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
    )))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One snapshot of a trial stream.
pub struct Snapshot {
    pub y: Vec<Complex64>,
    pub s_target: Complex64,
}

/// Deterministic per-trial snapshot stream: identical (seed, trial)
/// pairs produce bit-identical sequences.
pub struct TrialStream {
    config: ScenarioConfig,
    allowed: Vec<f64>,
    sources: SourceSet,
    rng: ChaCha8Rng,
}

impl TrialStream {
    pub fn new(config: &ScenarioConfig, allowed: &[f64], trial: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_trial_seed(config.seed, trial));
        let sources = SourceSet::new(config, allowed, &mut rng);
        TrialStream {
            config: config.clone(),
            allowed: allowed.to_vec(),
            sources,
            rng,
        }
    }

    /// Advance the birth-death state and draw the next snapshot.
    pub fn next_snapshot(&mut self) -> Snapshot {
        birth_death_step(
            &mut self.sources,
            &self.config,
            &self.allowed,
            &mut self.rng,
        );
        let (y, s_target) = synthesize_snapshot(&self.sources, &mut self.rng);
        Snapshot { y, s_target }
    }

    /// Current source set (valid for the snapshot just drawn).
    pub fn sources(&self) -> &SourceSet {
        &self.sources
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn allowed_grid_members_satisfy_band() {
        let config = ScenarioConfig::default();
        let allowed = build_allowed_grid(&config).unwrap();
        assert!(!allowed.is_empty());
        let target = steering_vector(90.0, config.elements, config.spacing_ratio);
        for &a in &allowed {
            let b = quiescent_beampattern(&target, a);
            assert!((-13.0..=-3.0).contains(&b), "angle {a}: {b} dB");
            assert!((a - 90.0).abs() > 1e-9);
        }
    }

    #[test]
    fn allowed_grid_infeasible_band_errors() {
        let config = ScenarioConfig {
            quiescent_band_db: (-0.5, -0.4),
            ..Default::default()
        };
        assert!(matches!(build_allowed_grid(&config), Err(Error::Config(_))));
    }

    #[test]
    fn allowed_grid_grows_with_band() {
        let narrow = build_allowed_grid(&ScenarioConfig::default()).unwrap();
        let wide = build_allowed_grid(&ScenarioConfig {
            quiescent_band_db: (-60.0, -3.0),
            ..Default::default()
        })
        .unwrap();
        assert!(wide.len() > narrow.len());
        for a in &narrow {
            assert!(wide.contains(a));
        }
    }

    #[test]
    fn infinite_inactive_mean_never_activates() {
        let config = ScenarioConfig {
            mean_inactive: f64::INFINITY,
            ..Default::default()
        };
        let mut r = rng(1);
        let allowed = vec![84.0, 85.0];
        let mut sources = SourceSet::new(&config, &allowed, &mut r);
        for _ in 0..10_000 {
            birth_death_step(&mut sources, &config, &allowed, &mut r);
            assert!(sources.interferers.iter().all(|s| !s.active));
        }
    }

    #[test]
    fn long_run_active_fraction_matches_renewal_ratio() {
        let config = ScenarioConfig {
            mean_active: 300.0,
            mean_inactive: 150.0,
            max_interferers: 1,
            ..Default::default()
        };
        let mut r = rng(7);
        let allowed = vec![84.0];
        let mut sources = SourceSet::new(&config, &allowed, &mut r);
        let steps = 1_000_000;
        let mut active = 0usize;
        for _ in 0..steps {
            birth_death_step(&mut sources, &config, &allowed, &mut r);
            if sources.interferers[0].active {
                active += 1;
            }
        }
        let fraction = active as f64 / steps as f64;
        let expect = 300.0 / 450.0;
        assert!(
            (fraction - expect).abs() < 0.02,
            "active fraction {fraction} vs {expect}"
        );
    }

    #[test]
    fn activations_confined_to_allowed_grid() {
        let config = ScenarioConfig {
            mean_active: 20.0,
            mean_inactive: 10.0,
            ..Default::default()
        };
        let allowed = build_allowed_grid(&config).unwrap();
        let mut r = rng(3);
        let mut sources = SourceSet::new(&config, &allowed, &mut r);
        for _ in 0..20_000 {
            birth_death_step(&mut sources, &config, &allowed, &mut r);
            for angle in sources.active_angles() {
                assert!(allowed.iter().any(|&a| (a - angle).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn noise_only_covariance_is_identity() {
        let config = ScenarioConfig {
            snr_db: -300.0,
            max_interferers: 0,
            ..Default::default()
        };
        let mut r = rng(5);
        let sources = SourceSet::new(&config, &[], &mut r);
        let m = config.elements;
        let mut acc = HermitianMatrix::zeros(m);
        let draws = 100_000;
        for _ in 0..draws {
            let (y, _) = synthesize_snapshot(&sources, &mut r);
            acc.rank_one_update(1.0 / draws as f64, &y);
        }
        for i in 0..m {
            for j in 0..m {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (acc.entry(i, j) - Complex64::new(expect, 0.0)).norm() < 0.02,
                    "entry ({i},{j}) = {}",
                    acc.entry(i, j)
                );
            }
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn single_target_covariance_matches_monte_carlo() {
        let config = ScenarioConfig {
            max_interferers: 0,
            elements: 6,
            ..Default::default()
        };
        let mut r = rng(11);
        let sources = SourceSet::new(&config, &[], &mut r);
        let truth = true_covariance(&sources);
        let m = config.elements;
        let mut acc = HermitianMatrix::zeros(m);
        let mut mean = vec![Complex64::ZERO; m];
        let draws = 100_000;
        for _ in 0..draws {
            let (y, _) = synthesize_snapshot(&sources, &mut r);
            acc.rank_one_update(1.0 / draws as f64, &y);
            for (mi, yi) in mean.iter_mut().zip(&y) {
                *mi += yi / draws as f64;
            }
        }
        for i in 0..m {
            assert!(mean[i].norm() < 0.02, "nonzero mean at {i}");
            for j in 0..m {
                assert!((acc.entry(i, j) - truth.r_y.entry(i, j)).norm() < 0.02);
            }
        }
    }

    #[test]
    fn true_covariance_spectra() {
        let config = ScenarioConfig::default();
        let mut r = rng(13);
        // no sources at all -> identity
        let empty = SourceSet {
            sigma_s_sqr: 0.0,
            ..SourceSet::new(&config, &[], &mut r)
        };
        let t = true_covariance(&empty);
        for i in 0..config.elements {
            for j in 0..config.elements {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((t.r_y.entry(i, j) - Complex64::new(expect, 0.0)).norm() < 1e-14);
            }
        }
        // single target at -5 dB: spectrum {1 x(M-1), 1 + M 10^-0.5}
        let single = SourceSet::new(&config, &[], &mut r);
        let t = true_covariance(&single);
        let evd = t.r_y.full_evd(false).unwrap();
        let boost = 1.0 + 15.0 * 10f64.powf(-0.5);
        assert!((evd.lambda_max() - boost).abs() < 1e-9);
        for &l in &evd.eigenvalues[..14] {
            assert!((l - 1.0).abs() < 1e-9);
        }
        assert!(evd.lambda_min() >= 1.0 - 1e-12);
    }

    #[test]
    fn streams_are_reproducible_and_decorrelated() {
        let config = ScenarioConfig::default();
        let allowed = build_allowed_grid(&config).unwrap();
        let mut a = TrialStream::new(&config, &allowed, 3);
        let mut b = TrialStream::new(&config, &allowed, 3);
        let mut c = TrialStream::new(&config, &allowed, 4);
        let mut any_differs = false;
        for _ in 0..200 {
            let sa = a.next_snapshot();
            let sb = b.next_snapshot();
            let sc = c.next_snapshot();
            for (x, y) in sa.y.iter().zip(&sb.y) {
                assert_eq!(x.re.to_bits(), y.re.to_bits());
                assert_eq!(x.im.to_bits(), y.im.to_bits());
            }
            assert_eq!(sa.s_target, sb.s_target);
            if sa.y[0] != sc.y[0] {
                any_differs = true;
            }
        }
        assert!(any_differs, "trials 3 and 4 produced identical streams");
    }

    #[test]
    fn empirical_snr_inr_within_band() {
        let config = ScenarioConfig::default();
        let mut r = rng(21);
        let sources = SourceSet {
            interferers: vec![InterfererSlot {
                active: true,
                dwell: u64::MAX,
                steering: Some(steering_vector(84.0, config.elements, config.spacing_ratio)),
            }],
            ..SourceSet::new(&config, &[], &mut r)
        };
        let draws = 100_000;
        let mut s_power = 0.0;
        let mut total_power = vec![0.0f64; config.elements];
        for _ in 0..draws {
            let (y, s) = synthesize_snapshot(&sources, &mut r);
            s_power += s.norm_sqr() / draws as f64;
            for (p, yi) in total_power.iter_mut().zip(&y) {
                *p += yi.norm_sqr() / draws as f64;
            }
        }
        let snr_db = 10.0 * s_power.log10();
        assert!(
            (snr_db - config.snr_db).abs() < 0.2,
            "empirical SNR {snr_db}"
        );
        // per-sensor power = sigma_s^2 + sigma_i^2 + 1; solve for INR
        let mean_power: f64 = total_power.iter().sum::<f64>() / config.elements as f64;
        let sigma_i = mean_power - config.sigma_s_sqr() - 1.0;
        let inr_db = 10.0 * sigma_i.log10();
        assert!(
            (inr_db - config.inr_db).abs() < 0.2,
            "empirical INR {inr_db}"
        );
    }
}
