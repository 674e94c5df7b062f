//! Per-frame beamformer metrics and their ensemble aggregation.

use num_complex::Complex64;

use crate::beamformer::{mpdr_weights, steering_vector, BeamWeights};
use crate::cvec;
use crate::error::Error;
use crate::hermitian::HermitianMatrix;
use crate::loading::LoadingMode;
use crate::scenario::TrueCovariance;
use crate::Result;

/// Everything recorded about one mode at one snapshot.
#[derive(Debug, Clone, Copy)]
pub struct FrameMetrics {
    pub frame: usize,
    pub mu: f64,
    /// Eigenvalue estimates behind the loading (NaN when the mode does
    /// not estimate, e.g. fixed/none/omniscient).
    pub lambda_max_est: f64,
    pub lambda_min_est: f64,
    pub wng_db: f64,
    pub sinr_db: f64,
    pub mse_inst: f64,
    /// Instantaneous off-axis output power; traces accumulate it as a
    /// running mean.
    pub off_axis_power: f64,
    pub mode: LoadingMode,
    /// True while the sliding window is still filling.
    pub warmup: bool,
}

/// Instantaneous squared estimation error `|w^H y - s|^2`.
pub fn output_mse(w: &BeamWeights, y: &[Complex64], s_target: Complex64) -> f64 {
    (w.output(y) - s_target).norm_sqr()
}

/// Output SINR in dB against the scenario's true interference-plus-noise
/// covariance: `sigma_s^2 |w^H d_t|^2 / (w^H R_in w)`.
pub fn output_sinr(w: &BeamWeights, truth: &TrueCovariance) -> Result<f64> {
    let num = truth.sigma_s_sqr * cvec::inner(w.entries(), truth.target.entries()).norm_sqr();
    let rw = truth.r_in.matvec(w.entries())?;
    let den = cvec::inner(w.entries(), &rw).re;
    Ok(10.0 * (num / den).log10())
}

/// Output power of an MPDR beam steered off-axis: weights from `q`
/// toward `angle_deg`, applied to the snapshot `y`.
pub fn off_axis_power(
    q: &HermitianMatrix,
    angle_deg: f64,
    spacing_ratio: f64,
    y: &[Complex64],
) -> Result<f64> {
    let d = steering_vector(angle_deg, q.dim(), spacing_ratio);
    let w = mpdr_weights(q, &d)?;
    Ok(w.output(y).norm_sqr())
}

/// Across-trial aggregate of one metric.
#[derive(Debug, Clone)]
pub struct EnsembleTrace {
    /// Per-frame arithmetic mean.
    pub mean: Vec<f64>,
    pub median: Option<Vec<f64>>,
    pub p5: Option<Vec<f64>>,
    pub p95: Option<Vec<f64>>,
    pub trials: usize,
}

/// Per-frame mean across equal-length trial traces; optionally also the
/// median and 5/95 percentiles. Summation is compensated (Neumaier), so
/// the result is insensitive to trial order at the last-ulp level.
pub fn ensemble_aggregate(traces: &[Vec<f64>], percentiles: bool) -> Result<EnsembleTrace> {
    let trials = traces.len();
    if trials == 0 {
        return Err(Error::invalid("ensemble needs at least one trial"));
    }
    let frames = traces[0].len();
    for t in traces {
        if t.len() != frames {
            return Err(Error::DimensionMismatch {
                expected: frames,
                got: t.len(),
            });
        }
    }
    let mut acc = NeumaierAccumulator::new(frames);
    for t in traces {
        acc.add(t);
    }
    let mean = acc.mean(trials);

    let (median, p5, p95) = if percentiles {
        let mut med = Vec::with_capacity(frames);
        let mut lo = Vec::with_capacity(frames);
        let mut hi = Vec::with_capacity(frames);
        let mut column = vec![0.0f64; trials];
        for f in 0..frames {
            for (c, t) in column.iter_mut().zip(traces) {
                *c = t[f];
            }
            column.sort_by(f64::total_cmp);
            med.push(percentile_sorted(&column, 50.0));
            lo.push(percentile_sorted(&column, 5.0));
            hi.push(percentile_sorted(&column, 95.0));
        }
        (Some(med), Some(lo), Some(hi))
    } else {
        (None, None, None)
    };

    Ok(EnsembleTrace {
        mean,
        median,
        p5,
        p95,
        trials,
    })
}

fn percentile_sorted(sorted: &[f64], pct: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let rank = pct / 100.0 * (n - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Streaming per-frame compensated summation; the simulation folds trial
/// traces into this in a fixed order so worker count never changes the
/// output.
#[derive(Debug, Clone)]
pub struct NeumaierAccumulator {
    sum: Vec<f64>,
    comp: Vec<f64>,
}

impl NeumaierAccumulator {
    pub fn new(frames: usize) -> Self {
        NeumaierAccumulator {
            sum: vec![0.0; frames],
            comp: vec![0.0; frames],
        }
    }

    pub fn add(&mut self, trace: &[f64]) {
        debug_assert_eq!(trace.len(), self.sum.len());
        for ((s, c), &x) in self.sum.iter_mut().zip(self.comp.iter_mut()).zip(trace) {
            let t = *s + x;
            if s.abs() >= x.abs() {
                *c += (*s - t) + x;
            } else {
                *c += (x - t) + *s;
            }
            *s = t;
        }
    }

    pub fn mean(&self, count: usize) -> Vec<f64> {
        self.sum
            .iter()
            .zip(&self.comp)
            .map(|(s, c)| (s + c) / count as f64)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{synthesize_snapshot, true_covariance, ScenarioConfig, SourceSet};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mse_zero_when_exact() {
        let d = steering_vector(90.0, 4, 0.5);
        let w = BeamWeights::quiescent(&d);
        let s = Complex64::new(0.3, -0.7);
        let y: Vec<Complex64> = d.entries().iter().map(|di| di * s).collect();
        assert!(output_mse(&w, &y, s) < 1e-28);
    }

    #[test]
    fn quiescent_mse_is_noise_over_m() {
        let config = ScenarioConfig {
            max_interferers: 0,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let sources = SourceSet::new(&config, &[], &mut rng);
        let w = BeamWeights::quiescent(&sources.target);
        let frames = 100_000;
        let mut acc = 0.0;
        for _ in 0..frames {
            let (y, s) = synthesize_snapshot(&sources, &mut rng);
            acc += output_mse(&w, &y, s) / frames as f64;
        }
        let expect = 1.0 / 15.0;
        assert!(
            (acc - expect).abs() < 0.05 * expect,
            "mean mse {acc} vs {expect}"
        );
    }

    #[test]
    fn quiescent_sinr_is_array_gain_plus_snr() {
        let config = ScenarioConfig {
            max_interferers: 0,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let sources = SourceSet::new(&config, &[], &mut rng);
        let truth = true_covariance(&sources);
        let w = BeamWeights::quiescent(&sources.target);
        let sinr = output_sinr(&w, &truth).unwrap();
        let expect = 10.0 * 15f64.log10() + config.snr_db;
        assert!((sinr - expect).abs() < 1e-9, "{sinr} vs {expect}");
    }

    #[test]
    fn constrained_numerator_is_signal_power() {
        // any distortionless w has |w^H d_t| = 1, so the SINR numerator
        // is exactly sigma_s^2
        let config = ScenarioConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let sources = SourceSet::new(&config, &[], &mut rng);
        let truth = true_covariance(&sources);
        let w = mpdr_weights(&truth.r_y, &sources.target).unwrap();
        let num = truth.sigma_s_sqr * cvec::inner(w.entries(), truth.target.entries()).norm_sqr();
        assert!((num - truth.sigma_s_sqr).abs() < 1e-12);
    }

    #[test]
    fn omniscient_weights_maximize_sinr() {
        let config = ScenarioConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let sources = SourceSet::with_fixed_interferers(&config, &[84.0, 96.0]);
        let truth = true_covariance(&sources);
        let best =
            output_sinr(&mpdr_weights(&truth.r_y, &sources.target).unwrap(), &truth).unwrap();
        // quiescent and randomly perturbed distortionless candidates
        let w_q = BeamWeights::quiescent(&sources.target);
        assert!(output_sinr(&w_q, &truth).unwrap() <= best + 1e-9);
        use rand::Rng;
        for _ in 0..25 {
            let loaded = truth
                .r_y
                .add_scaled_identity(rng.random::<f64>() * 10.0 + 0.01);
            let w = mpdr_weights(&loaded, &sources.target).unwrap();
            assert!(output_sinr(&w, &truth).unwrap() <= best + 1e-9);
        }
    }

    #[test]
    fn off_axis_white_noise_residual() {
        let config = ScenarioConfig {
            snr_db: -300.0,
            max_interferers: 0,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let sources = SourceSet::new(&config, &[], &mut rng);
        let q = HermitianMatrix::identity(15);
        let frames = 50_000;
        let mut acc = 0.0;
        for _ in 0..frames {
            let (y, _) = synthesize_snapshot(&sources, &mut rng);
            acc += off_axis_power(&q, 45.0, 0.5, &y).unwrap() / frames as f64;
        }
        let expect = 1.0 / 15.0;
        assert!((acc - expect).abs() < 0.05 * expect, "{acc} vs {expect}");
    }

    #[test]
    fn off_axis_power_equals_zero_target_mse() {
        // with no source present the off-axis output power is by
        // definition the squared error against a zero target
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut q = HermitianMatrix::identity(8);
        for _ in 0..12 {
            let y: Vec<Complex64> = (0..8)
                .map(|_| {
                    Complex64::new(
                        rng.random::<f64>() * 2.0 - 1.0,
                        rng.random::<f64>() * 2.0 - 1.0,
                    )
                })
                .collect();
            q.rank_one_update(0.5, &y);
        }
        let y: Vec<Complex64> = (0..8)
            .map(|_| Complex64::new(rng.random::<f64>(), -rng.random::<f64>()))
            .collect();
        let p = off_axis_power(&q, 45.0, 0.5, &y).unwrap();
        let w45 = mpdr_weights(&q, &steering_vector(45.0, 8, 0.5)).unwrap();
        let mse = output_mse(&w45, &y, Complex64::ZERO);
        assert_eq!(p.to_bits(), mse.to_bits());
    }

    #[test]
    fn aggregate_identity_and_constants() {
        let single = vec![vec![1.0, 2.0, 3.0]];
        let agg = ensemble_aggregate(&single, false).unwrap();
        assert_eq!(agg.mean, vec![1.0, 2.0, 3.0]);
        assert_eq!(agg.trials, 1);

        let constant = vec![vec![5.0; 4], vec![5.0; 4], vec![5.0; 4]];
        let agg = ensemble_aggregate(&constant, true).unwrap();
        assert_eq!(agg.mean, vec![5.0; 4]);
        assert_eq!(agg.median.unwrap(), vec![5.0; 4]);
    }

    #[test]
    fn aggregate_hand_computed_mean() {
        let traces = vec![vec![1.0, 4.0], vec![3.0, 0.0]];
        let agg = ensemble_aggregate(&traces, false).unwrap();
        assert_eq!(agg.mean, vec![2.0, 2.0]);
    }

    #[test]
    fn aggregate_rejects_ragged_input() {
        let traces = vec![vec![1.0, 2.0], vec![3.0]];
        assert!(ensemble_aggregate(&traces, false).is_err());
    }
}
