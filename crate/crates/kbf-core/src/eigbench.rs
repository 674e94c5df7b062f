//! Wall-clock comparison of the extreme-eigenvalue estimators.
//!
//! Measures the full eigendecomposition against the k-step Lanczos
//! estimate on SCM-like matrices over a grid of array sizes. Small
//! matrices are timed over an auto-calibrated inner loop so the medians
//! are stable at microsecond scales.

use std::hint::black_box;
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::hermitian::HermitianMatrix;
use crate::krylov::ritz_extremes;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchMethod {
    Lanczos,
    FullEvd,
}

impl BenchMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            BenchMethod::Lanczos => "lanczos",
            BenchMethod::FullEvd => "evd",
        }
    }
}

/// One timing row: method, size, median wall clock, matvec count.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub m: usize,
    pub method: BenchMethod,
    pub median_ns: f64,
    /// Matrix-vector products against the full matrix; the full
    /// eigendecomposition does not decompose into matvecs, so `None`.
    pub matvecs: Option<usize>,
}

/// Sample covariance of 2M random snapshots plus the identity: positive
/// definite, generic spectrum, no Lanczos breakdown.
fn scm_like(m: usize, rng: &mut ChaCha8Rng) -> HermitianMatrix {
    let l = 2 * m;
    let mut r = HermitianMatrix::identity(m);
    for _ in 0..l {
        let y: Vec<Complex64> = (0..m)
            .map(|_| {
                Complex64::new(
                    rng.random::<f64>() * 2.0 - 1.0,
                    rng.random::<f64>() * 2.0 - 1.0,
                )
            })
            .collect();
        r.rank_one_update(1.0 / l as f64, &y);
    }
    r
}

fn median(mut samples: Vec<f64>) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        0.5 * (samples[n / 2 - 1] + samples[n / 2])
    }
}

/// Time one closure: calibrate an inner repetition count so each sample
/// spans at least `target_ns`, then return the median per-call time over
/// `reps` samples.
fn time_median<F: FnMut()>(mut f: F, reps: usize, target_ns: f64) -> f64 {
    // warmup + calibration
    let t0 = Instant::now();
    f();
    let est = t0.elapsed().as_nanos().max(1) as f64;
    let inner = (target_ns / est).ceil().max(1.0) as usize;
    let mut samples = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t = Instant::now();
        for _ in 0..inner {
            f();
        }
        samples.push(t.elapsed().as_nanos() as f64 / inner as f64);
    }
    median(samples)
}

/// Benchmark both methods over the size grid. Only the eigenvalue
/// estimation is timed; weight solves are excluded.
pub fn bench_extreme_eigs(
    sizes: &[usize],
    k: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<BenchRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(sizes.len() * 2);
    for &m in sizes {
        if k > m {
            return Err(crate::Error::invalid(format!(
                "k={k} exceeds matrix size {m}"
            )));
        }
        let q = scm_like(m, &mut rng);
        let lanczos_ns = time_median(
            || {
                black_box(ritz_extremes(black_box(&q), k).expect("pd matrix"));
            },
            reps,
            2.0e6,
        );
        rows.push(BenchRow {
            m,
            method: BenchMethod::Lanczos,
            median_ns: lanczos_ns,
            matvecs: Some(k),
        });
        let evd_ns = time_median(
            || {
                black_box(black_box(&q).full_evd(false).expect("hermitian"));
            },
            reps,
            2.0e6,
        );
        rows.push(BenchRow {
            m,
            method: BenchMethod::FullEvd,
            median_ns: evd_ns,
            matvecs: None,
        });
    }
    Ok(rows)
}

/// Least-squares slope of `ln(median_ns)` against `ln(M)` for one method.
pub fn log_log_slope(rows: &[BenchRow], method: BenchMethod) -> f64 {
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.method == method)
        .map(|r| ((r.m as f64).ln(), r.median_ns.ln()))
        .collect();
    let n = points.len() as f64;
    let mean_x: f64 = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y: f64 = points.iter().map(|p| p.1).sum::<f64>() / n;
    let cov: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let var: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    cov / var
}
