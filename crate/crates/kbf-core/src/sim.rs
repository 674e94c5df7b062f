//! Monte Carlo experiment orchestration.
//!
//! Trials are embarrassingly parallel: each owns its RNG (seeded from the
//! master seed and the trial index), its sliding SCM and its metric
//! buffers. With the `parallel` feature trials run on a rayon pool;
//! without it, or with `workers = 1`, they run sequentially. Either way
//! trials are folded into the ensemble accumulators in trial order, in
//! fixed-size batches, so the output is bit-identical for any worker
//! count.
//!
//! The per-frame pipeline (`FramePipeline`) is shared verbatim with the
//! snapshot-file `process` path: the only difference is where snapshots
//! come from.

use std::path::Path;

use num_complex::Complex64;

use crate::beamformer::{
    mpdr_weights, normalize_scan_db, scanned_response_linear, steering_vector, BeamWeights,
    SlidingScm, SteeringVector,
};
use crate::csvio::{format_f64, write_csv, Row};
use crate::error::Error;
use crate::hermitian::HermitianMatrix;
use crate::loading::{compute_loading, LoadingMode, LoadingPolicy, WngBound};
use crate::metrics::{off_axis_power, output_mse, output_sinr, FrameMetrics, NeumaierAccumulator};
use crate::scenario::{
    build_allowed_grid, true_covariance, ScenarioConfig, SourceSet, TrialStream, TrueCovariance,
};
use crate::Result;

/// Trials aggregated per batch. Fixed so that the fold order (and thus
/// the floating-point result) never depends on the worker count; also
/// caps how many per-trial traces are alive at once.
const TRIAL_BATCH: usize = 32;

/// Label used for the true-statistics beamformer trace.
pub const OMNISCIENT_LABEL: &str = "omniscient";

/// Full simulation request.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub scenario: ScenarioConfig,
    /// Loading modes to run side by side; the omniscient trace is always
    /// produced as well.
    pub modes: Vec<LoadingMode>,
    pub bound: WngBound,
    /// Off-axis probe direction for the output-power trace.
    pub off_axis_angle_deg: f64,
    /// 0 = one rayon worker per core, 1 = strictly sequential, n = pool
    /// of n workers.
    pub workers: usize,
    /// Frames between time-averaged scan accumulations (trial 0 only).
    pub scan_stride: usize,
    /// Retain every trial's per-frame metrics (desk scale only).
    pub keep_trial_traces: bool,
    /// Retain trial 0's raw snapshots, e.g. to write a snapshot file.
    pub keep_trial0_snapshots: bool,
}

impl SimConfig {
    pub fn new(scenario: ScenarioConfig, modes: Vec<LoadingMode>, bound: WngBound) -> Self {
        SimConfig {
            scenario,
            modes,
            bound,
            off_axis_angle_deg: 45.0,
            workers: 0,
            scan_stride: 50,
            keep_trial_traces: false,
            keep_trial0_snapshots: false,
        }
    }

    fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.modes.is_empty() {
            return Err(Error::Config(
                "at least one loading mode is required".into(),
            ));
        }
        let mut labels: Vec<&str> = self.modes.iter().map(|m| m.as_str()).collect();
        labels.sort_unstable();
        labels.dedup();
        if labels.len() != self.modes.len() {
            return Err(Error::Config("duplicate loading modes in the run".into()));
        }
        if self.scan_stride == 0 {
            return Err(Error::Config("scan_stride must be >= 1".into()));
        }
        for mode in &self.modes {
            if let LoadingMode::Lanczos { k } = mode {
                if *k < 1 || *k > self.scenario.elements {
                    return Err(Error::Config(format!(
                        "lanczos steps k={k} must be in 1..={}",
                        self.scenario.elements
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Per-trial, per-mode metric arrays (length = frames).
#[derive(Debug, Clone)]
pub struct ModeTrialTrace {
    pub label: String,
    pub mu: Vec<f64>,
    pub lambda_max: Vec<f64>,
    pub lambda_min: Vec<f64>,
    pub wng_db: Vec<f64>,
    pub sinr_db: Vec<f64>,
    pub mse: Vec<f64>,
    /// Running mean of the off-axis output power from frame 0.
    pub off_axis: Vec<f64>,
}

impl ModeTrialTrace {
    fn with_capacity(label: String, frames: usize) -> Self {
        ModeTrialTrace {
            label,
            mu: Vec::with_capacity(frames),
            lambda_max: Vec::with_capacity(frames),
            lambda_min: Vec::with_capacity(frames),
            wng_db: Vec::with_capacity(frames),
            sinr_db: Vec::with_capacity(frames),
            mse: Vec::with_capacity(frames),
            off_axis: Vec::with_capacity(frames),
        }
    }

    fn push(&mut self, fm: &FrameMetrics, off_axis_running: f64) {
        self.mu.push(fm.mu);
        self.lambda_max.push(fm.lambda_max_est);
        self.lambda_min.push(fm.lambda_min_est);
        self.wng_db.push(fm.wng_db);
        self.sinr_db.push(fm.sinr_db);
        self.mse.push(fm.mse_inst);
        self.off_axis.push(off_axis_running);
    }
}

/// Ensemble (across-trial mean) traces for one mode.
#[derive(Debug, Clone)]
pub struct ModeEnsemble {
    pub label: String,
    pub trials: usize,
    pub mu: Vec<f64>,
    pub lambda_max: Vec<f64>,
    pub lambda_min: Vec<f64>,
    pub wng_db: Vec<f64>,
    pub sinr_db: Vec<f64>,
    pub mse: Vec<f64>,
    pub off_axis: Vec<f64>,
}

/// One scanned-response table: the ground-truth and omniscient curves
/// plus one per adaptive mode, all in dB normalized per curve.
#[derive(Debug, Clone)]
pub struct ScanTable {
    pub angles_deg: Vec<f64>,
    pub ground_truth_db: Vec<f64>,
    pub omniscient_db: Vec<f64>,
    pub per_mode_db: Vec<(String, Vec<f64>)>,
}

/// Everything a simulation run produces.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub labels: Vec<String>,
    pub ensembles: Vec<ModeEnsemble>,
    /// Scan at the last frame of trial 0.
    pub scan_final: ScanTable,
    /// Scan averaged over trial 0's post-warmup frames (every
    /// `scan_stride` frames).
    pub scan_timeavg: ScanTable,
    pub trial_traces: Option<Vec<Vec<ModeTrialTrace>>>,
    pub trial0_snapshots: Option<Vec<Vec<Complex64>>>,
}

/// The per-frame processing every snapshot goes through, independent of
/// where the snapshot came from: update the sliding SCM, pick the loading
/// per mode, form the loaded matrix and the MPDR weights.
pub struct FramePipeline {
    scm: SlidingScm,
    policies: Vec<LoadingPolicy>,
    target: SteeringVector,
}

/// One mode's outcome at one frame.
pub struct ModeFrame {
    pub mu: f64,
    pub lambda_max_est: f64,
    pub lambda_min_est: f64,
    pub weights: BeamWeights,
    /// Loaded matrix the weights came from (`R_hat + mu I`).
    pub q: HermitianMatrix,
    /// True when the positive-definite solve failed and the quiescent
    /// weights were substituted (unloaded modes on a rank-deficient SCM).
    pub fallback: bool,
}

impl FramePipeline {
    pub fn new(
        elements: usize,
        window: usize,
        target_angle_deg: f64,
        spacing_ratio: f64,
        policies: Vec<LoadingPolicy>,
    ) -> Result<Self> {
        Ok(FramePipeline {
            scm: SlidingScm::new(elements, window)?,
            policies,
            target: steering_vector(target_angle_deg, elements, spacing_ratio),
        })
    }

    pub fn target(&self) -> &SteeringVector {
        &self.target
    }

    /// True while the sliding window is still filling.
    pub fn warmup(&self) -> bool {
        self.scm.fill() < self.scm.window()
    }

    /// Ingest one snapshot and compute every mode's loading and weights.
    pub fn step(&mut self, y: &[Complex64]) -> Result<Vec<ModeFrame>> {
        self.scm.push(y)?;
        let r_hat = self.scm.current();
        let mut out = Vec::with_capacity(self.policies.len());
        for policy in &self.policies {
            let decision = compute_loading(&r_hat, policy)?;
            let q = if decision.mu > 0.0 {
                r_hat.add_scaled_identity(decision.mu)
            } else {
                r_hat.clone()
            };
            let (weights, fallback) = match mpdr_weights(&q, &self.target) {
                Ok(w) => (w, false),
                // an unloaded solve on a rank-deficient SCM: the ordinary
                // failure the loaded modes exist to prevent
                Err(Error::NotPositiveDefinite { .. }) => {
                    (BeamWeights::quiescent(&self.target), true)
                }
                Err(e) => return Err(e),
            };
            let (lmax, lmin) = decision
                .extremes
                .map(|e| (e.lambda_max, e.lambda_min))
                .unwrap_or((f64::NAN, f64::NAN));
            out.push(ModeFrame {
                mu: decision.mu,
                lambda_max_est: lmax,
                lambda_min_est: lmin,
                weights,
                q,
                fallback,
            });
        }
        Ok(out)
    }
}

struct TrialResult {
    traces: Vec<ModeTrialTrace>,
    scan_final: Option<ScanTable>,
    scan_timeavg: Option<ScanTable>,
    snapshots: Option<Vec<Vec<Complex64>>>,
}

/// Linear-power scan accumulator for the time-averaged table.
struct ScanAccumulator {
    angles: Vec<f64>,
    ground_truth: Vec<f64>,
    omniscient: Vec<f64>,
    per_mode: Vec<Vec<f64>>,
}

impl ScanAccumulator {
    fn new(angles: Vec<f64>, modes: usize) -> Self {
        let n = angles.len();
        ScanAccumulator {
            angles,
            ground_truth: vec![0.0; n],
            omniscient: vec![0.0; n],
            per_mode: vec![vec![0.0; n]; modes],
        }
    }

    fn add(&mut self, truth: &TrueCovariance, frames: &[ModeFrame], spacing: f64) -> Result<()> {
        let gt = scanned_response_linear(&truth.r_y, &self.angles, spacing)?;
        for (acc, (_, p)) in self.ground_truth.iter_mut().zip(&gt) {
            *acc += p;
        }
        // the omniscient beamformer scans with the same true statistics
        for (acc, (_, p)) in self.omniscient.iter_mut().zip(&gt) {
            *acc += p;
        }
        for (mode_acc, frame) in self.per_mode.iter_mut().zip(frames) {
            match scanned_response_linear(&frame.q, &self.angles, spacing) {
                Ok(scan) => {
                    for (acc, (_, p)) in mode_acc.iter_mut().zip(&scan) {
                        *acc += p;
                    }
                }
                Err(Error::NotPositiveDefinite { .. }) => {
                    for acc in mode_acc.iter_mut() {
                        *acc += f64::NAN;
                    }
                }
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }

    fn into_table(self, labels: &[String]) -> ScanTable {
        let to_db = |acc: &[f64]| -> Vec<f64> {
            let linear: Vec<(f64, f64)> =
                self.angles.iter().zip(acc).map(|(&a, &p)| (a, p)).collect();
            normalize_scan_db(&linear)
                .into_iter()
                .map(|(_, p)| p)
                .collect()
        };
        ScanTable {
            ground_truth_db: to_db(&self.ground_truth),
            omniscient_db: to_db(&self.omniscient),
            per_mode_db: labels
                .iter()
                .cloned()
                .zip(self.per_mode.iter().map(|acc| to_db(acc)))
                .collect(),
            angles_deg: self.angles,
        }
    }
}

fn run_trial(config: &SimConfig, allowed: &[f64], trial: usize) -> Result<TrialResult> {
    let sc = &config.scenario;
    let frames = sc.frames;
    let mut stream = TrialStream::new(sc, allowed, trial);
    let mut pipeline = FramePipeline::new(
        sc.elements,
        sc.window,
        sc.target_angle_deg,
        sc.spacing_ratio,
        config
            .modes
            .iter()
            .map(|&mode| LoadingPolicy::new(mode, config.bound))
            .collect(),
    )?;

    let mut traces: Vec<ModeTrialTrace> = config
        .modes
        .iter()
        .map(|m| ModeTrialTrace::with_capacity(m.as_str().to_string(), frames))
        .chain(std::iter::once(ModeTrialTrace::with_capacity(
            OMNISCIENT_LABEL.to_string(),
            frames,
        )))
        .collect();
    let mut off_axis_sums = vec![0.0f64; config.modes.len() + 1];

    let is_scan_trial = trial == 0;
    let mut timeavg =
        is_scan_trial.then(|| ScanAccumulator::new(sc.angle_grid(), config.modes.len()));
    let mut final_scan: Option<ScanTable> = None;
    let mut snapshots: Option<Vec<Vec<Complex64>>> =
        (is_scan_trial && config.keep_trial0_snapshots).then(|| Vec::with_capacity(frames));

    let labels: Vec<String> = config
        .modes
        .iter()
        .map(|m| m.as_str().to_string())
        .collect();

    for frame in 0..frames {
        let snap = stream.next_snapshot();
        if let Some(buf) = snapshots.as_mut() {
            buf.push(snap.y.clone());
        }
        let mode_frames = pipeline.step(&snap.y)?;
        let warmup = pipeline.warmup();
        let truth = true_covariance(stream.sources());

        for (idx, mf) in mode_frames.iter().enumerate() {
            let off_inst =
                match off_axis_power(&mf.q, config.off_axis_angle_deg, sc.spacing_ratio, &snap.y) {
                    Ok(p) => p,
                    Err(Error::NotPositiveDefinite { .. }) => {
                        let d45 = steering_vector(
                            config.off_axis_angle_deg,
                            sc.elements,
                            sc.spacing_ratio,
                        );
                        BeamWeights::quiescent(&d45).output(&snap.y).norm_sqr()
                    }
                    Err(e) => return Err(e),
                };
            off_axis_sums[idx] += off_inst;
            let fm = FrameMetrics {
                frame,
                mu: mf.mu,
                lambda_max_est: mf.lambda_max_est,
                lambda_min_est: mf.lambda_min_est,
                wng_db: mf.weights.wng_db(),
                sinr_db: output_sinr(&mf.weights, &truth)?,
                mse_inst: output_mse(&mf.weights, &snap.y, snap.s_target),
                off_axis_power: off_inst,
                mode: config.modes[idx],
                warmup,
            };
            traces[idx].push(&fm, off_axis_sums[idx] / (frame + 1) as f64);
        }

        // omniscient: MPDR from the true ensemble covariance
        let w_omni = mpdr_weights(&truth.r_y, pipeline.target())?;
        let off_inst = off_axis_power(
            &truth.r_y,
            config.off_axis_angle_deg,
            sc.spacing_ratio,
            &snap.y,
        )?;
        let omni_idx = config.modes.len();
        off_axis_sums[omni_idx] += off_inst;
        let fm = FrameMetrics {
            frame,
            mu: 0.0,
            lambda_max_est: f64::NAN,
            lambda_min_est: f64::NAN,
            wng_db: w_omni.wng_db(),
            sinr_db: output_sinr(&w_omni, &truth)?,
            mse_inst: output_mse(&w_omni, &snap.y, snap.s_target),
            off_axis_power: off_inst,
            mode: LoadingMode::None,
            warmup,
        };
        traces[omni_idx].push(&fm, off_axis_sums[omni_idx] / (frame + 1) as f64);

        if let Some(acc) = timeavg.as_mut() {
            if !warmup && frame.is_multiple_of(config.scan_stride) {
                acc.add(&truth, &mode_frames, sc.spacing_ratio)?;
            }
        }
        if is_scan_trial && frame + 1 == frames {
            let mut one = ScanAccumulator::new(sc.angle_grid(), config.modes.len());
            one.add(&truth, &mode_frames, sc.spacing_ratio)?;
            final_scan = Some(one.into_table(&labels));
        }
    }

    Ok(TrialResult {
        traces,
        scan_final: final_scan,
        scan_timeavg: timeavg.map(|acc| acc.into_table(&labels)),
        snapshots,
    })
}

/// Ensemble accumulators for one mode.
struct ModeAccumulator {
    label: String,
    mu: NeumaierAccumulator,
    lambda_max: NeumaierAccumulator,
    lambda_min: NeumaierAccumulator,
    wng_db: NeumaierAccumulator,
    sinr_db: NeumaierAccumulator,
    mse: NeumaierAccumulator,
    off_axis: NeumaierAccumulator,
}

impl ModeAccumulator {
    fn new(label: String, frames: usize) -> Self {
        ModeAccumulator {
            label,
            mu: NeumaierAccumulator::new(frames),
            lambda_max: NeumaierAccumulator::new(frames),
            lambda_min: NeumaierAccumulator::new(frames),
            wng_db: NeumaierAccumulator::new(frames),
            sinr_db: NeumaierAccumulator::new(frames),
            mse: NeumaierAccumulator::new(frames),
            off_axis: NeumaierAccumulator::new(frames),
        }
    }

    fn add(&mut self, t: &ModeTrialTrace) {
        self.mu.add(&t.mu);
        self.lambda_max.add(&t.lambda_max);
        self.lambda_min.add(&t.lambda_min);
        self.wng_db.add(&t.wng_db);
        self.sinr_db.add(&t.sinr_db);
        self.mse.add(&t.mse);
        self.off_axis.add(&t.off_axis);
    }

    fn finish(self, trials: usize) -> ModeEnsemble {
        ModeEnsemble {
            label: self.label,
            trials,
            mu: self.mu.mean(trials),
            lambda_max: self.lambda_max.mean(trials),
            lambda_min: self.lambda_min.mean(trials),
            wng_db: self.wng_db.mean(trials),
            sinr_db: self.sinr_db.mean(trials),
            mse: self.mse.mean(trials),
            off_axis: self.off_axis.mean(trials),
        }
    }
}

/// Run the full Monte Carlo experiment.
pub fn run_simulation(config: &SimConfig) -> Result<SimOutput> {
    config.validate()?;
    let sc = &config.scenario;
    let allowed = build_allowed_grid(sc)?;

    let labels: Vec<String> = config
        .modes
        .iter()
        .map(|m| m.as_str().to_string())
        .chain(std::iter::once(OMNISCIENT_LABEL.to_string()))
        .collect();
    let mut accumulators: Vec<ModeAccumulator> = labels
        .iter()
        .map(|l| ModeAccumulator::new(l.clone(), sc.frames))
        .collect();
    let mut trial_traces: Option<Vec<Vec<ModeTrialTrace>>> =
        config.keep_trial_traces.then(Vec::new);
    let mut scan_final = None;
    let mut scan_timeavg = None;
    let mut trial0_snapshots = None;

    let pool = build_pool(config.workers)?;

    let mut start = 0usize;
    while start < sc.trials {
        let end = (start + TRIAL_BATCH).min(sc.trials);
        let batch: Vec<usize> = (start..end).collect();
        let results = execute_batch(config, &allowed, &batch, pool.as_ref())?;
        for mut result in results {
            for (acc, trace) in accumulators.iter_mut().zip(&result.traces) {
                acc.add(trace);
            }
            if let Some(s) = result.scan_final.take() {
                scan_final = Some(s);
            }
            if let Some(s) = result.scan_timeavg.take() {
                scan_timeavg = Some(s);
            }
            if let Some(s) = result.snapshots.take() {
                trial0_snapshots = Some(s);
            }
            if let Some(keep) = trial_traces.as_mut() {
                keep.push(result.traces);
            }
        }
        start = end;
    }

    Ok(SimOutput {
        labels,
        ensembles: accumulators
            .into_iter()
            .map(|a| a.finish(sc.trials))
            .collect(),
        scan_final: scan_final.expect("trial 0 always produces the final scan"),
        scan_timeavg: scan_timeavg.expect("trial 0 always produces the averaged scan"),
        trial_traces,
        trial0_snapshots,
    })
}

#[cfg(feature = "parallel")]
type Pool = rayon::ThreadPool;
#[cfg(not(feature = "parallel"))]
type Pool = ();

#[cfg(feature = "parallel")]
fn build_pool(workers: usize) -> Result<Option<Pool>> {
    if workers == 1 {
        return Ok(None);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map(Some)
        .map_err(|e| Error::Config(format!("failed to build worker pool: {e}")))
}

#[cfg(not(feature = "parallel"))]
fn build_pool(_workers: usize) -> Result<Option<Pool>> {
    Ok(None)
}

#[cfg(feature = "parallel")]
fn execute_batch(
    config: &SimConfig,
    allowed: &[f64],
    batch: &[usize],
    pool: Option<&Pool>,
) -> Result<Vec<TrialResult>> {
    match pool {
        Some(pool) => pool.install(|| {
            use rayon::prelude::*;
            batch
                .par_iter()
                .map(|&trial| run_trial(config, allowed, trial))
                .collect()
        }),
        None => batch
            .iter()
            .map(|&trial| run_trial(config, allowed, trial))
            .collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn execute_batch(
    config: &SimConfig,
    allowed: &[f64],
    batch: &[usize],
    _pool: Option<&Pool>,
) -> Result<Vec<TrialResult>> {
    batch
        .iter()
        .map(|&trial| run_trial(config, allowed, trial))
        .collect()
}

const METRIC_COLUMNS: [&str; 8] = [
    "frame",
    "mu",
    "lambda_max",
    "lambda_min",
    "wng_db",
    "sinr_db",
    "mse",
    "off_axis_power",
];

/// Write `metrics_<label>.csv` per mode plus `scan_final.csv` and
/// `scan_timeavg.csv` under `out_dir`.
pub fn write_outputs(output: &SimOutput, out_dir: &Path) -> Result<()> {
    for ens in &output.ensembles {
        let rows: Vec<Row> = (0..ens.mu.len())
            .map(|f| {
                vec![
                    f.to_string(),
                    format_f64(ens.mu[f]),
                    format_f64(ens.lambda_max[f]),
                    format_f64(ens.lambda_min[f]),
                    format_f64(ens.wng_db[f]),
                    format_f64(ens.sinr_db[f]),
                    format_f64(ens.mse[f]),
                    format_f64(ens.off_axis[f]),
                ]
            })
            .collect();
        write_csv(
            &out_dir.join(format!("metrics_{}.csv", ens.label)),
            &METRIC_COLUMNS,
            &rows,
        )?;
    }
    write_scan_csv(&output.scan_final, &out_dir.join("scan_final.csv"))?;
    write_scan_csv(&output.scan_timeavg, &out_dir.join("scan_timeavg.csv"))?;
    Ok(())
}

pub fn write_scan_csv(scan: &ScanTable, path: &Path) -> Result<()> {
    let mut columns: Vec<String> = vec![
        "angle_deg".to_string(),
        "ground_truth_db".to_string(),
        "omniscient_db".to_string(),
    ];
    for (label, _) in &scan.per_mode_db {
        columns.push(format!("{label}_db"));
    }
    let column_refs: Vec<&str> = columns.iter().map(String::as_str).collect();
    let rows: Vec<Row> = (0..scan.angles_deg.len())
        .map(|i| {
            let mut row = vec![
                format_f64(scan.angles_deg[i]),
                format_f64(scan.ground_truth_db[i]),
                format_f64(scan.omniscient_db[i]),
            ];
            for (_, col) in &scan.per_mode_db {
                row.push(format_f64(col[i]));
            }
            row
        })
        .collect();
    write_csv(path, &column_refs, &rows)
}

/// Build the scan table for a frozen scene: feed `frames` snapshots from
/// a fixed source set through the pipeline and scan at the last frame.
/// This is the single-frame counterpart of the full simulation's
/// `scan_final` output.
pub fn run_fixed_scene_scan(
    scenario: &ScenarioConfig,
    interferer_angles: &[f64],
    modes: &[LoadingMode],
    bound: WngBound,
) -> Result<ScanTable> {
    scenario.validate()?;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(crate::scenario::derive_trial_seed(
        scenario.seed,
        0,
    ));
    let sources = SourceSet::with_fixed_interferers(scenario, interferer_angles);
    let mut pipeline = FramePipeline::new(
        scenario.elements,
        scenario.window,
        scenario.target_angle_deg,
        scenario.spacing_ratio,
        modes
            .iter()
            .map(|&mode| LoadingPolicy::new(mode, bound))
            .collect(),
    )?;
    let labels: Vec<String> = modes.iter().map(|m| m.as_str().to_string()).collect();
    let truth = true_covariance(&sources);
    let mut last = None;
    for _ in 0..scenario.frames {
        let (y, _) = crate::scenario::synthesize_snapshot(&sources, &mut rng);
        last = Some(pipeline.step(&y)?);
    }
    let mode_frames = last.expect("frames >= 1");
    let mut acc = ScanAccumulator::new(scenario.angle_grid(), modes.len());
    acc.add(&truth, &mode_frames, scenario.spacing_ratio)?;
    Ok(acc.into_table(&labels))
}

/// Settings for processing an external snapshot file.
#[derive(Debug, Clone)]
pub struct ProcessConfig {
    pub window: usize,
    pub mode: LoadingMode,
    pub bound: WngBound,
    /// Steering direction whose WNG is tracked.
    pub steer_angle_deg: f64,
    pub spacing_ratio: f64,
    /// Scan grid for the bearing-time record.
    pub angles_deg: Vec<f64>,
    /// Frames between BTR scans (1 = every frame).
    pub scan_stride: usize,
}

/// Per-frame loading/WNG row from the `process` path.
#[derive(Debug, Clone, Copy)]
pub struct ProcessFrameRow {
    pub frame: usize,
    pub mu: f64,
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub wng_db: f64,
}

/// Output of processing one snapshot stream.
#[derive(Debug, Clone)]
pub struct ProcessOutput {
    pub metrics: Vec<ProcessFrameRow>,
    /// Long-format bearing-time record: (frame, angle, power dB
    /// normalized per frame).
    pub btr: Vec<(usize, f64, f64)>,
}

/// Run the shared per-frame pipeline over snapshots from anywhere (a
/// `KBF1` file, a synthesizer, a test vector). Exactly the same code path
/// the simulator uses; only the snapshot source differs.
pub fn process_snapshots<I>(
    config: &ProcessConfig,
    elements: usize,
    snapshots: I,
) -> Result<ProcessOutput>
where
    I: IntoIterator<Item = Result<Vec<Complex64>>>,
{
    if config.scan_stride == 0 {
        return Err(Error::Config("scan_stride must be >= 1".into()));
    }
    let mut pipeline = FramePipeline::new(
        elements,
        config.window,
        config.steer_angle_deg,
        config.spacing_ratio,
        vec![LoadingPolicy::new(config.mode, config.bound)],
    )?;
    let mut metrics = Vec::new();
    let mut btr = Vec::new();
    for (frame, snap) in snapshots.into_iter().enumerate() {
        let y = snap?;
        let mode_frames = pipeline.step(&y)?;
        let mf = &mode_frames[0];
        metrics.push(ProcessFrameRow {
            frame,
            mu: mf.mu,
            lambda_max: mf.lambda_max_est,
            lambda_min: mf.lambda_min_est,
            wng_db: mf.weights.wng_db(),
        });
        if frame.is_multiple_of(config.scan_stride) {
            match crate::beamformer::scanned_response(
                &mf.q,
                &config.angles_deg,
                config.spacing_ratio,
            ) {
                Ok(scan) => {
                    for (angle, db) in scan {
                        btr.push((frame, angle, db));
                    }
                }
                Err(Error::NotPositiveDefinite { .. }) => {
                    for &angle in &config.angles_deg {
                        btr.push((frame, angle, f64::NAN));
                    }
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(ProcessOutput { metrics, btr })
}

/// Write the `process` outputs: `btr.csv` and `metrics.csv`.
pub fn write_process_outputs(output: &ProcessOutput, out_dir: &Path) -> Result<()> {
    let rows: Vec<Row> = output
        .btr
        .iter()
        .map(|&(frame, angle, db)| vec![frame.to_string(), format_f64(angle), format_f64(db)])
        .collect();
    write_csv(
        &out_dir.join("btr.csv"),
        &["frame", "angle_deg", "power_db"],
        &rows,
    )?;
    let rows: Vec<Row> = output
        .metrics
        .iter()
        .map(|r| {
            vec![
                r.frame.to_string(),
                format_f64(r.mu),
                format_f64(r.lambda_max),
                format_f64(r.lambda_min),
                format_f64(r.wng_db),
            ]
        })
        .collect();
    write_csv(
        &out_dir.join("metrics.csv"),
        &["frame", "mu", "lambda_max", "lambda_min", "wng_db"],
        &rows,
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loading::kappa_max_from_wng;

    fn small_config(workers: usize) -> SimConfig {
        let scenario = ScenarioConfig {
            frames: 150,
            trials: 5,
            window: 37,
            mean_active: 60.0,
            mean_inactive: 30.0,
            seed: 99,
            ..Default::default()
        };
        let bound = kappa_max_from_wng(8.7609, scenario.elements).unwrap();
        let mut cfg = SimConfig::new(
            scenario,
            vec![LoadingMode::Lanczos { k: 4 }, LoadingMode::Gershgorin],
            bound,
        );
        cfg.workers = workers;
        cfg.scan_stride = 25;
        cfg
    }

    #[test]
    fn output_shapes_and_labels() {
        let cfg = small_config(1);
        let out = run_simulation(&cfg).unwrap();
        assert_eq!(out.labels, vec!["lanczos", "gershgorin", "omniscient"]);
        for ens in &out.ensembles {
            assert_eq!(ens.mu.len(), 150);
            assert_eq!(ens.trials, 5);
        }
        assert_eq!(out.scan_final.angles_deg.len(), 181);
        assert_eq!(out.scan_final.per_mode_db.len(), 2);
    }

    #[test]
    fn identical_across_worker_counts() {
        let outs: Vec<SimOutput> = [1usize, 2, 8]
            .iter()
            .map(|&w| run_simulation(&small_config(w)).unwrap())
            .collect();
        for other in &outs[1..] {
            for (a, b) in outs[0].ensembles.iter().zip(&other.ensembles) {
                assert_eq!(a.label, b.label);
                for (x, y) in a.wng_db.iter().zip(&b.wng_db) {
                    assert_eq!(x.to_bits(), y.to_bits());
                }
                for (x, y) in a.mse.iter().zip(&b.mse) {
                    assert_eq!(x.to_bits(), y.to_bits());
                }
                for (x, y) in a.mu.iter().zip(&b.mu) {
                    assert_eq!(x.to_bits(), y.to_bits());
                }
            }
            for (x, y) in outs[0]
                .scan_final
                .omniscient_db
                .iter()
                .zip(&other.scan_final.omniscient_db)
            {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn same_seed_byte_identical_csvs_across_worker_counts() {
        // repeated runs with the same seed, and any worker count, must
        // write byte-identical files
        let dirs: Vec<std::path::PathBuf> = [("a", 1usize), ("b", 2), ("c", 8), ("d", 2)]
            .iter()
            .map(|(tag, workers)| {
                let dir =
                    std::env::temp_dir().join(format!("kbf_sim_{tag}_{}", std::process::id()));
                let out = run_simulation(&small_config(*workers)).unwrap();
                write_outputs(&out, &dir).unwrap();
                dir
            })
            .collect();
        for name in [
            "metrics_lanczos.csv",
            "metrics_gershgorin.csv",
            "metrics_omniscient.csv",
            "scan_final.csv",
            "scan_timeavg.csv",
        ] {
            let reference = std::fs::read(dirs[0].join(name)).unwrap();
            for dir in &dirs[1..] {
                let other = std::fs::read(dir.join(name)).unwrap();
                assert_eq!(reference, other, "{name} differs across runs");
            }
        }
        for dir in &dirs {
            std::fs::remove_dir_all(dir).ok();
        }
    }

    #[test]
    fn rejects_duplicate_modes() {
        let mut cfg = small_config(1);
        cfg.modes = vec![LoadingMode::Trace, LoadingMode::Trace];
        assert!(matches!(run_simulation(&cfg), Err(Error::Config(_))));
    }
}
