//! `kbf` — command line harness for WNG-constrained adaptive beamforming
//! experiments.
//!
//! Subcommands:
//! - `simulate`: Monte Carlo birth-death interference runs, CSV metrics
//!   and scanned responses
//! - `process`: run the same per-frame pipeline over a `KBF1` snapshot
//!   file, emitting a bearing-time record and WNG/loading traces
//! - `scan`: single-scene scanned response with fixed interferers
//! - `bench`: wall-clock comparison of eigendecomposition vs Lanczos

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use kbf_core::csvio::{format_f64, write_csv, Row};
use kbf_core::eigbench::bench_extreme_eigs;
use kbf_core::loading::{kappa_max_from_wng, LoadingMode, WngBound};
use kbf_core::scenario::ScenarioConfig;
use kbf_core::sim::{
    process_snapshots, run_fixed_scene_scan, run_simulation, write_outputs, write_process_outputs,
    write_scan_csv, ProcessConfig, SimConfig,
};
use kbf_core::snapshot::{write_snapshots, SnapshotReader};

#[derive(Parser)]
#[command(
    name = "kbf",
    version,
    about = "WNG-constrained adaptive beamforming harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte Carlo interference simulation and emit metric CSVs.
    Simulate(SimulateArgs),
    /// Process a KBF1 snapshot file into a bearing-time record.
    Process(ProcessArgs),
    /// Scan a frozen scene with fixed interferers.
    Scan(ScanArgs),
    /// Time exact EVD against k-step Lanczos over a size grid.
    Bench(BenchArgs),
}

/// Experiment manifest; JSON with exactly these keys (all optional).
/// Command line flags override file values.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct RunConfigFile {
    #[serde(flatten)]
    scenario: ScenarioConfig,
    /// Loading modes to run side by side.
    modes: Vec<String>,
    /// Lanczos steps for the `lanczos` mode.
    k: usize,
    /// WNG floor in dB; absent means `10 log10(M) - 3`.
    wmin_db: Option<f64>,
    /// Loading for the `fixed` mode.
    fixed_mu: f64,
    out_dir: String,
    /// Frames between time-averaged scan accumulations.
    scan_stride: usize,
    /// 0 = all cores, 1 = sequential.
    workers: usize,
    emit_metrics: bool,
    emit_scan: bool,
    /// Also write trial 0's snapshots to this KBF1 file.
    dump_snapshots: Option<String>,
}

impl Default for RunConfigFile {
    fn default() -> Self {
        RunConfigFile {
            scenario: ScenarioConfig::default(),
            modes: vec!["exact-evd".into(), "lanczos".into()],
            k: 4,
            wmin_db: None,
            fixed_mu: 1.0,
            out_dir: "out".into(),
            scan_stride: 50,
            workers: 0,
            emit_metrics: true,
            emit_scan: true,
            dump_snapshots: None,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON experiment manifest.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for the CSV files.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Snapshots per trial.
    #[arg(long)]
    frames: Option<usize>,
    /// Loading mode (repeatable): exact-evd, lanczos, gershgorin, trace,
    /// fixed, none.
    #[arg(long = "mode")]
    modes: Vec<String>,
    /// Lanczos steps.
    #[arg(long)]
    k: Option<usize>,
    /// WNG floor in dB.
    #[arg(long = "wmin-db")]
    wmin_db: Option<f64>,
    /// Loading value for the fixed mode.
    #[arg(long = "fixed-mu")]
    fixed_mu: Option<f64>,
    /// Restore the long protocol (20000 frames, 200 trials).
    #[arg(long = "paper-scale")]
    paper_scale: bool,
    /// Worker threads (0 = all cores, 1 = sequential).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long = "scan-stride")]
    scan_stride: Option<usize>,
    /// Write trial 0's snapshot stream to this KBF1 file.
    #[arg(long = "dump-snapshots")]
    dump_snapshots: Option<PathBuf>,
}

#[derive(Args)]
struct ProcessArgs {
    /// KBF1 snapshot file.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Loading mode for the tracker.
    #[arg(long, default_value = "lanczos")]
    mode: String,
    #[arg(long, default_value_t = 4)]
    k: usize,
    /// WNG floor in dB; default is 10 log10(M) - 3 for the file's M.
    #[arg(long = "wmin-db")]
    wmin_db: Option<f64>,
    #[arg(long = "fixed-mu", default_value_t = 1.0)]
    fixed_mu: f64,
    /// Sliding window length in snapshots.
    #[arg(long, default_value_t = 37)]
    window: usize,
    /// Element spacing over wavelength.
    #[arg(long = "spacing-ratio", default_value_t = 0.5)]
    spacing_ratio: f64,
    /// Steering direction whose WNG is tracked, degrees.
    #[arg(long, default_value_t = 90.0)]
    steer: f64,
    /// Scan grid step in degrees.
    #[arg(long = "grid-step", default_value_t = 1.0)]
    grid_step: f64,
    /// Frames between scans in the bearing-time record.
    #[arg(long = "scan-stride", default_value_t = 1)]
    scan_stride: usize,
}

#[derive(Args)]
struct ScanArgs {
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Fixed interferer angles in degrees, comma separated.
    #[arg(long, default_value = "60,120", value_delimiter = ',')]
    angles: Vec<f64>,
    /// Snapshots to accumulate before scanning.
    #[arg(long, default_value_t = 400)]
    frames: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Loading mode (repeatable).
    #[arg(long = "mode")]
    modes: Vec<String>,
    #[arg(long, default_value_t = 4)]
    k: usize,
    #[arg(long = "wmin-db")]
    wmin_db: Option<f64>,
    #[arg(long = "fixed-mu", default_value_t = 1.0)]
    fixed_mu: f64,
    /// Scan grid step in degrees.
    #[arg(long = "grid-step", default_value_t = 1.0)]
    grid_step: f64,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Matrix sizes, comma separated.
    #[arg(long, default_value = "32,64,128,256", value_delimiter = ',')]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 4)]
    k: usize,
    /// Timing repetitions per (size, method).
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

fn parse_mode(name: &str, k: usize, fixed_mu: f64) -> anyhow::Result<LoadingMode> {
    Ok(match name {
        "exact-evd" => LoadingMode::ExactEvd,
        "lanczos" => LoadingMode::Lanczos { k },
        "gershgorin" => LoadingMode::Gershgorin,
        "trace" => LoadingMode::Trace,
        "fixed" => LoadingMode::Fixed { mu: fixed_mu },
        "none" => LoadingMode::None,
        other => bail!(
            "unknown mode '{other}' (expected exact-evd, lanczos, gershgorin, trace, fixed or none)"
        ),
    })
}

fn default_wmin_db(elements: usize) -> f64 {
    10.0 * (elements as f64).log10() - 3.0
}

fn bound_for(wmin_db: Option<f64>, elements: usize) -> anyhow::Result<WngBound> {
    let db = wmin_db.unwrap_or_else(|| default_wmin_db(elements));
    Ok(kappa_max_from_wng(db, elements)?)
}

fn run_simulate(args: SimulateArgs) -> anyhow::Result<()> {
    let mut file = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            serde_json::from_str::<RunConfigFile>(&text)
                .with_context(|| format!("parsing config {}", path.display()))?
        }
        None => RunConfigFile::default(),
    };

    if args.paper_scale {
        file.scenario.frames = ScenarioConfig::paper_scale().frames;
        file.scenario.trials = ScenarioConfig::paper_scale().trials;
    }
    if let Some(seed) = args.seed {
        file.scenario.seed = seed;
    }
    if let Some(trials) = args.trials {
        file.scenario.trials = trials;
    }
    if let Some(frames) = args.frames {
        file.scenario.frames = frames;
    }
    if !args.modes.is_empty() {
        file.modes = args.modes.clone();
    }
    if let Some(k) = args.k {
        file.k = k;
    }
    if let Some(db) = args.wmin_db {
        file.wmin_db = Some(db);
    }
    if let Some(mu) = args.fixed_mu {
        file.fixed_mu = mu;
    }
    if let Some(workers) = args.workers {
        file.workers = workers;
    }
    if let Some(stride) = args.scan_stride {
        file.scan_stride = stride;
    }
    if let Some(path) = &args.dump_snapshots {
        file.dump_snapshots = Some(path.display().to_string());
    }
    let out_dir = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&file.out_dir));

    let modes = file
        .modes
        .iter()
        .map(|m| parse_mode(m, file.k, file.fixed_mu))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let bound = bound_for(file.wmin_db, file.scenario.elements)?;

    let mut sim = SimConfig::new(file.scenario.clone(), modes, bound);
    sim.workers = file.workers;
    sim.scan_stride = file.scan_stride;
    sim.keep_trial0_snapshots = file.dump_snapshots.is_some();

    let output = run_simulation(&sim)?;

    if file.emit_metrics || file.emit_scan {
        std::fs::create_dir_all(&out_dir)?;
    }
    if file.emit_metrics {
        write_outputs(&output, &out_dir)?;
    } else if file.emit_scan {
        write_scan_csv(&output.scan_final, &out_dir.join("scan_final.csv"))?;
        write_scan_csv(&output.scan_timeavg, &out_dir.join("scan_timeavg.csv"))?;
    }
    if let Some(path) = &file.dump_snapshots {
        let snaps = output
            .trial0_snapshots
            .as_ref()
            .expect("requested snapshots are retained");
        write_snapshots(
            Path::new(path),
            file.scenario.elements,
            snaps.len() as u64,
            snaps.iter().cloned(),
        )?;
        eprintln!("wrote {} snapshots to {path}", snaps.len());
    }
    eprintln!(
        "simulate: {} trials x {} frames, modes [{}], WNG floor {:.4} dB -> {}",
        file.scenario.trials,
        file.scenario.frames,
        output.labels.join(", "),
        bound.w_min_db,
        out_dir.display()
    );
    Ok(())
}

fn run_process(args: ProcessArgs) -> anyhow::Result<()> {
    let reader = SnapshotReader::open(&args.input)
        .with_context(|| format!("opening {}", args.input.display()))?;
    let header = reader.header();
    let bound = bound_for(args.wmin_db, header.channels)?;
    let mode = parse_mode(&args.mode, args.k, args.fixed_mu)?;
    if args.grid_step.is_nan() || args.grid_step <= 0.0 {
        bail!("grid step must be positive");
    }
    let mut angles = Vec::new();
    let mut a = 0.0f64;
    while a <= 180.0 + 1e-9 {
        angles.push(a.min(180.0));
        a += args.grid_step;
    }
    let config = ProcessConfig {
        window: args.window,
        mode,
        bound,
        steer_angle_deg: args.steer,
        spacing_ratio: args.spacing_ratio,
        angles_deg: angles,
        scan_stride: args.scan_stride,
    };
    let output = process_snapshots(&config, header.channels, reader)?;
    write_process_outputs(&output, &args.out)?;
    eprintln!(
        "process: {} channels, {} frames, mode {} -> {}",
        header.channels,
        output.metrics.len(),
        mode,
        args.out.display()
    );
    Ok(())
}

fn run_scan(args: ScanArgs) -> anyhow::Result<()> {
    let mut scenario = ScenarioConfig {
        frames: args.frames,
        trials: 1,
        angle_grid_step_deg: args.grid_step,
        ..Default::default()
    };
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    // a frozen scene only needs frames >= window for a full SCM
    scenario.window = scenario.window.min(args.frames.max(1));
    let mode_names = if args.modes.is_empty() {
        vec!["exact-evd".to_string(), "lanczos".to_string()]
    } else {
        args.modes.clone()
    };
    let modes = mode_names
        .iter()
        .map(|m| parse_mode(m, args.k, args.fixed_mu))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let bound = bound_for(args.wmin_db, scenario.elements)?;
    let table = run_fixed_scene_scan(&scenario, &args.angles, &modes, bound)?;
    write_scan_csv(&table, &args.out.join("scan.csv"))?;
    eprintln!(
        "scan: interferers at {:?}, {} frames -> {}",
        args.angles,
        args.frames,
        args.out.join("scan.csv").display()
    );
    Ok(())
}

fn run_bench(args: BenchArgs) -> anyhow::Result<()> {
    if args.reps == 0 {
        bail!("reps must be >= 1");
    }
    let rows = bench_extreme_eigs(&args.sizes, args.k, args.reps, args.seed)?;
    let csv_rows: Vec<Row> = rows
        .iter()
        .map(|r| {
            vec![
                r.m.to_string(),
                r.method.as_str().to_string(),
                format_f64(r.median_ns),
                r.matvecs
                    .map_or_else(|| "na".to_string(), |v| v.to_string()),
            ]
        })
        .collect();
    write_csv(
        &args.out.join("bench.csv"),
        &["M", "method", "median_ns", "matvecs"],
        &csv_rows,
    )?;
    for r in &rows {
        eprintln!(
            "M={:4}  {:8}  {:12.0} ns  matvecs={}",
            r.m,
            r.method.as_str(),
            r.median_ns,
            r.matvecs
                .map_or_else(|| "na".to_string(), |v| v.to_string())
        );
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Simulate(args) => run_simulate(args),
        Command::Process(args) => run_process(args),
        Command::Scan(args) => run_scan(args),
        Command::Bench(args) => run_bench(args),
    }
}
