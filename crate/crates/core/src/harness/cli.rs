//! Command-line front end of the `risdoa` binary.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::crlb::{crlb_map, write_map_csv, MapGrid, MapOptions};
use crate::error::{Error, Result};
use crate::harness::config::{load_scene, EstimatorSettings, ExperimentConfig, Method};
use crate::harness::estimate::{estimate_doa, LinkInfo};
use crate::harness::sweep::run_sweep_with_progress;
use crate::measmat::{interference_gain, optimized_measurement_matrix};
use crate::scene::{SceneConfig, SceneDerived};
use crate::sdp::SolverOptions;
use crate::signal::{
    random_measurement_matrix, simulate_snapshot_with, steering_vector, MeasurementMatrix,
    NoiseLevel, SimOptions, Snapshot,
};

#[derive(Debug, Parser)]
#[command(
    name = "risdoa",
    version,
    about = "DOA estimation through a RIS with a single-antenna sensor"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one received snapshot and write it as `index,re,im` CSV.
    Simulate(SimulateArgs),
    /// Estimate DOAs from a snapshot CSV.
    Estimate(EstimateArgs),
    /// Design a measurement matrix with an interference null and write it as CSV.
    OptimizeG(OptimizeGArgs),
    /// Single-target CRLB heat map over a rectangular region.
    CrlbMap(CrlbMapArgs),
    /// Run a Monte-Carlo RMSE sweep described by a config file.
    Sweep(SweepArgs),
    /// Simulate a snapshot and write the estimator's spatial spectrum.
    Spectrum(SpectrumArgs),
}

#[derive(Debug, Args)]
pub struct SceneArgs {
    /// `t1` / `table1` for the built-in layout, or a scene TOML file.
    #[arg(long, default_value = "t1")]
    pub scene: String,
    /// Override the number of RIS elements.
    #[arg(long)]
    pub m: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MatrixArgs {
    /// `random:<seed>`, `optimized:<seed>` or a G CSV file.
    #[arg(long, default_value = "random:1")]
    pub g: String,
    /// Number of measurements (rows of G) for generated matrices.
    #[arg(long, default_value_t = 16)]
    pub n: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    #[command(flatten)]
    pub matrix: MatrixArgs,
    /// SNR in dB, `‖GAz‖² / (N σ²)`.
    #[arg(long, default_value_t = 20.0)]
    pub snr: f64,
    /// Seed for path phases and noise.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Drop the direct AP-RIS-sensor path.
    #[arg(long)]
    pub no_interference: bool,
    /// Snapshot CSV to write (`index,re,im`).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EstimatorArgs {
    /// Estimator: anm, fft, fft-ir, omp or l1.
    #[arg(long, value_parser = parse_method, default_value = "anm")]
    pub method: Method,
    /// Noise standard deviation used for the default regularization weight.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Explicit regularization weight (ANM ρ or ℓ1 ρ̃).
    #[arg(long)]
    pub rho: Option<f64>,
    /// Number of targets; defaults to the scene's.
    #[arg(long)]
    pub k: Option<usize>,
    /// ANM iteration cap.
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// ANM relative stopping tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    #[command(flatten)]
    pub matrix: MatrixArgs,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    /// Snapshot CSV (`index,re,im`).
    #[arg(long)]
    pub r: PathBuf,
}

#[derive(Debug, Args)]
pub struct OptimizeGArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Number of measurements (rows of G).
    #[arg(long, default_value_t = 16)]
    pub n: usize,
    /// Rounding seed.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output G CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CrlbMapArgs {
    /// Scene file with AP, RIS and sensor coordinates; its targets are ignored.
    #[arg(long)]
    pub scene: String,
    /// `random:<seed>` or a G CSV file.
    #[arg(long, default_value = "random:1")]
    pub g: String,
    /// Number of measurements for a random G.
    #[arg(long, default_value_t = 16)]
    pub n: usize,
    /// `x0,x1,y0,y1,step` in metres.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: String,
    /// Source power.
    #[arg(long, default_value_t = 1.0)]
    pub ps: f64,
    /// Noise standard deviation.
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    /// Output CSV with `x_m,y_m,rmse_deg` rows.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Sweep config with [scene], [sweep], [method] and [output] sections.
    #[arg(long)]
    pub config: PathBuf,
    /// Override the trial count of the config.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Override the output table path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    #[command(flatten)]
    pub matrix: MatrixArgs,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    /// SNR in dB, `‖GAz‖² / (N σ²)`.
    #[arg(long, default_value_t = 20.0)]
    pub snr: f64,
    /// Seed for path phases and noise.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Write `theta_deg,g_sp`; OMP and ℓ1 report coefficient magnitudes on their coarse grid.
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    Method::parse(s).map_err(|e| e.to_string())
}

fn load_scene_config(args: &SceneArgs) -> Result<SceneConfig> {
    let mut cfg = load_scene(&args.scene, Path::new("."))?;
    if let Some(m) = args.m {
        cfg.num_elements = m;
    }
    Ok(cfg)
}

/// Resolves `random:<seed>`, `optimized:<seed>` or a CSV path into G.
pub fn resolve_matrix(source: &str, scene: &SceneDerived, n: usize) -> Result<MeasurementMatrix> {
    let m = scene.num_elements;
    let seed_of = |s: &str| {
        s.parse::<u64>()
            .map_err(|_| Error::Config(format!("bad seed in `{source}`")))
    };
    let g = if let Some(s) = source.strip_prefix("random:") {
        random_measurement_matrix(n, m, seed_of(s)?)
    } else if let Some(s) = source.strip_prefix("optimized:") {
        optimized_measurement_matrix(scene, n, seed_of(s)?, &SolverOptions::default())?.0
    } else {
        MeasurementMatrix::read_csv(source)?.0
    };
    if g.m_elements() != m {
        return Err(Error::DimensionMismatch(format!(
            "G has {} columns, scene has {m} elements",
            g.m_elements()
        )));
    }
    Ok(g)
}

fn settings_from(args: &EstimatorArgs) -> EstimatorSettings {
    let mut s = EstimatorSettings::default();
    s.anm.max_iter = args.max_iter;
    s.anm.tol = args.tol;
    s.anm.rho_override = args.rho;
    s.l1.max_iter = args.max_iter;
    s.l1.tol = args.tol;
    s.l1.rho_override = args.rho;
    s
}

fn fmt_angles(a: &[f64]) -> String {
    a.iter()
        .map(|t| format!("{t:.4}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let scene = load_scene_config(&args.scene)?.derive()?;
    let g = resolve_matrix(&args.matrix.g, &scene, args.matrix.n)?;
    let opts = SimOptions {
        noise: NoiseLevel::SnrDb(args.snr),
        interference_on: !args.no_interference,
        residual_to_signal_db: None,
    };
    let snap = simulate_snapshot_with(&g, &scene, &opts, args.seed)?;
    snap.write_csv(&args.out)?;
    if let Some(t) = &snap.truth {
        println!(
            "theta_deg={} sigma_w={:.6e}",
            fmt_angles(&t.theta_tr_deg),
            t.sigma_w
        );
    }
    Ok(())
}

fn link<'a>(
    scene: &SceneDerived,
    g: &'a MeasurementMatrix,
    est: &EstimatorArgs,
    sigma: Option<f64>,
) -> LinkInfo<'a> {
    LinkInfo {
        g,
        theta_rs_deg: scene.theta_rs_deg(),
        theta_ar_deg: scene.theta_ar_deg(),
        spacing_over_lambda: scene.spacing_over_lambda,
        k_targets: est.k.unwrap_or(scene.k_targets()),
        sigma_w: est.sigma.or(sigma),
    }
}

fn estimate(args: &EstimateArgs) -> Result<()> {
    let scene = load_scene_config(&args.scene)?.derive()?;
    let snap = Snapshot::read_csv(&args.r)?;
    let g = resolve_matrix(&args.matrix.g, &scene, args.matrix.n)?;
    if g.n_meas() != snap.r.len() {
        return Err(Error::DimensionMismatch(format!(
            "G has {} rows, snapshot has {} entries",
            g.n_meas(),
            snap.r.len()
        )));
    }
    let info = link(&scene, &g, &args.estimator, None);
    let est = estimate_doa(
        args.estimator.method,
        &snap.r,
        &info,
        &settings_from(&args.estimator),
    )?;
    println!(
        "method={} theta_deg={} padded={} converged={} iterations={}",
        est.method,
        fmt_angles(&est.angles_deg),
        est.padded,
        est.converged,
        est.iterations
    );
    Ok(())
}

fn optimize_g(args: &OptimizeGArgs) -> Result<()> {
    let scene = load_scene_config(&args.scene)?.derive()?;
    let (g, gram) =
        optimized_measurement_matrix(&scene, args.n, args.seed, &SolverOptions::default())?;
    g.write_csv(&args.out, args.seed)?;
    let a_ar = steering_vector(
        scene.theta_ar_deg(),
        scene.theta_rs_deg(),
        scene.num_elements,
        scene.spacing_over_lambda,
    )?;
    let gain = interference_gain(&g, &a_ar.entries)?;
    let random = interference_gain(
        &random_measurement_matrix(args.n, scene.num_elements, args.seed),
        &a_ar.entries,
    )?;
    println!(
        "gram_objective={:.6e} gram_rank={} iterations={} interference_db={:.2} random_interference_db={:.2}",
        gram.solve_diagnostics.objective,
        gram.solve_diagnostics.rank,
        gram.solve_diagnostics.iterations,
        10.0 * gain.log10(),
        10.0 * random.log10()
    );
    Ok(())
}

fn crlb_map_cmd(args: &CrlbMapArgs) -> Result<()> {
    let cfg = load_scene(&args.scene, Path::new("."))?;
    let template = cfg.scene()?.ok_or_else(|| {
        Error::Config(format!(
            "{}: the heat map needs a scene with coordinates",
            args.scene
        ))
    })?;
    let grid = MapGrid::parse(&args.grid)?;
    let g = if let Some(s) = args.g.strip_prefix("random:") {
        let seed = s
            .parse::<u64>()
            .map_err(|_| Error::Config(format!("bad seed in `{}`", args.g)))?;
        random_measurement_matrix(args.n, template.num_elements, seed)
    } else {
        MeasurementMatrix::read_csv(&args.g)?.0
    };
    let opts = MapOptions {
        p_s: args.ps,
        sigma_w: args.sigma,
        ..MapOptions::default()
    };
    let points = crlb_map(&template, &grid, &g, &opts)?;
    write_map_csv(&points, &args.out)?;
    let max = points
        .iter()
        .filter(|p| !p.is_masked())
        .map(|p| p.rmse_deg)
        .fold(f64::NAN, f64::max);
    println!("points={} max_rmse_deg={max:.4}", points.len());
    Ok(())
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(out) = &args.out {
        cfg.table_path = out.clone();
    }
    let table = run_sweep_with_progress(&cfg, |rows| {
        for r in rows {
            eprintln!(
                "{}={} {} rmse_deg={:.4e} crlb_deg={:.4e} failures={}",
                cfg.variable.name(),
                r.value,
                r.method,
                r.rmse_deg,
                r.crlb_deg,
                r.failures
            );
        }
    })?;
    table.write_csv(&cfg.table_path)?;
    if let Some(p) = &cfg.plot_script_path {
        std::fs::write(p, table.plot_script(&cfg.table_path)).map_err(|e| Error::io(p, e))?;
    }
    Ok(())
}

fn spectrum(args: &SpectrumArgs) -> Result<()> {
    let scene = load_scene_config(&args.scene)?.derive()?;
    let g = resolve_matrix(&args.matrix.g, &scene, args.matrix.n)?;
    let snap = simulate_snapshot_with(&g, &scene, &SimOptions::snr_db(args.snr), args.seed)?;
    let sigma = snap.truth.as_ref().map(|t| t.sigma_w);
    let info = link(&scene, &g, &args.estimator, sigma);
    let est = estimate_doa(
        args.estimator.method,
        &snap.r,
        &info,
        &settings_from(&args.estimator),
    )?;
    let spectrum = est
        .spectrum
        .as_ref()
        .ok_or_else(|| Error::Config(format!("{} produces no spectrum", est.method)))?;
    spectrum.write_csv(&args.out)?;
    println!(
        "method={} theta_deg={}",
        est.method,
        fmt_angles(&est.angles_deg)
    );
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate(a),
        Command::OptimizeG(a) => optimize_g(a),
        Command::CrlbMap(a) => crlb_map_cmd(a),
        Command::Sweep(a) => sweep(a),
        Command::Spectrum(a) => spectrum(a),
    }
}
