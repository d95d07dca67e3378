//! Monte-Carlo RMSE sweeps over SNR, N or M.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::crlb::{crlb_all, fisher_matrix, rad2_to_deg2};
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, MatrixMode, Method, SweepVariable};
use crate::harness::estimate::{estimate_doa, LinkInfo};
use crate::harness::score::associate_and_score;
use crate::measmat::{optimize_gram, round_rows, GramCandidate};
use crate::scene::SceneDerived;
use crate::signal::{
    random_measurement_matrix, simulate_snapshot_with, steering_vector, stream_rng,
    MeasurementMatrix, NoiseLevel, SimOptions,
};

/// Seed of trial `trial` under `base`. Trial `t` gets the same seed at every
/// sweep point, so neighbouring points share G, DOAs, phases and the noise
/// direction.
pub fn trial_seed(base: u64, trial: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_word_pos(trial as u128 * 2);
    rng.next_u64()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointParams {
    pub snr_db: f64,
    pub n_meas: usize,
    pub m_elements: usize,
}

impl ExperimentConfig {
    pub fn point_params(&self, value: f64) -> PointParams {
        let mut p = PointParams {
            snr_db: self.snr_db,
            n_meas: self.n_meas,
            m_elements: self.m_elements,
        };
        match self.variable {
            SweepVariable::SnrDb => p.snr_db = value,
            SweepVariable::NMeas => p.n_meas = value as usize,
            SweepVariable::MElements => p.m_elements = value as usize,
        }
        p
    }
}

/// One method's result on one trial.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MethodOutcome {
    /// Estimated DOAs (degrees, ascending); empty when the method errored.
    pub angles_deg: Vec<f64>,
    /// Mean squared error over targets (deg²); `None` when the method errored.
    pub sq_err: Option<f64>,
    /// Errored, hit the iteration cap or returned padded peaks.
    pub failed: bool,
    pub runtime_s: f64,
}

/// Everything one trial produced, in `cfg.methods` order.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub seed: u64,
    /// Realized (perturbed) target DOAs in degrees.
    pub truth_deg: Vec<f64>,
    pub methods: Vec<MethodOutcome>,
    /// Mean CRLB over targets (deg²) for the realized trial.
    pub crlb_deg2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmseRow {
    pub value: f64,
    pub method: Method,
    /// `sqrt` of the mean squared error over all scored trials and targets.
    pub rmse_deg: f64,
    pub scored: usize,
    /// Trials that errored, hit the iteration cap or returned padded peaks.
    pub failures: usize,
    pub mean_runtime_s: f64,
    /// `sqrt` of the mean CRLB over the same trials; NaN if every FIM was singular.
    pub crlb_deg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmseTable {
    pub variable: SweepVariable,
    pub trials: usize,
    pub rows: Vec<RmseRow>,
    pub include_runtime: bool,
}

impl RmseTable {
    /// Rows of one method in sweep order.
    pub fn method_rows(&self, method: Method) -> Vec<&RmseRow> {
        self.rows.iter().filter(|r| r.method == method).collect()
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# {} sweep, {} trials per point; rmse_deg over all trials and targets",
            self.variable.name(),
            self.trials
        );
        s.push_str(self.variable.name());
        s.push_str(",method,rmse_deg,scored,failures,crlb_deg");
        if self.include_runtime {
            s.push_str(",mean_runtime_s");
        }
        s.push('\n');
        for r in &self.rows {
            let _ = write!(
                s,
                "{},{},{:.6e},{},{},{:.6e}",
                r.value, r.method, r.rmse_deg, r.scored, r.failures, r.crlb_deg
            );
            if self.include_runtime {
                let _ = write!(s, ",{:.4e}", r.mean_runtime_s);
            }
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    /// A matplotlib script that plots `table_csv` on a log RMSE axis.
    pub fn plot_script(&self, table_csv: &Path) -> String {
        let x = self.variable.name();
        format!(
            r##"import csv
import sys

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else {path:?}
rows = [r for r in csv.DictReader(line for line in open(path) if not line.startswith("#"))]
fig, ax = plt.subplots()
crlb = {{}}
for method in dict.fromkeys(r["method"] for r in rows):
    sel = [r for r in rows if r["method"] == method]
    xs = [float(r["{x}"]) for r in sel]
    ax.semilogy(xs, [float(r["rmse_deg"]) for r in sel], marker="o", label=method)
    for r in sel:
        crlb[float(r["{x}"])] = float(r["crlb_deg"])
xs = sorted(crlb)
ax.semilogy(xs, [crlb[v] for v in xs], "k--", label="CRLB")
ax.set_xlabel("{x}")
ax.set_ylabel("RMSE (deg)")
ax.grid(True, which="both")
ax.legend()
fig.savefig(path.rsplit(".", 1)[0] + ".png", dpi=150)
"##,
            path = table_csv.display().to_string(),
        )
    }
}

enum MatrixSource {
    Random,
    Optimized(HashMap<usize, GramCandidate>),
    Fixed(MeasurementMatrix),
}

struct PointSetup<'a> {
    params: PointParams,
    scene: SceneDerived,
    source: &'a MatrixSource,
}

fn prepare_source(cfg: &ExperimentConfig, base: &SceneDerived) -> Result<MatrixSource> {
    match &cfg.matrix {
        MatrixMode::Random => Ok(MatrixSource::Random),
        MatrixMode::Optimized => {
            let mut grams = HashMap::new();
            for &v in &cfg.values {
                let m = cfg.point_params(v).m_elements;
                if grams.contains_key(&m) {
                    continue;
                }
                let a_ar = steering_vector(
                    base.theta_ar_deg(),
                    base.theta_rs_deg(),
                    m,
                    base.spacing_over_lambda,
                )?;
                grams.insert(m, optimize_gram(&a_ar, &Default::default())?);
            }
            Ok(MatrixSource::Optimized(grams))
        }
        MatrixMode::File(path) => {
            if cfg.variable != SweepVariable::SnrDb {
                return Err(Error::Config(format!(
                    "a fixed G cannot be swept over {}",
                    cfg.variable.name()
                )));
            }
            let (g, _) = MeasurementMatrix::read_csv(path)?;
            if g.n_meas() != cfg.n_meas || g.m_elements() != cfg.m_elements {
                return Err(Error::DimensionMismatch(format!(
                    "{} is {}x{}, the sweep needs {}x{}",
                    path.display(),
                    g.n_meas(),
                    g.m_elements(),
                    cfg.n_meas,
                    cfg.m_elements
                )));
            }
            Ok(MatrixSource::Fixed(g))
        }
    }
}

fn trial_matrix(point: &PointSetup<'_>, seed: u64) -> Result<MeasurementMatrix> {
    let PointParams {
        n_meas, m_elements, ..
    } = point.params;
    match point.source {
        MatrixSource::Random => Ok(random_measurement_matrix(n_meas, m_elements, seed)),
        MatrixSource::Optimized(grams) => round_rows(&grams[&m_elements], n_meas, seed),
        MatrixSource::Fixed(g) => Ok(g.clone()),
    }
}

fn run_trial(cfg: &ExperimentConfig, point: &PointSetup<'_>, seed: u64) -> Result<TrialOutcome> {
    let mut rng = stream_rng(seed, 3);
    let spread = cfg.doa_spread_deg;
    let angles: Vec<f64> = point
        .scene
        .theta_tr_deg()
        .iter()
        .map(|t| {
            if spread > 0.0 {
                t + rng.random_range(-spread..=spread)
            } else {
                *t
            }
        })
        .collect();
    let scene = point.scene.with_target_angles_deg(&angles)?;
    let g = trial_matrix(point, seed)?;
    let sim = SimOptions {
        noise: NoiseLevel::SnrDb(point.params.snr_db),
        interference_on: true,
        residual_to_signal_db: cfg.residual_to_signal_db,
    };
    let snap = simulate_snapshot_with(&g, &scene, &sim, seed)?;
    let truth = snap
        .truth
        .as_ref()
        .expect("simulated snapshots carry their truth");

    let crlb_deg2 = fisher_matrix(&g, &scene, &truth.z, truth.q, truth.sigma_w)
        .and_then(|fim| crlb_all(&fim))
        .ok()
        .map(|v| v.iter().map(|c| rad2_to_deg2(*c)).sum::<f64>() / v.len() as f64);

    let link = LinkInfo {
        g: &g,
        theta_rs_deg: scene.theta_rs_deg(),
        theta_ar_deg: scene.theta_ar_deg(),
        spacing_over_lambda: scene.spacing_over_lambda,
        k_targets: scene.k_targets(),
        sigma_w: Some(truth.sigma_w),
    };
    let methods = cfg
        .methods
        .iter()
        .map(|&method| {
            let start = Instant::now();
            let est = estimate_doa(method, &snap.r, &link, &cfg.estimator);
            let runtime_s = start.elapsed().as_secs_f64();
            match est
                .and_then(|e| Ok((associate_and_score(&e.angles_deg, &truth.theta_tr_deg)?, e)))
            {
                Ok((mse, e)) => MethodOutcome {
                    failed: e.is_degenerate(),
                    angles_deg: e.angles_deg,
                    sq_err: Some(mse),
                    runtime_s,
                },
                Err(_) => MethodOutcome {
                    angles_deg: Vec::new(),
                    sq_err: None,
                    failed: true,
                    runtime_s,
                },
            }
        })
        .collect();
    Ok(TrialOutcome {
        seed,
        truth_deg: truth.theta_tr_deg.clone(),
        methods,
        crlb_deg2,
    })
}

/// The table row for `cfg.methods[method_idx]` over one point's trials.
pub fn aggregate(
    value: f64,
    method_idx: usize,
    method: Method,
    records: &[TrialOutcome],
) -> RmseRow {
    let errs: Vec<f64> = records
        .iter()
        .filter_map(|r| r.methods[method_idx].sq_err)
        .collect();
    let crlbs: Vec<f64> = records.iter().filter_map(|r| r.crlb_deg2).collect();
    let mean = |v: &[f64]| {
        if v.is_empty() {
            f64::NAN
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    RmseRow {
        value,
        method,
        rmse_deg: mean(&errs).sqrt(),
        scored: errs.len(),
        failures: records
            .iter()
            .filter(|r| r.methods[method_idx].failed)
            .count(),
        mean_runtime_s: records
            .iter()
            .map(|r| r.methods[method_idx].runtime_s)
            .sum::<f64>()
            / records.len() as f64,
        crlb_deg: mean(&crlbs).sqrt(),
    }
}

/// Runs every sweep point; trials run in parallel.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<RmseTable> {
    run_sweep_with_progress(cfg, |_| {})
}

fn point_trials(
    cfg: &ExperimentConfig,
    base: &SceneDerived,
    source: &MatrixSource,
    value: f64,
) -> Result<Vec<TrialOutcome>> {
    let params = cfg.point_params(value);
    let point = PointSetup {
        params,
        scene: base.with_num_elements(params.m_elements),
        source,
    };
    let seeds: Vec<u64> = (0..cfg.trials)
        .map(|t| trial_seed(cfg.base_seed, t))
        .collect();
    seeds
        .par_iter()
        .map(|&s| run_trial(cfg, &point, s))
        .collect()
}

/// Per-trial outcomes at one sweep value, in trial order. These are the
/// trials [`run_sweep`] aggregates for that value.
pub fn run_point(cfg: &ExperimentConfig, value: f64) -> Result<Vec<TrialOutcome>> {
    cfg.validate()?;
    let base = cfg.scene.derive()?;
    let source = prepare_source(cfg, &base)?;
    point_trials(cfg, &base, &source, value)
}

/// As [`run_sweep`], calling `progress` after each finished point.
pub fn run_sweep_with_progress(
    cfg: &ExperimentConfig,
    mut progress: impl FnMut(&[RmseRow]),
) -> Result<RmseTable> {
    cfg.validate()?;
    let base = cfg.scene.derive()?;
    let source = prepare_source(cfg, &base)?;
    let mut rows = Vec::new();
    for &value in &cfg.values {
        let records = point_trials(cfg, &base, &source, value)?;
        let point_rows: Vec<RmseRow> = cfg
            .methods
            .iter()
            .enumerate()
            .map(|(i, &m)| aggregate(value, i, m, &records))
            .collect();
        progress(&point_rows);
        rows.extend(point_rows);
    }
    Ok(RmseTable {
        variable: cfg.variable,
        trials: cfg.trials,
        rows,
        include_runtime: cfg.include_runtime,
    })
}
