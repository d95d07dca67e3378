//! Experiment configuration files (TOML with `[scene]`, `[sweep]`,
//! `[method]` and `[output]` sections).

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::scene::SceneConfig;
use crate::sdp::SolverOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Anm,
    Fft,
    FftIr,
    Omp,
    L1,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Anm,
        Method::Fft,
        Method::FftIr,
        Method::Omp,
        Method::L1,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Anm => "anm",
            Method::Fft => "fft",
            Method::FftIr => "fft-ir",
            Method::Omp => "omp",
            Method::L1 => "l1",
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown method `{s}` (expected anm, fft, fft-ir, omp or l1)"
                ))
            })
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    SnrDb,
    NMeas,
    MElements,
}

impl SweepVariable {
    pub fn name(&self) -> &'static str {
        match self {
            SweepVariable::SnrDb => "snr_db",
            SweepVariable::NMeas => "n_meas",
            SweepVariable::MElements => "m_elements",
        }
    }
}

/// How G is obtained for each trial.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixMode {
    /// Fresh uniform-phase G per trial.
    Random,
    /// One Gram design per element count, fresh rounding per trial.
    Optimized,
    /// A fixed G read from a CSV file.
    File(PathBuf),
}

impl MatrixMode {
    pub fn parse(s: &str, base_dir: &Path) -> Result<MatrixMode> {
        match s {
            "random" => Ok(MatrixMode::Random),
            "optimized" => Ok(MatrixMode::Optimized),
            _ => match s.strip_prefix("file:") {
                Some(p) => Ok(MatrixMode::File(base_dir.join(p))),
                None => Err(Error::Config(format!(
                    "matrix mode `{s}` (expected random, optimized or file:<path>)"
                ))),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct AnmSettings {
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
    pub rho_override: Option<f64>,
    /// Hankel sub-array length; defaults to ⌈M/2⌉.
    pub sub_len: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct L1Settings {
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
    pub rho_override: Option<f64>,
}

/// Estimator parameters shared by the sweep, `estimate` and `spectrum`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorSettings {
    pub anm: AnmSettings,
    pub l1: L1Settings,
    /// Evaluation grid step for ANM and FFT spectra (degrees).
    pub fine_step_deg: f64,
    /// Dictionary grid step for OMP and ℓ1 (degrees).
    pub coarse_step_deg: f64,
    pub range_deg: (f64, f64),
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        EstimatorSettings {
            anm: AnmSettings::default(),
            l1: L1Settings::default(),
            fine_step_deg: 0.01,
            coarse_step_deg: 1.0,
            range_deg: (-45.0, 45.0),
        }
    }
}

impl EstimatorSettings {
    pub fn anm_solver(&self) -> SolverOptions {
        let d = SolverOptions::default();
        SolverOptions {
            max_iterations: self.anm.max_iter.unwrap_or(d.max_iterations),
            tolerance: self.anm.tol.unwrap_or(d.tolerance),
            ..d
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    variable: SweepVariable,
    values: Vec<f64>,
    #[serde(default = "default_trials")]
    trials: usize,
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default = "default_snr")]
    snr_db: f64,
    #[serde(default = "default_n")]
    n_meas: usize,
    m_elements: Option<usize>,
    #[serde(default = "default_spread")]
    doa_spread_deg: f64,
    residual_to_signal_db: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMethod {
    names: Vec<Method>,
    #[serde(default = "default_matrix")]
    matrix: String,
    #[serde(default)]
    anm: AnmSettings,
    #[serde(default)]
    l1: L1Settings,
    fine_step_deg: Option<f64>,
    coarse_step_deg: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    table: String,
    plot_script: Option<String>,
    #[serde(default = "default_true")]
    include_runtime: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    /// Either `file = "<path>"` (or `"table1"`) or inline scene keys.
    scene: toml::Table,
    sweep: RawSweep,
    method: RawMethod,
    output: RawOutput,
}

fn default_trials() -> usize {
    100
}
fn default_seed() -> u64 {
    1
}
fn default_snr() -> f64 {
    20.0
}
fn default_n() -> usize {
    16
}
fn default_spread() -> f64 {
    1.0
}
fn default_matrix() -> String {
    "random".into()
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub scene: SceneConfig,
    pub methods: Vec<Method>,
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub trials: usize,
    pub base_seed: u64,
    /// Fixed values for the variables not being swept.
    pub snr_db: f64,
    pub n_meas: usize,
    pub m_elements: usize,
    /// Half-width of the uniform per-trial DOA perturbation (degrees).
    pub doa_spread_deg: f64,
    pub residual_to_signal_db: Option<f64>,
    pub matrix: MatrixMode,
    pub estimator: EstimatorSettings,
    pub table_path: PathBuf,
    pub plot_script_path: Option<PathBuf>,
    pub include_runtime: bool,
}

/// Resolves a scene reference: `table1`/`t1` or a path to a scene file.
pub fn load_scene(reference: &str, base_dir: &Path) -> Result<SceneConfig> {
    match reference {
        "table1" | "t1" => Ok(SceneConfig::table1()),
        path => SceneConfig::load(base_dir.join(path)),
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Relative paths inside the config resolve against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let scene = match raw.scene.get("file") {
            Some(toml::Value::String(f)) if raw.scene.len() == 1 => load_scene(f, base_dir)?,
            Some(_) => {
                return Err(Error::Config(
                    "[scene] takes either a single `file` string or inline scene keys".into(),
                ));
            }
            None => SceneConfig::from_toml_str(&raw.scene.to_string())?,
        };
        let m_elements = raw.sweep.m_elements.unwrap_or(scene.num_elements);
        let d = EstimatorSettings::default();
        let cfg = ExperimentConfig {
            methods: raw.method.names,
            variable: raw.sweep.variable,
            values: raw.sweep.values,
            trials: raw.sweep.trials,
            base_seed: raw.sweep.seed,
            snr_db: raw.sweep.snr_db,
            n_meas: raw.sweep.n_meas,
            m_elements,
            doa_spread_deg: raw.sweep.doa_spread_deg,
            residual_to_signal_db: raw.sweep.residual_to_signal_db,
            matrix: MatrixMode::parse(&raw.method.matrix, base_dir)?,
            estimator: EstimatorSettings {
                anm: raw.method.anm,
                l1: raw.method.l1,
                fine_step_deg: raw.method.fine_step_deg.unwrap_or(d.fine_step_deg),
                coarse_step_deg: raw.method.coarse_step_deg.unwrap_or(d.coarse_step_deg),
                ..d
            },
            table_path: base_dir.join(&raw.output.table),
            plot_script_path: raw.output.plot_script.map(|p| base_dir.join(p)),
            include_runtime: raw.output.include_runtime,
            scene,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.values.is_empty() || self.values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "sweep values must be non-empty and strictly increasing".into(),
            ));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("at least one method is required".into()));
        }
        if matches!(
            self.variable,
            SweepVariable::NMeas | SweepVariable::MElements
        ) && self.values.iter().any(|v| v.fract() != 0.0 || *v < 1.0)
        {
            return Err(Error::Config(format!(
                "{} values must be positive integers",
                self.variable.name()
            )));
        }
        if self.doa_spread_deg.is_nan() || self.doa_spread_deg < 0.0 {
            return Err(Error::Config("doa_spread_deg must be non-negative".into()));
        }
        Ok(())
    }
}
