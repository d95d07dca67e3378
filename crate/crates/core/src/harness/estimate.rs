//! One entry point for every DOA estimator.

use crate::anm::{default_rho, solve_anm, AnmProblem};
use crate::baselines::{
    fft_spectrum, l1_estimate, omp_estimate, remove_interference, GridDictionary, L1Options,
};
use crate::error::{Error, Result};
use crate::harness::config::{EstimatorSettings, Method};
use crate::linalg::CVec;
use crate::signal::{steering_vector, MeasurementMatrix};
use crate::subspace::{estimate_doas, pick_peaks, AngleGrid, SpatialSpectrum};

/// What an estimator may know about the link besides `r` and `G`.
#[derive(Debug, Clone, Copy)]
pub struct LinkInfo<'a> {
    pub g: &'a MeasurementMatrix,
    pub theta_rs_deg: f64,
    pub theta_ar_deg: f64,
    pub spacing_over_lambda: f64,
    pub k_targets: usize,
    /// Noise level used for the default regularization weights.
    pub sigma_w: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct DoaEstimate {
    pub method: Method,
    /// Ascending.
    pub angles_deg: Vec<f64>,
    /// Fewer than K distinct peaks were found.
    pub padded: bool,
    /// Whether the iterative solver (ANM, ℓ1) met its tolerance.
    pub converged: bool,
    pub iterations: usize,
    pub spectrum: Option<SpatialSpectrum>,
}

impl DoaEstimate {
    pub fn is_degenerate(&self) -> bool {
        self.padded || !self.converged
    }
}

fn regularization(override_value: Option<f64>, link: &LinkInfo<'_>, what: &str) -> Result<f64> {
    match (override_value, link.sigma_w) {
        (Some(rho), _) => Ok(rho),
        (None, Some(sigma)) => Ok(default_rho(sigma, link.g.m_elements())),
        (None, None) => Err(Error::Config(format!(
            "{what} needs either a noise level or an explicit regularization weight"
        ))),
    }
}

pub fn estimate_doa(
    method: Method,
    r: &CVec,
    link: &LinkInfo<'_>,
    settings: &EstimatorSettings,
) -> Result<DoaEstimate> {
    let g = link.g;
    let m = g.m_elements();
    let k = link.k_targets;
    let b = &g.entries
        * steering_vector(
            link.theta_ar_deg,
            link.theta_rs_deg,
            m,
            link.spacing_over_lambda,
        )?
        .entries;
    let (lo, hi) = settings.range_deg;
    let fine = AngleGrid {
        min: lo,
        max: hi,
        step: settings.fine_step_deg,
    };
    let coarse = AngleGrid {
        min: lo,
        max: hi,
        step: settings.coarse_step_deg,
    };
    match method {
        Method::Anm => {
            let rho = regularization(settings.anm.rho_override, link, "ANM")?;
            let problem = AnmProblem::new(r.clone(), g.entries.clone(), b, rho)?;
            let sol = solve_anm(&problem, &settings.anm_solver())?;
            let (peaks, spectrum) = estimate_doas(
                &sol.xi,
                k,
                settings.anm.sub_len,
                link.theta_rs_deg,
                &fine,
                link.spacing_over_lambda,
            )?;
            Ok(DoaEstimate {
                method,
                angles_deg: peaks.angles_deg,
                padded: peaks.padded,
                converged: sol.converged,
                iterations: sol.iterations,
                spectrum: Some(spectrum),
            })
        }
        Method::Fft | Method::FftIr => {
            let data = if method == Method::FftIr {
                remove_interference(r, &b)?
            } else {
                r.clone()
            };
            let spectrum = fft_spectrum(
                &data,
                &g.entries,
                link.theta_rs_deg,
                &fine,
                link.spacing_over_lambda,
            )?;
            let peaks = pick_peaks(&spectrum, k);
            Ok(DoaEstimate {
                method,
                angles_deg: peaks.angles_deg,
                padded: peaks.padded,
                converged: true,
                iterations: 0,
                spectrum: Some(spectrum),
            })
        }
        Method::Omp => {
            let dict =
                GridDictionary::new(&coarse, link.theta_rs_deg, m, link.spacing_over_lambda)?;
            let res = omp_estimate(r, &g.entries, &b, &dict, k)?;
            let mut values = vec![0.0; dict.len()];
            for (p, c) in res.support.iter().zip(res.coefficients.iter()) {
                values[*p] = c.norm();
            }
            Ok(DoaEstimate {
                method,
                angles_deg: res.angles_deg,
                padded: false,
                converged: true,
                iterations: k,
                spectrum: Some(SpatialSpectrum {
                    thetas: dict.thetas.clone(),
                    values,
                    grid_step: dict.grid_step,
                }),
            })
        }
        Method::L1 => {
            let dict =
                GridDictionary::new(&coarse, link.theta_rs_deg, m, link.spacing_over_lambda)?;
            let rho = regularization(settings.l1.rho_override, link, "the l1 method")?;
            let d = L1Options::default();
            let opts = L1Options {
                max_iterations: settings.l1.max_iter.unwrap_or(d.max_iterations),
                tolerance: settings.l1.tol.unwrap_or(d.tolerance),
            };
            let res = l1_estimate(r, &g.entries, &b, &dict, rho, k, &opts)?;
            Ok(DoaEstimate {
                method,
                angles_deg: res.angles_deg,
                padded: res.padded,
                converged: true,
                iterations: res.iterations,
                spectrum: Some(SpatialSpectrum {
                    thetas: dict.thetas.clone(),
                    values: res.x.iter().map(|c| c.norm()).collect(),
                    grid_step: dict.grid_step,
                }),
            })
        }
    }
}
