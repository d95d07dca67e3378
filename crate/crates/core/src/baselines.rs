//! Comparison estimators: matched-filter ("FFT") beamforming with and
//! without interference removal, grid OMP and an ℓ1-regularized fit.

use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_eigenvalues, hermitian_inverse, orthogonal_projector, CMat, CVec, C64,
};
use crate::signal::steering_entries;
use crate::subspace::{pick_peaks, AngleGrid, SpatialSpectrum};

/// Steering vectors on a uniform angle grid, one column per angle.
#[derive(Debug, Clone)]
pub struct GridDictionary {
    pub thetas: Vec<f64>,
    pub atoms: CMat,
    pub grid_step: f64,
}

impl GridDictionary {
    pub fn new(
        grid: &AngleGrid,
        theta_rs_deg: f64,
        m_elements: usize,
        spacing_over_lambda: f64,
    ) -> Result<Self> {
        grid.validate()?;
        let thetas = grid.angles();
        if let Some(bad) = thetas.iter().find(|t| (*t + theta_rs_deg).abs() >= 90.0) {
            return Err(Error::AngleOutOfRange {
                angle_deg: bad + theta_rs_deg,
                context: "dictionary grid".into(),
            });
        }
        let mut atoms = CMat::zeros(m_elements, thetas.len());
        for (p, t) in thetas.iter().enumerate() {
            atoms.set_column(
                p,
                &steering_entries(
                    (t + theta_rs_deg).to_radians(),
                    m_elements,
                    spacing_over_lambda,
                ),
            );
        }
        Ok(GridDictionary {
            thetas,
            atoms,
            grid_step: grid.step,
        })
    }

    /// The default 1° grid over [−45°, 45°].
    pub fn coarse(theta_rs_deg: f64, m_elements: usize, spacing_over_lambda: f64) -> Result<Self> {
        let grid = AngleGrid {
            step: 1.0,
            ..AngleGrid::default()
        };
        Self::new(&grid, theta_rs_deg, m_elements, spacing_over_lambda)
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }
}

fn check_dims(r: &CVec, g: &CMat) -> Result<()> {
    if r.len() != g.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "r has {} entries, G has {} rows",
            r.len(),
            g.nrows()
        )));
    }
    Ok(())
}

/// Matched-filter spectrum `|a(θ)^H G^H r|²`.
pub fn fft_spectrum(
    r: &CVec,
    g: &CMat,
    theta_rs_deg: f64,
    grid: &AngleGrid,
    spacing_over_lambda: f64,
) -> Result<SpatialSpectrum> {
    check_dims(r, g)?;
    grid.validate()?;
    let back = g.adjoint() * r;
    let m = g.ncols();
    let thetas = grid.angles();
    let values = thetas
        .iter()
        .map(|t| {
            let a = steering_entries((t + theta_rs_deg).to_radians(), m, spacing_over_lambda);
            a.dotc(&back).norm_sqr()
        })
        .collect();
    Ok(SpatialSpectrum {
        thetas,
        values,
        grid_step: grid.step,
    })
}

/// `r − b (b^H r) / ‖b‖²`
pub fn remove_interference(r: &CVec, b: &CVec) -> Result<CVec> {
    if r.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "r has {} entries, b has {}",
            r.len(),
            b.len()
        )));
    }
    let nb2 = b.norm_squared();
    if nb2 == 0.0 {
        return Err(Error::ZeroVector("interference signature b".into()));
    }
    Ok(r - b * (b.dotc(r) / nb2))
}

#[derive(Debug, Clone)]
pub struct OmpResult {
    /// Selected grid angles, ascending.
    pub angles_deg: Vec<f64>,
    /// Dictionary indices in selection order; `coefficients` follows this order.
    pub support: Vec<usize>,
    pub coefficients: CVec,
    /// Residual norm before the first and after every iteration.
    pub residual_norms: Vec<f64>,
}

/// K iterations of orthogonal matching pursuit on the interference-free
/// data `P r` against the projected dictionary `P G D̃`.
pub fn omp_estimate(
    r: &CVec,
    g: &CMat,
    b: &CVec,
    dict: &GridDictionary,
    k_targets: usize,
) -> Result<OmpResult> {
    check_dims(r, g)?;
    if k_targets == 0 || k_targets > dict.len() {
        return Err(Error::InvalidSubarray {
            sub_len: dict.len(),
            m_elements: g.ncols(),
            k_targets,
        });
    }
    let y = remove_interference(r, b)?;
    let phi = orthogonal_projector(b) * g * &dict.atoms;
    let norms: Vec<f64> = phi.column_iter().map(|c| c.norm()).collect();

    let mut support: Vec<usize> = Vec::with_capacity(k_targets);
    let mut residual = y.clone();
    let mut residual_norms = vec![residual.norm()];
    let mut coeffs = CVec::zeros(0);
    for _ in 0..k_targets {
        let corr = phi.adjoint() * &residual;
        let best = (0..dict.len())
            .filter(|p| !support.contains(p) && norms[*p] > 0.0)
            .max_by(|&i, &j| (corr[i].norm() / norms[i]).total_cmp(&(corr[j].norm() / norms[j])))
            .ok_or(Error::DictionaryDegenerate(support.len()))?;
        support.push(best);
        let sub = phi.select_columns(&support);
        let gram = sub.adjoint() * &sub;
        let (inv, cond) =
            hermitian_inverse(&gram).map_err(|_| Error::DictionaryDegenerate(support.len()))?;
        if cond > 1e12 {
            return Err(Error::DictionaryDegenerate(support.len()));
        }
        coeffs = inv * (sub.adjoint() * &y);
        residual = &y - sub * &coeffs;
        residual_norms.push(residual.norm());
    }
    let mut angles_deg: Vec<f64> = support.iter().map(|&p| dict.thetas[p]).collect();
    angles_deg.sort_by(f64::total_cmp);
    Ok(OmpResult {
        angles_deg,
        support,
        coefficients: coeffs,
        residual_norms,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L1Options {
    pub max_iterations: usize,
    /// Stop once the optimality-condition violation is below `tolerance · ρ̃`.
    pub tolerance: f64,
}

impl Default for L1Options {
    fn default() -> Self {
        L1Options {
            max_iterations: 200_000,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct L1Result {
    pub angles_deg: Vec<f64>,
    pub padded: bool,
    pub x: CVec,
    pub q: C64,
    pub iterations: usize,
    pub kkt_violation: f64,
    /// Objective after every accepted iterate; non-increasing.
    pub objective_trace: Vec<f64>,
}

fn soft_threshold(v: &CVec, t: f64) -> CVec {
    v.map(|c| {
        let m = c.norm();
        if m <= t {
            C64::new(0.0, 0.0)
        } else {
            c * ((m - t) / m)
        }
    })
}

/// Largest violation of the optimality conditions of
/// `min ‖y − Φx‖² + ρ‖x‖₁`: active entries need `∇ = −ρ x/|x|`, inactive
/// ones `|∇| ≤ ρ`, with `∇ = −2Φ^H(y − Φx)`.
pub fn l1_kkt_violation(phi: &CMat, y: &CVec, x: &CVec, rho: f64) -> f64 {
    let grad = phi.adjoint() * (y - phi * x) * C64::new(-2.0, 0.0);
    grad.iter()
        .zip(x.iter())
        .map(|(gi, xi)| {
            if xi.norm() > 0.0 {
                (gi + xi * (rho / xi.norm())).norm()
            } else {
                (gi.norm() - rho).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// `min ‖r − G D̃ x̃ − b q̃‖² + ρ̃ ‖x̃‖₁`, with q̃ eliminated by projection,
/// solved by monotone FISTA. The K largest local maxima of `|x̃|` over the
/// grid are returned.
pub fn l1_estimate(
    r: &CVec,
    g: &CMat,
    b: &CVec,
    dict: &GridDictionary,
    rho_tilde: f64,
    k_targets: usize,
    opts: &L1Options,
) -> Result<L1Result> {
    check_dims(r, g)?;
    if !(rho_tilde > 0.0 && rho_tilde.is_finite()) {
        return Err(Error::InvalidScene(format!(
            "rho_tilde must be positive, got {rho_tilde}"
        )));
    }
    let proj = orthogonal_projector(b);
    let gd = g * &dict.atoms;
    let phi = &proj * &gd;
    let y = &proj * r;
    let p = dict.len();
    let objective = |x: &CVec| {
        (&y - &phi * x).norm_squared() + rho_tilde * x.iter().map(|c| c.norm()).sum::<f64>()
    };

    let lipschitz = 2.0
        * hermitian_eigenvalues(&(&phi * phi.adjoint()))?
            .last()
            .copied()
            .unwrap_or(0.0);
    let mut x = CVec::zeros(p);
    let mut trace = vec![objective(&x)];
    let mut iterations = 0;
    let mut violation = l1_kkt_violation(&phi, &y, &x, rho_tilde);
    if lipschitz > 0.0 {
        let step = 1.0 / lipschitz;
        let mut v = x.clone();
        let mut t = 1.0f64;
        while iterations < opts.max_iterations && violation > opts.tolerance * rho_tilde {
            iterations += 1;
            let grad = phi.adjoint() * (&y - &phi * &v) * C64::new(-2.0, 0.0);
            let cand = soft_threshold(&(&v - grad * C64::new(step, 0.0)), rho_tilde * step);
            let f_cand = objective(&cand);
            let f_prev = *trace.last().expect("trace starts non-empty");
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let x_prev = x.clone();
            if f_cand <= f_prev {
                x = cand.clone();
            }
            v = &x
                + (&cand - &x) * C64::new(t / t_next, 0.0)
                + (&x - &x_prev) * C64::new((t - 1.0) / t_next, 0.0);
            t = t_next;
            trace.push(objective(&x));
            if iterations % 10 == 0 {
                violation = l1_kkt_violation(&phi, &y, &x, rho_tilde);
            }
        }
        violation = l1_kkt_violation(&phi, &y, &x, rho_tilde);
    }
    if violation > opts.tolerance * rho_tilde {
        return Err(Error::NotConverged {
            iterations,
            primal_residual: violation,
            dual_residual: f64::NAN,
        });
    }
    let q = {
        let nb2 = b.norm_squared();
        if nb2 > 0.0 {
            b.dotc(&(r - &gd * &x)) / nb2
        } else {
            C64::new(0.0, 0.0)
        }
    };
    let spectrum = SpatialSpectrum {
        thetas: dict.thetas.clone(),
        values: x.iter().map(|c| c.norm()).collect(),
        grid_step: dict.grid_step,
    };
    let peaks = pick_peaks(&spectrum, k_targets);
    Ok(L1Result {
        angles_deg: peaks.angles_deg,
        padded: peaks.padded,
        x,
        q,
        iterations,
        kkt_violation: violation,
        objective_trace: trace,
    })
}
