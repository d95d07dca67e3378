//! Measurement-matrix design: a unit-diagonal SDP that nulls the AP
//! direction, followed by randomized phase-only rounding of its rows.

use crate::error::{Error, Result};
use crate::linalg::{
    complex_gaussian_vec, hermitian_eigen, hermitian_part, phase_only, CMat, CVec, C64,
};
use crate::scene::SceneDerived;
use crate::sdp::{admm, SolverOptions, SplittingProblem};
use crate::signal::{
    steering_matrix, steering_vector, stream_rng, MeasurementMatrix, SteeringVector,
};

#[derive(Debug, Clone, PartialEq)]
pub struct GramDiagnostics {
    pub objective: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub min_eigenvalue: f64,
    pub rank: usize,
}

#[derive(Debug, Clone)]
pub struct GramCandidate {
    pub g_tilde: CMat,
    pub solve_diagnostics: GramDiagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrReport {
    pub signal_power: f64,
    pub interference_power: f64,
    pub noise_power: f64,
    pub sinr: f64,
}

/// `min Tr(C X)` over Hermitian PSD `X` with unit diagonal.
struct UnitDiagonalSdp {
    c: CMat,
}

impl SplittingProblem for UnitDiagonalSdp {
    fn dim(&self) -> usize {
        self.c.nrows()
    }

    fn structured_step(&mut self, w: &CMat, tau: f64) -> Result<CMat> {
        let mut x = hermitian_part(&(w - self.c.unscale(tau)));
        x.fill_diagonal(C64::new(1.0, 0.0));
        Ok(x)
    }

    fn objective(&self, theta: &CMat) -> f64 {
        self.c.component_mul(&theta.transpose()).sum().re
    }

    fn make_feasible(&self, theta: &CMat) -> Result<(CMat, f64)> {
        // PSD projection, then rescale to restore the unit diagonal.
        let eig = hermitian_eigen(theta)?;
        let n = self.dim();
        let mut x = crate::linalg::clip_negative(&eig);
        let d: Vec<f64> = (0..n)
            .map(|i| x[(i, i)].re.max(1e-300).sqrt().recip())
            .collect();
        for i in 0..n {
            for j in 0..n {
                x[(i, j)] *= d[i] * d[j];
            }
        }
        x.fill_diagonal(C64::new(1.0, 0.0));
        let violation = (-crate::linalg::hermitian_eigenvalues(&x)?[0]).max(0.0);
        Ok((x, violation))
    }

    fn initial_point(&self) -> CMat {
        CMat::identity(self.dim(), self.dim())
    }
}

/// Solves `min Tr{a a^H G̃}` s.t. `G̃ ⪰ 0`, `G̃_mm = 1`.
pub fn optimize_gram(a_ar: &SteeringVector, opts: &SolverOptions) -> Result<GramCandidate> {
    let a = &a_ar.entries;
    let m = a.len();
    if m < 2 {
        return Err(Error::DimensionMismatch(format!(
            "steering vector of length {m}; need at least 2"
        )));
    }
    let mut problem = UnitDiagonalSdp { c: a * a.adjoint() };
    let out = admm(&mut problem, opts)?;
    if !out.converged || out.psd_violation > opts.psd_tolerance {
        return Err(out.not_converged_error());
    }
    let g_tilde = hermitian_part(&out.point);
    let eig = hermitian_eigen(&g_tilde)?;
    let rank = eig.values.iter().filter(|&&v| v > 1e-6 * eig.max()).count();
    Ok(GramCandidate {
        solve_diagnostics: GramDiagnostics {
            objective: out.objective,
            iterations: out.iterations,
            primal_residual: out.primal_residual,
            dual_residual: out.dual_residual,
            min_eigenvalue: eig.min(),
            rank,
        },
        g_tilde,
    })
}

/// Draws `n_rows` phase-only rows `g'_n = exp(j∠(Ũ Λ̃^{1/2} g̃_n))` with
/// independent standard complex Gaussian `g̃_n`, and returns
/// `G = [g'_0, …, g'_{N−1}]^H`.
pub fn round_rows(gram: &GramCandidate, n_rows: usize, seed: u64) -> Result<MeasurementMatrix> {
    let eig = hermitian_eigen(&gram.g_tilde)?;
    let m = gram.g_tilde.nrows();
    let mut factor = eig.vectors.clone();
    for (k, &lambda) in eig.values.iter().enumerate() {
        factor.column_mut(k).scale_mut(lambda.max(0.0).sqrt());
    }
    let mut rng = stream_rng(seed, 2);
    let mut g = CMat::zeros(n_rows, m);
    for n in 0..n_rows {
        let row = phase_only(&(&factor * complex_gaussian_vec(&mut rng, m, 1.0)));
        g.set_row(n, &row.adjoint());
    }
    MeasurementMatrix::new(g, true)
}

/// Optimized G for a scene: Gram design toward the AP direction, then
/// `n_rows` roundings.
pub fn optimized_measurement_matrix(
    scene: &SceneDerived,
    n_rows: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<(MeasurementMatrix, GramCandidate)> {
    let a_ar = steering_vector(
        scene.theta_ar_deg(),
        scene.theta_rs_deg(),
        scene.num_elements,
        scene.spacing_over_lambda,
    )?;
    let gram = optimize_gram(&a_ar, opts)?;
    Ok((round_rows(&gram, n_rows, seed)?, gram))
}

/// Not part of the SDP-and-rounding design: alternately projects each row
/// onto `{x : a^H x = 0}` and back onto unit modulus, starting from the
/// given rows. Exposed for comparison only.
pub fn refine_null_phases(
    g: &MeasurementMatrix,
    a_ar: &CVec,
    iterations: usize,
) -> Result<MeasurementMatrix> {
    if a_ar.len() != g.m_elements() {
        return Err(Error::DimensionMismatch(format!(
            "steering vector of length {} for G with {} columns",
            a_ar.len(),
            g.m_elements()
        )));
    }
    let na2 = a_ar.norm_squared();
    let mut out = g.entries.clone();
    for n in 0..out.nrows() {
        // Row n of G is x^H; the interference is x^H a.
        let mut x: CVec = out.row(n).adjoint();
        for _ in 0..iterations {
            let c = a_ar.dotc(&x) / na2;
            x = phase_only(&(&x - a_ar * c));
        }
        out.set_row(n, &x.adjoint());
    }
    MeasurementMatrix::new(out, true)
}

/// `‖G a(θ_AR)‖²`
pub fn interference_gain(g: &MeasurementMatrix, a_ar: &CVec) -> Result<f64> {
    if a_ar.len() != g.m_elements() {
        return Err(Error::DimensionMismatch(format!(
            "steering vector of length {} for G with {} columns",
            a_ar.len(),
            g.m_elements()
        )));
    }
    Ok((&g.entries * a_ar).norm_squared())
}

/// Expected SINR for unit-power waveforms scaled by `p_s`.
pub fn sinr(
    g: &MeasurementMatrix,
    scene: &SceneDerived,
    p_s: f64,
    sigma_w: f64,
) -> Result<SinrReport> {
    let m = scene.num_elements;
    if g.m_elements() != m {
        return Err(Error::DimensionMismatch(format!(
            "G has {} columns, scene has {m} elements",
            g.m_elements()
        )));
    }
    let theta_rs = scene.theta_rs_deg();
    let d = scene.spacing_over_lambda;
    let ga = &g.entries * steering_matrix(&scene.theta_tr_deg(), theta_rs, m, d)?;
    let signal_power: f64 = ga
        .column_iter()
        .zip(&scene.target_path_gain)
        .map(|(col, gain)| col.norm_squared() * gain.norm_sqr() * p_s)
        .sum();
    let a_ar = steering_vector(scene.theta_ar_deg(), theta_rs, m, d)?.entries;
    let interference_power = interference_gain(g, &a_ar)? * scene.direct_path_gain.norm_sqr() * p_s;
    let noise_power = g.n_meas() as f64 * sigma_w * sigma_w;
    let denom = interference_power + noise_power;
    let sinr = if denom > 0.0 {
        signal_power / denom
    } else {
        f64::INFINITY
    };
    Ok(SinrReport {
        signal_power,
        interference_power,
        noise_power,
        sinr,
    })
}
