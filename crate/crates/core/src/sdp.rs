//! ADMM over the Hermitian PSD cone.
//!
//! Problems have the shape `min f(Θ)` over a structured affine set `S`
//! subject to `Θ ⪰ 0`. The splitting keeps a structured copy `Θ ∈ S` and a
//! PSD copy `Z`, coupled by `Θ = Z`:
//!
//! ```text
//! Θ ← argmin_{Θ ∈ S} f(Θ) + τ/2 ‖Θ − (Z − Λ/τ)‖²_F     (problem-specific)
//! Z ← Π_psd(Θ + Λ/τ)                                  (eigendecomposition)
//! Λ ← Λ + τ (Θ − Z)
//! ```
//!
//! A [`SplittingProblem`] supplies the structured step, the objective and a
//! map from any structured iterate to a feasible point. The driver keeps
//! the best feasible point seen so far, adapts τ by residual balancing and
//! stops once both residuals fall below `tolerance · max(1, ‖·‖_F)`.

use crate::error::{Error, Result};
use crate::linalg::{clip_negative, hermitian_eigen, CMat};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Relative primal/dual residual tolerance.
    pub tolerance: f64,
    /// Largest accepted PSD violation of the returned point.
    pub psd_tolerance: f64,
    /// Initial penalty τ.
    pub penalty: f64,
    pub adaptive_penalty: bool,
    /// Residuals, τ adaptation and feasible-point tracking run every
    /// `check_every` iterations.
    pub check_every: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iterations: 50_000,
            tolerance: 1e-6,
            psd_tolerance: 1e-6,
            penalty: 1.0,
            adaptive_penalty: true,
            check_every: 10,
        }
    }
}

pub trait SplittingProblem {
    /// Side length of the lifted Hermitian matrix.
    fn dim(&self) -> usize;

    /// `argmin_{Θ ∈ S} f(Θ) + τ/2 ‖Θ − w‖²_F`.
    fn structured_step(&mut self, w: &CMat, tau: f64) -> Result<CMat>;

    /// Objective at a point of `S`.
    fn objective(&self, theta: &CMat) -> f64;

    /// A point that is feasible (in `S` and PSD up to roundoff) built from a
    /// structured iterate, together with its PSD violation.
    fn make_feasible(&self, theta: &CMat) -> Result<(CMat, f64)>;

    fn initial_point(&self) -> CMat {
        CMat::zeros(self.dim(), self.dim())
    }
}

#[derive(Debug, Clone)]
pub struct AdmmOutcome {
    /// Best feasible point found.
    pub point: CMat,
    pub objective: f64,
    pub psd_violation: f64,
    /// Last structured iterate (not necessarily PSD).
    pub last_iterate: CMat,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
    pub penalty: f64,
    /// Best feasible objective at each check; non-increasing.
    pub objective_trace: Vec<f64>,
}

impl AdmmOutcome {
    pub fn not_converged_error(&self) -> Error {
        Error::NotConverged {
            iterations: self.iterations,
            primal_residual: self.primal_residual,
            dual_residual: self.dual_residual,
        }
    }
}

fn frob(a: &CMat) -> f64 {
    a.norm()
}

type Best = Option<(CMat, f64, f64)>;

fn track<P: SplittingProblem>(
    problem: &P,
    theta: &CMat,
    best: &mut Best,
    trace: &mut Vec<f64>,
) -> Result<()> {
    let (feasible, violation) = problem.make_feasible(theta)?;
    let obj = problem.objective(&feasible);
    if best.as_ref().is_none_or(|(_, b, _)| obj < *b) {
        *best = Some((feasible, obj, violation));
    }
    trace.push(best.as_ref().map_or(obj, |b| b.1));
    Ok(())
}

pub fn admm<P: SplittingProblem>(problem: &mut P, opts: &SolverOptions) -> Result<AdmmOutcome> {
    let n = problem.dim();
    let mut tau = opts.penalty;
    let mut z = problem.initial_point();
    let mut lambda = CMat::zeros(n, n);
    let check_every = opts.check_every.max(1);

    let mut best: Best = None;
    let mut trace = Vec::new();
    let mut theta = z.clone();
    let mut primal = f64::INFINITY;
    let mut dual = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        let w = &z - lambda.unscale(tau);
        theta = problem.structured_step(&w, tau)?;
        let v = &theta + lambda.unscale(tau);
        let z_prev = std::mem::replace(&mut z, clip_negative(&hermitian_eigen(&v)?));
        let diff = &theta - &z;
        lambda += diff.scale(tau);

        if iterations % check_every == 0 || iterations == opts.max_iterations {
            primal = frob(&diff);
            dual = tau * frob(&(&z - &z_prev));
            let primal_scale = frob(&theta).max(frob(&z)).max(1.0);
            let dual_scale = frob(&lambda).max(1.0);
            if primal <= opts.tolerance * primal_scale && dual <= opts.tolerance * dual_scale {
                converged = true;
                break;
            }
            track(problem, &theta, &mut best, &mut trace)?;
            if opts.adaptive_penalty {
                let rp = primal / primal_scale;
                let rd = dual / dual_scale;
                if rp > 10.0 * rd {
                    tau *= 2.0;
                } else if rd > 10.0 * rp {
                    tau /= 2.0;
                }
            }
        }
    }

    // The final iterate always competes for the returned point.
    track(problem, &theta, &mut best, &mut trace)?;
    let (point, objective, psd_violation) = best.expect("at least one feasible point was tracked");
    Ok(AdmmOutcome {
        point,
        objective,
        psd_violation,
        last_iterate: theta,
        iterations,
        primal_residual: primal,
        dual_residual: dual,
        converged,
        penalty: tau,
        objective_trace: trace,
    })
}
