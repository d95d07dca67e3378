//! Dense complex linear-algebra helpers.
//!
//! Matrices are `nalgebra` types throughout the crate. The Hermitian
//! eigendecomposition and SVD are delegated to `faer`, which is markedly
//! faster on the small dense problems the SDP solvers iterate on.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const J: C64 = C64 { re: 0.0, im: 1.0 };

/// Eigenvalues in ascending order with the matching eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl HermitianEigen {
    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

fn to_faer(a: &CMat) -> faer::Mat<faer::c64> {
    faer::Mat::from_fn(a.nrows(), a.ncols(), |i, j| {
        let v = a[(i, j)];
        faer::c64::new(v.re, v.im)
    })
}

fn from_faer(a: faer::MatRef<'_, faer::c64>) -> CMat {
    CMat::from_fn(a.nrows(), a.ncols(), |i, j| {
        let v = a[(i, j)];
        C64::new(v.re, v.im)
    })
}

/// Eigendecomposition of a Hermitian matrix (only the lower triangle is read).
pub fn hermitian_eigen(a: &CMat) -> Result<HermitianEigen> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "eigendecomposition of a {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    let evd = to_faer(a)
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let values = evd.S().column_vector().iter().map(|v| v.re).collect();
    Ok(HermitianEigen {
        values,
        vectors: from_faer(evd.U()),
    })
}

pub fn hermitian_eigenvalues(a: &CMat) -> Result<Vec<f64>> {
    to_faer(a)
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|e| Error::Linalg(format!("{e:?}")))
}

/// Full SVD: `a = U diag(s) V^H`, singular values non-increasing.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMat,
    pub singular_values: Vec<f64>,
    pub v: CMat,
}

pub fn svd(a: &CMat) -> Result<Svd> {
    let s = to_faer(a)
        .svd()
        .map_err(|e| Error::Linalg(format!("{e:?}")))?;
    Ok(Svd {
        u: from_faer(s.U()),
        singular_values: s.S().column_vector().iter().map(|v| v.re).collect(),
        v: from_faer(s.V()),
    })
}

/// Rebuild `V diag(max(λ, 0)) V^H`.
pub fn clip_negative(eig: &HermitianEigen) -> CMat {
    let n = eig.vectors.nrows();
    let mut out = CMat::zeros(n, n);
    for (k, &lambda) in eig.values.iter().enumerate() {
        if lambda <= 0.0 {
            continue;
        }
        let col = eig.vectors.column(k);
        out.ger(
            C64::new(lambda, 0.0),
            &col,
            &col.conjugate(),
            C64::new(1.0, 0.0),
        );
    }
    out
}

/// Frobenius-norm projection of a Hermitian matrix onto the PSD cone.
pub fn project_psd(a: &CMat) -> Result<CMat> {
    let eig = hermitian_eigen(a)?;
    Ok(clip_negative(&eig))
}

/// `(a + a^H) / 2`
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.norm()))
}

/// Real parts must be finite; imaginary parts below `tol` relative to the
/// largest entry are ignored.
pub fn is_hermitian(a: &CMat, tol: f64) -> bool {
    a.nrows() == a.ncols() && max_abs(&(a - a.adjoint())) <= tol * max_abs(a).max(1.0)
}

/// Circularly-symmetric complex Gaussian with `E|x|^2 = variance`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

pub fn complex_gaussian_vec<R: Rng + ?Sized>(rng: &mut R, len: usize, variance: f64) -> CVec {
    CVec::from_fn(len, |_, _| complex_gaussian(rng, variance))
}

/// Unit-modulus scalar with phase uniform on [0, 2π).
pub fn random_phase<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    C64::from_polar(1.0, phi)
}

/// Entrywise `e^{j·arg(x)}`; zero entries map to 1.
pub fn phase_only(v: &CVec) -> CVec {
    v.map(|x| {
        if x.norm() == 0.0 {
            C64::new(1.0, 0.0)
        } else {
            x / x.norm()
        }
    })
}

/// `I - b b^H / ‖b‖²`, or the identity when `b = 0`.
pub fn orthogonal_projector(b: &CVec) -> CMat {
    let n = b.len();
    let nb2 = b.norm_squared();
    let mut p = CMat::identity(n, n);
    if nb2 > 0.0 {
        p.ger(
            C64::new(-1.0 / nb2, 0.0),
            b,
            &b.conjugate(),
            C64::new(1.0, 0.0),
        );
    }
    p
}

/// Solves `a x = rhs` for a Hermitian positive-definite `a`.
pub fn solve_hpd(a: &CMat, rhs: &CVec) -> Result<CVec> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Linalg("matrix is not positive definite".into()))?;
    Ok(chol.solve(rhs))
}

/// Inverse of a Hermitian matrix through its eigendecomposition, with the
/// 2-norm condition number. Fails for indefinite or singular input.
pub fn hermitian_inverse(a: &CMat) -> Result<(CMat, f64)> {
    let eig = hermitian_eigen(&hermitian_part(a))?;
    let lo = eig.min();
    let hi = eig.max();
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !cond.is_finite() {
        return Err(Error::Linalg("matrix is singular or indefinite".into()));
    }
    let n = a.nrows();
    let mut inv = CMat::zeros(n, n);
    for (k, &lambda) in eig.values.iter().enumerate() {
        let col = eig.vectors.column(k);
        inv.ger(
            C64::new(1.0 / lambda, 0.0),
            &col,
            &col.conjugate(),
            C64::new(1.0, 0.0),
        );
    }
    Ok((hermitian_part(&inv), cond))
}
