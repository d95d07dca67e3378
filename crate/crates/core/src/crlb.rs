//! Fisher information over `[θ_TR; z; q]` and DOA Cramér-Rao bounds.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_inverse, is_hermitian, CMat, CVec, C64};
use crate::scene::{derive_scene, Point2D, Scene, SceneDerived};
use crate::signal::{
    steering_derivative_entries, steering_matrix, steering_vector, MeasurementMatrix,
};

/// Inverses above this 2-norm condition number are refused.
pub const MAX_FIM_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockIndex {
    pub k_targets: usize,
}

impl BlockIndex {
    pub fn theta(&self, k: usize) -> usize {
        k
    }

    pub fn z(&self, k: usize) -> usize {
        self.k_targets + k
    }

    pub fn q(&self) -> usize {
        2 * self.k_targets
    }
}

#[derive(Debug, Clone)]
pub struct FisherInfo {
    pub matrix: CMat,
    pub sigma_w2: f64,
    pub block_index: BlockIndex,
}

/// Column `b(θ) = z · ∂a/∂θ` (θ in radians): `j 2π d z cos(θ_RS + θ) (a ⊙ l_M)`.
pub fn deriv_steering(
    theta_deg: f64,
    theta_rs_deg: f64,
    z_k: C64,
    m_elements: usize,
    spacing_over_lambda: f64,
) -> Result<CVec> {
    let total = theta_deg + theta_rs_deg;
    if !(total.is_finite() && total.abs() < 90.0) {
        return Err(Error::AngleOutOfRange {
            angle_deg: total,
            context: "steering derivative".into(),
        });
    }
    Ok(steering_derivative_entries(total.to_radians(), m_elements, spacing_over_lambda) * z_k)
}

/// The derivative matrix B, one column per target.
pub fn deriv_matrix(scene: &SceneDerived, z: &CVec) -> Result<CMat> {
    let k = scene.k_targets();
    if z.len() != k {
        return Err(Error::SingularModel(format!(
            "{} amplitudes for {k} targets",
            z.len()
        )));
    }
    let m = scene.num_elements;
    let mut b = CMat::zeros(m, k);
    for (i, theta) in scene.theta_tr_deg().into_iter().enumerate() {
        let col = deriv_steering(
            theta,
            scene.theta_rs_deg(),
            z[i],
            m,
            scene.spacing_over_lambda,
        )?;
        b.set_column(i, &col);
    }
    Ok(b)
}

/// Assembles
///
/// ```text
/// F = σ⁻² [ 2Re{BᴴGᴴGB}  BᴴGᴴGA  BᴴGᴴGa ]
///         [ AᴴGᴴGB       AᴴGᴴGA  AᴴGᴴGa ]
///         [ aᴴGᴴGB       aᴴGᴴGA  aᴴGᴴGa ]
/// ```
///
/// with `a = a(θ_AR)`.
pub fn fisher_matrix(
    g: &MeasurementMatrix,
    scene: &SceneDerived,
    z: &CVec,
    q: C64,
    sigma_w: f64,
) -> Result<FisherInfo> {
    let _ = q; // the bound does not depend on the interference amplitude
    if !(sigma_w > 0.0 && sigma_w.is_finite()) {
        return Err(Error::SingularModel(format!(
            "sigma_w must be positive, got {sigma_w}"
        )));
    }
    let m = scene.num_elements;
    if g.m_elements() != m {
        return Err(Error::SingularModel(format!(
            "G has {} columns, scene has {m} elements",
            g.m_elements()
        )));
    }
    let k = scene.k_targets();
    let theta_rs = scene.theta_rs_deg();
    let d = scene.spacing_over_lambda;
    let b = deriv_matrix(scene, z)?;
    let a = steering_matrix(&scene.theta_tr_deg(), theta_rs, m, d)?;
    let a_ar = steering_vector(scene.theta_ar_deg(), theta_rs, m, d)?.entries;

    let gb = &g.entries * &b;
    let ga = &g.entries * &a;
    let gq = &g.entries * &a_ar;
    let mut cols = CMat::zeros(g.n_meas(), 2 * k + 1);
    cols.columns_mut(0, k).copy_from(&gb);
    cols.columns_mut(k, k).copy_from(&ga);
    cols.set_column(2 * k, &gq);

    let mut f = cols.adjoint() * &cols;
    for i in 0..k {
        for j in 0..k {
            f[(i, j)] = C64::new(2.0 * f[(i, j)].re, 0.0);
        }
    }
    let inv_s2 = 1.0 / (sigma_w * sigma_w);
    f.scale_mut(inv_s2);
    if !is_hermitian(&f, 1e-10) {
        return Err(Error::SingularModel(
            "assembled FIM is not Hermitian".into(),
        ));
    }
    Ok(FisherInfo {
        matrix: f,
        sigma_w2: sigma_w * sigma_w,
        block_index: BlockIndex { k_targets: k },
    })
}

/// `[F⁻¹]_{k,k}` in radians².
pub fn crlb_doa(fim: &FisherInfo, k: usize) -> Result<f64> {
    Ok(crlb_all(fim)?[k])
}

/// DOA bounds (radians²) for every target from a single inversion.
pub fn crlb_all(fim: &FisherInfo) -> Result<Vec<f64>> {
    let (inv, condition) = hermitian_inverse(&fim.matrix).map_err(|_| Error::SingularFim {
        condition: f64::INFINITY,
    })?;
    if condition > MAX_FIM_CONDITION {
        return Err(Error::SingularFim { condition });
    }
    Ok((0..fim.block_index.k_targets)
        .map(|k| inv[(fim.block_index.theta(k), fim.block_index.theta(k))].re)
        .collect())
}

pub fn rad2_to_deg2(v: f64) -> f64 {
    v * (180.0 / std::f64::consts::PI).powi(2)
}

/// `σ² d_AT² d_TR² d_RS² / (2 |γα|² P_s) · ‖G ∂a/∂θ‖⁻²` in radians².
pub fn crlb_single_target(
    g: &MeasurementMatrix,
    scene: &SceneDerived,
    p_s: f64,
    sigma_w: f64,
) -> Result<f64> {
    if scene.k_targets() != 1 {
        return Err(Error::InvalidScene(format!(
            "single-target bound needs K = 1, got {}",
            scene.k_targets()
        )));
    }
    if g.m_elements() != scene.num_elements {
        return Err(Error::DimensionMismatch(format!(
            "G has {} columns, scene has {} elements",
            g.m_elements(),
            scene.num_elements
        )));
    }
    let grad = deriv_steering(
        scene.theta_tr_deg()[0],
        scene.theta_rs_deg(),
        C64::new(1.0, 0.0),
        scene.num_elements,
        scene.spacing_over_lambda,
    )?;
    let g_grad = (&g.entries * grad).norm_squared();
    if g_grad == 0.0 {
        return Err(Error::ZeroGradient);
    }
    let gain = scene.target_path_gain[0].norm_sqr();
    Ok(sigma_w * sigma_w / (2.0 * gain * p_s * g_grad))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapGrid {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    pub step: f64,
}

impl MapGrid {
    pub fn parse(s: &str) -> Result<Self> {
        let v: Vec<f64> = s
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("grid `{s}`: {e}")))?;
        let [x0, x1, y0, y1, step] = v[..] else {
            return Err(Error::Config(format!("grid `{s}` needs x0,x1,y0,y1,step")));
        };
        let g = MapGrid {
            x0,
            x1,
            y0,
            y1,
            step,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x0 <= self.x1 && self.y0 <= self.y1 && self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::Config(format!("invalid map grid {self:?}")));
        }
        Ok(())
    }

    fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
        let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| lo + i as f64 * step).collect()
    }

    pub fn points(&self) -> Vec<Point2D> {
        let xs = Self::axis(self.x0, self.x1, self.step);
        let ys = Self::axis(self.y0, self.y1, self.step);
        ys.iter()
            .flat_map(|&y| xs.iter().map(move |&x| Point2D::new(x, y)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapOptions {
    pub p_s: f64,
    pub sigma_w: f64,
    /// Points within this distance of the AP, RIS or sensor are masked.
    pub exclusion_radius: f64,
    /// Points whose DOA magnitude exceeds this (degrees) are masked.
    pub max_abs_doa_deg: f64,
}

impl Default for MapOptions {
    fn default() -> Self {
        MapOptions {
            p_s: 1.0,
            sigma_w: 0.1,
            exclusion_radius: 0.5,
            max_abs_doa_deg: 45.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapPoint {
    pub x_m: f64,
    pub y_m: f64,
    /// `√CRLB` in degrees; NaN marks a masked point.
    pub rmse_deg: f64,
}

impl MapPoint {
    pub fn is_masked(&self) -> bool {
        self.rmse_deg.is_nan()
    }
}

fn map_value(template: &Scene, target: Point2D, g: &MeasurementMatrix, opts: &MapOptions) -> f64 {
    let r = opts.exclusion_radius;
    if [template.ap, template.ris, template.sensor]
        .iter()
        .any(|p| p.distance(&target) < r)
    {
        return f64::NAN;
    }
    let mut scene = template.clone();
    scene.targets = vec![target];
    scene.scatter_coeffs = vec![template
        .scatter_coeffs
        .first()
        .copied()
        .unwrap_or(C64::new(1.0, 0.0))];
    let Ok(derived) = derive_scene(&scene) else {
        return f64::NAN;
    };
    if derived.theta_tr_deg()[0].abs() > opts.max_abs_doa_deg {
        return f64::NAN;
    }
    match crlb_single_target(g, &derived, opts.p_s, opts.sigma_w) {
        Ok(v) => rad2_to_deg2(v).sqrt(),
        Err(_) => f64::NAN,
    }
}

/// Single-target `√CRLB` (degrees) for a target placed at every grid point.
pub fn crlb_map(
    template: &Scene,
    grid: &MapGrid,
    g: &MeasurementMatrix,
    opts: &MapOptions,
) -> Result<Vec<MapPoint>> {
    grid.validate()?;
    if g.m_elements() != template.num_elements {
        return Err(Error::DimensionMismatch(format!(
            "G has {} columns, scene has {} elements",
            g.m_elements(),
            template.num_elements
        )));
    }
    Ok(grid
        .points()
        .into_par_iter()
        .map(|p| MapPoint {
            x_m: p.x,
            y_m: p.y,
            rmse_deg: map_value(template, p, g, opts),
        })
        .collect())
}

/// Writes `x_m,y_m,rmse_deg`; masked points are written as `nan`.
pub fn write_map_csv(points: &[MapPoint], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "x_m,y_m,rmse_deg").map_err(io)?;
    for p in points {
        if p.is_masked() {
            writeln!(out, "{},{},nan", p.x_m, p.y_m).map_err(io)?;
        } else {
            writeln!(out, "{},{},{:.6}", p.x_m, p.y_m, p.rmse_deg).map_err(io)?;
        }
    }
    out.flush().map_err(io)
}
