//! Deployment geometry: AP, RIS, sensor and targets in the plane.
//!
//! A [`Scene`] holds positions; [`derive_scene`] turns it into the
//! distances, arrival angles and path gains that parameterize the signal
//! model. Angles are measured from the RIS broadside, positive toward
//! increasing element index (the broadside rotated by +90°).
//!
//! [`SceneDerived::from_nominal`] builds the same record directly from
//! distances and angles, for layouts that are specified that way.

use std::f64::consts::PI;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::linalg::C64;

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(from = "[f64; 2]")]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
}

impl From<[f64; 2]> for Point2D {
    fn from(p: [f64; 2]) -> Self {
        Point2D { x: p[0], y: p[1] }
    }
}

impl Point2D {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2D { x, y }
    }

    pub fn distance(&self, other: &Point2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Point2D {
        Point2D::new(self.x + dx, self.y + dy)
    }

    /// Rotation by `angle` radians about `center`.
    pub fn rotated_about(&self, center: &Point2D, angle: f64) -> Point2D {
        let (s, c) = angle.sin_cos();
        let dx = self.x - center.x;
        let dy = self.y - center.y;
        Point2D::new(center.x + c * dx - s * dy, center.y + s * dx + c * dy)
    }
}

/// Geometric deployment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub ap: Point2D,
    pub ris: Point2D,
    pub sensor: Point2D,
    pub targets: Vec<Point2D>,
    /// Direction of the RIS broadside, degrees counter-clockwise from +x.
    pub ris_normal_deg: f64,
    pub wavelength: f64,
    pub element_spacing: f64,
    pub num_elements: usize,
    pub scatter_coeffs: Vec<C64>,
    pub direct_coeff: C64,
    pub sensor_gain: C64,
}

impl Scene {
    /// Unit scattering/direct/sensor coefficients, half-wavelength spacing.
    pub fn new(
        ap: Point2D,
        ris: Point2D,
        sensor: Point2D,
        targets: Vec<Point2D>,
        ris_normal_deg: f64,
        num_elements: usize,
    ) -> Self {
        let k = targets.len();
        Scene {
            ap,
            ris,
            sensor,
            targets,
            ris_normal_deg,
            wavelength: 1.0,
            element_spacing: 0.5,
            num_elements,
            scatter_coeffs: vec![C64::new(1.0, 0.0); k],
            direct_coeff: C64::new(1.0, 0.0),
            sensor_gain: C64::new(1.0, 0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.targets.is_empty() {
            return Err(Error::InvalidScene(
                "at least one target is required".into(),
            ));
        }
        if self.targets.len() != self.scatter_coeffs.len() {
            return Err(Error::InvalidScene(format!(
                "{} targets but {} scattering coefficients",
                self.targets.len(),
                self.scatter_coeffs.len()
            )));
        }
        if self.num_elements < 2 {
            return Err(Error::InvalidScene(
                "num_elements must be at least 2".into(),
            ));
        }
        if !(self.element_spacing > 0.0 && self.wavelength > 0.0) {
            return Err(Error::InvalidScene(
                "element spacing and wavelength must be positive".into(),
            ));
        }
        let nodes = [self.ap, self.ris, self.sensor];
        if !nodes.iter().chain(&self.targets).all(Point2D::is_finite) {
            return Err(Error::InvalidScene("non-finite coordinate".into()));
        }
        if !self.ris_normal_deg.is_finite() {
            return Err(Error::InvalidScene("non-finite RIS normal".into()));
        }
        Ok(())
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Scene {
        Scene {
            ap: self.ap.translated(dx, dy),
            ris: self.ris.translated(dx, dy),
            sensor: self.sensor.translated(dx, dy),
            targets: self.targets.iter().map(|t| t.translated(dx, dy)).collect(),
            ..self.clone()
        }
    }

    /// Rotates every node about the origin and turns the RIS normal with them.
    pub fn rotated(&self, angle_deg: f64) -> Scene {
        let o = Point2D::new(0.0, 0.0);
        let a = angle_deg.to_radians();
        Scene {
            ap: self.ap.rotated_about(&o, a),
            ris: self.ris.rotated_about(&o, a),
            sensor: self.sensor.rotated_about(&o, a),
            targets: self
                .targets
                .iter()
                .map(|t| t.rotated_about(&o, a))
                .collect(),
            ris_normal_deg: self.ris_normal_deg + angle_deg,
            ..self.clone()
        }
    }
}

/// Everything the signal model needs from the geometry. Angles in radians.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneDerived {
    pub d_at: Vec<f64>,
    pub d_tr: Vec<f64>,
    pub d_rs: f64,
    pub d_ar: f64,
    pub theta_tr: Vec<f64>,
    pub theta_ar: f64,
    pub theta_rs: f64,
    pub target_path_gain: Vec<C64>,
    pub direct_path_gain: C64,
    pub num_elements: usize,
    /// d_E / λ
    pub spacing_over_lambda: f64,
    pub scatter_coeffs: Vec<C64>,
    pub direct_coeff: C64,
    pub sensor_gain: C64,
}

/// Distances and angles given directly rather than through coordinates.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct NominalGeometry {
    pub d_at: Vec<f64>,
    pub d_tr: Vec<f64>,
    pub d_rs: f64,
    pub d_ar: f64,
    pub theta_tr_deg: Vec<f64>,
    pub theta_ar_deg: f64,
    #[serde(default)]
    pub theta_rs_deg: f64,
}

impl NominalGeometry {
    /// Simulation layout: 64 elements at half-wavelength, three targets.
    pub fn table1() -> Self {
        NominalGeometry {
            d_at: vec![20.0; 3],
            d_tr: vec![30.0; 3],
            d_rs: 3.0,
            d_ar: 5.0,
            theta_tr_deg: vec![-25.0, 15.0, 30.0],
            theta_ar_deg: -9.3878,
            theta_rs_deg: 0.0,
        }
    }
}

fn check_open_half_plane(angle: f64, context: &str) -> Result<()> {
    if angle.is_finite() && angle.abs() < PI / 2.0 {
        Ok(())
    } else {
        Err(Error::AngleOutOfRange {
            angle_deg: angle.to_degrees(),
            context: context.to_string(),
        })
    }
}

fn wrap_pi(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

impl SceneDerived {
    pub fn k_targets(&self) -> usize {
        self.theta_tr.len()
    }

    pub fn theta_tr_deg(&self) -> Vec<f64> {
        self.theta_tr.iter().map(|t| t.to_degrees()).collect()
    }

    pub fn theta_ar_deg(&self) -> f64 {
        self.theta_ar.to_degrees()
    }

    pub fn theta_rs_deg(&self) -> f64 {
        self.theta_rs.to_degrees()
    }

    /// Builds the derived record from distances and angles, with unit
    /// coefficients unless overridden through the `with_*` setters.
    pub fn from_nominal(
        geom: &NominalGeometry,
        num_elements: usize,
        spacing_over_lambda: f64,
    ) -> Result<Self> {
        let k = geom.theta_tr_deg.len();
        if k == 0 || geom.d_at.len() != k || geom.d_tr.len() != k {
            return Err(Error::InvalidScene(format!(
                "nominal geometry needs equal-length d_at, d_tr, theta_tr (got {}, {}, {})",
                geom.d_at.len(),
                geom.d_tr.len(),
                k
            )));
        }
        if num_elements < 2 || spacing_over_lambda.is_nan() || spacing_over_lambda <= 0.0 {
            return Err(Error::InvalidScene(
                "num_elements must be >= 2 and spacing positive".into(),
            ));
        }
        let all_d = geom
            .d_at
            .iter()
            .chain(&geom.d_tr)
            .chain([&geom.d_rs, &geom.d_ar]);
        if all_d.clone().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::CoincidentNodes(
                "all distances must be positive".into(),
            ));
        }
        let theta_tr: Vec<f64> = geom.theta_tr_deg.iter().map(|d| d.to_radians()).collect();
        for (i, t) in theta_tr.iter().enumerate() {
            check_open_half_plane(*t, &format!("target {i}"))?;
        }
        let theta_ar = geom.theta_ar_deg.to_radians();
        let theta_rs = geom.theta_rs_deg.to_radians();
        check_open_half_plane(theta_ar, "AP")?;
        check_open_half_plane(theta_rs, "sensor")?;
        let mut out = SceneDerived {
            d_at: geom.d_at.clone(),
            d_tr: geom.d_tr.clone(),
            d_rs: geom.d_rs,
            d_ar: geom.d_ar,
            theta_tr,
            theta_ar,
            theta_rs,
            target_path_gain: Vec::new(),
            direct_path_gain: C64::new(0.0, 0.0),
            num_elements,
            spacing_over_lambda,
            scatter_coeffs: vec![C64::new(1.0, 0.0); k],
            direct_coeff: C64::new(1.0, 0.0),
            sensor_gain: C64::new(1.0, 0.0),
        };
        out.refresh_gains();
        Ok(out)
    }

    pub fn with_coefficients(mut self, alpha: Vec<C64>, beta: C64, gamma: C64) -> Result<Self> {
        if alpha.len() != self.k_targets() {
            return Err(Error::InvalidScene(format!(
                "{} scattering coefficients for {} targets",
                alpha.len(),
                self.k_targets()
            )));
        }
        self.scatter_coeffs = alpha;
        self.direct_coeff = beta;
        self.sensor_gain = gamma;
        self.refresh_gains();
        Ok(self)
    }

    /// Same layout with the target DOAs replaced (degrees).
    pub fn with_target_angles_deg(&self, thetas: &[f64]) -> Result<Self> {
        if thetas.len() != self.k_targets() {
            return Err(Error::DimensionMismatch(format!(
                "{} angles for {} targets",
                thetas.len(),
                self.k_targets()
            )));
        }
        let mut out = self.clone();
        for (i, t) in thetas.iter().enumerate() {
            let r = t.to_radians();
            check_open_half_plane(r, &format!("target {i}"))?;
            out.theta_tr[i] = r;
        }
        Ok(out)
    }

    /// Same layout with a different number of RIS elements.
    pub fn with_num_elements(&self, m: usize) -> Self {
        SceneDerived {
            num_elements: m,
            ..self.clone()
        }
    }

    fn refresh_gains(&mut self) {
        self.target_path_gain = (0..self.k_targets())
            .map(|k| {
                self.sensor_gain * self.scatter_coeffs[k]
                    / (self.d_at[k] * self.d_tr[k] * self.d_rs)
            })
            .collect();
        self.direct_path_gain = self.sensor_gain * self.direct_coeff / (self.d_ar * self.d_rs);
    }
}

/// Distances, DOAs relative to the RIS broadside and path gains.
pub fn derive_scene(scene: &Scene) -> Result<SceneDerived> {
    scene.validate()?;
    let normal = scene.ris_normal_deg.to_radians();
    let doa = |p: &Point2D| wrap_pi((p.y - scene.ris.y).atan2(p.x - scene.ris.x) - normal);
    let positive = |d: f64, what: &str| {
        if d > 0.0 {
            Ok(d)
        } else {
            Err(Error::CoincidentNodes(what.to_string()))
        }
    };

    let d_rs = positive(scene.ris.distance(&scene.sensor), "RIS and sensor coincide")?;
    let d_ar = positive(scene.ap.distance(&scene.ris), "AP and RIS coincide")?;
    let mut d_at = Vec::with_capacity(scene.targets.len());
    let mut d_tr = Vec::with_capacity(scene.targets.len());
    let mut theta_tr = Vec::with_capacity(scene.targets.len());
    for (k, t) in scene.targets.iter().enumerate() {
        d_at.push(positive(
            t.distance(&scene.ap),
            &format!("target {k} coincides with AP"),
        )?);
        d_tr.push(positive(
            t.distance(&scene.ris),
            &format!("target {k} coincides with RIS"),
        )?);
        positive(
            t.distance(&scene.sensor),
            &format!("target {k} coincides with sensor"),
        )?;
        let th = doa(t);
        check_open_half_plane(th, &format!("target {k}"))?;
        theta_tr.push(th);
    }
    let theta_ar = doa(&scene.ap);
    check_open_half_plane(theta_ar, "AP")?;
    let theta_rs = doa(&scene.sensor);
    check_open_half_plane(theta_rs, "sensor")?;

    let mut out = SceneDerived {
        d_at,
        d_tr,
        d_rs,
        d_ar,
        theta_tr,
        theta_ar,
        theta_rs,
        target_path_gain: Vec::new(),
        direct_path_gain: C64::new(0.0, 0.0),
        num_elements: scene.num_elements,
        spacing_over_lambda: scene.element_spacing / scene.wavelength,
        scatter_coeffs: scene.scatter_coeffs.clone(),
        direct_coeff: scene.direct_coeff,
        sensor_gain: scene.sensor_gain,
    };
    out.refresh_gains();
    Ok(out)
}

/// Complex number written either as a bare real or as `[re, im]`.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
pub enum ComplexValue {
    Real(f64),
    Pair([f64; 2]),
}

impl From<ComplexValue> for C64 {
    fn from(v: ComplexValue) -> Self {
        match v {
            ComplexValue::Real(re) => C64::new(re, 0.0),
            ComplexValue::Pair([re, im]) => C64::new(re, im),
        }
    }
}

fn default_wavelength() -> f64 {
    1.0
}
fn default_spacing() -> f64 {
    0.5
}
fn default_m() -> usize {
    64
}

/// On-disk scene description (TOML). Either the geometric keys
/// (`ap`, `ris`, `sensor`, `targets`, `ris_normal_deg`) or a `[nominal]`
/// table of distances and angles must be present.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub ap: Option<Point2D>,
    pub ris: Option<Point2D>,
    pub sensor: Option<Point2D>,
    pub targets: Option<Vec<Point2D>>,
    #[serde(default)]
    pub ris_normal_deg: f64,
    #[serde(default = "default_wavelength")]
    pub wavelength: f64,
    #[serde(default = "default_spacing")]
    pub element_spacing_wavelengths: f64,
    #[serde(default = "default_m")]
    pub num_elements: usize,
    pub alpha: Option<Vec<ComplexValue>>,
    pub beta: Option<ComplexValue>,
    pub gamma: Option<ComplexValue>,
    pub nominal: Option<NominalGeometry>,
}

impl SceneConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text =
            std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.as_ref().display())),
            other => other,
        })
    }

    pub fn table1() -> Self {
        SceneConfig {
            ap: None,
            ris: None,
            sensor: None,
            targets: None,
            ris_normal_deg: 0.0,
            wavelength: 1.0,
            element_spacing_wavelengths: 0.5,
            num_elements: 64,
            alpha: None,
            beta: None,
            gamma: None,
            nominal: Some(NominalGeometry::table1()),
        }
    }

    fn coefficients(&self, k: usize) -> Result<(Vec<C64>, C64, C64)> {
        let alpha = match &self.alpha {
            Some(a) if a.len() == k => a.iter().map(|&v| v.into()).collect(),
            Some(a) => {
                return Err(Error::Config(format!(
                    "alpha has {} entries for {k} targets",
                    a.len()
                )));
            }
            None => vec![C64::new(1.0, 0.0); k],
        };
        let one = C64::new(1.0, 0.0);
        Ok((
            alpha,
            self.beta.map_or(one, Into::into),
            self.gamma.map_or(one, Into::into),
        ))
    }

    /// Geometric scene, if the geometric keys are present.
    pub fn scene(&self) -> Result<Option<Scene>> {
        let (Some(ap), Some(ris), Some(sensor), Some(targets)) =
            (self.ap, self.ris, self.sensor, self.targets.clone())
        else {
            return Ok(None);
        };
        let (alpha, beta, gamma) = self.coefficients(targets.len())?;
        Ok(Some(Scene {
            ap,
            ris,
            sensor,
            targets,
            ris_normal_deg: self.ris_normal_deg,
            wavelength: self.wavelength,
            element_spacing: self.element_spacing_wavelengths * self.wavelength,
            num_elements: self.num_elements,
            scatter_coeffs: alpha,
            direct_coeff: beta,
            sensor_gain: gamma,
        }))
    }

    pub fn derive(&self) -> Result<SceneDerived> {
        if let Some(nominal) = &self.nominal {
            let (alpha, beta, gamma) = self.coefficients(nominal.theta_tr_deg.len())?;
            return SceneDerived::from_nominal(
                nominal,
                self.num_elements,
                self.element_spacing_wavelengths,
            )?
            .with_coefficients(alpha, beta, gamma);
        }
        match self.scene()? {
            Some(scene) => derive_scene(&scene),
            None => Err(Error::Config(
                "scene needs either ap/ris/sensor/targets or a [nominal] table".into(),
            )),
        }
    }
}
