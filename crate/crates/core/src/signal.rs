//! Steering vectors, RIS measurement matrices and single-snapshot
//! simulation of `r = G A(θ) z + G a(θ_AR) q + w`.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{complex_gaussian_vec, random_phase, CMat, CVec, C64, J};
use crate::scene::SceneDerived;

/// Deterministic generator for `(seed, stream)`; distinct streams of one
/// seed are independent.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector {
    pub entries: CVec,
    pub theta_deg: f64,
    pub theta_rs_deg: f64,
}

fn check_angle(theta_deg: f64, theta_rs_deg: f64) -> Result<f64> {
    let total = theta_deg + theta_rs_deg;
    if total.is_finite() && total.abs() < 90.0 {
        Ok(total.to_radians())
    } else {
        Err(Error::AngleOutOfRange {
            angle_deg: total,
            context: "steering angle theta_RS + theta".into(),
        })
    }
}

/// Unchecked steering vector: entry m is `exp(j 2π m d sin(ψ))`, ψ in radians.
pub(crate) fn steering_entries(psi: f64, m_elements: usize, spacing_over_lambda: f64) -> CVec {
    let step = 2.0 * std::f64::consts::PI * spacing_over_lambda * psi.sin();
    CVec::from_fn(m_elements, |m, _| {
        if m == 0 {
            C64::new(1.0, 0.0)
        } else {
            C64::from_polar(1.0, step * m as f64)
        }
    })
}

pub fn steering_vector(
    theta_deg: f64,
    theta_rs_deg: f64,
    m_elements: usize,
    spacing_over_lambda: f64,
) -> Result<SteeringVector> {
    let psi = check_angle(theta_deg, theta_rs_deg)?;
    Ok(SteeringVector {
        entries: steering_entries(psi, m_elements, spacing_over_lambda),
        theta_deg,
        theta_rs_deg,
    })
}

/// Columns are the steering vectors of `thetas_deg`.
pub fn steering_matrix(
    thetas_deg: &[f64],
    theta_rs_deg: f64,
    m_elements: usize,
    spacing_over_lambda: f64,
) -> Result<CMat> {
    let mut a = CMat::zeros(m_elements, thetas_deg.len());
    for (k, &t) in thetas_deg.iter().enumerate() {
        let psi = check_angle(t, theta_rs_deg)?;
        a.set_column(k, &steering_entries(psi, m_elements, spacing_over_lambda));
    }
    Ok(a)
}

/// The N×M RIS control matrix; row n holds the element coefficients of slot n.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementMatrix {
    pub entries: CMat,
    pub amplitudes_fixed: bool,
}

impl MeasurementMatrix {
    pub fn new(entries: CMat, amplitudes_fixed: bool) -> Result<Self> {
        let ok = entries.iter().all(|g| {
            let a = g.norm();
            if amplitudes_fixed {
                (a - 1.0).abs() <= 1e-12
            } else {
                a <= 1.0 + 1e-12
            }
        });
        if !ok {
            return Err(Error::InvalidScene(
                "measurement matrix entries must satisfy |g| <= 1 (|g| = 1 when amplitudes are fixed)".into(),
            ));
        }
        Ok(MeasurementMatrix {
            entries,
            amplitudes_fixed,
        })
    }

    pub fn n_meas(&self) -> usize {
        self.entries.nrows()
    }

    pub fn m_elements(&self) -> usize {
        self.entries.ncols()
    }

    /// Writes the matrix as CSV: a `M=..,N=..,seed=..` header line followed
    /// by N rows of interleaved `re,im` pairs.
    pub fn write_csv(&self, path: impl AsRef<Path>, seed: u64) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        let _ = writeln!(
            out,
            "M={},N={},seed={}",
            self.m_elements(),
            self.n_meas(),
            seed
        );
        for row in self.entries.row_iter() {
            let line: Vec<String> = row
                .iter()
                .flat_map(|g| [format!("{:e}", g.re), format!("{:e}", g.im)])
                .collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Reads a file written by [`MeasurementMatrix::write_csv`]; returns the
    /// matrix and the recorded seed.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<(Self, u64)> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let (header, body) = text.split_once('\n').unwrap_or((text.as_str(), ""));
        let mut m = None;
        let mut n = None;
        let mut seed = 0;
        for tok in header.split(',') {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("bad header token {tok:?}")))?;
            let v: u64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad header value {tok:?}")))?;
            match k.trim() {
                "M" => m = Some(v as usize),
                "N" => n = Some(v as usize),
                "seed" => seed = v,
                _ => {}
            }
        }
        let (m, n) = m
            .zip(n)
            .ok_or_else(|| Error::Config("header must record M and N".into()))?;
        let mut entries = CMat::zeros(n, m);
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(body.as_bytes());
        let mut row = 0;
        for rec in rdr.records() {
            let rec = rec?;
            if row >= n || rec.len() != 2 * m {
                return Err(Error::DimensionMismatch(format!(
                    "row {row} has {} values, expected {}",
                    rec.len(),
                    2 * m
                )));
            }
            for j in 0..m {
                let parse = |s: &str| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad number {s:?}")))
                };
                entries[(row, j)] = C64::new(parse(&rec[2 * j])?, parse(&rec[2 * j + 1])?);
            }
            row += 1;
        }
        if row != n {
            return Err(Error::DimensionMismatch(format!(
                "expected {n} rows, found {row}"
            )));
        }
        let fixed = entries.iter().all(|g| (g.norm() - 1.0).abs() <= 1e-9);
        let entries = if fixed {
            entries.map(|g| g / g.norm())
        } else {
            entries
        };
        Ok((MeasurementMatrix::new(entries, fixed)?, seed))
    }
}

/// Unit-amplitude entries with i.i.d. uniform phases.
pub fn random_measurement_matrix(n_meas: usize, m_elements: usize, seed: u64) -> MeasurementMatrix {
    let mut rng = stream_rng(seed, 0);
    let entries = CMat::from_fn(n_meas, m_elements, |_, _| random_phase(&mut rng));
    MeasurementMatrix {
        entries,
        amplitudes_fixed: true,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotTruth {
    pub theta_tr_deg: Vec<f64>,
    pub z: CVec,
    pub q: C64,
    pub sigma_w: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub r: CVec,
    pub truth: Option<SnapshotTruth>,
}

impl Snapshot {
    /// CSV with columns `index,re,im`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["index", "re", "im"])?;
        for (i, v) in self.r.iter().enumerate() {
            w.write_record([i.to_string(), format!("{:e}", v.re), format!("{:e}", v.im)])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads the `index,re,im` layout; rows may appear in any order.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Snapshot> {
        let path = path.as_ref();
        let mut rdr = csv::Reader::from_path(path)?;
        let mut rows: Vec<(usize, C64)> = Vec::new();
        for rec in rdr.deserialize() {
            let (i, re, im): (usize, f64, f64) = rec?;
            rows.push((i, C64::new(re, im)));
        }
        rows.sort_by_key(|&(i, _)| i);
        if rows.iter().enumerate().any(|(k, &(i, _))| k != i) {
            return Err(Error::Config(format!(
                "{}: snapshot indices must be 0..N without gaps",
                path.display()
            )));
        }
        Ok(Snapshot {
            r: CVec::from_iterator(rows.len(), rows.into_iter().map(|(_, v)| v)),
            truth: None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseLevel {
    /// `‖G A z‖² / (N σ_w²)` in dB for the realized G and z.
    SnrDb(f64),
    Sigma(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub noise: NoiseLevel,
    pub interference_on: bool,
    /// Optional stand-in for the discarded low-power paths: a random
    /// aperture-domain vector seen through G, with power relative to the
    /// target signal.
    pub residual_to_signal_db: Option<f64>,
}

impl SimOptions {
    pub fn snr_db(snr_db: f64) -> Self {
        SimOptions {
            noise: NoiseLevel::SnrDb(snr_db),
            interference_on: true,
            residual_to_signal_db: None,
        }
    }
}

pub fn simulate_snapshot(
    g: &MeasurementMatrix,
    scene: &SceneDerived,
    snr_db: f64,
    seed: u64,
    interference_on: bool,
) -> Result<Snapshot> {
    let opts = SimOptions {
        interference_on,
        ..SimOptions::snr_db(snr_db)
    };
    simulate_snapshot_with(g, scene, &opts, seed)
}

pub fn simulate_snapshot_with(
    g: &MeasurementMatrix,
    scene: &SceneDerived,
    opts: &SimOptions,
    seed: u64,
) -> Result<Snapshot> {
    let m = scene.num_elements;
    if g.m_elements() != m {
        return Err(Error::DimensionMismatch(format!(
            "G has {} columns, scene has {} elements",
            g.m_elements(),
            m
        )));
    }
    let n = g.n_meas();
    let theta_deg = scene.theta_tr_deg();
    let theta_rs = scene.theta_rs_deg();
    let a = steering_matrix(&theta_deg, theta_rs, m, scene.spacing_over_lambda)?;
    let a_ar = steering_vector(scene.theta_ar_deg(), theta_rs, m, scene.spacing_over_lambda)?;

    let mut rng = stream_rng(seed, 1);
    let z = CVec::from_iterator(
        scene.k_targets(),
        scene
            .target_path_gain
            .iter()
            .map(|&gain| gain * random_phase(&mut rng)),
    );
    let q_phase = random_phase(&mut rng);
    let q = if opts.interference_on {
        scene.direct_path_gain * q_phase
    } else {
        C64::new(0.0, 0.0)
    };

    let signal = &g.entries * (&a * &z);
    let signal_power = signal.norm_squared();
    let sigma_w = match opts.noise {
        NoiseLevel::Sigma(s) => s,
        NoiseLevel::SnrDb(db) if db.is_infinite() && db > 0.0 => 0.0,
        NoiseLevel::SnrDb(db) => (signal_power / (n as f64 * 10f64.powf(db / 10.0))).sqrt(),
    };
    if !(sigma_w >= 0.0 && sigma_w.is_finite()) {
        return Err(Error::InvalidScene(format!(
            "invalid noise level {sigma_w}"
        )));
    }

    let mut r = signal + (&g.entries * &a_ar.entries) * q;
    if let Some(db) = opts.residual_to_signal_db {
        let v = complex_gaussian_vec(&mut rng, m, 1.0);
        let gv = &g.entries * v;
        let p = gv.norm_squared();
        if p > 0.0 {
            let scale = (signal_power * 10f64.powf(db / 10.0) / p).sqrt();
            r += gv * C64::new(scale, 0.0);
        }
    }
    let w = complex_gaussian_vec(&mut rng, n, sigma_w * sigma_w);
    r += w;

    Ok(Snapshot {
        r,
        truth: Some(SnapshotTruth {
            theta_tr_deg: theta_deg,
            z,
            q,
            sigma_w,
        }),
    })
}

/// `a(θ) ⊙ l_M` scaled by `j 2π d cos(ψ)`: the derivative of the steering
/// vector with respect to θ (radians).
pub(crate) fn steering_derivative_entries(
    psi: f64,
    m_elements: usize,
    spacing_over_lambda: f64,
) -> CVec {
    let c = J * (2.0 * std::f64::consts::PI * spacing_over_lambda * psi.cos());
    let a = steering_entries(psi, m_elements, spacing_over_lambda);
    CVec::from_fn(m_elements, |m, _| c * a[m] * m as f64)
}
