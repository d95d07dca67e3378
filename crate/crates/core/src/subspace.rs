//! Single-snapshot MUSIC on the Hankel lift of a denoised aperture vector.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{svd, CMat, CVec};
use crate::signal::steering_entries;

/// `L × (M−L+1)` Hankel matrix with entry (p, q) = ξ_{p+q}.
#[derive(Debug, Clone, PartialEq)]
pub struct HankelLift {
    pub matrix: CMat,
    pub sub_len: usize,
}

impl HankelLift {
    pub fn m_elements(&self) -> usize {
        self.matrix.nrows() + self.matrix.ncols() - 1
    }
}

/// Closed angular grid `min, min + step, …, max` in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleGrid {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Default for AngleGrid {
    fn default() -> Self {
        AngleGrid {
            min: -45.0,
            max: 45.0,
            step: 0.01,
        }
    }
}

impl AngleGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.min < self.max && self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidScene(format!(
                "invalid angle grid [{}, {}] step {}",
                self.min, self.max, self.step
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn angles(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.min + i as f64 * self.step)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialSpectrum {
    pub thetas: Vec<f64>,
    pub values: Vec<f64>,
    pub grid_step: f64,
}

impl SpatialSpectrum {
    /// Writes `theta_deg,g_sp` rows.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(out, "theta_deg,g_sp").map_err(io)?;
        for (t, v) in self.thetas.iter().zip(&self.values) {
            writeln!(out, "{t:.4},{v:.9e}").map_err(io)?;
        }
        out.flush().map_err(io)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Peaks {
    /// Ascending.
    pub angles_deg: Vec<f64>,
    /// True when fewer than K strict local maxima existed and the list was
    /// padded with the largest remaining grid values.
    pub padded: bool,
}

/// Default sub-array length `⌈M/2⌉`.
pub fn default_sub_len(m_elements: usize) -> usize {
    m_elements.div_ceil(2)
}

pub fn hankel_lift(xi: &CVec, sub_len: usize) -> Result<HankelLift> {
    let m = xi.len();
    if sub_len == 0 || sub_len > m {
        return Err(Error::InvalidSubarray {
            sub_len,
            m_elements: m,
            k_targets: 0,
        });
    }
    let cols = m - sub_len + 1;
    Ok(HankelLift {
        matrix: CMat::from_fn(sub_len, cols, |p, q| xi[p + q]),
        sub_len,
    })
}

/// Checks the resolvability conditions `L > K` and `M − L + 1 ≥ K`.
pub fn check_subarray(m_elements: usize, sub_len: usize, k_targets: usize) -> Result<()> {
    if sub_len == 0
        || sub_len > m_elements
        || sub_len <= k_targets
        || m_elements - sub_len + 1 < k_targets
    {
        return Err(Error::InvalidSubarray {
            sub_len,
            m_elements,
            k_targets,
        });
    }
    Ok(())
}

/// Left singular vectors beyond the K largest singular values, together
/// with all singular values (non-increasing) for diagnostics.
pub fn noise_subspace_with_values(lift: &HankelLift, k_targets: usize) -> Result<(CMat, Vec<f64>)> {
    let l = lift.matrix.nrows();
    if k_targets >= l {
        return Err(Error::InvalidSubarray {
            sub_len: l,
            m_elements: lift.m_elements(),
            k_targets,
        });
    }
    let triplets = l.min(lift.matrix.ncols());
    if triplets < l {
        return Err(Error::RankDeficient(format!(
            "{triplets} singular triplets for a {l}-dimensional noise basis; use L <= (M + 1) / 2"
        )));
    }
    let s = svd(&lift.matrix)?;
    Ok((
        s.u.columns(k_targets, l - k_targets).into_owned(),
        s.singular_values,
    ))
}

pub fn noise_subspace(lift: &HankelLift, k_targets: usize) -> Result<CMat> {
    noise_subspace_with_values(lift, k_targets).map(|(u, _)| u)
}

/// `g_sp(θ) = ‖ã(θ)‖² / ‖ã(θ)^H Ũ‖²`, the denominator floored at
/// `1e-12 ‖ã(θ)‖²`. `ã` is the length-L sub-array steering vector.
pub fn music_spectrum(
    noise_sub: &CMat,
    theta_rs_deg: f64,
    grid: &AngleGrid,
    spacing_over_lambda: f64,
) -> Result<SpatialSpectrum> {
    grid.validate()?;
    let l = noise_sub.nrows();
    let thetas = grid.angles();
    let un_h = noise_sub.adjoint();
    let values = thetas
        .par_iter()
        .map(|t| {
            let a = steering_entries((t + theta_rs_deg).to_radians(), l, spacing_over_lambda);
            let num = a.norm_squared();
            let den = (&un_h * &a).norm_squared().max(1e-12 * num);
            num / den
        })
        .collect();
    Ok(SpatialSpectrum {
        thetas,
        values,
        grid_step: grid.step,
    })
}

/// The K largest strict local maxima, ascending. A plateau counts once, at
/// its smallest angle.
pub fn pick_peaks(spectrum: &SpatialSpectrum, k_targets: usize) -> Peaks {
    let v = &spectrum.values;
    let n = v.len();
    let mut maxima: Vec<usize> = (1..n.saturating_sub(1))
        .filter(|&i| v[i] > v[i - 1] && v[i] >= v[i + 1])
        .collect();
    maxima.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    maxima.truncate(k_targets);
    let padded = maxima.len() < k_targets;
    if padded {
        let mut rest: Vec<usize> = (0..n).filter(|i| !maxima.contains(i)).collect();
        rest.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
        let need = k_targets - maxima.len();
        maxima.extend(rest.into_iter().take(need));
    }
    let mut angles: Vec<f64> = maxima.iter().map(|&i| spectrum.thetas[i]).collect();
    angles.sort_by(f64::total_cmp);
    Peaks {
        angles_deg: angles,
        padded,
    }
}

/// Full Hankel-MUSIC chain: lift, noise subspace, spectrum, peaks.
pub fn estimate_doas(
    xi: &CVec,
    k_targets: usize,
    sub_len: Option<usize>,
    theta_rs_deg: f64,
    grid: &AngleGrid,
    spacing_over_lambda: f64,
) -> Result<(Peaks, SpatialSpectrum)> {
    let m = xi.len();
    let l = sub_len.unwrap_or_else(|| default_sub_len(m));
    check_subarray(m, l, k_targets)?;
    let lift = hankel_lift(xi, l)?;
    let un = noise_subspace(&lift, k_targets)?;
    let spectrum = music_spectrum(&un, theta_rs_deg, grid, spacing_over_lambda)?;
    Ok((pick_peaks(&spectrum, k_targets), spectrum))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;

    fn spectrum_of(values: Vec<f64>) -> SpatialSpectrum {
        SpatialSpectrum {
            thetas: (0..values.len()).map(|i| i as f64).collect(),
            values,
            grid_step: 1.0,
        }
    }

    #[test]
    fn lift_small() {
        let xi = CVec::from_iterator(4, (1..=4).map(|v| C64::new(v as f64, 0.0)));
        let h = hankel_lift(&xi, 2).unwrap();
        let expect = CMat::from_row_slice(
            2,
            3,
            &[1.0, 2.0, 3.0, 2.0, 3.0, 4.0].map(|v| C64::new(v, 0.0)),
        );
        assert_eq!(h.matrix, expect);
        assert!(hankel_lift(&xi, 0).is_err());
        assert!(hankel_lift(&xi, 5).is_err());
    }

    #[test]
    fn grid_length() {
        assert_eq!(AngleGrid::default().len(), 9001);
        assert_eq!(
            AngleGrid {
                min: 0.0,
                max: 1.0,
                step: 0.25
            }
            .len(),
            5
        );
    }

    #[test]
    fn peaks_single_and_symmetric() {
        let p = pick_peaks(&spectrum_of(vec![0.0, 1.0, 3.0, 1.0, 0.0]), 1);
        assert_eq!(p.angles_deg, vec![2.0]);
        assert!(!p.padded);
        let p = pick_peaks(&spectrum_of(vec![0.0, 2.0, 0.5, 2.0, 0.0]), 2);
        assert_eq!(p.angles_deg, vec![1.0, 3.0]);
    }

    #[test]
    fn peaks_pad_when_short() {
        let p = pick_peaks(&spectrum_of(vec![5.0, 4.0, 3.0, 2.0]), 2);
        assert!(p.padded);
        assert_eq!(p.angles_deg, vec![0.0, 1.0]);
    }

    #[test]
    fn plateau_breaks_toward_smaller_angle() {
        let p = pick_peaks(&spectrum_of(vec![0.0, 2.0, 2.0, 2.0, 0.0]), 1);
        assert_eq!(p.angles_deg, vec![1.0]);
    }

    #[test]
    fn full_basis_gives_flat_spectrum() {
        let un = CMat::identity(6, 6);
        let s = music_spectrum(
            &un,
            0.0,
            &AngleGrid {
                min: -10.0,
                max: 10.0,
                step: 0.5,
            },
            0.5,
        )
        .unwrap();
        assert!(s.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn wide_sub_array_is_rank_deficient() {
        let xi = CVec::from_element(8, C64::new(1.0, 0.0));
        let h = hankel_lift(&xi, 6).unwrap();
        assert!(matches!(
            noise_subspace(&h, 1),
            Err(Error::RankDeficient(_))
        ));
    }
}
