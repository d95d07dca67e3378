use num_complex::Complex64 as C64;
use proptest::prelude::*;
use risdoa::linalg::CVec;
use risdoa::signal::steering_vector;
use risdoa::subspace::{
    check_subarray, estimate_doas, hankel_lift, music_spectrum, noise_subspace,
    noise_subspace_with_values, pick_peaks, AngleGrid, SpatialSpectrum,
};

fn mixture(thetas: &[f64], gains: &[C64], theta_rs: f64, m: usize) -> CVec {
    let mut xi = CVec::zeros(m);
    for (t, c) in thetas.iter().zip(gains) {
        xi += steering_vector(*t, theta_rs, m, 0.5).unwrap().entries * *c;
    }
    xi
}

#[test]
fn noiseless_mixture_peaks_on_the_true_angles() {
    let thetas = [-25.0, 15.0, 30.0];
    let gains = [C64::new(1.0, 0.2), C64::new(-0.4, 0.8), C64::new(0.6, -0.6)];
    let xi = mixture(&thetas, &gains, 0.0, 64);
    let (peaks, spectrum) = estimate_doas(&xi, 3, None, 0.0, &AngleGrid::default(), 0.5).unwrap();
    assert!(!peaks.padded);
    assert_eq!(spectrum.values.len(), 9001);
    for (a, b) in peaks.angles_deg.iter().zip(thetas) {
        assert!((a - b).abs() < 1e-6, "{:?}", peaks.angles_deg);
    }
}

#[test]
fn rotation_offset_is_undone_by_the_spectrum() {
    let thetas = [-12.34, 21.07];
    let gains = [C64::new(1.0, 0.0), C64::new(0.0, 1.0)];
    let xi = mixture(&thetas, &gains, 7.5, 32);
    let (peaks, _) = estimate_doas(&xi, 2, None, 7.5, &AngleGrid::default(), 0.5).unwrap();
    assert!(
        (peaks.angles_deg[0] + 12.34).abs() < 0.006,
        "{:?}",
        peaks.angles_deg
    );
    assert!(
        (peaks.angles_deg[1] - 21.07).abs() < 0.006,
        "{:?}",
        peaks.angles_deg
    );
}

#[test]
fn signal_singular_values_separate_from_noise() {
    let xi = mixture(
        &[-20.0, 10.0],
        &[C64::new(1.0, 0.0), C64::new(1.0, 0.0)],
        0.0,
        16,
    );
    let lift = hankel_lift(&xi, 8).unwrap();
    let (un, sv) = noise_subspace_with_values(&lift, 2).unwrap();
    assert_eq!(un.shape(), (8, 6));
    assert!(sv[1] > 1.0);
    assert!(sv[2] < 1e-10 * sv[0], "{sv:?}");
    // The noise basis is orthonormal.
    let gram = un.adjoint() * &un;
    assert!((gram - risdoa::linalg::CMat::identity(6, 6)).norm() < 1e-10);
}

#[test]
fn subarray_conditions() {
    assert!(check_subarray(64, 32, 3).is_ok());
    assert!(check_subarray(64, 3, 3).is_err());
    assert!(check_subarray(8, 7, 3).is_err());
    assert!(check_subarray(8, 0, 0).is_err());
    let xi = mixture(&[0.0], &[C64::new(1.0, 0.0)], 0.0, 8);
    // L = 6 leaves only 3 columns, too few triplets for the 6-dim basis.
    assert!(noise_subspace(&hankel_lift(&xi, 6).unwrap(), 1).is_err());
}

#[test]
fn single_peak_spectrum_is_padded() {
    let xi = mixture(&[5.0], &[C64::new(1.0, 0.0)], 0.0, 16);
    let un = noise_subspace(&hankel_lift(&xi, 8).unwrap(), 1).unwrap();
    let grid = AngleGrid {
        min: 4.0,
        max: 6.0,
        step: 0.01,
    };
    let spectrum = music_spectrum(&un, 0.0, &grid, 0.5).unwrap();
    let peaks = pick_peaks(&spectrum, 3);
    assert!(peaks.padded);
    assert_eq!(peaks.angles_deg.len(), 3);
    assert!(peaks.angles_deg.iter().any(|a| (a - 5.0).abs() < 1e-9));
}

#[test]
fn plateaus_count_once() {
    let s = SpatialSpectrum {
        thetas: (0..7).map(f64::from).collect(),
        values: vec![0.0, 2.0, 2.0, 1.0, 3.0, 0.5, 0.0],
        grid_step: 1.0,
    };
    let p = pick_peaks(&s, 2);
    assert_eq!(p.angles_deg, vec![1.0, 4.0]);
    assert!(!p.padded);
}

#[test]
fn spectrum_csv_has_one_row_per_grid_point() {
    let xi = mixture(&[-25.0, 15.0, 30.0], &[C64::new(1.0, 0.0); 3], 0.0, 64);
    let (_, spectrum) = estimate_doas(&xi, 3, None, 0.0, &AngleGrid::default(), 0.5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    spectrum.write_csv(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("theta_deg,g_sp"));
    assert_eq!(lines.clone().count(), 9001);
    assert!(lines.next().unwrap().starts_with("-45.0000,"));
}

proptest! {
    #[test]
    fn hankel_lift_is_constant_on_anti_diagonals(
        parts in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 2..40),
        frac in 0.0f64..1.0,
    ) {
        let xi = CVec::from_iterator(parts.len(), parts.iter().map(|&(re, im)| C64::new(re, im)));
        let m = xi.len();
        let l = 1 + ((m - 1) as f64 * frac) as usize;
        let lift = hankel_lift(&xi, l).unwrap();
        prop_assert_eq!(lift.matrix.shape(), (l, m - l + 1));
        prop_assert_eq!(lift.m_elements(), m);
        for p in 0..l {
            for q in 0..m - l + 1 {
                prop_assert_eq!(lift.matrix[(p, q)], xi[p + q]);
            }
        }
    }

    #[test]
    fn noiseless_single_atom_peaks_within_a_grid_step(theta in -44.0f64..44.0, m in 6usize..40) {
        let xi = mixture(&[theta], &[C64::new(1.0, 0.0)], 0.0, m);
        let (peaks, _) = estimate_doas(&xi, 1, None, 0.0, &AngleGrid::default(), 0.5).unwrap();
        prop_assert!((peaks.angles_deg[0] - theta).abs() <= 0.0051, "{:?} vs {}", peaks.angles_deg, theta);
    }
}
