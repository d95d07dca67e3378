use std::path::Path;

use proptest::prelude::*;
use risdoa::harness::config::{EstimatorSettings, ExperimentConfig, Method};
use risdoa::harness::estimate::{estimate_doa, LinkInfo};
use risdoa::harness::score::associate_and_score;
use risdoa::harness::sweep::{run_sweep, trial_seed};
use risdoa::scene::SceneConfig;
use risdoa::signal::{
    random_measurement_matrix, simulate_snapshot_with, steering_matrix, NoiseLevel, SimOptions,
};
use risdoa::subspace::{estimate_doas, AngleGrid};

fn small_config(methods: &str, extra_method: &str, runtime: bool) -> ExperimentConfig {
    let text = format!(
        r#"
[scene]
file = "table1"

[sweep]
variable = "snr_db"
values = [10, 30]
trials = 12
seed = 21
n_meas = 12
m_elements = 16

[method]
names = [{methods}]
matrix = "random"
{extra_method}

[output]
table = "t.csv"
include_runtime = {runtime}
"#
    );
    ExperimentConfig::from_toml_str(&text, Path::new(".")).unwrap()
}

#[test]
fn scoring_example() {
    let mse = associate_and_score(&[-24.0, 16.0, 31.0], &[-25.0, 15.0, 30.0]).unwrap();
    assert!((mse - 1.0).abs() < 1e-12);
    assert!(associate_and_score(&[1.0], &[1.0, 2.0]).is_err());
    assert!(associate_and_score(&[], &[]).is_err());
}

#[test]
fn identical_config_gives_byte_identical_csv() {
    let cfg = small_config(r#""anm", "fft-ir", "omp", "l1""#, "", false);
    let a = run_sweep(&cfg).unwrap().to_csv_string();
    let b = run_sweep(&cfg).unwrap().to_csv_string();
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 2 + 2 * 4);
    assert!(a.lines().next().unwrap().starts_with('#'));
    assert_eq!(
        a.lines().nth(1).unwrap(),
        "snr_db,method,rmse_deg,scored,failures,crlb_deg"
    );
}

#[test]
fn serial_and_parallel_sweeps_agree() {
    let cfg = small_config(r#""anm", "omp""#, "", false);
    let serial = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| run_sweep(&cfg).unwrap());
    let parallel = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap()
        .install(|| run_sweep(&cfg).unwrap());
    assert_eq!(serial.to_csv_string(), parallel.to_csv_string());
}

#[test]
fn seeds_depend_on_base_and_trial_only() {
    assert_eq!(trial_seed(7, 3), trial_seed(7, 3));
    assert_ne!(trial_seed(7, 3), trial_seed(7, 4));
    assert_ne!(trial_seed(7, 3), trial_seed(8, 3));
}

#[test]
fn iteration_cap_counts_as_failure_but_is_scored() {
    let cfg = small_config(r#""anm""#, "[method.anm]\nmax_iter = 3", true);
    let table = run_sweep(&cfg).unwrap();
    for row in &table.rows {
        assert_eq!(row.scored, 12);
        assert_eq!(row.failures, 12);
        assert!(row.rmse_deg.is_finite());
        assert!(row.mean_runtime_s > 0.0);
    }
    assert!(table
        .to_csv_string()
        .lines()
        .nth(1)
        .unwrap()
        .ends_with(",mean_runtime_s"));
}

#[test]
fn rmse_is_not_below_the_bound_at_high_snr() {
    let cfg = small_config(r#""anm""#, "", false);
    let table = run_sweep(&cfg).unwrap();
    let row = table.method_rows(Method::Anm)[1];
    assert_eq!(row.value, 30.0);
    // Standard error of an RMSE over n squared errors, to first order.
    let n = (row.scored * 3) as f64;
    let se = row.rmse_deg / (2.0 * n).sqrt();
    assert!(row.rmse_deg >= row.crlb_deg - se, "{row:?}");
}

#[test]
fn noiseless_table1_run_matches_subspace_oracle() {
    let scene = SceneConfig::table1().derive().unwrap();
    let g = random_measurement_matrix(16, 64, 1);
    let opts = SimOptions {
        noise: NoiseLevel::Sigma(0.0),
        ..SimOptions::snr_db(0.0)
    };
    let snap = simulate_snapshot_with(&g, &scene, &opts, 1).unwrap();
    let truth = snap.truth.clone().unwrap();
    // Oracle: Hankel-MUSIC on the true aperture-domain signal.
    let xi =
        steering_matrix(&truth.theta_tr_deg, scene.theta_rs_deg(), 64, 0.5).unwrap() * &truth.z;
    let (oracle, _) = estimate_doas(
        &xi,
        3,
        None,
        scene.theta_rs_deg(),
        &AngleGrid::default(),
        0.5,
    )
    .unwrap();
    assert!(
        associate_and_score(&oracle.angles_deg, &truth.theta_tr_deg)
            .unwrap()
            .sqrt()
            <= 0.01
    );

    let mut settings = EstimatorSettings::default();
    settings.anm.rho_override = Some(1e-3 * snap.r.norm());
    let info = LinkInfo {
        g: &g,
        theta_rs_deg: scene.theta_rs_deg(),
        theta_ar_deg: scene.theta_ar_deg(),
        spacing_over_lambda: 0.5,
        k_targets: 3,
        sigma_w: None,
    };
    let est = estimate_doa(Method::Anm, &snap.r, &info, &settings).unwrap();
    let rmse = associate_and_score(&est.angles_deg, &oracle.angles_deg)
        .unwrap()
        .sqrt();
    assert!(
        rmse <= 0.05,
        "{:?} vs {:?}",
        est.angles_deg,
        oracle.angles_deg
    );
}

#[test]
fn plot_script_references_only_the_table() {
    let cfg = small_config(r#""fft-ir""#, "", false);
    let table = run_sweep(&cfg).unwrap();
    let script = table.plot_script(Path::new("out/t.csv"));
    assert!(script.contains("out/t.csv"));
    assert!(script.contains("import matplotlib"));
}

proptest! {
    #[test]
    fn scoring_is_order_free_and_optimal(
        truth in prop::collection::vec(-45.0f64..45.0, 1..6),
        noise in prop::collection::vec(-3.0f64..3.0, 6),
        shift in 0usize..6,
    ) {
        let k = truth.len();
        prop_assert_eq!(associate_and_score(&truth, &truth).unwrap(), 0.0);
        let mut reversed = truth.clone();
        reversed.reverse();
        prop_assert_eq!(associate_and_score(&reversed, &truth).unwrap(), 0.0);

        let est: Vec<f64> = truth.iter().zip(&noise).map(|(t, n)| t + n).collect();
        let mut rotated = est.clone();
        rotated.rotate_left(shift % k);
        let a = associate_and_score(&est, &truth).unwrap();
        let b = associate_and_score(&rotated, &truth).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        // Never worse than the identity pairing.
        let paired = est.iter().zip(&truth).map(|(e, t)| (e - t).powi(2)).sum::<f64>() / k as f64;
        prop_assert!(a <= paired + 1e-12);
        let swapped = associate_and_score(&truth, &est).unwrap();
        prop_assert!((a - swapped).abs() <= 1e-12 * a.max(1.0));
    }
}
