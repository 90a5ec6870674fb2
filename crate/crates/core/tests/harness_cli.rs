use std::path::Path;
use std::process::Command;

use csi_feedback::cli::run_cli;
use csi_feedback::experiment::{
    emit_csv, render_csv, run_sweep, ExperimentConfig, ResultTable, SweepAxis, CSV_HEADER,
};
use csi_feedback::channel::FadingConfig;
use csi_feedback::experiment::trial_traces;
use csi_feedback::metrics::Method;
use num_complex::Complex64;
use csi_feedback::Error;

const BIN: &str = env!("CARGO_BIN_EXE_csi-feedback");

fn tiny() -> ExperimentConfig {
    ExperimentConfig {
        trials: 3,
        samples_per_trial: 150,
        bits: vec![1, 2],
        tau: vec![0.5],
        ..ExperimentConfig::default()
    }
}

fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["csi-feedback"];
    full.extend_from_slice(args);
    let code = run_cli(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn write_config(dir: &Path, config: &ExperimentConfig) -> String {
    let path = dir.join("run.conf");
    std::fs::write(&path, config.to_config_text()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn binary_without_arguments_fails_with_usage() {
    let out = Command::new(BIN).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--preset"));
}

#[test]
fn unknown_flag_and_bad_values_fail() {
    assert_ne!(cli(&["--frobnicate"]).0, 0);
    assert_ne!(cli(&["--preset", "fig9"]).0, 0);
    assert_ne!(cli(&["--preset", "fig3", "--sweep", "doppler"]).0, 0);
    assert_ne!(cli(&["--seed", "1"]).0, 0);
    assert_ne!(cli(&["--preset", "fig3", "--verbose"]).0, 0);
    assert_eq!(cli(&["--help"]).0, 0);
}

#[test]
fn missing_or_invalid_config_file_fails() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.conf");
    let (code, _, err) = cli(&["--config", missing.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("nope.conf"), "{err}");

    let bad = dir.path().join("bad.conf");
    std::fs::write(&bad, "trials = 0\nsweep.bits = 30\n").unwrap();
    let (code, _, err) = cli(&["--config", bad.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("trials") && err.contains("sweep.bits"), "{err}");
}

#[test]
fn config_file_run_writes_rows_and_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), &tiny());
    let out = dir.path().join("run.csv");
    let status = Command::new(BIN)
        .args(["--config", &conf, "--out", out.to_str().unwrap(), "--verbose"])
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    // 2 methods x 2 bit values x 1 tau
    assert_eq!(lines.len(), 1 + 4);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 9));

    let provenance = std::fs::read_to_string(dir.path().join("run.csv.provenance.txt")).unwrap();
    assert!(provenance.contains("seed = 42"));
    let reparsed = ExperimentConfig::parse(&provenance).unwrap();
    assert_eq!(reparsed, tiny());

    let trace = std::fs::read_to_string(dir.path().join("run.csv.trace.csv")).unwrap();
    // one line per report cycle of trial 0, for each of the 4 rows
    assert_eq!(trace.lines().count(), 1 + 4 * 150);
    assert!(trace.contains(",prediction,"));
}

#[test]
fn seed_and_sweep_overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), &tiny());
    let (code, csv, _) = cli(&["--config", &conf, "--seed", "7", "--sweep", "tau"]);
    assert_eq!(code, 0);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",3,7")), "{csv}");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), &tiny());
    let a = cli(&["--config", &conf]);
    let b = cli(&["--config", &conf]);
    assert_eq!(a.0, 0);
    assert_eq!(a.1, b.1);
    let c = cli(&["--config", &conf, "--seed", "43"]);
    assert_ne!(a.1, c.1);
}

#[test]
fn empty_table_is_an_error_and_writes_nothing() {
    let table = ResultTable { config: tiny(), rows: Vec::new(), trace: Vec::new() };
    assert!(matches!(render_csv(&table), Err(Error::Contract(_))));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.csv");
    assert!(emit_csv(&table, &path).is_err());
    assert!(!path.exists());
}

#[test]
fn single_row_table_renders_two_lines() {
    let config = ExperimentConfig {
        bits: vec![3],
        methods: csi_feedback::experiment::MethodSelection::Proposed,
        ..tiny()
    };
    let table = run_sweep(&config).unwrap();
    assert_eq!(table.rows.len(), 1);
    let csv = render_csv(&table).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().starts_with("proposed,3,0.5,"));
}

#[test]
fn row_order_follows_sweep_axis() {
    let mut config = tiny();
    config.tau = vec![0.1, 0.5];
    let by_bits = run_sweep(&config).unwrap();
    let keys: Vec<(u32, f64)> = by_bits.rows.iter().map(|r| (r.bits, r.tau)).collect();
    assert_eq!(keys[..4], [(1, 0.1), (1, 0.1), (2, 0.1), (2, 0.1)]);
    config.axis = SweepAxis::Tau;
    let by_tau = run_sweep(&config).unwrap();
    let keys: Vec<(u32, f64)> = by_tau.rows.iter().map(|r| (r.bits, r.tau)).collect();
    assert_eq!(keys[..4], [(1, 0.1), (1, 0.1), (1, 0.5), (1, 0.5)]);
    // same numbers either way
    for row in &by_bits.rows {
        let other = by_tau.find(row.method, row.bits, row.tau).unwrap();
        assert_eq!(row.mse, other.mse);
    }
}

#[test]
fn methods_share_the_channel_realizations() {
    // a wide range and B = 16 make both reconstructions equal the UE
    // estimate up to ~1e-5; with independent draws per method the errors
    // would differ by Monte Carlo noise of order 1e-2
    let config = ExperimentConfig { bits: vec![16], kappa: 8.0, ..tiny() };
    let table = run_sweep(&config).unwrap();
    let c = table.find(Method::Conventional, 16, 0.5).unwrap();
    let p = table.find(Method::Proposed, 16, 0.5).unwrap();
    assert!((c.mse - p.mse).abs() < 1e-6, "{} vs {}", c.mse, p.mse);
    assert!((c.snr_linear - p.snr_linear).abs() < 1e-4 * c.snr_linear);
}

#[test]
fn trial_draws_do_not_depend_on_trial_count() {
    let fading = FadingConfig::gauss_markov(0.5).unwrap();
    let few = ExperimentConfig { trials: 1, ..tiny() };
    let many = ExperimentConfig { trials: 50, ..tiny() };
    let (h1, v1) = trial_traces(&few, &fading, 0).unwrap();
    let (h2, v2) = trial_traces(&many, &fading, 0).unwrap();
    assert_eq!(h1, h2);
    assert_eq!(v1, v2);
    let (other, _) = trial_traces(&many, &fading, 1).unwrap();
    let cross: Complex64 = h2.iter().zip(&other).map(|(a, b)| a.gains()[0] * b.gains()[0].conj()).sum();
    assert!(cross.norm() / (h2.len() as f64) < 0.5);
    assert_ne!(h2, other);
}

#[test]
fn static_channel_needs_no_prediction_payload() {
    let config = ExperimentConfig {
        tau: vec![0.0],
        noise_variance: 0.0,
        lossless_init: true,
        ..tiny()
    };
    let table = run_sweep(&config).unwrap();
    for row in table.rows.iter().filter(|r| r.method == Method::Proposed) {
        assert_eq!(row.diagnostics.prediction_payload_bits, 0);
        assert_eq!(row.avg_bits, 1.0);
    }
}
