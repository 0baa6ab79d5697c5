use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lifmf(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lifmf"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn version_carries_build_identifier() {
    let tmp = tempfile::tempdir().unwrap();
    let out = lifmf(tmp.path(), &["--version"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("lifmf 0.1.0 (commit "), "{text}");
}

#[test]
fn regime_reports_blow_up_parameters() {
    let tmp = tempfile::tempdir().unwrap();
    let out = lifmf(tmp.path(), &["regime", "--h", "0.2", "--v-r", "0.1", "--sigma0", "6", "--J", "6"]);
    assert_eq!(out.status.code(), Some(0));
    let stdout: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(stdout["blowup_all_data"], true);
    assert_eq!(stdout["exists_one_ss"], false);
    let dir = tmp.path().join("lifmf-out/regime");
    assert_eq!(json(&dir.join("regime.json")), stdout);
    assert_eq!(json(&dir.join("resolved_config.json"))["J"], 6.0);
}

#[test]
fn network_raster_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let args = |out: &'static str| {
        vec![
            "simulate-network", "--h", "0.1", "--v-r", "0.1", "--sigma0", "200", "--J", "9", "--N", "100",
            "--horizon", "1", "--seed", "7", "--out", out,
        ]
    };
    assert_eq!(lifmf(tmp.path(), &args("a")).status.code(), Some(0));
    assert_eq!(lifmf(tmp.path(), &args("b")).status.code(), Some(0));
    let a = fs::read(tmp.path().join("a/raster.csv")).unwrap();
    let b = fs::read(tmp.path().join("b/raster.csv")).unwrap();
    assert_eq!(a, b);
    assert!(a.starts_with(b"t,neuron,cascade\n"));
    let summary = json(&tmp.path().join("a/summary.json"));
    // synchronous regime: some cascade involves most of the network
    assert!(summary["max_cascade"].as_u64().unwrap() > 50);
}

#[test]
fn steady_state_writes_stationary_profile() {
    let tmp = tempfile::tempdir().unwrap();
    let out = lifmf(
        tmp.path(),
        &["steady-state", "--h", "0.05", "--v-r", "0.3", "--sigma0", "50", "--J", "0", "--out", "s"],
    );
    assert_eq!(out.status.code(), Some(0));
    let dir = tmp.path().join("s");
    let density = fs::read_to_string(dir.join("density_0.csv")).unwrap();
    assert!(density.starts_with("v,p,segment_id\n"));
    let grid = fs::read_to_string(dir.join("grid_0.csv")).unwrap();
    let mass: f64 = grid
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap())
        .sum::<f64>()
        / 400.0;
    assert!((mass - 1.0).abs() < 1e-9);
    let steady = json(&dir.join("steady.json"));
    assert_eq!(steady["states"][0]["sigma"], 50.0);
    assert!(dir.join("resolved_config.json").exists());
}

#[test]
fn resolved_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("c.json"),
        r#"{"h": 0.2, "v_r": 0.1, "sigma0": 1, "J": 0.5, "t_end": 1, "initial": "gaussian"}"#,
    )
    .unwrap();
    let first = lifmf(tmp.path(), &["solve-pde", "--config", "c.json", "--J", "0.25", "--out", "one"]);
    assert_eq!(first.status.code(), Some(0));
    let resolved = json(&tmp.path().join("one/resolved_config.json"));
    assert_eq!(resolved["J"], 0.25);
    assert_eq!(resolved["init_sd"], 0.1);
    let again = lifmf(
        tmp.path(),
        &["solve-pde", "--config", "one/resolved_config.json", "--out", "two"],
    );
    assert_eq!(again.status.code(), Some(0));
    for name in ["series.csv", "densities.csv"] {
        let a = fs::read(tmp.path().join("one").join(name)).unwrap();
        let b = fs::read(tmp.path().join("two").join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn blow_up_is_a_successful_run() {
    let tmp = tempfile::tempdir().unwrap();
    let out = lifmf(
        tmp.path(),
        &["solve-pde", "--h", "0.2", "--v-r", "0.1", "--sigma0", "6", "--J", "6", "--initial", "interval", "--out", "b"],
    );
    assert_eq!(out.status.code(), Some(0));
    let summary = json(&tmp.path().join("b/summary.json"));
    assert_eq!(summary["blow_up"]["blown_up"], true);
}

#[test]
fn validation_errors_exit_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 5] = [
        &["regime", "--h", "1.5", "--v-r", "0.1", "--sigma0", "1"],
        &["regime", "--h", "0.2", "--v-r", "0.2", "--sigma0", "1", "--strict-ratio"],
        &["regime", "--v-r", "0.2", "--sigma0", "1"],
        &["solve-pde", "--h", "0.2", "--v-r", "0.1", "--sigma0", "1", "--dt", "0.5"],
        &["scan-sigma", "--h", "0.2", "--v-r", "0.1", "--sigma0", "1", "--J", "0"],
    ];
    for args in cases {
        let out = lifmf(tmp.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let err = String::from_utf8(out.stderr).unwrap();
        assert_eq!(err.lines().count(), 1, "{err}");
    }
}

#[test]
fn integer_ratio_is_a_warning_by_default() {
    let tmp = tempfile::tempdir().unwrap();
    let out = lifmf(tmp.path(), &["regime", "--h", "0.2", "--v-r", "0.2", "--sigma0", "1"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stderr).unwrap().contains("integer"));
}

#[test]
fn numeric_failures_exit_with_3() {
    let tmp = tempfile::tempdir().unwrap();
    let out = lifmf(
        tmp.path(),
        &[
            "verify-stability", "--h", "0.2", "--v-r", "0.1", "--sigma0", "1", "--J", "0.5", "--t-end", "1",
            "--points", "40", "--root-index", "4",
        ],
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(tmp.path().join("lifmf-out/verify-stability/resolved_config.json").exists());
}

#[test]
fn unknown_config_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.json"), r#"{"h": 0.2, "vr": 0.1}"#).unwrap();
    let out = lifmf(tmp.path(), &["regime", "--config", "c.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn scan_and_verification_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let scan = lifmf(
        tmp.path(),
        &["scan-sigma", "--h", "0.2", "--v-r", "0.1", "--sigma0", "0.02", "--J", "7", "--out", "scan", "--threads", "2"],
    );
    assert_eq!(scan.status.code(), Some(0));
    let roots = json(&tmp.path().join("scan/roots.json"));
    assert_eq!(roots.as_array().unwrap().len(), 2);
    let csv = fs::read_to_string(tmp.path().join("scan/scan.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("sigma,F,G,F_minus_G"));
    assert_eq!(csv.lines().count(), 401);

    let verify = lifmf(
        tmp.path(),
        &["verify-contraction", "--h", "0.2", "--v-r", "0.1", "--sigma0", "1", "--t-end", "20", "--out", "vc"],
    );
    assert_eq!(verify.status.code(), Some(0));
    let report = json(&tmp.path().join("vc/report.json"));
    assert_eq!(report["monotone"], true);
    let decay = fs::read_to_string(tmp.path().join("vc/decay.csv")).unwrap();
    assert_eq!(decay.lines().next(), Some("t,tv,envelope"));

    let doeblin = lifmf(
        tmp.path(),
        &["doeblin-check", "--h", "0.2", "--v-r", "0.1", "--sigma0", "1", "--replicas", "5000", "--out", "d"],
    );
    assert_eq!(doeblin.status.code(), Some(0));
    let rows = fs::read_to_string(tmp.path().join("d/doeblin.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 5 * 5);
}
