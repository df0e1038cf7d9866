use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command;

use retarded_transfer::cli::{
    figure_preset, run_figure_preset, run_scenario, run_sweep, sweep_rows, CliError,
    ScenarioConfig, SweepConfig, SweepParameter,
};
use retarded_transfer::model::phase_from_eta;
use tempfile::tempdir;

const BIN: &str = env!("CARGO_BIN_EXE_retarded-transfer");

fn read_columns(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<f64>], name: &str) -> Vec<f64> {
    let j = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[j]).collect()
}

#[test]
fn scenario_csv_schema() {
    let dir = tempdir().unwrap();
    let cfg = ScenarioConfig {
        theta: PI / 2.0,
        t_max_gamma: 3.0,
        output_path: dir.path().join("fig2e.csv"),
        ..Default::default()
    };
    let manifest = run_scenario(&cfg).unwrap();
    let (header, rows) = read_columns(&cfg.output_path);
    assert_eq!(
        header.join(","),
        "t_gamma,re_c_a,re_c_b,im_c_a,im_c_b,P_a,P_b,P_tot,S"
    );
    assert_eq!(rows.len(), manifest.rows);
    let first = fs::read_to_string(&cfg.output_path).unwrap();
    let value = first.lines().nth(2).unwrap().split(',').nth(1).unwrap();
    // 17 significant digits
    assert_eq!(
        value
            .split('e')
            .next()
            .unwrap()
            .replace(['.', '-'], "")
            .len(),
        17
    );
}

#[test]
fn zero_horizon_writes_the_initial_state() {
    let dir = tempdir().unwrap();
    let cfg = ScenarioConfig {
        system: "trimer".into(),
        initial: "c".into(),
        t_max_gamma: 0.0,
        output_path: dir.path().join("t0.csv"),
        ..Default::default()
    };
    run_scenario(&cfg).unwrap();
    let (header, rows) = read_columns(&cfg.output_path);
    assert_eq!(rows.len(), 1);
    assert_eq!(column(&header, &rows, "P_c"), vec![1.0]);
    assert_eq!(column(&header, &rows, "P_a"), vec![0.0]);
    assert_eq!(column(&header, &rows, "S"), vec![0.0]);
}

#[test]
fn unknown_system_names_the_field() {
    let cfg = ScenarioConfig {
        system: "quadrumer".into(),
        ..Default::default()
    };
    match run_scenario(&cfg) {
        Err(err @ CliError::Validation { .. }) => assert_eq!(err.field(), Some("system")),
        other => panic!("expected a validation error, got {other:?}"),
    }

    let out = Command::new(BIN)
        .args(["simulate", "--system", "quadrumer"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["field"], "system");
    assert_eq!(err["error"]["kind"], "validation");
}

#[test]
fn identical_configs_are_byte_identical() {
    let dir = tempdir().unwrap();
    let mut digests = Vec::new();
    let mut bodies = Vec::new();
    for name in ["one.csv", "two.csv"] {
        let cfg = ScenarioConfig {
            system: "giant-dimer".into(),
            theta: 1.0,
            t_max_gamma: 4.0,
            output_path: dir.path().join(name),
            ..Default::default()
        };
        digests.push(run_scenario(&cfg).unwrap().sha256);
        bodies.push(fs::read(&cfg.output_path).unwrap());
    }
    assert_eq!(digests[0], digests[1]);
    assert_eq!(bodies[0], bodies[1]);
}

#[test]
fn manifest_phase_matches_model() {
    let dir = tempdir().unwrap();
    for eta in [0.56, 0.574, 0.588, 0.056] {
        let cfg = ScenarioConfig {
            eta,
            t_max_gamma: 1.0,
            output_path: dir.path().join(format!("eta{eta}.csv")),
            ..Default::default()
        };
        run_scenario(&cfg).unwrap();
        let text = fs::read_to_string(dir.path().join(format!("eta{eta}.manifest.json"))).unwrap();
        let manifest: serde_json::Value = serde_json::from_str(&text).unwrap();
        let phi = manifest["resolved"]["phi"].as_f64().unwrap();
        assert_eq!(
            phi.to_bits(),
            phase_from_eta(112.19, eta).unwrap().to_bits()
        );
        assert_eq!(manifest["resolved"]["tau"].as_f64().unwrap(), eta);
        assert_eq!(manifest["resolved"]["h"].as_f64().unwrap(), eta / 200.0);
    }
}

#[test]
fn theta_sweep_peaks_at_half_pi() {
    let sweep = SweepConfig {
        base: ScenarioConfig {
            t_max_gamma: 15.0,
            steps_per_delay: 100,
            ..Default::default()
        },
        parameter: SweepParameter::Theta,
        values: vec![0.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0, PI],
        paired: true,
        keep_trajectories: false,
        output_path: "unused.csv".into(),
    };
    let metrics: Vec<f64> = sweep_rows(&sweep)
        .unwrap()
        .iter()
        .map(|r| r.metric.unwrap())
        .collect();
    let best = metrics.iter().cloned().fold(f64::MIN, f64::max);
    assert_eq!(best, metrics[2]);
}

#[test]
fn eta_sweep_decreases() {
    let dir = tempdir().unwrap();
    let sweep = SweepConfig {
        base: ScenarioConfig {
            theta: PI / 2.0,
            t_max_gamma: 15.0,
            steps_per_delay: 50,
            ..Default::default()
        },
        parameter: SweepParameter::Eta,
        values: vec![0.056, 0.56, 1.12],
        paired: true,
        keep_trajectories: true,
        output_path: dir.path().join("eta.csv"),
    };
    let manifest = run_sweep(&sweep).unwrap();
    let m: Vec<f64> = manifest.rows.iter().map(|r| r.metric.unwrap()).collect();
    assert!(m[0] > m[1] && m[1] > m[2], "{m:?}");
    assert!(dir.path().join("eta_002.csv").exists());
    let text = fs::read_to_string(dir.path().join("eta.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "eta,metric,P_tot_end,circulation");
    assert_eq!(lines.len(), 4);
    // dimers carry no circulation label
    assert!(lines[1..].iter().all(|l| l.ends_with(',')));
}

#[test]
fn empty_sweep_is_rejected() {
    let sweep = SweepConfig {
        base: ScenarioConfig::default(),
        parameter: SweepParameter::Theta,
        values: vec![],
        paired: true,
        keep_trajectories: false,
        output_path: "never.csv".into(),
    };
    let err = run_sweep(&sweep).unwrap_err();
    assert_eq!(err.field(), Some("values"));
}

#[test]
fn fig2b_curves_overlap() {
    let dir = tempdir().unwrap();
    let preset = figure_preset("fig2b")
        .unwrap()
        .with_overrides(Some(8.0), None);
    let manifest = run_figure_preset(&preset, dir.path()).unwrap();
    assert_eq!(manifest.panels[0].nonreciprocity_metric, Some(0.0));
    let (ha, ra) = read_columns(&dir.path().join("fig2b_init_a.csv"));
    let (hb, rb) = read_columns(&dir.path().join("fig2b_init_b.csv"));
    assert_eq!(column(&ha, &ra, "P_b"), column(&hb, &rb, "P_a"));
}

#[test]
fn fig4c_circulates_acba() {
    let dir = tempdir().unwrap();
    let manifest = run_figure_preset(&figure_preset("fig4c").unwrap(), dir.path()).unwrap();
    assert_eq!(
        manifest.panels[0].circulation.as_deref(),
        Some("a->c->b->a")
    );
    assert_eq!(manifest.t_max_gamma, 15.0);
}

#[test]
fn preset_horizons() {
    assert_eq!(figure_preset("fig2a").unwrap().t_max_gamma, 15.0);
    assert_eq!(figure_preset("fig3d").unwrap().panels.len(), 3);
    assert_eq!(figure_preset("fig5f").unwrap().t_max_gamma, 40.0);
    assert_eq!(figure_preset("figB2b").unwrap().t_max_gamma, 50.0);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempdir().unwrap();
    let config = dir.path().join("scenario.json");
    fs::write(
        &config,
        r#"{"system": "small-dimer", "eta": 0.3, "theta": 0.0, "t_max_gamma": 1.0}"#,
    )
    .unwrap();
    let out_csv = dir.path().join("run.csv");
    let out = Command::new(BIN)
        .args(["simulate", "--config"])
        .arg(&config)
        .args([
            "--theta",
            "-pi/2",
            "--eta",
            "0.56",
            "--outputs",
            "populations,P_tot",
            "-o",
        ])
        .arg(&out_csv)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let manifest: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(manifest["resolved"]["eta"], 0.56);
    assert_eq!(manifest["resolved"]["theta"], -PI / 2.0);
    assert_eq!(manifest["resolved"]["t_max_gamma"], 1.0);
    let (header, _) = read_columns(&out_csv);
    assert_eq!(header.join(","), "t_gamma,P_a,P_b,P_tot");
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempdir().unwrap();
    let config = dir.path().join("bad.json");
    fs::write(&config, r#"{"sytem": "small-dimer"}"#).unwrap();
    let out = Command::new(BIN)
        .args(["simulate", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sytem"));
}

#[test]
fn physical_units_convert() {
    let dir = tempdir().unwrap();
    let out = Command::new(BIN)
        .args(["simulate", "--omega0-ghz", "3.276", "--t-max", "0", "-o"])
        .arg(dir.path().join("u.csv"))
        .output()
        .unwrap();
    let manifest: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let w = manifest["resolved"]["omega0_over_gamma"].as_f64().unwrap();
    assert_eq!(w, 3.276 * 1e3 / 29.2);
}

#[test]
fn analyze_reports_predicate() {
    let out = Command::new(BIN)
        .args([
            "analyze",
            "--system",
            "giant-dimer",
            "--eta",
            "0.154",
            "--phi",
            "5.5pi",
            "--theta",
            "pi/2",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["reciprocity_predicted"], true);
    assert_eq!(report["sdomain"].as_array().unwrap().len(), 3);
    for sample in report["sdomain"].as_array().unwrap() {
        assert!(sample["modulus_asymmetry"].as_f64().unwrap().abs() <= 1e-12);
    }

    let out = Command::new(BIN)
        .args(["analyze", "--theta", "pi/2", "--s", "0.5"])
        .output()
        .unwrap();
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["reciprocity_predicted"], false);
}

#[test]
fn sweep_subcommand_writes_summary() {
    let dir = tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    let out = Command::new(BIN)
        .args([
            "sweep",
            "--system",
            "trimer",
            "--j",
            "1",
            "--theta",
            "pi/2",
            "--parameter",
            "eta",
        ])
        .args(["--values", "0.56", "--t-max", "15", "-o"])
        .arg(&csv)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(&csv).unwrap();
    assert!(
        text.lines().nth(1).unwrap().ends_with(",a->c->b->a"),
        "{text}"
    );
    assert!(dir.path().join("s.manifest.json").exists());
}

#[test]
fn figure_subcommand_rejects_unknown_preset() {
    let out = Command::new(BIN)
        .args(["figure", "fig7q"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "unknown-preset");
}
