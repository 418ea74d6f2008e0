use std::f64::consts::{FRAC_PI_2, TAU};
use std::process::{Command, Output};
use std::time::Instant;

use serde_json::Value;

fn nvberry(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nvberry")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<(String, String)>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    r.records()
        .map(|rec| {
            header
                .iter()
                .cloned()
                .zip(rec.unwrap().iter().map(String::from))
                .collect()
        })
        .collect()
}

fn field<'a>(row: &'a [(String, String)], key: &str) -> &'a str {
    &row.iter()
        .find(|(k, _)| k == key)
        .unwrap_or_else(|| panic!("no column {key}"))
        .1
}

fn json_rows(text: &str) -> Vec<serde_json::Map<String, Value>> {
    text.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn every_command_runs_with_defaults_within_a_minute() {
    let start = Instant::now();
    for cmd in ["berry", "ramsey", "echo", "sensitivity"] {
        let text = stdout(&nvberry(&[cmd]));
        assert!(!csv_rows(&text).is_empty(), "{cmd}");
    }
    let sweep = nvberry(&[
        "sweep",
        "--set",
        "parameter=theta",
        "--set",
        "min=0.2",
        "--set",
        "max=1.4",
    ]);
    assert_eq!(csv_rows(&stdout(&sweep)).len(), 11);
    assert!(start.elapsed().as_secs() < 60, "{:?}", start.elapsed());
}

#[test]
fn sensitivity_defaults() {
    let rows = csv_rows(&stdout(&nvberry(&["sensitivity"])));
    assert_eq!(rows.len(), 2);
    let echo: f64 = field(&rows[0], "relative_sensitivity").parse().unwrap();
    let ramsey: f64 = field(&rows[1], "relative_sensitivity").parse().unwrap();
    assert_eq!(field(&rows[0], "protocol"), "echo");
    assert_eq!(format!("{echo:.3}"), "0.149");
    assert_eq!(format!("{ramsey:.2}"), "2.11");
}

#[test]
fn berry_loop_at_right_angle() {
    let theta = FRAC_PI_2.to_string();
    let rows = csv_rows(&stdout(&nvberry(&["berry", "--set", &format!("theta={theta}")])));
    let analytic: f64 = field(&rows[0], "phase_analytic").parse().unwrap();
    let numeric: f64 = field(&rows[0], "phase_numeric").parse().unwrap();
    let solid: f64 = field(&rows[0], "solid_angle").parse().unwrap();
    assert!((solid - TAU).abs() < 1e-9);
    // raw gauge: -m times the enclosed solid angle
    assert!((analytic + TAU).abs() < 1e-9);
    assert!((numeric - analytic).abs() < 5e-3, "{}", numeric - analytic);
}

#[test]
fn echo_with_quarter_radian_tilt_gives_four_radians() {
    let out = nvberry(&["echo", "--set", "theta0=0.25", "--set", "rotations=4", "--json"]);
    let rows = json_rows(&stdout(&out));
    assert_eq!(rows.len(), 1);
    let phase = rows[0]["phase_estimate"].as_f64().unwrap();
    assert!((phase - 4.0).abs() < 1e-9, "{phase}");
    let mc = rows[0]["mc_phase_mean"].as_f64().unwrap();
    assert!((mc - 4.0).abs() < 0.02, "{mc}");
}

#[test]
fn exit_codes() {
    let config_error = |args: &[&str]| {
        let out = nvberry(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("config"));
    };
    config_error(&["ramsey", "--set", "omega=-12566"]);
    config_error(&["echo", "--set", "omega_rpm=3"]);
    config_error(&["echo", "--config", "/nonexistent/run.toml"]);
    assert_eq!(nvberry(&["spin"]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, "[geometry]\ntheta0 = 0.25\nomega_rpm = 1\n").unwrap();
    let out = nvberry(&["echo", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("omega_rpm"));

    let physics = |args: &[&str], stage: &str| {
        let out = nvberry(args);
        assert_eq!(out.status.code(), Some(3), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains(stage), "{args:?}");
    };
    physics(&["ramsey", "--set", "theta=0"], "ramsey protocol");
    physics(&["ramsey", "--set", "phi0=100"], "ramsey protocol");
    physics(&["berry", "--set", "ratio=1"], "oracle");
}

#[test]
fn records_round_trip_through_overrides() {
    let first = stdout(&nvberry(&[
        "ramsey",
        "--seed",
        "17",
        "--set",
        "theta=0.9",
        "--set",
        "retard=0.3",
    ]));
    let row = &csv_rows(&first)[0];
    let mut args = vec!["ramsey".to_string()];
    for (k, v) in row {
        if k.contains('.') && !v.is_empty() {
            let v = if v.parse::<f64>().is_ok() {
                v.clone()
            } else {
                format!("\"{v}\"")
            };
            args.push("--set".into());
            args.push(format!("{k}={v}"));
        }
    }
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    assert_eq!(stdout(&nvberry(&args)), first);
}

#[test]
fn output_file_and_json_match_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    let out = nvberry(&["echo", "--out", path.to_str().unwrap()]);
    assert!(out.status.success() && out.stdout.is_empty());
    let csv_text = std::fs::read_to_string(&path).unwrap();
    assert!(csv_text.ends_with("\r\n"));
    let csv = csv_rows(&csv_text);
    let json = json_rows(&stdout(&nvberry(&["echo", "--json"])));
    assert_eq!(csv.len(), json.len());
    for (k, v) in &csv[0] {
        let j = &json[0][k];
        match j {
            Value::Null => assert!(v.is_empty()),
            Value::String(s) => assert_eq!(s, v),
            Value::Number(n) => assert_eq!(n.as_f64().unwrap(), v.parse::<f64>().unwrap(), "{k}"),
            other => panic!("{other}"),
        }
    }
}

#[test]
fn columns_depend_only_on_the_command() {
    let header = |args: &[&str]| stdout(&nvberry(args)).lines().next().unwrap().to_string();
    assert_eq!(
        header(&["berry"]),
        header(&["berry", "--set", "path=echo", "--set", "rotations=1"])
    );
    assert_eq!(
        header(&["ramsey"]),
        header(&["ramsey", "--set", "readout.model=\"poisson\""])
    );
}

#[test]
fn sweep_is_ordered_and_reproducible() {
    let args = [
        "sweep",
        "--set",
        "sweep.command=echo",
        "--set",
        "parameter=theta0",
        "--set",
        "min=0.05",
        "--set",
        "max=0.3",
        "--set",
        "count=6",
        "--seed",
        "3",
    ];
    let a = stdout(&nvberry(&args));
    assert_eq!(a, stdout(&nvberry(&args)));
    let rows = csv_rows(&a);
    assert_eq!(rows.len(), 6);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(field(row, "sweep.index"), i.to_string());
        assert_eq!(field(row, "readout.seed"), (3 + i).to_string());
        let theta0: f64 = field(row, "geometry.theta0").parse().unwrap();
        let phase: f64 = field(row, "phase_estimate").parse().unwrap();
        assert!((phase - 16.0 * theta0).abs() < 1e-9);
    }
}
