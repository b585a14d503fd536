//! End-to-end checks of the batch driver binary: exit codes, artifact
//! layout, and bit-level determinism of the emitted files.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run_cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dampwave")).args(args).output().expect("spawn dampwave")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

/// Strong-damping config with a single velocity bump. Kept small: the CLI
/// tests exercise plumbing, not accuracy.
fn strong_config(t_end: f64, resolution: f64) -> String {
    format!(
        r#"{{
  "lame": {{ "a": 0.6, "b": 1.0 }},
  "damping": {{ "kind": "Critical", "V0": 2.5 }},
  "init": {{
    "L": 0.5,
    "u1_bumps": [ {{ "center": [0.0, 0.0], "radius": 0.5, "amplitude": [1.0, 0.5] }} ]
  }},
  "T": {t_end},
  "case": "StrongDamping",
  "resolution": {resolution}
}}"#
    )
}

fn zero_data_config(t_end: f64, resolution: f64) -> String {
    format!(
        r#"{{
  "lame": {{ "a": 0.6, "b": 1.0 }},
  "damping": {{ "kind": "Critical", "V0": 2.5 }},
  "init": {{ "L": 0.5 }},
  "T": {t_end},
  "case": "StrongDamping",
  "resolution": {resolution}
}}"#
    )
}

#[test]
fn zero_data_run_exits_zero_with_all_zero_series() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write(&cfg, &zero_data_config(2.0, 16.0));
    let out_dir = dir.path().join("out");
    let out = run_cli(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));

    let series = fs::read_to_string(out_dir.join("series.csv")).unwrap();
    let mut lines = series.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,E_u,l2_sq,dissipation,energy_identity_residual,support_radius,v_identity_residual,e_t,F_t"
    );
    let mut rows = 0;
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 9);
        for v in &fields[1..] {
            assert_eq!(*v, "0", "nonzero value in a zero-data series: {line}");
        }
        rows += 1;
    }
    assert!(rows > 10);

    for report in ["multiplier.json", "potential.json", "rate.json"] {
        assert!(out_dir.join("reports").join(report).is_file(), "missing {report}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["verdicts"]["conservation"]["status"], "pass");
    // T = 2 keeps the decay window below t = 1, so the rate claims are
    // skipped rather than judged on a nonpositive envelope.
    assert_eq!(manifest["verdicts"]["rate"]["status"], "skipped");
    assert_eq!(manifest["records"].as_u64().unwrap(), rows);
}

#[test]
fn malformed_json_exits_two_with_parse_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write(&cfg, "{ \"lame\": { \"a\": 0.6, ");
    let out = run_cli(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    assert!(err.contains("line") && err.contains("column"), "no parse location in: {err}");
}

#[test]
fn reruns_and_the_manifest_echo_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write(&cfg, &strong_config(4.8, 8.0));
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let first = run_cli(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_a.to_str().unwrap(),
    ]);
    assert!(matches!(code(&first), 0 | 1), "stderr: {}", stderr(&first));
    let second = run_cli(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_b.to_str().unwrap(),
    ]);
    assert_eq!(code(&first), code(&second));

    for file in
        ["series.csv", "reports/multiplier.json", "reports/potential.json", "reports/rate.json"]
    {
        let a = fs::read(out_a.join(file)).unwrap();
        let b = fs::read(out_b.join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }

    // The manifest echoes the config; rerunning from the echo reproduces
    // the series byte for byte.
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_a.join("manifest.json")).unwrap()).unwrap();
    let echo = dir.path().join("echo.json");
    write(&echo, &serde_json::to_string(&manifest["config"]).unwrap());
    let out_c = dir.path().join("c");
    let third = run_cli(&[
        "run",
        "--config",
        echo.to_str().unwrap(),
        "--out",
        out_c.to_str().unwrap(),
    ]);
    assert_eq!(code(&third), code(&first));
    assert_eq!(
        fs::read(out_a.join("series.csv")).unwrap(),
        fs::read(out_c.join("series.csv")).unwrap(),
        "series.csv differs when rerun from the manifest's config echo"
    );
}

#[test]
fn sweep_writes_one_directory_per_cell_and_envelope_exponents() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("sweep.json");
    write(
        &spec,
        &format!(
            r#"{{
  "base": {},
  "v0_over_b": [1.5, 4.0],
  "delta": [0.1],
  "resolution": [6.0, 8.0]
}}"#,
            strong_config(4.5, 8.0)
        ),
    );
    let out_dir = dir.path().join("out");
    let out = run_cli(&[
        "sweep",
        "--config",
        spec.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(matches!(code(&out), 0 | 1), "stderr: {}", stderr(&out));

    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(
        lines[0],
        "dir,v0_over_b,delta,resolution,case,status,envelope_exponent,fitted_exponent,verdict"
    );
    assert_eq!(lines.len(), 5, "expected 4 data rows:\n{summary}");
    for line in &lines[1..] {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 9, "unquoted csv row: {line}");
        assert_eq!(fields[5], "ok", "cell did not run cleanly: {line}");
        assert!(out_dir.join(fields[0]).join("series.csv").is_file());
        assert!(out_dir.join(fields[0]).join("manifest.json").is_file());
        // The checked envelope exponent: V0/b - delta for the intermediate
        // cells, 2 for the strong cells.
        match fields[1] {
            "1.5" => {
                assert_eq!(fields[4], "IntermediateDamping");
                assert_eq!(fields[6], "1.4");
            }
            "4" => {
                assert_eq!(fields[4], "StrongDamping");
                assert_eq!(fields[6], "2");
            }
            other => panic!("unexpected ratio {other}"),
        }
    }
}

#[test]
fn empty_sweep_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("sweep.json");
    write(
        &spec,
        &format!(
            r#"{{
  "base": {},
  "v0_over_b": [],
  "delta": [0.1],
  "resolution": [8.0]
}}"#,
            strong_config(4.5, 8.0)
        ),
    );
    let out_dir = dir.path().join("out");
    let out = run_cli(&[
        "sweep",
        "--config",
        spec.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(
        summary,
        "dir,v0_over_b,delta,resolution,case,status,envelope_exponent,fitted_exponent,verdict\n"
    );
    let entries: Vec<_> = fs::read_dir(&out_dir).unwrap().collect();
    assert_eq!(entries.len(), 1, "empty sweep must write only summary.csv");
}

#[test]
fn verify_potential_zero_source_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write(&cfg, &zero_data_config(2.0, 16.0));
    let out_dir = dir.path().join("out");
    let out = run_cli(&[
        "verify-potential",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("potential.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
    assert_eq!(report["poisson"]["zero_source"], true);
}

/// Reference-shaped data: support radius 0.8, one full-width bump. The
/// Poisson gate is calibrated to this curvature at resolution 16.
fn potential_config() -> String {
    r#"{
  "lame": { "a": 0.6, "b": 1.0 },
  "damping": { "kind": "Critical", "V0": 2.5 },
  "init": {
    "L": 0.8,
    "u1_bumps": [ { "center": [0.0, 0.0], "radius": 0.8, "amplitude": [1.0, 0.5] } ]
  },
  "T": 2.0,
  "case": "StrongDamping",
  "resolution": 16.0
}"#
    .to_string()
}

#[test]
fn verify_potential_reports_second_order_refinement() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write(&cfg, &potential_config());
    let out_dir = dir.path().join("out");
    let out = run_cli(&[
        "verify-potential",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("potential.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
    let order = report["refinement_order"].as_f64().unwrap();
    assert!(order >= 1.7, "refinement order {order}");
    assert!(report["poisson"]["relative"].as_f64().unwrap() <= 0.02);
    assert_eq!(report["far_field"]["pass"], true);
    assert_eq!(report["growth"]["all_pass"], true);
}
