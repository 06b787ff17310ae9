use std::process::{Command, Output};

use serde_json::Value;

fn rabi2(args: &[&str]) -> Output {
    rabi2_env(args, &[])
}

fn rabi2_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut command = Command::new(env!("CARGO_BIN_EXE_rabi2"));
    for (key, _) in std::env::vars().filter(|(k, _)| k.starts_with("RABI2_")) {
        command.env_remove(key);
    }
    command.args(args).envs(env.iter().copied()).output().expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("utf-8")
}

/// Rows of a CSV document as column-name lookups.
fn csv_rows(output: &Output) -> Vec<std::collections::HashMap<String, String>> {
    let text = stdout(output);
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().expect("header").split(',').map(str::to_owned).collect();
    lines.map(|l| header.iter().cloned().zip(l.split(',').map(str::to_owned)).collect()).collect()
}

fn real(row: &std::collections::HashMap<String, String>, column: &str) -> f64 {
    row[column].parse().expect("numeric column")
}

/// Energy brackets over which the sign column flips.
fn sign_changes(output: &Output) -> Vec<(f64, f64)> {
    let rows = csv_rows(output);
    rows.windows(2).filter(|w| w[0]["sign"] != w[1]["sign"]).map(|w| (real(&w[0], "energy"), real(&w[1], "energy"))).collect()
}

fn brackets(bracket: (f64, f64), level: f64) -> bool {
    // A root on a grid point may flip the sign on either side of it.
    bracket.0 - 1e-12 <= level && level <= bracket.1 + 1e-12
}

#[test]
fn spectrum_without_splitting_lists_degenerate_pairs() {
    let out = rabi2(&["spectrum", "--omega0", "0", "--omega", "1", "--g", "0.2", "--emin", "-0.45", "--emax", "2.0"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).starts_with("omega0,omega,g,sector,index,energy,residual,order_used\n"));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 8);
    for (pair, level) in rows.chunks(2).zip([-0.2, 0.4, 1.0, 1.6]) {
        for row in pair {
            assert!((real(row, "energy") - level).abs() < 1e-8, "{row:?}");
            assert_eq!(real(row, "g"), 0.2);
        }
        assert_ne!(pair[0]["sector"], pair[1]["sector"]);
    }
}

#[test]
fn spectrum_exit_codes() {
    let ok = rabi2(&["spectrum", "--omega0", "1", "--omega", "2", "--g", "0.26"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(csv_rows(&ok).len() >= 4);

    let bad = rabi2(&["spectrum", "--omega0", "1", "--omega", "1", "--g", "0.3"]);
    assert_eq!(bad.status.code(), Some(2));
    let message = String::from_utf8_lossy(&bad.stderr);
    assert!(message.contains("4|g| = 1.2") && message.contains("omega = 1"), "{message}");

    let collapse = rabi2(&["spectrum", "--omega0", "1", "--omega", "1", "--g", "0.245"]);
    assert_eq!(collapse.status.code(), Some(3));
}

#[test]
fn invalid_configuration_is_rejected() {
    for args in [
        ["--precision-bits", "32"],
        ["--z", "100,100"],
        ["--tol-root", "-1"],
    ] {
        let mut full = vec!["spectrum", "--g", "0.1"];
        full.extend(args);
        assert_eq!(rabi2(&full).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn gtrace_sign_changes() {
    let base = ["gtrace", "--omega0", "0", "--omega", "1", "--g", "0.2", "--sector", "minus", "--samples", "41", "--z", "100"];
    let mut args = base.to_vec();
    args.extend(["--emin", "-0.4", "--emax", "0"]);
    let out = rabi2(&args);
    assert!(out.status.success());
    assert_eq!(csv_rows(&out).len(), 41);
    let changes = sign_changes(&out);
    assert_eq!(changes.len(), 1);
    assert!(brackets(changes[0], -0.2), "{changes:?}");

    let mut args = base.to_vec();
    args.extend(["--emin", "-0.18", "--emax", "0.38"]);
    assert!(sign_changes(&rabi2(&args)).is_empty());

    let out = rabi2(&[
        "gtrace", "--omega0", "1", "--omega", "2", "--g", "0.001", "--sector", "I", "--emin", "2", "--emax", "3",
        "--samples", "41", "--z", "100",
    ]);
    let changes = sign_changes(&out);
    assert_eq!(changes.len(), 1);
    assert!(brackets((changes[0].0 - 0.01, changes[0].1 + 0.01), 2.5), "{changes:?}");
}

#[test]
fn juddian_tables() {
    let rows_12 = csv_rows(&rabi2(&["juddian", "--omega0", "1", "--omega", "2"]));
    let find = |n: &str| rows_12.iter().filter(|r| r["n"] == n).collect::<Vec<_>>();
    let n2 = find("2");
    assert_eq!(n2.len(), 1);
    assert!((real(n2[0], "g") - 0.405046).abs() < 1e-6 && (real(n2[0], "energy") - 1.93151).abs() < 1e-5);
    let n3 = find("3");
    assert!((real(n3[0], "g") - 0.313748).abs() < 1e-6 && (real(n3[0], "energy") - 4.45035).abs() < 1e-5);
    assert!((1..=2).contains(&find("4").len()));

    let rows_21 = csv_rows(&rabi2(&["juddian", "--omega0", "2", "--omega", "1", "--n", "2"]));
    assert!((real(&rows_21[0], "g") - 0.17678).abs() < 1e-5 && (real(&rows_21[0], "energy") - 1.2678).abs() < 1e-4);

    let out = rabi2(&["juddian", "--omega0", "0", "--omega", "1"]);
    assert!(out.status.success());
    assert!(csv_rows(&out).len() >= 3);
}

#[test]
fn oracle_comparison_agrees() {
    let out = rabi2(&["oracle", "--omega0", "1", "--omega", "2", "--g", "0.3", "--count", "6", "--compare"]);
    assert!(out.status.success());
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 6);
    assert!((real(&rows[0], "energy") + 0.6578551090297183).abs() < 1e-8);
    for row in &rows {
        assert!(real(row, "difference").abs() < 1e-8, "{row:?}");
    }
}

#[test]
fn check_reports_invariants() {
    let out = rabi2(&["check", "--omega0", "1", "--omega", "2", "--g", "0.3"]);
    assert_eq!(out.status.code(), Some(0), "{}{}", stdout(&out), String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&out);
    assert!(rows.iter().all(|r| r["status"] == "pass"), "{rows:?}");
    for name in ["oracle_equivalence", "z_independence", "mirror_symmetry", "parity_purity", "ratio_decay", "small_g_intercept"] {
        assert!(rows.iter().any(|r| r["invariant"] == name), "{name} missing");
    }

    let out = rabi2(&["check", "--omega0", "0", "--omega", "1", "--g", "0.2"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(&out);
    assert!(rows.iter().any(|r| r["invariant"] == "sector_pair_relation" && r["status"] == "pass"));
    assert!(rows.iter().any(|r| r["invariant"] == "degeneracy" && r["status"] == "pass"));

    assert_eq!(rabi2(&["check", "--omega0", "1", "--omega", "1", "--g", "0.249"]).status.code(), Some(3));
}

#[test]
fn check_names_failing_invariant() {
    // A cutoff this small cannot reproduce the levels to 1e-6.
    let out = rabi2(&["check", "--omega0", "1", "--omega", "2", "--g", "0.3", "--nmax", "20"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("oracle_equivalence"));
}

#[test]
fn sweep_finds_juddian_crossing() {
    let out = rabi2(&[
        "sweep", "--omega0", "1", "--omega", "2", "--g-min", "0.38", "--g-max", "0.43", "--steps", "6", "--emin", "1",
        "--emax", "3",
    ]);
    assert!(out.status.success());
    let rows = csv_rows(&out);
    let crossing = rows
        .iter()
        .find(|r| r["kind"] == "crossing" && (real(r, "g") - 0.405046).abs() < 1e-4)
        .expect("Juddian crossing");
    assert!((real(crossing, "energy") - 1.93151).abs() < 1e-4);
    let mut sectors = [crossing["sector"].as_str(), crossing["sector_b"].as_str()];
    sectors.sort();
    assert_eq!(sectors, ["minus", "plus"]);
    assert!(rows.iter().filter(|r| r["kind"] == "level").all(|r| !r["curve"].is_empty()));
}

#[test]
fn sweep_without_splitting_follows_closed_form() {
    let out = rabi2(&[
        "sweep", "--omega0", "0", "--omega", "1", "--g-min", "0", "--g-max", "0.23", "--steps", "24", "--emin", "-0.55",
        "--emax", "1.5",
    ]);
    assert!(out.status.success());
    let rows = csv_rows(&out);
    assert!(rows.iter().all(|r| r["kind"] == "level"), "degenerate pairs are not crossings");
    let gs: std::collections::BTreeSet<String> = rows.iter().map(|r| r["g"].clone()).collect();
    assert_eq!(gs.len(), 24);
    for row in &rows {
        let g = real(row, "g");
        let omega_big = (1.0 - 16.0 * g * g).sqrt();
        let e = real(row, "energy");
        let nearest = (0..20).map(|n| (e - (-0.5 + (n as f64 + 0.5) * omega_big)).abs()).fold(f64::INFINITY, f64::min);
        assert!(nearest < 1e-8, "{row:?}");
    }
}

#[test]
fn sweep_fails_when_too_many_points_fail() {
    let out = rabi2(&["sweep", "--omega0", "0", "--omega", "1", "--g-min", "0.2", "--g-max", "0.3", "--steps", "5", "--emin", "-0.5", "--emax", "0.5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!csv_rows(&out).is_empty(), "successful points are still printed");
    assert!(String::from_utf8_lossy(&out.stderr).contains("g = 0.25"));
}

#[test]
fn output_is_deterministic() {
    let args = ["spectrum", "--omega0", "1", "--omega", "2", "--g", "0.3", "--emin", "-1", "--emax", "2"];
    let first = rabi2(&args);
    let second = rabi2(&args);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
    let serial = rabi2(&[&args[..], &["--jobs", "1"]].concat());
    assert_eq!(first.stdout, serial.stdout);
}

#[test]
fn json_envelope_mirrors_csv() {
    let args = ["spectrum", "--omega0", "0", "--omega", "1", "--g", "0.2", "--emin", "-0.45", "--emax", "0.5"];
    let csv = csv_rows(&rabi2(&args));
    let out = rabi2(&[&args[..], &["--format", "json"]].concat());
    let doc: Value = serde_json::from_slice(&out.stdout).expect("single JSON document");
    assert_eq!(doc["meta"]["command"], "spectrum");
    assert_eq!(doc["meta"]["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(doc["meta"]["config"]["model"]["g"], 0.2);
    assert_eq!(doc["meta"]["config"]["run"]["precision_bits"], 256);
    let json_rows = doc["rows"].as_array().unwrap();
    assert_eq!(json_rows.len(), csv.len());
    for (j, c) in json_rows.iter().zip(&csv) {
        assert_eq!(j["sector"], c["sector"].as_str());
        assert_eq!(j["energy"].as_f64().unwrap(), real(c, "energy"));
        assert_eq!(j["order_used"].as_i64().unwrap().to_string(), c["order_used"]);
    }
}

#[test]
fn flags_override_environment() {
    let from_env = rabi2_env(&["oracle", "--count", "1", "--nmax", "40"], &[("RABI2_G", "0.1"), ("RABI2_FORMAT", "json")]);
    let doc: Value = serde_json::from_slice(&from_env.stdout).expect("json from environment");
    assert_eq!(doc["rows"][0]["g"], 0.1);

    let overridden = rabi2_env(&["oracle", "--count", "1", "--nmax", "40", "--g", "0.05", "--format", "csv"], &[("RABI2_G", "0.1"), ("RABI2_FORMAT", "json")]);
    let rows = csv_rows(&overridden);
    assert_eq!(real(&rows[0], "g"), 0.05);
}
