//! End-to-end tests of the `cqedkit` binary: exit codes, determinism, and
//! the numbers the subcommands print against the bundled data set.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cqedkit"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

/// Pull the value out of a `  name  = <value> unit` report line.
fn report_value(report: &str, name: &str) -> f64 {
    let line = report
        .lines()
        .find(|l| l.trim_start().starts_with(name))
        .unwrap_or_else(|| panic!("no '{name}' line in:\n{report}"));
    let after_eq = line.split('=').nth(1).unwrap_or_else(|| panic!("no '=' in '{line}'"));
    let token = after_eq.split_whitespace().next().unwrap();
    token.parse().unwrap_or_else(|e| panic!("bad number '{token}' in '{line}': {e}"))
}

#[test]
fn help_exits_zero_and_lists_subcommands() {
    let output = bin().arg("--help").output().expect("run binary");
    assert!(output.status.success());
    let text = stdout(&output);
    for name in ["quantize", "sweep", "fit-s21", "qnd", "cpw"] {
        assert!(text.contains(name), "--help does not mention '{name}'");
    }
}

#[test]
fn quantize_reports_the_bundled_design_point() {
    let output = bin()
        .args(["quantize", "-c"])
        .arg(data("device_config.json"))
        .arg("--out-dir")
        .arg(tempfile::tempdir().unwrap().path())
        .output()
        .expect("run binary");
    assert!(output.status.success(), "stderr: {}", stderr(&output));
    let report = stdout(&output);

    assert!((report_value(&report, "E_J/E_C") - 78.8967).abs() < 1e-3);
    assert!((report_value(&report, "omega_q") - 4.988682).abs() < 1e-5);
    assert!((report_value(&report, "alpha") - -230.078).abs() < 1e-2);
    assert!((report_value(&report, "g") - 54.544).abs() < 1e-2);
    assert!((report_value(&report, "chi_exact") - -0.557495).abs() < 1e-5);
    // The participation-ratio cross-check rides along with the bundled EPR
    // file.
    assert!(report.contains("participation-ratio route"));
    assert!((report_value(&report, "chi(0,1)") - 0.438214).abs() < 1e-5);
}

#[test]
fn junction_energy_given_directly_matches_the_inductance_route() {
    // The config parameterizes the junction as L_j = 10 nH; handing the
    // equivalent E_J through the override must not change a digit.
    let e_j_ghz = cqedkit_core::transmon::lj_to_ej(10e-9).unwrap() / 1e9;

    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let out_a = bin()
        .args(["quantize", "-c"])
        .arg(data("device_config.json"))
        .arg("--out-dir")
        .arg(dir_a.path())
        .output()
        .expect("run binary");
    let out_b = bin()
        .args(["quantize", "-c"])
        .arg(data("device_config.json"))
        .args(["--ej-ghz", &format!("{e_j_ghz}")])
        .arg("--out-dir")
        .arg(dir_b.path())
        .output()
        .expect("run binary");
    assert!(out_a.status.success() && out_b.status.success());

    let csv_a = std::fs::read(dir_a.path().join("quantize.csv")).unwrap();
    let csv_b = std::fs::read(dir_b.path().join("quantize.csv")).unwrap();
    assert_eq!(csv_a, csv_b, "E_J route and L_j route disagree");
}

#[test]
fn quantize_rerun_is_byte_identical() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    for dir in [&dir_a, &dir_b] {
        let output = bin()
            .args(["quantize", "-c"])
            .arg(data("device_config.json"))
            .arg("--out-dir")
            .arg(dir.path())
            .output()
            .expect("run binary");
        assert!(output.status.success());
    }
    let csv_a = std::fs::read(dir_a.path().join("quantize.csv")).unwrap();
    let csv_b = std::fs::read(dir_b.path().join("quantize.csv")).unwrap();
    assert_eq!(csv_a, csv_b);
}

#[test]
fn missing_netlist_exits_two_and_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        r#"{
  "schema_version": 1,
  "netlist": "no_such_netlist.json",
  "junction": { "lj_nH": 10.0 },
  "readout_freq_GHz": 5.988
}"#,
    )
    .unwrap();
    let output = bin().args(["quantize", "-c"]).arg(&config).output().expect("run binary");
    assert_eq!(output.status.code(), Some(2));
    assert!(
        stderr(&output).contains("no_such_netlist.json"),
        "stderr does not name the missing file: {}",
        stderr(&output)
    );
}

#[test]
fn ambiguous_junction_parameterization_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        format!(
            r#"{{
  "schema_version": 1,
  "netlist": "{}",
  "junction": {{ "lj_nH": 10.0, "ej_GHz": 16.0 }},
  "readout_freq_GHz": 5.988
}}"#,
            data("transmon_readout_netlist.json").display()
        ),
    )
    .unwrap();
    let output = bin().args(["quantize", "-c"]).arg(&config).output().expect("run binary");
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("exactly one"));
}

#[test]
fn unsupported_schema_version_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        r#"{
  "schema_version": 2,
  "netlist": "x.json",
  "junction": { "lj_nH": 10.0 },
  "readout_freq_GHz": 5.988
}"#,
    )
    .unwrap();
    let output = bin().args(["quantize", "-c"]).arg(&config).output().expect("run binary");
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("schema_version 2"));
}

#[test]
fn single_point_sweep_matches_quantize() {
    let q_dir = tempfile::tempdir().unwrap();
    let s_dir = tempfile::tempdir().unwrap();
    let quantize = bin()
        .args(["quantize", "-c"])
        .arg(data("device_config.json"))
        .arg("--out-dir")
        .arg(q_dir.path())
        .output()
        .expect("run binary");
    let sweep = bin()
        .args(["sweep", "-c"])
        .arg(data("device_config.json"))
        .args(["--lj-start-nh", "10", "--lj-stop-nh", "10", "--points", "1"])
        .arg("--out-dir")
        .arg(s_dir.path())
        .output()
        .expect("run binary");
    assert!(quantize.status.success() && sweep.status.success());

    let q_csv = std::fs::read_to_string(q_dir.path().join("quantize.csv")).unwrap();
    let s_csv = std::fs::read_to_string(s_dir.path().join("chi_sweep.csv")).unwrap();
    // quantize row: ...,delta_GHz,chi_pert_MHz,chi_exact_MHz,dispersive
    let q_fields: Vec<&str> = q_csv.lines().nth(1).unwrap().split(',').collect();
    // sweep row: delta_GHz,chi_pert_MHz,chi_exact_MHz,flag
    let s_fields: Vec<&str> = s_csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(q_fields[9], s_fields[0], "detuning differs");
    assert_eq!(q_fields[10], s_fields[1], "perturbative chi differs");
    assert_eq!(q_fields[11], s_fields[2], "exact chi differs");
}

#[test]
fn sweep_emits_one_row_per_grid_point_within_the_time_budget() {
    let dir = tempfile::tempdir().unwrap();
    let t0 = Instant::now();
    let output = bin()
        .args(["sweep", "-c"])
        .arg(data("device_config.json"))
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .expect("run binary");
    let elapsed = t0.elapsed();
    assert!(output.status.success(), "stderr: {}", stderr(&output));
    assert!(
        elapsed.as_secs_f64() < 60.0,
        "50-point sweep took {:.1} s",
        elapsed.as_secs_f64()
    );

    let csv = std::fs::read_to_string(dir.path().join("chi_sweep.csv")).unwrap();
    // Header plus the 50 grid points from the bundled sweep spec.
    assert_eq!(csv.lines().count(), 51);

    // Rerun lands byte-identical.
    let dir_b = tempfile::tempdir().unwrap();
    let again = bin()
        .args(["sweep", "-c"])
        .arg(data("device_config.json"))
        .arg("--out-dir")
        .arg(dir_b.path())
        .output()
        .expect("run binary");
    assert!(again.status.success());
    let csv_b = std::fs::read_to_string(dir_b.path().join("chi_sweep.csv")).unwrap();
    assert_eq!(csv, csv_b);
}

#[test]
fn fit_recovers_the_bundled_trace_quality_factors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fit.csv");
    let output = bin()
        .arg("fit-s21")
        .arg(data("synthetic_s21_trace.csv"))
        .arg("--out")
        .arg(&out)
        .output()
        .expect("run binary");
    assert!(output.status.success(), "stderr: {}", stderr(&output));

    let csv = std::fs::read_to_string(&out).unwrap();
    let fields: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    let f_r: f64 = fields[0].parse().unwrap();
    let q_i: f64 = fields[7].parse().unwrap();
    assert!(
        (q_i - 9.2e5).abs() / 9.2e5 < 0.01,
        "Q_i = {q_i} more than 1% from the generation value"
    );
    assert!((f_r - 5.988e9).abs() / 5.988e9 < 1e-7);
}

#[test]
fn featureless_trace_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("flat.csv");
    let mut text = String::from("freq_Hz,re,im\n");
    for i in 0..200 {
        text.push_str(&format!("{},0.8,0.0\n", 5.0e9 + 1e5 * i as f64));
    }
    std::fs::write(&trace, text).unwrap();

    let output = bin().arg("fit-s21").arg(&trace).output().expect("run binary");
    assert_eq!(output.status.code(), Some(1), "stderr: {}", stderr(&output));
    assert!(stderr(&output).contains("no resonance"));
}

#[test]
fn qnd_unanimity_design_point_prints_the_expected_false_positive() {
    let output = bin()
        .args([
            "qnd",
            "--xi",
            "1.5707963267948966",
            "--time-s",
            "1",
            "--reps",
            "5",
            "--eps-ge",
            "0.1",
            "--eps-eg",
            "0.05",
        ])
        .output()
        .expect("run binary");
    assert!(output.status.success(), "stderr: {}", stderr(&output));
    let text = stdout(&output);

    // CSV row: N,k,FP_analytic,...
    let row = text
        .lines()
        .find(|l| l.starts_with("5,5,"))
        .unwrap_or_else(|| panic!("no 5-of-5 CSV row in:\n{text}"));
    let fp: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
    assert!((fp - 1e-5).abs() < 1e-12, "FP = {fp}");
}

#[test]
fn qnd_repetition_sweep_emits_log_linear_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("qnd.csv");
    let output = bin()
        .args([
            "qnd",
            "--xi",
            "1.5707963267948966",
            "--time-s",
            "1",
            "--eps-ge",
            "0.1",
            "--sweep-reps",
            "6",
        ])
        .arg("--out")
        .arg(&out)
        .output()
        .expect("run binary");
    assert!(output.status.success(), "stderr: {}", stderr(&output));

    let csv = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 6);
    for (i, row) in rows.iter().enumerate() {
        let fp: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
        let expected = 0.1f64.powi(i as i32 + 1);
        assert!((fp - expected).abs() / expected < 1e-9, "row {i}: FP = {fp}");
    }
}

#[test]
fn cpw_design_geometry_reports_fifty_ohms() {
    let output = bin()
        .args([
            "cpw",
            "--width-um",
            "15",
            "--gap-um",
            "9",
            "--eps-r",
            "11.45",
            "--length-mm",
            "4.689",
        ])
        .output()
        .expect("run binary");
    assert!(output.status.success(), "stderr: {}", stderr(&output));
    let z0 = report_value(&stdout(&output), "Z0");
    assert!((z0 - 50.0).abs() <= 1.5, "Z0 = {z0} outside 50 ± 1.5 Ω");
}

#[test]
fn cpw_reads_geometry_from_the_project_config() {
    let from_config = bin()
        .args(["cpw", "-c"])
        .arg(data("device_config.json"))
        .output()
        .expect("run binary");
    assert!(from_config.status.success(), "stderr: {}", stderr(&from_config));
    let z0 = report_value(&stdout(&from_config), "Z0");
    assert!((z0 - 50.9375).abs() < 1e-3);

    // A flag overrides the config field: widening the gap raises Z0.
    let widened = bin()
        .args(["cpw", "-c"])
        .arg(data("device_config.json"))
        .args(["--gap-um", "12"])
        .output()
        .expect("run binary");
    assert!(widened.status.success());
    assert!(report_value(&stdout(&widened), "Z0") > z0);
}
