use std::path::Path;
use std::process::{Command, Output};

fn dmosum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dmosum")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = dmosum(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn report_value(report: &str, key: &str) -> String {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key},")))
        .unwrap_or_else(|| panic!("{key} missing from {report}"))
        .to_string()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn null_data_with_huge_threshold_never_alarms() {
    let dir = tempfile::tempdir().unwrap();
    let data = path(dir.path(), "null.csv");
    ok(&["generate", "--d", "5", "--m", "100", "--total-length", "600", "--seed", "3", "--out", &data]);
    let report = ok(&["detect", "--data", &data, "--m", "100", "--h", "50", "--steps", "500", "--c-global", "1e9"]);
    assert_eq!(report_value(&report, "alarm_time_abs"), "");
    assert_eq!(report_value(&report, "steps_executed"), "500");
}

#[test]
fn large_shift_alarms_within_a_window() {
    let dir = tempfile::tempdir().unwrap();
    let data = path(dir.path(), "shift.csv");
    let side = path(dir.path(), "shift.json");
    ok(&[
        "generate", "--d", "100", "--m", "200", "--total-length", "2200", "--shift", "fixed", "--delta", "5", "--tau", "300",
        "--seed", "8", "--sidecar", &side, "--out", &data,
    ]);
    let sidecar = std::fs::read_to_string(&side).unwrap();
    assert!(sidecar.contains("\"tau\": 300"));
    let report = ok(&["detect", "--data", &data, "--m", "200", "--h", "100", "--c-local", "3.44", "--c-global", "7.16"]);
    let alarm: usize = report_value(&report, "alarm_time_abs").parse().unwrap();
    assert!((300..300 + 100).contains(&alarm), "{alarm}");
    let json = ok(&["detect", "--data", &data, "--m", "200", "--h", "100", "--format", "json"]);
    assert!(json.contains(&format!("\"alarm_time_abs\": {alarm}")));
}

#[test]
fn data_errors_exit_3_with_row() {
    let dir = tempfile::tempdir().unwrap();
    let data = path(dir.path(), "three.csv");
    ok(&["generate", "--d", "3", "--m", "20", "--total-length", "50", "--out", &data]);
    let out = dmosum(&["detect", "--data", &data, "--d", "4", "--m", "20", "--h", "10"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 1"));

    let bad = path(dir.path(), "bad.csv");
    std::fs::write(&bad, "1,2\n3,4\n5,oops\n").unwrap();
    let out = dmosum(&["detect", "--data", &bad, "--m", "2", "--h", "1"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 3"));

    let out = dmosum(&["detect", "--data", &path(dir.path(), "missing.csv"), "--d", "2"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn config_errors_exit_2() {
    let out = dmosum(&["calibrate", "--reps", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("reps"));

    let out = dmosum(&["calibrate", "--alpha", "1.5", "--reps", "100", "--d", "2", "--increments", "100"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha"));

    let out = dmosum(&["experiment", "power"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    for name in ["size", "sweep", "bandwidth", "training", "ar1"] {
        assert!(err.contains(name), "{err}");
    }

    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "typo.toml");
    std::fs::write(&cfg, "alhpa = 0.05\n").unwrap();
    let out = dmosum(&["calibrate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alhpa"));

    let out = dmosum(&["detect", "--d", "2"]);
    assert_eq!(out.status.code(), Some(2));
    let out = dmosum(&["experiment", "bandwidth", "--m", "40", "--h0", "50", "--c-global", "5,5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn echo_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = path(dir.path(), "first.csv");
    ok(&[
        "calibrate", "--d", "5", "--reps", "150", "--increments", "600", "--alpha", "0.1,0.05", "--c-local", "0,2", "--seed", "4",
        "--out", &first,
    ]);
    let echo = std::fs::read_to_string(format!("{first}.config.toml")).unwrap();
    assert!(echo.contains("beta = 0.5  # default"));
    let second = path(dir.path(), "second.csv");
    let cfg = path(dir.path(), "echo.toml");
    std::fs::write(&cfg, echo.replace("first.csv", "second.csv")).unwrap();
    ok(&["calibrate", "--config", &cfg]);
    assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());
    let table = std::fs::read_to_string(&first).unwrap();
    assert_eq!(table.lines().count(), 1 + 4);
    assert!(table.starts_with("alpha,c_local,c_global,d,beta,T_tilde,reps,seed\n"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "base.toml");
    std::fs::write(&cfg, "d = 3\nm = 20\ntotal_length = 40\nseed = 1\n").unwrap();
    let a = ok(&["generate", "--config", &cfg]);
    let b = ok(&["generate", "--config", &cfg, "--seed", "2"]);
    assert_eq!(a.lines().count(), 40);
    assert_eq!(a.lines().next().unwrap().split(',').count(), 3);
    assert_ne!(a, b);
}

const SMALL: &[&str] = &["--d", "10", "--m", "60", "--h", "30", "--total-length", "300", "--tau", "150", "--reps", "20"];

#[test]
fn sweep_has_one_row_per_cell() {
    let mut args = vec!["experiment", "sweep", "--delta", "0.5,1,2", "--c-local", "0,3", "--c-global", "6,4"];
    args.extend(SMALL);
    let table = ok(&args);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "family,size,c_local,c_global,add,add_count,trans_avg,detect_rate,fp_rate");
    assert_eq!(lines.len(), 1 + 6);
    args.push("--plot-data");
    let long = ok(&args);
    assert_eq!(long.lines().next().unwrap(), "family,size,c_local,c_global,metric,value");
    assert_eq!(long.lines().count(), 1 + 6 * 5);
}

#[test]
fn bandwidth_marks_the_selected_window() {
    let mut args = vec!["experiment", "bandwidth", "--h0", "20", "--stride", "20", "--delta0", "0.6", "--c-local", "0", "--c-global", "6,6"];
    args.extend(SMALL);
    let table = ok(&args);
    let rows: Vec<Vec<&str>> = table.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.iter().map(|r| r[0]).collect::<Vec<_>>(), ["20", "40", "60"]);
    let selected: Vec<&Vec<&str>> = rows.iter().filter(|r| r[5] == "1").collect();
    assert_eq!(selected.len(), 1);
    assert_eq!(selected[0][0], "20");
}

#[test]
fn training_and_ar1_tables() {
    let t = ok(&[
        "experiment", "training", "--training-sizes", "40,80", "--h", "20", "--d", "5", "--total-length", "300", "--c-global", "1e9,1e9",
        "--reps", "10",
    ]);
    assert_eq!(t.lines().next().unwrap(), "m,c_global,empirical_size,mse_mean,mse_sd");
    assert_eq!(t.lines().count(), 3);

    let mut args = vec!["experiment", "ar1", "--phi", "0,0.5", "--p", "10", "--delta", "1", "--alpha", "0.2", "--calibration-reps", "60"];
    args.extend(SMALL);
    let a = ok(&args);
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines[0], "phi,method,p,delta,c_global,fp_rate,fp_per_1000,add,add_count,detect_rate,trans_avg");
    assert_eq!(lines.len(), 1 + 2 * 3);
    // with iid noise, inflating recalibrates to the same threshold
    let c = |i: usize| lines[i].split(',').nth(4).unwrap().to_string();
    assert_eq!(c(1), c(2));
    assert_eq!(lines[1].split(',').skip(4).collect::<Vec<_>>(), lines[2].split(',').skip(4).collect::<Vec<_>>());
}

#[test]
fn output_independent_of_threads() {
    let mut base = vec!["experiment", "size", "--c-local", "2,0", "--c-global", "5,9"];
    base.extend(SMALL);
    let one = ok(&[base.as_slice(), &["--threads", "1"]].concat());
    let four = ok(&[base.as_slice(), &["--threads", "4"]].concat());
    assert_eq!(one, four);
    assert_eq!(one.lines().count(), 3);
    assert!(one.lines().nth(2).unwrap().starts_with("centralized,0,9,"));
}
