use std::process::{Command, Output};

fn fracstep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracstep")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn body(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

fn header_value<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    let prefix = format!("# {key}: ");
    text.lines().find_map(|l| l.strip_prefix(prefix.as_str()))
}

#[test]
fn kernel_dump_has_triangular_entry_count() {
    let o = fracstep(&["kernels", "dump", "--scheme", "l1", "--mesh", "graded:30,2,1", "--alpha", "0.4"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows = body(&text);
    assert_eq!(rows[0], "n,lag,value");
    assert_eq!(rows.len() - 1, 465);
    assert_eq!(header_value(&text, "mesh"), Some("graded:30,2,1"));
    assert_eq!(header_value(&text, "entries"), Some("465"));
}

#[test]
fn complementary_dump() {
    let o = fracstep(&["kernels", "dump", "--scheme", "alikhanov", "--mesh", "uniform:10,1", "--alpha", "0.5", "--table", "p"]);
    assert!(o.status.success());
    assert_eq!(body(&stdout(&o)).len() - 1, 55);
}

#[test]
fn audit_reports_assumptions() {
    let o = fracstep(&["audit", "--scheme", "alikhanov", "--mesh", "graded:64,3,1", "--alpha", "0.5"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["a1"], true);
    assert_eq!(v["a2"], true);
    let pi = v["pi_a_estimate"].as_f64().unwrap();
    assert!(pi > 1.0 && pi <= 2.75, "{pi}");
    assert_eq!(v["config"]["mesh"], "graded:64,3,1");
}

#[test]
fn audit_recombined_reports_eta() {
    let o = fracstep(&["audit", "--scheme", "bdf2-recombined", "--mesh", "uniform:32,1", "--alpha", "0.5"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let eta = v["eta"].as_f64().unwrap();
    assert!(eta > 0.0 && eta < 2.0 / 3.0);
}

#[test]
fn singular_graded_study_approaches_optimal_order() {
    let o = fracstep(&["converge", "--scheme", "l1", "--singular", "--gamma", "auto", "--alpha", "0.5", "--Ns", "32,64,128,256"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(header_value(&text, "gamma"), Some("3"));
    let rows = body(&text);
    assert_eq!(rows[0], "N,max_error,final_error,order");
    let orders: Vec<f64> = rows[2..].iter().map(|r| r.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert!(orders.windows(2).all(|w| w[1] > w[0]), "{orders:?}");
    assert!((orders[2] - 1.5).abs() < 0.1, "{orders:?}");
    // aligned table on stderr
    assert!(String::from_utf8(o.stderr).unwrap().contains("max error"));
}

#[test]
fn gronwall_verify_passes_with_valid_constant() {
    let o = fracstep(&["gronwall", "verify", "--scheme", "l1", "--mesh", "uniform:64,1", "--alpha", "0.5", "--trials", "50"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["holds"], true);
    assert_eq!(v["reports"].as_array().unwrap().len(), 2);
}

#[test]
fn gronwall_breach_exits_with_violation_code() {
    // the bound with an understated pi_A is false
    let o = fracstep(&[
        "gronwall", "verify", "--scheme", "l1", "--mesh", "uniform:64,1", "--alpha", "0.5", "--pi-a", "0.05", "--lambda", "3",
    ]);
    assert_eq!(o.status.code(), Some(3));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["holds"], false);
}

#[test]
fn fd_stability_run_reports_envelope() {
    let o = fracstep(&[
        "solve", "--problem", "fd", "--scheme", "l1", "--mesh", "uniform:128,1", "--alpha", "0.5", "--kappa", "1",
        "--forcing", "oscillating", "--amplitude", "3", "--m", "31",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(header_value(&text, "stability-breached"), Some("false"));
    assert_eq!(header_value(&text, "offset-ok"), Some("true"));
    let ratio: f64 = header_value(&text, "envelope-max-ratio").unwrap().parse().unwrap();
    assert!(ratio < 1.0);
    assert_eq!(body(&text)[0], "n,t_n,l2_norm,max_norm");
    assert_eq!(body(&text).len(), 130);
}

#[test]
fn single_mode_solve_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.csv");
    let o = fracstep(&[
        "solve", "--problem", "single-mode", "--scheme", "alikhanov", "--mesh", "graded:256,3,1", "--alpha", "0.4",
        "--lambda", "1", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(body(&text)[0], "n,t_n,u_n,exact,error");
    assert_eq!(body(&text).len(), 258);
    let err: f64 = header_value(&text, "max-error").unwrap().parse().unwrap();
    assert!(err < 1e-3);
}

#[test]
fn fast_l1_history_is_bounded() {
    let o = fracstep(&["solve", "--scheme", "fast-l1", "--mesh", "uniform:500,1", "--alpha", "0.5", "--soe-eps", "1e-8"]);
    assert!(o.status.success());
    let held: usize = header_value(&stdout(&o), "history-values").unwrap().parse().unwrap();
    assert!(held <= 200, "{held}");
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.json");
    std::fs::write(&cfg, r#"{"scheme": "alikhanov", "mesh": "uniform:8,1", "alpha": 0.3}"#).unwrap();
    let o = fracstep(&["kernels", "dump", "--config", cfg.to_str().unwrap(), "--alpha", "0.6"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(header_value(&text, "scheme"), Some("alikhanov"));
    assert_eq!(header_value(&text, "alpha"), Some("0.6"));
    assert_eq!(body(&text).len() - 1, 36);
}

#[test]
fn outputs_are_reproducible() {
    let args = ["gronwall", "verify", "--scheme", "alikhanov", "--mesh", "random:32,1.75,3", "--alpha", "0.4", "--lambda", "0.5", "--seed", "9"];
    let a = fracstep(&args);
    let b = fracstep(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn validation_failures_exit_2() {
    for args in [
        vec!["audit", "--mesh", "uniform:4,1"],
        vec!["audit", "--mesh", "uniform:4,1", "--alpha", "1.5"],
        vec!["audit", "--mesh", "graded:4,0.5,1", "--alpha", "0.5"],
        vec!["kernels", "dump", "--scheme", "l3", "--mesh", "uniform:4,1", "--alpha", "0.5"],
        vec!["solve", "--problem", "heat", "--mesh", "uniform:4,1", "--alpha", "0.5"],
        vec!["converge", "--alpha", "0.5", "--gamma", "auto", "--mesh", "uniform:4,1"],
        vec!["frobnicate"],
    ] {
        let o = fracstep(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"alpah": 0.3}"#).unwrap();
    let o = fracstep(&["mlf", "--config", cfg.to_str().unwrap(), "--alpha", "0.5", "--z", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_4() {
    let o = fracstep(&["soe", "build", "--alpha", "0.5", "--eps", "1e-14", "--budget", "4"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn mittag_leffler_values() {
    let o = fracstep(&["mlf", "--alpha", "0.5", "--z", "-1,0"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows = body(&text);
    let v: f64 = rows[1].split(',').nth(1).unwrap().parse().unwrap();
    // E_{1/2}(-1) = e erfc(1)
    assert!((v - 0.427_583_576_155_807).abs() < 1e-14);
    assert_eq!(rows[2], "0e0,1e0");
}

#[test]
fn soe_build_reference_configuration() {
    let o = fracstep(&["soe", "build", "--alpha", "0.5", "--eps", "1e-8", "--dt", "1e-3", "--t-final", "1"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let n = v["nodes"].as_u64().unwrap();
    assert!(n <= 200);
    assert!(v["certified_residual"].as_f64().unwrap() <= 1e-8);
}
