use std::process::{Command, Output};

fn qpsearch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qpsearch"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    let line = text.lines().last().expect("error line on stderr");
    serde_json::from_str(line).expect("stderr error is JSON")
}

#[test]
fn perturb_check_is_deterministic_across_thread_counts() {
    let base = ["perturb-check", "--betas", "0.05,0.1", "--eps", "0.1,0.05"];
    let one = qpsearch(&[&base[..], &["--jobs", "1"]].concat());
    let four = qpsearch(&[&base[..], &["--jobs", "4"]].concat());
    assert!(one.status.success());
    assert_eq!(stdout(&one), stdout(&four));
    assert_eq!(stdout(&one).lines().count(), 5);
    assert!(stdout(&one).starts_with(
        "K,t,tau_bar,beta,eps_scale,variance,delta_alpha,delta_eta,predicted,measured,ratio\n"
    ));
}

#[test]
fn oracle_compare_repeats_per_seed() {
    let args = [
        "oracle-compare",
        "--instances",
        "4",
        "--max-n",
        "2048",
        "--seed",
        "7",
    ];
    let a = qpsearch(&args);
    let b = qpsearch(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(stdout(&a), stdout(&b));
    let other = qpsearch(&[
        "oracle-compare",
        "--instances",
        "4",
        "--max-n",
        "2048",
        "--seed",
        "8",
    ]);
    assert_ne!(stdout(&a), stdout(&other));
}

#[test]
fn malformed_taus_exit_two() {
    for taus in ["1,x", "", "1.5", "-2"] {
        let out = qpsearch(&["validate", "--K", "16", "--b", "8", "--taus", taus]);
        assert_eq!(out.status.code(), Some(2), "taus {taus:?}");
        assert_eq!(stderr_json(&out)["error"], "invalid_input");
    }
    // tau outside [1, b-1]
    let out = qpsearch(&["validate", "--K", "16", "--b", "8", "--taus", "8"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn assertion_above_beta_critical_is_a_regime_error() {
    let out = qpsearch(&["perturb-check", "--betas", "0.65", "--assert"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "regime");
    // without --assert the rows are still reported
    let out = qpsearch(&["perturb-check", "--betas", "0.65"]);
    assert!(out.status.success());
}

#[test]
fn algorithm_commands_enforce_quarter_rule() {
    let out = qpsearch(&["optimize", "--K", "8", "--b", "64", "--taus", "3,1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "regime");
    // validate reports the regime instead
    let out = qpsearch(&["validate", "--K", "8", "--b", "64", "--taus", "3,1"]);
    assert!(out.status.success());
    let derived: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(derived["regime"], "analysis");
    assert_eq!(derived["tau_bar_exact"], "2");
    assert_eq!(derived["variance_exact"], "1");
}

#[test]
fn resource_cap_exit_three() {
    let out = qpsearch(&[
        "simulate", "--K", "16", "--b", "1024", "--taus", "3", "--j1", "1", "--j2", "1",
        "--engine", "full", "--max-n", "4096",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["error"], "resource");
}

#[test]
fn simulate_engines_agree() {
    let out = qpsearch(&[
        "simulate", "--K", "32", "--b", "64", "--taus", "5,2,9", "--j1", "3", "--j2", "2",
        "--engine", "both", "--format", "json",
    ]);
    assert!(out.status.success());
    let rows: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 2);
    assert!(rows[0]["max_abs_diff"].as_f64().unwrap() < 1e-12);
    assert_eq!(rows[0]["state"].as_str().unwrap().split(';').count(), 7);
    assert_eq!(rows[1]["engine"], "full");
}

#[test]
fn non_power_of_two_warns() {
    let out = qpsearch(&[
        "simulate", "--K", "12", "--b", "10", "--taus", "2", "--j1", "1", "--j2", "1",
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("not a power of two"));
}

#[test]
fn problem_file_input() {
    let dir = std::env::temp_dir().join(format!("qpsearch-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let good = dir.join("good.json");
    std::fs::write(&good, r#"{"K": 64, "b": 256, "taus": [7, 3]}"#).unwrap();
    let out = qpsearch(&[
        "optimize",
        "--problem",
        good.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert!(out.status.success());
    let rows: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(rows[0]["f_star"].as_f64().unwrap() > 0.0);

    let bad = dir.join("bad.json");
    std::fs::write(&bad, r#"{"K": 64, "b": 256, "taus": [7], "N": 1}"#).unwrap();
    let out = qpsearch(&["validate", "--problem", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn sweep_beta_marks_the_root() {
    let out = qpsearch(&["sweep-beta", "--points", "30"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let last = text.lines().last().unwrap();
    assert!(last.ends_with(",beta_c"));
    let beta_c: f64 = last.split(',').next().unwrap().parse().unwrap();
    assert!((beta_c - 0.6281).abs() < 5e-4);
    assert_eq!(text.lines().count(), 32);
}

#[test]
fn help_documents_csv_columns() {
    let out = qpsearch(&["perturb-check", "--help"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("CSV columns: K, t, tau_bar, beta, eps_scale"));
}
