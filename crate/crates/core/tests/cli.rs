use assert_cmd::Command;
use serde_json::Value;

fn randleap() -> Command {
    Command::cargo_bin("randleap").unwrap()
}

fn json(args: &[&str]) -> Value {
    let out = randleap().args(args).args(["--format", "json"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn roulette_check_names_the_mismatch() {
    let out = randleap().args(["roulette", "--check"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("N = 25, i = 2"), "{err}");
    assert_eq!(err.lines().filter(|l| l.starts_with("mismatch")).count(), 1, "{err}");
}

#[test]
fn roulette_check_passes_on_clean_tables() {
    randleap().args(["roulette", "--N-list", "5,10,15,20", "--check"]).assert().code(0);
}

#[test]
fn roulette_table_prints_rounded_values() {
    let out = randleap().args(["roulette", "--N-list", "5"]).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("0.5445"), "{text}");
    assert!(text.contains("3.6019"), "{text}");
}

#[test]
fn json_output_round_trips_through_params() {
    let doc = json(&["absorb", "--p", "0.3,0.1", "--q", "0.2,0.4", "--N", "6"]);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    std::fs::write(&path, serde_json::to_string(&doc).unwrap()).unwrap();
    let again = json(&["absorb", "--params", path.to_str().unwrap(), "--N", "6"]);
    assert_eq!(doc["u"], again["u"]);
    assert_eq!(doc["v"], again["v"]);
    assert_eq!(doc["params"], again["params"]);
}

#[test]
fn bare_params_record_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("leap.json");
    std::fs::write(&path, r#"{"p": ["12/38", "6/38"], "q": ["13/38", "7/38"], "hold": 0}"#).unwrap();
    let doc = json(&["absorb", "--params", path.to_str().unwrap(), "--N", "5"]);
    let u3 = doc["u"][3].as_f64().unwrap();
    assert!((u3 - 0.5445).abs() < 5e-5, "{u3}");
}

#[test]
fn validation_errors_exit_two() {
    randleap().args(["absorb", "--p", "0.5", "--q", "0.6", "--N", "3"]).assert().code(2);
    randleap().args(["absorb", "--p", "0.5,-0.1", "--q", "0.6", "--N", "3"]).assert().code(2);
    randleap().args(["absorb", "--p", "0.5", "--q", "0.5", "--N", "1"]).assert().code(2);
    randleap().args(["absorb", "--p", "1", "--q", "0", "--N", "4"]).assert().code(2);
    randleap().args(["bench", "--N-list", "2", "--reps", "1"]).assert().code(2);
}

#[test]
fn one_sided_needs_negative_drift() {
    let out = randleap().args(["stationary", "--p", "0.5", "--q", "0.5", "--one-sided"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    randleap().args(["stationary", "--p", "0.6", "--q", "0.4", "--one-sided"]).assert().code(2);
    randleap().args(["stationary", "--p", "0.3", "--q", "0.7", "--one-sided"]).assert().code(0);
}

#[test]
fn near_critical_drift_warns() {
    let out = randleap().args(["classify", "--p", "0.5000000000005", "--q", "0.4999999999995"]).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("near-critical"));
}

#[test]
fn csv_has_headers() {
    let out = randleap().args(["absorb", "--p", "0.4", "--q", "0.6", "--N", "4", "--format", "csv"]).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("i,u,v"));
    assert_eq!(lines.count(), 5);
    let out =
        randleap().args(["stationary", "--p", "0.4", "--q", "0.6", "--N", "4", "--format", "csv"]).output().unwrap();
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("i,pi"));
}

#[test]
fn verify_passes_on_roulette() {
    randleap()
        .args(["verify", "--p", "12/38,6/38", "--q", "13/38,7/38", "--N", "10", "--paths", "20000"])
        .assert()
        .code(0);
}

#[test]
fn simulate_is_reproducible() {
    let args = ["simulate", "--p", "0.4", "--q", "0.6", "--N", "6", "--paths", "5000", "--seed", "9"];
    let a = json(&args);
    let b = json(&args);
    assert_eq!(a["report"]["values"], b["report"]["values"]);
    assert_eq!(a["report"]["seed"], 9);
}

#[test]
fn simulate_table_labels_estimates() {
    let out = randleap()
        .args(["simulate", "--p", "0.4", "--q", "0.6", "--N", "6", "--paths", "2000", "--format", "csv"])
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("u,u_stderr,v,v_stderr"));
    let u: f64 = lines.next().unwrap().split(',').next().unwrap().parse().unwrap();
    assert!(u > 0.0 && u < 1.0, "{u}");
}

#[test]
fn bench_refuses_dense_above_cap() {
    let out = randleap().args(["bench", "--N-list", "100,30000", "--reps", "3", "--format", "csv"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "N,t_determinant_s,t_dense_s,dense_status");
    assert!(lines[1].ends_with(",ok"), "{text}");
    assert!(lines[2].contains("refused"), "{text}");
}
