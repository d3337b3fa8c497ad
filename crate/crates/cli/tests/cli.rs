use std::path::Path;
use std::process::{Command, Output};

use formbound::battery::Outcome;
use formbound::DiagnosticsReport;
use serde_json::Value;

fn formbound(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_formbound"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("FORMBOUND_THREADS", t),
        None => cmd.env_remove("FORMBOUND_THREADS"),
    };
    cmd.output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("battery.json");
    std::fs::write(&path, body).unwrap();
    path.display().to_string()
}

fn report(config: &str, out: &Path, threads: Option<&str>) -> Output {
    formbound(&["report", "--config", config, "--out", out.to_str().unwrap()], threads)
}

const SMALL: &str = r#"{
  "potential": { "kind": "bump", "radius": 1.0 },
  "ladder": [ { "points": 32, "half_length": 2.0 }, { "points": 64, "half_length": 2.0 } ],
  "dim": 1,
  "tests": ["formnorm", "phinorm", "ball", "carleson", "fp", "calculus"]
}"#;

#[test]
fn report_is_reproducible_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let outs: Vec<Vec<u8>> = [None, Some("1"), Some("3")]
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let path = dir.path().join(format!("r{i}.json"));
            let out = report(&config, &path, *t);
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
            std::fs::read(&path).unwrap()
        })
        .collect();
    assert_eq!(outs[0], outs[1]);
    assert_eq!(outs[0], outs[2]);

    // Parsing and re-serializing gives the same bytes.
    let text = String::from_utf8(outs[0].clone()).unwrap();
    let parsed = DiagnosticsReport::from_json(&text).unwrap();
    assert_eq!(parsed.to_json().unwrap(), text);
}

#[test]
fn divergent_entries_do_not_fail_the_battery() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let path = dir.path().join("r.json");
    let csv = dir.path().join("csv");
    let out = formbound(
        &["report", "--config", &config, "--out", path.to_str().unwrap(), "--csv", csv.to_str().unwrap()],
        None,
    );
    assert!(out.status.success());
    let r = DiagnosticsReport::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
    // Fefferman–Phong is not defined in one dimension.
    assert!(r.ladder("fp:s=1.5").iter().all(|e| matches!(e.outcome, Outcome::Error(_))));
    assert!(r.ladder("formnorm").iter().all(|e| matches!(e.outcome, Outcome::Norm(_))));
    assert_eq!(r.consistency.comparability.len(), 2);
    assert_eq!(r.consistency.ordering.len(), 2);
    assert!(r.consistency.ordering.iter().all(|o| o.holds));

    let ladder = std::fs::read_to_string(csv.join("formnorm.csv")).unwrap();
    let lines: Vec<&str> = ladder.lines().collect();
    assert_eq!(lines[0], "points,half_length,spacing,value,status");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("32,2,") && lines[1].ends_with(",ok"));
    let fp = std::fs::read_to_string(csv.join("fp_s_1.5.csv")).unwrap();
    assert!(fp.lines().skip(1).all(|l| l.ends_with(",,error")));
}

#[test]
fn zero_potential_is_all_zero_cases() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{
          "potential": { "kind": "constant", "c": 0.0 },
          "ladder": [ { "points": 32, "half_length": 2.0 } ],
          "dim": 2,
          "tests": ["formnorm", "phinorm", "relbound", "carleson", "ball", "levelset",
                    "fp", "bessel", "weaklp", "capacity", "trace", "calculus"]
        }"#,
    );
    let path = dir.path().join("r.json");
    assert!(report(&config, &path, None).status.success());
    let r = DiagnosticsReport::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
    for e in &r.entries {
        // The quadrature accuracy check runs on a fixed bump, not on Q.
        if e.test == "calculus.riesz" {
            continue;
        }
        assert_eq!(e.outcome.headline(), Some(0.0), "{} {:?}", e.test, e.outcome);
    }
    assert!(r.consistency.comparability.iter().all(|c| c.zero_case && c.ratio.is_none()));
    assert!(r.consistency.ordering.iter().all(|o| o.zero_case && o.holds));
}

#[test]
fn spec_and_io_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let missing = dir.path().join("missing.json");
    assert!(!report(missing.to_str().unwrap(), &out, None).status.success());

    let unknown = write_config(dir.path(), &SMALL.replace("\"dim\"", "\"colour\": 1, \"dim\""));
    assert!(!report(&unknown, &out, None).status.success());

    let small_box = write_config(dir.path(), &SMALL.replace("\"half_length\": 2.0", "\"half_length\": 1.0"));
    let res = report(&small_box, &out, None);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("L ≥ 2"));

    let bad_threads = write_config(dir.path(), SMALL);
    assert!(!report(&bad_threads, &out, Some("zero")).status.success());
}

#[test]
fn formnorm_command() {
    let v = json(&formbound(&["formnorm", "--preset", "constant:c=3", "--grid", "32"], None));
    assert!((v["value"].as_f64().unwrap() - 3.0).abs() < 1e-6);
    assert_eq!(v["method"], "power_iteration");

    let v = json(&formbound(
        &["formnorm", "--preset", "bump:r=1", "--grid", "32", "--tol", "1e-13", "--max-iter", "100000", "--dense-check"],
        None,
    ));
    assert!(v["rel_diff"].as_f64().unwrap() < 1e-8);

    let refused = formbound(&["formnorm", "--preset", "bump:r=1", "--dim", "2", "--grid", "128", "--dense-check"], None);
    assert!(!refused.status.success());
    assert!(!formbound(&["formnorm", "--preset", "wobble:x=1"], None).status.success());
}

#[test]
fn carleson_and_criteria_commands() {
    let v = json(&formbound(&["carleson", "--preset", "constant:c=1", "--grid", "64"], None));
    assert_eq!(v["levels"].as_array().unwrap().len(), 5);
    assert!(v["ratio"].as_f64().unwrap() > 0.0);

    let v = json(&formbound(&["criteria", "--preset", "bump:r=1", "--grid", "64", "--tests", "ball,bessel,weaklp"], None));
    let names: Vec<&str> = v.as_array().unwrap().iter().map(|r| r["name"].as_str().unwrap()).collect();
    assert_eq!(names.len(), 3);
    assert!(!formbound(&["criteria", "--preset", "bump:r=1", "--box", "1"], None).status.success());
    assert!(!formbound(&["criteria", "--preset", "bump:r=1", "--tests", "astrology"], None).status.success());
}

#[test]
fn capacity_commands() {
    let v = json(&formbound(&["capacity", "--set", "ball:r=0.25", "--grid", "128"], None));
    assert!(v["value"].as_f64().unwrap() > 0.0);
    assert_eq!(v["converged"], true);
    assert!(v.get("minimizer").is_none());

    let v = json(&formbound(&["captest", "--preset", "bump:r=1", "--family", "balls:r=0.1;0.2", "--grid", "128"], None));
    assert_eq!(v["name"], "capacity");
    assert!(v["constant"].as_f64().unwrap() > 0.0);

    assert!(!formbound(&["capacity", "--set", "cube:r=1"], None).status.success());
}

#[test]
fn trace_and_calculus_commands() {
    let v = json(&formbound(&["trace-check", "--preset", "bump:r=1", "--grid", "64", "--lifted-grid", "128"], None));
    assert_eq!(v["transverse_points"], 128);
    assert!(v["rel_error"].as_f64().unwrap() < 0.1);

    let v = json(&formbound(&["calculus", "--check", "mikhlin", "--order", "0.5"], None));
    assert!(v["max_violation"].as_f64().unwrap() <= 0.0);
    let v = json(&formbound(&["calculus", "--check", "riesz", "--grid", "64"], None));
    assert!(v["rel_error"].as_f64().unwrap() < 1e-2);
    let v = json(&formbound(&["calculus", "--check", "hedberg", "--grid", "64"], None));
    assert!(v["fitted_constant"].as_f64().unwrap() > 0.0);
    let v = json(&formbound(&["calculus", "--check", "commutator", "--grid", "32"], None));
    assert!(v["fitted_constant"].as_f64().unwrap().is_finite());
}
