//! End-to-end tests that drive the `spores` binary the way a shell user
//! would: real argv, real files, asserted exit codes and output shapes.

use std::path::PathBuf;
use std::process::{Command, Output};

fn spores() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_spores"));
    // The ambient environment must not leak a seed into the tests.
    c.env_remove("SPORES_SEED");
    c
}

fn write_temp(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("spores-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, contents).unwrap();
    p
}

fn small_catalog() -> PathBuf {
    write_temp(
        "small.jsonl",
        concat!(
            "{\"name\":\"A\",\"rows\":12,\"cols\":8,\"nnz\":30}\n",
            "{\"name\":\"B\",\"rows\":8,\"cols\":5}\n",
            "{\"name\":\"v\",\"rows\":8,\"cols\":1}\n",
        ),
    )
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn report(out: &Output) -> serde_json::Value {
    serde_json::from_str(&stdout_of(out)).expect("optimize prints a JSON report")
}

/// Timing fields vary run to run by design; everything else must not.
fn strip_wall(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(m) => {
            m.remove("wall_ms");
            for x in m.values_mut() {
                strip_wall(x);
            }
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(strip_wall),
        _ => {}
    }
}

#[test]
fn list_rules_names_every_rule() {
    let out = spores().arg("list-rules").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_of(&out);
    for name in ["double-transpose", "agg-push", "join-to-mult", "minus-intro"] {
        assert!(text.lines().any(|l| l == name), "missing rule {name}");
    }
    // The global flag spelling reaches the same listing.
    let flagged = spores().arg("--list-rules").output().unwrap();
    assert_eq!(flagged.status.code(), Some(0));
    assert_eq!(stdout_of(&flagged), text);
}

#[test]
fn optimize_reports_the_rewrite() {
    let out = spores()
        .args(["optimize", "--catalog"])
        .arg(small_catalog())
        .arg("sum(A %*% B)")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let r = report(&out);
    assert_eq!(r["input"], "sum(A %*% B)");
    let before = r["cost_before"].as_f64().unwrap();
    let after = r["cost_after"].as_f64().unwrap();
    assert!(after <= before, "optimizer made the plan worse: {before} -> {after}");
    assert!(after < before, "sum of a product should get cheaper, stayed {after}");
    assert!(!r["plan"]["nodes"].as_array().unwrap().is_empty());
    assert!(r["saturation"]["iterations"].as_u64().unwrap() > 0);
}

#[test]
fn optimize_identity_is_free() {
    let out = spores()
        .args(["optimize", "--catalog"])
        .arg(small_catalog())
        .arg("A")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["optimized"], "A");
    assert_eq!(r["cost_before"], 0.0);
    assert_eq!(r["cost_after"], 0.0);
}

#[test]
fn optimize_verify_checks_the_plan() {
    let out = spores()
        .args(["optimize", "--verify", "--catalog"])
        .arg(small_catalog())
        .arg("sum(A %*% v)")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let r = report(&out);
    assert_eq!(r["verify"]["passed"], true);
    assert_eq!(r["verify"]["bindings"], 3);
}

#[test]
fn extract_both_reports_alternatives() {
    let out = spores()
        .args(["optimize", "--extract", "both", "--catalog"])
        .arg(small_catalog())
        .arg("sum(A %*% B)")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let greedy = r["alternatives"]["greedy_cost"].as_f64().unwrap();
    let ilp = r["alternatives"]["ilp_cost"].as_f64().unwrap();
    assert!(ilp <= greedy, "exact extraction lost to greedy: {ilp} > {greedy}");
    assert_eq!(r["extraction"]["method"], "ilp");
    assert_eq!(r["cost_after"].as_f64().unwrap(), ilp);
}

#[test]
fn equiv_answers_true_and_exits_zero() {
    let out = spores()
        .args(["equiv", "--catalog"])
        .arg(small_catalog())
        .args(["sum(A %*% B)", "sum(t(B) %*% t(A))"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_of(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("true"));
    assert!(lines.next().unwrap().starts_with("lhs: "));
    assert!(lines.next().unwrap().starts_with("rhs: "));
}

#[test]
fn equiv_answers_false_and_exits_one() {
    let out = spores()
        .args(["equiv", "--catalog"])
        .arg(small_catalog())
        .args(["sum(A)", "sum(A %*% B)"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout_of(&out).starts_with("false"));
}

#[test]
fn canon_prints_the_normal_form() {
    let out = spores()
        .args(["canon", "--catalog"])
        .arg(small_catalog())
        .arg("t(t(A))")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_of(&out).trim(), "A(i,j)");
}

#[test]
fn derive_runs_the_bundled_suite() {
    let out = spores().arg("derive").output().unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let text = stdout_of(&out);
    let summary = text.lines().last().unwrap();
    assert!(summary.ends_with("cases passed"), "summary was {summary:?}");
    assert!(!text.contains("FAIL"));
}

#[test]
fn derive_flags_failures_and_exits_one() {
    let suite = write_temp(
        "failing_suite.jsonl",
        concat!(
            "{\"name\":\"holds\",\"lhs\":\"t(t(M))\",\"rhs\":\"M\",",
            "\"catalog\":[{\"name\":\"M\",\"rows\":4,\"cols\":3}]}\n",
            "{\"name\":\"does-not-hold\",\"lhs\":\"M\",\"rhs\":\"M + M\",",
            "\"catalog\":[{\"name\":\"M\",\"rows\":4,\"cols\":3}]}\n",
        ),
    );
    let out = spores().arg("derive").arg(suite).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let text = stdout_of(&out);
    assert!(text.contains("FAIL does-not-hold"));
    assert!(text.lines().last().unwrap().contains("1 failed"));
}

#[test]
fn parse_errors_exit_two() {
    let out = spores()
        .args(["optimize", "--catalog"])
        .arg(small_catalog())
        .arg("sum(A +")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).starts_with("error:"));
}

#[test]
fn unknown_matrices_exit_two() {
    let out = spores()
        .args(["optimize", "--catalog"])
        .arg(small_catalog())
        .arg("sum(Q)")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("Q"));
}

#[test]
fn malformed_catalogs_exit_two() {
    let bad = write_temp("bad.jsonl", "this is not json\n");
    let out = spores()
        .args(["optimize", "--catalog"])
        .arg(bad)
        .arg("A")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("catalog"));
}

#[test]
fn bare_invocation_shows_usage_and_exits_two() {
    let out = spores().output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn seed_env_is_read_and_validated() {
    let out = spores()
        .env("SPORES_SEED", "not-a-number")
        .args(["optimize", "--catalog"])
        .arg(small_catalog())
        .arg("A")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("SPORES_SEED"));

    let via_env = spores()
        .env("SPORES_SEED", "9")
        .args(["optimize", "--catalog"])
        .arg(small_catalog())
        .arg("sum(A %*% B)")
        .output()
        .unwrap();
    let via_flag = spores()
        .args(["optimize", "--seed", "9", "--catalog"])
        .arg(small_catalog())
        .arg("sum(A %*% B)")
        .output()
        .unwrap();
    let mut a = report(&via_env);
    let mut b = report(&via_flag);
    strip_wall(&mut a);
    strip_wall(&mut b);
    assert_eq!(a, b, "env seed and flag seed should agree");
}

#[test]
fn identical_runs_print_identical_reports() {
    let run = || {
        let out = spores()
            .args(["optimize", "--extract", "both", "--seed", "3", "--catalog"])
            .arg(small_catalog())
            .arg("sum((A %*% B) ^ 2)")
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
        let mut r = report(&out);
        strip_wall(&mut r);
        r
    };
    assert_eq!(run(), run());
}
