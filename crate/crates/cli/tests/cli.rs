//! End-to-end checks of the command-line interface: exit codes, artifact
//! determinism, configuration precedence, and the documented file formats.

use std::fs;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kljn-puf")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("terminated by signal")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn jsonl_records(path: &std::path::Path) -> Vec<serde_json::Value> {
    fs::read_to_string(path)
        .expect("artifact exists")
        .lines()
        .map(|l| serde_json::from_str(l).expect("every line is a JSON record"))
        .collect()
}

// --- determinism ----------------------------------------------------------

#[test]
fn equal_seeds_give_byte_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    let c = dir.path().join("c.jsonl");
    for (seed, path) in [("7", &a), ("7", &b), ("8", &c)] {
        let out = run(&[
            "exchange",
            "--seed",
            seed,
            "--n-bits",
            "16",
            "--samples-per-cycle",
            "1000",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap(), "same seed, same bytes");
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap(), "different seed, different run");
}

#[test]
fn jobs_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let one = dir.path().join("one.csv");
    let three = dir.path().join("three.csv");
    for (jobs, path) in [("1", &one), ("3", &three)] {
        let out = run(&[
            "verify",
            "--jobs",
            jobs,
            "--format",
            "csv",
            "--m-min",
            "1",
            "--m-max",
            "2",
            "--trials",
            "4000",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    }
    assert_eq!(fs::read(&one).unwrap(), fs::read(&three).unwrap());
}

#[test]
fn zero_jobs_is_a_usage_error() {
    let out = run(&["verify", "--jobs", "0", "--trials", "10"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("error:"), "stderr: {}", stderr(&out));
}

// --- configuration --------------------------------------------------------

#[test]
fn config_file_then_sets_then_flags_apply_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(&cfg, "seed = 5\n[verify]\nm_min = 2\nm_max = 2\ntrials = 512\n").unwrap();
    let art = dir.path().join("v.jsonl");
    let base = ["verify", "--config", cfg.to_str().unwrap(), "--out", art.to_str().unwrap()];

    let out = run(&base);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert_eq!(jsonl_records(&art)[0]["seed"], 5, "file value used when nothing overrides");

    let mut with_set = base.to_vec();
    with_set.extend(["--set", "seed=7"]);
    let out = run(&with_set);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert_eq!(jsonl_records(&art)[0]["seed"], 7, "--set overrides the file");

    let mut with_flag = with_set.clone();
    with_flag.extend(["--seed", "9"]);
    let out = run(&with_flag);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert_eq!(jsonl_records(&art)[0]["seed"], 9, "a dedicated flag overrides --set");
}

#[test]
fn unknown_config_keys_are_a_usage_error() {
    let out = run(&["exchange", "--set", "exchange.r_lo=1"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("error:"), "stderr: {}", stderr(&out));
}

#[test]
fn malformed_set_values_are_a_usage_error() {
    let out = run(&["exchange", "--set", "exchange.n_bits"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("error:"), "stderr: {}", stderr(&out));
}

#[test]
fn swapped_resistor_order_is_a_usage_error() {
    let out = run(&[
        "exchange",
        "--set",
        "exchange.r_low=100000",
        "--set",
        "exchange.r_high=10000",
        "--n-bits",
        "8",
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("error:"), "stderr: {}", stderr(&out));
}

// --- exchange -------------------------------------------------------------

#[test]
fn exchange_artifacts_carry_a_schema_version_and_both_keys() {
    let dir = tempfile::tempdir().unwrap();
    let art = dir.path().join("x.jsonl");
    let out = run(&[
        "exchange",
        "--n-bits",
        "16",
        "--samples-per-cycle",
        "1000",
        "--out",
        art.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let records = jsonl_records(&art);
    assert_eq!(records[0]["record"], "header");
    assert_eq!(records[0]["schema_version"], 1);
    let err = stderr(&out);
    assert!(err.contains("keys equal: true"), "stderr: {err}");
    assert!(err.contains("authentication budget"), "stderr: {err}");
}

#[test]
fn exchange_csv_has_the_documented_columns() {
    let out = run(&["exchange", "--n-bits", "8", "--samples-per-cycle", "500", "--format", "csv"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let body = String::from_utf8_lossy(&out.stdout).into_owned();
    assert_eq!(body.lines().next().unwrap(), "index,class,kept,alarm,msq_u,msq_i");
}

// --- verify ---------------------------------------------------------------

#[test]
fn identical_strings_are_never_rejected_and_the_residual_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let art = dir.path().join("v83.jsonl");
    let out = run(&[
        "verify",
        "--identical",
        "--m-min",
        "83",
        "--m-max",
        "83",
        "--trials",
        "1",
        "--out",
        art.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let row = &jsonl_records(&art)[1];
    assert_eq!(row["record"], "m-row");
    assert_eq!(row["rejects"], 0);
    assert_eq!(row["residual_false_accept"], 1.0339757656912846e-25);
}

#[test]
fn verify_csv_sweeps_every_m_in_the_requested_range() {
    let out =
        run(&["verify", "--m-min", "1", "--m-max", "12", "--trials", "200", "--format", "csv"]);
    // 200 trials per m is far too few to pass the statistical gate at every
    // m; only the shape of the table is under test here.
    let body = String::from_utf8_lossy(&out.stdout).into_owned();
    let mut lines = body.lines();
    assert_eq!(
        lines.next().unwrap(),
        "m,mode,route,trials,accepts,rejects,measured_rate,analytic_rate,tolerance,residual_false_accept,pass"
    );
    assert_eq!(lines.count(), 12, "one row per m in 1..=12");
}

// --- puf ------------------------------------------------------------------

#[test]
fn ultra_pair_generations_step_once_per_session_and_state_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let art = dir.path().join("puf.jsonl");
    let state = dir.path().join("state");
    let out = run(&[
        "puf",
        "--sessions",
        "3",
        "--samples-per-cycle",
        "512",
        "--state-dir",
        state.to_str().unwrap(),
        "--out",
        art.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));

    let records = jsonl_records(&art);
    let init = records.iter().find(|r| r["record"] == "initialize").expect("initialize record");
    assert_eq!(init["verdict"], "accept");
    assert_eq!(init["generation"], 1, "initialization replaces the generation-0 factory key");
    let generations: Vec<i64> = records
        .iter()
        .filter(|r| r["record"] == "session")
        .map(|r| {
            assert_eq!(r["verdict"], "accept");
            r["generation"].as_i64().unwrap()
        })
        .collect();
    assert_eq!(generations, [2, 3, 4], "every ultra session renews the key");

    assert!(state.join("lock.json").is_file());
    assert!(state.join("key.json").is_file());
    assert!(stderr(&out).contains("round-trip ok"));
}

#[test]
fn strong_pair_rejects_the_manufacturer_replica_after_initialization() {
    let dir = tempfile::tempdir().unwrap();
    let art = dir.path().join("strong.jsonl");
    let out = run(&[
        "puf",
        "--variant",
        "strong",
        "--sessions",
        "1",
        "--samples-per-cycle",
        "512",
        "--clone-probe",
        "--out",
        art.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let records = jsonl_records(&art);
    let probe = records.iter().find(|r| r["record"] == "probe").expect("probe record");
    assert_eq!(probe["verdict"], "reject");
    assert_eq!(probe["expected"], "reject");
    assert_eq!(probe["pass"], true);
}

#[test]
fn simple_pair_accepts_the_manufacturer_replica_for_life() {
    let dir = tempfile::tempdir().unwrap();
    let art = dir.path().join("simple.jsonl");
    let out = run(&[
        "puf",
        "--variant",
        "simple",
        "--sessions",
        "1",
        "--samples-per-cycle",
        "512",
        "--clone-probe",
        "--out",
        art.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let records = jsonl_records(&art);
    assert!(
        records.iter().all(|r| r["record"] != "initialize"),
        "simple pairs never leave the factory key"
    );
    let probe = records.iter().find(|r| r["record"] == "probe").expect("probe record");
    assert_eq!(probe["verdict"], "accept");
    assert_eq!(probe["expected"], "accept");
    assert_eq!(probe["pass"], true);
}

// --- attack ---------------------------------------------------------------

#[test]
fn unknown_attack_names_are_a_usage_error() {
    let out = run(&["attack", "no-such-attack"]);
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    assert!(err.contains("unknown attack"), "stderr: {err}");
    assert!(err.contains("brute-force-ultra"), "the error lists the registry: {err}");
}

#[test]
fn a_leaky_discriminator_fixture_trips_the_gate() {
    let out = run(&[
        "attack",
        "passive-eve",
        "--trials",
        "2000",
        "--samples-per-cycle",
        "2000",
        "--fixture-leaky-eve",
    ]);
    assert_eq!(code(&out), 1, "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("gate breached"), "stderr: {}", stderr(&out));
}

#[test]
fn attack_csv_uses_the_report_schema() {
    let out = run(&["attack", "brute-force-ultra", "--trials", "4096", "--format", "csv"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let body = String::from_utf8_lossy(&out.stdout).into_owned();
    assert_eq!(
        body.lines().next().unwrap(),
        "name,trials,successes,measured_rate,analytic_rate,tolerance,gate,pass,notes"
    );
}
