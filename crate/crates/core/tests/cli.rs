//! End-to-end checks of the `hperc` binary: flags, exit codes, file
//! output, and the seed override.

use std::path::Path;
use std::process::{Command, Output};

use hperc::harness::{read_records, OutputFormat};

fn hperc(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hperc"));
    cmd.args(args);
    cmd.env_remove("HPERC_SEED");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn hperc")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

fn printed_value(text: &str, key: &str) -> f64 {
    for line in text.lines() {
        if line.starts_with(key) {
            let value = line.split('=').nth(1).expect("key = value").trim();
            return value.parse().expect("numeric value");
        }
    }
    panic!("no line for {key:?} in {text}");
}

#[test]
fn predict_prints_closed_forms() {
    let out = hperc(&["predict", "--d", "2", "--n", "100", "--t", "0"], &[]);
    assert!(out.status.success());
    let text = stdout_of(&out);
    assert!(text.contains("degree m                 = 198"));
    let limit = printed_value(&text, "P(connected) limit");
    assert!((limit - libm::exp(-1.0)).abs() < 1e-12);
    let lambda = printed_value(&text, "lambda");
    assert!((lambda - 2.0 * libm::log(100.0)).abs() < 1e-12);
    assert_eq!(printed_value(&text, "hyperplane window"), 0.0);
    let alpha = printed_value(&text, "default quorum alpha");
    assert!((alpha - (libm::exp(-1.0) - 0.1)).abs() < 1e-12);
}

#[test]
fn sweep_writes_parseable_records() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out.csv");
    let out = hperc(
        &[
            "sweep",
            "--d",
            "1",
            "--n",
            "12",
            "--t-grid",
            "-1:1:1",
            "--reps",
            "10",
            "--seed",
            "5",
            "--out",
            csv.to_str().unwrap(),
        ],
        &[],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let records = read_records(&csv, OutputFormat::Csv).unwrap();
    assert_eq!(records.len(), 30);
    assert!(records.iter().all(|r| r.master_seed == 5));

    // Same run in JSONL carries identical canonical content.
    let jsonl = dir.path().join("out.jsonl");
    let out = hperc(
        &[
            "sweep",
            "--d",
            "1",
            "--n",
            "12",
            "--t-grid",
            "-1:1:1",
            "--reps",
            "10",
            "--seed",
            "5",
            "--format",
            "jsonl",
            "--out",
            jsonl.to_str().unwrap(),
        ],
        &[],
    );
    assert!(out.status.success());
    let again = read_records(&jsonl, OutputFormat::Jsonl).unwrap();
    let canon = |rs: &[hperc::harness::ResultRecord]| -> Vec<String> {
        rs.iter().map(|r| r.canonical_line()).collect()
    };
    assert_eq!(canon(&records), canon(&again));
}

#[test]
fn config_errors_exit_2() {
    // Retention probability out of range.
    let out = hperc(&["sweep", "--d", "1", "--n", "10", "--p", "1.5"], &[]);
    assert_eq!(out.status.code(), Some(2));
    // Mutually exclusive parametrizations.
    let out = hperc(
        &["sweep", "--d", "1", "--n", "10", "--t", "0", "--p", "0.5"],
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
    // Unknown flag (clap handles it).
    let out = hperc(&["sweep", "--bogus"], &[]);
    assert_eq!(out.status.code(), Some(2));
    // Quorum experiment in one dimension.
    let out = hperc(&["hyperplanes", "--d", "1", "--n", "10", "--t", "0"], &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn resource_guard_exits_3() {
    let out = hperc(
        &[
            "sweep",
            "--d",
            "2",
            "--n",
            "4000",
            "--t",
            "0",
            "--reps",
            "2",
            "--max-vertices",
            "1000",
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn partial_resource_guard_still_succeeds() {
    // One instance under the guard, one over: the run continues, writes
    // error records for the dead point, summarizes the rest, and exits 0.
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("mixed.csv");
    let out = hperc(
        &[
            "sweep",
            "--d",
            "1,2",
            "--n",
            "10,4000",
            "--t",
            "0",
            "--reps",
            "3",
            "--max-vertices",
            "100000",
            "--out",
            csv.to_str().unwrap(),
        ],
        &[],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let records = read_records(&csv, OutputFormat::Csv).unwrap();
    assert_eq!(records.len(), 6);
    assert_eq!(records.iter().filter(|r| r.error.is_some()).count(), 3);
    let table = stdout_of(&out);
    assert!(
        table.contains(" 1 "),
        "summary table missing the live point: {table}"
    );
}

#[test]
fn io_errors_exit_4() {
    let out = hperc(
        &[
            "sweep",
            "--d",
            "1",
            "--n",
            "10",
            "--t",
            "0",
            "--reps",
            "2",
            "--out",
            "/nonexistent-dir/x.csv",
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn env_seed_is_used_and_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("seeded.csv");
    let out = hperc(
        &[
            "sweep",
            "--d",
            "1",
            "--n",
            "10",
            "--t",
            "0",
            "--reps",
            "3",
            "--out",
            csv.to_str().unwrap(),
        ],
        &[("HPERC_SEED", "123")],
    );
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("HPERC_SEED"));
    let records = read_records(&csv, OutputFormat::Csv).unwrap();
    assert!(records.iter().all(|r| r.master_seed == 123));
    // The explicit flag wins over the environment.
    let out = hperc(
        &[
            "sweep",
            "--d",
            "1",
            "--n",
            "10",
            "--t",
            "0",
            "--reps",
            "3",
            "--seed",
            "9",
            "--out",
            csv.to_str().unwrap(),
        ],
        &[("HPERC_SEED", "123")],
    );
    assert!(out.status.success());
    let records = read_records(&csv, OutputFormat::Csv).unwrap();
    assert!(records.iter().all(|r| r.master_seed == 9));
    // A garbage value is a config error.
    let out = hperc(
        &["sweep", "--d", "1", "--n", "10", "--t", "0"],
        &[("HPERC_SEED", "not-a-seed")],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reruns_are_canonically_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for (path, workers) in [(&a, "1"), (&b, "2")] {
        let out = hperc(
            &[
                "poisson",
                "--d",
                "2",
                "--n",
                "20",
                "--t",
                "0",
                "--reps",
                "20",
                "--seed",
                "77",
                "--workers",
                workers,
                "--out",
                path.to_str().unwrap(),
            ],
            &[],
        );
        assert!(out.status.success());
    }
    let ra = read_records(Path::new(&a), OutputFormat::Csv).unwrap();
    let rb = read_records(Path::new(&b), OutputFormat::Csv).unwrap();
    let canon = |rs: &[hperc::harness::ResultRecord]| -> Vec<String> {
        rs.iter().map(|r| r.canonical_line()).collect()
    };
    assert_eq!(canon(&ra), canon(&rb));
}
