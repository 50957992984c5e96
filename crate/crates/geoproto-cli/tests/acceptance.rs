//! CLI acceptance and smoke tests, including the byte-identical rerun
//! criterion: every subcommand run twice with the same config and seed must
//! produce identical bytes, on disk and on stdout.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_geoproto")
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .arg("-q")
        .current_dir(dir)
        .output()
        .expect("spawning geoproto")
}

fn assert_ok(out: &Output, what: &str) {
    assert!(
        out.status.success(),
        "{what} failed with {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// File names and contents of a directory, sorted by name.
fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .expect("reading output dir")
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    entries
}

fn assert_same_dir(a: &Path, b: &Path, what: &str) {
    let left = dir_contents(a);
    let right = dir_contents(b);
    let names = |v: &[(String, Vec<u8>)]| v.iter().map(|e| e.0.clone()).collect::<Vec<_>>();
    assert_eq!(names(&left), names(&right), "{what}: file sets differ");
    for ((name, bytes_a), (_, bytes_b)) in left.iter().zip(&right) {
        assert_eq!(bytes_a, bytes_b, "{what}: {name} differs between reruns");
    }
}

/// Generates a small portfolio plus its schema, returning the work dir.
fn generate_fixture(dir: &Path, records: usize, seed: u64) -> (PathBuf, PathBuf) {
    let out = run(
        dir,
        &[
            "synth",
            "--clusters",
            "3",
            "--records",
            &records.to_string(),
            "--seed",
            &seed.to_string(),
            "--out",
            "gen",
        ],
    );
    assert_ok(&out, "synth");
    (dir.join("gen/portfolio.csv"), dir.join("gen/schema.toml"))
}

fn read_cluster_column(path: &Path) -> Vec<u32> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .unwrap();
    let headers = rdr.headers().unwrap().clone();
    let idx = headers.iter().position(|h| h == "cluster").unwrap();
    rdr.records().map(|r| r.unwrap()[idx].parse().unwrap()).collect()
}

/// Chance-corrected partition agreement, computed from the contingency
/// table; independent of the library implementation.
fn adjusted_rand(a: &[u32], b: &[u32]) -> f64 {
    assert_eq!(a.len(), b.len());
    let comb2 = |x: f64| x * (x - 1.0) / 2.0;
    let mut cells: HashMap<(u32, u32), f64> = HashMap::new();
    let mut rows: HashMap<u32, f64> = HashMap::new();
    let mut cols: HashMap<u32, f64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *cells.entry((x, y)).or_default() += 1.0;
        *rows.entry(x).or_default() += 1.0;
        *cols.entry(y).or_default() += 1.0;
    }
    let index: f64 = cells.values().map(|&c| comb2(c)).sum();
    let row_sum: f64 = rows.values().map(|&c| comb2(c)).sum();
    let col_sum: f64 = cols.values().map(|&c| comb2(c)).sum();
    let expected = row_sum * col_sum / comb2(a.len() as f64);
    let max = (row_sum + col_sum) / 2.0;
    (index - expected) / (max - expected)
}

#[test]
fn criterion_09_byte_identical_reruns() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let (portfolio, schema) = generate_fixture(dir, 600, 11);
    let portfolio = portfolio.to_str().unwrap();
    let schema = schema.to_str().unwrap();

    // Stdout-only subcommands: identical bytes on both runs.
    for args in [
        vec!["inspect", "--data", portfolio, "--schema", schema],
        vec!["lambda", "--data", portfolio, "--schema", schema],
        vec!["dist", "40.7", "-74.0", "34.0", "-118.2"],
    ] {
        let first = run(dir, &args);
        let second = run(dir, &args);
        assert_ok(&first, args[0]);
        assert_eq!(first.stdout, second.stdout, "{} stdout differs", args[0]);
        assert!(!first.stdout.is_empty());
    }

    // File-writing subcommands: run into two fresh directories and rerun
    // into the first, then require identical bytes everywhere.
    let file_writers: Vec<(&str, Vec<String>)> = vec![
        (
            "synth",
            ["synth", "--clusters", "3", "--records", "600", "--seed", "11"]
                .map(String::from)
                .to_vec(),
        ),
        (
            "cluster",
            ["cluster", "--data", portfolio, "--schema", schema, "--k", "3", "--seed", "7"]
                .map(String::from)
                .to_vec(),
        ),
        (
            "select-k",
            [
                "select-k", "--data", portfolio, "--schema", schema, "--k-max", "3", "--B", "8",
                "--sample-fraction", "0.25", "--seed", "5",
            ]
            .map(String::from)
            .to_vec(),
        ),
    ];
    let mut pass = true;
    for (name, args) in &file_writers {
        let out_a = format!("{name}-a");
        let out_b = format!("{name}-b");
        for out_dir in [&out_a, &out_b, &out_a] {
            let mut argv: Vec<&str> = args.iter().map(String::as_str).collect();
            argv.extend(["--out", out_dir]);
            let out = run(dir, &argv);
            assert_ok(&out, name);
        }
        assert_same_dir(&dir.join(&out_a), &dir.join(&out_b), name);
        pass &= dir_contents(&dir.join(&out_a))
            .iter()
            .any(|(n, _)| n == "run-manifest.json");
    }

    // experience consumes cluster's assignments; same rerun contract.
    let assignments = dir.join("cluster-a/assignments.csv");
    let assignments = assignments.to_str().unwrap();
    for out_dir in ["exp-a", "exp-b", "exp-a"] {
        let out = run(
            dir,
            &[
                "experience",
                "--assignments",
                assignments,
                "--portfolio",
                portfolio,
                "--out",
                out_dir,
            ],
        );
        assert_ok(&out, "experience");
    }
    assert_same_dir(&dir.join("exp-a"), &dir.join("exp-b"), "experience");

    println!(
        "ACCEPTANCE 9 (byte identical reruns): {}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass);
}

#[test]
fn planted_clusters_are_recovered_with_high_rand_index() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let (portfolio, schema) = generate_fixture(dir, 1500, 3);
    let out = run(
        dir,
        &[
            "cluster",
            "--data",
            portfolio.to_str().unwrap(),
            "--schema",
            schema.to_str().unwrap(),
            "--k",
            "3",
            "--seed",
            "7",
            "--out",
            "fit",
        ],
    );
    assert_ok(&out, "cluster");
    let truth = read_cluster_column(&dir.join("gen/labels.csv"));
    let fitted = read_cluster_column(&dir.join("fit/assignments.csv"));
    let ari = adjusted_rand(&truth, &fitted);
    assert!(ari >= 0.95, "adjusted Rand index {ari} below 0.95");
}

/// A single mixed-type blob: unstructured data for which the gap statistic
/// should settle on one cluster.
fn single_blob_spec(mortality_rate: f64) -> String {
    format!(
        r#"
n = 600
numerical = ["age", "bmi"]
spatial_name = "loc"

[[categorical]]
name = "gender"
levels = ["F", "M"]

[[clusters]]
weight = 1.0
numerical_means = [40.0, 25.0]
numerical_sds = [5.0, 3.0]
level_weights = [[0.5, 0.5]]
center_lat_deg = 10.0
center_lon_deg = 20.0
spread_deg = 1.0
mortality_rate = {mortality_rate}
face_amount_range = [10000.0, 20000.0]
"#
    )
}

#[test]
fn select_k_reports_chosen_k_and_refits() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("spec.toml"), single_blob_spec(0.01)).unwrap();
    let out = run(dir, &["synth", "--spec", "spec.toml", "--seed", "1", "--out", "gen"]);
    assert_ok(&out, "synth from spec");
    let out = run(
        dir,
        &[
            "select-k",
            "--data",
            "gen/portfolio.csv",
            "--schema",
            "gen/schema.toml",
            "--k-max",
            "3",
            "--B",
            "8",
            "--sample-fraction",
            "1.0",
            "--seed",
            "5",
            "--out",
            "sel",
        ],
    );
    assert_ok(&out, "select-k");
    let stdout = String::from_utf8(out.stdout).unwrap();
    let chosen: usize = stdout.trim().parse().expect("chosen_k on stdout");
    assert_eq!(chosen, 1, "one blob should select one cluster");
    for artifact in ["gap-profile.csv", "gap-profile.json", "model.json", "assignments.csv"] {
        assert!(dir.join("sel").join(artifact).exists(), "missing {artifact}");
    }
    let profile = std::fs::read_to_string(dir.join("sel/gap-profile.csv")).unwrap();
    let rows = profile.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 1 + 4, "header plus k_max + 1 rows");
}

#[test]
fn missing_required_value_names_the_key_and_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let (portfolio, schema) = generate_fixture(dir, 600, 11);
    let out = run(
        dir,
        &[
            "cluster",
            "--data",
            portfolio.to_str().unwrap(),
            "--schema",
            schema.to_str().unwrap(),
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("--k"), "stderr should name the key: {stderr}");
}

#[test]
fn run_config_supplies_values_and_flags_win() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let (portfolio, schema) = generate_fixture(dir, 600, 11);
    std::fs::write(
        dir.join("run.toml"),
        format!(
            "schema_version = 1\nseed = 7\ndata = {:?}\nschema = {:?}\noutput = \"from-config\"\n\n[cluster]\nk = 2\n",
            portfolio.to_str().unwrap(),
            schema.to_str().unwrap()
        ),
    )
    .unwrap();

    let out = run(dir, &["cluster", "--config", "run.toml"]);
    assert_ok(&out, "cluster from config");
    let model = std::fs::read_to_string(dir.join("from-config/model.json")).unwrap();
    assert!(model.contains("\"k\": 2"));

    let out = run(dir, &["cluster", "--config", "run.toml", "--k", "3", "--out", "flag-wins"]);
    assert_ok(&out, "cluster with flag override");
    let model = std::fs::read_to_string(dir.join("flag-wins/model.json")).unwrap();
    assert!(model.contains("\"k\": 3"));

    std::fs::write(dir.join("bad.toml"), "schema_version = 1\nnot_a_key = 5\n").unwrap();
    let out = run(dir, &["cluster", "--config", "bad.toml"]);
    assert_eq!(out.status.code(), Some(1));

    std::fs::write(dir.join("old.toml"), "schema_version = 99\n").unwrap();
    let out = run(dir, &["cluster", "--config", "old.toml"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("schema_version"), "{stderr}");
}

#[test]
fn synth_with_zero_mortality_emits_no_deaths() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("spec.toml"), single_blob_spec(0.0)).unwrap();
    let out = run(dir, &["synth", "--spec", "spec.toml", "--seed", "1", "--out", "gen"]);
    assert_ok(&out, "synth with zero mortality");

    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(dir.join("gen/portfolio.csv"))
        .unwrap();
    let headers = rdr.headers().unwrap().clone();
    let death = headers.iter().position(|h| h == "death").unwrap();
    let mut rows = 0;
    for record in rdr.records() {
        assert_eq!(&record.unwrap()[death], "0");
        rows += 1;
    }
    assert_eq!(rows, 600);
}

#[test]
fn experience_joins_a_rate_table_keyed_by_age_sex_smoker() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(
        dir.join("assignments.csv"),
        "id,cluster\nA,0\nB,0\nC,1\n",
    )
    .unwrap();
    std::fs::write(
        dir.join("portfolio.csv"),
        "id,face_amount,death,age,sex,smoker\nA,100,1,40,F,no\nB,100,0,40,F,no\nC,200,0,55,M,yes\n",
    )
    .unwrap();
    std::fs::write(
        dir.join("rates.csv"),
        "age,sex,smoker,expected_rate\n40,F,no,0.01\n55,M,yes,0.02\n",
    )
    .unwrap();

    let out = run(
        dir,
        &[
            "experience",
            "--assignments",
            "assignments.csv",
            "--portfolio",
            "portfolio.csv",
            "--rate-table",
            "rates.csv",
            "--out",
            "exp",
        ],
    );
    assert_ok(&out, "experience with rate table");
    let report = std::fs::read_to_string(dir.join("exp/experience.csv")).unwrap();
    // Cluster 0: two lives of 100 at q = 0.01 with one death, so R = 50.
    let row = report
        .lines()
        .find(|l| l.starts_with("0,"))
        .expect("cluster 0 row");
    assert!(row.starts_with("0,2,100,2,50,"), "unexpected row: {row}");

    // A portfolio that already has expected_rate must reject the table.
    std::fs::write(
        dir.join("both.csv"),
        "id,face_amount,death,age,sex,smoker,expected_rate\nA,100,1,40,F,no,0.01\n",
    )
    .unwrap();
    let out = run(
        dir,
        &[
            "experience",
            "--assignments",
            "assignments.csv",
            "--portfolio",
            "both.csv",
            "--rate-table",
            "rates.csv",
            "--out",
            "exp2",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[cfg(unix)]
#[test]
fn closed_stdout_pipe_does_not_panic() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let (portfolio, schema) = generate_fixture(dir, 600, 11);
    let mut child = Command::new(bin())
        .args([
            "inspect",
            "--data",
            portfolio.to_str().unwrap(),
            "--schema",
            schema.to_str().unwrap(),
            "-q",
        ])
        .current_dir(dir)
        .stdout(std::process::Stdio::piped())
        .stderr(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    drop(child.stdout.take());
    let out = child.wait_with_output().unwrap();
    assert_ne!(out.status.code(), Some(101), "binary panicked");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(!stderr.contains("panicked"), "stderr: {stderr}");
}

#[test]
fn experience_rejects_unmatched_ids() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("assignments.csv"), "id,cluster\nA,0\n").unwrap();
    std::fs::write(
        dir.join("portfolio.csv"),
        "id,face_amount,death,expected_rate\nA,100,0,0.01\nB,100,0,0.01\n",
    )
    .unwrap();
    let out = run(
        dir,
        &[
            "experience",
            "--assignments",
            "assignments.csv",
            "--portfolio",
            "portfolio.csv",
            "--out",
            "exp",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("no cluster assignment"), "{stderr}");
}
