use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bosample(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bosample"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL_CONFIG: &str = r#"
population = "synthetic"
synthetic_size = 200
synthetic_dim = 3
prior_size = 30
sample_size = 20
repeats = 3
designs = ["srs", "bo-pu"]
objective_rounds = 2
"#;

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn minimal_simulation_writes_outputs() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "run.toml", SMALL_CONFIG);
    let out = dir.path().join("out");
    let o = bosample(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["records.csv", "summary.json", "provenance.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    assert!(stdout(&o).contains("status ok"));
}

#[test]
fn oversized_prior_and_sample_exit_two() {
    let dir = TempDir::new().unwrap();
    let body = SMALL_CONFIG.replace("prior_size = 30", "prior_size = 190");
    let cfg = write(dir.path(), "bad.toml", &body);
    let o = bosample(&["simulate", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("prior_size + sample_size"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_exits_two() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "bad.toml", &format!("{SMALL_CONFIG}\nbogus = 1\n"));
    let o = bosample(&["simulate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_config_is_io_error() {
    let o = bosample(&["simulate", "--config", "/nonexistent/run.toml"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn unknown_flag_is_usage_error() {
    let o = bosample(&["mwu", "--no-such-flag", "a", "b"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn overrides_give_ten_rows() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "run.toml", SMALL_CONFIG);
    let out = dir.path().join("out");
    let o = bosample(&[
        "simulate",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--repeats",
        "5",
        "--designs",
        "srs,bo-pu",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let records = std::fs::read_to_string(out.join("records.csv")).unwrap();
    assert_eq!(records.lines().count(), 1 + 10);
}

#[test]
fn records_identical_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "run.toml", SMALL_CONFIG);
    let run = |threads: &str| {
        let out = dir.path().join(format!("t{threads}"));
        let o = bosample(&[
            "simulate",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "17",
            "--threads",
            threads,
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        (
            std::fs::read(out.join("records.csv")).unwrap(),
            std::fs::read(out.join("summary.json")).unwrap(),
        )
    };
    assert_eq!(run("1"), run("3"));
}

fn population_csv(rows: &[[f64; 2]]) -> String {
    let mut s = String::from("a,b\n");
    for r in rows {
        s.push_str(&format!("{},{}\n", r[0], r[1]));
    }
    s
}

fn prior_csv() -> String {
    let mut s = String::from("a,b,y\n");
    for i in 0..12 {
        let (a, b) = (i as f64 * 0.3, (i as f64).sin());
        s.push_str(&format!("{a},{b},{}\n", a + 2.0 * b));
    }
    s
}

fn design_rows(text: &str) -> Vec<(f64, f64)> {
    text.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect()
}

#[test]
fn constant_features_give_half() {
    let dir = TempDir::new().unwrap();
    let pop = write(dir.path(), "pop.csv", &population_csv(&[[1.0, 2.0]; 6]));
    let prior = write(dir.path(), "prior.csv", &prior_csv());
    let o = bosample(&["design", "--population", &pop, "--prior", &prior]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = design_rows(&stdout(&o));
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|(_, pi)| *pi == 0.5));
}

#[test]
fn emitted_pi_match_recomputed_minmax() {
    let dir = TempDir::new().unwrap();
    let grid: Vec<[f64; 2]> = (0..40).map(|i| [(i % 8) as f64 * 0.5, (i / 8) as f64 * 0.7 - 1.0]).collect();
    let pop = write(dir.path(), "pop.csv", &population_csv(&grid));
    let prior = write(dir.path(), "prior.csv", &prior_csv());
    let eps = 0.02;
    for acq in ["pu", "ilcb", "ei", "sei"] {
        let out = dir.path().join(format!("{acq}.csv"));
        let o = bosample(&[
            "design",
            "--population",
            &pop,
            "--prior",
            &prior,
            "--acquisition",
            acq,
            "--epsilon",
            "0.02",
            "--rounds",
            "2",
            "--seed",
            "4",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{acq}: {}", stderr(&o));
        let rows = design_rows(&std::fs::read_to_string(&out).unwrap());
        let lo = rows.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
        let hi = rows.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
        for (score, pi) in rows {
            assert!(pi > 0.0 && pi < 1.0);
            let expected = if hi == lo {
                0.5
            } else {
                ((score - lo) / (hi - lo)).clamp(eps, 1.0 - eps)
            };
            assert!((pi - expected).abs() <= 1e-12, "{acq}: score {score} pi {pi} vs {expected}");
        }
    }
}

#[test]
fn design_rejects_schema_mismatch() {
    let dir = TempDir::new().unwrap();
    let pop = write(dir.path(), "pop.csv", "a,c\n1,2\n3,4\n");
    let prior = write(dir.path(), "prior.csv", &prior_csv());
    let o = bosample(&["design", "--population", &pop, "--prior", &prior]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("schema mismatch"));
}

fn mwu_p(out: &str) -> f64 {
    out.lines()
        .find_map(|l| l.strip_prefix("p "))
        .unwrap()
        .trim()
        .parse()
        .unwrap()
}

#[test]
fn mwu_examples() {
    let dir = TempDir::new().unwrap();
    let a = write(dir.path(), "a.txt", "1\n2\n3\n");
    let b = write(dir.path(), "b.txt", "4\n5\n6\n");

    let o = bosample(&["mwu", &a, &b]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let p_line = text.lines().find(|l| l.starts_with("p ")).unwrap();
    let mantissa = p_line[2..].split('e').next().unwrap();
    assert!(mantissa.replace(['.', '-'], "").len() >= 12);
    assert!((mwu_p(&text) - 0.05).abs() < 1e-12);

    let reversed = bosample(&["mwu", &a, &b, "--alternative", "greater"]);
    assert!(mwu_p(&stdout(&reversed)) > 0.9);

    let same = bosample(&["mwu", &a, &a]);
    assert!((mwu_p(&stdout(&same)) - 0.5).abs() < 0.2);
}

#[test]
fn mwu_empty_file_exits_two() {
    let dir = TempDir::new().unwrap();
    let a = write(dir.path(), "a.txt", "1\n2\n");
    let empty = write(dir.path(), "empty.txt", "");
    let o = bosample(&["mwu", &a, &empty]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn estimate_matches_hand_totals() {
    let dir = TempDir::new().unwrap();
    // Units 0 and 2 sampled; unit 1 and 3 responses unobserved.
    let frame = write(
        dir.path(),
        "frame.csv",
        "y,yhat,pi,selected\n4,3,0.5,1\n,2,0.25,0\n10,8,0.5,1\n,1,0.25,0\n",
    );
    let o = bosample(&["estimate", "--frame", &frame]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let value = |key: &str| -> f64 {
        text.lines()
            .find_map(|l| l.strip_prefix(&format!("{key},")))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert_eq!(value("ht_total"), 4.0 / 0.5 + 10.0 / 0.5);
    assert_eq!(value("difference_total"), 14.0 + 1.0 / 0.5 + 2.0 / 0.5);
    assert_eq!(value("sample_size"), 2.0);
}

#[test]
fn synth_is_seed_deterministic() {
    let run = |seed: &str| stdout(&bosample(&["synth", "--size", "30", "--dim", "2", "--seed", seed]));
    let first = run("9");
    assert_eq!(first, run("9"));
    assert_ne!(first, run("10"));
    assert_eq!(first.lines().next().unwrap().split(',').count(), 3);
    assert_eq!(first.lines().count(), 31);
}

#[test]
fn fit_predicts_each_query_row() {
    let dir = TempDir::new().unwrap();
    let train = write(dir.path(), "train.csv", &prior_csv());
    let query = write(dir.path(), "query.csv", &population_csv(&[[0.0, 0.0], [1.5, 0.5], [3.0, -1.0]]));
    let o = bosample(&["fit", "--train", &train, "--query", &query]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("mean,std_dev"));
    assert_eq!(text.lines().count(), 4);
}
