use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bnmix(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bnmix"))
        .args(args)
        .arg("--quiet")
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn fails(out: &Output, code: i32, needle: &str) {
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(out.status.code(), Some(code), "{err}");
    assert!(err.contains(needle), "{err:?} lacks {needle:?}");
}

fn generate(dir: &Path, name: &str, extra: &[&str]) -> Value {
    let data = format!("{name}.csv");
    let truth = format!("{name}.json");
    let mut args = vec![
        "generate",
        "--components",
        "2",
        "--per-component",
        "100",
        "--sparsity",
        "low",
        "--density",
        "dense",
        "--seed",
        "7",
        "--out",
        &data,
        "--truth",
        &truth,
    ];
    args.extend_from_slice(extra);
    serde_json::from_str(&ok(&bnmix(dir, &args))).unwrap()
}

fn fit(dir: &Path, data: &str, k: &str, iterations: &str, trace: &str) -> Value {
    let out = bnmix(
        dir,
        &[
            "fit",
            "--data",
            data,
            "--modifiable",
            "5",
            "--covariates",
            "3",
            "--labels",
            "-k",
            k,
            "--iterations",
            iterations,
            "--seed",
            "11",
            "--trace",
            trace,
        ],
    );
    serde_json::from_str(&ok(&out)).unwrap()
}

#[test]
fn generate_writes_files_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = generate(dir.path(), "a", &[]);
    assert_eq!(manifest["rows"], 200);
    assert_eq!(manifest["condition"]["components"], 2);
    assert_eq!(manifest["condition"]["density"], "dense");
    assert_eq!(manifest["condition"]["seed"], 7);
    let csv = fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert_eq!(csv.lines().count(), 201);
    assert!(csv.starts_with("y1,y2,y3,y4,y5,x1,x2,x3,z_true\n"));

    generate(dir.path(), "b", &[]);
    for ext in ["csv", "json"] {
        assert_eq!(
            fs::read(dir.path().join(format!("a.{ext}"))).unwrap(),
            fs::read(dir.path().join(format!("b.{ext}"))).unwrap()
        );
    }
}

#[test]
fn generate_validates_before_writing() {
    let dir = tempfile::tempdir().unwrap();
    let base = [
        "generate",
        "--components",
        "2",
        "--per-component",
        "10",
        "--sparsity",
        "low",
        "--out",
        "d.csv",
        "--truth",
        "t.json",
    ];
    let mut args = base.to_vec();
    args.extend(["--density", "bogus", "--seed", "1"]);
    fails(&bnmix(dir.path(), &args), 2, "cluster density");
    let mut args = base.to_vec();
    args.extend(["--density", "mid"]);
    fails(&bnmix(dir.path(), &args), 2, "seed");
    let mut args = base.to_vec();
    args.extend(["--density", "mid", "--seed", "1", "--covariates", "0"]);
    fails(&bnmix(dir.path(), &args), 2, "covariates");
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn fit_is_deterministic_and_summarised() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "d", &[]);
    let s1 = fit(dir.path(), "d.csv", "2", "60", "t1.jsonl");
    let s2 = fit(dir.path(), "d.csv", "2", "60", "t2.jsonl");
    assert_eq!(
        fs::read(dir.path().join("t1.jsonl")).unwrap(),
        fs::read(dir.path().join("t2.jsonl")).unwrap()
    );
    assert_eq!(s1, s2);
    assert_eq!(s1["schema"], "bnmix-summary");
    assert_eq!(s1["log_scores"].as_array().unwrap().len(), 60);
    assert_eq!(s1["records"], 6);
    let acc = s1["acceptance"].as_array().unwrap();
    assert_eq!(acc.len(), 2);
    assert_eq!(acc[0]["proposed"], 60 * 50);
    let freqs = s1["edge_frequencies"].as_array().unwrap();
    assert_eq!(freqs.len(), 2);
    for f in freqs {
        let rows = f.as_array().unwrap();
        assert_eq!(rows.len(), 5);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_array().unwrap();
            assert_eq!(row.len(), 5);
            assert_eq!(row[i], 0.0);
            assert!(row
                .iter()
                .all(|v| (0.0..=1.0).contains(&v.as_f64().unwrap())));
        }
    }

    let summary: Value = serde_json::from_str(&ok(&bnmix(
        dir.path(),
        &["summarize", "--trace", "t1.jsonl"],
    )))
    .unwrap();
    assert_eq!(summary, s1);
}

#[test]
fn fit_fails_fast_on_bad_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let args = |data: &'static str| {
        vec![
            "fit",
            "--data",
            data,
            "--modifiable",
            "2",
            "-k",
            "1",
            "--iterations",
            "5",
            "--seed",
            "1",
            "--trace",
            "t.jsonl",
        ]
    };
    fails(&bnmix(dir.path(), &args("missing.csv")), 3, "missing.csv");
    assert!(!dir.path().join("t.jsonl").exists());

    fs::write(dir.path().join("bad.csv"), "y1,y2\n1,2\n3,oops\n").unwrap();
    fails(&bnmix(dir.path(), &args("bad.csv")), 4, "line 3, column 2");
    assert!(!dir.path().join("t.jsonl").exists());

    fs::write(dir.path().join("ok.csv"), "y1,y2\n1,2\n3,4\n").unwrap();
    let mut a = args("ok.csv");
    a.extend(["--burn-in", "9"]);
    fails(&bnmix(dir.path(), &a), 2, "burn");
    let mut a = args("ok.csv");
    let last = a.len() - 1;
    a[last] = "nodir/t.jsonl";
    fails(&bnmix(dir.path(), &a), 3, "nodir");
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "d", &[]);
    fs::write(
        dir.path().join("run.toml"),
        "[fit]\ndata = \"d.csv\"\nmodifiable = 5\ncovariates = 3\nlabels = true\nk = 2\niterations = 40\nthin = 2\nseed = 5\ntrace = \"t.jsonl\"\n",
    )
    .unwrap();
    let out = bnmix(
        dir.path(),
        &[
            "fit",
            "--config",
            "run.toml",
            "--iterations",
            "20",
            "-k",
            "1",
        ],
    );
    let s: Value = serde_json::from_str(&ok(&out)).unwrap();
    assert_eq!(s["iterations"], 20);
    assert_eq!(s["k"], 1);
    assert_eq!(s["thin"], 2);
    assert_eq!(s["seed"], 5);

    fs::write(dir.path().join("typo.toml"), "[fit]\nseeed = 5\n").unwrap();
    fails(
        &bnmix(dir.path(), &["fit", "--config", "typo.toml"]),
        4,
        "seeed",
    );
}

#[test]
fn select_emits_one_row_per_k() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "d", &[]);
    let run = |range: &str| {
        ok(&bnmix(
            dir.path(),
            &[
                "select",
                "--data",
                "d.csv",
                "--modifiable",
                "5",
                "--covariates",
                "3",
                "--labels",
                "--k-range",
                range,
                "--iterations",
                "30",
                "--seed",
                "2",
            ],
        ))
    };
    let table = run("3");
    assert_eq!(table.lines().count(), 2);
    assert!(table.starts_with("k,lmppd,waic,seconds\n3,"));
    let table = run("1..3");
    let ks: Vec<&str> = table
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(ks, ["1", "2", "3"]);
    fails(
        &bnmix(
            dir.path(),
            &[
                "select",
                "--data",
                "d.csv",
                "--modifiable",
                "5",
                "--k-range",
                "0..2",
                "--iterations",
                "5",
                "--seed",
                "1",
            ],
        ),
        2,
        "k_range",
    );
}

#[test]
fn evaluate_reports_requested_metrics() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "d", &[]);
    fit(dir.path(), "d.csv", "2", "30", "t.jsonl");

    // splice the true graphs and parameters into every record
    let truth: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("d.json")).unwrap()).unwrap();
    let lines: Vec<String> = fs::read_to_string(dir.path().join("t.jsonl"))
        .unwrap()
        .lines()
        .map(|l| {
            let mut v: Value = serde_json::from_str(l).unwrap();
            if v["type"] == "record" {
                v["graphs"] = truth["graphs"].clone();
                v["params"] = truth["params"].clone();
            }
            v.to_string()
        })
        .collect();
    fs::write(dir.path().join("exact.jsonl"), lines.join("\n") + "\n").unwrap();
    let report: Value = serde_json::from_str(&ok(&bnmix(
        dir.path(),
        &["evaluate", "--trace", "exact.jsonl", "--truth", "d.json"],
    )))
    .unwrap();
    assert_eq!(report["mshd"]["value"], 0.0);
    assert_eq!(report["mshd"]["labelling"], serde_json::json!([1, 2]));
    assert!(report.get("lmppd").is_none() && report.get("waic").is_none());

    let report: Value = serde_json::from_str(&ok(&bnmix(
        dir.path(),
        &[
            "evaluate",
            "--trace",
            "t.jsonl",
            "--test-data",
            "d.csv",
            "--data",
            "d.csv",
            "--labels",
        ],
    )))
    .unwrap();
    assert!(report.get("mshd").is_none());
    assert_eq!(report["lmppd"]["points"], 200);
    assert!(report["lmppd"]["total"].as_f64().unwrap() < 0.0);
    let w = &report["waic"];
    let (lppd, p, waic) = (
        w["lppd"].as_f64().unwrap(),
        w["p_waic"].as_f64().unwrap(),
        w["waic"].as_f64().unwrap(),
    );
    assert!((waic - (lppd - p)).abs() < 1e-9 && p >= 0.0);

    fails(
        &bnmix(
            dir.path(),
            &["evaluate", "--trace", "t.jsonl", "--truth", "nope.json"],
        ),
        3,
        "MSHD unavailable",
    );
    fails(
        &bnmix(
            dir.path(),
            &["evaluate", "--trace", "t.jsonl", "--test-data", "nope.csv"],
        ),
        3,
        "LMPPD unavailable",
    );
    fails(
        &bnmix(dir.path(), &["evaluate", "--trace", "t.jsonl"]),
        2,
        "nothing to evaluate",
    );
    fails(
        &bnmix(
            dir.path(),
            &["evaluate", "--trace", "d.csv", "--truth", "d.json"],
        ),
        4,
        "line 1",
    );
}

#[test]
fn single_component_fit_finds_true_adjacencies() {
    let dir = tempfile::tempdir().unwrap();
    ok(&bnmix(
        dir.path(),
        &[
            "generate",
            "--components",
            "1",
            "--per-component",
            "500",
            "--sparsity",
            "high",
            "--density",
            "mid",
            "--seed",
            "21",
            "--out",
            "d.csv",
            "--truth",
            "t.json",
        ],
    ));
    let truth: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("t.json")).unwrap()).unwrap();
    let bits: Vec<char> = truth["graphs"][0].as_str().unwrap().chars().collect();
    let s = fit(dir.path(), "d.csv", "1", "300", "t.jsonl");
    let f = &s["edge_frequencies"][0];
    let freq = |i: usize, j: usize| f[i][j].as_f64().unwrap();
    let mut true_edges = 0;
    for i in 0..5 {
        for j in 0..5 {
            // row = parent, column = child
            if bits[i * 5 + j] == '1' {
                true_edges += 1;
                let adjacency = freq(i, j) + freq(j, i);
                assert!(adjacency > 0.8, "edge {i}-{j} found in {adjacency}");
            }
        }
    }
    assert!(true_edges > 0);
}
