use std::io::Write;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::NamedTempFile;

const TRIANGLE: &str = "0,1,3\n1,0,1\n3,1,0\n";
const SQUARE: &str = "0,2,4,2\n2,0,2,4\n4,2,0,2\n2,4,2,0\n";
const KITE: &str = "0,4,2,2\n4,0,2,2\n2,2,0,2\n2,2,2,0\n";

fn edmp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edmp"))
        .args(args)
        .env_remove("EDMP_TOL")
        .output()
        .expect("binary runs")
}

fn file(contents: &str) -> NamedTempFile {
    let mut f = NamedTempFile::new().unwrap();
    f.write_all(contents.as_bytes()).unwrap();
    f
}

fn path(f: &NamedTempFile) -> &str {
    f.path().to_str().unwrap()
}

fn json(out: &Output) -> Value {
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("JSON output")
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

fn close(a: f64, b: f64, eps: f64) -> bool {
    (a - b).abs() <= eps
}

#[test]
fn analyze_reports_profiles() {
    let tri = file(TRIANGLE);
    let doc = json(&edmp(&["analyze", path(&tri)]));
    assert_eq!(doc["schema_version"], "1.0");
    let p = &doc["profile"];
    assert_eq!(p["r"], 2);
    assert_eq!(p["unit_spherical"], true);
    assert!(close(f(&p["radius"]), 1.0, 1e-12));
    assert_eq!(doc["entries"].as_array().unwrap().len(), 3);

    let sq = file(SQUARE);
    let doc = json(&edmp(&["analyze", path(&sq)]));
    assert_eq!(doc["profile"]["regular"], true);
    assert_eq!(doc["profile"]["gale"]["cols"], 1);
    for (x, want) in doc["profile"]["w"]
        .as_array()
        .unwrap()
        .iter()
        .zip([0.125; 4])
    {
        assert!(close(f(x), want, 1e-12));
    }
}

#[test]
fn analyze_accepts_non_unit_spheres() {
    let big = file("0,4,12\n4,0,4\n12,4,0\n");
    let doc = json(&edmp(&["analyze", path(&big)]));
    assert_eq!(doc["profile"]["spherical"], true);
    assert_eq!(doc["profile"]["unit_spherical"], false);
    assert!(close(f(&doc["profile"]["radius"]), 2.0, 1e-12));
    assert!(doc["entries"].as_array().unwrap().is_empty());
}

#[test]
fn exit_codes() {
    let bad = file("0,1,3\n1,0\n3,1,0\n");
    assert_eq!(edmp(&["analyze", path(&bad)]).status.code(), Some(2));
    assert_eq!(
        edmp(&["analyze", "/nonexistent/matrix.csv"]).status.code(),
        Some(2)
    );
    assert_eq!(edmp(&["entry"]).status.code(), Some(2));

    // Violates the triangle inequality.
    let not_edm = file("0,1,9\n1,0,1\n9,1,0\n");
    assert_eq!(edmp(&["analyze", path(&not_edm)]).status.code(), Some(3));
    let asym = file("0,1\n2,0\n");
    assert_eq!(edmp(&["analyze", path(&asym)]).status.code(), Some(3));

    let big = file("0,4,12\n4,0,4\n12,4,0\n");
    assert_eq!(
        edmp(&["entry", path(&big), "--k", "1", "--l", "2"])
            .status
            .code(),
        Some(4)
    );
    assert_eq!(
        edmp(&["sweep", path(&big), "--k", "1", "--l", "2"])
            .status
            .code(),
        Some(4)
    );

    let tri = file(TRIANGLE);
    for (k, l) in [("1", "4"), ("0", "2"), ("2", "1"), ("2", "2")] {
        assert_eq!(
            edmp(&["entry", path(&tri), "--k", k, "--l", l])
                .status
                .code(),
            Some(5),
            "({k},{l})"
        );
    }
    assert_eq!(
        edmp(&["gen", "--n", "3", "--r", "3"]).status.code(),
        Some(6)
    );
    assert_eq!(
        edmp(&[
            "gen",
            "--n",
            "5",
            "--r",
            "4",
            "--structure",
            "parallel-gale"
        ])
        .status
        .code(),
        Some(6)
    );
    assert_eq!(
        edmp(&["sweep", path(&tri), "--k", "1", "--l", "2", "--num", "1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(edmp(&["verify", "--count", "0"]).status.code(), Some(2));
    assert_eq!(
        edmp(&["verify", "--count", "1", "--nmax", "3"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn entry_reports() {
    let tri = file(TRIANGLE);
    let doc = json(&edmp(&["entry", path(&tri), "--k", "1", "--l", "2"]));
    let e = &doc["entry"];
    assert_eq!(e["case_tag"], "PairUnit");
    assert_eq!(e["t_eq"]["kind"], "pair");
    let vals: Vec<f64> = e["t_eq"]["values"]
        .as_array()
        .unwrap()
        .iter()
        .map(f)
        .collect();
    assert!(close(vals[0], 0.0, 1e-12) && close(vals[1], 3.0, 1e-9));
    assert!(close(f(&e["coefficients"]["beta2"]), -1.0 / 3.0, 1e-12));
    assert!(f(&doc["cross_check"]["max_rel_discrepancy"]) < 1e-8);
    assert_eq!(doc["cross_check"]["samples"].as_array().unwrap().len(), 5);

    let kite = file(KITE);
    let doc = json(&edmp(&["entry", path(&kite), "--k", "1", "--l", "2"]));
    assert_eq!(doc["entry"]["case_tag"], "SingletonUnit");
    let doc = json(&edmp(&["entry", path(&kite), "--k", "3", "--l", "4"]));
    assert_eq!(doc["entry"]["case_tag"], "ContinuumUnit");
    assert_eq!(doc["cross_check"]["bordered_route"], "pseudoinverse");
    assert!(f(&doc["cross_check"]["max_rel_discrepancy"]) < 1e-8);

    let sq = file(SQUARE);
    let doc = json(&edmp(&["entry", path(&sq), "--k", "1", "--l", "2"]));
    assert_eq!(doc["entry"]["case_tag"], "TleqTrivial");
    assert_eq!(doc["cross_check"]["samples"].as_array().unwrap().len(), 1);
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let kite = file(KITE);
    let a = edmp(&["entry", path(&kite), "--k", "1", "--l", "2"]);
    let b = edmp(&["entry", path(&kite), "--k", "1", "--l", "2"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn tolerance_override_from_environment() {
    let tri = file(TRIANGLE);
    let out = Command::new(env!("CARGO_BIN_EXE_edmp"))
        .args(["analyze", path(&tri)])
        .env("EDMP_TOL", "1e-9")
        .output()
        .unwrap();
    let doc = json(&out);
    assert_eq!(f(&doc["diagnostics"]["tolerances"]["rank_rel"]), 1e-9);
    let out = Command::new(env!("CARGO_BIN_EXE_edmp"))
        .args(["analyze", path(&tri)])
        .env("EDMP_TOL", "-1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

struct Row {
    t: f64,
    closed: Option<f64>,
    oracle: Option<f64>,
    in_t_leq: bool,
    in_t_eq: bool,
}

fn sweep_rows(out: &Output) -> Vec<Row> {
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("t,is_edm,is_spherical,radius_sq_closed_form,radius_sq_oracle,in_t_leq,in_t_eq,closed_form_extrapolated")
    );
    let opt = |s: &str| (!s.is_empty()).then(|| s.parse::<f64>().unwrap());
    lines
        .map(|line| {
            let c: Vec<&str> = line.split(',').collect();
            assert_eq!(c.len(), 8, "{line}");
            Row {
                t: c[0].parse().unwrap(),
                closed: opt(c[3]),
                oracle: opt(c[4]),
                in_t_leq: c[5] == "true",
                in_t_eq: c[6] == "true",
            }
        })
        .collect()
}

#[test]
fn sweep_of_triangle() {
    let tri = file(TRIANGLE);
    let rows = sweep_rows(&edmp(&[
        "sweep",
        path(&tri),
        "--k",
        "1",
        "--l",
        "3",
        "--num",
        "9",
        "--margin",
        "0",
    ]));
    let first = &rows[0];
    assert!(close(first.t, -3.0, 1e-9));
    assert!(close(first.closed.unwrap(), 0.25, 1e-10));
    assert!(close(first.oracle.unwrap(), 0.25, 1e-10));
    assert!(first.in_t_leq && !first.in_t_eq);
    let zero = rows.iter().find(|r| r.t == 0.0).expect("row at t = 0");
    assert!(zero.in_t_eq && zero.in_t_leq);
    for r in rows.iter().filter(|r| r.in_t_leq) {
        assert!(
            close(r.closed.unwrap(), 1.0 / (1.0 - r.t), 1e-10),
            "t = {}",
            r.t
        );
    }
}

#[test]
fn sweep_columns_agree_inside_tleq() {
    for (structure, n, r) in [
        ("generic", "5", "4"),
        ("mirror", "5", "4"),
        ("zero-gale", "6", "4"),
    ] {
        let out = edmp(&[
            "gen",
            "--n",
            n,
            "--r",
            r,
            "--structure",
            structure,
            "--seed",
            "3",
        ]);
        let m = file(std::str::from_utf8(&out.stdout).unwrap());
        let mut checked = 0;
        for (k, l) in [("1", "2"), ("2", "4")] {
            let rows = sweep_rows(&edmp(&[
                "sweep",
                path(&m),
                "--k",
                k,
                "--l",
                l,
                "--num",
                "41",
                "--margin",
                "0.2",
            ]));
            for row in rows.iter().filter(|r| r.in_t_leq) {
                let (a, b) = (row.closed.unwrap(), row.oracle.unwrap());
                assert!(
                    (a - b).abs() <= 1e-8 * a.abs().max(1.0),
                    "{structure} ({k},{l}) t = {}: {a} vs {b}",
                    row.t
                );
                checked += 1;
            }
            assert!(rows.iter().any(|r| r.t == 0.0 && r.in_t_eq));
        }
        assert!(checked > 0);
    }
}

#[test]
fn verify_runs_and_catches_corruption() {
    let out = edmp(&["verify", "--count", "25", "--seed", "42"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(text.contains("first failing seed: none"));
    assert!(text.contains("coverage:") && text.contains("(ok)"));

    let out = edmp(&["verify", "--count", "1", "--corrupt"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("result: FAIL"));
}

#[test]
fn verify_is_deterministic() {
    let a = edmp(&["verify", "--count", "4", "--seed", "9"]);
    let b = edmp(&["verify", "--count", "4", "--seed", "9"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn generated_matrices_feed_back_into_analysis() {
    let out = edmp(&[
        "gen",
        "--n",
        "4",
        "--r",
        "2",
        "--structure",
        "parallel-gale",
        "--k",
        "1",
        "--l",
        "3",
        "--seed",
        "1",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# edmp gen n=4 r=2 structure=parallel-gale entry=(1,3) seed=1\n"));
    let m = file(&text);
    let doc = json(&edmp(&["entry", path(&m), "--k", "1", "--l", "3"]));
    assert_eq!(doc["entry"]["yielding"], true);
    assert_eq!(doc["entry"]["case_tag"], "ContinuumUnit");

    let out = edmp(&[
        "gen",
        "--n",
        "6",
        "--r",
        "5",
        "--structure",
        "mirror",
        "--k",
        "2",
        "--l",
        "5",
        "--format",
        "json",
    ]);
    let gen: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(gen["generator"]["structure"], "mirror");
    assert_eq!(gen["n"], 6);
    let m = file(std::str::from_utf8(&out.stdout).unwrap());
    let doc = json(&edmp(&["entry", path(&m), "--k", "2", "--l", "5"]));
    assert_eq!(doc["entry"]["case_tag"], "SingletonUnit");
    assert_eq!(
        json(&edmp(&["analyze", path(&m)]))["profile"]["unit_spherical"],
        true
    );

    let again = edmp(&[
        "gen",
        "--n",
        "6",
        "--r",
        "5",
        "--structure",
        "mirror",
        "--k",
        "2",
        "--l",
        "5",
        "--format",
        "json",
    ]);
    assert_eq!(out.stdout, again.stdout);
}

#[test]
fn json_matrix_round_trip_is_exact() {
    let out = edmp(&[
        "gen", "--n", "5", "--r", "3", "--seed", "11", "--format", "json",
    ]);
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    let m = file(std::str::from_utf8(&out.stdout).unwrap());
    let csv = edmp(&["gen", "--n", "5", "--r", "3", "--seed", "11"]);
    let rows: Vec<Vec<f64>> = String::from_utf8(csv.stdout)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    for (i, row) in rows.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            let exact = f(&doc["d"][i][j]);
            assert!((x - exact).abs() <= 1e-15 * exact.abs());
        }
    }
    assert_eq!(json(&edmp(&["analyze", path(&m)]))["profile"]["r"], 3);
}
