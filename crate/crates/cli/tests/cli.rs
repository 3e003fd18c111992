use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn dynot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dynot"))
        .args(args)
        .env_remove("DYNOT_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn cost_line(o: &Output) -> f64 {
    let text = stdout(o);
    let line = text
        .lines()
        .find(|l| l.starts_with("cost "))
        .expect("cost line");
    line[5..].trim().parse().unwrap()
}

const CANONICAL: &str = r#"{
  "dim": 1,
  "supply": [{"id": 1, "coords": [0.0], "weight": 0.6}, {"id": 2, "coords": [1.0], "weight": 0.4}],
  "demand": [{"id": 3, "coords": [0.0], "weight": 0.5}, {"id": 4, "coords": [1.0], "weight": 0.5}],
  "cost": "sqeuclidean"
}"#;

#[test]
fn solve_small_instances() {
    let dir = TempDir::new().unwrap();
    let f = path(&dir, "canon.json");
    std::fs::write(&f, CANONICAL).unwrap();
    for engine in ["static", "structure"] {
        let o = dynot(&["solve", "--instance", s(&f), "--oracle", "--engine", engine]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!((cost_line(&o) - 0.1).abs() < 1e-12);
    }

    let single = r#"{"dim": 0, "supply": [{"id": 0, "weight": 2.0}], "demand": [{"id": 1, "weight": 2.0}],
                     "cost": {"explicit": [[3.5]]}}"#;
    let f = path(&dir, "single.json");
    std::fs::write(&f, single).unwrap();
    let o = dynot(&["solve", "--instance", s(&f), "--plan"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(cost_line(&o), 7.0);
    assert!(stdout(&o).contains("0 1 2"));
}

#[test]
fn solve_rejects_bad_input() {
    let dir = TempDir::new().unwrap();
    let f = path(&dir, "bad.json");
    std::fs::write(&f, CANONICAL.replace("0.6", "0.7")).unwrap();
    let o = dynot(&["solve", "--instance", s(&f)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("balance"));
    std::fs::write(&f, "{ not json").unwrap();
    assert_eq!(
        dynot(&["solve", "--instance", s(&f)]).status.code(),
        Some(1)
    );
    let ragged = r#"{"dim": 0, "supply": [{"id": 0, "weight": 1.0}], "demand": [{"id": 1, "weight": 1.0}],
                     "cost": {"explicit": [[1.0, 2.0]]}}"#;
    std::fs::write(&f, ragged).unwrap();
    assert_eq!(
        dynot(&["solve", "--instance", s(&f)]).status.code(),
        Some(1)
    );
}

#[test]
fn gen_is_deterministic_and_balanced() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (path(&dir, "a.json"), path(&dir, "b.json"));
    for f in [&a, &b] {
        let o = dynot(&[
            "gen",
            "--n",
            "4",
            "--dim",
            "3",
            "--seed",
            "9",
            "--out",
            s(f),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let o = dynot(&["solve", "--instance", s(&a), "--oracle"]);
    assert!(o.status.success(), "{}", stderr(&o));

    // the environment seed is the fallback
    let c = path(&dir, "c.json");
    let o = Command::new(env!("CARGO_BIN_EXE_dynot"))
        .args(["gen", "--n", "4", "--dim", "3", "--out", s(&c)])
        .env("DYNOT_SEED", "9")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
    assert_eq!(
        dynot(&["gen", "--n", "1", "--out", s(&c)]).status.code(),
        Some(1)
    );
}

#[test]
fn empty_and_query_only_streams() {
    let dir = TempDir::new().unwrap();
    let inst = path(&dir, "i.json");
    std::fs::write(&inst, CANONICAL).unwrap();
    let stream = path(&dir, "s.jsonl");
    let o = dynot(&[
        "gen-stream",
        "--instance",
        s(&inst),
        "--count",
        "0",
        "--out",
        s(&stream),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(&stream).unwrap(), "");

    std::fs::write(&stream, "{\"op\":\"query\"}\n".repeat(5)).unwrap();
    let report = path(&dir, "r.csv");
    let o = dynot(&[
        "stream",
        "--instance",
        s(&inst),
        "--stream",
        s(&stream),
        "--report",
        s(&report),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut rdr = csv::Reader::from_path(&report).unwrap();
    let costs: Vec<String> = rdr.records().map(|r| r.unwrap()[5].to_string()).collect();
    assert_eq!(costs.len(), 5);
    assert!(costs.iter().all(|c| c == &costs[0]));
}

#[test]
fn malformed_line_is_named() {
    let dir = TempDir::new().unwrap();
    let inst = path(&dir, "i.json");
    std::fs::write(&inst, CANONICAL).unwrap();
    let stream = path(&dir, "s.jsonl");
    let mut text = "{\"op\":\"query\"}\n".repeat(6);
    text += "{\"op\":\"teleport\",\"v\":1}\n";
    std::fs::write(&stream, text).unwrap();
    let o = dynot(&["stream", "--instance", s(&inst), "--stream", s(&stream)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 7"), "{}", stderr(&o));
}

#[test]
fn handwritten_stream_with_ids() {
    let dir = TempDir::new().unwrap();
    let inst = path(&dir, "i.json");
    std::fs::write(&inst, CANONICAL).unwrap();
    // drain supply 2 into 1, delete it, insert a new supply (id 5) and move it
    let lines = [
        r#"{"op":"shift","u":2,"v":1,"delta":0.4}"#,
        r#"{"op":"delete","v":2}"#,
        r#"{"op":"insert","side":"A","coords":[3.0],"weight":0.2}"#,
        r#"{"op":"move","v":5,"coords":[1.0]}"#,
        r#"{"op":"query"}"#,
    ];
    let stream = path(&dir, "s.jsonl");
    std::fs::write(&stream, lines.join("\n")).unwrap();
    let o = dynot(&[
        "stream",
        "--instance",
        s(&inst),
        "--stream",
        s(&stream),
        "--verify",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    // supplies 0.8 at 0 and 0.2 at 1 against 0.5 / 0.5: 0.3 moves one unit
    assert!((cost_line(&o) - 0.3).abs() < 1e-9);

    // the deleted id is gone
    std::fs::write(
        &stream,
        r#"{"op":"delete","v":2}"#.to_string() + "\n" + r#"{"op":"move","v":2,"coords":[0.0]}"#,
    )
    .unwrap();
    let o = dynot(&["stream", "--instance", s(&inst), "--stream", s(&stream)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn verified_fuzz_stream_matches_oracle() {
    let dir = TempDir::new().unwrap();
    let inst = path(&dir, "i.json");
    let stream = path(&dir, "s.jsonl");
    let report = path(&dir, "r.csv");
    let o = dynot(&[
        "gen",
        "--n",
        "20",
        "--dim",
        "2",
        "--seed",
        "3",
        "--out",
        s(&inst),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = dynot(&[
        "gen-stream",
        "--instance",
        s(&inst),
        "--kind",
        "mixed",
        "--count",
        "500",
        "--noise-var",
        "0.1",
        "--seed",
        "4",
        "--out",
        s(&stream),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = dynot(&[
        "stream",
        "--instance",
        s(&inst),
        "--stream",
        s(&stream),
        "--verify",
        "--report",
        s(&report),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut rdr = csv::Reader::from_path(&report).unwrap();
    let flags: Vec<String> = rdr.records().map(|r| r.unwrap()[7].to_string()).collect();
    assert_eq!(flags.len(), 500);
    assert!(flags.iter().all(|f| f == "true"));
}

#[test]
fn move_stream_replays_deterministically() {
    let dir = TempDir::new().unwrap();
    let inst = path(&dir, "i.json");
    let stream = path(&dir, "s.jsonl");
    dynot(&[
        "gen",
        "--n",
        "20",
        "--dim",
        "2",
        "--seed",
        "8",
        "--out",
        s(&inst),
    ]);
    let o = dynot(&[
        "gen-stream",
        "--instance",
        s(&inst),
        "--kind",
        "move",
        "--count",
        "100",
        "--out",
        s(&stream),
    ]);
    assert!(o.status.success());
    let mut reports = Vec::new();
    for k in 0..2 {
        let report = path(&dir, &format!("r{k}.csv"));
        let o = dynot(&[
            "stream",
            "--instance",
            s(&inst),
            "--stream",
            s(&stream),
            "--verify",
            "--report",
            s(&report),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let mut rdr = csv::Reader::from_path(&report).unwrap();
        // drop the wall-time column
        let rows: Vec<Vec<String>> = rdr
            .records()
            .map(|r| {
                r.unwrap()
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != 2)
                    .map(|(_, x)| x.to_string())
                    .collect()
            })
            .collect();
        reports.push(rows);
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn negative_costs_are_rejected() {
    let dir = TempDir::new().unwrap();
    let f = path(&dir, "neg.json");
    let neg = r#"{"dim": 0, "supply": [{"id": 0, "weight": 1.0}], "demand": [{"id": 1, "weight": 1.0}],
                  "cost": {"explicit": [[-1.0]]}}"#;
    std::fs::write(&f, neg).unwrap();
    assert_eq!(
        dynot(&["solve", "--instance", s(&f), "--oracle"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn bench_writes_one_row_per_size() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "b.csv");
    let o = dynot(&[
        "bench",
        "--sizes",
        "40",
        "--reps",
        "2",
        "--events",
        "3",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut rdr = csv::Reader::from_path(&out).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 1);
    let ratio: f64 = rows[0][5].parse().unwrap();
    assert!(ratio.is_finite() && ratio > 0.0);
}

#[test]
fn verify_subcommand_passes() {
    let o = dynot(&[
        "verify",
        "--instances",
        "6",
        "--events",
        "60",
        "--seed",
        "2",
        "--jobs",
        "2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("verified 6 instances, 360 events"));
}
