use std::path::Path;
use std::process::{Command, Output};

fn kdmr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kdmr")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_build_search_verify() {
    let dir = tempfile::tempdir().unwrap();
    let boxes = dir.path().join("boxes.csv");
    let tree = dir.path().join("tree.jsonl");
    let results = dir.path().join("results.csv");
    assert!(kdmr(&["gen", "--squares", "4", "--out", s(&boxes)]).status.success());
    let out = kdmr(&["build", "--in", s(&boxes), "--workers", "2", "--cutoff-depth", "1", "--out", s(&tree)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&tree).unwrap().lines().count(), 64);
    let out = kdmr(&[
        "search", "--tree", s(&tree), "--queries", s(&boxes), "--workers", "2", "--out", s(&results),
        "--verify", "--squares", "4",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let lines = std::fs::read_to_string(&results).unwrap();
    assert_eq!(lines.lines().count(), 1 + 36);

    let wrong = kdmr(&[
        "search", "--tree", s(&tree), "--queries", s(&boxes), "--out", s(&results), "--verify", "--squares", "5",
    ]);
    assert_eq!(wrong.status.code(), Some(1));
}

#[test]
fn bench_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bench.csv");
    let out = kdmr(&[
        "bench", "build", "--min-exp", "6", "--max-exp", "8", "--repeats", "1", "--cutoff-depth", "0", "--out", s(&csv),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = kdmr(&["fit", "nlogn", "--in", s(&csv)]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("nlogn,m,") && text.contains("r,"), "{text}");
}

#[test]
fn bad_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "name,xmin,ymin,xmax,ymax\n1,5,0,2,1\n").unwrap();
    let out = kdmr(&["build", "--in", s(&bad), "--out", s(&dir.path().join("t.jsonl"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
    assert_eq!(kdmr(&["build", "--in", "/nonexistent.csv", "--out", "/tmp/x"]).status.code(), Some(2));
    assert_eq!(kdmr(&["gen", "--squares", "0", "--out", s(&bad)]).status.code(), Some(2));
}
