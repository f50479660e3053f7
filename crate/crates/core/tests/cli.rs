use std::fs;
use std::process::{Command, Output};

use btrl::experiment::CSV_HEADER;
use btrl::maze::Maze;

fn btrl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_btrl")).args(args).output().expect("spawn btrl")
}

const SMALL_RUN: &[&str] = &["run", "--mazes", "6", "--size", "6x5", "--episodes", "8", "--seed", "3"];

#[test]
fn run_writes_curves_for_every_method() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("curves.csv");
    let o = btrl(&[SMALL_RUN, &["--out", out.to_str().unwrap()]].concat());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3 * 8);
    let methods: Vec<&str> = rows.iter().map(|r| r[0]).collect();
    assert_eq!(&methods[..8], &["no-prior"; 8]);
    assert_eq!(&methods[8..16], &["1-prior"; 8]);
    assert_eq!(&methods[16..], &["1-2-prior"; 8]);
    assert!(rows.iter().all(|r| r[4] == "6"));
}

#[test]
fn stdout_and_sequential_match_parallel_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("curves.csv");
    assert!(btrl(&[SMALL_RUN, &["--out", out.to_str().unwrap()]].concat()).status.success());
    let seq = btrl(&[SMALL_RUN, &["--sequential"]].concat());
    assert!(seq.status.success());
    assert_eq!(seq.stdout, fs::read(&out).unwrap());
}

#[test]
fn method_selection_and_g_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.txt");
    let o = btrl(&[SMALL_RUN, &["--method", "1-2-prior", "--g-out", g.to_str().unwrap()]].concat());
    assert!(o.status.success());
    let csv = String::from_utf8(o.stdout).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.starts_with("1-2-prior,")));
    let g_text = fs::read_to_string(&g).unwrap();
    assert_eq!(g_text.lines().count(), 4);
    assert!(g_text.contains('0'), "a few mazes should reveal undo pairs: {g_text}");

    let o = btrl(&[SMALL_RUN, &["--method", "1-2-prior", "--g-in", g.to_str().unwrap()]].concat());
    assert!(o.status.success());
    assert!(!btrl(&[SMALL_RUN, &["--method", "no-prior", "--g-out", g.to_str().unwrap()]].concat()).status.success());
}

#[test]
fn maze_generate_then_check() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("maze.txt");
    let o = btrl(&["maze", "generate", "--size", "7x5", "--seed", "12", "--out", path.to_str().unwrap()]);
    assert!(o.status.success());
    let maze = Maze::parse(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!((maze.width(), maze.height()), (7, 5));

    let o = btrl(&["maze", "check", path.to_str().unwrap()]);
    assert!(o.status.success());
    let report = String::from_utf8(o.stdout).unwrap();
    assert!(report.contains("size: 7x5"));
    assert!(report.contains(&format!("longest optimal path: {}", maze.longest_optimal_path())));
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "S#\n#G\n").unwrap();
    assert!(!btrl(&["maze", "check", bad.to_str().unwrap()]).status.success());
    assert!(!btrl(&["maze", "check", dir.path().join("missing").to_str().unwrap()]).status.success());
    assert!(!btrl(&["run", "--method", "2-prior"]).status.success());
    assert!(!btrl(&["run", "--size", "10by10"]).status.success());
    assert!(!btrl(&["run", "--beta", "-1", "--mazes", "1"]).status.success());
    assert!(!btrl(&["run", "--mazes", "0"]).status.success());
}
