use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

use treelearn::brute::{bf_search, Budget};
use treelearn::exec::Exec;
use treelearn::mso::{compile_param_formula, symbols_for, CompileOptions, ParamFormula};
use treelearn::tree::{parse_tree, ArityMode, TrainingSet};

const FIG1: &str = "(a (a (a) (a (a (a) (a)) (a (a) (a) (a))) (a (a))) (a (a) (a (a))))";
const FIG1_S: &str = "13 -\n2 +\n15 -\n7 -\n5 +\n8 +\n";
const PHI1: &str = "(and (exists z (and (or (E x z) (E z x)) (or (E z y) (E y z)))) (not (= x y)))";

struct Dir(PathBuf);

impl Dir {
    fn new(name: &str) -> Dir {
        let d = std::env::temp_dir().join(format!("treelearn-cli-{}-{name}", std::process::id()));
        fs::create_dir_all(&d).unwrap();
        Dir(d)
    }

    fn file(&self, name: &str, text: &str) -> String {
        let p = self.0.join(name);
        fs::write(&p, text).unwrap();
        p.to_str().unwrap().to_string()
    }

    fn path(&self, name: &str) -> String {
        self.0.join(name).to_str().unwrap().to_string()
    }

    fn run(&self, args: &[&str], stdin: &str) -> Output {
        let mut child = Command::new(env!("CARGO_BIN_EXE_treelearn"))
            .args(args)
            .env("TREELEARN_STATS", self.0.join("stats.jsonl"))
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .unwrap();
        child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
        child.wait_with_output().unwrap()
    }
}

impl Drop for Dir {
    fn drop(&mut self) {
        let _ = fs::remove_dir_all(&self.0);
    }
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn fig1(d: &Dir) -> (String, String, String) {
    (d.file("t.txt", FIG1), d.file("f.txt", PHI1), d.file("s.txt", FIG1_S))
}

#[test]
fn check_fig1() {
    let d = Dir::new("check");
    let (t, f, s) = fig1(&d);
    let o = d.run(&["check", "--tree", &t, "--formula", &f, "--train", &s, "--params", "3", "--unranked"], "");
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "CONSISTENT\n");
    let o = d.run(&["check", "--tree", &t, "--formula", &f, "--train", &s, "--params", "0", "--unranked"], "");
    assert_eq!(o.status.code(), Some(1));
    let o = d.run(&["check", "--tree", &t, "--formula", &f, "--train", &s, "--params", "3,4", "--unranked"], "");
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn learn_exit_codes() {
    let d = Dir::new("learn");
    let (t, f, s) = fig1(&d);
    let empty = d.file("empty.txt", "");
    let o = d.run(&["learn", "--tree", &t, "--formula", &f, "--train", &empty, "--unranked"], "");
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("CONSISTENT "));

    let o = d.run(&["learn", "--tree", &t, "--formula", &f, "--train", &s, "--unranked"], "");
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "CONSISTENT 3\n");

    let bad_text = "0 +\n1 +\n";
    let bad = d.file("bad.txt", bad_text);
    let o = d.run(&["learn", "--tree", &t, "--formula", &f, "--train", &bad, "--unranked"], "");
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stdout(&o), "NO-CONSISTENT-PARAMS\n");

    let tree = parse_tree(FIG1, ArityMode::Unranked).unwrap();
    let phi = ParamFormula::parse(PHI1).unwrap();
    let aut = compile_param_formula(&phi, &symbols_for(&tree, &phi.body), &CompileOptions::new(ArityMode::Unranked)).unwrap();
    let sb = TrainingSet::parse(bad_text, tree.len()).unwrap();
    assert_eq!(bf_search(&tree, &aut, &sb, Exec::Sequential, Budget::default()).unwrap(), None);
}

#[test]
fn saved_index_is_reused() {
    let d = Dir::new("index");
    let (t, f, s) = fig1(&d);
    let ix = d.path("ix.bin");
    let o = d.run(&["index", "--tree", &t, "--formula", &f, "--unranked", "--out", &ix], "");
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("monoid "));
    let o = d.run(&["learn", "--tree", &t, "--formula", &f, "--train", &s, "--unranked", "--index", &ix], "");
    assert_eq!(stdout(&o), "CONSISTENT 3\n");

    let other = d.file("g.txt", "(le y x)");
    let o = d.run(&["learn", "--tree", &t, "--formula", &other, "--train", &s, "--unranked", "--index", &ix], "");
    assert_eq!(o.status.code(), Some(2));
    let junk = d.file("junk.bin", "junk");
    let o = d.run(&["learn", "--tree", &t, "--formula", &f, "--train", &s, "--unranked", "--index", &junk], "");
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("junk.bin"));
}

#[test]
fn parse_errors_name_file_and_offset() {
    let d = Dir::new("errors");
    let (_, f, s) = fig1(&d);
    let broken = d.file("broken.txt", "(a (a");
    let o = d.run(&["learn", "--tree", &broken, "--formula", &f, "--train", &s], "");
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr).to_string();
    assert!(err.contains("broken.txt") && err.contains("byte 5"), "{err}");

    let t = d.file("t.txt", FIG1);
    let bad_train = d.file("train.txt", "2 +\n2 -\n");
    let o = d.run(&["learn", "--tree", &t, "--formula", &f, "--train", &bad_train, "--unranked"], "");
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("train.txt"));

    let o = d.run(&["learn", "--tree", &d.path("missing.txt"), "--formula", &f, "--train", &s], "");
    assert_eq!(o.status.code(), Some(2));
    let o = d.run(&["frobnicate"], "");
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn learn_qf_is_deterministic() {
    let d = Dir::new("qf");
    let (t, _, s) = fig1(&d);
    let a = d.run(&["learn-qf", "--tree", &t, "--train", &s, "--ell", "1", "--unranked"], "");
    let b = d.run(&["learn-qf", "--tree", &t, "--train", &s, "--ell", "1", "--unranked", "--sequential"], "");
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let lines: Vec<String> = stdout(&a).lines().map(String::from).collect();
    assert!(lines[0].starts_with("(lambda (x y1 y2)"));
    assert!(lines[1].starts_with("PARAMS "));
    let o = d.run(&["learn-qf", "--tree", &t, "--train", &s, "--ell", "0", "--unranked"], "");
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stdout(&o), "NO-CONSISTENT-HYPOTHESIS\n");

    let stats = d.run(&["stats"], "");
    let line: serde_json::Value = serde_json::from_str(stdout(&stats).trim()).unwrap();
    assert_eq!(line["command"], "learn-qf");
    assert!(line["oracle_total"].as_u64().unwrap() > 0);
}

#[test]
fn lemma3_fixture_roundtrip() {
    let d = Dir::new("lemma3");
    let t = d.path("t.txt");
    let s = d.path("s.txt");
    let o = d.run(&["gen-lemma3", "--m", "20", "--ell", "1", "--tree-out", &t, "--train-out", &s], "");
    assert_eq!(o.status.code(), Some(0));
    let o = d.run(&["learn-qf", "--tree", &t, "--train", &s, "--ell", "1"], "");
    assert_eq!(o.status.code(), Some(0));
    let o = d.run(&["gen-lemma3", "--m", "3", "--ell", "0"], "");
    let text = stdout(&o);
    assert!(text.starts_with("(a "));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn online_stream() {
    let d = Dir::new("online");
    let (t, f, _) = fig1(&d);
    let o = d.run(&["online", "--tree", &t, "--formula", &f, "--unranked"], "13 -\n2 +\n\nrelabel 4 a\n15 -\n7 -\n5 +\n8 +\n");
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 7);
    assert_eq!(out.lines().last(), Some("CONSISTENT 3"));
    let stats = d.run(&["stats"], "");
    assert_eq!(stdout(&stats).lines().count(), 8);

    let o = d.run(&["online", "--tree", &t, "--formula", &f, "--unranked"], "0 +\n1 +\n");
    assert_eq!(stdout(&o).lines().last(), Some("NOT-REALIZABLE"));
    let o = d.run(&["online", "--tree", &t, "--formula", &f, "--unranked"], "2 +\nrelabel 2 q\n");
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}
