mod common;

use std::path::Path;
use std::process::{Command, Output};

use anticipation_cli::checkpoint::save;
use anticipation_core::encoding::parse_corpus;
use anticipation_core::ConstraintSet;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anticipation")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(bin(&[]).status.code(), Some(2));
    assert_eq!(bin(&["train", "--out", "x.json"]).status.code(), Some(2));
    let o = bin(&["train", "--corpus", "/no/such/corpus.txt", "--out", "/tmp/x.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/no/such/corpus.txt"));
}

#[test]
fn zero_epochs_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.txt");
    std::fs::write(&corpus, common::TOY).unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let zero = bin(&["train", "--corpus", p(&corpus), "--epochs", "0", "--out", p(&a)]);
    assert_eq!(zero.status.code(), Some(0), "{}", stderr(&zero));
    assert!(a.exists());
    for out in [&a, &b] {
        let o = bin(&[
            "train", "--corpus", p(&corpus), "--epochs", "2", "--window", "8", "--seed", "5", "--hidden", "8",
            "--batch-size", "2", "--mask-policy", "all", "--out", p(out),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let report = std::fs::read_to_string(dir.path().join("a.json.report.txt")).unwrap();
    assert_eq!(report.lines().filter(|l| !l.starts_with('#')).count(), 2);

    let nll = bin(&["eval", "nll", "--checkpoint", p(&a), "--corpus", p(&corpus), "--window", "8"]);
    assert!(stdout(&nll).starts_with("nll "), "{}", stderr(&nll));
    let bad = bin(&["train", "--corpus", p(&corpus), "--mask-policy", "some", "--out", p(&a)]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn sample_contract() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    let cp = common::random_checkpoint(common::TOY, 3);
    save(&cp, &path).unwrap();
    let run = |extra: &[&str]| {
        let mut args = vec!["sample", "--checkpoint", p(&path), "--length", "12"];
        args.extend_from_slice(extra);
        bin(&args)
    };
    let a = run(&["--seed", "7", "--constraints", "1:D4,9:G4", "--mode", "clamped"]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    let b = run(&["--seed", "7", "--constraints", "1:D4,9:G4", "--mode", "clamped"]);
    assert_eq!(stdout(&a), stdout(&b));
    let line = stdout(&a);
    let corpus = parse_corpus(&line, "s").unwrap();
    assert_eq!(corpus.len(), 1);
    // An untrained model may emit END early; the printed prefix still has
    // to agree with the clamped positions it contains.
    let ids = cp.vocabulary.encode(&corpus.sequences[0]).unwrap();
    let cs = ConstraintSet::parse("1:D4,9:G4", 12, &cp.vocabulary).unwrap();
    for &(pos, id) in cs.pairs() {
        if pos <= ids.len() {
            assert_eq!(ids[pos - 1], id);
        }
    }
    let unknown = run(&["--constraints", "3:H9"]);
    assert_eq!(unknown.status.code(), Some(2));
    assert!(stderr(&unknown).contains("H9"));
    assert_eq!(run(&["--constraints", "0:C4"]).status.code(), Some(2));
}

#[test]
fn eval_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let uni = dir.path().join("u.json");
    save(&common::uniform_checkpoint("A4 B4"), &uni).unwrap();
    let o = bin(&[
        "eval", "oracle", "--checkpoint", p(&uni), "--length", "2", "--constraints", "2:B4", "--alphabet", "A4,B4",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "alpha 0.500000 {A4B4: 0.5000, B4B4: 0.5000}");

    let guard = bin(&["eval", "oracle", "--checkpoint", p(&uni), "--length", "20", "--alphabet", "A4,B4"]);
    assert_eq!(guard.status.code(), Some(3), "{}", stderr(&guard));

    let rnd = dir.path().join("r.json");
    save(&common::random_checkpoint(common::TOY, 4), &rnd).unwrap();
    let ratio_out = dir.path().join("ratio.txt");
    let o = bin(&["eval", "ratio", "--checkpoint", p(&rnd), "--samples", "50", "--out", p(&ratio_out)]);
    assert!(stdout(&o).starts_with("slope 1.000 intercept"), "{}{}", stdout(&o), stderr(&o));

    let o = bin(&["eval", "enforce", "--checkpoint", p(&rnd), "--constraints", "2:E4,5:__", "--mode", "clamped", "--samples", "100"]);
    assert!(stdout(&o).starts_with("enforcement 1.000"), "{}", stderr(&o));

    let trace_out = dir.path().join("trace.txt");
    let o = bin(&[
        "eval", "trace", "--checkpoint", p(&rnd), "--constraints", "3:G4", "--length", "6", "--sequence",
        "C4 D4 G4 __ E4 C4", "--out", p(&trace_out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let trace = std::fs::read_to_string(&trace_out).unwrap();
    assert_eq!(trace.lines().filter(|l| !l.starts_with('#')).count(), 6);

    for (kind, input) in [("trace", &trace_out), ("ratio", &ratio_out)] {
        let svg = dir.path().join(format!("{kind}.svg"));
        let o = bin(&["plot", "--kind", kind, "--input", p(input), "--out", p(&svg)]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
    }
}

#[test]
fn synth_writes_a_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.txt");
    let o = bin(&["synth", "--chain", "three-symbol", "--count", "10", "--length", "6", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let corpus = parse_corpus(&std::fs::read_to_string(&out).unwrap(), "s").unwrap();
    assert_eq!(corpus.len(), 10);
}
