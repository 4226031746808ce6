use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use semiparse::corpus::{read_conll_file, write_conll_file, Format, Sentence};
use semiparse::synth::Domain;

const SUBCOMMANDS: [&str; 9] = [
    "train",
    "parse",
    "confidence",
    "tune-d",
    "extract-dlm",
    "select",
    "pipeline",
    "eval",
    "analyze",
];

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semiparse")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn corpus(dir: &Path, name: &str, seed: u64, n: usize) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let path = dir.join(name);
    write_conll_file(&path, &Domain::source().corpus(&mut rng, n), Format::Conll06).unwrap();
    path
}

fn trained(dir: &Path) -> (PathBuf, PathBuf) {
    let train = corpus(dir, "train.conll", 1, 40);
    let model = dir.join("model.bin");
    ok(&["train", "--train", p(&train), "--model", p(&model), "--beam", "4", "--iterations", "3", "-q"]);
    (train, model)
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["bogus"]).status.code(), Some(2));
    assert_eq!(run(&["parse", "--no-such-flag"]).status.code(), Some(2));
    let out = run(&["parse", "--model", "/nonexistent/m", "--input", "/nonexistent/i", "--output", "/tmp/o", "-q"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn help_matches_snapshots() {
    let snapshot = |name: &str| std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/snapshots").join(name)).unwrap();
    assert_eq!(String::from_utf8(ok(&["--help"]).stdout).unwrap(), snapshot("help.txt"));
    for c in SUBCOMMANDS {
        let help = String::from_utf8(ok(&[c, "--help"]).stdout).unwrap();
        assert_eq!(help, snapshot(&format!("help-{c}.txt")), "{c} --help changed");
    }
}

#[test]
fn help_lists_defaults() {
    let help = |c: &str| String::from_utf8(ok(&[c, "--help"]).stdout).unwrap();
    for (c, defaults) in [
        ("train", &["[default: arc-standard-swap]", "[default: 40]", "[default: 25]", "[default: 22]"][..]),
        ("confidence", &["[default: 0.015]"][..]),
        ("extract-dlm", &["[default: 1]", "[default: 3]", "[default: form]"][..]),
        ("select", &["[default: confidence]", "[default: adjusted]", "[default: 0.5]", "[default: 0]"][..]),
        ("eval", &["[default: 10000]", "[default: 0]"][..]),
        ("analyze", &["[default: length]", "[default: IN]", "[default: CC]"][..]),
    ] {
        let text = help(c);
        for d in defaults {
            assert!(text.contains(d), "{c} --help lacks {d}");
        }
    }
}

#[test]
fn parse_writes_trees_and_score_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let (_, model) = trained(dir.path());
    let input = corpus(dir.path(), "test.conll", 2, 15);
    let (output, scores) = (dir.path().join("out.conll"), dir.path().join("scores.tsv"));
    ok(&["parse", "--model", p(&model), "--input", p(&input), "--output", p(&output), "--scores", p(&scores), "--beam", "4", "-q"]);
    let parsed: Vec<Sentence> = read_conll_file(&output, Format::Conll06).unwrap();
    assert_eq!(parsed.len(), 15);
    assert!(parsed.iter().all(|s| s.validate_tree().is_ok()));
    let lines: Vec<String> = std::fs::read_to_string(&scores).unwrap().lines().map(str::to_owned).collect();
    assert_eq!(lines.len(), 15);
    for (i, line) in lines.iter().enumerate() {
        let (idx, score) = line.split_once('\t').unwrap();
        assert_eq!(idx, i.to_string());
        assert!(score.parse::<f64>().unwrap().is_finite());
    }
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let (_, model) = trained(dir.path());
    let input = corpus(dir.path(), "test.conll", 3, 20);
    let outputs: Vec<(Vec<u8>, Vec<u8>)> = ["1", "3"]
        .iter()
        .map(|w| {
            let parsed = dir.path().join(format!("parsed-{w}.conll"));
            let conf = dir.path().join(format!("conf-{w}.tsv"));
            ok(&[
                "--workers", w, "confidence", "--model", p(&model), "--input", p(&input), "--output", p(&conf),
                "--parsed", p(&parsed), "--beam", "4", "--delta", "-q",
            ]);
            (std::fs::read(parsed).unwrap(), std::fs::read(conf).unwrap())
        })
        .collect();
    assert!(outputs[0] == outputs[1]);
}

#[test]
fn eval_prints_scores() {
    let dir = tempfile::tempdir().unwrap();
    let gold = corpus(dir.path(), "gold.conll", 4, 10);
    let out = ok(&["eval", "--gold", p(&gold), "--pred", p(&gold), "-q"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("LAS"), "{text}");
    assert!(text.contains("100.00") || text.contains("1.0000"), "{text}");
}
