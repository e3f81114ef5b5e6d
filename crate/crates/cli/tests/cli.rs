use std::path::Path;
use std::process::{Command, Output};

const TOY: [&str; 22] = [
    "--set", "synth.users=120",
    "--set", "synth.source_items=80",
    "--set", "synth.target_items=80",
    "--set", "synth.k_true=3",
    "--set", "synth.overlap=0.5",
    "--set", "synth.density=0.075",
    "--set", "filter.min_overlap=2",
    "--set", "filter.min_other=1",
    "--set", "embed.dim=4",
    "--set", "embed.epochs=5",
    "--set", "eval.negatives=40",
];

fn cdrec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cdrec"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn with_toy<'a>(head: &[&'a str]) -> Vec<&'a str> {
    head.iter().copied().chain(TOY).collect()
}

#[test]
fn exit_codes_follow_error_class() {
    assert_eq!(cdrec(&["run", "--method", "WARP"]).status.code(), Some(2));
    assert_eq!(cdrec(&["run", "--set", "embed.dimension=3"]).status.code(), Some(2));
    assert_eq!(cdrec(&["run", "--method", "SSCDR", "--hops", "0"]).status.code(), Some(2));
    assert_eq!(
        cdrec(&["run", "--set", "data.scenario=/definitely/not/here"]).status.code(),
        Some(3)
    );
    // 0.01 of 80 items rounds to one interaction per user
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().display().to_string();
    let mut args = with_toy(&["gen-synth", "--out", &out_dir]);
    args.extend(["--set", "synth.density=0.01"]);
    assert_eq!(cdrec(&args).status.code(), Some(3));
}

#[test]
fn stages_reproduce_end_to_end_run() {
    let dir = tempfile::tempdir().unwrap();
    let p = |s: &str| dir.path().join(s).display().to_string();
    let (run, stages) = (p("run"), p("stages"));

    let out = cdrec(&with_toy(&["run", "--method", "SSCDR-naive", "--out", &run]));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("SSCDR-naive"));

    for cmd in ["train-embed", "train-map", "eval", "export-vectors"] {
        let out = cdrec(&with_toy(&[cmd, "--method", "SSCDR-naive", "--out", &stages]));
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["source.emb", "target.emb", "mapping.txt", "report.tsv", "inferred.emb"] {
        assert!(Path::new(&stages).join(f).is_file(), "{f}");
    }
    let header = std::fs::read_to_string(Path::new(&stages).join("inferred.emb")).unwrap();
    assert!(header.lines().next().unwrap().ends_with("kind inferred"));
}

#[test]
fn itempop_has_nothing_to_train() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().display().to_string();
    let out = cdrec(&with_toy(&["train-embed", "--method", "ITEMPOP", "--out", &out_dir]));
    assert_eq!(out.status.code(), Some(2));
}
