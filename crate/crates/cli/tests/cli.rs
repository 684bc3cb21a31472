use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(rel: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel).display().to_string()
}

fn arena(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arena")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = arena(args);
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    arena(args).status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn elo_prints_a_deterministic_leaderboard() {
    let log = fixture("annotations/protocol.jsonl");
    let args = ["elo", "--log", &log, "--criterion", "OA", "--genre", "Hindustani"];
    let a = ok(&args);
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines[0], "system\tcriterion\tquery_type\traw_elo\tscaled_elo\tmatch_count");
    assert_eq!(lines.len(), 5);
    let counts: u64 = lines[1..].iter().map(|l| l.rsplit('\t').next().unwrap().parse::<u64>().unwrap()).sum();
    assert_eq!(counts, 2 * 135);
    assert_eq!(a, ok(&args));

    let all = ok(&["elo", "--log", &log, "--criterion", "all", "--query-type", "recall", "--amendments", "replace"]);
    assert_eq!(all.lines().count(), 1 + 5 * 4);
}

#[test]
fn iaa_reproduces_the_hand_fixture() {
    let log = fixture("annotations/kappa_pairs.jsonl");
    let d = ok(&["iaa", "--log", &log, "--metric", "distance", "--criterion", "Inst"]);
    assert_eq!(d, "criterion\tmetric\tp_o_mean\tp_e\tkappa\tn_items\nInst\tdistance\t0.611111\t0.601852\t0.023256\t6\n");
    let r = ok(&["iaa", "--log", &log, "--metric", "direction", "--criterion", "Inst"]);
    assert!(r.contains("\t-0.090909\t6"), "{r}");
}

#[test]
fn disparity_rollup() {
    let out = ok(&["disparity", "--datasets", &fixture("census/datasets.jsonl"), "--section", "rollup"]);
    assert!(out.contains("western\t9796.49\t94.44%"), "{out}");
    assert!(out.contains("non_western\t576.39\t5.56%"), "{out}");
    let all = ok(&["disparity", "--datasets", &fixture("census/datasets.jsonl")]);
    assert!(all.starts_with("region\tpapers\thours\tshare\n"));
    assert_eq!(all.matches("\n\n").count(), 3);
}

#[test]
fn split_prompts_schedule_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let split = dir.path().join("split.json");
    let queries = dir.path().join("queries.jsonl");
    let training = dir.path().join("training.jsonl");
    let data = dir.path().join("data");
    let meta = fixture("corpus/hindustani.jsonl");

    let s = ok(&["split", "--metadata", &meta, "--seed", "4", "--out", p(&split)]);
    assert!(s.starts_with("side\tsongs\ttracks\thours\ntrain\t"));
    assert_eq!(s, ok(&["split", "--metadata", &meta, "--seed", "4"]));

    let args = [
        "prompts", "--metadata", &meta, "--split", p(&split), "--foreign", &fixture("prompts/foreign_pools.json"),
        "--recall", "10", "--analysis", "10", "--creativity", "10", "--id-prefix", "hc", "--seed", "2",
        "--out", p(&queries), "--training-out", p(&training),
    ];
    let summary = ok(&args);
    assert!(summary.contains("Recall\t10\n") && summary.contains("Creativity\t10\n"));
    let first = std::fs::read(&queries).unwrap();
    ok(&args);
    assert_eq!(std::fs::read(&queries).unwrap(), first);
    assert!(String::from_utf8(first).unwrap().contains("\"id\":\"hc-recall-001\""));

    let sched = ok(&[
        "schedule", "--data-dir", p(&data), "--queries", p(&queries), "--pairs", "MGB:MTB,MGB:MGF,MTB:MTF,MGF:MTF",
        "--queries-per-type", "3", "--phase", "1", "--annotators-per-match", "2", "--genre", "Hindustani", "--seed", "1",
    ]);
    assert_eq!(sched.lines().count(), 37);
    assert!(sched.lines().nth(1).unwrap().starts_with("m00000\tHindustani\t"));
    let again = ok(&[
        "schedule", "--data-dir", p(&data), "--queries", p(&queries), "--pairs", "MGB:MTB,MGB:MTF,MGF:MTF",
        "--queries-per-type", "7", "--query-offset", "3", "--phase", "2", "--annotators-per-match", "1",
        "--genre", "Hindustani", "--seed", "2",
    ]);
    assert_eq!(again.lines().count(), 64);
    assert!(again.lines().nth(1).unwrap().starts_with("m00036\t"));

    // validation happens before anything is appended
    let bad = code(&[
        "schedule", "--data-dir", p(&data), "--queries", p(&queries), "--pairs", "MGB-MTB",
        "--queries-per-type", "1", "--phase", "1", "--annotators-per-match", "2", "--seed", "1",
    ]);
    assert_eq!(bad, 2);
    let short = code(&[
        "schedule", "--data-dir", p(&data), "--queries", p(&queries), "--pairs", "MGB:MTB",
        "--queries-per-type", "50", "--phase", "1", "--annotators-per-match", "2", "--seed", "1",
    ]);
    assert_eq!(short, 2);
    let matches = std::fs::read_to_string(data.join("matches.jsonl")).unwrap();
    assert_eq!(matches.lines().count(), 99);
}

#[test]
fn metrics_from_delimited_files() {
    let dir = tempfile::tempdir().unwrap();
    let emb = dir.path().join("emb.csv");
    let mut text = String::from("id,a,b,c\n");
    for i in 0..20 {
        let x = i as f64;
        text.push_str(&format!("p{i},{},{},{}\n", x.sin(), (0.3 * x).cos(), 0.01 * x));
    }
    std::fs::write(&emb, text).unwrap();
    let out = ok(&[
        "metrics", "--system", "MGF", "--fad-ref", p(&emb), "--fad-gen", p(&emb), "--logits-ref", p(&emb),
        "--logits-gen", p(&emb), "--features-ref", p(&emb), "--features-gen", p(&emb),
    ]);
    let row: Vec<&str> = out.lines().nth(1).unwrap().split('\t').collect();
    assert_eq!(row[0], "MGF");
    assert!(row[1].parse::<f64>().unwrap().abs() < 1e-6);
    assert_eq!(row[2], "n/a");
    assert_eq!(row[3].parse::<f64>().unwrap(), 0.0);
    assert_eq!(row[4], "inf");
    assert_eq!(code(&["metrics", "--system", "X", "--fad-ref", p(&emb)]), 2);
}

#[test]
fn adapter_training_curve_and_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let (x, y) = (dir.path().join("x.tsv"), dir.path().join("y.tsv"));
    let mut xs = String::from("id\tf0\tf1\tf2\tf3\n");
    let mut ys = xs.clone();
    for i in 0..16 {
        let row: Vec<f64> = (0..4).map(|j| ((i * 4 + j) as f64 * 0.37).sin()).collect();
        xs.push_str(&format!("r{i}\t{}\n", row.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("\t")));
        ys.push_str(&format!("r{i}\t{}\n", row.iter().map(|v| (v + 0.2 * v.tanh()).to_string()).collect::<Vec<_>>().join("\t")));
    }
    std::fs::write(&x, xs).unwrap();
    std::fs::write(&y, ys).unwrap();
    let ckpt = dir.path().join("adapter.emb");
    for precision in ["f64", "f32"] {
        let out = ok(&[
            "adapter-train", "--input", p(&x), "--target", p(&y), "--reduction-factor", "2", "--steps", "20",
            "--lr", "0.003", "--seed", "3", "--precision", precision, "--checkpoint", p(&ckpt),
        ]);
        let losses: Vec<f64> = out.lines().skip(1).map(|l| l.split('\t').nth(1).unwrap().parse().unwrap()).collect();
        assert_eq!(losses.len(), 20);
        assert!(losses.windows(2).all(|w| w[1] < w[0]), "{precision}: {losses:?}");
    }
    assert!(ckpt.exists());
    assert!(dir.path().join("adapter.emb.index.json").exists());
    assert_eq!(code(&["adapter-train", "--input", p(&x), "--target", p(&y), "--steps", "5"]), 2, "seed is mandatory");
}

#[test]
fn exit_codes() {
    let log = fixture("annotations/protocol.jsonl");
    assert_eq!(code(&["elo", "--log", &log, "--criterion", "XX"]), 2);
    assert_eq!(code(&["elo", "--log", &log, "--criterion", "OA", "--k-factor", "-1"]), 2);
    assert_eq!(code(&["elo", "--log", "/nonexistent/log.jsonl", "--criterion", "OA"]), 2);
    assert_eq!(code(&["elo", "--log", &log, "--criterion", "OA", "--bogus"]), 2);
    assert_eq!(code(&["nonsense"]), 2);
    assert_eq!(code(&["split", "--metadata", &fixture("corpus/makam.jsonl")]), 2);
    assert_eq!(code(&["split", "--metadata", &log, "--seed", "1"]), 2, "not track metadata");
    assert_eq!(code(&["iaa", "--log", &fixture("annotations/protocol.jsonl"), "--metric", "distance", "--genre", "Jazz"]), 2);
    assert_eq!(code(&["--version"]), 0);
}

#[test]
fn every_subcommand_documents_its_flags() {
    let subcommands = [
        ("ingest", &["--metadata", "--out", "--audio-root", "--out-audio", "--max-seconds", "--sample-rate"][..]),
        ("split", &["--metadata", "--test-fraction", "--seed", "--out"]),
        ("prompts", &["--metadata", "--split", "--templates", "--foreign", "--recall", "--analysis", "--creativity", "--seed", "--out"]),
        ("schedule", &["--data-dir", "--queries", "--pairs", "--queries-per-type", "--query-offset", "--phase", "--seed"]),
        ("serve", &["--data-dir", "--host", "--port", "--ui-dir"]),
        ("elo", &["--log", "--criterion", "--query-type", "--genre", "--amendments", "--k-factor", "--initial-rating"]),
        ("iaa", &["--log", "--metric", "--criterion", "--genre"]),
        ("metrics", &["--system", "--fad-ref", "--fd-gen", "--logits-ref", "--features-gen", "--peak", "--kl-eps"]),
        ("disparity", &["--datasets", "--section"]),
        ("adapter-train", &["--input", "--target", "--variant", "--reduction-factor", "--steps", "--lr", "--weight-decay", "--max-grad-norm", "--seed", "--checkpoint"]),
    ];
    for (cmd, flags) in subcommands {
        let help = ok(&[cmd, "--help"]);
        for f in flags {
            assert!(help.contains(f), "{cmd} --help lacks {f}");
        }
    }
}
