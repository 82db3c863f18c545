use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use emoprobe::checkpoint::load_checkpoint;
use emoprobe::manifest::sha256_file;
use emoprobe_core::metrics::MetricKind;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emoprobe"))
        .args(args)
        .env_remove("EMOPROBE_OUT")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert_eq!(code(&out), 0, "emoprobe {args:?}: {}", stderr(&out));
    out
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn p(&self, rel: &str) -> String {
        s(&self.path(rel))
    }

    fn synth(&self, rel: &str, extra: &[&str]) {
        let out = self.p(rel);
        let mut args = vec![
            "synth",
            "--seed",
            "7",
            "--per-category",
            "30",
            "--out",
            &out,
        ];
        args.extend_from_slice(extra);
        ok(&args);
    }

    fn train(&self, data: &str, out: &str) {
        ok(&[
            "train",
            "--corpus",
            &self.p(&format!("{data}/corpus.jsonl")),
            "--embeddings",
            &self.p(data),
            "--seed",
            "7",
            "--out",
            &self.p(out),
        ]);
    }

    fn evaluate(&self, ckpt: &str, data: &str, out: &str, extra: &[&str]) -> Output {
        let (ckpt, corpus, emb, out) = (
            self.p(ckpt),
            self.p(&format!("{data}/corpus.jsonl")),
            self.p(data),
            self.p(out),
        );
        let mut args = vec![
            "evaluate",
            "--checkpoint",
            &ckpt,
            "--corpus",
            &corpus,
            "--embeddings",
            &emb,
            "--out",
            &out,
        ];
        args.extend_from_slice(extra);
        run(&args)
    }

    fn validate(&self, data: &str) -> Output {
        run(&[
            "validate",
            "--corpus",
            &self.p(&format!("{data}/corpus.jsonl")),
            "--embeddings",
            &self.p(data),
        ])
    }
}

fn file_names(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

#[test]
fn synth_writes_the_expected_files() {
    let ws = Workspace::new();
    ok(&[
        "synth",
        "--categories",
        "3",
        "--per-category",
        "100",
        "--dim",
        "16",
        "--seed",
        "7",
        "--out",
        &ws.p("d"),
    ]);
    assert_eq!(
        file_names(&ws.path("d")),
        [
            "categories.json",
            "corpus.jsonl",
            "events.embd",
            "events.ids",
            "labels.embd",
            "labels.ids",
            "model_tag.txt",
            "run.json"
        ]
    );
    assert_eq!(
        std::fs::metadata(ws.path("d/events.embd")).unwrap().len(),
        24 + 300 * 16 * 4
    );
    assert_eq!(
        std::fs::metadata(ws.path("d/labels.embd")).unwrap().len(),
        24 + 3 * 16 * 4
    );
    let corpus = std::fs::read_to_string(ws.path("d/corpus.jsonl")).unwrap();
    assert_eq!(corpus.lines().count(), 300);
}

#[test]
fn synth_is_deterministic() {
    let ws = Workspace::new();
    ws.synth("a", &[]);
    ws.synth("b", &[]);
    for name in file_names(&ws.path("a")) {
        if name == "run.json" {
            continue;
        }
        assert_eq!(
            sha256_file(&ws.path("a").join(&name)).unwrap(),
            sha256_file(&ws.path("b").join(&name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn usage_errors_exit_2() {
    let ws = Workspace::new();
    let out = run(&[
        "synth",
        "--seed",
        "1",
        "--per-category",
        "0",
        "--out",
        &ws.p("x"),
    ]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("events_per_category"));

    let out = run(&["synth", "--per-category", "5", "--out", &ws.p("x")]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--seed"));

    ws.synth("d", &[]);
    let out = run(&[
        "train",
        "--corpus",
        &ws.p("d/corpus.jsonl"),
        "--embeddings",
        &ws.p("d"),
        "--out",
        &ws.p("c"),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--seed"));

    let out = run(&[
        "train",
        "--corpus",
        &ws.p("d/corpus.jsonl"),
        "--embeddings",
        &ws.p("d"),
        "--seed",
        "1",
        "--temperature",
        "0",
        "--out",
        &ws.p("c"),
    ]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));

    let out = run(&[
        "summary",
        "--corpus",
        &ws.p("d/corpus.jsonl"),
        "--format",
        "xlsx",
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("xlsx"));

    let out = run(&["frobnicate"]);
    assert_eq!(code(&out), 2);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn out_falls_back_to_the_environment() {
    let ws = Workspace::new();
    let out = Command::new(env!("CARGO_BIN_EXE_emoprobe"))
        .args(["synth", "--seed", "3", "--per-category", "5"])
        .env("EMOPROBE_OUT", ws.path("base"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(ws.path("base/synth/corpus.jsonl").exists());

    let out = run(&["synth", "--seed", "3", "--per-category", "5"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("EMOPROBE_OUT"));
}

#[test]
fn train_then_load_checkpoint() {
    let ws = Workspace::new();
    ws.synth("d", &[]);
    ws.train("d", "ckpt");
    let probe = load_checkpoint(&ws.path("ckpt")).unwrap();
    assert_eq!(probe.parameters.input_dim(), 16);
    assert_eq!(probe.parameters.projection_dim(), 16);
    assert_eq!(probe.config.seed, 7);
    assert_eq!(probe.model_tag, "synthetic-gaussian-seed7");
    assert!(probe.selected_valid_loss() < probe.initial_valid_loss);
    assert!(ws.path("ckpt/run.json").exists());
}

#[test]
fn missing_embedding_file_exits_3_and_names_it() {
    let ws = Workspace::new();
    ws.synth("d", &[]);
    std::fs::remove_file(ws.path("d/events.embd")).unwrap();
    let out = run(&[
        "train",
        "--corpus",
        &ws.p("d/corpus.jsonl"),
        "--embeddings",
        &ws.p("d"),
        "--seed",
        "1",
        "--out",
        &ws.p("c"),
    ]);
    assert_eq!(code(&out), 3);
    assert!(
        stderr(&out).contains(&ws.p("d/events.embd")),
        "{}",
        stderr(&out)
    );
    assert_eq!(code(&ws.validate("d")), 3);
}

#[test]
fn misaligned_training_data_exits_3() {
    let ws = Workspace::new();
    ws.synth("d", &[]);
    let corpus = std::fs::read_to_string(ws.path("d/corpus.jsonl")).unwrap();
    let extra =
        r#"{"id":"e-new","text":"a new event","emotion":"joy","explicit":false,"split":"train"}"#;
    std::fs::write(ws.path("d/corpus.jsonl"), format!("{corpus}{extra}\n")).unwrap();
    let out = run(&[
        "train",
        "--corpus",
        &ws.p("d/corpus.jsonl"),
        "--embeddings",
        &ws.p("d"),
        "--seed",
        "1",
        "--out",
        &ws.p("c"),
    ]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("e-new"), "{}", stderr(&out));
}

#[test]
fn divergence_exits_4() {
    let ws = Workspace::new();
    ws.synth("d", &[]);
    let out = run(&[
        "train",
        "--corpus",
        &ws.p("d/corpus.jsonl"),
        "--embeddings",
        &ws.p("d"),
        "--seed",
        "7",
        "--learning-rate",
        "1e300",
        "--out",
        &ws.p("c"),
    ]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    assert!(stderr(&out).contains("epoch 1"));
}

#[test]
fn corpus_errors_name_the_line() {
    let ws = Workspace::new();
    ws.synth("d", &[]);
    let corpus = std::fs::read_to_string(ws.path("d/corpus.jsonl")).unwrap();
    let first = corpus.lines().next().unwrap();
    std::fs::write(ws.path("d/corpus.jsonl"), format!("{first}\n{first}\n")).unwrap();
    let out = ws.validate("d");
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));
}

#[test]
fn evaluate_is_deterministic_with_default_cutoffs() {
    let ws = Workspace::new();
    ws.synth("d", &["--duplicate-fraction", "0.2"]);
    ws.train("d", "ckpt");
    for out in ["e1", "e2"] {
        let o = ws.evaluate("ckpt", "d", out, &[]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert!(stdout(&o).contains("P@10"));
    }
    for name in ["report.json", "report.tsv", "report.txt", "run.json"] {
        assert_eq!(
            std::fs::read(ws.path("e1").join(name)).unwrap(),
            std::fs::read(ws.path("e2").join(name)).unwrap(),
            "{name}"
        );
    }
    let report =
        emoprobe::render::parse_json(&std::fs::read(ws.path("e1/report.json")).unwrap()).unwrap();
    assert_eq!(report.ks, [3, 10, 50]);
    assert_eq!(report.cells.len(), 3 * 3 * 4);
    assert!(report.checkpoint.starts_with("ckpt@sha256:"));
    assert_eq!(report.timestamp, None);
    let tsv = std::fs::read_to_string(ws.path("e1/report.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 1 + 36 + 12 + 12);
    assert!(tsv.lines().all(|l| l.split('\t').count() == 11));
}

#[test]
fn evaluate_records_a_given_timestamp() {
    let ws = Workspace::new();
    ws.synth("d", &[]);
    ws.train("d", "ckpt");
    let o = ws.evaluate("ckpt", "d", "e", &["--timestamp", "2026-10-18T00:00:00Z"]);
    assert_eq!(code(&o), 0);
    let report =
        emoprobe::render::parse_json(&std::fs::read(ws.path("e/report.json")).unwrap()).unwrap();
    assert_eq!(report.timestamp.as_deref(), Some("2026-10-18T00:00:00Z"));
}

#[test]
fn k_1_on_a_single_event_pool() {
    let ws = Workspace::new();
    ws.synth("d", &[]);
    ws.train("d", "ckpt");
    // Keep one test event; move the rest to train.
    let corpus = std::fs::read_to_string(ws.path("d/corpus.jsonl")).unwrap();
    let mut kept = false;
    let rewritten: String = corpus
        .lines()
        .map(|l| {
            if l.contains(r#""split":"test""#) {
                if kept {
                    return l.replace(r#""split":"test""#, r#""split":"train""#) + "\n";
                }
                kept = true;
            }
            format!("{l}\n")
        })
        .collect();
    std::fs::write(ws.path("d/corpus.jsonl"), rewritten).unwrap();
    let o = ws.evaluate("ckpt", "d", "e", &["--k", "1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report =
        emoprobe::render::parse_json(&std::fs::read(ws.path("e/report.json")).unwrap()).unwrap();
    let mut defined = 0;
    for emotion in &report.emotions {
        let p = report.cell(emotion, 1, MetricKind::Precision).unwrap();
        assert_eq!(p.denominator, 1);
        assert!(p.numerator <= 1);
        defined += usize::from(p.defined);
    }
    assert_eq!(defined, 1, "only the kept event's emotion is measurable");
    assert!(stdout(&o).contains('\u{2020}'));

    let o = ws.evaluate("ckpt", "d", "e", &["--k", "0"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn evaluate_dim_mismatch_names_both_dims() {
    let ws = Workspace::new();
    ws.synth("d16", &[]);
    ws.synth("d8", &["--dim", "8"]);
    ws.train("d16", "ckpt");
    let o = ws.evaluate("ckpt", "d8", "e", &[]);
    assert_eq!(code(&o), 3);
    let err = stderr(&o);
    assert!(err.contains("16") && err.contains('8'), "{err}");
}

#[test]
fn validate_exit_codes() {
    let ws = Workspace::new();
    ws.synth("d", &[]);
    let o = ws.validate("d");
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("aligned"));

    // Drop the last event id and matrix row: the corpus now has a missing event.
    let ids = std::fs::read_to_string(ws.path("d/events.ids")).unwrap();
    let last = ids.lines().last().unwrap().to_string();
    let kept: Vec<&str> = ids.lines().take(ids.lines().count() - 1).collect();
    std::fs::write(ws.path("d/events.ids"), kept.join("\n") + "\n").unwrap();
    let bytes = std::fs::read(ws.path("d/events.embd")).unwrap();
    let mut trimmed = bytes[..bytes.len() - 16 * 4].to_vec();
    let count = u64::from_le_bytes(trimmed[8..16].try_into().unwrap()) - 1;
    trimmed[8..16].copy_from_slice(&count.to_le_bytes());
    std::fs::write(ws.path("d/events.embd"), trimmed).unwrap();
    let o = ws.validate("d");
    assert_eq!(code(&o), 1);
    assert!(
        stdout(&o).contains(&format!("missing events (1): {last}")),
        "{}",
        stdout(&o)
    );

    let ws = Workspace::new();
    ws.synth("d", &[]);
    ws.synth("d8", &["--dim", "8"]);
    for f in ["labels.embd", "labels.ids"] {
        std::fs::copy(ws.path("d8").join(f), ws.path("d").join(f)).unwrap();
    }
    let o = ws.validate("d");
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("dimension mismatch: events 16, labels 8"));
    let o = run(&[
        "validate",
        "--corpus",
        &ws.p("d/corpus.jsonl"),
        "--embeddings",
        &ws.p("d"),
        "--json",
    ]);
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["label_dim"], 8);
}

#[test]
fn merge_reports_across_models() {
    let ws = Workspace::new();
    ws.synth("d", &[]);
    ws.train("d", "ckpt");
    assert_eq!(code(&ws.evaluate("ckpt", "d", "m1", &[])), 0);
    // Same corpus seen through a second model.
    std::fs::write(ws.path("d/model_tag.txt"), "other-model\n").unwrap();
    assert_eq!(code(&ws.evaluate("ckpt", "d", "m2", &[])), 0);
    ok(&[
        "merge",
        "--report",
        &ws.p("m1/report.json"),
        "--report",
        &ws.p("m2/report.json"),
        "--out",
        &ws.p("cmp"),
    ]);
    let tsv = std::fs::read_to_string(ws.path("cmp/comparison.tsv")).unwrap();
    let rows: Vec<&str> = tsv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2 * 3 * 3);
    assert!(rows[0].starts_with("other-model\tangry\t3\t"));
    assert!(rows[9].starts_with("synthetic-gaussian-seed7\tangry\t3\t"));

    let dup = run(&[
        "merge",
        "--report",
        &ws.p("m1/report.json"),
        "--report",
        &ws.p("m1/report.json"),
        "--out",
        &ws.p("x"),
    ]);
    assert_eq!(code(&dup), 3);

    ws.synth("other", &["--dim", "16", "--separation", "5"]);
    assert_eq!(code(&ws.evaluate("ckpt", "other", "m3", &[])), 0);
    let bad = run(&[
        "merge",
        "--report",
        &ws.p("m1/report.json"),
        "--report",
        &ws.p("m3/report.json"),
        "--out",
        &ws.p("x"),
    ]);
    assert_eq!(code(&bad), 3);
    assert!(stderr(&bad).contains("corpus"), "{}", stderr(&bad));
}

#[test]
fn summary_counts() {
    let ws = Workspace::new();
    ws.synth("d", &[]);
    let o = ok(&[
        "summary",
        "--corpus",
        &ws.p("d/corpus.jsonl"),
        "--format",
        "tsv",
    ]);
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "emotion\ttrain\tvalid\ttest\ttotal\texplicit");
    assert!(lines[1].starts_with("joy\t18\t6\t6\t30\t"));
    assert!(lines[4].starts_with("total\t54\t18\t18\t90\t"));
}

#[test]
fn replay_detects_changed_inputs() {
    let ws = Workspace::new();
    ws.synth("d", &[]);
    ws.train("d", "ckpt");
    let o = ok(&[
        "replay",
        "--manifest",
        &ws.p("ckpt/run.json"),
        "--out",
        &ws.p("again"),
    ]);
    assert!(stdout(&o).contains("reproduced all 3 outputs"));
    let o = ok(&[
        "replay",
        "--manifest",
        &ws.p("d/run.json"),
        "--out",
        &ws.p("d2"),
    ]);
    assert!(stdout(&o).contains("reproduced all 7 outputs"));

    std::fs::write(ws.path("d/model_tag.txt"), "edited\n").unwrap();
    let o = run(&[
        "replay",
        "--manifest",
        &ws.p("ckpt/run.json"),
        "--out",
        &ws.p("again2"),
    ]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("model_tag.txt"), "{}", stderr(&o));
}
