use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use longform_core::judge::{ChatRequest, ScriptLine};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn longform(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_longform"))
        .args(args)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .env("RAYON_NUM_THREADS", "1")
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn demo_conf() -> String {
    root().join("demo/demo.conf").display().to_string()
}

fn write_lines(path: &Path, lines: &[String]) {
    std::fs::write(path, lines.join("\n") + "\n").unwrap();
}

#[test]
fn train_zero_steps_writes_manifest_and_initial_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = longform(&["--config", &demo_conf(), "--out", s(&out), "train", "--steps", "0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut files: Vec<_> = walk(&out);
    files.sort();
    assert_eq!(files, ["checkpoints/step_000000.json", "manifest.json"]);
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["status"], "completed");
    assert_eq!(m["steps_completed"], 0);
    assert_eq!(m["started_at"], "2023-11-14T22:13:20Z");
    let ckpt = longform_core::policy::ToyPolicy::load(&out.join("checkpoints/step_000000.json")).unwrap();
    assert_eq!(ckpt.vocab().len(), 20);
}

fn walk(dir: &Path) -> Vec<String> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            for f in walk(&p) {
                out.push(format!("{}/{f}", p.file_name().unwrap().to_str().unwrap()));
            }
        } else {
            out.push(p.file_name().unwrap().to_str().unwrap().to_string());
        }
    }
    out
}

#[test]
fn train_writes_logs_and_periodic_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = longform(&["--config", &demo_conf(), "--out", s(&out), "train", "--steps", "120"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let log = std::fs::read_to_string(out.join("train_log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 120);
    for line in log.lines() {
        let m: longform_core::grpo::StepMetrics = serde_json::from_str(line).unwrap();
        m.validate().unwrap();
    }
    let mut ckpts = walk(&out.join("checkpoints"));
    ckpts.sort();
    assert_eq!(
        ckpts,
        [
            "step_000000.json",
            "step_000050.json",
            "step_000100.json",
            "step_000120.json"
        ]
    );
    let again = longform(&["--config", &demo_conf(), "--out", s(&out), "train", "--steps", "1"]);
    assert_eq!(again.status.code(), Some(1));
    assert!(stderr(&again).contains("--force"));
}

#[test]
fn train_config_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("bad.conf");
    std::fs::write(&conf, "epsilon = 1.5\nprompts = p.jsonl\n").unwrap();
    let out = dir.path().join("run");
    let o = longform(&["--config", s(&conf), "--out", s(&out), "train"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("epsilon"), "{}", stderr(&o));
    assert!(!out.exists());

    let o = longform(&["--config", "/nonexistent/x.conf", "--out", s(&out), "train"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unwritable_output_dir_exits_1_before_sampling() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "not a directory").unwrap();
    let out = blocker.join("run");
    let o = longform(&["--config", &demo_conf(), "--out", s(&out), "train"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("output directory"), "{}", stderr(&o));
}

#[test]
fn rm_train_on_synthetic_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = dir.path().join("pairs.jsonl");
    let o = longform(&["--seed", "5", "synth-pairs", "--n", "1000", "--output", s(&pairs)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let model = dir.path().join("rm.json");
    let o = longform(&["rm-train", "--pairs", s(&pairs), "--model", s(&model)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let acc: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("held-out accuracy: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(acc >= 0.95, "{text}");
    longform_core::rewards::WritingRm::load(&model).unwrap();
}

#[test]
fn rm_train_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("rm.json");
    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    let o = longform(&["rm-train", "--pairs", s(&empty), "--model", s(&model)]);
    assert_eq!(o.status.code(), Some(1));

    let bad = dir.path().join("bad.jsonl");
    write_lines(
        &bad,
        &[
            r#"{"prompt":"p","chosen":"a","rejected":"b"}"#.into(),
            "{not json".into(),
        ],
    );
    let o = longform(&["rm-train", "--pairs", s(&bad), "--model", s(&model)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bad.jsonl:2"), "{}", stderr(&o));

    let dup = dir.path().join("dup.jsonl");
    let line = r#"{"prompt":"p","chosen":"Clear prose. Good flow.","rejected":"bad bad bad"}"#.to_string();
    let other = r#"{"prompt":"q","chosen":"Another fine text here.","rejected":"meh"}"#.to_string();
    write_lines(&dup, &[line.clone(), line.clone(), line, other]);
    let o = longform(&["rm-train", "--pairs", s(&dup), "--model", s(&model), "--held-out", "0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("removed 2 duplicate pair(s)"), "{}", stderr(&o));
}

#[test]
fn score_mixed_lines() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = dir.path().join("in.jsonl");
    let words: Vec<String> = (0..3000).map(|i| format!("w{i}")).collect();
    let essay = format!("<think>plan</think><answer>{}</answer>", words.join(" "));
    write_lines(
        &inputs,
        &[
            serde_json::json!({"prompt": "Write an essay", "text": essay}).to_string(),
            serde_json::json!({"prompt": "Write an essay", "text": "no structure here"}).to_string(),
            "{broken".into(),
        ],
    );
    let o = longform(&["score", "--inputs", s(&inputs), "--lower", "2700", "--upper", "3300"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["length"], 1.0);
    assert_eq!(rows[0]["format"], 1.0);
    assert_eq!(rows[1]["format"], 0.0);
    assert!(rows[2]["error"].is_string());

    let all_bad = dir.path().join("bad.jsonl");
    write_lines(&all_bad, &["{".into(), "[]".into()]);
    let o = longform(&["score", "--inputs", s(&all_bad)]);
    assert_eq!(o.status.code(), Some(1));
}

struct ArenaFixture {
    dir: tempfile::TempDir,
    prompts: PathBuf,
}

impl ArenaFixture {
    /// `wins[b][i]` says whether the candidate beats baseline `b` on prompt `i`.
    fn new(n: usize, baselines: &[&str], wins: impl Fn(usize, usize) -> bool) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let prompts = dir.path().join("prompts.jsonl");
        let text = |m: &str, i: usize| format!("{m} answer to prompt {i}");
        let prompt = |i: usize| format!("Write piece number {i}");
        write_lines(
            &prompts,
            &(0..n)
                .map(|i| serde_json::json!({"id": format!("p{i}"), "prompt": prompt(i)}).to_string())
                .collect::<Vec<_>>(),
        );
        let mut script = Vec::new();
        for m in std::iter::once("cand").chain(baselines.iter().copied()) {
            let lines: Vec<String> = (0..n)
                .map(|i| serde_json::json!({"prompt_id": format!("p{i}"), "model": m, "text": text(m, i)}).to_string())
                .collect();
            write_lines(&dir.path().join(format!("{m}.jsonl")), &lines);
        }
        for (bi, b) in baselines.iter().enumerate() {
            for i in 0..n {
                let (c, o) = (text("cand", i), text(b, i));
                let (fwd, swp) = if wins(bi, i) {
                    ("[[A>B]]", "[[B>>A]]")
                } else {
                    ("[[B>A]]", "[[A>B]]")
                };
                script.push(ScriptLine::reply(&ChatRequest::pairwise(&prompt(i), &c, &o), fwd));
                script.push(ScriptLine::reply(&ChatRequest::pairwise(&prompt(i), &o, &c), swp));
            }
        }
        let lines: Vec<String> = script.iter().map(|l| serde_json::to_string(l).unwrap()).collect();
        write_lines(&dir.path().join("judge.jsonl"), &lines);
        Self { dir, prompts }
    }

    fn path(&self, name: &str) -> String {
        self.dir.path().join(name).display().to_string()
    }

    fn run(&self, out: &str, baselines: &[&str]) -> Output {
        let mut args = vec![
            "--judge".to_string(),
            format!("mock:{}", self.path("judge.jsonl")),
            "--out".into(),
            self.path(out),
            "arena".into(),
            "--prompts".into(),
            self.prompts.display().to_string(),
            "--candidate".into(),
            format!("cand={}", self.path("cand.jsonl")),
        ];
        for b in baselines {
            args.push("--baseline".into());
            args.push(self.path(&format!("{b}.jsonl")));
        }
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        longform(&refs)
    }

    fn json(&self, out: &str, file: &str) -> serde_json::Value {
        serde_json::from_str(&std::fs::read_to_string(self.dir.path().join(out).join(file)).unwrap()).unwrap()
    }
}

#[test]
fn arena_candidate_always_wins() {
    let fx = ArenaFixture::new(6, &["base"], |_, _| true);
    let o = fx.run("out", &["base"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let board = fx.json("out", "leaderboard.json");
    assert_eq!(board[0]["model"], "cand");
    let report = fx.json("out", "report.json");
    assert_eq!(report["overall"]["win_rate"], 1.0);
    assert_eq!(report["failed_judgments"], 0);
    let records = std::fs::read_to_string(fx.dir.path().join("out/records.jsonl")).unwrap();
    assert_eq!(records.lines().count(), 12);

    let again = fx.run("out2", &["base"]);
    assert!(again.status.success());
    for f in ["records.jsonl", "leaderboard.json", "report.json"] {
        let a = std::fs::read(fx.dir.path().join("out").join(f)).unwrap();
        let b = std::fs::read(fx.dir.path().join("out2").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn arena_asymmetric_baselines_give_hundred_point_gaps() {
    // 64% against `low`, 36% against `high`.
    let fx = ArenaFixture::new(100, &["low", "high"], |b, i| if b == 0 { i < 64 } else { i < 36 });
    let o = fx.run("out", &["low", "high"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let board = fx.json("out", "leaderboard.json");
    let elo = |m: &str| {
        board.as_array().unwrap().iter().find(|r| r["model"] == m).unwrap()["elo"]
            .as_f64()
            .unwrap()
    };
    assert!((elo("cand") - elo("low") - 100.0).abs() <= 5.0);
    assert!((elo("high") - elo("cand") - 100.0).abs() <= 5.0);
    assert!(((elo("low") + elo("high")) / 2.0 - 1000.0).abs() < 1e-6);
}

#[test]
fn arena_missing_baseline_file_names_the_model() {
    let fx = ArenaFixture::new(2, &["base"], |_, _| true);
    let o = fx.run("out", &["ghost"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("ghost"), "{}", stderr(&o));
}

#[test]
fn arena_mostly_failing_judge_exits_2() {
    let fx = ArenaFixture::new(4, &["base"], |_, _| true);
    std::fs::write(
        fx.dir.path().join("judge.jsonl"),
        "{\"request_hash\": \"*\", \"error\": \"judge offline\"}\n",
    )
    .unwrap();
    let o = fx.run("out", &["base"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(fx.dir.path().join("out/records.jsonl").exists());
}
