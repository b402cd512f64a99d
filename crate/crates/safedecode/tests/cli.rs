use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_safedecode"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn digest(path: &Path) -> Vec<u8> {
    Sha256::digest(fs::read(path).unwrap()).to_vec()
}

const WORDS: &[&str] = &[
    "river", "stone", "lamp", "quiet", "orange", "window", "falls", "under", "bright", "paper", "moves", "slowly",
    "copper", "garden", "whistle", "meadow", "candle", "harbor", "velvet", "thunder", "pocket", "silver", "basket",
    "forest", "marble", "ladder", "breeze", "tunnel", "violet", "anchor",
];

/// A small experiment directory: corpus, unsafe examples, prompts and a config.
fn workspace(store_lines: &[String], extra: &str) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    let mut state = 7u64;
    let mut next = || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (state >> 33) as usize
    };
    let docs: Vec<String> = (0..40)
        .map(|_| {
            (0..10)
                .map(|_| WORDS[next() % WORDS.len()])
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    fs::write(dir.path().join("corpus.txt"), docs.join("\n")).unwrap();
    fs::write(dir.path().join("unsafe.txt"), store_lines.join("\n")).unwrap();
    let prompts: String = docs[..3]
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let w: Vec<&str> = d.split(' ').collect();
            format!(
                "{{\"id\":\"p{i}\",\"prompt\":\"{}\",\"reference\":\"{}\"}}\n",
                w[..2].join(" "),
                w[2..].join(" ")
            )
        })
        .collect();
    fs::write(dir.path().join("prompts.jsonl"), prompts).unwrap();
    fs::write(
        dir.path().join("run.toml"),
        format!(
            "corpus = \"corpus.txt\"\nstore = \"store.jsonl\"\nprompts = \"prompts.jsonl\"\noutput = \"report.json\"\n\
             table = \"table.txt\"\nrepeats = 2\nstrategies = [\"step1\", \"stepN:5\", \"expo2\", \"contextwise\"]\n{extra}"
        ),
    )
    .unwrap();
    let out = run(dir.path(), &["build-store", "unsafe.txt", "store.jsonl"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    dir
}

fn adversarial() -> TempDir {
    // Unsafe examples are the corpus' own favourite phrases.
    let lines = [
        "river stone lamp quiet",
        "orange window falls under",
        "bright paper moves slowly",
    ]
    .map(String::from);
    workspace(&lines, "[decode]\nmax_tokens = 20\n")
}

fn report(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

fn texts(report: &Value) -> Vec<Value> {
    report["reports"][0]["prompts"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|p| p["runs"].as_array().unwrap().iter().map(|r| r["texts"].clone()))
        .collect()
}

#[test]
fn build_store_counts_lines_and_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let corpus: String = (0..100).map(|i| format!("unsafe example {i}\n")).collect();
    fs::write(dir.path().join("c.txt"), corpus).unwrap();
    let out = run(dir.path(), &["build-store", "c.txt", "a.jsonl"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("wrote 100 examples"));
    let store = safedecode::store_file::load_store(&dir.path().join("a.jsonl")).unwrap();
    assert_eq!(store.len(), 100);
    assert!(run(dir.path(), &["build-store", "c.txt", "b.jsonl"]).status.success());
    assert_eq!(digest(&dir.path().join("a.jsonl")), digest(&dir.path().join("b.jsonl")));
}

#[test]
fn build_store_rejects_empty_and_missing_corpora() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("empty.txt"), "\n \n").unwrap();
    let out = run(dir.path(), &["build-store", "empty.txt", "s.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("s.jsonl").exists());
    let out = run(dir.path(), &["build-store", "missing.txt", "s.jsonl"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.txt"));
}

#[test]
fn generate_is_byte_reproducible() {
    let dir = adversarial();
    for sampler in ["beam", "topk", "greedy"] {
        let args = ["generate", "run.toml", "--sampler", sampler];
        let a = run(dir.path(), &args);
        let first = digest(&dir.path().join("report.json"));
        let b = run(dir.path(), &args);
        assert_ne!(a.status.code(), Some(2), "{}", String::from_utf8_lossy(&a.stderr));
        assert_eq!(a.status.code(), b.status.code());
        assert_eq!(a.stdout, b.stdout);
        assert_eq!(first, digest(&dir.path().join("report.json")), "{sampler}");
    }
}

#[test]
fn guard_off_matches_unguarded_baseline() {
    let dir = adversarial();
    for sampler in ["beam", "topk", "greedy"] {
        let off = run(
            dir.path(),
            &[
                "generate",
                "run.toml",
                "--thrv",
                "1.01",
                "--sampler",
                sampler,
                "--output",
                "off.json",
            ],
        );
        let base = run(
            dir.path(),
            &[
                "generate",
                "run.toml",
                "--unguarded",
                "--sampler",
                sampler,
                "--output",
                "base.json",
            ],
        );
        assert!(off.status.success() && base.status.success());
        let (off, base) = (report(dir.path(), "off.json"), report(dir.path(), "base.json"));
        assert_eq!(texts(&off), texts(&base), "{sampler}");
        assert_eq!(base["reports"][0]["label"], "unguarded");
        assert_eq!(off["reports"][0]["aggregate"]["rb_count"], 0.0);
    }
}

#[test]
fn step1_validates_every_token_on_a_quiet_store() {
    let dir = workspace(&["zzxq vvkj wwpf".to_string()], "");
    let out = run(
        dir.path(),
        &[
            "generate",
            "run.toml",
            "--strategy",
            "step1",
            "--max-tokens",
            "50",
            "--k",
            "1",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path(), "report.json");
    for p in r["reports"][0]["prompts"].as_array().unwrap() {
        assert_eq!(p["mean"]["s_count"], 50.0, "{}", p["id"]);
        assert_eq!(p["mean"]["rb_count"], 0.0);
    }
}

#[test]
fn compare_writes_one_row_per_strategy() {
    let dir = adversarial();
    let out = run(dir.path(), &["compare", "run.toml"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(dir.path().join("table.txt")).unwrap();
    let rows: Vec<&str> = table.lines().skip(1).collect();
    let labels: Vec<&str> = rows.iter().map(|r| r.split_whitespace().next().unwrap()).collect();
    assert_eq!(labels, ["step1", "stepN:5", "expo2", "contextwise"]);
    assert!(table.lines().next().unwrap().contains("#RB"));
    let r = report(dir.path(), "report.json");
    let agg = |i: usize, key: &str| r["reports"][i]["aggregate"][key].as_f64().unwrap();
    assert!(agg(3, "v_count") <= agg(0, "v_count"));
    assert!(agg(3, "s_count") < agg(0, "s_count"));

    let quiet = workspace(&["zzxq vvkj wwpf".to_string()], "");
    assert!(run(quiet.path(), &["compare", "run.toml", "--max-tokens", "50"])
        .status
        .success());
    let r = report(quiet.path(), "report.json");
    let s: Vec<f64> = (0..4)
        .map(|i| r["reports"][i]["aggregate"]["s_count"].as_f64().unwrap())
        .collect();
    assert!(s[1..].iter().all(|&x| x <= s[0]), "{s:?}");
}

#[test]
fn compare_needs_two_strategies() {
    let dir = adversarial();
    let out = run(dir.path(), &["compare", "run.toml", "--strategy", "expo2"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(
        dir.path(),
        &[
            "compare",
            "run.toml",
            "--strategy",
            "expo2,step1",
            "--output",
            "two.json",
        ],
    );
    assert!(out.status.success());
    assert_eq!(report(dir.path(), "two.json")["reports"].as_array().unwrap().len(), 2);
}

#[test]
fn configuration_errors_exit_before_work() {
    let dir = adversarial();
    let cfg = fs::read_to_string(dir.path().join("run.toml")).unwrap();
    let cases: [(&str, String); 4] = [
        ("unknown.toml", format!("{cfg}bogus = 1\n")),
        ("missing.toml", cfg.replace("prompts.jsonl", "nope.jsonl")),
        ("both.toml", format!("snapshot = \"lm.json\"\n{cfg}")),
        ("outdir.toml", cfg.replace("table.txt", "no/such/dir/table.txt")),
    ];
    for (name, body) in cases {
        fs::write(dir.path().join(name), body).unwrap();
        let out = run(dir.path(), &["generate", name, "--output", "never.json"]);
        assert_eq!(
            out.status.code(),
            Some(2),
            "{name}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    assert!(!dir.path().join("never.json").exists());
    assert_eq!(run(dir.path(), &["generate", "absent.toml"]).status.code(), Some(3));
    assert_eq!(
        run(dir.path(), &["generate", "run.toml", "--thrv", "0"]).status.code(),
        Some(2)
    );
    assert_eq!(
        run(dir.path(), &["generate", "run.toml", "--strategy", "sometimes"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn total_failure_exits_nonzero_but_writes_the_report() {
    // Every single word is itself an unsafe example, so nothing can be said.
    let lines: Vec<String> = WORDS.iter().map(|w| w.to_string()).collect();
    let dir = workspace(&lines, "");
    let out = run(dir.path(), &["generate", "run.toml", "--thrv", "0.5"]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stdout));
    let r = report(dir.path(), "report.json");
    assert_eq!(r["reports"][0]["failed_runs"], 6);
}

#[test]
fn snapshot_replaces_the_corpus() {
    let dir = adversarial();
    let out = run(dir.path(), &["train", "corpus.txt", "lm.json"]);
    assert!(out.status.success());
    let cfg = fs::read_to_string(dir.path().join("run.toml")).unwrap();
    fs::write(
        dir.path().join("snap.toml"),
        cfg.replace("corpus = \"corpus.txt\"", "snapshot = \"lm.json\""),
    )
    .unwrap();
    assert!(run(dir.path(), &["generate", "run.toml", "--output", "a.json"])
        .status
        .success());
    assert!(run(dir.path(), &["generate", "snap.toml", "--output", "b.json"])
        .status
        .success());
    assert_eq!(digest(&dir.path().join("a.json")), digest(&dir.path().join("b.json")));
}

#[test]
fn version_reports_formats() {
    let out = bin().arg("version").output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("signed-hash-v1") && text.contains("safedecode-store v1"));
}
