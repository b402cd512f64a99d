use std::collections::BTreeMap;
use std::fs;

use safedecode::snapshot::{load_lm, save_lm};
use safedecode::store_file::{build_store, load_store, parse_store, save_store};
use safedecode::{corpus, prompts, Error};
use safedecode_core::embed::Embedder;
use safedecode_core::{train_ngram, DemoStore, HashingEmbedder};
use tempfile::tempdir;

fn ten_examples() -> DemoStore {
    let mut store = DemoStore::default();
    for i in 0..10 {
        let mut meta = BTreeMap::new();
        meta.insert("category".to_string(), format!("c{}", i % 3));
        store
            .add(&format!("example number {i} says thing {}", i * 7), meta)
            .unwrap();
    }
    store
}

#[test]
fn store_round_trip_preserves_retrieval() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("store.jsonl");
    let store = ten_examples();
    save_store(&store, &path).unwrap();
    let loaded = load_store(&path).unwrap();
    assert_eq!(loaded.examples(), store.examples());
    for probe in ["example", "number 3", "thing 14", "says", "unrelated words"] {
        let v = store.embedder().embed(probe);
        assert_eq!(loaded.query(&v, 4).unwrap(), store.query(&v, 4).unwrap(), "{probe}");
    }
}

#[test]
fn tampered_embedding_names_the_example() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("store.jsonl");
    save_store(&ten_examples(), &path).unwrap();
    let raw = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = raw.lines().map(String::from).collect();
    let mut example: serde_json::Value = serde_json::from_str(&lines[4]).unwrap();
    let id = example["id"].as_str().unwrap().to_string();
    let first = example["embedding"][0].as_f64().unwrap();
    example["embedding"][0] = serde_json::json!(first + 0.01);
    lines[4] = example.to_string();
    fs::write(&path, lines.join("\n")).unwrap();
    let err = load_store(&path).unwrap_err();
    assert!(matches!(err, Error::Parse { line: 5, .. }), "{err}");
    assert!(err.to_string().contains(&id), "{err}");
}

#[test]
fn malformed_lines_and_headers_are_rejected() {
    let path = std::path::Path::new("s.jsonl");
    let good = {
        let mut buf = Vec::new();
        safedecode::store_file::write_store(&ten_examples(), &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    };
    let bad_version = good.replacen("signed-hash-v1", "signed-hash-v0", 1);
    assert!(parse_store(&bad_version, path)
        .unwrap_err()
        .to_string()
        .contains("signed-hash-v0"));
    assert!(parse_store("", path).is_err());
    let broken = good.replacen("\"text\":", "\"txet\":", 1);
    let err = parse_store(&broken, path).unwrap_err();
    assert!(err.to_string().contains("demo-000000"), "{err}");
    let dup = format!("{good}{}\n", good.lines().nth(1).unwrap());
    assert!(parse_store(&dup, path).unwrap_err().to_string().contains("duplicate"));
}

#[test]
fn custom_embedder_parameters_survive_a_round_trip() {
    let store = build_store(&["alpha beta", "gamma"], HashingEmbedder::new(64, 42).unwrap()).unwrap();
    let mut buf = Vec::new();
    safedecode::store_file::write_store(&store, &mut buf).unwrap();
    let loaded = parse_store(std::str::from_utf8(&buf).unwrap(), "x".as_ref()).unwrap();
    assert_eq!(loaded.embedder(), store.embedder());
    assert_eq!(loaded.examples(), store.examples());
}

#[test]
fn lm_snapshot_round_trip() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("lm.json");
    let lm = train_ngram(["the cat sat on the mat .", "the dog sat , then ran"], 3, 0.25).unwrap();
    save_lm(&lm, &path).unwrap();
    assert_eq!(load_lm(&path).unwrap(), lm);

    let mut snap: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    snap["contexts"][0]["next"][0][0] = serde_json::json!(9999);
    fs::write(&path, snap.to_string()).unwrap();
    assert!(matches!(load_lm(&path), Err(Error::Invalid { .. })));
}

#[test]
fn prompts_and_references() {
    let dir = tempdir().unwrap();
    let p = dir.path().join("prompts.jsonl");
    fs::write(
        &p,
        "{\"id\":\"a\",\"prompt\":\"x y\"}\n\n{\"id\":\"b\",\"prompt\":\"z\",\"reference\":\"q\"}\n",
    )
    .unwrap();
    let mut cases = prompts::read_prompts(&p).unwrap();
    assert_eq!(cases.len(), 2);
    assert_eq!(cases[1].reference.as_deref(), Some("q"));
    let r = dir.path().join("refs.jsonl");
    fs::write(&r, "{\"id\":\"a\",\"reference\":\"x y w\"}\n").unwrap();
    prompts::attach_references(&mut cases, &r).unwrap();
    assert_eq!(cases[0].reference.as_deref(), Some("x y w"));
    fs::write(&r, "{\"id\":\"c\",\"reference\":\"?\"}\n").unwrap();
    assert!(prompts::attach_references(&mut cases, &r).is_err());

    fs::write(&p, "{\"id\":\"a\",\"prompt\":\"x\"}\n{\"id\":\"a\",\"prompt\":\"y\"}\n").unwrap();
    assert!(matches!(prompts::read_prompts(&p), Err(Error::Parse { line: 2, .. })));
}

#[test]
fn hundred_line_corpus_gives_hundred_examples() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("unsafe.txt");
    let body: String = (0..100).map(|i| format!("unsafe line {i}\n")).collect();
    fs::write(&path, format!("{body}\n\n")).unwrap();
    let docs = corpus::read_lines(&path).unwrap();
    assert_eq!(build_store(&docs, HashingEmbedder::default()).unwrap().len(), 100);
}
