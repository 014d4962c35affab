use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use infdecomp_core::text::sha256_hex;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn run(config: &Path, tmp: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_infdecomp"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(tmp.join("out"))
        .arg("--cache-dir")
        .arg(tmp.join("cache"))
        .args(args)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn cluster_table_has_one_row_per_view_and_k() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&fixtures().join("config.toml"), tmp.path(), &["cluster"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(tmp.path().join("out/cluster/cluster_metrics.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "K,view,silhouette,calinski_harabasz,davies_bouldin,n_items");
    assert_eq!(lines.len(), 10);
    for (row, k) in lines[1..].iter().zip([15, 15, 15, 25, 25, 25, 50, 50, 50]) {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields[0], k.to_string());
        let sil: f64 = fields[2].parse().unwrap();
        assert!((-1.0..=1.0).contains(&sil));
    }
    for view in ["comments", "sentences", "generations"] {
        assert!(tmp.path().join(format!("out/cluster/models/{view}_k50.json")).is_file());
        assert!(tmp.path().join(format!("out/cluster/packets/{view}_k15.jsonl")).is_file());
    }
}

#[test]
fn manifest_hashes_match_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&fixtures().join("config.toml"), tmp.path(), &["--seed", "11", "topics"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let dir = tmp.path().join("out/topics");
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 11);
    assert_eq!(manifest["stage"], "topics");
    let outputs = manifest["outputs"].as_object().unwrap();
    assert_eq!(outputs.len(), 3);
    for (name, hash) in outputs {
        assert_eq!(sha256_hex(&std::fs::read(dir.join(name)).unwrap()), hash.as_str().unwrap());
    }
    let inputs = manifest["inputs"].as_object().unwrap();
    assert!(inputs.contains_key("tweets.jsonl"));
    let cmd: Vec<&str> = manifest["command"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(cmd.last(), Some(&"topics"));
    assert!(cmd.contains(&"11"));
}

#[test]
fn stage_rerun_is_idempotent() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixtures().join("config.toml");
    assert!(run(&cfg, tmp.path(), &["decompose"]).status.success());
    let path = tmp.path().join("out/decompose/decompositions.jsonl");
    let first = std::fs::read(&path).unwrap();
    let summary = std::fs::read_to_string(tmp.path().join("out/decompose/summary.json")).unwrap();
    assert!(summary.contains("\"documents\": 120"));
    assert!(run(&cfg, tmp.path(), &["decompose"]).status.success());
    assert_eq!(std::fs::read(&path).unwrap(), first);
    let stats = std::fs::read_to_string(tmp.path().join("out/run_stats.json")).unwrap();
    assert!(stats.contains("\"generation_calls\": 0"), "{stats}");
}

#[test]
fn missing_corpus_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = fixtures();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(
        &cfg,
        format!(
            "seed = 1\n[paths]\ncorpus = \"missing.jsonl\"\ncache_dir = \"c\"\noutput_dir = \"o\"\n\
             [[prompts]]\ntemplate = {:?}\n",
            fx.join("prompts/fda_template.json")
        ),
    )
    .unwrap();
    let o = run(&cfg, tmp.path(), &["decompose"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("paths.corpus: file not found"), "{err}");
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn unknown_key_and_bad_usage_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "seed = 1\ncolour = \"red\"\n[paths]\ncache_dir = \"c\"\noutput_dir = \"o\"\n").unwrap();
    let o = run(&cfg, tmp.path(), &["topics"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("colour"), "{}", stderr(&o));

    let o = run(&fixtures().join("config.toml"), tmp.path(), &["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&fixtures().join("config.toml"), tmp.path(), &["--provider", "carrier-pigeon", "sts"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_section_is_a_stage_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("min.toml");
    std::fs::write(&cfg, "seed = 1\n[paths]\ncache_dir = \"c\"\noutput_dir = \"o\"\n").unwrap();
    let o = run(&cfg, tmp.path(), &["sts"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("[sts]"));
}

#[test]
fn unreachable_generation_endpoint_fails_the_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = fixtures();
    let cfg = tmp.path().join("http.toml");
    std::fs::write(
        &cfg,
        format!(
            "seed = 1\n[paths]\ncorpus = {:?}\ncache_dir = \"c\"\noutput_dir = \"o\"\n\
             [generation]\nprovider = \"http\"\nendpoint = \"http://127.0.0.1:9/v1\"\nmodel = \"m\"\nmax_attempts = 1\n\
             [[prompts]]\ntemplate = {:?}\n",
            fx.join("comments.jsonl"),
            fx.join("prompts/fda_template.json")
        ),
    )
    .unwrap();
    let o = run(&cfg, tmp.path(), &["decompose"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("120"), "{}", stderr(&o));
}
