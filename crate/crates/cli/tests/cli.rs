use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const WORDS: &[&str] = &["river", "stone", "paper", "green", "light", "seven", "table", "north", "quiet", "metal", "cloud"];

fn headscope(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_headscope")).args(args).env("RUST_LOG", "warn").output().expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn workspace(dir: &Path) -> String {
    ok(&headscope(&["synth", "planted", "--out", dir.to_str().unwrap(), "--seed", "11"]));
    let mut corpus = String::new();
    for i in 0..60usize {
        let mut words: Vec<&str> = (0..8).map(|k| WORDS[(i * 7 + k * 3 + i / 5) % WORDS.len()]).collect();
        if i % 2 == 0 {
            words.insert(i % 8, "@");
        }
        corpus.push_str(&format!(
            "{{\"text\": \"{}\", \"meta\": {{\"pile_set_name\": \"toy\"}}, \"id\": \"d{i}\"}}\n",
            words.join(" ")
        ));
    }
    fs::write(dir.join("corpus.jsonl"), corpus).unwrap();
    let config = dir.join("run.toml");
    fs::write(
        &config,
        "[model]\nweights = \"planted.safetensors\"\nconfig = \"planted.toml\"\n\n\
         [corpus]\npath = \"corpus.jsonl\"\n\n\
         [scout]\nlayers = [1]\ntop_k_neurons = 2\ncandidates = \"all\"\n\n\
         [mine]\nn_mine_prompts = 6\nn_test_prompts = 4\n\n\
         [explain]\nbackend = \"http\"\nendpoint = \"http://127.0.0.1:9/unreachable\"\n",
    )
    .unwrap();
    config.to_str().unwrap().to_owned()
}

#[test]
fn stages_run_in_order_and_resume() {
    let dir = tempfile::tempdir().unwrap();
    let config = workspace(dir.path());
    let run = dir.path().join("run");
    let run = run.to_str().unwrap();

    let early = headscope(&["attribute", "--config", &config, "--run-dir", run]);
    assert!(!early.status.success());
    assert!(String::from_utf8_lossy(&early.stderr).contains("scout"), "{}", String::from_utf8_lossy(&early.stderr));

    let out = ok(&headscope(&["scout", "--config", &config, "--run-dir", run]));
    assert!(out.starts_with("scout: done"), "{out}");
    let out = ok(&headscope(&["all", "--config", &config, "--run-dir", run, "--stub-backend"]));
    assert!(out.contains("scout: up to date"), "{out}");
    assert!(out.contains("report: done"), "{out}");
    assert!(out.contains("explainable pairs"), "{out}");

    let report: serde_json::Value = serde_json::from_slice(&fs::read(Path::new(run).join("report.json")).unwrap()).unwrap();
    assert_eq!(report["primary_count"], 6);
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(Path::new(run).join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["stages"].as_object().unwrap().len(), 7);
    assert!(manifest["settings"].as_array().unwrap().iter().any(|s| s["key"] == "attribute.sigma" && s["source"] == "method"));

    let again = ok(&headscope(&["report", "--config", &config, "--run-dir", run, "--stub-backend"]));
    assert!(again.starts_with("report: up to date"), "{again}");
}

#[test]
fn default_run_dir_sits_next_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = workspace(dir.path());
    ok(&headscope(&["scout", "--config", &config]));
    assert!(dir.path().join("runs/run/neurons.json").exists());
}

#[test]
fn tokenize_uses_the_byte_tokenizer() {
    let dir = tempfile::tempdir().unwrap();
    let config = workspace(dir.path());
    let out = ok(&headscope(&["tokenize", "--config", &config, "a@"]));
    assert_eq!(out.lines().collect::<Vec<_>>(), vec!["97\t\"a\"", "64\t\"@\""]);
}

#[test]
fn bad_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, "[model]\nweights = \"x\"\n").unwrap();
    let out = headscope(&["scout", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config error"));
}
