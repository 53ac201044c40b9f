#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use headscope_core::model_io::synthetic::reference_gpt2_small;
use headscope_core::model_io::{load_model, save_model, TensorNames};
use headscope_core::{ModelBundle, Tokenizer};

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn gpt2_tokenizer() -> &'static Tokenizer {
    static TOKENIZER: OnceLock<Tokenizer> = OnceLock::new();
    TOKENIZER.get_or_init(|| {
        let dir = repo_root().join("assets/gpt2");
        Tokenizer::from_files(dir.join("encoder.json"), dir.join("vocab.bpe"))
            .expect("GPT-2 tables load")
    })
}

pub fn corpus_path() -> PathBuf {
    repo_root().join("assets/corpus/sample-2000.jsonl")
}

/// The seeded GPT-2 Small sized checkpoint, written to disk as safetensors
/// and loaded back through the public loader.
pub fn reference_model() -> &'static ModelBundle {
    static MODEL: OnceLock<ModelBundle> = OnceLock::new();
    MODEL.get_or_init(|| {
        let dir = tempfile::tempdir().expect("tempdir");
        let weights = dir.path().join("model.safetensors");
        let config = dir.path().join("model.toml");
        save_model(
            &reference_gpt2_small(),
            &TensorNames::default(),
            &weights,
            &config,
        )
        .expect("save");
        load_model(&weights, &config).expect("load")
    })
}

pub const PLANTED_TRIGGER: u8 = b'@';
pub const PLANTED_TARGET: u8 = b'!';

const WORDS: &[&str] = &[
    "river", "stone", "paper", "green", "light", "seven", "table", "north", "quiet", "metal", "cloud", "bread",
    "glass", "sound", "plant", "horse", "field", "chair", "water", "smile",
];

/// A planted-circuit checkpoint under a byte-level tokenizer, a corpus in
/// which half of the documents contain the trigger byte, and a run config
/// pointing at both. Returns the config path.
pub fn write_planted_workspace(dir: &Path, docs: usize, layers: &[usize], top_k: usize, extra_toml: &str) -> PathBuf {
    use headscope_core::model_io::synthetic::planted_circuit;
    use rand::{Rng, SeedableRng};

    let (model, _) = planted_circuit(256, u32::from(PLANTED_TRIGGER), u32::from(PLANTED_TARGET), 11);
    save_model(&model, &TensorNames::default(), dir.join("planted.safetensors"), dir.join("planted.toml"))
        .expect("save planted model");
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let mut corpus = String::new();
    for i in 0..docs {
        let n = rng.gen_range(6..14);
        let mut words: Vec<String> = (0..n).map(|_| WORDS[rng.gen_range(0..WORDS.len())].to_owned()).collect();
        if i % 2 == 0 {
            let at = rng.gen_range(0..n);
            words.insert(at, (PLANTED_TRIGGER as char).to_string());
        }
        let line = serde_json::json!({"text": words.join(" "), "meta": {"pile_set_name": "toy"}, "id": format!("doc-{i}")});
        corpus.push_str(&line.to_string());
        corpus.push('\n');
    }
    std::fs::write(dir.join("corpus.jsonl"), corpus).expect("write corpus");
    let config = format!(
        "seed = 3\n\n[model]\nname = \"planted\"\nweights = \"planted.safetensors\"\nconfig = \"planted.toml\"\n\n\
         [corpus]\npath = \"corpus.jsonl\"\n\n[scout]\nlayers = {layers:?}\ntop_k_neurons = {top_k}\ncandidates = \"all\"\n\n{extra_toml}\n"
    );
    let path = dir.join("planted_run.toml");
    std::fs::write(&path, config).expect("write config");
    path
}
