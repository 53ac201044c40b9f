//! Parity against fixtures produced once by independent reference
//! implementations (see `tools/make_reference_fixtures.py`).

mod common;

use std::collections::BTreeMap;
use std::fs;

use headscope_core::model_io::synthetic::{synth_values, SyntheticScales, REFERENCE_SEED};
use headscope_core::transformer::{forward, ForwardOptions};
use serde::Deserialize;

#[derive(Deserialize)]
struct TokenizedLine {
    text: String,
    ids: Vec<u32>,
}

#[test]
fn tokenizer_matches_reference_ids() {
    let tok = common::gpt2_tokenizer();
    let text = fs::read_to_string(common::fixture("tokenizer_parity.jsonl")).unwrap();
    let mut lines = 0;
    for line in text.lines() {
        let case: TokenizedLine = serde_json::from_str(line).unwrap();
        assert_eq!(tok.encode(&case.text), case.ids, "text {:?}", case.text);
        assert_eq!(tok.decode(&case.ids).unwrap(), case.text);
        lines += 1;
    }
    assert_eq!(lines, 100);
}

#[test]
fn published_tables_have_expected_sizes() {
    let tok = common::gpt2_tokenizer();
    assert_eq!(tok.vocab_size(), 50257);
    assert_eq!(tok.tables().merge_count(), 50000);
    let go = tok.encode(" go");
    assert_eq!(go, vec![467]);
    assert_eq!(tok.decode(&go).unwrap(), " go");
    assert!(tok.is_word_token(467).unwrap());
    let digits = tok.encode(" 123");
    assert_eq!(digits.len(), 1);
    assert!(!tok.is_word_token(digits[0]).unwrap());
    let hashes = tok.encode("##");
    assert_eq!(hashes.len(), 1);
    assert!(!tok.is_word_token(hashes[0]).unwrap());
}

#[test]
fn synthetic_stream_matches_reference_generator() {
    let probe: BTreeMap<String, Vec<u32>> =
        serde_json::from_str(&fs::read_to_string(common::fixture("synth_probe.json")).unwrap())
            .unwrap();
    let scales = SyntheticScales::default();
    let scale_for = |name: &str| {
        if name.starts_with("wte") {
            scales.token_embedding
        } else if name.starts_with("wpe") {
            scales.position_embedding
        } else if name.ends_with("ln_1.weight") {
            scales.ln_gain
        } else if name.ends_with("ln_1.bias") {
            scales.ln_shift
        } else if name.ends_with("c_attn.weight") {
            scales.qkv_weight
        } else if name.ends_with("c_attn.bias") {
            scales.qkv_bias
        } else {
            panic!("probe tensor {name} has no scale mapping")
        }
    };
    assert!(!probe.is_empty());
    for (name, bits) in &probe {
        let values = synth_values(name, bits.len(), REFERENCE_SEED, scale_for(name));
        let got: Vec<u32> = values.iter().map(|v| v.to_bits()).collect();
        assert_eq!(&got, bits, "tensor {name}");
    }
}

#[derive(Deserialize)]
struct LogitPrompt {
    prompt: String,
    ids: Vec<u32>,
    top1_per_position: Vec<u32>,
    offset: usize,
}

#[derive(Deserialize)]
struct LogitFixture {
    vocab_size: usize,
    prompts: Vec<LogitPrompt>,
}

#[test]
fn reference_prompts_tokenize_as_fixture() {
    let fixture: LogitFixture = serde_json::from_str(
        &fs::read_to_string(common::fixture("gpt2_small_synth_logits.json")).unwrap(),
    )
    .unwrap();
    let tok = common::gpt2_tokenizer();
    for p in &fixture.prompts {
        assert_eq!(tok.encode(&p.prompt), p.ids);
    }
}

#[test]
fn greedy_top1_matches_at_every_position_of_first_prompt() {
    let fixture: LogitFixture = serde_json::from_str(
        &fs::read_to_string(common::fixture("gpt2_small_synth_logits.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(fixture.vocab_size, 50257);
    let model = common::reference_model();
    let p = &fixture.prompts[0];
    let opts = ForwardOptions {
        capture_logits: headscope_core::transformer::LogitCapture::All,
        ..ForwardOptions::default()
    };
    let trace = forward(model, &p.ids, &opts).unwrap();
    let logits = trace.logits.unwrap();
    let argmax: Vec<u32> = logits
        .rows()
        .into_iter()
        .map(|row| {
            (0..row.len())
                .max_by(|&a, &b| row[a].total_cmp(&row[b]).then(b.cmp(&a)))
                .unwrap() as u32
        })
        .collect();
    assert_eq!(argmax, p.top1_per_position);
    assert_eq!(p.offset, 0);
}
