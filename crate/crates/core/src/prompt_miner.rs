//! Max-activating prompts: corpus scanning, suffix truncation and source
//! diversity.
//!
//! Documents are line-break normalised (every `\r\n`, `\r` or `\n` becomes
//! one space), tokenised, and cut to a leading window. A neuron's
//! activation on a token sequence is `ψ`, the maximum over positions.
//! Truncation keeps the shortest token suffix ending at the peak position
//! whose `ψ` still reaches the retention fraction of the original peak.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model_io::ModelBundle;
use crate::tokenizer::Tokenizer;
use crate::transformer::{
    forward, ForwardError, ForwardOptions, LogitCapture, NeuronCapture, NeuronHandle,
};

#[derive(Debug, Error)]
pub enum MinerError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corpus line {line}: {reason}")]
    MalformedCorpusLine { line: usize, reason: String },
    #[error("corpus has no usable documents")]
    EmptyCorpus,
    #[error("only {available} usable documents, {needed} requested")]
    CorpusExhausted { needed: usize, available: usize },
    #[error("no suffix of the prompt reaches the retention threshold")]
    NoValidTruncation,
    #[error("n_prompts must be at least 1")]
    ZeroPrompts,
    #[error("neuron {0} is outside the model")]
    NeuronOutOfRange(NeuronHandle),
    #[error(transparent)]
    Forward(#[from] ForwardError),
}

/// Held-out bucket of a document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Mine,
    Test,
}

impl Split {
    /// Parity of the last byte of SHA-256(doc_id): even mines, odd tests.
    pub fn of(doc_id: &str) -> Self {
        let digest = Sha256::digest(doc_id.as_bytes());
        if digest[31] & 1 == 0 {
            Split::Mine
        } else {
            Split::Test
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusDocument {
    pub doc_id: String,
    pub text: String,
    pub subset: String,
}

#[derive(Deserialize)]
struct RawMeta {
    #[serde(default)]
    subset: Option<String>,
    #[serde(default)]
    pile_set_name: Option<String>,
    #[serde(default)]
    id: Option<serde_json::Value>,
}

#[derive(Deserialize)]
struct RawDoc {
    text: String,
    #[serde(default)]
    meta: Option<RawMeta>,
    #[serde(default)]
    id: Option<serde_json::Value>,
}

fn id_string(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Parse Pile-style JSONL: one `{"text": ..., "meta": {"subset": ...}}`
/// object per line. Blank-text documents are dropped. Ids come from an `id`
/// field when present, otherwise from the line number.
pub fn parse_corpus(jsonl: &str, limit: Option<usize>) -> Result<Vec<CorpusDocument>, MinerError> {
    let mut docs = Vec::new();
    for (i, line) in jsonl.lines().enumerate() {
        if limit.is_some_and(|n| docs.len() >= n) {
            break;
        }
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawDoc =
            serde_json::from_str(line).map_err(|e| MinerError::MalformedCorpusLine {
                line: i + 1,
                reason: e.to_string(),
            })?;
        if raw.text.trim().is_empty() {
            continue;
        }
        let meta = raw.meta;
        let subset = meta
            .as_ref()
            .and_then(|m| m.subset.clone().or_else(|| m.pile_set_name.clone()))
            .ok_or_else(|| MinerError::MalformedCorpusLine {
                line: i + 1,
                reason: "missing meta.subset".into(),
            })?;
        let doc_id = raw
            .id
            .as_ref()
            .or(meta.as_ref().and_then(|m| m.id.as_ref()))
            .map(id_string)
            .unwrap_or_else(|| format!("line-{:07}", i + 1));
        docs.push(CorpusDocument {
            doc_id,
            text: raw.text,
            subset,
        });
    }
    Ok(docs)
}

pub fn read_corpus(path: &Path, limit: Option<usize>) -> Result<Vec<CorpusDocument>, MinerError> {
    let text = fs::read_to_string(path).map_err(|source| MinerError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_corpus(&text, limit)
}

/// Replace every line break (`\r\n`, `\r` or `\n`) with a single space.
pub fn normalize_line_breaks(text: &str) -> String {
    text.replace("\r\n", " ").replace(['\r', '\n'], " ")
}

/// Result of shortening a prompt to its minimal activating suffix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    /// Index in the original tokens where the kept suffix starts.
    pub start: usize,
    pub token_ids: Vec<u32>,
    pub text: String,
    /// `ψ` of the kept suffix.
    pub activation: f32,
    /// Position of that maximum within the suffix.
    pub peak_position: usize,
    /// The minimal suffix is longer than the token cap.
    pub discarded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub neuron: NeuronHandle,
    pub doc_id: String,
    pub subset: String,
    pub split: Split,
    /// Normalised leading window that was scanned.
    pub original_text: String,
    pub original_ids: Vec<u32>,
    /// `ψ` of the original window.
    pub peak_activation: f32,
    pub peak_position: usize,
    pub truncation: Option<Truncation>,
}

impl PromptRecord {
    /// Token ids used downstream: the truncation when present.
    pub fn prompt_ids(&self) -> &[u32] {
        self.truncation
            .as_ref()
            .map_or(&self.original_ids, |t| &t.token_ids)
    }

    pub fn prompt_text(&self) -> &str {
        self.truncation
            .as_ref()
            .map_or(&self.original_text, |t| &t.text)
    }

    /// Peak position within [`prompt_ids`](Self::prompt_ids).
    pub fn prompt_peak_position(&self) -> usize {
        self.truncation
            .as_ref()
            .map_or(self.peak_position, |t| t.peak_position)
    }

    pub fn is_discarded(&self) -> bool {
        self.truncation.as_ref().is_some_and(|t| t.discarded)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MineOptions {
    pub window_tokens: usize,
    /// Documents with fewer tokens are skipped.
    pub min_tokens: usize,
    pub max_prompt_tokens: usize,
    /// Fraction of the original peak a truncation must keep.
    pub retention: f64,
}

impl Default for MineOptions {
    fn default() -> Self {
        Self {
            window_tokens: 128,
            min_tokens: 5,
            max_prompt_tokens: 100,
            retention: 0.8,
        }
    }
}

/// Maximum over positions and the earliest position attaining it.
pub fn peak_of(values: impl IntoIterator<Item = f32>) -> Option<(f32, usize)> {
    let mut best: Option<(f32, usize)> = None;
    for (i, v) in values.into_iter().enumerate() {
        if best.map_or(true, |(b, _)| v > b) {
            best = Some((v, i));
        }
    }
    best
}

fn neuron_options(neurons: &BTreeSet<NeuronHandle>) -> ForwardOptions {
    let top = neurons.iter().map(|n| n.layer).max().unwrap_or(0);
    ForwardOptions {
        capture_neurons: NeuronCapture::Only(neurons.clone()),
        capture_logits: LogitCapture::None,
        stop_after_layer: Some(top),
        ..ForwardOptions::default()
    }
}

fn check_neuron(model: &ModelBundle, neuron: NeuronHandle) -> Result<(), MinerError> {
    if model.contains_neuron(neuron) {
        Ok(())
    } else {
        Err(MinerError::NeuronOutOfRange(neuron))
    }
}

/// `ψ` of `neuron` over `token_ids`: peak activation and its earliest position.
pub fn activation_profile(
    model: &ModelBundle,
    neuron: NeuronHandle,
    token_ids: &[u32],
) -> Result<(f32, usize), MinerError> {
    check_neuron(model, neuron)?;
    let trace = forward(model, token_ids, &neuron_options(&[neuron].into()))?;
    let acts = trace
        .neuron_activations(neuron)
        .expect("neuron was captured");
    Ok(peak_of(acts.iter().copied()).expect("forward rejects empty sequences"))
}

/// A document prepared for scanning.
#[derive(Debug, Clone, PartialEq)]
pub struct ScannedDocument {
    pub doc_id: String,
    pub subset: String,
    pub split: Split,
    pub window_ids: Vec<u32>,
    /// `(ψ, position)` per scanned neuron.
    pub peaks: BTreeMap<NeuronHandle, (f32, usize)>,
}

/// Tokenised leading window of a document, or `None` when it is too short.
pub fn document_window(
    tokenizer: &Tokenizer,
    doc: &CorpusDocument,
    options: &MineOptions,
) -> Option<Vec<u32>> {
    let mut ids = tokenizer.encode(&normalize_line_breaks(&doc.text));
    ids.truncate(options.window_tokens);
    (ids.len() >= options.min_tokens).then_some(ids)
}

/// One forward pass per document, recording `ψ` for every neuron at once.
/// Output keeps corpus order; skipped documents are omitted.
pub fn scan_corpus(
    model: &ModelBundle,
    tokenizer: &Tokenizer,
    neurons: &BTreeSet<NeuronHandle>,
    corpus: &[CorpusDocument],
    options: &MineOptions,
) -> Result<Vec<ScannedDocument>, MinerError> {
    for &n in neurons {
        check_neuron(model, n)?;
    }
    if neurons.is_empty() {
        return Ok(Vec::new());
    }
    let fwd = neuron_options(neurons);
    let scanned: Vec<Option<ScannedDocument>> = corpus
        .par_iter()
        .map(|doc| -> Result<Option<ScannedDocument>, MinerError> {
            let Some(mut ids) = document_window(tokenizer, doc, options) else {
                return Ok(None);
            };
            ids.truncate(model.config.max_positions);
            let trace = forward(model, &ids, &fwd)?;
            let peaks = neurons
                .iter()
                .map(|&n| {
                    let acts = trace.neuron_activations(n).expect("neuron was captured");
                    (n, peak_of(acts.iter().copied()).expect("non-empty window"))
                })
                .collect();
            Ok(Some(ScannedDocument {
                doc_id: doc.doc_id.clone(),
                subset: doc.subset.clone(),
                split: Split::of(&doc.doc_id),
                window_ids: ids,
                peaks,
            }))
        })
        .collect::<Result<_, _>>()?;
    Ok(scanned.into_iter().flatten().collect())
}

/// The `n_prompts` highest-`ψ` scanned documents for `neuron`, optionally
/// restricted to one split, sorted by `ψ` descending then `doc_id`.
pub fn select_top(
    tokenizer: &Tokenizer,
    scanned: &[ScannedDocument],
    neuron: NeuronHandle,
    n_prompts: usize,
    split: Option<Split>,
) -> Result<Vec<PromptRecord>, MinerError> {
    if n_prompts == 0 {
        return Err(MinerError::ZeroPrompts);
    }
    let mut pool: Vec<&ScannedDocument> = scanned
        .iter()
        .filter(|d| split.map_or(true, |s| d.split == s) && d.peaks.contains_key(&neuron))
        .collect();
    if pool.len() < n_prompts {
        return Err(MinerError::CorpusExhausted {
            needed: n_prompts,
            available: pool.len(),
        });
    }
    pool.sort_by(|a, b| {
        let (pa, pb) = (a.peaks[&neuron].0, b.peaks[&neuron].0);
        pb.total_cmp(&pa).then_with(|| a.doc_id.cmp(&b.doc_id))
    });
    Ok(pool
        .into_iter()
        .take(n_prompts)
        .map(|d| {
            let (peak, pos) = d.peaks[&neuron];
            PromptRecord {
                neuron,
                doc_id: d.doc_id.clone(),
                subset: d.subset.clone(),
                split: d.split,
                original_text: tokenizer
                    .decode(&d.window_ids)
                    .expect("ids come from the tokenizer"),
                original_ids: d.window_ids.clone(),
                peak_activation: peak,
                peak_position: pos,
                truncation: None,
            }
        })
        .collect())
}

/// Scan `corpus` for one neuron and return its top prompts (untruncated).
pub fn mine_top_prompts(
    model: &ModelBundle,
    tokenizer: &Tokenizer,
    neuron: NeuronHandle,
    corpus: &[CorpusDocument],
    n_prompts: usize,
    split: Option<Split>,
    options: &MineOptions,
) -> Result<Vec<PromptRecord>, MinerError> {
    if corpus.is_empty() {
        return Err(MinerError::EmptyCorpus);
    }
    let scanned = scan_corpus(model, tokenizer, &[neuron].into(), corpus, options)?;
    select_top(tokenizer, &scanned, neuron, n_prompts, split)
}

/// Whether a truncated `ψ` keeps enough of the original peak. For a
/// non-positive peak the bar is the peak itself when that is lower.
pub fn meets_retention(truncated: f32, peak: f32, retention: f64) -> bool {
    let peak = f64::from(peak);
    f64::from(truncated) >= (retention * peak).min(peak)
}

/// Shortest suffix of `tokens[..=peak_position]` meeting the retention bar.
/// Suffixes are tried from shortest to longest.
pub fn truncate_prompt(
    model: &ModelBundle,
    tokenizer: &Tokenizer,
    record: &PromptRecord,
    options: &MineOptions,
) -> Result<PromptRecord, MinerError> {
    let neuron = record.neuron;
    check_neuron(model, neuron)?;
    let fwd = neuron_options(&[neuron].into());
    let end = record.peak_position + 1;
    for start in (0..end).rev() {
        let ids = &record.original_ids[start..end];
        let trace = forward(model, ids, &fwd)?;
        let acts = trace
            .neuron_activations(neuron)
            .expect("neuron was captured");
        let (activation, peak_position) = peak_of(acts.iter().copied()).expect("non-empty suffix");
        if meets_retention(activation, record.peak_activation, options.retention) {
            let mut out = record.clone();
            out.truncation = Some(Truncation {
                start,
                token_ids: ids.to_vec(),
                text: tokenizer.decode(ids).expect("ids come from the tokenizer"),
                activation,
                peak_position,
                discarded: ids.len() > options.max_prompt_tokens,
            });
            return Ok(out);
        }
    }
    Err(MinerError::NoValidTruncation)
}

/// Truncate many records in parallel, preserving order.
pub fn truncate_all(
    model: &ModelBundle,
    tokenizer: &Tokenizer,
    records: &[PromptRecord],
    options: &MineOptions,
) -> Result<Vec<PromptRecord>, MinerError> {
    records
        .par_iter()
        .map(|r| truncate_prompt(model, tokenizer, r, options))
        .collect()
}

/// Number of distinct source subsets among `records`.
pub fn diversity_count(records: &[PromptRecord]) -> usize {
    records
        .iter()
        .map(|r| r.subset.as_str())
        .collect::<BTreeSet<_>>()
        .len()
}
