//! Head ablation: knock out one head, re-run the prompt, and compare the
//! neuron's token probability and activation with the intact model.

use std::collections::BTreeMap;

use ndarray::Array1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::{ks_two_sample, Histogram, StatsError};
use crate::model_io::ModelBundle;
use crate::prompt_miner::PromptRecord;
use crate::transformer::{
    forward, next_token_probability, ForwardError, ForwardOptions, HeadId, LogitCapture, NeuronCapture,
    NeuronHandle,
};

#[derive(Debug, Error)]
pub enum AblationError {
    #[error(transparent)]
    Forward(#[from] ForwardError),
    #[error("head {0} is outside the model")]
    HeadOutOfRange(HeadId),
    #[error("prompt {0} has no tokens")]
    EmptyPrompt(String),
    #[error("cannot compare groups: {active} head-active and {inactive} head-inactive records")]
    DegenerateGroup { active: usize, inactive: usize },
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// What replaces the head's residual write.
#[derive(Debug, Clone, Default, PartialEq)]
pub enum AblationMode {
    #[default]
    Zero,
    /// A fixed vector, usually the head's mean output over a reference set.
    Replace(Array1<f32>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRecord {
    pub neuron: NeuronHandle,
    pub token_id: u32,
    pub head: HeadId,
    pub prompt_id: String,
    pub head_was_active: bool,
    pub prob_original: f64,
    pub prob_ablated: f64,
    /// `prob_original − prob_ablated`
    pub delta: f64,
    pub neuron_act_original: f32,
    pub neuron_act_ablated: f32,
}

/// One prompt to ablate on, with its activity label from attribution.
#[derive(Debug, Clone, Copy)]
pub struct AblationCase<'a> {
    pub prompt_id: &'a str,
    pub prompt: &'a PromptRecord,
    pub head_was_active: bool,
}

fn measure(
    model: &ModelBundle,
    neuron: NeuronHandle,
    token_id: u32,
    ids: &[u32],
    peak: usize,
    mode: Option<(HeadId, &AblationMode)>,
) -> Result<(f64, f32), AblationError> {
    let mut opts = ForwardOptions {
        capture_neurons: NeuronCapture::Only([neuron].into()),
        capture_logits: LogitCapture::Final,
        ..ForwardOptions::default()
    };
    match mode {
        Some((head, AblationMode::Zero)) => {
            opts.ablate_heads.insert(head);
        }
        Some((head, AblationMode::Replace(r))) => {
            opts.head_replacements.insert(head, r.clone());
        }
        None => {}
    }
    let trace = forward(model, ids, &opts)?;
    let prob = next_token_probability(&trace, token_id)?;
    let act = trace.neuron_activations(neuron).expect("neuron captured")[peak];
    Ok((prob, act))
}

/// Run the prompt with and without `head` and record the probability of
/// `token_id` at the final position and the neuron's activation at the
/// prompt's peak position.
pub fn ablate_and_measure(
    model: &ModelBundle,
    neuron: NeuronHandle,
    token_id: u32,
    head: HeadId,
    case: AblationCase<'_>,
    mode: &AblationMode,
) -> Result<AblationRecord, AblationError> {
    if !model.contains_head(head) {
        return Err(AblationError::HeadOutOfRange(head));
    }
    let ids = case.prompt.prompt_ids();
    if ids.is_empty() {
        return Err(AblationError::EmptyPrompt(case.prompt_id.to_owned()));
    }
    let peak = case.prompt.prompt_peak_position().min(ids.len() - 1);
    let (prob_original, neuron_act_original) = measure(model, neuron, token_id, ids, peak, None)?;
    let (prob_ablated, neuron_act_ablated) = measure(model, neuron, token_id, ids, peak, Some((head, mode)))?;
    Ok(AblationRecord {
        neuron,
        token_id,
        head,
        prompt_id: case.prompt_id.to_owned(),
        head_was_active: case.head_was_active,
        prob_original,
        prob_ablated,
        delta: prob_original - prob_ablated,
        neuron_act_original,
        neuron_act_ablated,
    })
}

/// [`ablate_and_measure`] over many prompts in parallel, results in input order.
pub fn ablate_many(
    model: &ModelBundle,
    neuron: NeuronHandle,
    token_id: u32,
    head: HeadId,
    cases: &[AblationCase<'_>],
    mode: &AblationMode,
) -> Result<Vec<AblationRecord>, AblationError> {
    cases.par_iter().map(|&c| ablate_and_measure(model, neuron, token_id, head, c, mode)).collect()
}

/// Mean residual write of `head` over every position of `prompts`.
pub fn mean_head_output(model: &ModelBundle, head: HeadId, prompts: &[&[u32]]) -> Result<Array1<f32>, AblationError> {
    if !model.contains_head(head) {
        return Err(AblationError::HeadOutOfRange(head));
    }
    let opts = ForwardOptions {
        capture_heads: true,
        capture_logits: LogitCapture::None,
        stop_after_layer: Some(head.layer),
        ..ForwardOptions::default()
    };
    let mut sum = vec![0.0f64; model.config.d_model];
    let mut count = 0usize;
    for ids in prompts {
        let trace = forward(model, ids, &opts)?;
        for p in 0..trace.seq_len() {
            let v = trace.head_contribution(head, p).expect("captured");
            for (s, &x) in sum.iter_mut().zip(v) {
                *s += f64::from(x);
            }
            count += 1;
        }
    }
    let n = count.max(1) as f64;
    Ok(sum.into_iter().map(|s| (s / n) as f32).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub records: Vec<AblationRecord>,
    pub ks_statistic: f64,
    pub ks_p_value: f64,
    pub mean_delta_active: f64,
    pub mean_delta_inactive: f64,
}

impl AblationReport {
    fn deltas(&self, active: bool) -> Vec<f64> {
        self.records.iter().filter(|r| r.head_was_active == active).map(|r| r.delta).collect()
    }

    /// Binned deltas per group: `bin_start,bin_end,active,inactive`.
    pub fn histogram_csv(&self, bins: usize) -> String {
        let (active, inactive) = (self.deltas(true), self.deltas(false));
        let all = active.iter().chain(&inactive);
        let lo = all.clone().copied().fold(f64::INFINITY, f64::min);
        let mut hi = all.copied().fold(f64::NEG_INFINITY, f64::max);
        if hi <= lo {
            hi = lo + 1e-9;
        }
        let ha = Histogram::new(&active, lo, hi, bins.max(1)).expect("finite range");
        let hb = Histogram::new(&inactive, lo, hi, bins.max(1)).expect("finite range");
        let w = ha.bin_width();
        let mut out = String::from("bin_start,bin_end,active,inactive\n");
        for (i, (a, b)) in ha.counts.iter().zip(&hb.counts).enumerate() {
            let start = lo + w * i as f64;
            out.push_str(&format!("{:e},{:e},{a},{b}\n", start, start + w));
        }
        out
    }
}

/// Two-sample KS between the deltas of head-active and head-inactive prompts.
pub fn ablation_report(records: Vec<AblationRecord>) -> Result<AblationReport, AblationError> {
    let (active, inactive): (Vec<&AblationRecord>, Vec<&AblationRecord>) =
        records.iter().partition(|r| r.head_was_active);
    if active.is_empty() || inactive.is_empty() {
        return Err(AblationError::DegenerateGroup { active: active.len(), inactive: inactive.len() });
    }
    let a: Vec<f64> = active.iter().map(|r| r.delta).collect();
    let b: Vec<f64> = inactive.iter().map(|r| r.delta).collect();
    let ks = ks_two_sample(&a, &b)?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(AblationReport {
        ks_statistic: ks.statistic,
        ks_p_value: ks.p_value,
        mean_delta_active: mean(&a),
        mean_delta_inactive: mean(&b),
        records,
    })
}

/// Reports keyed by (neuron, head) for every group with both labels present;
/// degenerate groups are returned separately.
pub fn group_reports(
    records: Vec<AblationRecord>,
) -> (BTreeMap<(NeuronHandle, HeadId), AblationReport>, Vec<(NeuronHandle, HeadId)>) {
    let mut groups: BTreeMap<(NeuronHandle, HeadId), Vec<AblationRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.neuron, r.head)).or_default().push(r);
    }
    let mut reports = BTreeMap::new();
    let mut degenerate = Vec::new();
    for (key, recs) in groups {
        match ablation_report(recs) {
            Ok(rep) => {
                reports.insert(key, rep);
            }
            Err(_) => degenerate.push(key),
        }
    }
    (reports, degenerate)
}
