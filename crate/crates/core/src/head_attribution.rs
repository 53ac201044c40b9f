//! Head → neuron attribution.
//!
//! A head's score for neuron `j` in layer `ℓ` at one position is the inner
//! product of the head's residual contribution with the neuron's input
//! weight `e`, for heads in layers `k ≤ ℓ`, and zero for later heads. A head
//! is active on a prompt when its score exceeds the mean of the eligible
//! scores by more than `sigma` population standard deviations.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model_io::ModelBundle;
use crate::transformer::{ForwardTrace, HeadId, NeuronHandle};

#[derive(Debug, Error)]
pub enum AttributionError {
    #[error("position {position} is outside a {len}-token trace")]
    PositionOutOfRange { position: usize, len: usize },
    #[error("trace has no head contributions for layer {0}")]
    HeadsNotCaptured(usize),
    #[error("neuron {0} is outside the model")]
    NeuronOutOfRange(NeuronHandle),
    #[error("no attribution matrices given")]
    EmptyInput,
    #[error("matrices belong to different neurons ({0} and {1})")]
    MixedNeurons(NeuronHandle, NeuronHandle),
    #[error("activity band [{low}, {high}] is not within [0, 1] with low < high")]
    InvalidBand { low: f64, high: f64 },
    #[error("score table shape does not match the eligibility mask")]
    ShapeMismatch,
}

/// Default multiplier in the activity rule.
pub const DEFAULT_SIGMA: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionMatrix {
    pub neuron: NeuronHandle,
    pub prompt_id: String,
    pub position: usize,
    /// `[layer][head]`; exactly 0 where not eligible.
    pub scores: Vec<Vec<f64>>,
    /// `[layer][head]`: `layer <= neuron.layer`.
    pub eligible: Vec<Vec<bool>>,
    /// Over eligible heads.
    pub mean: f64,
    /// Population standard deviation over eligible heads.
    pub stddev: f64,
    pub sigma: f64,
    pub active: Vec<Vec<bool>>,
}

fn population_stats(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl AttributionMatrix {
    /// Finalise a score table: zero ineligible entries, compute the
    /// statistics over eligible ones and mark active heads.
    pub fn from_scores(
        neuron: NeuronHandle,
        prompt_id: impl Into<String>,
        position: usize,
        mut scores: Vec<Vec<f64>>,
        eligible: Vec<Vec<bool>>,
        sigma: f64,
    ) -> Result<Self, AttributionError> {
        if scores.len() != eligible.len() || scores.iter().zip(&eligible).any(|(s, e)| s.len() != e.len()) {
            return Err(AttributionError::ShapeMismatch);
        }
        let mut pool = Vec::new();
        for (row, mask) in scores.iter_mut().zip(&eligible) {
            for (s, &ok) in row.iter_mut().zip(mask) {
                if ok {
                    pool.push(*s);
                } else {
                    *s = 0.0;
                }
            }
        }
        let (mean, stddev) = population_stats(&pool);
        let bar = mean + sigma * stddev;
        let active = scores
            .iter()
            .zip(&eligible)
            .map(|(row, mask)| row.iter().zip(mask).map(|(&s, &ok)| ok && s > bar).collect())
            .collect();
        Ok(Self { neuron, prompt_id: prompt_id.into(), position, scores, eligible, mean, stddev, sigma, active })
    }

    pub fn score(&self, head: HeadId) -> f64 {
        self.scores[head.layer][head.head]
    }

    pub fn is_active(&self, head: HeadId) -> bool {
        self.active[head.layer][head.head]
    }
}

fn dot_f64(a: impl Iterator<Item = f32>, b: impl Iterator<Item = f32>) -> f64 {
    let mut acc = 0.0f64;
    for (x, y) in a.zip(b) {
        acc += f64::from(x) * f64::from(y);
    }
    acc
}

/// Score every head against `neuron` at `position` of `trace`.
pub fn attribute_heads(
    trace: &ForwardTrace,
    neuron: NeuronHandle,
    position: usize,
    model: &ModelBundle,
    prompt_id: &str,
    sigma: f64,
) -> Result<AttributionMatrix, AttributionError> {
    if !model.contains_neuron(neuron) {
        return Err(AttributionError::NeuronOutOfRange(neuron));
    }
    if position >= trace.seq_len() {
        return Err(AttributionError::PositionOutOfRange { position, len: trace.seq_len() });
    }
    let heads = trace.head_contributions.as_ref().ok_or(AttributionError::HeadsNotCaptured(0))?;
    if heads.len() <= neuron.layer {
        return Err(AttributionError::HeadsNotCaptured(heads.len()));
    }
    let c = &model.config;
    let e = model.neuron_input_weights(neuron);
    let mut scores = vec![vec![0.0; c.n_heads]; c.n_layers];
    let mut eligible = vec![vec![false; c.n_heads]; c.n_layers];
    for layer in 0..=neuron.layer {
        for head in 0..c.n_heads {
            let h = trace.head_contribution(HeadId::new(layer, head), position).expect("bounds checked");
            scores[layer][head] = dot_f64(h.iter().copied(), e.iter().copied());
            eligible[layer][head] = true;
        }
    }
    AttributionMatrix::from_scores(neuron, prompt_id, position, scores, eligible, sigma)
}

/// Eligible heads scoring above `mean + sigma * stddev`.
pub fn active_heads(matrix: &AttributionMatrix) -> BTreeSet<HeadId> {
    let mut out = BTreeSet::new();
    for (l, row) in matrix.active.iter().enumerate() {
        for (h, &a) in row.iter().enumerate() {
            if a {
                out.insert(HeadId::new(l, h));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadActivitySummary {
    pub neuron: NeuronHandle,
    pub head: HeadId,
    pub active_fraction: f64,
    pub per_prompt_active: BTreeMap<String, bool>,
}

/// One summary per head that is active on at least one prompt, in head order.
pub fn activity_summary(matrices: &[AttributionMatrix]) -> Result<Vec<HeadActivitySummary>, AttributionError> {
    let first = matrices.first().ok_or(AttributionError::EmptyInput)?;
    if let Some(other) = matrices.iter().find(|m| m.neuron != first.neuron) {
        return Err(AttributionError::MixedNeurons(first.neuron, other.neuron));
    }
    let active: Vec<BTreeSet<HeadId>> = matrices.iter().map(active_heads).collect();
    let heads: BTreeSet<HeadId> = active.iter().flatten().copied().collect();
    Ok(heads
        .into_iter()
        .map(|head| {
            let per_prompt_active: BTreeMap<String, bool> =
                matrices.iter().zip(&active).map(|(m, set)| (m.prompt_id.clone(), set.contains(&head))).collect();
            let hits = active.iter().filter(|set| set.contains(&head)).count();
            HeadActivitySummary {
                neuron: first.neuron,
                head,
                active_fraction: hits as f64 / matrices.len() as f64,
                per_prompt_active,
            }
        })
        .collect())
}

/// Summaries with `low <= active_fraction <= high`.
pub fn select_explainable(
    summaries: &[HeadActivitySummary],
    low: f64,
    high: f64,
) -> Result<Vec<HeadActivitySummary>, AttributionError> {
    if !(0.0 <= low && low < high && high <= 1.0) {
        return Err(AttributionError::InvalidBand { low, high });
    }
    Ok(summaries.iter().filter(|s| low <= s.active_fraction && s.active_fraction <= high).cloned().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_io::synthetic::{random_gpt2, SyntheticScales};
    use crate::model_io::ModelConfig;
    use crate::transformer::{forward, ForwardOptions, LogitCapture};
    use ndarray::{Array1, Array3};
    use proptest::prelude::*;

    fn toy() -> ModelBundle {
        let config = ModelConfig {
            n_layers: 3,
            n_heads: 4,
            d_model: 16,
            d_head: 4,
            d_mlp: 12,
            vocab_size: 30,
            max_positions: 16,
            layer_norm_eps: 1e-5,
        };
        random_gpt2(&config, 9, &SyntheticScales::default())
    }

    fn heads_trace(model: &ModelBundle, tokens: &[u32]) -> ForwardTrace {
        forward(model, tokens, &ForwardOptions { capture_heads: true, capture_residuals: true, ..ForwardOptions::default() })
            .unwrap()
    }

    fn summary(head: HeadId, fraction: f64) -> HeadActivitySummary {
        HeadActivitySummary {
            neuron: NeuronHandle::new(0, 0),
            head,
            active_fraction: fraction,
            per_prompt_active: BTreeMap::new(),
        }
    }

    #[test]
    fn later_heads_score_zero_and_stay_inactive() {
        let m = toy();
        let trace = heads_trace(&m, &[1, 2, 3, 4]);
        let a = attribute_heads(&trace, NeuronHandle::new(1, 3), 3, &m, "p", DEFAULT_SIGMA).unwrap();
        for h in 0..4 {
            assert_eq!(a.scores[2][h], 0.0);
            assert!(!a.eligible[2][h] && !a.active[2][h]);
            assert!(a.eligible[0][h] && a.eligible[1][h]);
        }
    }

    #[test]
    fn orthogonal_construction() {
        let m = toy();
        let neuron = NeuronHandle::new(1, 2);
        let e = m.neuron_input_weights(neuron).to_owned();
        let mut trace = heads_trace(&m, &[5]);
        let mut layers = vec![Array3::<f32>::zeros((4, 1, 16)); 3];
        layers[0].slice_mut(ndarray::s![2, 0, ..]).assign(&e);
        trace.head_contributions = Some(layers);
        let a = attribute_heads(&trace, neuron, 0, &m, "p", DEFAULT_SIGMA).unwrap();
        let norm2: f64 = e.iter().map(|&v| f64::from(v) * f64::from(v)).sum();
        for l in 0..3 {
            for h in 0..4 {
                let expected = if (l, h) == (0, 2) { norm2 } else { 0.0 };
                assert_eq!(a.scores[l][h], expected);
            }
        }
    }

    #[test]
    fn errors() {
        let m = toy();
        let trace = heads_trace(&m, &[1, 2]);
        assert!(matches!(
            attribute_heads(&trace, NeuronHandle::new(0, 0), 2, &m, "p", 2.0),
            Err(AttributionError::PositionOutOfRange { position: 2, len: 2 })
        ));
        let bare = forward(&m, &[1, 2], &ForwardOptions::default()).unwrap();
        assert!(matches!(
            attribute_heads(&bare, NeuronHandle::new(0, 0), 0, &m, "p", 2.0),
            Err(AttributionError::HeadsNotCaptured(_))
        ));
        assert!(matches!(activity_summary(&[]), Err(AttributionError::EmptyInput)));
        assert!(matches!(select_explainable(&[], 0.8, 0.2), Err(AttributionError::InvalidBand { .. })));
    }

    #[test]
    fn equal_scores_activate_nothing() {
        let a = AttributionMatrix::from_scores(NeuronHandle::new(1, 0), "p", 0, vec![vec![3.0; 4]; 2], vec![vec![true; 4]; 2], 2.0)
            .unwrap();
        assert_eq!(a.stddev, 0.0);
        assert!(active_heads(&a).is_empty());
    }

    #[test]
    fn single_eligible_head_is_never_active() {
        let a = AttributionMatrix::from_scores(
            NeuronHandle::new(0, 0),
            "p",
            0,
            vec![vec![7.0], vec![100.0]],
            vec![vec![true], vec![false]],
            2.0,
        )
        .unwrap();
        assert_eq!(a.scores[1][0], 0.0);
        assert!(active_heads(&a).is_empty());
    }

    #[test]
    fn one_outlier_among_ninety_nine_zeros() {
        let mut scores = vec![vec![0.0; 10]; 10];
        scores[9][9] = 10.0;
        let a = AttributionMatrix::from_scores(NeuronHandle::new(9, 0), "p", 0, scores, vec![vec![true; 10]; 10], 2.0).unwrap();
        // independent arithmetic: mean 0.1, variance (99 * 0.01 + 9.9^2) / 100
        let mean = 0.1f64;
        let sd = ((99.0 * 0.01 + 9.9f64.powi(2)) / 100.0).sqrt();
        assert!((a.mean - mean).abs() < 1e-12);
        assert!((a.stddev - sd).abs() < 1e-12);
        assert!((sd - 0.995).abs() < 1e-3);
        assert_eq!(active_heads(&a), [HeadId::new(9, 9)].into());
    }

    #[test]
    fn activity_fractions_and_band() {
        let neuron = NeuronHandle::new(0, 0);
        let matrices: Vec<AttributionMatrix> = (0..20)
            .map(|i| {
                let mut scores = vec![vec![0.0; 8]];
                if i < 10 {
                    scores[0][1] = 50.0;
                }
                if i < 5 {
                    scores[0][2] = 50.0;
                }
                AttributionMatrix::from_scores(neuron, format!("p{i:02}"), 0, scores, vec![vec![true; 8]], 1.0).unwrap()
            })
            .collect();
        let sums = activity_summary(&matrices).unwrap();
        assert_eq!(sums.len(), 2);
        assert_eq!((sums[0].head, sums[0].active_fraction), (HeadId::new(0, 1), 0.5));
        assert_eq!((sums[1].head, sums[1].active_fraction), (HeadId::new(0, 2), 0.25));
        assert_eq!(sums[1].per_prompt_active.values().filter(|&&a| a).count(), 5);
        assert_eq!(select_explainable(&sums, 0.25, 0.75).unwrap().len(), 2);
    }

    #[test]
    fn band_filter() {
        let sums: Vec<_> = [0.1, 0.25, 0.5, 0.8].iter().enumerate().map(|(i, &f)| summary(HeadId::new(0, i), f)).collect();
        let kept: Vec<f64> = select_explainable(&sums, 0.25, 0.75).unwrap().iter().map(|s| s.active_fraction).collect();
        assert_eq!(kept, vec![0.25, 0.5]);
        assert!(select_explainable(&[], 0.25, 0.75).unwrap().is_empty());
        assert!(select_explainable(&[summary(HeadId::new(0, 0), 1.0)], 0.25, 0.75).unwrap().is_empty());
    }

    #[test]
    fn ablating_later_layers_leaves_scores_unchanged() {
        let m = toy();
        let tokens = [3, 1, 4, 1, 5];
        let neuron = NeuronHandle::new(1, 7);
        let base = attribute_heads(&heads_trace(&m, &tokens), neuron, 4, &m, "p", 2.0).unwrap();
        let opts = ForwardOptions {
            capture_heads: true,
            ablate_heads: [HeadId::new(2, 0), HeadId::new(2, 3)].into(),
            capture_logits: LogitCapture::None,
            ..ForwardOptions::default()
        };
        let ablated = attribute_heads(&forward(&m, &tokens, &opts).unwrap(), neuron, 4, &m, "p", 2.0).unwrap();
        assert_eq!(base, ablated);
    }

    #[test]
    fn decomposition_of_the_neuron_input() {
        let m = toy();
        let tokens = [7, 8, 9, 10, 11, 12];
        let trace = heads_trace(&m, &tokens);
        let neuron = NeuronHandle::new(2, 4);
        let p = 5;
        let a = attribute_heads(&trace, neuron, p, &m, "p", 2.0).unwrap();
        let r = trace.residuals.as_ref().unwrap();
        let e: Array1<f32> = m.neuron_input_weights(neuron).to_owned();
        let dot = |v: ndarray::ArrayView1<'_, f32>| dot_f64(v.iter().copied(), e.iter().copied());
        let mut total = dot(r.embeddings.row(p));
        for l in 0..=neuron.layer {
            total += a.scores[l].iter().sum::<f64>();
            total += dot(m.blocks[l].b_o.view());
            if l < neuron.layer {
                total += dot(r.mlp_output[l].row(p));
            }
        }
        let direct = dot(r.post_attention[neuron.layer].row(p));
        assert!((total - direct).abs() <= 1e-4 * direct.abs().max(1.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn identical_traces_identical_active_sets(tokens in prop::collection::vec(0u32..30, 1..10), layer in 0usize..3) {
            let m = toy();
            let neuron = NeuronHandle::new(layer, 1);
            let p = tokens.len() - 1;
            let a = attribute_heads(&heads_trace(&m, &tokens), neuron, p, &m, "x", 2.0).unwrap();
            let b = attribute_heads(&heads_trace(&m, &tokens), neuron, p, &m, "x", 2.0).unwrap();
            prop_assert_eq!(active_heads(&a), active_heads(&b));
            prop_assert_eq!(a, b);
        }

        #[test]
        fn summary_fraction_is_mean_indicator(flags in prop::collection::vec(any::<bool>(), 1..30)) {
            let neuron = NeuronHandle::new(0, 0);
            let matrices: Vec<_> = flags.iter().enumerate().map(|(i, &on)| {
                let mut scores = vec![vec![0.0; 6]];
                if on { scores[0][0] = 9.0; }
                AttributionMatrix::from_scores(neuron, format!("{i}"), 0, scores, vec![vec![true; 6]], 2.0).unwrap()
            }).collect();
            let sums = activity_summary(&matrices).unwrap();
            let hits = flags.iter().filter(|&&f| f).count();
            if hits == 0 {
                prop_assert!(sums.is_empty());
            } else {
                let s = &sums[0];
                let mean = s.per_prompt_active.values().filter(|&&a| a).count() as f64 / flags.len() as f64;
                prop_assert_eq!(s.active_fraction, mean);
            }
        }
    }
}
