//! Next-token neurons by congruence: the largest inner product between a
//! neuron's output weight and any candidate token's unembedding.
//!
//! Scores are screened with single-precision matrix products, then every
//! token that could still be the maximum given the worst-case rounding error
//! is rescored exactly (sequential double-precision sum). Returned scores are
//! therefore independent of the BLAS kernel and reproducible bit for bit.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model_io::ModelBundle;
use crate::tokenizer::Tokenizer;
use crate::transformer::NeuronHandle;

#[derive(Debug, Error)]
pub enum ScoutError {
    #[error("candidate token set is empty")]
    EmptyCandidateSet,
    #[error("candidate token {0} is outside the vocabulary")]
    TokenOutOfRange(u32),
    #[error("layer {0} is outside the model")]
    LayerOutOfRange(usize),
    #[error("neuron {0} is outside the model")]
    NeuronOutOfRange(NeuronHandle),
    #[error("top_k must be at least 1")]
    ZeroTopK,
}

/// How a neuron's output weight is compared with a token's unembedding.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CongruenceMetric {
    /// Plain inner product.
    #[default]
    Dot,
    /// Inner product divided by both norms (0 when either norm is 0).
    Cosine,
}

/// Sorted, de-duplicated token ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateTokens {
    ids: Vec<u32>,
}

impl CandidateTokens {
    pub fn new(ids: impl IntoIterator<Item = u32>) -> Self {
        let mut ids: Vec<u32> = ids.into_iter().collect();
        ids.sort_unstable();
        ids.dedup();
        Self { ids }
    }

    pub fn all(vocab_size: usize) -> Self {
        Self {
            ids: (0..vocab_size as u32).collect(),
        }
    }

    /// Tokens that are a whole word with an optional leading space.
    pub fn words(tokenizer: &Tokenizer) -> Self {
        Self {
            ids: tokenizer.word_token_ids(),
        }
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn check(&self, model: &ModelBundle) -> Result<(), ScoutError> {
        match self.ids.last() {
            None => Err(ScoutError::EmptyCandidateSet),
            Some(&t) if t as usize >= model.config.vocab_size => {
                Err(ScoutError::TokenOutOfRange(t))
            }
            Some(_) => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenScore {
    pub token_id: u32,
    pub token_text: String,
    pub score: f64,
}

/// A neuron with its congruence score and best-aligned token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextTokenNeuron {
    #[serde(flatten)]
    pub handle: NeuronHandle,
    pub score: f64,
    pub token_id: u32,
    pub token_text: String,
    /// Next best tokens for the same neuron, best first.
    pub runners_up: Vec<TokenScore>,
}

/// Tuning for [`scout_neurons`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScoutOptions {
    pub metric: CongruenceMetric,
    pub runners_up: usize,
}

impl Default for ScoutOptions {
    fn default() -> Self {
        Self {
            metric: CongruenceMetric::Dot,
            runners_up: 5,
        }
    }
}

fn exact_dot(a: ArrayView1<'_, f32>, b: ArrayView1<'_, f32>) -> f64 {
    let mut acc = 0.0f64;
    for (x, y) in a.iter().zip(b.iter()) {
        acc += f64::from(*x) * f64::from(*y);
    }
    acc
}

fn exact_norm(a: ArrayView1<'_, f32>) -> f64 {
    exact_dot(a, a).sqrt()
}

/// Exact score of one (weight, embedding) pair.
fn exact_score(metric: CongruenceMetric, w: ArrayView1<'_, f32>, e: ArrayView1<'_, f32>) -> f64 {
    let dot = exact_dot(w, e);
    match metric {
        CongruenceMetric::Dot => dot,
        CongruenceMetric::Cosine => {
            let denom = exact_norm(w) * exact_norm(e);
            if denom == 0.0 {
                0.0
            } else {
                dot / denom
            }
        }
    }
}

/// Candidate embeddings gathered into one matrix with their norms.
struct CandidateMatrix<'a> {
    ids: &'a [u32],
    rows: Array2<f32>,
    norms: Vec<f32>,
    max_norm: f32,
}

impl<'a> CandidateMatrix<'a> {
    fn new(model: &ModelBundle, candidates: &'a CandidateTokens) -> Self {
        let d = model.config.d_model;
        let mut rows = Array2::<f32>::zeros((candidates.len(), d));
        for (i, &t) in candidates.ids.iter().enumerate() {
            rows.row_mut(i).assign(&model.unembedding_row(t));
        }
        let norms: Vec<f32> = rows.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
        let max_norm = norms.iter().copied().fold(0.0, f32::max);
        Self {
            ids: &candidates.ids,
            rows,
            norms,
            max_norm,
        }
    }
}

/// Screening score and its worst-case distance from the exact value.
fn screen(
    metric: CongruenceMetric,
    raw: f32,
    w_norm: f32,
    e_norm: f32,
    max_e_norm: f32,
    d: usize,
) -> (f32, f32) {
    let unit = d as f32 * f32::EPSILON;
    match metric {
        CongruenceMetric::Dot => (raw, 4.0 * unit * w_norm * max_e_norm),
        CongruenceMetric::Cosine => {
            let denom = w_norm * e_norm;
            let value = if denom > 0.0 { raw / denom } else { 0.0 };
            (value, 8.0 * unit)
        }
    }
}

/// Best `keep` tokens of one neuron row, exactly scored, best first;
/// ties go to the smaller token id.
fn rank_tokens(
    metric: CongruenceMetric,
    w: ArrayView1<'_, f32>,
    raw_scores: ArrayView1<'_, f32>,
    cands: &CandidateMatrix<'_>,
    keep: usize,
) -> Vec<(u32, f64)> {
    let d = w.len();
    let w_norm = w.dot(&w).sqrt();
    let keep = keep.min(cands.ids.len());
    let mut screened = Vec::with_capacity(raw_scores.len());
    let mut top = Vec::with_capacity(keep + 1);
    let mut margin = 0.0f32;
    for (i, &raw) in raw_scores.iter().enumerate() {
        let (value, m) = screen(metric, raw, w_norm, cands.norms[i], cands.max_norm, d);
        margin = margin.max(m);
        screened.push(value);
        // running top-`keep` values, ascending
        if top.len() < keep || value > top[0] {
            let at = top.partition_point(|&v| v < value);
            top.insert(at, value);
            if top.len() > keep {
                top.remove(0);
            }
        }
    }
    let threshold = top[0] - 2.0 * margin;
    let mut exact: Vec<(u32, f64)> = screened
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= threshold)
        .map(|(i, _)| (cands.ids[i], exact_score(metric, w, cands.rows.row(i))))
        .collect();
    exact.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    exact.truncate(keep);
    exact
}

const NEURON_CHUNK: usize = 256;

/// Ranked tokens for every neuron of `layer`, in neuron order.
fn rank_layer(
    model: &ModelBundle,
    layer: usize,
    cands: &CandidateMatrix<'_>,
    metric: CongruenceMetric,
    keep: usize,
) -> Vec<Vec<(u32, f64)>> {
    let w_out = &model.blocks[layer].w_out;
    let starts: Vec<usize> = (0..w_out.nrows()).step_by(NEURON_CHUNK).collect();
    starts
        .into_par_iter()
        .map(|start| {
            let end = (start + NEURON_CHUNK).min(w_out.nrows());
            let block = w_out.slice(ndarray::s![start..end, ..]);
            let scores = block.dot(&cands.rows.t());
            (0..end - start)
                .map(|r| rank_tokens(metric, block.row(r), scores.row(r), cands, keep))
                .collect::<Vec<_>>()
        })
        .flatten()
        .collect()
}

/// Score and best token of one neuron (maximum over the candidates).
pub fn congruence_score(
    model: &ModelBundle,
    handle: NeuronHandle,
    candidates: &CandidateTokens,
) -> Result<(f64, u32), ScoutError> {
    congruence_score_with(model, handle, candidates, CongruenceMetric::Dot)
}

pub fn congruence_score_with(
    model: &ModelBundle,
    handle: NeuronHandle,
    candidates: &CandidateTokens,
    metric: CongruenceMetric,
) -> Result<(f64, u32), ScoutError> {
    candidates.check(model)?;
    if !model.contains_neuron(handle) {
        return Err(ScoutError::NeuronOutOfRange(handle));
    }
    let cands = CandidateMatrix::new(model, candidates);
    let w = model.neuron_output_weights(handle);
    let raw = cands.rows.dot(&w);
    let best = rank_tokens(metric, w, raw.view(), &cands, 1);
    let (token, score) = best[0];
    Ok((score, token))
}

/// Top `top_k` neurons of each layer in `layers`, best first within each
/// layer, layers in the order given. Ties are broken by neuron index.
pub fn scout_neurons(
    model: &ModelBundle,
    tokenizer: &Tokenizer,
    layers: &[usize],
    top_k: usize,
    candidates: &CandidateTokens,
    options: ScoutOptions,
) -> Result<Vec<NextTokenNeuron>, ScoutError> {
    candidates.check(model)?;
    if top_k == 0 {
        return Err(ScoutError::ZeroTopK);
    }
    if let Some(&bad) = layers.iter().find(|&&l| l >= model.config.n_layers) {
        return Err(ScoutError::LayerOutOfRange(bad));
    }
    let cands = CandidateMatrix::new(model, candidates);
    let text = |t: u32| tokenizer.token_text(t).unwrap_or_else(|_| format!("<{t}>"));
    let mut out = Vec::new();
    for &layer in layers {
        let ranked = rank_layer(model, layer, &cands, options.metric, 1 + options.runners_up);
        let mut order: Vec<usize> = (0..ranked.len()).collect();
        order.sort_by(|&a, &b| ranked[b][0].1.total_cmp(&ranked[a][0].1).then(a.cmp(&b)));
        for &j in order.iter().take(top_k) {
            let (token, score) = ranked[j][0];
            out.push(NextTokenNeuron {
                handle: NeuronHandle::new(layer, j),
                score,
                token_id: token,
                token_text: text(token),
                runners_up: ranked[j][1..]
                    .iter()
                    .map(|&(t, s)| TokenScore {
                        token_id: t,
                        token_text: text(t),
                        score: s,
                    })
                    .collect(),
            });
        }
    }
    Ok(out)
}

/// Per token, the neuron with the highest score over the whole model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenBest {
    pub token_id: u32,
    pub neuron: NeuronHandle,
    pub score: f64,
}

/// How many candidate tokens have their best neuron in each layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerHistogram {
    pub counts: Vec<usize>,
    pub best: Vec<TokenBest>,
}

impl LayerHistogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("layer,count\n");
        for (l, c) in self.counts.iter().enumerate() {
            out.push_str(&format!("{l},{c}\n"));
        }
        out
    }
}

const TOKEN_CHUNK: usize = 512;

/// For each candidate token find its best-scoring neuron across every layer
/// and count the winners per layer. Ties go to the lower `(layer, neuron)`.
pub fn layer_histogram(
    model: &ModelBundle,
    candidates: &CandidateTokens,
    metric: CongruenceMetric,
) -> Result<LayerHistogram, ScoutError> {
    candidates.check(model)?;
    let d = model.config.d_model;
    let cands = CandidateMatrix::new(model, candidates);
    let w_norms: Vec<Vec<f32>> = model
        .blocks
        .iter()
        .map(|b| {
            b.w_out
                .rows()
                .into_iter()
                .map(|r| r.dot(&r).sqrt())
                .collect()
        })
        .collect();
    let max_w_norm = w_norms.iter().flatten().copied().fold(0.0, f32::max);

    let starts: Vec<usize> = (0..cands.ids.len()).step_by(TOKEN_CHUNK).collect();
    let best: Vec<TokenBest> = starts
        .into_par_iter()
        .map(|start| {
            let end = (start + TOKEN_CHUNK).min(cands.ids.len());
            let emb = cands.rows.slice(ndarray::s![start..end, ..]);
            // per token: (screened value, margin, layer, neuron) of every near-best neuron
            let mut near: Vec<Vec<(f32, f32, usize, usize)>> = vec![Vec::new(); end - start];
            for (layer, block) in model.blocks.iter().enumerate() {
                let scores = emb.dot(&block.w_out.t());
                for (r, row) in scores.axis_iter(Axis(0)).enumerate() {
                    let e_norm = cands.norms[start + r];
                    let screened: Vec<(f32, f32)> = row
                        .iter()
                        .enumerate()
                        .map(|(j, &raw)| {
                            let (v, _) = screen(metric, raw, w_norms[layer][j], e_norm, 0.0, d);
                            let m = match metric {
                                CongruenceMetric::Dot => {
                                    4.0 * d as f32 * f32::EPSILON * e_norm * max_w_norm
                                }
                                CongruenceMetric::Cosine => 8.0 * d as f32 * f32::EPSILON,
                            };
                            (v, m)
                        })
                        .collect();
                    let layer_best = screened
                        .iter()
                        .map(|p| p.0)
                        .fold(f32::NEG_INFINITY, f32::max);
                    let margin = screened[0].1;
                    let current = near[r]
                        .iter()
                        .map(|p| p.0)
                        .fold(f32::NEG_INFINITY, f32::max);
                    if layer_best < current - 2.0 * margin {
                        continue;
                    }
                    near[r].extend(
                        screened
                            .iter()
                            .enumerate()
                            .filter(|(_, p)| p.0 >= layer_best - 2.0 * margin)
                            .map(|(j, p)| (p.0, p.1, layer, j)),
                    );
                }
            }
            near.into_iter()
                .enumerate()
                .map(|(r, list)| {
                    let top = list.iter().map(|p| p.0).fold(f32::NEG_INFINITY, f32::max);
                    let e = cands.rows.row(start + r);
                    list.iter()
                        .filter(|p| p.0 >= top - 2.0 * p.1)
                        .map(|&(_, _, layer, j)| {
                            let score = exact_score(metric, model.blocks[layer].w_out.row(j), e);
                            (NeuronHandle::new(layer, j), score)
                        })
                        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
                        .map(|(neuron, score)| TokenBest {
                            token_id: cands.ids[start + r],
                            neuron,
                            score,
                        })
                        .expect("every layer proposes at least one neuron")
                })
                .collect::<Vec<_>>()
        })
        .flatten()
        .collect();

    let mut counts = vec![0; model.config.n_layers];
    for b in &best {
        counts[b.neuron.layer] += 1;
    }
    Ok(LayerHistogram { counts, best })
}

/// Brute-force reference used by tests and the acceptance suite: every
/// (neuron, candidate) pair scored exactly.
pub fn brute_force_scores(
    w_out: ArrayView2<'_, f32>,
    unembedding: ArrayView2<'_, f32>,
    candidates: &[u32],
) -> Vec<(f64, u32)> {
    w_out
        .rows()
        .into_iter()
        .map(|w| {
            let mut best = (f64::NEG_INFINITY, u32::MAX);
            for &t in candidates {
                let e = unembedding.row(t as usize);
                let mut s = 0.0f64;
                for k in 0..w.len() {
                    s += f64::from(w[k]) * f64::from(e[k]);
                }
                if s > best.0 || (s == best.0 && t < best.1) {
                    best = (s, t);
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_io::synthetic::{random_gpt2, SyntheticScales};
    use crate::model_io::ModelConfig;
    use crate::tokenizer::TokenizerTables;
    use proptest::prelude::*;

    fn toy(seed: u64, layers: usize, d_mlp: usize, vocab: usize) -> ModelBundle {
        let config = ModelConfig {
            n_layers: layers,
            n_heads: 2,
            d_model: 8,
            d_head: 4,
            d_mlp,
            vocab_size: vocab,
            max_positions: 8,
            layer_norm_eps: 1e-5,
        };
        random_gpt2(&config, seed, &SyntheticScales::default())
    }

    fn bytes_tok() -> Tokenizer {
        Tokenizer::new(TokenizerTables::byte_level())
    }

    #[test]
    fn zero_output_weight_scores_zero_at_smallest_id() {
        let mut m = toy(1, 1, 4, 16);
        m.blocks[0].w_out.row_mut(2).fill(0.0);
        let cands = CandidateTokens::new([9, 3, 12]);
        assert_eq!(
            congruence_score(&m, NeuronHandle::new(0, 2), &cands).unwrap(),
            (0.0, 3)
        );
    }

    #[test]
    fn planted_embedding_wins_with_squared_norm() {
        let mut m = toy(2, 2, 8, 32);
        let target = 17u32;
        let row = m.token_embedding.row(target as usize).to_owned();
        m.blocks[1].w_out.row_mut(5).assign(&row);
        let cands = CandidateTokens::all(32);
        // make the target the longest embedding so the equality case is the maximum
        m.token_embedding
            .row_mut(target as usize)
            .mapv_inplace(|v| v * 10.0);
        m.blocks[1].w_out.row_mut(5).mapv_inplace(|v| v * 10.0);
        let (score, token) = congruence_score(&m, NeuronHandle::new(1, 5), &cands).unwrap();
        assert_eq!(token, target);
        let e = m.token_embedding.row(target as usize);
        assert_eq!(score, exact_dot(e, e));
    }

    #[test]
    fn errors() {
        let m = toy(3, 1, 4, 16);
        let tok = bytes_tok();
        let empty = CandidateTokens::new([]);
        assert!(matches!(
            congruence_score(&m, NeuronHandle::new(0, 0), &empty),
            Err(ScoutError::EmptyCandidateSet)
        ));
        let far = CandidateTokens::new([16]);
        assert!(matches!(
            congruence_score(&m, NeuronHandle::new(0, 0), &far),
            Err(ScoutError::TokenOutOfRange(16))
        ));
        let all = CandidateTokens::all(16);
        assert!(matches!(
            scout_neurons(&m, &tok, &[0], 0, &all, ScoutOptions::default()),
            Err(ScoutError::ZeroTopK)
        ));
        assert!(matches!(
            scout_neurons(&m, &tok, &[1], 1, &all, ScoutOptions::default()),
            Err(ScoutError::LayerOutOfRange(1))
        ));
    }

    #[test]
    fn exhaustive_top_k_returns_every_neuron_sorted() {
        let m = toy(4, 2, 12, 24);
        let out = scout_neurons(
            &m,
            &bytes_tok(),
            &[0, 1],
            12,
            &CandidateTokens::all(24),
            ScoutOptions::default(),
        )
        .unwrap();
        assert_eq!(out.len(), 24);
        for layer in out.chunks(12) {
            assert!(layer.windows(2).all(|w| w[0].score >= w[1].score));
            let mut ids: Vec<usize> = layer.iter().map(|n| n.handle.neuron).collect();
            ids.sort();
            assert_eq!(ids, (0..12).collect::<Vec<_>>());
        }
        assert!(out
            .iter()
            .all(|n| n.runners_up.len() == 5 && n.runners_up[0].score <= n.score));
    }

    #[test]
    fn one_layer_histogram_puts_everything_in_layer_zero() {
        let m = toy(5, 1, 16, 40);
        let h = layer_histogram(&m, &CandidateTokens::all(40), CongruenceMetric::Dot).unwrap();
        assert_eq!(h.counts, vec![40]);
        assert_eq!(h.total(), 40);
    }

    #[test]
    fn planted_final_layer_neurons_win_the_histogram() {
        let mut m = toy(6, 3, 16, 40);
        let planted = [3u32, 8, 21, 30];
        for (j, &t) in planted.iter().enumerate() {
            let e = m.token_embedding.row(t as usize).to_owned();
            m.blocks[2].w_out.row_mut(j).assign(&(e * 50.0));
        }
        let cands = CandidateTokens::new(planted);
        let h = layer_histogram(&m, &cands, CongruenceMetric::Dot).unwrap();
        assert_eq!(h.counts, vec![0, 0, 4]);
        for (b, (j, &t)) in h.best.iter().zip(planted.iter().enumerate()) {
            assert_eq!(b.token_id, t);
            assert_eq!(b.neuron, NeuronHandle::new(2, j));
        }
    }

    #[test]
    fn histogram_agrees_with_brute_force() {
        let m = toy(7, 3, 24, 50);
        let cands = CandidateTokens::all(50);
        let h = layer_histogram(&m, &cands, CongruenceMetric::Dot).unwrap();
        for b in &h.best {
            let mut best = (f64::NEG_INFINITY, NeuronHandle::new(0, 0));
            for (l, block) in m.blocks.iter().enumerate() {
                for (j, w) in block.w_out.rows().into_iter().enumerate() {
                    let s = exact_dot(w, m.token_embedding.row(b.token_id as usize));
                    if s > best.0 {
                        best = (s, NeuronHandle::new(l, j));
                    }
                }
            }
            assert_eq!((b.score, b.neuron), best);
        }
    }

    #[test]
    fn cosine_variant_is_bounded_and_scale_free() {
        let m = toy(8, 1, 8, 30);
        let cands = CandidateTokens::all(30);
        let h = NeuronHandle::new(0, 3);
        let (s, t) = congruence_score_with(&m, h, &cands, CongruenceMetric::Cosine).unwrap();
        assert!((-1.0..=1.0).contains(&s));
        let mut scaled = m.clone();
        scaled.blocks[0].w_out.row_mut(3).mapv_inplace(|v| v * 4.0);
        let (s2, t2) = congruence_score_with(&scaled, h, &cands, CongruenceMetric::Cosine).unwrap();
        assert_eq!(t, t2);
        assert!((s - s2).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn matches_brute_force(seed in 0u64..10_000, layers in 1usize..=4, d_mlp in 1usize..=64, vocab in 2usize..=64) {
            let m = toy(seed, layers, d_mlp, vocab);
            let cands = CandidateTokens::all(vocab);
            let all_layers: Vec<usize> = (0..layers).collect();
            let out = scout_neurons(&m, &bytes_tok(), &all_layers, d_mlp, &cands, ScoutOptions::default()).unwrap();
            for layer in 0..layers {
                let oracle = brute_force_scores(m.blocks[layer].w_out.view(), m.token_embedding.view(), cands.ids());
                for n in out.iter().filter(|n| n.handle.layer == layer) {
                    prop_assert_eq!((n.score, n.token_id), oracle[n.handle.neuron]);
                }
            }
        }

        #[test]
        fn positive_scaling_scales_score(seed in 0u64..1000, c in 0.1f32..10.0) {
            let m = toy(seed, 1, 6, 20);
            let cands = CandidateTokens::all(20);
            let h = NeuronHandle::new(0, 2);
            let (s, t) = congruence_score(&m, h, &cands).unwrap();
            let mut scaled = m.clone();
            scaled.blocks[0].w_out.row_mut(2).mapv_inplace(|v| v * c);
            let (s2, t2) = congruence_score(&scaled, h, &cands).unwrap();
            prop_assert_eq!(t, t2);
            prop_assert!((s2 - f64::from(c) * s).abs() <= 1e-5 * s.abs().max(1e-3) * f64::from(c));
        }

        #[test]
        fn enlarging_candidates_never_lowers_score(seed in 0u64..1000, cut in 1usize..20) {
            let m = toy(seed, 1, 6, 20);
            let h = NeuronHandle::new(0, 1);
            let small = CandidateTokens::new(0..cut as u32);
            let big = CandidateTokens::all(20);
            prop_assert!(congruence_score(&m, h, &big).unwrap().0 >= congruence_score(&m, h, &small).unwrap().0);
        }
    }
}
