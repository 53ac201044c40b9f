//! Instrumented GPT-2 forward pass.
//!
//! Besides logits, a pass can record each attention head's write into the
//! residual stream (after its slice of the output projection, without the
//! shared output bias), MLP activations after the GELU, and the residual
//! stream at block boundaries. Heads can be zero-ablated or have their
//! contribution replaced by a fixed vector.

mod dump;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use ndarray::{s, Array1, Array2, Array3, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model_io::{LayerNormParams, ModelBundle};

pub use dump::{read_trace, write_trace, TraceDumpError};

/// An attention head, `(layer, head)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HeadId {
    pub layer: usize,
    pub head: usize,
}

impl HeadId {
    pub const fn new(layer: usize, head: usize) -> Self {
        Self { layer, head }
    }
}

impl fmt::Display for HeadId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}H{}", self.layer, self.head)
    }
}

/// MLP neuron `neuron` of block `layer`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NeuronHandle {
    pub layer: usize,
    pub neuron: usize,
}

impl NeuronHandle {
    pub const fn new(layer: usize, neuron: usize) -> Self {
        Self { layer, neuron }
    }
}

impl fmt::Display for NeuronHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.layer, self.neuron)
    }
}

#[derive(Debug, Error)]
pub enum ForwardError {
    #[error("token sequence is empty")]
    EmptySequence,
    #[error("sequence of {len} tokens exceeds the {max} position limit")]
    SequenceTooLong { len: usize, max: usize },
    #[error("token id {0} is outside the vocabulary")]
    TokenOutOfRange(u32),
    #[error("head {0} is outside the model")]
    HeadOutOfRange(HeadId),
    #[error("neuron {0} is outside the model")]
    NeuronOutOfRange(NeuronHandle),
    #[error("invalid forward options: {0}")]
    InvalidOptions(String),
    #[error("logits were not captured for this trace")]
    LogitsNotCaptured,
}

/// Which MLP activations to keep.
#[derive(Debug, Clone, Default, PartialEq)]
pub enum NeuronCapture {
    #[default]
    None,
    All,
    Only(BTreeSet<NeuronHandle>),
}

/// Which positions get vocabulary logits.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum LogitCapture {
    None,
    /// Only the last position; enough for next-token probabilities.
    #[default]
    Final,
    All,
}

#[derive(Debug, Clone, Default)]
pub struct ForwardOptions {
    /// Record every head's residual contribution at every position.
    pub capture_heads: bool,
    pub capture_neurons: NeuronCapture,
    /// Heads whose contribution is replaced by the zero vector.
    pub ablate_heads: BTreeSet<HeadId>,
    /// Heads whose contribution is replaced by a fixed `d_model` vector at
    /// every position (mean-ablation and similar variants).
    pub head_replacements: BTreeMap<HeadId, Array1<f32>>,
    pub capture_logits: LogitCapture,
    /// Record residual checkpoints and per-block outputs.
    pub capture_residuals: bool,
    /// Stop after the MLP activations of this block. Logits are then
    /// unavailable.
    pub stop_after_layer: Option<usize>,
}

impl ForwardOptions {
    pub fn logits_only() -> Self {
        Self::default()
    }

    /// Everything recorded, all logits.
    pub fn full() -> Self {
        Self {
            capture_heads: true,
            capture_neurons: NeuronCapture::All,
            capture_logits: LogitCapture::All,
            capture_residuals: true,
            ..Self::default()
        }
    }

    fn is_removed(&self, head: HeadId) -> bool {
        self.ablate_heads.contains(&head) || self.head_replacements.contains_key(&head)
    }
}

/// Residual stream snapshots, each `[seq, d_model]`, and the block outputs
/// that sum to them.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualCheckpoints {
    /// Token plus position embeddings.
    pub embeddings: Array2<f32>,
    /// Input to each block (before its first layer norm).
    pub block_input: Vec<Array2<f32>>,
    /// Residual after each block's attention, before its MLP.
    pub post_attention: Vec<Array2<f32>>,
    /// Each block's MLP output including its bias.
    pub mlp_output: Vec<Array2<f32>>,
    /// Residual after the last computed block, before the final layer norm.
    pub final_residual: Array2<f32>,
}

/// Everything recorded by one [`forward`] call.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub token_ids: Vec<u32>,
    /// Number of blocks actually evaluated.
    pub layers_run: usize,
    /// Per layer, `[n_heads, seq, d_model]`.
    pub head_contributions: Option<Vec<Array3<f32>>>,
    /// Per layer, `[seq, d_mlp]`, when every neuron was captured.
    pub mlp_activations: Option<Vec<Array2<f32>>>,
    /// Per requested neuron, one value per position.
    pub selected_activations: BTreeMap<NeuronHandle, Array1<f32>>,
    /// `[rows, vocab_size]`; row `i` belongs to position `logits_start + i`.
    pub logits: Option<Array2<f32>>,
    pub logits_start: usize,
    pub residuals: Option<ResidualCheckpoints>,
}

impl ForwardTrace {
    pub fn seq_len(&self) -> usize {
        self.token_ids.len()
    }

    /// A head's `d_model` contribution at `position`.
    pub fn head_contribution(&self, head: HeadId, position: usize) -> Option<ArrayView1<'_, f32>> {
        let layer = self.head_contributions.as_ref()?.get(head.layer)?;
        if head.head >= layer.shape()[0] || position >= layer.shape()[1] {
            return None;
        }
        Some(layer.slice(s![head.head, position, ..]))
    }

    /// A neuron's activation at every position.
    pub fn neuron_activations(&self, neuron: NeuronHandle) -> Option<ArrayView1<'_, f32>> {
        if let Some(values) = self.selected_activations.get(&neuron) {
            return Some(values.view());
        }
        let layer = self.mlp_activations.as_ref()?.get(neuron.layer)?;
        (neuron.neuron < layer.ncols()).then(|| layer.column(neuron.neuron))
    }

    pub fn final_logits(&self) -> Option<ArrayView1<'_, f32>> {
        let logits = self.logits.as_ref()?;
        (logits.nrows() > 0).then(|| logits.row(logits.nrows() - 1))
    }
}

/// Run the model over `token_ids`.
pub fn forward(
    model: &ModelBundle,
    token_ids: &[u32],
    options: &ForwardOptions,
) -> Result<ForwardTrace, ForwardError> {
    let c = &model.config;
    let n = token_ids.len();
    if n == 0 {
        return Err(ForwardError::EmptySequence);
    }
    if n > c.max_positions {
        return Err(ForwardError::SequenceTooLong {
            len: n,
            max: c.max_positions,
        });
    }
    if let Some(&t) = token_ids.iter().find(|&&t| t as usize >= c.vocab_size) {
        return Err(ForwardError::TokenOutOfRange(t));
    }
    for &head in options
        .ablate_heads
        .iter()
        .chain(options.head_replacements.keys())
    {
        if !model.contains_head(head) {
            return Err(ForwardError::HeadOutOfRange(head));
        }
    }
    for (head, r) in &options.head_replacements {
        if r.len() != c.d_model {
            return Err(ForwardError::InvalidOptions(format!(
                "replacement for {head} has length {}, expected {}",
                r.len(),
                c.d_model
            )));
        }
    }
    if let NeuronCapture::Only(set) = &options.capture_neurons {
        if let Some(&bad) = set.iter().find(|h| !model.contains_neuron(**h)) {
            return Err(ForwardError::NeuronOutOfRange(bad));
        }
    }
    let last_layer = match options.stop_after_layer {
        None => c.n_layers - 1,
        Some(l) if l >= c.n_layers => {
            return Err(ForwardError::InvalidOptions(format!(
                "stop_after_layer {l} >= n_layers {}",
                c.n_layers
            )));
        }
        Some(l) => {
            if l + 1 < c.n_layers && options.capture_logits != LogitCapture::None {
                return Err(ForwardError::InvalidOptions(
                    "logits need every block; set capture_logits to None".into(),
                ));
            }
            l
        }
    };
    if let NeuronCapture::Only(set) = &options.capture_neurons {
        if let Some(bad) = set.iter().find(|h| h.layer > last_layer) {
            return Err(ForwardError::InvalidOptions(format!(
                "neuron {bad} lies beyond stop_after_layer"
            )));
        }
    }

    let (d, dh, nh) = (c.d_model, c.d_head, c.n_heads);
    let mut x = Array2::<f32>::zeros((n, d));
    for (p, &t) in token_ids.iter().enumerate() {
        let mut row = x.row_mut(p);
        row.assign(&model.token_embedding.row(t as usize));
        row += &model.position_embedding.row(p);
    }

    let mut residuals = options.capture_residuals.then(|| ResidualCheckpoints {
        embeddings: x.clone(),
        block_input: Vec::new(),
        post_attention: Vec::new(),
        mlp_output: Vec::new(),
        final_residual: Array2::zeros((0, d)),
    });
    let mut head_contributions = options.capture_heads.then(Vec::new);
    let mut mlp_activations = matches!(options.capture_neurons, NeuronCapture::All).then(Vec::new);
    let mut selected_activations = BTreeMap::new();
    let scale = 1.0 / (dh as f32).sqrt();

    for l in 0..=last_layer {
        let block = &model.blocks[l];
        if let Some(r) = residuals.as_mut() {
            r.block_input.push(x.clone());
        }

        let h = layer_norm(x.view(), &block.ln_1, c.layer_norm_eps);
        let mut qkv = h.dot(&block.w_qkv);
        qkv += &block.b_qkv;

        // head outputs before the output projection, concatenated
        let mut z = Array2::<f32>::zeros((n, d));
        for head in 0..nh {
            if options.is_removed(HeadId::new(l, head)) {
                continue;
            }
            let q = qkv.slice(s![.., head * dh..(head + 1) * dh]);
            let k = qkv.slice(s![.., d + head * dh..d + (head + 1) * dh]);
            let v = qkv.slice(s![.., 2 * d + head * dh..2 * d + (head + 1) * dh]);
            let mut scores = q.dot(&k.t());
            causal_softmax(&mut scores, scale);
            z.slice_mut(s![.., head * dh..(head + 1) * dh])
                .assign(&scores.dot(&v));
        }

        let mut attn = z.dot(&block.w_o);
        attn += &block.b_o;
        for (head, r) in options
            .head_replacements
            .range(HeadId::new(l, 0)..HeadId::new(l + 1, 0))
        {
            debug_assert_eq!(head.layer, l);
            attn += r;
        }

        if let Some(all) = head_contributions.as_mut() {
            let mut layer = Array3::<f32>::zeros((nh, n, d));
            for head in 0..nh {
                let id = HeadId::new(l, head);
                let mut out = layer.index_axis_mut(Axis(0), head);
                if let Some(r) = options.head_replacements.get(&id) {
                    out.rows_mut().into_iter().for_each(|mut row| row.assign(r));
                } else if !options.ablate_heads.contains(&id) {
                    let zh = z.slice(s![.., head * dh..(head + 1) * dh]);
                    out.assign(&zh.dot(&model.head_output_projection(id)));
                }
            }
            all.push(layer);
        }

        x += &attn;
        if let Some(r) = residuals.as_mut() {
            r.post_attention.push(x.clone());
        }

        let h2 = layer_norm(x.view(), &block.ln_2, c.layer_norm_eps);
        let mut act = h2.dot(&block.w_in);
        act += &block.b_in;
        act.mapv_inplace(gelu);

        if let NeuronCapture::Only(set) = &options.capture_neurons {
            for &handle in set.range(NeuronHandle::new(l, 0)..NeuronHandle::new(l + 1, 0)) {
                selected_activations.insert(handle, act.column(handle.neuron).to_owned());
            }
        }

        let stopping_early = l == last_layer && last_layer + 1 < c.n_layers;
        if stopping_early && residuals.is_none() {
            if let Some(all) = mlp_activations.as_mut() {
                all.push(act);
            }
            break;
        }
        let mut mlp = act.dot(&block.w_out);
        mlp += &block.b_out;
        if let Some(all) = mlp_activations.as_mut() {
            all.push(act);
        }
        x += &mlp;
        if let Some(r) = residuals.as_mut() {
            r.mlp_output.push(mlp);
        }
    }

    let (logits, logits_start) = match options.capture_logits {
        LogitCapture::None => (None, n),
        LogitCapture::Final => {
            let last = layer_norm(x.slice(s![n - 1..n, ..]), &model.ln_f, c.layer_norm_eps);
            (Some(last.dot(&model.unembedding())), n - 1)
        }
        LogitCapture::All => {
            let normed = layer_norm(x.view(), &model.ln_f, c.layer_norm_eps);
            (Some(normed.dot(&model.unembedding())), 0)
        }
    };
    if let Some(r) = residuals.as_mut() {
        r.final_residual = x;
    }

    Ok(ForwardTrace {
        token_ids: token_ids.to_vec(),
        layers_run: last_layer + 1,
        head_contributions,
        mlp_activations,
        selected_activations,
        logits,
        logits_start,
        residuals,
    })
}

/// Softmax of the final-position logits, evaluated at `token`.
pub fn next_token_probability(trace: &ForwardTrace, token: u32) -> Result<f64, ForwardError> {
    let logits = trace
        .final_logits()
        .ok_or(ForwardError::LogitsNotCaptured)?;
    let target = *logits
        .get(token as usize)
        .ok_or(ForwardError::TokenOutOfRange(token))?;
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
    let total: f64 = logits.iter().map(|&v| (v as f64 - max).exp()).sum();
    Ok((target as f64 - max).exp() / total)
}

/// Full next-token distribution at the final position.
pub fn next_token_distribution(trace: &ForwardTrace) -> Result<Vec<f64>, ForwardError> {
    let logits = trace
        .final_logits()
        .ok_or(ForwardError::LogitsNotCaptured)?;
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
    let mut probs: Vec<f64> = logits.iter().map(|&v| (v as f64 - max).exp()).collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    Ok(probs)
}

/// Row-wise layer norm with biased variance.
pub(crate) fn layer_norm(
    x: ArrayView2<'_, f32>,
    params: &LayerNormParams,
    eps: f32,
) -> Array2<f32> {
    let mut out = x.to_owned();
    let d = x.ncols() as f32;
    for mut row in out.rows_mut() {
        let mean = row.sum() / d;
        row -= mean;
        let var = row.iter().map(|v| v * v).sum::<f32>() / d;
        let inv = 1.0 / (var + eps).sqrt();
        row *= inv;
        row *= &params.gain;
        row += &params.shift;
    }
    out
}

/// Scale, mask future positions and normalise each row in place.
fn causal_softmax(scores: &mut Array2<f32>, scale: f32) {
    for (i, mut row) in scores.rows_mut().into_iter().enumerate() {
        let (mut live, mut future) = row.view_mut().split_at(Axis(0), i + 1);
        live *= scale;
        let max = live.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        live.mapv_inplace(|v| (v - max).exp());
        let total = live.sum();
        live /= total;
        future.fill(0.0);
    }
}

/// GPT-2's tanh approximation of GELU.
#[inline]
pub fn gelu(x: f32) -> f32 {
    const C: f32 = 0.797_884_6; // sqrt(2 / pi)
    0.5 * x * (1.0 + (C * (x + 0.044_715 * x * x * x)).tanh())
}
