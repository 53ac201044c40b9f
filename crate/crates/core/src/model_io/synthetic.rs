//! Seeded synthetic checkpoints.
//!
//! [`random_gpt2`] fills every tensor from a counter-based splitmix64 stream
//! keyed by the tensor's GPT-2 hub name, so an independent implementation
//! (see `tools/make_reference_fixtures.py`) can regenerate bit-identical
//! weights without the checkpoint being shipped.
//!
//! [`planted_circuit`] hand-builds a two-layer model with one attention head
//! that feeds one next-token neuron whenever a trigger token is in context.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::layer_name;
use super::{BlockWeights, LayerNormParams, ModelBundle, ModelConfig, TensorNames};
use crate::transformer::{HeadId, NeuronHandle};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Seed used for the GPT-2 Small sized reference checkpoint.
pub const REFERENCE_SEED: u64 = 7;

fn fnv1a64(data: &[u8]) -> u64 {
    let mut hash = 0xCBF2_9CE4_8422_2325u64;
    for &b in data {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    hash
}

fn splitmix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform half-width and offset for one tensor role.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoleScale {
    pub half_width: f32,
    pub offset: f32,
}

const fn role(half_width: f32, offset: f32) -> RoleScale {
    RoleScale { half_width, offset }
}

/// Per-role ranges. The defaults give non-degenerate attention patterns and
/// GELU inputs of order one at GPT-2 Small width.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScales {
    pub token_embedding: RoleScale,
    pub position_embedding: RoleScale,
    pub ln_gain: RoleScale,
    pub ln_shift: RoleScale,
    pub qkv_weight: RoleScale,
    pub qkv_bias: RoleScale,
    pub attn_out_weight: RoleScale,
    pub attn_out_bias: RoleScale,
    pub mlp_in_weight: RoleScale,
    pub mlp_in_bias: RoleScale,
    pub mlp_out_weight: RoleScale,
    pub mlp_out_bias: RoleScale,
}

impl Default for SyntheticScales {
    fn default() -> Self {
        Self {
            token_embedding: role(0.2, 0.0),
            position_embedding: role(0.05, 0.0),
            ln_gain: role(0.1, 1.0),
            ln_shift: role(0.05, 0.0),
            qkv_weight: role(0.1, 0.0),
            qkv_bias: role(0.05, 0.0),
            attn_out_weight: role(0.05, 0.0),
            attn_out_bias: role(0.02, 0.0),
            mlp_in_weight: role(0.1, 0.0),
            mlp_in_bias: role(0.05, 0.0),
            mlp_out_weight: role(0.03, 0.0),
            mlp_out_bias: role(0.02, 0.0),
        }
    }
}

/// `len` values of the stream for tensor `name`.
pub fn synth_values(name: &str, len: usize, seed: u64, scale: RoleScale) -> Vec<f32> {
    let key = fnv1a64(name.as_bytes()) ^ seed;
    (1..=len as u64)
        .map(|i| {
            let z = splitmix(key.wrapping_add(i.wrapping_mul(GOLDEN)));
            let unit = (z >> 40) as f32 * (1.0 / (1u32 << 24) as f32);
            (unit * 2.0 - 1.0) * scale.half_width + scale.offset
        })
        .collect()
}

fn synth_matrix(name: &str, rows: usize, cols: usize, seed: u64, scale: RoleScale) -> Array2<f32> {
    Array2::from_shape_vec((rows, cols), synth_values(name, rows * cols, seed, scale))
        .expect("length matches")
}

fn synth_vector(name: &str, len: usize, seed: u64, scale: RoleScale) -> Array1<f32> {
    Array1::from_vec(synth_values(name, len, seed, scale))
}

/// A GPT-2 shaped model whose tensors are drawn from the seeded stream.
pub fn random_gpt2(config: &ModelConfig, seed: u64, scales: &SyntheticScales) -> ModelBundle {
    let names = TensorNames::default();
    let (d, m) = (config.d_model, config.d_mlp);
    let blocks = (0..config.n_layers)
        .map(|l| {
            let n = |t: &str| layer_name(t, l);
            BlockWeights {
                ln_1: LayerNormParams {
                    gain: synth_vector(&n(&names.ln_1_weight), d, seed, scales.ln_gain),
                    shift: synth_vector(&n(&names.ln_1_bias), d, seed, scales.ln_shift),
                },
                w_qkv: synth_matrix(
                    &n(&names.attn_qkv_weight),
                    d,
                    3 * d,
                    seed,
                    scales.qkv_weight,
                ),
                b_qkv: synth_vector(&n(&names.attn_qkv_bias), 3 * d, seed, scales.qkv_bias),
                w_o: synth_matrix(
                    &n(&names.attn_out_weight),
                    d,
                    d,
                    seed,
                    scales.attn_out_weight,
                ),
                b_o: synth_vector(&n(&names.attn_out_bias), d, seed, scales.attn_out_bias),
                ln_2: LayerNormParams {
                    gain: synth_vector(&n(&names.ln_2_weight), d, seed, scales.ln_gain),
                    shift: synth_vector(&n(&names.ln_2_bias), d, seed, scales.ln_shift),
                },
                w_in: synth_matrix(&n(&names.mlp_in_weight), d, m, seed, scales.mlp_in_weight),
                b_in: synth_vector(&n(&names.mlp_in_bias), m, seed, scales.mlp_in_bias),
                w_out: synth_matrix(&n(&names.mlp_out_weight), m, d, seed, scales.mlp_out_weight),
                b_out: synth_vector(&n(&names.mlp_out_bias), d, seed, scales.mlp_out_bias),
            }
        })
        .collect();
    ModelBundle {
        token_embedding: synth_matrix(
            &names.token_embedding,
            config.vocab_size,
            d,
            seed,
            scales.token_embedding,
        ),
        position_embedding: synth_matrix(
            &names.position_embedding,
            config.max_positions,
            d,
            seed,
            scales.position_embedding,
        ),
        blocks,
        ln_f: LayerNormParams {
            gain: synth_vector(&names.ln_f_weight, d, seed, scales.ln_gain),
            shift: synth_vector(&names.ln_f_bias, d, seed, scales.ln_shift),
        },
        config: config.clone(),
    }
}

/// The reference GPT-2 Small sized checkpoint used by the parity fixtures.
pub fn reference_gpt2_small() -> ModelBundle {
    random_gpt2(
        &ModelConfig::gpt2_small(),
        REFERENCE_SEED,
        &SyntheticScales::default(),
    )
}

/// Ground truth of a [`planted_circuit`] model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlantedCircuit {
    pub head: HeadId,
    pub neuron: NeuronHandle,
    pub trigger_token: u32,
    pub target_token: u32,
}

/// Residual dimension carrying the trigger-token feature.
const TRIGGER_DIM: usize = 0;
/// Residual dimension the planted head writes into and the neuron reads.
const SIGNAL_DIM: usize = 1;

/// Two-layer, four-head model with a planted head → neuron → token path.
///
/// * Every token embedding is zero-mean and zero on the two reserved
///   dimensions, except `trigger_token`, which carries a large value on the
///   trigger dimension.
/// * Head (0, 0) attends to the trigger token when it is in the causal
///   prefix, reads only the trigger dimension and writes it into the signal
///   dimension.
/// * Neuron (1, 0) reads the signal dimension through a negative bias, so
///   it stays near zero unless the trigger was seen, and its output weight is
///   the unembedding of `target_token`.
/// * The other heads and neurons carry small seeded noise so the sigma rule
///   sees a realistic spread of attribution scores.
pub fn planted_circuit(
    vocab_size: usize,
    trigger_token: u32,
    target_token: u32,
    seed: u64,
) -> (ModelBundle, PlantedCircuit) {
    let config = ModelConfig {
        n_layers: 2,
        n_heads: 4,
        d_model: 32,
        d_head: 8,
        d_mlp: 16,
        vocab_size,
        max_positions: 256,
        layer_norm_eps: 1e-5,
    };
    let (d, m, dh) = (config.d_model, config.d_mlp, config.d_head);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise = |rows: usize, cols: usize, scale: f32| {
        Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-scale..scale))
    };

    let mut token_embedding = noise(vocab_size, d, 1.0);
    for mut row in token_embedding.rows_mut() {
        row[TRIGGER_DIM] = 0.0;
        row[SIGNAL_DIM] = 0.0;
        let mean = row.iter().skip(2).sum::<f32>() / (d - 2) as f32;
        row.iter_mut().skip(2).for_each(|v| *v -= mean);
    }
    token_embedding[[trigger_token as usize, TRIGGER_DIM]] = 6.0;
    let mut position_embedding = noise(config.max_positions, d, 0.1);
    for mut row in position_embedding.rows_mut() {
        row[TRIGGER_DIM] = 0.0;
        row[SIGNAL_DIM] = 0.0;
        let mean = row.iter().skip(2).sum::<f32>() / (d - 2) as f32;
        row.iter_mut().skip(2).for_each(|v| *v -= mean);
    }

    let unit_norm = || LayerNormParams {
        gain: Array1::ones(d),
        shift: Array1::zeros(d),
    };
    let mut blocks = Vec::with_capacity(2);
    for layer in 0..2 {
        let mut w_qkv = noise(d, 3 * d, 0.15);
        let mut w_o = noise(d, d, 0.05);
        // keep noise heads off the reserved dimensions except for a small
        // component along the signal direction
        for r in 0..d {
            w_o[[r, TRIGGER_DIM]] = 0.0;
            w_o[[r, SIGNAL_DIM]] *= 0.6;
        }
        // only the planted head may read the reserved dimensions
        w_qkv.row_mut(TRIGGER_DIM).fill(0.0);
        w_qkv.row_mut(SIGNAL_DIM).fill(0.0);
        let mut b_qkv = Array1::zeros(3 * d);
        if layer == 0 {
            // planted head 0: a constant query matched by keys of the trigger
            // token, so attention collapses onto the trigger when present;
            // the value copies the trigger feature into the signal dimension
            for c in 0..dh {
                for r in 0..d {
                    w_qkv[[r, c]] = 0.0;
                    w_qkv[[r, d + c]] = 0.0;
                    w_qkv[[r, 2 * d + c]] = 0.0;
                }
            }
            b_qkv[0] = 1.0;
            w_qkv[[TRIGGER_DIM, d]] = 5.0;
            w_qkv[[TRIGGER_DIM, 2 * d]] = 1.0;
            for r in 0..dh {
                for c in 0..d {
                    w_o[[r, c]] = 0.0;
                }
            }
            w_o[[0, SIGNAL_DIM]] = 4.0;
        }

        let mut w_in = noise(d, m, 0.05);
        let mut b_in = Array1::from_elem(m, -1.0f32);
        let mut w_out = noise(m, d, 0.02);
        if layer == 1 {
            w_in.column_mut(0).fill(0.0);
            w_in[[SIGNAL_DIM, 0]] = 2.0;
            b_in[0] = -2.0;
            w_out
                .row_mut(0)
                .assign(&token_embedding.row(target_token as usize));
        }
        for j in 0..m {
            w_in[[TRIGGER_DIM, j]] = 0.0;
            if !(layer == 1 && j == 0) {
                w_in[[SIGNAL_DIM, j]] = 0.0;
            }
        }
        // reserved dims of the residual stay clean of MLP writes
        for j in 0..m {
            w_out[[j, TRIGGER_DIM]] = 0.0;
            if !(layer == 1 && j == 0) {
                w_out[[j, SIGNAL_DIM]] = 0.0;
            }
        }
        if layer == 0 {
            b_in.fill(-3.0);
        }
        blocks.push(BlockWeights {
            ln_1: unit_norm(),
            w_qkv,
            b_qkv,
            w_o,
            b_o: Array1::zeros(d),
            ln_2: unit_norm(),
            w_in,
            b_in,
            w_out,
            b_out: Array1::zeros(d),
        });
    }

    let bundle = ModelBundle {
        config,
        token_embedding,
        position_embedding,
        blocks,
        ln_f: unit_norm(),
    };
    let circuit = PlantedCircuit {
        head: HeadId::new(0, 0),
        neuron: NeuronHandle::new(1, 0),
        trigger_token,
        target_token,
    };
    (bundle, circuit)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stream_is_deterministic_and_in_range() {
        let scale = role(0.5, 1.0);
        let a = synth_values("h.0.ln_1.weight", 1000, 7, scale);
        assert_eq!(a, synth_values("h.0.ln_1.weight", 1000, 7, scale));
        assert!(a.iter().all(|v| (0.5..1.5).contains(v)));
        assert_ne!(a, synth_values("h.0.ln_1.bias", 1000, 7, scale));
        assert_ne!(a, synth_values("h.0.ln_1.weight", 1000, 8, scale));
    }

    #[test]
    fn random_model_validates() {
        let config = ModelConfig {
            n_layers: 3,
            n_heads: 2,
            d_model: 8,
            d_head: 4,
            d_mlp: 32,
            vocab_size: 50,
            max_positions: 16,
            layer_norm_eps: 1e-5,
        };
        random_gpt2(&config, 1, &SyntheticScales::default())
            .validate()
            .unwrap();
    }

    #[test]
    fn planted_model_validates() {
        let (bundle, circuit) = planted_circuit(300, 17, 42, 5);
        bundle.validate().unwrap();
        assert_eq!(
            bundle.neuron_output_weights(circuit.neuron),
            bundle.unembedding_row(42)
        );
    }
}
