//! Shared fixtures for the criterion benches in `benches/`.

use headscope_core::model_io::synthetic::{random_gpt2, SyntheticScales};
use headscope_core::{ModelBundle, ModelConfig};

/// A 4-layer, 256-wide model: big enough for the kernels to dominate,
/// small enough for quick iterations.
pub fn medium_model() -> ModelBundle {
    let config = ModelConfig {
        n_layers: 4,
        n_heads: 8,
        d_model: 256,
        d_head: 32,
        d_mlp: 1024,
        vocab_size: 4096,
        max_positions: 256,
        layer_norm_eps: 1e-5,
    };
    random_gpt2(&config, 3, &SyntheticScales::default())
}

/// `len` token ids spread over the vocabulary.
pub fn prompt(len: usize, vocab: usize) -> Vec<u32> {
    (0..len).map(|i| ((i * 7919 + 13) % vocab) as u32).collect()
}

/// Deterministic pseudo-random samples in `[0, 1)`.
pub fn samples(n: usize, seed: u64) -> Vec<f64> {
    let mut x = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (0..n)
        .map(|_| {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (x >> 11) as f64 / (1u64 << 53) as f64
        })
        .collect()
}
