//! Loading GPT-2 family checkpoints and tokenizer tables.
//!
//! Weights come from a safetensors file; the architecture and the mapping from
//! model roles to tensor names come from a small TOML config so checkpoints
//! exported by different tools load without code changes. Everything is held
//! as `f32` after loading, whatever the on-disk dtype.

mod config;
pub mod synthetic;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use safetensors::tensor::{Dtype, SafeTensors, TensorView};
use thiserror::Error;

pub use config::{ModelConfig, ModelConfigFile, TensorNames, WeightLayout};

use crate::tokenizer::{TokenizerError, TokenizerTables};
use crate::transformer::{HeadId, NeuronHandle};
use config::layer_name;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed safetensors header: {0}")]
    MalformedHeader(String),
    #[error("missing tensor `{0}`")]
    MissingTensor(String),
    #[error("tensor `{name}` has shape {got:?}, expected {expected:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("tensor `{0}` contains a non-finite value")]
    NonFiniteWeight(String),
    #[error("tensor `{name}` has unsupported dtype {dtype}")]
    UnsupportedDtype { name: String, dtype: String },
    /// Architecture constraint violated (zero counts, `d_model` not divisible
    /// by `n_heads`, ...). Raised before any tensor is inspected.
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ModelError + '_ {
    move |source| ModelError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNormParams {
    pub gain: Array1<f32>,
    pub shift: Array1<f32>,
}

/// Weights of one pre-LN transformer block, all in `[in, out]` layout.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockWeights {
    pub ln_1: LayerNormParams,
    /// `[d_model, 3 * d_model]`, columns ordered q | k | v; head `h` owns
    /// columns `h * d_head .. (h + 1) * d_head` within each third.
    pub w_qkv: Array2<f32>,
    pub b_qkv: Array1<f32>,
    /// `[d_model, d_model]`; rows `h * d_head .. (h + 1) * d_head` are head
    /// `h`'s slice of the output projection.
    pub w_o: Array2<f32>,
    pub b_o: Array1<f32>,
    pub ln_2: LayerNormParams,
    /// `[d_model, d_mlp]`; column `j` is neuron `j`'s input weight.
    pub w_in: Array2<f32>,
    pub b_in: Array1<f32>,
    /// `[d_mlp, d_model]`; row `j` is neuron `j`'s output weight.
    pub w_out: Array2<f32>,
    pub b_out: Array1<f32>,
}

/// A validated, immutable GPT-2 family model. The unembedding is tied to
/// `token_embedding` and exposed as a transpose view.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub config: ModelConfig,
    /// `[vocab_size, d_model]`
    pub token_embedding: Array2<f32>,
    /// `[max_positions, d_model]`
    pub position_embedding: Array2<f32>,
    pub blocks: Vec<BlockWeights>,
    pub ln_f: LayerNormParams,
}

impl ModelBundle {
    /// `[d_model, vocab_size]` view of the tied unembedding.
    pub fn unembedding(&self) -> ArrayView2<'_, f32> {
        self.token_embedding.t()
    }

    /// Unembedding direction of `token`, i.e. its embedding row.
    pub fn unembedding_row(&self, token: u32) -> ArrayView1<'_, f32> {
        self.token_embedding.row(token as usize)
    }

    /// Output weight `w_out` of a neuron (its write direction into the residual stream).
    pub fn neuron_output_weights(&self, neuron: NeuronHandle) -> ArrayView1<'_, f32> {
        self.blocks[neuron.layer].w_out.row(neuron.neuron)
    }

    /// Input weight `e` of a neuron (its read direction from the normalised residual stream).
    pub fn neuron_input_weights(&self, neuron: NeuronHandle) -> ArrayView1<'_, f32> {
        self.blocks[neuron.layer].w_in.column(neuron.neuron)
    }

    /// Head `h`'s `[d_head, d_model]` slice of its layer's output projection.
    pub fn head_output_projection(&self, head: HeadId) -> ArrayView2<'_, f32> {
        let d = self.config.d_head;
        self.blocks[head.layer]
            .w_o
            .slice(s![head.head * d..(head.head + 1) * d, ..])
    }

    pub fn contains_neuron(&self, neuron: NeuronHandle) -> bool {
        neuron.layer < self.config.n_layers && neuron.neuron < self.config.d_mlp
    }

    pub fn contains_head(&self, head: HeadId) -> bool {
        head.layer < self.config.n_layers && head.head < self.config.n_heads
    }

    /// Check every tensor's shape against the config and that all values are finite.
    pub fn validate(&self) -> Result<(), ModelError> {
        let c = &self.config;
        c.validate()?;
        let mut checks: Vec<(String, Vec<usize>, &[usize], Option<&[f32]>)> = vec![
            (
                "token_embedding".into(),
                vec![c.vocab_size, c.d_model],
                self.token_embedding.shape(),
                self.token_embedding.as_slice(),
            ),
            (
                "position_embedding".into(),
                vec![c.max_positions, c.d_model],
                self.position_embedding.shape(),
                self.position_embedding.as_slice(),
            ),
            (
                "ln_f.gain".into(),
                vec![c.d_model],
                self.ln_f.gain.shape(),
                self.ln_f.gain.as_slice(),
            ),
            (
                "ln_f.shift".into(),
                vec![c.d_model],
                self.ln_f.shift.shape(),
                self.ln_f.shift.as_slice(),
            ),
        ];
        if self.blocks.len() != c.n_layers {
            return Err(ModelError::ShapeMismatch {
                name: "blocks".into(),
                expected: vec![c.n_layers],
                got: vec![self.blocks.len()],
            });
        }
        for (l, b) in self.blocks.iter().enumerate() {
            let p = |n: &str| format!("block{l}.{n}");
            checks.extend([
                (
                    p("ln_1.gain"),
                    vec![c.d_model],
                    b.ln_1.gain.shape(),
                    b.ln_1.gain.as_slice(),
                ),
                (
                    p("ln_1.shift"),
                    vec![c.d_model],
                    b.ln_1.shift.shape(),
                    b.ln_1.shift.as_slice(),
                ),
                (
                    p("w_qkv"),
                    vec![c.d_model, 3 * c.d_model],
                    b.w_qkv.shape(),
                    b.w_qkv.as_slice(),
                ),
                (
                    p("b_qkv"),
                    vec![3 * c.d_model],
                    b.b_qkv.shape(),
                    b.b_qkv.as_slice(),
                ),
                (
                    p("w_o"),
                    vec![c.d_model, c.d_model],
                    b.w_o.shape(),
                    b.w_o.as_slice(),
                ),
                (p("b_o"), vec![c.d_model], b.b_o.shape(), b.b_o.as_slice()),
                (
                    p("ln_2.gain"),
                    vec![c.d_model],
                    b.ln_2.gain.shape(),
                    b.ln_2.gain.as_slice(),
                ),
                (
                    p("ln_2.shift"),
                    vec![c.d_model],
                    b.ln_2.shift.shape(),
                    b.ln_2.shift.as_slice(),
                ),
                (
                    p("w_in"),
                    vec![c.d_model, c.d_mlp],
                    b.w_in.shape(),
                    b.w_in.as_slice(),
                ),
                (p("b_in"), vec![c.d_mlp], b.b_in.shape(), b.b_in.as_slice()),
                (
                    p("w_out"),
                    vec![c.d_mlp, c.d_model],
                    b.w_out.shape(),
                    b.w_out.as_slice(),
                ),
                (
                    p("b_out"),
                    vec![c.d_model],
                    b.b_out.shape(),
                    b.b_out.as_slice(),
                ),
            ]);
        }
        for (name, expected, got, data) in checks.drain(..) {
            if got != expected.as_slice() {
                return Err(ModelError::ShapeMismatch {
                    name,
                    expected,
                    got: got.to_vec(),
                });
            }
            let finite = match data {
                Some(values) => values.iter().all(|v| v.is_finite()),
                None => true,
            };
            if !finite {
                return Err(ModelError::NonFiniteWeight(name));
            }
        }
        Ok(())
    }
}

/// Load and validate a checkpoint.
///
/// `config_path` is a TOML file holding the [`ModelConfig`] fields and an
/// optional `[tensors]` name map (GPT-2 hub names by default).
pub fn load_model(
    weights_path: impl AsRef<Path>,
    config_path: impl AsRef<Path>,
) -> Result<ModelBundle, ModelError> {
    let config_path = config_path.as_ref();
    let text = fs::read_to_string(config_path).map_err(io_err(config_path))?;
    let file = ModelConfigFile::parse(&text)?;
    let weights_path = weights_path.as_ref();
    let bytes = fs::read(weights_path).map_err(io_err(weights_path))?;
    load_model_from_bytes(&bytes, &file)
}

pub fn load_model_from_bytes(
    bytes: &[u8],
    file: &ModelConfigFile,
) -> Result<ModelBundle, ModelError> {
    let config = file.model_config()?;
    let names = &file.tensors;
    let st =
        SafeTensors::deserialize(bytes).map_err(|e| ModelError::MalformedHeader(e.to_string()))?;
    let reader = TensorReader {
        st: &st,
        layout: names.layout,
    };
    let (d, m) = (config.d_model, config.d_mlp);

    let token_embedding = reader.matrix_raw(&names.token_embedding, config.vocab_size, d)?;
    let position_embedding =
        reader.matrix_raw(&names.position_embedding, config.max_positions, d)?;
    let mut blocks = Vec::with_capacity(config.n_layers);
    for l in 0..config.n_layers {
        let name = |t: &str| layer_name(t, l);
        let (w_qkv, b_qkv) = if names.is_split_qkv() {
            let mut w = Array2::<f32>::zeros((d, 3 * d));
            let mut b = Array1::<f32>::zeros(3 * d);
            for (i, (wn, bn)) in names.split_qkv()?.into_iter().enumerate() {
                w.slice_mut(s![.., i * d..(i + 1) * d])
                    .assign(&reader.projection(&name(wn), d, d)?);
                b.slice_mut(s![i * d..(i + 1) * d])
                    .assign(&reader.vector(&name(bn), d)?);
            }
            (w, b)
        } else {
            (
                reader.projection(&name(&names.attn_qkv_weight), d, 3 * d)?,
                reader.vector(&name(&names.attn_qkv_bias), 3 * d)?,
            )
        };
        blocks.push(BlockWeights {
            ln_1: LayerNormParams {
                gain: reader.vector(&name(&names.ln_1_weight), d)?,
                shift: reader.vector(&name(&names.ln_1_bias), d)?,
            },
            w_qkv,
            b_qkv,
            w_o: reader.projection(&name(&names.attn_out_weight), d, d)?,
            b_o: reader.vector(&name(&names.attn_out_bias), d)?,
            ln_2: LayerNormParams {
                gain: reader.vector(&name(&names.ln_2_weight), d)?,
                shift: reader.vector(&name(&names.ln_2_bias), d)?,
            },
            w_in: reader.projection(&name(&names.mlp_in_weight), d, m)?,
            b_in: reader.vector(&name(&names.mlp_in_bias), m)?,
            w_out: reader.projection(&name(&names.mlp_out_weight), m, d)?,
            b_out: reader.vector(&name(&names.mlp_out_bias), d)?,
        });
    }
    let ln_f = LayerNormParams {
        gain: reader.vector(&names.ln_f_weight, d)?,
        shift: reader.vector(&names.ln_f_bias, d)?,
    };
    let bundle = ModelBundle {
        config,
        token_embedding,
        position_embedding,
        blocks,
        ln_f,
    };
    bundle.validate()?;
    Ok(bundle)
}

struct TensorReader<'a> {
    st: &'a SafeTensors<'a>,
    layout: WeightLayout,
}

impl TensorReader<'_> {
    fn fetch(&self, name: &str, expected: &[usize]) -> Result<Vec<f32>, ModelError> {
        let view = self
            .st
            .tensor(name)
            .map_err(|_| ModelError::MissingTensor(name.to_string()))?;
        if view.shape() != expected {
            return Err(ModelError::ShapeMismatch {
                name: name.to_string(),
                expected: expected.to_vec(),
                got: view.shape().to_vec(),
            });
        }
        let values = decode_f32(name, &view)?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteWeight(name.to_string()));
        }
        Ok(values)
    }

    fn vector(&self, name: &str, len: usize) -> Result<Array1<f32>, ModelError> {
        Ok(Array1::from_vec(self.fetch(name, &[len])?))
    }

    /// Embedding-style matrix, never transposed.
    fn matrix_raw(&self, name: &str, rows: usize, cols: usize) -> Result<Array2<f32>, ModelError> {
        let data = self.fetch(name, &[rows, cols])?;
        Ok(Array2::from_shape_vec((rows, cols), data).expect("length checked"))
    }

    /// Projection returned in `[in, out]` layout regardless of storage.
    fn projection(&self, name: &str, n_in: usize, n_out: usize) -> Result<Array2<f32>, ModelError> {
        match self.layout {
            WeightLayout::InOut => self.matrix_raw(name, n_in, n_out),
            WeightLayout::OutIn => {
                let stored = self.matrix_raw(name, n_out, n_in)?;
                Ok(stored.t().as_standard_layout().into_owned())
            }
        }
    }
}

fn decode_f32(name: &str, view: &TensorView<'_>) -> Result<Vec<f32>, ModelError> {
    let data = view.data();
    let out = match view.dtype() {
        Dtype::F32 => data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect(),
        Dtype::F16 => data
            .chunks_exact(2)
            .map(|c| half::f16::from_le_bytes([c[0], c[1]]).to_f32())
            .collect(),
        Dtype::BF16 => data
            .chunks_exact(2)
            .map(|c| half::bf16::from_le_bytes([c[0], c[1]]).to_f32())
            .collect(),
        Dtype::F64 => data
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")) as f32)
            .collect(),
        other => {
            return Err(ModelError::UnsupportedDtype {
                name: name.to_string(),
                dtype: format!("{other:?}"),
            });
        }
    };
    Ok(out)
}

/// Serialise a bundle as an `f32` safetensors payload using `names`.
///
/// Projections are written in `names.layout`; the output reloads through
/// [`load_model_from_bytes`] to an identical bundle.
pub fn serialize_model(bundle: &ModelBundle, names: &TensorNames) -> Result<Vec<u8>, ModelError> {
    let mut tensors: BTreeMap<String, (Vec<usize>, Vec<u8>)> = BTreeMap::new();
    let mut put_raw = |name: String, shape: Vec<usize>, values: Vec<f32>| {
        let bytes = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        tensors.insert(name, (shape, bytes));
    };
    let layout = names.layout;
    let projection = |w: &Array2<f32>| -> (Vec<usize>, Vec<f32>) {
        match layout {
            WeightLayout::InOut => (w.shape().to_vec(), w.iter().copied().collect()),
            WeightLayout::OutIn => (vec![w.ncols(), w.nrows()], w.t().iter().copied().collect()),
        }
    };
    let vec_of = |v: &Array1<f32>| (vec![v.len()], v.to_vec());

    let (shape, data) = (
        bundle.token_embedding.shape().to_vec(),
        bundle.token_embedding.iter().copied().collect(),
    );
    put_raw(names.token_embedding.clone(), shape, data);
    let (shape, data) = (
        bundle.position_embedding.shape().to_vec(),
        bundle.position_embedding.iter().copied().collect(),
    );
    put_raw(names.position_embedding.clone(), shape, data);
    let d = bundle.config.d_model;
    for (l, b) in bundle.blocks.iter().enumerate() {
        let name = |t: &str| layer_name(t, l);
        if names.is_split_qkv() {
            for (i, (wn, bn)) in names.split_qkv()?.into_iter().enumerate() {
                let w = b.w_qkv.slice(s![.., i * d..(i + 1) * d]).to_owned();
                {
                    let (shape, data) = projection(&w);
                    put_raw(name(wn), shape, data);
                }
                let bias = b.b_qkv.slice(s![i * d..(i + 1) * d]).to_owned();
                let (shape, data) = vec_of(&bias);
                put_raw(name(bn), shape, data);
            }
        } else {
            {
                let (shape, data) = projection(&b.w_qkv);
                put_raw(name(&names.attn_qkv_weight), shape, data);
            }
            let (shape, data) = vec_of(&b.b_qkv);
            put_raw(name(&names.attn_qkv_bias), shape, data);
        }
        {
            let (shape, data) = projection(&b.w_o);
            put_raw(name(&names.attn_out_weight), shape, data);
        }
        {
            let (shape, data) = projection(&b.w_in);
            put_raw(name(&names.mlp_in_weight), shape, data);
        }
        {
            let (shape, data) = projection(&b.w_out);
            put_raw(name(&names.mlp_out_weight), shape, data);
        }
        for (template, v) in [
            (&names.ln_1_weight, &b.ln_1.gain),
            (&names.ln_1_bias, &b.ln_1.shift),
            (&names.attn_out_bias, &b.b_o),
            (&names.ln_2_weight, &b.ln_2.gain),
            (&names.ln_2_bias, &b.ln_2.shift),
            (&names.mlp_in_bias, &b.b_in),
            (&names.mlp_out_bias, &b.b_out),
        ] {
            let (shape, data) = vec_of(v);
            put_raw(name(template), shape, data);
        }
    }
    let (shape, data) = vec_of(&bundle.ln_f.gain);
    put_raw(names.ln_f_weight.clone(), shape, data);
    let (shape, data) = vec_of(&bundle.ln_f.shift);
    put_raw(names.ln_f_bias.clone(), shape, data);

    let views = tensors
        .iter()
        .map(|(name, (shape, bytes))| {
            TensorView::new(Dtype::F32, shape.clone(), bytes)
                .map(|v| (name.clone(), v))
                .map_err(|e| ModelError::MalformedHeader(e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    safetensors::serialize(views, &None).map_err(|e| ModelError::MalformedHeader(e.to_string()))
}

/// Write `weights.safetensors`-style and config files for a bundle.
pub fn save_model(
    bundle: &ModelBundle,
    names: &TensorNames,
    weights_path: impl AsRef<Path>,
    config_path: impl AsRef<Path>,
) -> Result<(), ModelError> {
    let bytes = serialize_model(bundle, names)?;
    let weights_path = weights_path.as_ref();
    fs::write(weights_path, bytes).map_err(io_err(weights_path))?;
    let config_path = config_path.as_ref();
    let file = ModelConfigFile::new(&bundle.config, names.clone());
    fs::write(config_path, file.to_toml()).map_err(io_err(config_path))?;
    Ok(())
}

/// Load a GPT-2 style `encoder.json` vocabulary and `vocab.bpe` merge list.
pub fn load_tokenizer_tables(
    vocab_path: impl AsRef<Path>,
    merges_path: impl AsRef<Path>,
) -> Result<TokenizerTables, TokenizerError> {
    TokenizerTables::from_files(vocab_path.as_ref(), merges_path.as_ref())
}

#[cfg(test)]
mod tests {
    use super::synthetic::{random_gpt2, SyntheticScales};
    use super::*;

    fn tiny() -> ModelConfig {
        ModelConfig {
            n_layers: 2,
            n_heads: 2,
            d_model: 8,
            d_head: 4,
            d_mlp: 12,
            vocab_size: 20,
            max_positions: 16,
            layer_norm_eps: 1e-5,
        }
    }

    fn file_for(config: &ModelConfig, names: TensorNames) -> ModelConfigFile {
        ModelConfigFile::new(config, names)
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let bundle = random_gpt2(&tiny(), 3, &SyntheticScales::default());
        let names = TensorNames::default();
        let bytes = serialize_model(&bundle, &names).unwrap();
        let back = load_model_from_bytes(&bytes, &file_for(&bundle.config, names.clone())).unwrap();
        assert_eq!(back, bundle);
        assert_eq!(serialize_model(&back, &names).unwrap(), bytes);
    }

    #[test]
    fn split_qkv_and_out_in_layout_load_identically() {
        let bundle = random_gpt2(&tiny(), 4, &SyntheticScales::default());
        let names = TensorNames {
            layout: WeightLayout::OutIn,
            attn_q_weight: Some("blk.{layer}.q.w".into()),
            attn_q_bias: Some("blk.{layer}.q.b".into()),
            attn_k_weight: Some("blk.{layer}.k.w".into()),
            attn_k_bias: Some("blk.{layer}.k.b".into()),
            attn_v_weight: Some("blk.{layer}.v.w".into()),
            attn_v_bias: Some("blk.{layer}.v.b".into()),
            ..TensorNames::default()
        };
        let bytes = serialize_model(&bundle, &names).unwrap();
        let back = load_model_from_bytes(&bytes, &file_for(&bundle.config, names)).unwrap();
        assert_eq!(back, bundle);
    }

    #[test]
    fn renamed_tensor_is_missing() {
        let bundle = random_gpt2(&tiny(), 5, &SyntheticScales::default());
        let mut written = TensorNames::default();
        written.ln_f_bias = "final_norm.bias".into();
        let bytes = serialize_model(&bundle, &written).unwrap();
        let err = load_model_from_bytes(&bytes, &file_for(&bundle.config, TensorNames::default()))
            .unwrap_err();
        assert!(matches!(err, ModelError::MissingTensor(name) if name == "ln_f.bias"));
    }

    #[test]
    fn wrong_shape_is_reported() {
        let bundle = random_gpt2(&tiny(), 6, &SyntheticScales::default());
        let bytes = serialize_model(&bundle, &TensorNames::default()).unwrap();
        let mut config = bundle.config.clone();
        config.d_mlp = 16;
        let err =
            load_model_from_bytes(&bytes, &file_for(&config, TensorNames::default())).unwrap_err();
        assert!(matches!(err, ModelError::ShapeMismatch { .. }));
    }

    #[test]
    fn non_finite_weight_rejected() {
        let mut bundle = random_gpt2(&tiny(), 7, &SyntheticScales::default());
        bundle.blocks[1].b_in[3] = f32::NAN;
        let bytes = serialize_model(&bundle, &TensorNames::default()).unwrap();
        let err = load_model_from_bytes(&bytes, &file_for(&bundle.config, TensorNames::default()))
            .unwrap_err();
        assert!(matches!(err, ModelError::NonFiniteWeight(name) if name == "h.1.mlp.c_fc.bias"));
    }

    #[test]
    fn garbage_header_is_malformed() {
        let mut bytes = 1_000_000u64.to_le_bytes().to_vec();
        bytes.extend_from_slice(b"{not json");
        let err =
            load_model_from_bytes(&bytes, &file_for(&tiny(), TensorNames::default())).unwrap_err();
        assert!(matches!(err, ModelError::MalformedHeader(_)));
    }

    #[test]
    fn half_precision_is_upconverted() {
        let value = half::f16::from_f32(0.375);
        let bf = half::bf16::from_f32(-1.5);
        let bytes_f16: Vec<u8> = std::iter::repeat(value.to_le_bytes())
            .take(3)
            .flatten()
            .collect();
        let bytes_bf16: Vec<u8> = std::iter::repeat(bf.to_le_bytes())
            .take(3)
            .flatten()
            .collect();
        let v16 = TensorView::new(Dtype::F16, vec![3], &bytes_f16).unwrap();
        let vbf = TensorView::new(Dtype::BF16, vec![3], &bytes_bf16).unwrap();
        assert_eq!(decode_f32("x", &v16).unwrap(), vec![0.375; 3]);
        assert_eq!(decode_f32("y", &vbf).unwrap(), vec![-1.5; 3]);
    }

    #[test]
    fn weight_tying_views_share_rows() {
        let bundle = random_gpt2(&tiny(), 8, &SyntheticScales::default());
        let unembed = bundle.unembedding();
        for t in 0..bundle.config.vocab_size {
            assert_eq!(unembed.column(t), bundle.token_embedding.row(t));
            assert_eq!(
                bundle.unembedding_row(t as u32),
                bundle.token_embedding.row(t)
            );
        }
    }
}
