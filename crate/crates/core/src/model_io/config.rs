use serde::{Deserialize, Serialize};

use super::ModelError;

/// Architecture hyper-parameters of a GPT-2 style decoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
    pub d_head: usize,
    pub d_mlp: usize,
    pub vocab_size: usize,
    pub max_positions: usize,
    pub layer_norm_eps: f32,
}

impl ModelConfig {
    /// The public GPT-2 Small (124M) architecture.
    pub fn gpt2_small() -> Self {
        Self {
            n_layers: 12,
            n_heads: 12,
            d_model: 768,
            d_head: 64,
            d_mlp: 3072,
            vocab_size: 50257,
            max_positions: 1024,
            layer_norm_eps: 1e-5,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let counts = [
            ("n_layers", self.n_layers),
            ("n_heads", self.n_heads),
            ("d_model", self.d_model),
            ("d_head", self.d_head),
            ("d_mlp", self.d_mlp),
            ("vocab_size", self.vocab_size),
            ("max_positions", self.max_positions),
        ];
        for (name, value) in counts {
            if value == 0 {
                return Err(ModelError::InvalidConfig(format!(
                    "{name} must be positive"
                )));
            }
        }
        if self.vocab_size < 2 {
            return Err(ModelError::InvalidConfig(
                "vocab_size must be at least 2".into(),
            ));
        }
        if self.n_heads * self.d_head != self.d_model {
            return Err(ModelError::InvalidConfig(format!(
                "n_heads ({}) * d_head ({}) != d_model ({})",
                self.n_heads, self.d_head, self.d_model
            )));
        }
        if !(self.layer_norm_eps.is_finite() && self.layer_norm_eps > 0.0) {
            return Err(ModelError::InvalidConfig(
                "layer_norm_eps must be a small positive number".into(),
            ));
        }
        Ok(())
    }
}

/// How 2-D projection matrices are stored on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightLayout {
    /// `[in_features, out_features]`, the GPT-2 `Conv1D` convention.
    #[default]
    InOut,
    /// `[out_features, in_features]`, the `nn.Linear` convention.
    OutIn,
}

/// Checkpoint tensor names. `{layer}` is replaced by the block index.
///
/// Attention projections are either one fused `attn_qkv_*` tensor (columns
/// ordered q | k | v) or three separate `attn_{q,k,v}_*` tensors; setting
/// `attn_q_weight` selects the split form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TensorNames {
    pub layout: WeightLayout,
    pub token_embedding: String,
    pub position_embedding: String,
    pub ln_1_weight: String,
    pub ln_1_bias: String,
    pub attn_qkv_weight: String,
    pub attn_qkv_bias: String,
    pub attn_q_weight: Option<String>,
    pub attn_q_bias: Option<String>,
    pub attn_k_weight: Option<String>,
    pub attn_k_bias: Option<String>,
    pub attn_v_weight: Option<String>,
    pub attn_v_bias: Option<String>,
    pub attn_out_weight: String,
    pub attn_out_bias: String,
    pub ln_2_weight: String,
    pub ln_2_bias: String,
    pub mlp_in_weight: String,
    pub mlp_in_bias: String,
    pub mlp_out_weight: String,
    pub mlp_out_bias: String,
    pub ln_f_weight: String,
    pub ln_f_bias: String,
}

impl Default for TensorNames {
    /// Names used by the published GPT-2 safetensors checkpoints.
    fn default() -> Self {
        Self {
            layout: WeightLayout::InOut,
            token_embedding: "wte.weight".into(),
            position_embedding: "wpe.weight".into(),
            ln_1_weight: "h.{layer}.ln_1.weight".into(),
            ln_1_bias: "h.{layer}.ln_1.bias".into(),
            attn_qkv_weight: "h.{layer}.attn.c_attn.weight".into(),
            attn_qkv_bias: "h.{layer}.attn.c_attn.bias".into(),
            attn_q_weight: None,
            attn_q_bias: None,
            attn_k_weight: None,
            attn_k_bias: None,
            attn_v_weight: None,
            attn_v_bias: None,
            attn_out_weight: "h.{layer}.attn.c_proj.weight".into(),
            attn_out_bias: "h.{layer}.attn.c_proj.bias".into(),
            ln_2_weight: "h.{layer}.ln_2.weight".into(),
            ln_2_bias: "h.{layer}.ln_2.bias".into(),
            mlp_in_weight: "h.{layer}.mlp.c_fc.weight".into(),
            mlp_in_bias: "h.{layer}.mlp.c_fc.bias".into(),
            mlp_out_weight: "h.{layer}.mlp.c_proj.weight".into(),
            mlp_out_bias: "h.{layer}.mlp.c_proj.bias".into(),
            ln_f_weight: "ln_f.weight".into(),
            ln_f_bias: "ln_f.bias".into(),
        }
    }
}

impl TensorNames {
    pub fn is_split_qkv(&self) -> bool {
        self.attn_q_weight.is_some()
    }

    pub(crate) fn split_qkv(&self) -> Result<[(&str, &str); 3], ModelError> {
        fn get<'a>(field: &'a Option<String>, key: &str) -> Result<&'a str, ModelError> {
            field.as_deref().ok_or_else(|| {
                ModelError::InvalidConfig(format!("split attention projections need `{key}`"))
            })
        }
        Ok([
            (
                get(&self.attn_q_weight, "attn_q_weight")?,
                get(&self.attn_q_bias, "attn_q_bias")?,
            ),
            (
                get(&self.attn_k_weight, "attn_k_weight")?,
                get(&self.attn_k_bias, "attn_k_bias")?,
            ),
            (
                get(&self.attn_v_weight, "attn_v_weight")?,
                get(&self.attn_v_bias, "attn_v_bias")?,
            ),
        ])
    }
}

pub(crate) fn layer_name(template: &str, layer: usize) -> String {
    template.replace("{layer}", &layer.to_string())
}

/// On-disk model config: `key = value` architecture fields plus a
/// `[tensors]` table. `d_head` may be omitted and is then derived.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfigFile {
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_head: Option<usize>,
    pub d_mlp: usize,
    pub vocab_size: usize,
    pub max_positions: usize,
    #[serde(default = "default_eps")]
    pub layer_norm_eps: f32,
    #[serde(default)]
    pub tensors: TensorNames,
}

fn default_eps() -> f32 {
    1e-5
}

impl ModelConfigFile {
    pub fn parse(text: &str) -> Result<Self, ModelError> {
        toml::from_str(text).map_err(|e| ModelError::InvalidConfig(e.to_string()))
    }

    pub fn new(config: &ModelConfig, tensors: TensorNames) -> Self {
        Self {
            n_layers: config.n_layers,
            n_heads: config.n_heads,
            d_model: config.d_model,
            d_head: Some(config.d_head),
            d_mlp: config.d_mlp,
            vocab_size: config.vocab_size,
            max_positions: config.max_positions,
            layer_norm_eps: config.layer_norm_eps,
            tensors,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("model config serialises to TOML")
    }

    /// Resolve `d_head` and validate the architecture.
    pub fn model_config(&self) -> Result<ModelConfig, ModelError> {
        if self.n_heads == 0 {
            return Err(ModelError::InvalidConfig("n_heads must be positive".into()));
        }
        if self.d_model % self.n_heads != 0 {
            return Err(ModelError::InvalidConfig(format!(
                "d_model ({}) is not divisible by n_heads ({})",
                self.d_model, self.n_heads
            )));
        }
        let config = ModelConfig {
            n_layers: self.n_layers,
            n_heads: self.n_heads,
            d_model: self.d_model,
            d_head: self.d_head.unwrap_or(self.d_model / self.n_heads),
            d_mlp: self.d_mlp,
            vocab_size: self.vocab_size,
            max_positions: self.max_positions,
            layer_norm_eps: self.layer_norm_eps,
        };
        config.validate()?;
        Ok(config)
    }
}
