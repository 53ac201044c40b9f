//! Run configuration: a TOML file whose relative paths resolve against the
//! file's own directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::explainer::ScoreFormula;
use crate::neuron_scout::CongruenceMetric;
use crate::prompt_miner::MineOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// Label used in reports.
    #[serde(default = "default_model_name")]
    pub name: String,
    pub weights: PathBuf,
    pub config: PathBuf,
    /// `encoder.json`; with `merges` absent too, a plain byte-level tokenizer
    /// is used.
    #[serde(default)]
    pub vocab: Option<PathBuf>,
    #[serde(default)]
    pub merges: Option<PathBuf>,
}

fn default_model_name() -> String {
    "model".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    pub path: PathBuf,
    /// Read at most this many documents.
    #[serde(default)]
    pub max_documents: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateSet {
    /// Tokens that are a whole word with an optional leading space.
    #[default]
    Words,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoutSection {
    pub layers: Vec<usize>,
    #[serde(default = "d_top_k")]
    pub top_k_neurons: usize,
    /// Keep only the best this many neurons over all scanned layers.
    #[serde(default)]
    pub max_neurons: Option<usize>,
    #[serde(default)]
    pub metric: CongruenceMetric,
    #[serde(default)]
    pub candidates: CandidateSet,
    #[serde(default = "d_runners_up")]
    pub runners_up: usize,
    /// Also write the per-layer best-neuron histogram (scores every layer).
    #[serde(default)]
    pub layer_histogram: bool,
}

fn d_top_k() -> usize {
    40
}
fn d_runners_up() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MineSection {
    #[serde(default = "d_mine")]
    pub n_mine_prompts: usize,
    #[serde(default = "d_test")]
    pub n_test_prompts: usize,
    #[serde(default = "d_window")]
    pub window_tokens: usize,
    #[serde(default = "d_min_tokens")]
    pub min_tokens: usize,
    #[serde(default = "d_max_prompt")]
    pub max_prompt_tokens: usize,
    #[serde(default = "d_retention")]
    pub retention: f64,
}

fn d_mine() -> usize {
    20
}
fn d_test() -> usize {
    10
}
fn d_window() -> usize {
    128
}
fn d_min_tokens() -> usize {
    5
}
fn d_max_prompt() -> usize {
    100
}
fn d_retention() -> f64 {
    0.8
}

impl Default for MineSection {
    fn default() -> Self {
        Self {
            n_mine_prompts: d_mine(),
            n_test_prompts: d_test(),
            window_tokens: d_window(),
            min_tokens: d_min_tokens(),
            max_prompt_tokens: d_max_prompt(),
            retention: d_retention(),
        }
    }
}

impl MineSection {
    pub fn options(&self) -> MineOptions {
        MineOptions {
            window_tokens: self.window_tokens,
            min_tokens: self.min_tokens,
            max_prompt_tokens: self.max_prompt_tokens,
            retention: self.retention,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeSection {
    #[serde(default = "d_band")]
    pub band: [f64; 2],
    #[serde(default = "d_sigma")]
    pub sigma: f64,
}

fn d_band() -> [f64; 2] {
    [0.25, 0.75]
}
fn d_sigma() -> f64 {
    2.0
}

impl Default for AttributeSection {
    fn default() -> Self {
        Self { band: d_band(), sigma: d_sigma() }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Stub,
    Http,
    Replay,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StubClassifier {
    /// Answers with the ground-truth label of each test prompt.
    #[default]
    Echo,
    /// Seeded fair coin.
    Coin,
    Yes,
    No,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StubSection {
    /// Canned explanation; `{token}` is replaced with the neuron's token.
    #[serde(default = "d_stub_text")]
    pub explanation: String,
    #[serde(default)]
    pub classifier: StubClassifier,
}

fn d_stub_text() -> String {
    "contains a phrase that usually comes right before \"{token}\".".into()
}

impl Default for StubSection {
    fn default() -> Self {
        Self { explanation: d_stub_text(), classifier: StubClassifier::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplainSection {
    #[serde(default)]
    pub backend: BackendKind,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default = "d_chat_model")]
    pub model: String,
    /// Recorded transcript for the replay backend.
    #[serde(default)]
    pub replay: Option<PathBuf>,
    /// Cap on examples per explanation request; defaults to the largest
    /// prompt count in use.
    #[serde(default)]
    pub max_examples: Option<usize>,
    #[serde(default = "d_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "d_timeout")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub formula: ScoreFormula,
    #[serde(default)]
    pub stub: StubSection,
}

fn d_chat_model() -> String {
    "gpt-4".into()
}
fn d_in_flight() -> usize {
    4
}
fn d_timeout() -> u64 {
    120
}

impl Default for ExplainSection {
    fn default() -> Self {
        Self {
            backend: BackendKind::default(),
            endpoint: None,
            model: d_chat_model(),
            replay: None,
            max_examples: None,
            max_in_flight: d_in_flight(),
            timeout_secs: d_timeout(),
            formula: ScoreFormula::default(),
            stub: StubSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationKind {
    #[default]
    Zero,
    /// Replace the head's write with its mean over the neuron's mine prompts.
    Mean,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblateSection {
    #[serde(default)]
    pub mode: AblationKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSection {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "d_per_layer")]
    pub per_layer: usize,
    /// Defaults to the scouted layers.
    #[serde(default)]
    pub layers: Option<Vec<usize>>,
}

fn d_per_layer() -> usize {
    20
}

impl Default for BaselineSection {
    fn default() -> Self {
        Self { enabled: false, per_layer: d_per_layer(), layers: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Extra explanation prompt counts to compare with `n_mine_prompts`.
    #[serde(default)]
    pub prompt_counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub run_dir: Option<PathBuf>,
    pub model: ModelSection,
    pub corpus: CorpusSection,
    pub scout: ScoutSection,
    #[serde(default)]
    pub mine: MineSection,
    #[serde(default)]
    pub attribute: AttributeSection,
    #[serde(default)]
    pub explain: ExplainSection,
    #[serde(default)]
    pub ablate: AblateSection,
    #[serde(default)]
    pub baseline: BaselineSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

/// Where a configured value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueSource {
    /// Set in the config file.
    User,
    /// Default taken from the published method.
    Method,
    /// Default chosen for this tool.
    Plumbing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Setting {
    pub key: String,
    pub value: serde_json::Value,
    pub source: ValueSource,
}

const DEFAULT_SOURCES: &[(&str, ValueSource)] = &[
    ("seed", ValueSource::Plumbing),
    ("scout.top_k_neurons", ValueSource::Method),
    ("scout.runners_up", ValueSource::Plumbing),
    ("mine.n_mine_prompts", ValueSource::Method),
    ("mine.n_test_prompts", ValueSource::Method),
    ("mine.window_tokens", ValueSource::Plumbing),
    ("mine.min_tokens", ValueSource::Plumbing),
    ("mine.max_prompt_tokens", ValueSource::Method),
    ("mine.retention", ValueSource::Method),
    ("attribute.band", ValueSource::Method),
    ("attribute.sigma", ValueSource::Method),
    ("explain.max_in_flight", ValueSource::Plumbing),
    ("explain.timeout_secs", ValueSource::Plumbing),
    ("explain.explanation_max_tokens", ValueSource::Plumbing),
    ("explain.classification_max_tokens", ValueSource::Plumbing),
    ("explain.temperature", ValueSource::Plumbing),
    ("baseline.per_layer", ValueSource::Method),
    ("analytics.histogram_bin_width", ValueSource::Plumbing),
];

fn lookup<'a>(value: &'a toml::Value, key: &str) -> Option<&'a toml::Value> {
    key.split('.').try_fold(value, |v, part| v.get(part))
}

impl RunConfig {
    /// Parse `text`, resolving relative paths against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<(Self, Vec<Setting>), PipelineError> {
        let raw: toml::Value = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        let mut config: RunConfig = raw.clone().try_into().map_err(|e: toml::de::Error| PipelineError::Config(e.to_string()))?;
        config.resolve_paths(base_dir);
        config.validate()?;
        let settings = config.settings(&raw);
        Ok((config, settings))
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<Setting>), PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.model.weights);
        fix(&mut self.model.config);
        self.model.vocab.as_mut().map(fix);
        self.model.merges.as_mut().map(fix);
        fix(&mut self.corpus.path);
        self.explain.replay.as_mut().map(fix);
        self.run_dir.as_mut().map(fix);
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |msg: String| Err(PipelineError::Config(msg));
        if self.scout.layers.is_empty() {
            return bad("scout.layers is empty".into());
        }
        if self.model.vocab.is_some() != self.model.merges.is_some() {
            return bad("model.vocab and model.merges must be given together".into());
        }
        let counts = [
            ("scout.top_k_neurons", self.scout.top_k_neurons),
            ("mine.n_mine_prompts", self.mine.n_mine_prompts),
            ("mine.n_test_prompts", self.mine.n_test_prompts),
            ("mine.window_tokens", self.mine.window_tokens),
            ("mine.min_tokens", self.mine.min_tokens),
            ("mine.max_prompt_tokens", self.mine.max_prompt_tokens),
            ("explain.max_in_flight", self.explain.max_in_flight),
        ];
        for (key, v) in counts {
            if v == 0 {
                return bad(format!("{key} must be positive"));
            }
        }
        if self.scout.max_neurons == Some(0) {
            return bad("scout.max_neurons must be positive".into());
        }
        if self.sweep.prompt_counts.contains(&0) {
            return bad("sweep.prompt_counts must be positive".into());
        }
        if self.baseline.enabled && self.baseline.per_layer == 0 {
            return bad("baseline.per_layer must be positive".into());
        }
        let [lo, hi] = self.attribute.band;
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return bad(format!("attribute.band [{lo}, {hi}] must satisfy 0 <= low < high <= 1"));
        }
        if !(self.attribute.sigma.is_finite() && self.attribute.sigma >= 0.0) {
            return bad("attribute.sigma must be finite and non-negative".into());
        }
        if !(self.mine.retention > 0.0 && self.mine.retention <= 1.0) {
            return bad("mine.retention must be in (0, 1]".into());
        }
        match self.explain.backend {
            BackendKind::Http if self.explain.endpoint.is_none() => bad("explain.endpoint is required for the http backend".into()),
            BackendKind::Replay if self.explain.replay.is_none() => bad("explain.replay is required for the replay backend".into()),
            _ => Ok(()),
        }?;
        if let Some(cap) = self.explain.max_examples {
            if cap < self.max_prompt_count() {
                return bad(format!("explain.max_examples {cap} is below the largest prompt count {}", self.max_prompt_count()));
            }
        }
        Ok(())
    }

    /// `n_mine_prompts` and every sweep count, ascending and de-duplicated.
    pub fn prompt_counts(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.sweep.prompt_counts.iter().copied().chain([self.mine.n_mine_prompts]).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn max_prompt_count(&self) -> usize {
        *self.prompt_counts().last().expect("n_mine_prompts is always present")
    }

    pub fn baseline_layers(&self) -> &[usize] {
        self.baseline.layers.as_deref().unwrap_or(&self.scout.layers)
    }

    fn settings(&self, raw: &toml::Value) -> Vec<Setting> {
        let resolved = serde_json::to_value(self).expect("config serializes");
        let fixed = serde_json::json!({
            "explain": {
                "explanation_max_tokens": 256,
                "classification_max_tokens": 8,
                "temperature": 0.0,
            },
            "analytics": { "histogram_bin_width": crate::analytics::SCORE_BIN_WIDTH },
        });
        DEFAULT_SOURCES
            .iter()
            .map(|&(key, default_source)| {
                let value = key
                    .split('.')
                    .try_fold(&resolved, |v, part| v.get(part))
                    .or_else(|| key.split('.').try_fold(&fixed, |v, part| v.get(part)))
                    .cloned()
                    .unwrap_or(serde_json::Value::Null);
                let source = if lookup(raw, key).is_some() { ValueSource::User } else { default_source };
                Setting { key: key.to_owned(), value, source }
            })
            .collect()
    }
}
