//! The end-to-end run as resumable stages over a run directory.
//!
//! Stages exchange data only through files. The manifest records, per stage,
//! a fingerprint of everything the stage read and a content hash of every
//! file it wrote. A stage refuses to run while an upstream stage is missing,
//! its outputs were edited, or its inputs changed since it ran; rerunning a
//! stage whose inputs are unchanged is a no-op.

pub mod artifacts;
pub mod config;
pub mod manifest;
mod stages;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, OnceLock};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ablation_lab::AblationError;
use crate::analytics::StatsError;
use crate::explainer::ExplainError;
use crate::head_attribution::AttributionError;
use crate::model_io::{load_model, ModelBundle, ModelConfig, ModelError};
use crate::neuron_scout::ScoutError;
use crate::prompt_miner::MinerError;
use crate::tokenizer::{Tokenizer, TokenizerError, TokenizerTables};
use crate::transformer::{ForwardError, NeuronHandle};

pub use config::{RunConfig, Setting, ValueSource};
pub use manifest::{RunManifest, StageRecord};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },
    #[error("run directory is in use (remove {0} if no other run is active)")]
    Locked(PathBuf),
    #[error("stage {stage} needs {upstream} to complete first")]
    UpstreamIncomplete { stage: Stage, upstream: Stage },
    #[error("stage {stage}: {detail}")]
    HashMismatch { stage: Stage, detail: String },
    #[error("layer {layer} has {available} eligible neurons, {needed} requested")]
    InsufficientNeurons { layer: usize, needed: usize, available: usize },
    #[error("cannot build chat backend: {0}")]
    Backend(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tokenizer(#[from] TokenizerError),
    #[error(transparent)]
    Forward(#[from] ForwardError),
    #[error(transparent)]
    Scout(#[from] ScoutError),
    #[error(transparent)]
    Miner(#[from] MinerError),
    #[error(transparent)]
    Attribution(#[from] AttributionError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error(transparent)]
    Ablation(#[from] AblationError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

impl PipelineError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_owned(), source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Scout,
    Mine,
    Attribute,
    Explain,
    Score,
    Ablate,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 7] =
        [Stage::Scout, Stage::Mine, Stage::Attribute, Stage::Explain, Stage::Score, Stage::Ablate, Stage::Report];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Scout => "scout",
            Stage::Mine => "mine",
            Stage::Attribute => "attribute",
            Stage::Explain => "explain",
            Stage::Score => "score",
            Stage::Ablate => "ablate",
            Stage::Report => "report",
        }
    }

    /// Stages whose outputs this one reads directly.
    pub fn inputs(self) -> &'static [Stage] {
        match self {
            Stage::Scout => &[],
            Stage::Mine => &[Stage::Scout],
            Stage::Attribute => &[Stage::Mine],
            Stage::Explain => &[Stage::Attribute],
            Stage::Score => &[Stage::Explain, Stage::Attribute],
            Stage::Ablate => &[Stage::Attribute],
            Stage::Report => &[Stage::Score, Stage::Ablate],
        }
    }

    /// Every stage this one depends on, directly or not, in run order.
    pub fn upstream(self) -> Vec<Stage> {
        let mut seen = BTreeSet::new();
        let mut todo = self.inputs().to_vec();
        while let Some(s) = todo.pop() {
            if seen.insert(s) {
                todo.extend_from_slice(s.inputs());
            }
        }
        seen.into_iter().collect()
    }

    pub fn downstream(self) -> Vec<Stage> {
        Stage::ALL.into_iter().filter(|s| s.upstream().contains(&self)).collect()
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL.into_iter().find(|st| st.name() == s).ok_or_else(|| format!("unknown stage `{s}`"))
    }
}

/// Sample `per_layer` neurons uniformly from each of `layers`, skipping
/// `exclude`. Deterministic in `seed`; each layer's picks are sorted.
pub fn random_baseline(
    config: &ModelConfig,
    layers: &[usize],
    per_layer: usize,
    exclude: &BTreeSet<NeuronHandle>,
    seed: u64,
) -> Result<Vec<NeuronHandle>, PipelineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for &layer in layers {
        if layer >= config.n_layers {
            return Err(PipelineError::Scout(ScoutError::LayerOutOfRange(layer)));
        }
        let pool: Vec<usize> =
            (0..config.d_mlp).filter(|&j| !exclude.contains(&NeuronHandle::new(layer, j))).collect();
        if pool.len() < per_layer {
            return Err(PipelineError::InsufficientNeurons { layer, needed: per_layer, available: pool.len() });
        }
        let mut picked: Vec<usize> = sample(&mut rng, pool.len(), per_layer).into_iter().map(|i| pool[i]).collect();
        picked.sort_unstable();
        out.extend(picked.into_iter().map(|j| NeuronHandle::new(layer, j)));
    }
    Ok(out)
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Rerun a stage whose inputs changed even though later stages were
    /// built from its old outputs; those stages are marked incomplete.
    pub force: bool,
    pub stub_backend: bool,
    pub seed: Option<u64>,
    /// Another run directory whose scores serve as the comparison baseline.
    pub baseline_run: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageOutcome {
    Ran,
    UpToDate,
}

pub struct Pipeline {
    config: RunConfig,
    run_dir: PathBuf,
    options: RunOptions,
    manifest: RunManifest,
    model: OnceLock<ModelBundle>,
    tokenizer: OnceLock<Tokenizer>,
    file_hashes: Mutex<BTreeMap<PathBuf, String>>,
    _lock: manifest::RunLock,
}

/// `<config dir>/runs/<config stem>` unless the config names a run directory.
pub fn default_run_dir(config_path: &Path, config: &RunConfig) -> PathBuf {
    config.run_dir.clone().unwrap_or_else(|| {
        let stem = config_path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
        config_path.parent().unwrap_or(Path::new(".")).join("runs").join(stem)
    })
}

impl Pipeline {
    pub fn open(
        mut config: RunConfig,
        settings: Vec<Setting>,
        run_dir: impl Into<PathBuf>,
        options: RunOptions,
    ) -> Result<Self, PipelineError> {
        if options.stub_backend {
            config.explain.backend = config::BackendKind::Stub;
        }
        if let Some(seed) = options.seed {
            config.seed = seed;
        }
        config.validate()?;
        let run_dir = run_dir.into();
        let lock = manifest::RunLock::acquire(&run_dir)?;
        let snapshot = serde_json::to_value(&config).expect("config serializes");
        let manifest = match RunManifest::load(&run_dir)? {
            Some(mut m) => {
                m.settings = settings;
                m.config = snapshot;
                m
            }
            None => RunManifest::new(snapshot, settings),
        };
        manifest.save(&run_dir)?;
        Ok(Self {
            config,
            run_dir,
            options,
            manifest,
            model: OnceLock::new(),
            tokenizer: OnceLock::new(),
            file_hashes: Default::default(),
            _lock: lock,
        })
    }

    /// Load a config file and open its run directory.
    pub fn from_config_file(
        config_path: &Path,
        run_dir: Option<PathBuf>,
        options: RunOptions,
    ) -> Result<Self, PipelineError> {
        let (config, settings) = RunConfig::load(config_path)?;
        let dir = run_dir.unwrap_or_else(|| default_run_dir(config_path, &config));
        Self::open(config, settings, dir, options)
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn run_dir(&self) -> &Path {
        &self.run_dir
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    pub(crate) fn model(&self) -> Result<&ModelBundle, PipelineError> {
        if let Some(m) = self.model.get() {
            return Ok(m);
        }
        let m = load_model(&self.config.model.weights, &self.config.model.config)?;
        Ok(self.model.get_or_init(|| m))
    }

    pub(crate) fn tokenizer(&self) -> Result<&Tokenizer, PipelineError> {
        if let Some(t) = self.tokenizer.get() {
            return Ok(t);
        }
        let tables = match (&self.config.model.vocab, &self.config.model.merges) {
            (Some(v), Some(m)) => TokenizerTables::from_files(v, m)?,
            _ => TokenizerTables::byte_level(),
        };
        Ok(self.tokenizer.get_or_init(|| Tokenizer::new(tables)))
    }

    fn external_hash(&self, path: &Path) -> Result<String, PipelineError> {
        if let Some(h) = self.file_hashes.lock().expect("hash cache").get(path) {
            return Ok(h.clone());
        }
        let h = manifest::hash_file(path)?;
        self.file_hashes.lock().expect("hash cache").insert(path.to_owned(), h.clone());
        Ok(h)
    }

    /// Everything `stage` reads, hashed.
    fn fingerprint(&self, stage: Stage) -> Result<String, PipelineError> {
        let c = &self.config;
        let mut parts: BTreeMap<String, serde_json::Value> = BTreeMap::new();
        let mut put = |k: &str, v: serde_json::Value| {
            parts.insert(k.to_owned(), v);
        };
        match stage {
            Stage::Scout => {
                put("model.weights", self.external_hash(&c.model.weights)?.into());
                put("model.config", self.external_hash(&c.model.config)?.into());
                if let (Some(v), Some(m)) = (&c.model.vocab, &c.model.merges) {
                    put("model.vocab", self.external_hash(v)?.into());
                    put("model.merges", self.external_hash(m)?.into());
                }
                put("scout", json(&c.scout));
                put("baseline", json(&c.baseline));
                if c.baseline.enabled {
                    put("seed", c.seed.into());
                }
            }
            Stage::Mine => {
                put("corpus", self.external_hash(&c.corpus.path)?.into());
                put("corpus.max_documents", json(&c.corpus.max_documents));
                put("mine", json(&c.mine));
                put("max_prompt_count", c.max_prompt_count().into());
            }
            Stage::Attribute => {
                put("attribute", json(&c.attribute));
                put("prompt_counts", json(&c.prompt_counts()));
            }
            Stage::Explain => {
                put("backend", json(&c.explain.backend));
                put("endpoint", json(&c.explain.endpoint));
                put("chat_model", c.explain.model.clone().into());
                put("max_examples", json(&c.explain.max_examples));
                put("stub.explanation", c.explain.stub.explanation.clone().into());
                if let Some(replay) = &c.explain.replay {
                    put("replay", self.external_hash(replay)?.into());
                }
            }
            Stage::Score => {
                put("explain", json(&c.explain));
                put("seed", c.seed.into());
                if let Some(replay) = &c.explain.replay {
                    put("replay", self.external_hash(replay)?.into());
                }
            }
            Stage::Ablate => put("ablate", json(&c.ablate)),
            Stage::Report => {
                put("model.name", c.model.name.clone().into());
                if let Some(dir) = &self.options.baseline_run {
                    put("baseline_run", self.external_hash(&dir.join("scores.json"))?.into());
                }
            }
        }
        for &up in stage.inputs() {
            let rec = self
                .manifest
                .record(up)
                .ok_or(PipelineError::UpstreamIncomplete { stage, upstream: up })?;
            parts.insert(format!("stage.{up}"), serde_json::to_value(&rec.outputs).expect("map serializes"));
        }
        Ok(manifest::sha256_hex(&serde_json::to_vec(&parts).expect("map serializes")))
    }

    fn outputs_intact(&self, record: &StageRecord) -> Result<Option<String>, PipelineError> {
        for (rel, hash) in &record.outputs {
            let path = self.run_dir.join(rel);
            if !path.exists() {
                return Ok(Some(format!("output {rel} is missing")));
            }
            if &manifest::hash_file(&path)? != hash {
                return Ok(Some(format!("output {rel} was modified")));
            }
        }
        Ok(None)
    }

    fn verify_upstream(&self, stage: Stage) -> Result<(), PipelineError> {
        for up in stage.upstream() {
            let rec = self.manifest.record(up).ok_or(PipelineError::UpstreamIncomplete { stage, upstream: up })?;
            if let Some(detail) = self.outputs_intact(rec)? {
                return Err(PipelineError::HashMismatch { stage: up, detail: format!("{detail}; rerun {up}") });
            }
            if self.fingerprint(up)? != rec.input_fingerprint {
                return Err(PipelineError::HashMismatch {
                    stage: up,
                    detail: format!("inputs changed since {up} ran; rerun {up} (with --force to invalidate later stages)"),
                });
            }
        }
        Ok(())
    }

    /// Run one stage if anything it depends on changed.
    pub fn run_stage(&mut self, stage: Stage) -> Result<StageOutcome, PipelineError> {
        self.verify_upstream(stage)?;
        let fingerprint = self.fingerprint(stage)?;
        if let Some(rec) = self.manifest.record(stage) {
            let fresh = rec.input_fingerprint == fingerprint;
            if fresh && self.outputs_intact(rec)?.is_none() {
                tracing::info!(%stage, "up to date");
                return Ok(StageOutcome::UpToDate);
            }
            let built: Vec<String> = stage
                .downstream()
                .into_iter()
                .filter(|d| self.manifest.record(*d).is_some())
                .map(|d| d.to_string())
                .collect();
            if !fresh && !built.is_empty() && !self.options.force {
                return Err(PipelineError::HashMismatch {
                    stage,
                    detail: format!(
                        "inputs changed but {} were built from the previous outputs; rerun with --force to invalidate them",
                        built.join(", ")
                    ),
                });
            }
        }
        if let Some(old) = self.manifest.stages.remove(&stage) {
            for rel in old.outputs.keys() {
                let _ = std::fs::remove_file(self.run_dir.join(rel));
            }
        }
        if self.options.force {
            for d in stage.downstream() {
                if let Some(rec) = self.manifest.stages.get_mut(&d) {
                    rec.complete = false;
                }
            }
        }
        self.manifest.save(&self.run_dir)?;

        tracing::info!(%stage, "running");
        let written = self.execute(stage)?;
        let mut outputs = BTreeMap::new();
        for rel in written {
            let hash = manifest::hash_file(&self.run_dir.join(&rel))?;
            outputs.insert(rel, hash);
        }
        self.manifest.stages.insert(stage, StageRecord { complete: true, input_fingerprint: fingerprint, outputs });
        self.manifest.save(&self.run_dir)?;
        Ok(StageOutcome::Ran)
    }

    /// Every stage in order.
    pub fn run_all(&mut self) -> Result<Vec<(Stage, StageOutcome)>, PipelineError> {
        Stage::ALL.into_iter().map(|s| self.run_stage(s).map(|o| (s, o))).collect()
    }

    fn execute(&self, stage: Stage) -> Result<Vec<String>, PipelineError> {
        match stage {
            Stage::Scout => self.scout(),
            Stage::Mine => self.mine(),
            Stage::Attribute => self.attribute(),
            Stage::Explain => self.explain(),
            Stage::Score => self.score(),
            Stage::Ablate => self.ablate(),
            Stage::Report => self.report(),
        }
    }
}

fn json<T: Serialize + ?Sized>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).expect("config value serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_graph() {
        assert_eq!(Stage::Report.upstream(), vec![Stage::Scout, Stage::Mine, Stage::Attribute, Stage::Explain, Stage::Score, Stage::Ablate]);
        assert_eq!(Stage::Mine.downstream(), vec![Stage::Attribute, Stage::Explain, Stage::Score, Stage::Ablate, Stage::Report]);
        assert_eq!(Stage::Ablate.downstream(), vec![Stage::Report]);
        assert!(Stage::Scout.upstream().is_empty());
        assert_eq!("score".parse::<Stage>().unwrap(), Stage::Score);
    }

    fn cfg(d_mlp: usize) -> ModelConfig {
        ModelConfig { d_mlp, ..ModelConfig::gpt2_small() }
    }

    #[test]
    fn baseline_is_seeded_and_excludes() {
        let exclude: BTreeSet<_> = (0..40).map(|j| NeuronHandle::new(11, j)).collect();
        let a = random_baseline(&cfg(3072), &[7, 8, 9, 10, 11], 20, &exclude, 5).unwrap();
        let b = random_baseline(&cfg(3072), &[7, 8, 9, 10, 11], 20, &exclude, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 100);
        assert!(a.iter().all(|n| !exclude.contains(n)));
        assert_ne!(a, random_baseline(&cfg(3072), &[7, 8, 9, 10, 11], 20, &exclude, 6).unwrap());
    }

    #[test]
    fn baseline_exhaustive_and_insufficient() {
        let exclude: BTreeSet<_> = (0..4).map(|j| NeuronHandle::new(0, j * 2)).collect();
        let all = random_baseline(&cfg(10), &[0], 6, &exclude, 1).unwrap();
        assert_eq!(all.iter().map(|n| n.neuron).collect::<Vec<_>>(), vec![1, 3, 5, 7, 8, 9]);
        assert!(matches!(
            random_baseline(&cfg(10), &[0], 7, &exclude, 1),
            Err(PipelineError::InsufficientNeurons { layer: 0, needed: 7, available: 6 })
        ));
    }
}
