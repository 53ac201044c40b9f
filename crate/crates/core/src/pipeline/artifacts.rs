//! File formats exchanged between stages through the run directory.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ablation_lab::AblationRecord;
use crate::analytics::{BaselineComparison, KsResult, ScoreDistribution};
use crate::explainer::{ClassificationOutcome, ExplanationScore, HeadExplanation, ScoreFormula};
use crate::head_attribution::{AttributionMatrix, HeadActivitySummary};
use crate::neuron_scout::{CongruenceMetric, NextTokenNeuron};
use crate::prompt_miner::PromptRecord;
use crate::transformer::{HeadId, NeuronHandle};

use super::config::{AblationKind, CandidateSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeuronGroup {
    NextToken,
    RandomBaseline,
}

impl NeuronGroup {
    pub fn label(self) -> &'static str {
        match self {
            Self::NextToken => "next_token",
            Self::RandomBaseline => "random_baseline",
        }
    }
}

/// A neuron carried through the pipeline with its associated token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    #[serde(flatten)]
    pub handle: NeuronHandle,
    pub token_id: u32,
    pub token_text: String,
    pub score: f64,
    pub group: NeuronGroup,
}

impl Target {
    /// `{layer}-{neuron}`, used in artifact file names.
    pub fn key(&self) -> String {
        self.handle.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronsFile {
    pub metric: CongruenceMetric,
    pub candidates: CandidateSet,
    pub candidate_count: usize,
    pub targets: Vec<Target>,
    pub scouted: Vec<NextTokenNeuron>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptsFile {
    pub target: Target,
    /// Best first; discarded truncations stay listed but are not used.
    pub mine: Vec<PromptRecord>,
    pub test: Vec<PromptRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountSelection {
    /// Top mine prompts considered, before discarding.
    pub count: usize,
    pub prompts_used: usize,
    pub summaries: Vec<HeadActivitySummary>,
    pub explainable: Vec<HeadId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionFile {
    pub target: Target,
    pub sigma: f64,
    pub band: [f64; 2],
    /// One per kept mine prompt, in rank order.
    pub mine: Vec<AttributionMatrix>,
    pub test: Vec<AttributionMatrix>,
    pub selections: Vec<CountSelection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationEntry {
    pub count: usize,
    pub group: NeuronGroup,
    pub neuron: NeuronHandle,
    pub token_text: String,
    pub head: HeadId,
    pub active_fraction: f64,
    pub active_prompts: Vec<String>,
    pub inactive_prompts: Vec<String>,
    pub explanation: Option<HeadExplanation>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationsFile {
    pub backend: String,
    pub model: String,
    pub entries: Vec<ExplanationEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub count: usize,
    pub group: NeuronGroup,
    pub neuron: NeuronHandle,
    pub token_text: String,
    pub head: HeadId,
    pub score: Option<ExplanationScore>,
    pub outcomes: Vec<ClassificationOutcome>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelledDistribution {
    pub group: NeuronGroup,
    pub count: usize,
    pub distribution: ScoreDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoresFile {
    pub formula: ScoreFormula,
    pub formula_note: String,
    pub primary_count: usize,
    pub entries: Vec<ScoreEntry>,
    pub distributions: Vec<LabelledDistribution>,
}

impl ScoresFile {
    pub fn distribution(&self, group: NeuronGroup, count: usize) -> Option<&ScoreDistribution> {
        self.distributions.iter().find(|d| d.group == group && d.count == count).map(|d| &d.distribution)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSummary {
    pub n_active: usize,
    pub n_inactive: usize,
    pub ks: KsResult,
    pub mean_delta_active: f64,
    pub mean_delta_inactive: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairAblation {
    pub group: NeuronGroup,
    pub neuron: NeuronHandle,
    pub token_id: u32,
    pub head: HeadId,
    pub records: Vec<AblationRecord>,
    /// `None` when one activity group is empty.
    pub summary: Option<AblationSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAblation {
    pub group: NeuronGroup,
    pub pairs: usize,
    pub summary: Option<AblationSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationFile {
    pub mode: AblationKind,
    pub prompt_split: String,
    pub count: usize,
    pub pairs: Vec<PairAblation>,
    pub pooled: Vec<GroupAblation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionRow {
    pub label: String,
    pub group: NeuronGroup,
    pub count: usize,
    pub n: usize,
    pub mean: f64,
    pub skewness: Option<f64>,
    pub histogram: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub tool_version: String,
    pub model: String,
    pub skewness_convention: String,
    pub score_formula: ScoreFormula,
    pub formula_note: String,
    pub primary_count: usize,
    pub neurons: BTreeMap<String, usize>,
    pub explainable_pairs: usize,
    pub scored_pairs: usize,
    pub discarded_pairs: usize,
    pub distributions: Vec<DistributionRow>,
    pub comparisons: Vec<BaselineComparison>,
    pub ablation: Vec<GroupAblation>,
}
