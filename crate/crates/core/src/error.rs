use thiserror::Error;

use crate::ablation_lab::AblationError;
use crate::analytics::StatsError;
use crate::explainer::ExplainError;
use crate::head_attribution::AttributionError;
use crate::model_io::ModelError;
use crate::neuron_scout::ScoutError;
use crate::pipeline::PipelineError;
use crate::prompt_miner::MinerError;
use crate::tokenizer::TokenizerError;
use crate::transformer::ForwardError;

/// Umbrella error for callers that drive several modules at once.
#[derive(Debug, Error)]
pub enum Error {
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
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
