//! Tools for finding next-token neurons in GPT-2 family language models and
//! tracing which attention heads drive them.
//!
//! The crate is organised as a pipeline of small, independently testable
//! pieces:
//!
//! - [`model_io`] loads safetensors checkpoints, model configs and BPE tables.
//! - [`tokenizer`] is a byte-level BPE encoder/decoder compatible with GPT-2.
//! - [`transformer`] is an instrumented CPU forward pass that records every
//!   head's residual-stream write and every MLP activation, with head ablation.
//! - [`neuron_scout`] ranks MLP neurons by how well their output weights align
//!   with a token's unembedding.
//! - [`prompt_miner`] finds and truncates a neuron's max-activating prompts.
//! - [`head_attribution`] scores head → neuron contributions and marks heads
//!   active by a sigma rule.
//! - [`explainer`] talks to a chat-completion backend to explain head
//!   activity and scores the explanation by zero-shot classification.
//! - [`ablation_lab`] zero-ablates heads and tests the probability shift.
//! - [`analytics`] holds skewness, the two-sample KS test and histograms.
//! - [`pipeline`] runs everything as resumable stages over a run directory.

pub mod ablation_lab;
pub mod analytics;
pub mod explainer;
pub mod head_attribution;
pub mod model_io;
pub mod neuron_scout;
pub mod pipeline;
pub mod prompt_miner;
pub mod tokenizer;
pub mod transformer;

mod error;

pub use error::{Error, Result};
pub use model_io::{load_model, load_tokenizer_tables, ModelBundle, ModelConfig};
pub use tokenizer::{Tokenizer, TokenizerTables};
pub use transformer::{
    forward, next_token_probability, ForwardOptions, ForwardTrace, HeadId, NeuronHandle,
};
