//! Dataset schema, synthetic triple-annotated dialogue generation, the
//! triple-matching consistency oracle, metrics, and the evaluation loop.

mod data;
mod eval;
mod gen;
mod metrics;

pub use data::{Candidate, CandidateLabel, DialogueInstance, PersonaSentence, Triple};
pub use eval::{
    run_evaluation, EvalConfig, EvalMode, EvalReport, EvalResources, EvalRun, Selector,
    REPORT_SCHEMA_VERSION,
};
pub use gen::{
    default_lexicon, extract_triples, generate_dataset, GeneratedData, GeneratorSpec,
    TripleLexicon,
};
pub use metrics::{
    c_score, ranking_metrics, rouge_scores, triple_nli, utterance_c_score, word_f1,
    RankingMetrics, RougeScores,
};

use thiserror::Error;

use crate::lm::LmError;
use crate::memory::MemoryError;
use crate::rsa::RsaError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("dataset contains no instances")]
    EmptyDataset,
    #[error("metric input is empty: {0}")]
    EmptyInput(&'static str),
    #[error("persona contains triples with the same entity and relation but different objects")]
    SelfContradictoryPersona,
    #[error("inventory cannot satisfy the requested spec: {0}")]
    InsufficientInventory(&'static str),
    #[error("instance is malformed: {0}")]
    BadInstance(&'static str),
    #[error("selector requires a resource that was not provided: {0}")]
    MissingResource(&'static str),
    #[error("dataset has no triple annotations; triple-based processing is unavailable")]
    TriplesUnavailable,
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    Rsa(#[from] RsaError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
}
