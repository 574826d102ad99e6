//! Vocabulary, token distributions, and the built-in deterministic
//! conditional base speaker.

mod dist;
mod speaker;
mod vocab;

pub use dist::TokenDistribution;
pub use speaker::{
    Condition, ConditionKind, ConditionedNGramSpeaker, DialogueHistory, HistoryTurn,
    SpeakerConfig, SpeakerParts, SpeakerTag, TrainingDialogue, TrainingTurn,
};
pub use vocab::{TokenId, Vocabulary, BOS, EOS, UNK};

use alloc::string::String;
use alloc::vec::Vec;
use thiserror::Error;

/// Any conditional next-token model. The self-conscious recursion is written
/// against this trait, so a different base speaker can be dropped in behind
/// the same engine.
pub trait Speaker {
    fn vocab(&self) -> &Vocabulary;

    /// Distribution over the next token given a condition, the dialogue
    /// history, and the partial utterance produced so far. Must be a valid
    /// distribution with full support (strictly positive everywhere).
    fn next_token_distribution(
        &self,
        condition: &Condition,
        history: &DialogueHistory,
        partial: &[TokenId],
    ) -> TokenDistribution;
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LmError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("mixture weights must be nonnegative and sum to 1 (got {0}, {1}, {2})")]
    InvalidWeights(f64, f64, f64),
    #[error("smoothing constant must be positive (got {0})")]
    InvalidSmoothing(f64),
    #[error("n-gram order must be at least 1 (got {0})")]
    InvalidOrder(usize),
    #[error("utterance must be nonempty")]
    EmptyUtterance,
    #[error("condition must contain at least one sentence")]
    EmptyCondition,
    #[error("probabilities must be nonnegative and sum to 1 (sum was {0})")]
    InvalidDistribution(f64),
    #[error("speaker snapshot is inconsistent: {0}")]
    InvalidSnapshot(&'static str),
}

/// Resolve token strings against a vocabulary; out-of-vocabulary strings map
/// to the unknown id, never to an error.
pub fn resolve_tokens(vocab: &Vocabulary, tokens: &[String]) -> Vec<TokenId> {
    tokens.iter().map(|t| vocab.id(t)).collect()
}
