//! Dialogue instances: persona with per-sentence triples, history, the
//! ground-truth utterance, and a labeled candidate set.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::lm::{
    resolve_tokens, Condition, DialogueHistory, LmError, TokenId, TrainingDialogue, TrainingTurn,
    SpeakerTag, Vocabulary,
};
use crate::text;

use super::HarnessError;

/// `(entity1, relation, entity2)` annotation grounding entailment and
/// contradiction decisions. Serialized as a three-element array.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[String; 3]", into = "[String; 3]")]
pub struct Triple {
    pub entity1: String,
    pub relation: String,
    pub entity2: String,
}

impl Triple {
    pub fn new(entity1: &str, relation: &str, entity2: &str) -> Self {
        Self {
            entity1: String::from(entity1),
            relation: String::from(relation),
            entity2: String::from(entity2),
        }
    }
}

impl From<[String; 3]> for Triple {
    fn from([entity1, relation, entity2]: [String; 3]) -> Self {
        Self {
            entity1,
            relation,
            entity2,
        }
    }
}

impl From<Triple> for [String; 3] {
    fn from(triple: Triple) -> Self {
        [triple.entity1, triple.relation, triple.entity2]
    }
}

/// Relationship of a candidate utterance to the ground truth and persona.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidateLabel {
    Gt,
    Entail,
    Neutral,
    Contradict,
}

/// One next-utterance candidate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub text: String,
    pub label: CandidateLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triple: Option<Triple>,
}

/// A persona sentence with its optional grounding triple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonaSentence {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triple: Option<Triple>,
}

/// One evaluation (or label-derivation) instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueInstance {
    pub persona: Vec<PersonaSentence>,
    pub history: Vec<TrainingTurn>,
    pub gt: String,
    pub candidates: Vec<Candidate>,
}

impl DialogueInstance {
    /// Exactly one ground-truth candidate and a nonempty persona.
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.persona.is_empty() {
            return Err(HarnessError::BadInstance("persona is empty"));
        }
        let gt_count = self
            .candidates
            .iter()
            .filter(|c| c.label == CandidateLabel::Gt)
            .count();
        if gt_count != 1 {
            return Err(HarnessError::BadInstance(
                "instance must carry exactly one ground-truth candidate",
            ));
        }
        Ok(())
    }

    pub fn persona_condition(&self) -> Result<Condition, LmError> {
        let texts: Vec<&str> = self.persona.iter().map(|s| s.text.as_str()).collect();
        Condition::persona_from_texts(&texts)
    }

    /// Condition built from the agent's own turns, for context-consistency
    /// decoding. `None` when the agent has not spoken yet.
    pub fn context_condition(&self) -> Option<Condition> {
        let own: Vec<&str> = self
            .history
            .iter()
            .filter(|t| t.speaker == SpeakerTag::Agent)
            .map(|t| t.text.as_str())
            .collect();
        if own.is_empty() {
            return None;
        }
        Condition::own_history_from_texts(&own).ok()
    }

    pub fn dialogue_history(&self) -> DialogueHistory {
        let turns: Vec<(SpeakerTag, &str)> = self
            .history
            .iter()
            .map(|t| (t.speaker, t.text.as_str()))
            .collect();
        DialogueHistory::from_texts(&turns)
    }

    /// Raw turn texts in order; the embedder's context input.
    pub fn history_texts(&self) -> Vec<String> {
        self.history.iter().map(|t| t.text.clone()).collect()
    }

    pub fn persona_triples(&self) -> Vec<Triple> {
        self.persona
            .iter()
            .filter_map(|s| s.triple.clone())
            .collect()
    }

    pub fn gt_tokens(&self) -> Vec<String> {
        text::tokenize(&self.gt)
    }

    pub fn candidate_token_ids(&self, vocab: &Vocabulary) -> Vec<Vec<TokenId>> {
        self.candidates
            .iter()
            .map(|c| resolve_tokens(vocab, &text::tokenize(&c.text)))
            .collect()
    }

    /// Whether every candidate and every persona sentence carries a triple.
    pub fn triples_complete(&self) -> bool {
        self.persona.iter().all(|s| s.triple.is_some())
            && self.candidates.iter().all(|c| c.triple.is_some())
    }

    /// Corpus line for base-speaker training: the persona as condition, the
    /// history plus the ground-truth reply as turns.
    pub fn to_training_dialogue(&self) -> TrainingDialogue {
        let mut turns = self.history.clone();
        turns.push(TrainingTurn {
            speaker: SpeakerTag::Agent,
            text: self.gt.clone(),
        });
        TrainingDialogue {
            condition: self.persona.iter().map(|s| s.text.clone()).collect(),
            turns,
        }
    }
}
