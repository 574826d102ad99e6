//! Pragmatic decoding core: makes any conditional dialogue speaker publicly
//! self-conscious by rescaling its next-token distribution with an imaginary
//! listener's posterior over candidate personas.
//!
//! The crate is organized around four subsystems:
//!
//! - [`lm`] — vocabulary, token distributions, and a deterministic smoothed
//!   n-gram base speaker implementing the [`lm::Speaker`] trait.
//! - [`rsa`] — the speaker/listener recursion: listener posterior, world prior
//!   updates, self-conscious next-token distribution, incremental greedy
//!   decoding, forced candidate scoring, and ranking.
//! - [`memory`] — a life-long key-value memory that learns which distractor
//!   personas are effective for a dialogue context, plus baseline selectors.
//! - [`harness`] — synthetic triple-annotated persona dialogues, a
//!   triple-matching consistency oracle, ranking/overlap metrics, and the
//!   end-to-end evaluation loop.
//!
//! The crate is `no_std` (with `alloc`); all IO, file formats, and the CLI
//! live in the companion `pragma-cli` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod harness;
pub mod lm;
pub mod memory;
pub mod rng;
pub mod rsa;
pub mod text;

pub use lm::{
    Condition, ConditionKind, ConditionedNGramSpeaker, DialogueHistory, LmError, Speaker,
    SpeakerConfig, SpeakerTag, TokenDistribution, TokenId, Vocabulary,
};
pub use rsa::{
    decode_greedy, rank_candidates, score_candidate, DecodeTrace, PriorUpdateMode, RsaConfig,
    RsaError, World, WorldPrior,
};
