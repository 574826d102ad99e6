//! The self-consciousness recursion.
//!
//! At every timestep the base speaker proposes a next-token distribution for
//! the target condition and for each distractor condition in the world. An
//! imaginary listener turns those per-condition probabilities into a
//! posterior over the world; the self-conscious speaker reweights the base
//! distribution by the listener's belief in the target raised to the speaker
//! rationality `alpha`, and the world prior carries the accumulated evidence
//! from one emitted token to the next.
//!
//! All probability arithmetic runs in log space; probabilities are clamped at
//! [`PROB_FLOOR`] before taking logs even though smoothed speakers never emit
//! zeros.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lm::{Condition, DialogueHistory, Speaker, TokenDistribution, TokenId, EOS};

/// Probabilities are clamped here before `log`.
pub const PROB_FLOOR: f64 = 1e-300;

const PRIOR_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RsaError {
    #[error("speaker rationality alpha must be nonnegative (got {0})")]
    NegativeAlpha(f64),
    #[error("listener rationality beta must be nonnegative (got {0})")]
    NegativeBeta(f64),
    #[error("world must contain at least one condition")]
    EmptyWorld,
    #[error("world size must be at least 1 (got {0})")]
    InvalidWorldSize(usize),
    #[error("max decode length must be at least 1")]
    InvalidMaxLength,
    #[error("per-world token probabilities must be strictly positive")]
    NonPositiveProbability,
    #[error("prior must be nonnegative and sum to 1 (sum was {0})")]
    InvalidPrior(f64),
    #[error("expected {expected} entries, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("candidate must be nonempty")]
    EmptyCandidate,
    #[error("candidate list must be nonempty")]
    NoCandidates,
    #[error("contradiction scores must be 0 or 1 (got {0})")]
    InvalidContradictionScore(u8),
    #[error("ranked index {0} is out of range")]
    RankIndexOutOfRange(usize),
}

/// The finite set of conditions the imaginary listener reasons over. Index 0
/// is always the target condition; the rest are distractors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct World {
    conditions: Vec<Condition>,
}

impl World {
    pub fn new(target: Condition, distractors: Vec<Condition>) -> Self {
        let mut conditions = Vec::with_capacity(1 + distractors.len());
        conditions.push(target);
        conditions.extend(distractors);
        Self { conditions }
    }

    pub fn from_conditions(conditions: Vec<Condition>) -> Result<Self, RsaError> {
        if conditions.is_empty() {
            return Err(RsaError::EmptyWorld);
        }
        Ok(Self { conditions })
    }

    pub fn target(&self) -> &Condition {
        &self.conditions[0]
    }

    pub fn conditions(&self) -> &[Condition] {
        &self.conditions
    }

    pub fn len(&self) -> usize {
        self.conditions.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction guarantees at least the target
    }
}

/// Probability vector over the world: the listener's cumulative belief about
/// which condition the speaker is expressing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldPrior {
    probs: Vec<f64>,
}

impl WorldPrior {
    pub fn uniform(n: usize) -> Self {
        assert!(n >= 1, "world prior needs at least one coordinate");
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn new(probs: Vec<f64>) -> Result<Self, RsaError> {
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|&p| !p.is_finite() || p < 0.0)
            || (sum - 1.0).abs() > PRIOR_SUM_TOLERANCE
        {
            return Err(RsaError::InvalidPrior(sum));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.probs[index]
    }
}

/// How the world prior advances after each emitted token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorUpdateMode {
    /// Replace the prior with the listener posterior at the chosen token.
    #[default]
    L0,
    /// Weight the posterior by the per-condition token probability once more,
    /// which reflects the current base speaker twice per step.
    L1,
    /// Reset to the uniform initial prior every step.
    Uniform,
}

/// Rationality coefficients and decode limits for the self-conscious speaker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RsaConfig {
    /// Speaker rationality: how strongly the listener's belief in the target
    /// reweights the base distribution.
    pub alpha: f64,
    /// Listener rationality: how strongly the current step's evidence counts
    /// against the cumulative prior.
    pub beta: f64,
    /// Number of conditions in the world, target included.
    pub world_size: usize,
    pub prior_mode: PriorUpdateMode,
    /// Maximum number of tokens a greedy decode may emit.
    pub max_length: usize,
}

impl RsaConfig {
    /// Defaults for candidate ranking: alpha 8, beta 1, three-condition world.
    pub fn ranking() -> Self {
        Self {
            alpha: 8.0,
            beta: 1.0,
            world_size: 3,
            prior_mode: PriorUpdateMode::L0,
            max_length: 30,
        }
    }

    /// Defaults for response generation: alpha 2, beta 0.5.
    pub fn generation() -> Self {
        Self {
            alpha: 2.0,
            beta: 0.5,
            ..Self::ranking()
        }
    }

    pub fn validate(&self) -> Result<(), RsaError> {
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(RsaError::NegativeAlpha(self.alpha));
        }
        if !self.beta.is_finite() || self.beta < 0.0 {
            return Err(RsaError::NegativeBeta(self.beta));
        }
        if self.world_size < 1 {
            return Err(RsaError::InvalidWorldSize(self.world_size));
        }
        if self.max_length < 1 {
            return Err(RsaError::InvalidMaxLength);
        }
        Ok(())
    }
}

impl Default for RsaConfig {
    fn default() -> Self {
        Self::ranking()
    }
}

/// One decode step: the chosen token, summaries of the base and
/// self-conscious distributions, the listener posterior at the chosen token,
/// and the world prior before and after the update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeStep {
    /// 1-based timestep.
    pub t: usize,
    pub token_id: TokenId,
    pub token: String,
    pub prior_before: Vec<f64>,
    /// Listener posterior over the world at the chosen token.
    pub posterior: Vec<f64>,
    pub prior_after: Vec<f64>,
    pub s1_top5: Vec<(String, f64)>,
    pub base_top5: Vec<(String, f64)>,
}

/// Per-step records for one decode; one record per emitted token, the
/// end-of-sequence token included.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DecodeTrace {
    pub steps: Vec<DecodeStep>,
}

/// Forced-scoring result for one candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateScore {
    /// Natural-log probability of the candidate under the self-conscious
    /// speaker.
    pub logprob: f64,
    /// `exp(-logprob / length)`.
    pub perplexity: f64,
}

#[inline]
fn safe_ln(p: f64) -> f64 {
    libm::log(if p > PROB_FLOOR { p } else { PROB_FLOOR })
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + libm::log(values.iter().map(|&v| libm::exp(v - max)).sum::<f64>())
}

/// Listener posterior over the world given each condition's probability of
/// the current token: `posterior[j] ∝ token_probs[j]^beta * prior[j]`.
///
/// With `beta == 0` the evidence is neutralized and the prior is returned
/// unchanged.
pub fn listener_posterior(
    token_probs: &[f64],
    prior: &WorldPrior,
    beta: f64,
) -> Result<WorldPrior, RsaError> {
    if !beta.is_finite() || beta < 0.0 {
        return Err(RsaError::NegativeBeta(beta));
    }
    if token_probs.len() != prior.len() {
        return Err(RsaError::LengthMismatch {
            expected: prior.len(),
            got: token_probs.len(),
        });
    }
    if token_probs.iter().any(|&p| !p.is_finite() || p <= 0.0) {
        return Err(RsaError::NonPositiveProbability);
    }
    if beta == 0.0 {
        return Ok(prior.clone());
    }

    let terms: Vec<f64> = token_probs
        .iter()
        .zip(prior.probs())
        .map(|(&p, &prior_p)| {
            if prior_p > 0.0 {
                beta * safe_ln(p) + libm::log(prior_p)
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let normalizer = log_sum_exp(&terms);
    let mut probs: Vec<f64> = terms
        .iter()
        .map(|&t| {
            if t.is_finite() {
                libm::exp(t - normalizer)
            } else {
                0.0
            }
        })
        .collect();
    let sum: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= sum;
    }
    Ok(WorldPrior { probs })
}

/// Self-conscious next-token distribution:
/// `S1[u] ∝ listener_target[u]^alpha * base[u]`.
///
/// `listener_target[u]` is the listener's posterior belief in the target
/// condition if token `u` were emitted. `alpha == 0` (or a listener that is
/// identically 1, as in a single-condition world) leaves the base
/// distribution untouched.
pub fn self_conscious_distribution(
    base: &TokenDistribution,
    listener_target: &[f64],
    alpha: f64,
) -> Result<TokenDistribution, RsaError> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(RsaError::NegativeAlpha(alpha));
    }
    if listener_target.len() != base.len() {
        return Err(RsaError::LengthMismatch {
            expected: base.len(),
            got: listener_target.len(),
        });
    }
    if listener_target.iter().any(|&p| !p.is_finite() || p <= 0.0) {
        return Err(RsaError::NonPositiveProbability);
    }
    if alpha == 0.0 || listener_target.iter().all(|&p| p == 1.0) {
        return Ok(base.clone());
    }

    let logits: Vec<f64> = base
        .probs()
        .iter()
        .zip(listener_target)
        .map(|(&s0, &l0)| alpha * safe_ln(l0) + safe_ln(s0))
        .collect();
    let normalizer = log_sum_exp(&logits);
    let mut probs: Vec<f64> = logits.iter().map(|&l| libm::exp(l - normalizer)).collect();
    let sum: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= sum;
    }
    TokenDistribution::new(probs).map_err(|_| RsaError::NonPositiveProbability)
}

/// Advance the world prior given the per-condition probabilities of the
/// token that was actually chosen (or forced).
pub fn update_prior(
    mode: PriorUpdateMode,
    prior: &WorldPrior,
    chosen_token_probs: &[f64],
    beta: f64,
) -> Result<WorldPrior, RsaError> {
    match mode {
        PriorUpdateMode::Uniform => Ok(WorldPrior::uniform(prior.len())),
        PriorUpdateMode::L0 => listener_posterior(chosen_token_probs, prior, beta),
        PriorUpdateMode::L1 => {
            let l0 = listener_posterior(chosen_token_probs, prior, beta)?;
            let weights: Vec<f64> = chosen_token_probs
                .iter()
                .zip(l0.probs())
                .map(|(&p, &q)| p * q)
                .collect();
            let sum: f64 = weights.iter().sum();
            if !sum.is_finite() || sum <= 0.0 {
                return Err(RsaError::NonPositiveProbability);
            }
            Ok(WorldPrior {
                probs: weights.into_iter().map(|w| w / sum).collect(),
            })
        }
    }
}

/// Everything the engine derives in one timestep.
struct StepComputation {
    /// Base-speaker distribution per world condition, target first.
    world_dists: Vec<TokenDistribution>,
    s1: TokenDistribution,
}

fn compute_step<S: Speaker + ?Sized>(
    speaker: &S,
    world: &World,
    history: &DialogueHistory,
    partial: &[TokenId],
    prior: &WorldPrior,
    config: &RsaConfig,
) -> Result<StepComputation, RsaError> {
    let world_dists: Vec<TokenDistribution> = world
        .conditions()
        .iter()
        .map(|condition| speaker.next_token_distribution(condition, history, partial))
        .collect();
    let vocab_size = world_dists[0].len();

    let ln_prior: Vec<f64> = prior
        .probs()
        .iter()
        .map(|&p| if p > 0.0 { libm::log(p) } else { f64::NEG_INFINITY })
        .collect();
    let mut listener_target = Vec::with_capacity(vocab_size);
    let mut terms = vec![0.0f64; world.len()];
    for u in 0..vocab_size {
        for (j, dist) in world_dists.iter().enumerate() {
            terms[j] = config.beta * safe_ln(dist.probs()[u]) + ln_prior[j];
        }
        let normalizer = log_sum_exp(&terms);
        listener_target.push(libm::exp(terms[0] - normalizer));
    }

    let s1 = self_conscious_distribution(&world_dists[0], &listener_target, config.alpha)?;
    Ok(StepComputation { world_dists, s1 })
}

fn probs_at(world_dists: &[TokenDistribution], token: TokenId) -> Vec<f64> {
    world_dists.iter().map(|d| d.get(token)).collect()
}

fn top5_strings<S: Speaker + ?Sized>(speaker: &S, dist: &TokenDistribution) -> Vec<(String, f64)> {
    dist.top_k(5)
        .into_iter()
        .map(|(id, p)| (String::from(speaker.vocab().token(id)), p))
        .collect()
}

/// Incremental greedy decode under the self-conscious speaker.
///
/// Per timestep: query the base speaker once per world condition, build the
/// listener posterior for every hypothetical token, form the self-conscious
/// distribution, pick its argmax (ties break toward the lowest token id),
/// advance the prior with the chosen token, and stop at end-of-sequence or
/// `max_length`. The returned utterance excludes the end-of-sequence marker;
/// the trace records every emitted token including it.
pub fn decode_greedy<S: Speaker + ?Sized>(
    speaker: &S,
    world: &World,
    history: &DialogueHistory,
    config: &RsaConfig,
) -> Result<(Vec<TokenId>, DecodeTrace), RsaError> {
    config.validate()?;
    let mut prior = WorldPrior::uniform(world.len());
    let mut utterance: Vec<TokenId> = Vec::new();
    let mut trace = DecodeTrace::default();

    for t in 1..=config.max_length {
        let step = compute_step(speaker, world, history, &utterance, &prior, config)?;
        let chosen = step.s1.argmax();
        let chosen_probs = probs_at(&step.world_dists, chosen);
        let posterior = listener_posterior(&chosen_probs, &prior, config.beta)?;
        let next_prior = update_prior(config.prior_mode, &prior, &chosen_probs, config.beta)?;

        trace.steps.push(DecodeStep {
            t,
            token_id: chosen,
            token: String::from(speaker.vocab().token(chosen)),
            prior_before: prior.probs().to_vec(),
            posterior: posterior.probs().to_vec(),
            prior_after: next_prior.probs().to_vec(),
            s1_top5: top5_strings(speaker, &step.s1),
            base_top5: top5_strings(speaker, &step.world_dists[0]),
        });

        prior = next_prior;
        if chosen == EOS {
            break;
        }
        utterance.push(chosen);
    }
    Ok((utterance, trace))
}

/// Forced scoring: walk the candidate's own tokens through exactly the
/// distributions `decode_greedy` would build, accumulating the log
/// probability the self-conscious speaker assigns to each actual token. The
/// prior advances along the candidate's tokens.
pub fn score_candidate<S: Speaker + ?Sized>(
    speaker: &S,
    world: &World,
    history: &DialogueHistory,
    candidate: &[TokenId],
    config: &RsaConfig,
) -> Result<CandidateScore, RsaError> {
    config.validate()?;
    if candidate.is_empty() {
        return Err(RsaError::EmptyCandidate);
    }
    let mut prior = WorldPrior::uniform(world.len());
    let mut logprob = 0.0;
    for t in 0..candidate.len() {
        let step = compute_step(speaker, world, history, &candidate[..t], &prior, config)?;
        let token = candidate[t];
        logprob += safe_ln(step.s1.get(token));
        let chosen_probs = probs_at(&step.world_dists, token);
        prior = update_prior(config.prior_mode, &prior, &chosen_probs, config.beta)?;
    }
    Ok(CandidateScore {
        logprob,
        perplexity: libm::exp(-logprob / candidate.len() as f64),
    })
}

/// Rank candidate indices by ascending self-conscious perplexity. Ties keep
/// the lower original index first.
pub fn rank_candidates<S: Speaker + ?Sized>(
    speaker: &S,
    world: &World,
    history: &DialogueHistory,
    candidates: &[Vec<TokenId>],
    config: &RsaConfig,
) -> Result<Vec<usize>, RsaError> {
    if candidates.is_empty() {
        return Err(RsaError::NoCandidates);
    }
    let mut scored = Vec::with_capacity(candidates.len());
    for candidate in candidates {
        scored.push(score_candidate(speaker, world, history, candidate, config)?.perplexity);
    }
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    // Stable sort: equal perplexities keep ascending index order.
    order.sort_by(|&a, &b| {
        scored[a]
            .partial_cmp(&scored[b])
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    Ok(order)
}

/// Penalize contradictory candidates: stable re-sort of an existing ranking
/// by (contradiction score ascending, prior rank ascending). Scores are
/// indexed by candidate, aligned with the candidate list the ranking refers
/// to, and must be 0 or 1.
pub fn nli_rerank(ranked: &[usize], contradiction_scores: &[u8]) -> Result<Vec<usize>, RsaError> {
    if ranked.len() != contradiction_scores.len() {
        return Err(RsaError::LengthMismatch {
            expected: ranked.len(),
            got: contradiction_scores.len(),
        });
    }
    for &score in contradiction_scores {
        if score > 1 {
            return Err(RsaError::InvalidContradictionScore(score));
        }
    }
    for &index in ranked {
        if index >= contradiction_scores.len() {
            return Err(RsaError::RankIndexOutOfRange(index));
        }
    }
    let mut reranked = ranked.to_vec();
    reranked.sort_by_key(|&candidate| contradiction_scores[candidate]);
    Ok(reranked)
}
