//! The end-to-end evaluation loop: build a world per instance, rank the
//! candidate set, decode a response, and aggregate metrics.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::lm::{Condition, Speaker, TokenId};
use crate::memory::{baseline_select, BaselineMethod, Embedder, MemoryStore};
use crate::rng::SplitMix64;
use crate::rsa::{
    decode_greedy, nli_rerank, rank_candidates, score_candidate, DecodeTrace, RsaConfig, World,
};
use crate::text;

use super::data::DialogueInstance;
use super::gen::{extract_triples, TripleLexicon};
use super::metrics::{ranking_metrics, rouge_scores, utterance_c_score, word_f1};
use super::HarnessError;

/// How distractors are chosen per instance. `None` evaluates the bare
/// speaker in a single-condition world.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selector {
    None,
    Random,
    Nearest,
    Farthest,
    Memory,
}

/// What the speaker is conditioned on: the instance persona, or the agent's
/// own turns in the history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    Persona,
    Context,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub rsa: RsaConfig,
    pub selector: Selector,
    pub mode: EvalMode,
    pub nli_rerank: bool,
    pub seed: u64,
}

/// External resources some selectors need. The memory store carries its own
/// persona table; `persona_table` feeds the random/nearest/farthest
/// selectors; the lexicon grounds triple extraction from generated text.
#[derive(Clone, Copy)]
pub struct EvalResources<'a> {
    pub persona_table: &'a [Condition],
    pub memory: Option<&'a MemoryStore>,
    pub embedder: Option<&'a dyn Embedder>,
    pub lexicon: Option<&'a TripleLexicon>,
}

impl<'a> EvalResources<'a> {
    pub fn bare(persona_table: &'a [Condition]) -> Self {
        Self {
            persona_table,
            memory: None,
            embedder: None,
            lexicon: None,
        }
    }
}

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Aggregated metrics for one evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub n_instances: usize,
    pub hits_at_1: f64,
    pub entail_at_1: f64,
    pub neutral_at_1: f64,
    pub contradict_at_1: f64,
    /// Mean token F1 of the decoded response against the ground truth.
    pub word_f1: f64,
    pub response_rouge1: f64,
    pub response_rouge_l: f64,
    /// Mean consistency score of the decoded response against the persona;
    /// absent when the dataset carries no triples or no lexicon is given.
    pub c_score: Option<f64>,
    /// Mean perplexity of the ground truth under the bare speaker.
    pub gt_perplexity_s0: f64,
    /// Mean perplexity of the ground truth under the self-conscious speaker.
    pub gt_perplexity_s1: f64,
    pub triples_available: bool,
    /// Instances that received fewer distractors than requested.
    pub distractor_shortfalls: usize,
    pub config: EvalConfig,
}

/// A report plus the per-instance decode traces, in dataset order.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRun {
    pub report: EvalReport,
    pub traces: Vec<DecodeTrace>,
}

fn select_distractors(
    instance: &DialogueInstance,
    target: &Condition,
    config: &EvalConfig,
    resources: &EvalResources,
    instance_seed: u64,
    wanted: usize,
) -> Result<(Vec<Condition>, bool), HarnessError> {
    if wanted == 0 {
        return Ok((Vec::new(), false));
    }
    match config.selector {
        Selector::None => Ok((Vec::new(), false)),
        Selector::Random => {
            let pool: Vec<Condition> = resources
                .persona_table
                .iter()
                .filter(|p| *p != target)
                .cloned()
                .collect();
            if pool.is_empty() {
                return Err(HarnessError::MissingResource(
                    "random selector needs a nonempty persona table",
                ));
            }
            let take = wanted.min(pool.len());
            let mut rng = SplitMix64::new(instance_seed);
            let picked = rng
                .sample_indices(pool.len(), take)
                .into_iter()
                .map(|i| pool[i].clone())
                .collect();
            Ok((picked, take < wanted))
        }
        Selector::Nearest | Selector::Farthest => {
            let embedder = resources
                .embedder
                .ok_or(HarnessError::MissingResource("embedder"))?;
            let pool: Vec<Condition> = resources
                .persona_table
                .iter()
                .filter(|p| *p != target)
                .cloned()
                .collect();
            let take = wanted.min(pool.len());
            if take == 0 {
                return Err(HarnessError::MissingResource(
                    "selector needs a nonempty persona table",
                ));
            }
            let method = if config.selector == Selector::Nearest {
                BaselineMethod::Nearest
            } else {
                BaselineMethod::Farthest
            };
            let picked = baseline_select(method, target, &pool, embedder, take, instance_seed)?;
            Ok((picked, take < wanted))
        }
        Selector::Memory => {
            let store = resources
                .memory
                .ok_or(HarnessError::MissingResource("memory store"))?;
            let embedder = resources
                .embedder
                .ok_or(HarnessError::MissingResource("embedder"))?;
            let (picked, shortfall) =
                store.retrieve_distractors(embedder, target, &instance.history_texts(), wanted)?;
            Ok((picked, shortfall))
        }
    }
}

/// Evaluate a dataset: per instance, build the world, rank candidates
/// (optionally re-ranked by oracle contradiction flags), tally the top-1
/// label, decode a response, and score it against the ground truth and the
/// persona. Deterministic given the config seed; per-instance randomness is
/// derived independently per index.
pub fn run_evaluation<S: Speaker + ?Sized>(
    speaker: &S,
    dataset: &[DialogueInstance],
    config: &EvalConfig,
    resources: &EvalResources,
) -> Result<EvalRun, HarnessError> {
    if dataset.is_empty() {
        return Err(HarnessError::EmptyDataset);
    }
    config.rsa.validate()?;
    let triples_available = dataset.iter().all(|i| i.triples_complete());
    if config.nli_rerank && !triples_available {
        return Err(HarnessError::TriplesUnavailable);
    }

    let wanted_distractors = config.rsa.world_size.saturating_sub(1);
    let mut top1 = Vec::with_capacity(dataset.len());
    let mut f1_sum = 0.0;
    let mut rouge1_sum = 0.0;
    let mut rouge_l_sum = 0.0;
    let mut c_sum = 0i64;
    let mut ppl_s0_sum = 0.0;
    let mut ppl_s1_sum = 0.0;
    let mut shortfalls = 0usize;
    let mut traces = Vec::with_capacity(dataset.len());

    let s0_config = RsaConfig {
        alpha: 0.0,
        world_size: 1,
        ..config.rsa
    };

    for (index, instance) in dataset.iter().enumerate() {
        instance.validate()?;
        let persona_condition = instance.persona_condition()?;
        let target = match config.mode {
            EvalMode::Persona => persona_condition.clone(),
            // Condition on the agent's own past responses; instances where
            // the agent has not spoken yet fall back to the persona.
            EvalMode::Context => instance
                .context_condition()
                .unwrap_or_else(|| persona_condition.clone()),
        };
        let instance_seed = SplitMix64::stream(config.seed, index as u64).next_u64();
        let (distractors, shortfall) = select_distractors(
            instance,
            &target,
            config,
            resources,
            instance_seed,
            wanted_distractors,
        )?;
        if shortfall {
            shortfalls += 1;
        }
        let world = World::new(target.clone(), distractors);
        let history = instance.dialogue_history();
        let candidates = instance.candidate_token_ids(speaker.vocab());

        let mut ranked = rank_candidates(speaker, &world, &history, &candidates, &config.rsa)?;
        if config.nli_rerank {
            let persona_triples = instance.persona_triples();
            let flags: Vec<u8> = instance
                .candidates
                .iter()
                .map(|candidate| {
                    let triple = candidate
                        .triple
                        .as_ref()
                        .expect("triples_available was checked");
                    super::metrics::triple_nli(triple, &persona_triples)
                        .map(|score| u8::from(score == -1))
                })
                .collect::<Result<_, _>>()?;
            ranked = nli_rerank(&ranked, &flags)?;
        }
        top1.push(instance.candidates[ranked[0]].label);

        // Response generation and reference-based scores.
        let (response_ids, trace) = decode_greedy(speaker, &world, &history, &config.rsa)?;
        let response_tokens: Vec<String> = response_ids
            .iter()
            .map(|&id| String::from(speaker.vocab().token(id)))
            .collect();
        let gt_tokens = instance.gt_tokens();
        f1_sum += word_f1(&response_tokens, &gt_tokens);
        let rouge = rouge_scores(&response_tokens, &gt_tokens);
        rouge1_sum += rouge.rouge1;
        rouge_l_sum += rouge.rouge_l;
        if let (true, Some(lexicon)) = (triples_available, resources.lexicon) {
            let extracted = extract_triples(&response_tokens, lexicon);
            c_sum += utterance_c_score(&extracted, &instance.persona_triples())? as i64;
        }
        traces.push(trace);

        // Ground-truth perplexity under the bare and self-conscious speakers.
        let gt_ids: Vec<TokenId> = gt_tokens
            .iter()
            .map(|token| speaker.vocab().id(token))
            .collect();
        let singleton = World::new(target.clone(), Vec::new());
        ppl_s0_sum += score_candidate(speaker, &singleton, &history, &gt_ids, &s0_config)?
            .perplexity;
        ppl_s1_sum += score_candidate(speaker, &world, &history, &gt_ids, &config.rsa)?.perplexity;

        // Keep tokenization honest: the decoded response must round-trip.
        debug_assert_eq!(
            text::tokenize(&text::detokenize(&response_tokens)),
            response_tokens
        );
    }

    let n = dataset.len() as f64;
    let ranking = ranking_metrics(&top1)?;
    let c_score = if triples_available && resources.lexicon.is_some() {
        Some(c_sum as f64 / n)
    } else {
        None
    };
    Ok(EvalRun {
        report: EvalReport {
            schema_version: REPORT_SCHEMA_VERSION,
            n_instances: dataset.len(),
            hits_at_1: ranking.hits_at_1,
            entail_at_1: ranking.entail_at_1,
            neutral_at_1: ranking.neutral_at_1,
            contradict_at_1: ranking.contradict_at_1,
            word_f1: f1_sum / n,
            response_rouge1: rouge1_sum / n,
            response_rouge_l: rouge_l_sum / n,
            c_score,
            gt_perplexity_s0: ppl_s0_sum / n,
            gt_perplexity_s1: ppl_s1_sum / n,
            triples_available,
            distractor_shortfalls: shortfalls,
            config: *config,
        },
        traces,
    })
}
