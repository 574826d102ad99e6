//! Baseline distractor selectors and distractor-label derivation.

use alloc::vec::Vec;

use crate::harness::{CandidateLabel, DialogueInstance};
use crate::lm::{Condition, Speaker};
use crate::rng::SplitMix64;
use crate::rsa::{rank_candidates, RsaConfig, World};

use super::{Embedder, MemoryError, TrainExample};

/// Training-free distractor selection strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineMethod {
    Random,
    /// Closest persona embeddings by cosine similarity.
    Nearest,
    /// Farthest persona embeddings by cosine similarity.
    Farthest,
}

/// Select `k` distractor personas from a pool. Random selection samples
/// without replacement; nearest/farthest rank the pool by cosine similarity
/// to the target persona's embedding, ties toward the lower index.
pub fn baseline_select<E: Embedder + ?Sized>(
    method: BaselineMethod,
    target: &Condition,
    pool: &[Condition],
    embedder: &E,
    k: usize,
    seed: u64,
) -> Result<Vec<Condition>, MemoryError> {
    if pool.len() < k {
        return Err(MemoryError::PoolTooSmall {
            pool: pool.len(),
            k,
        });
    }
    match method {
        BaselineMethod::Random => {
            let mut rng = SplitMix64::new(seed);
            Ok(rng
                .sample_indices(pool.len(), k)
                .into_iter()
                .map(|i| pool[i].clone())
                .collect())
        }
        BaselineMethod::Nearest | BaselineMethod::Farthest => {
            let target_query = embedder.embed(target, &[]);
            let sims: Vec<f64> = pool
                .iter()
                .map(|persona| {
                    let q = embedder.embed(persona, &[]);
                    q.iter().zip(&target_query).map(|(a, b)| a * b).sum()
                })
                .collect();
            let mut order: Vec<usize> = (0..pool.len()).collect();
            order.sort_by(|&a, &b| {
                let primary = if method == BaselineMethod::Nearest {
                    sims[b].partial_cmp(&sims[a])
                } else {
                    sims[a].partial_cmp(&sims[b])
                };
                primary
                    .unwrap_or(core::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            });
            Ok(order.into_iter().take(k).map(|i| pool[i].clone()).collect())
        }
    }
}

/// The persona that makes top-1 ranking favor the ground truth when used as
/// the sole distractor. Hits@1 rewards candidates that are consistent and
/// context-relevant at once, so the winning persona is the most effective
/// distractor for this dialogue. Ties break toward the smallest persona
/// index.
pub fn derive_label_for_dialogue<S: Speaker + ?Sized>(
    speaker: &S,
    instance: &DialogueInstance,
    pool: &[u32],
    persona_table: &[Condition],
    config: &RsaConfig,
) -> Result<u32, MemoryError> {
    if instance.candidates.is_empty() {
        return Err(MemoryError::MissingCandidates);
    }
    if pool.is_empty() {
        return Err(MemoryError::InvalidConfig("label pool is empty"));
    }
    let target = instance
        .persona_condition()
        .map_err(|_| MemoryError::InvalidConfig("instance persona is empty"))?;
    let history = instance.dialogue_history();
    let candidates = instance.candidate_token_ids(speaker.vocab());

    let mut best: Option<(u8, u32)> = None;
    for &persona_index in pool {
        let distractor = persona_table
            .get(persona_index as usize)
            .ok_or(MemoryError::InvalidLabel(persona_index))?;
        let world = World::new(target.clone(), alloc::vec![distractor.clone()]);
        let ranked = rank_candidates(speaker, &world, &history, &candidates, config)?;
        let hits = u8::from(instance.candidates[ranked[0]].label == CandidateLabel::Gt);
        let better = match best {
            None => true,
            Some((best_hits, best_index)) => {
                hits > best_hits || (hits == best_hits && persona_index < best_index)
            }
        };
        if better {
            best = Some((hits, persona_index));
        }
    }
    Ok(best.expect("pool is nonempty").1)
}

/// Derive labels for a batch of dialogues against one shared candidate pool.
pub fn derive_labels<S: Speaker + ?Sized>(
    speaker: &S,
    instances: &[DialogueInstance],
    pool: &[u32],
    persona_table: &[Condition],
    config: &RsaConfig,
) -> Result<Vec<TrainExample>, MemoryError> {
    instances
        .iter()
        .map(|instance| {
            let label = derive_label_for_dialogue(speaker, instance, pool, persona_table, config)?;
            Ok(example_from(instance, label))
        })
        .collect()
}

/// Derive labels with a fresh seeded pool of `pool_size` table personas per
/// dialogue (the dialogue's own persona excluded), which keeps the search
/// linear instead of quadratic in the table size. Pools are seeded from the
/// dialogue's query content, so content-identical dialogues always receive
/// the same pool and therefore the same label; the memory never has to
/// reconcile conflicting writes for one query.
pub fn derive_labels_sampled<S: Speaker + ?Sized>(
    speaker: &S,
    instances: &[DialogueInstance],
    persona_table: &[Condition],
    pool_size: usize,
    config: &RsaConfig,
    seed: u64,
) -> Result<Vec<TrainExample>, MemoryError> {
    if pool_size == 0 {
        return Err(MemoryError::InvalidConfig("pool size must be positive"));
    }
    let mut examples = Vec::with_capacity(instances.len());
    for instance in instances {
        let own = instance
            .persona_condition()
            .map_err(|_| MemoryError::InvalidConfig("instance persona is empty"))?;
        let eligible: Vec<u32> = persona_table
            .iter()
            .enumerate()
            .filter(|(_, persona)| **persona != own)
            .map(|(i, _)| i as u32)
            .collect();
        if eligible.is_empty() {
            return Err(MemoryError::EmptyPersonaTable);
        }
        let mut rng = SplitMix64::stream(seed, query_fingerprint(instance));
        let take = pool_size.min(eligible.len());
        let mut pool: Vec<u32> = rng
            .sample_indices(eligible.len(), take)
            .into_iter()
            .map(|i| eligible[i])
            .collect();
        pool.sort_unstable();
        let label = derive_label_for_dialogue(speaker, instance, &pool, persona_table, config)?;
        examples.push(example_from(instance, label));
    }
    Ok(examples)
}

/// FNV-1a over the fields that form the memory query.
fn query_fingerprint(instance: &DialogueInstance) -> u64 {
    let mut hash = 0xCBF2_9CE4_8422_2325u64;
    let mut eat = |text: &str| {
        for byte in text.as_bytes() {
            hash ^= *byte as u64;
            hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
        }
        hash ^= 0x1F;
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    };
    for sentence in &instance.persona {
        eat(&sentence.text);
    }
    for turn_text in instance.history_texts() {
        eat(&turn_text);
    }
    hash
}

fn example_from(instance: &DialogueInstance, label: u32) -> TrainExample {
    TrainExample {
        persona: instance.persona.iter().map(|s| s.text.clone()).collect(),
        context: instance.history_texts(),
        label,
    }
}
