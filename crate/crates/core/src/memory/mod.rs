//! Life-long key-value memory for distractor selection.
//!
//! The memory is a triple `(K, v, a)`: a key matrix of unit-norm rows, a
//! value vector of persona indices, and an age vector steering slot
//! replacement. Training clusters dialogue contexts into slots whose values
//! are the persona labels that proved most effective as distractors;
//! inference retrieves the nearest keys and uses their values.

mod embed;
mod select;

pub use embed::{Embedder, HashingEmbedder, DEFAULT_EMBED_DIM};
pub use select::{
    baseline_select, derive_label_for_dialogue, derive_labels, derive_labels_sampled,
    BaselineMethod,
};

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lm::Condition;
use crate::rng::SplitMix64;
use crate::rsa::RsaError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MemoryError {
    #[error("invalid memory configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("k = {k} exceeds the number of memory slots ({slots})")]
    KTooLarge { k: usize, slots: usize },
    #[error("expected a vector of dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no slot holds persona label {0}")]
    UnlabeledPersona(u32),
    #[error("every slot holds the positive label; no negative neighbor exists")]
    NoNegativeAvailable,
    #[error("training example set is empty")]
    NoExamples,
    #[error("label {0} is not a valid persona table index")]
    InvalidLabel(u32),
    #[error("persona table must be nonempty")]
    EmptyPersonaTable,
    #[error("selection pool of {pool} personas is smaller than k = {k}")]
    PoolTooSmall { pool: usize, k: usize },
    #[error("dialogue carries no candidate set; cannot evaluate distractor quality")]
    MissingCandidates,
    #[error("ranking failed during label derivation: {0}")]
    Rsa(#[from] RsaError),
}

/// Sizing and loss parameters for the memory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryConfig {
    /// Number of slots `m`.
    pub slots: usize,
    /// Key dimension `d`.
    pub dim: usize,
    /// Neighborhood size for training-time lookups.
    pub knn_k: usize,
    /// Positive margin of the ranking loss.
    pub margin: f64,
}

impl Default for MemoryConfig {
    /// Desk-scale defaults. [`MemoryConfig::paper_scale`] has the full-size
    /// variants.
    fn default() -> Self {
        Self {
            slots: 1024,
            dim: DEFAULT_EMBED_DIM,
            knn_k: 64,
            margin: 0.2,
        }
    }
}

impl MemoryConfig {
    /// The sizes used for the full 100k-dialogue setting: 16000 slots of
    /// dimension 768 with 2048-nearest-neighbor lookups.
    pub fn paper_scale() -> Self {
        Self {
            slots: 16_000,
            dim: 768,
            knn_k: 2048,
            margin: 0.2,
        }
    }

    pub fn validate(&self) -> Result<(), MemoryError> {
        if self.slots == 0 {
            return Err(MemoryError::InvalidConfig("slot count must be positive"));
        }
        if self.dim == 0 {
            return Err(MemoryError::InvalidConfig("dimension must be positive"));
        }
        if self.knn_k == 0 {
            return Err(MemoryError::InvalidConfig("knn k must be positive"));
        }
        if self.knn_k > self.slots {
            return Err(MemoryError::KTooLarge {
                k: self.knn_k,
                slots: self.slots,
            });
        }
        if !self.margin.is_finite() || self.margin <= 0.0 {
            return Err(MemoryError::InvalidConfig("margin must be positive"));
        }
        Ok(())
    }
}

/// A labeled training datapoint: the query fields (persona sentences plus
/// dialogue context texts) and the persona index of the best distractor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainExample {
    pub persona: Vec<String>,
    pub context: Vec<String>,
    pub label: u32,
}

/// Outcome of one loss evaluation: the margin loss and the slots chosen as
/// positive and negative neighbors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemoryLoss {
    pub loss: f64,
    pub positive: usize,
    pub negative: usize,
}

/// The memory `(K, v, a)` plus the persona table its values index into.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryStore {
    config: MemoryConfig,
    /// Row-major `slots x dim`, every row unit-norm.
    keys: Vec<f64>,
    values: Vec<u32>,
    ages: Vec<u64>,
    persona_table: Vec<Condition>,
}

impl MemoryStore {
    /// Fresh store: seeded random unit keys, values assigned round-robin over
    /// the persona table (so every persona label exists from the start), all
    /// ages zero.
    pub fn init(
        config: MemoryConfig,
        persona_table: Vec<Condition>,
        seed: u64,
    ) -> Result<Self, MemoryError> {
        config.validate()?;
        if persona_table.is_empty() {
            return Err(MemoryError::EmptyPersonaTable);
        }
        let mut rng = SplitMix64::new(seed);
        let mut keys = Vec::with_capacity(config.slots * config.dim);
        for _ in 0..config.slots {
            keys.extend(rng.unit_vector(config.dim));
        }
        let values = (0..config.slots)
            .map(|i| (i % persona_table.len()) as u32)
            .collect();
        Ok(Self {
            config,
            keys,
            values,
            ages: vec![0; config.slots],
            persona_table,
        })
    }

    /// Rebuild from snapshot parts, revalidating every invariant.
    pub fn from_parts(
        config: MemoryConfig,
        keys: Vec<f64>,
        values: Vec<u32>,
        ages: Vec<u64>,
        persona_table: Vec<Condition>,
    ) -> Result<Self, MemoryError> {
        config.validate()?;
        if persona_table.is_empty() {
            return Err(MemoryError::EmptyPersonaTable);
        }
        if keys.len() != config.slots * config.dim {
            return Err(MemoryError::DimensionMismatch {
                expected: config.slots * config.dim,
                got: keys.len(),
            });
        }
        if values.len() != config.slots || ages.len() != config.slots {
            return Err(MemoryError::InvalidConfig("value/age vectors mismatch slots"));
        }
        for row in 0..config.slots {
            let norm = norm_of(&keys[row * config.dim..(row + 1) * config.dim]);
            if (norm - 1.0).abs() > 1e-6 {
                return Err(MemoryError::InvalidConfig("key row is not unit-norm"));
            }
        }
        for &value in &values {
            if value as usize >= persona_table.len() {
                return Err(MemoryError::InvalidLabel(value));
            }
        }
        Ok(Self {
            config,
            keys,
            values,
            ages,
            persona_table,
        })
    }

    pub fn config(&self) -> &MemoryConfig {
        &self.config
    }

    pub fn slots(&self) -> usize {
        self.config.slots
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn keys_flat(&self) -> &[f64] {
        &self.keys
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn ages(&self) -> &[u64] {
        &self.ages
    }

    pub fn persona_table(&self) -> &[Condition] {
        &self.persona_table
    }

    pub fn key_row(&self, slot: usize) -> &[f64] {
        &self.keys[slot * self.config.dim..(slot + 1) * self.config.dim]
    }

    fn similarity(&self, query: &[f64], slot: usize) -> f64 {
        dot(query, self.key_row(slot))
    }

    /// The `k` nearest slots by cosine similarity (keys and queries are
    /// unit-norm, so the dot product suffices), most similar first; ties
    /// break toward the lower slot index.
    pub fn knn(&self, query: &[f64], k: usize) -> Result<Vec<usize>, MemoryError> {
        if query.len() != self.config.dim {
            return Err(MemoryError::DimensionMismatch {
                expected: self.config.dim,
                got: query.len(),
            });
        }
        if k > self.config.slots {
            return Err(MemoryError::KTooLarge {
                k,
                slots: self.config.slots,
            });
        }
        let sims: Vec<f64> = (0..self.config.slots)
            .map(|slot| self.similarity(query, slot))
            .collect();
        let mut order: Vec<usize> = (0..self.config.slots).collect();
        order.sort_by(|&a, &b| {
            sims[b]
                .partial_cmp(&sims[a])
                .unwrap_or(core::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        order.truncate(k);
        Ok(order)
    }

    /// Margin ranking loss for a query with distractor label `label`.
    ///
    /// The positive neighbor is the smallest-index neighbor holding the
    /// label, or a seeded-random labeled slot from the whole store if the
    /// neighborhood has none. The negative neighbor is a seeded-random
    /// neighbor holding a different value, resampled from the whole store if
    /// every neighbor is positive.
    pub fn memory_loss(
        &self,
        query: &[f64],
        neighbors: &[usize],
        label: u32,
        rng: &mut SplitMix64,
    ) -> Result<MemoryLoss, MemoryError> {
        if query.len() != self.config.dim {
            return Err(MemoryError::DimensionMismatch {
                expected: self.config.dim,
                got: query.len(),
            });
        }
        let positive = match neighbors.iter().copied().filter(|&n| self.values[n] == label).min()
        {
            Some(slot) => slot,
            None => {
                let labeled: Vec<usize> = (0..self.config.slots)
                    .filter(|&slot| self.values[slot] == label)
                    .collect();
                if labeled.is_empty() {
                    return Err(MemoryError::UnlabeledPersona(label));
                }
                labeled[rng.gen_range(labeled.len())]
            }
        };
        let negative_neighbors: Vec<usize> = neighbors
            .iter()
            .copied()
            .filter(|&n| self.values[n] != label)
            .collect();
        let negative = if !negative_neighbors.is_empty() {
            negative_neighbors[rng.gen_range(negative_neighbors.len())]
        } else {
            let negatives: Vec<usize> = (0..self.config.slots)
                .filter(|&slot| self.values[slot] != label)
                .collect();
            if negatives.is_empty() {
                return Err(MemoryError::NoNegativeAvailable);
            }
            negatives[rng.gen_range(negatives.len())]
        };
        let loss = (self.similarity(query, negative) - self.similarity(query, positive)
            + self.config.margin)
            .max(0.0);
        Ok(MemoryLoss {
            loss,
            positive,
            negative,
        })
    }

    /// Write the query into the memory given the top-1 neighbor.
    ///
    /// Correct case (`v[n1] == label`): the key averages toward the query and
    /// renormalizes. Wrong case: the query replaces the oldest slot (ties
    /// break toward the lower index). Either way the touched slot's age
    /// resets to zero and every other age increments. Returns the touched
    /// slot.
    pub fn memory_update(
        &mut self,
        query: &[f64],
        top_neighbor: usize,
        label: u32,
    ) -> Result<usize, MemoryError> {
        if query.len() != self.config.dim {
            return Err(MemoryError::DimensionMismatch {
                expected: self.config.dim,
                got: query.len(),
            });
        }
        if label as usize >= self.persona_table.len() {
            return Err(MemoryError::InvalidLabel(label));
        }
        let touched = if self.values[top_neighbor] == label {
            let dim = self.config.dim;
            let start = top_neighbor * dim;
            let sum: Vec<f64> = query
                .iter()
                .zip(&self.keys[start..start + dim])
                .map(|(q, k)| q + k)
                .collect();
            let norm = norm_of(&sum);
            if norm > 1e-12 {
                for (key, value) in self.keys[start..start + dim].iter_mut().zip(&sum) {
                    *key = value / norm;
                }
            }
            // Antipodal query and key: the sum is zero, keep the key as-is.
            top_neighbor
        } else {
            let oldest = self.oldest_slot();
            let dim = self.config.dim;
            self.keys[oldest * dim..(oldest + 1) * dim].copy_from_slice(query);
            self.values[oldest] = label;
            oldest
        };
        for (slot, age) in self.ages.iter_mut().enumerate() {
            if slot == touched {
                *age = 0;
            } else {
                *age += 1;
            }
        }
        Ok(touched)
    }

    fn oldest_slot(&self) -> usize {
        let mut oldest = 0usize;
        for slot in 1..self.config.slots {
            if self.ages[slot] > self.ages[oldest] {
                oldest = slot;
            }
        }
        oldest
    }

    /// One pass of memory adaptation per epoch: embed each example, look up
    /// its neighborhood, record the margin loss, and apply the update. The
    /// visit order is reshuffled per epoch from the seed. Returns the mean
    /// loss per epoch.
    ///
    /// With the built-in hashing embedder the query map is fixed, so training
    /// adapts the memory only; the loss curve is still reported so a
    /// trainable encoder can plug in behind [`Embedder`].
    pub fn train_memory<E: Embedder + ?Sized>(
        &mut self,
        examples: &[TrainExample],
        embedder: &E,
        epochs: usize,
        seed: u64,
    ) -> Result<Vec<f64>, MemoryError> {
        if examples.is_empty() {
            return Err(MemoryError::NoExamples);
        }
        if embedder.dimension() != self.config.dim {
            return Err(MemoryError::DimensionMismatch {
                expected: self.config.dim,
                got: embedder.dimension(),
            });
        }
        for example in examples {
            if example.label as usize >= self.persona_table.len() {
                return Err(MemoryError::InvalidLabel(example.label));
            }
        }
        let queries: Vec<Vec<f64>> = examples
            .iter()
            .map(|ex| {
                let condition = Condition::persona_from_texts(&ex.persona)
                    .map_err(|_| MemoryError::InvalidConfig("example persona is empty"))?;
                Ok(embedder.embed(&condition, &ex.context))
            })
            .collect::<Result<_, MemoryError>>()?;

        let mut rng = SplitMix64::new(seed);
        let mut curve = Vec::with_capacity(epochs);
        let k = self.config.knn_k;
        for _ in 0..epochs {
            let mut order: Vec<usize> = (0..examples.len()).collect();
            rng.shuffle(&mut order);
            let mut epoch_loss = 0.0;
            for &index in &order {
                let query = &queries[index];
                let neighbors = self.knn(query, k)?;
                let loss = self.memory_loss(query, &neighbors, examples[index].label, &mut rng)?;
                epoch_loss += loss.loss;
                self.memory_update(query, neighbors[0], examples[index].label)?;
            }
            curve.push(epoch_loss / examples.len() as f64);
        }
        Ok(curve)
    }

    /// Retrieve up to `n` distractor conditions for a query: walk the nearest
    /// slots, collect distinct persona values, and skip any value that maps
    /// to the target persona itself. The flag reports a shortfall (fewer than
    /// `n` distinct non-target values exist).
    pub fn retrieve_distractors<E: Embedder + ?Sized>(
        &self,
        embedder: &E,
        persona: &Condition,
        context: &[String],
        n: usize,
    ) -> Result<(Vec<Condition>, bool), MemoryError> {
        if n == 0 {
            return Ok((Vec::new(), false));
        }
        let query = embedder.embed(persona, context);
        let order = self.knn(&query, self.config.slots)?;
        let mut taken: Vec<u32> = Vec::new();
        let mut result = Vec::new();
        for slot in order {
            let value = self.values[slot];
            if taken.contains(&value) {
                continue;
            }
            let condition = &self.persona_table[value as usize];
            if condition == persona {
                continue;
            }
            taken.push(value);
            result.push(condition.clone());
            if result.len() == n {
                break;
            }
        }
        let shortfall = result.len() < n;
        Ok((result, shortfall))
    }

    /// Fraction of training examples whose top-1 slot already holds their
    /// label.
    pub fn retrieval_accuracy<E: Embedder + ?Sized>(
        &self,
        embedder: &E,
        examples: &[TrainExample],
    ) -> Result<f64, MemoryError> {
        if examples.is_empty() {
            return Err(MemoryError::NoExamples);
        }
        let mut hits = 0usize;
        for example in examples {
            let condition = Condition::persona_from_texts(&example.persona)
                .map_err(|_| MemoryError::InvalidConfig("example persona is empty"))?;
            let query = embedder.embed(&condition, &example.context);
            let top = self.knn(&query, 1)?[0];
            if self.values[top] == example.label {
                hits += 1;
            }
        }
        Ok(hits as f64 / examples.len() as f64)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_of(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}
