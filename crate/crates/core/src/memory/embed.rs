//! Query embedding for the distractor memory.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::lm::Condition;
use crate::text;

/// Deterministic map from (condition sentences, dialogue context) to a
/// unit-norm query vector. The trait is the seam where a trainable contextual
/// encoder would plug in; the built-in implementation is training-free.
pub trait Embedder {
    fn dimension(&self) -> usize;

    /// Unit-norm query for a condition plus the raw texts of the dialogue
    /// context. Must be deterministic.
    fn embed(&self, condition: &Condition, context: &[String]) -> Vec<f64>;
}

/// Seeded feature hashing of token unigrams and bigrams into signed buckets,
/// then unit normalization. Dependency-free and deterministic; adequate to
/// cluster synthetic dialogue contexts.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dim: usize,
    seed_mix: u64,
}

pub const DEFAULT_EMBED_DIM: usize = 256;

impl HashingEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self {
            dim,
            seed_mix: splitmix_once(seed),
        }
    }

    fn hash_feature(&self, feature: &str) -> u64 {
        // FNV-1a over the feature bytes, offset by the seed.
        let mut h = 0xCBF2_9CE4_8422_2325u64 ^ self.seed_mix;
        for byte in feature.as_bytes() {
            h ^= *byte as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01B3);
        }
        h
    }

    fn accumulate(&self, buckets: &mut [f64], sentence_tokens: &[String]) {
        for window in 1..=2usize {
            if sentence_tokens.len() < window {
                continue;
            }
            for ngram in sentence_tokens.windows(window) {
                let feature = ngram.join(" ");
                let h = self.hash_feature(&feature);
                let bucket = (h % self.dim as u64) as usize;
                let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
                buckets[bucket] += sign;
            }
        }
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_EMBED_DIM, 0)
    }
}

impl Embedder for HashingEmbedder {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed(&self, condition: &Condition, context: &[String]) -> Vec<f64> {
        let mut buckets = vec![0.0; self.dim];
        for sentence in condition.sentences() {
            self.accumulate(&mut buckets, sentence);
        }
        for turn_text in context {
            self.accumulate(&mut buckets, &text::tokenize(turn_text));
        }
        let norm = libm::sqrt(buckets.iter().map(|x| x * x).sum::<f64>());
        if norm > 0.0 {
            for x in &mut buckets {
                *x /= norm;
            }
        } else {
            // No features at all; fall back to a fixed unit vector.
            buckets[0] = 1.0;
        }
        buckets
    }
}

fn splitmix_once(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn persona(texts: &[&str]) -> Condition {
        let texts: Vec<String> = texts.iter().map(|s| String::from(*s)).collect();
        Condition::persona_from_texts(&texts).unwrap()
    }

    #[test]
    fn output_is_unit_norm_and_deterministic() {
        let embedder = HashingEmbedder::new(64, 9);
        let condition = persona(&["i like rock music", "i have a dog"]);
        let context = vec![String::from("what do you like ?")];
        let a = embedder.embed(&condition, &context);
        let b = embedder.embed(&condition, &context);
        assert_eq!(a, b);
        let norm: f64 = a.iter().map(|x| x * x).sum();
        assert!((norm - 1.0).abs() < 1e-9);
    }

    #[test]
    fn different_content_embeds_differently() {
        let embedder = HashingEmbedder::default();
        let a = embedder.embed(&persona(&["i like rock music"]), &[]);
        let b = embedder.embed(&persona(&["i love eating pizza"]), &[]);
        assert_ne!(a, b);
    }

    #[test]
    fn context_contributes_to_the_query() {
        let embedder = HashingEmbedder::default();
        let condition = persona(&["i like rock music"]);
        let bare = embedder.embed(&condition, &[]);
        let with_context = embedder.embed(&condition, &[String::from("do you play sports ?")]);
        assert_ne!(bare, with_context);
    }

    #[test]
    fn seed_changes_the_hash_space() {
        let condition = persona(&["i like rock music"]);
        let a = HashingEmbedder::new(64, 1).embed(&condition, &[]);
        let b = HashingEmbedder::new(64, 2).embed(&condition, &[]);
        assert_ne!(a, b);
    }
}
