//! Probability vectors over the vocabulary.

use alloc::vec::Vec;

use super::vocab::TokenId;
use super::LmError;

const SUM_TOLERANCE: f64 = 1e-9;

/// A normalized probability vector over a fixed vocabulary: the currency of
/// all speaker and listener math. Sums to 1 within `1e-9`; speakers with
/// positive smoothing produce strictly positive coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenDistribution {
    probs: Vec<f64>,
}

impl TokenDistribution {
    /// Validating constructor: nonnegative coordinates summing to 1 ± 1e-9.
    pub fn new(probs: Vec<f64>) -> Result<Self, LmError> {
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|&p| !p.is_finite() || p < 0.0) || (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(LmError::InvalidDistribution(sum));
        }
        Ok(Self { probs })
    }

    /// Normalize a vector of nonnegative weights. Returns an error if the
    /// weights are degenerate (zero or non-finite total).
    pub fn from_weights(weights: Vec<f64>) -> Result<Self, LmError> {
        let sum: f64 = weights.iter().sum();
        if !sum.is_finite() || sum <= 0.0 || weights.iter().any(|&w| !w.is_finite() || w < 0.0) {
            return Err(LmError::InvalidDistribution(sum));
        }
        Ok(Self {
            probs: weights.into_iter().map(|w| w / sum).collect(),
        })
    }

    #[inline]
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    #[inline]
    pub fn get(&self, id: TokenId) -> f64 {
        self.probs[id.index()]
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Highest-probability token; ties break toward the lowest token id.
    pub fn argmax(&self) -> TokenId {
        let mut best = 0usize;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        TokenId(best as u32)
    }

    /// The `k` most probable tokens in descending probability order; ties
    /// break toward the lowest token id.
    pub fn top_k(&self, k: usize) -> Vec<(TokenId, f64)> {
        let mut order: Vec<usize> = (0..self.probs.len()).collect();
        order.sort_by(|&a, &b| {
            self.probs[b]
                .partial_cmp(&self.probs[a])
                .unwrap_or(core::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        order
            .into_iter()
            .take(k)
            .map(|i| (TokenId(i as u32), self.probs[i]))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sum() {
        assert!(TokenDistribution::new(vec![0.5, 0.4]).is_err());
        assert!(TokenDistribution::new(vec![0.5, 0.5]).is_ok());
    }

    #[test]
    fn rejects_negative_coordinates() {
        assert!(TokenDistribution::new(vec![1.1, -0.1]).is_err());
    }

    #[test]
    fn argmax_ties_break_low() {
        let d = TokenDistribution::new(vec![0.4, 0.4, 0.2]).unwrap();
        assert_eq!(d.argmax(), TokenId(0));
    }

    #[test]
    fn top_k_is_sorted_with_stable_ties() {
        let d = TokenDistribution::new(vec![0.1, 0.3, 0.3, 0.3]).unwrap();
        let top = d.top_k(3);
        assert_eq!(
            top.iter().map(|(id, _)| id.0).collect::<Vec<_>>(),
            vec![1, 2, 3]
        );
    }

    #[test]
    fn from_weights_normalizes() {
        let d = TokenDistribution::from_weights(vec![2.0, 2.0]).unwrap();
        assert_eq!(d.probs(), &[0.5, 0.5]);
    }
}
