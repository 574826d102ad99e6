//! Ranking metrics, the triple-matching consistency oracle, token-overlap F1,
//! the C consistency score, and ROUGE.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use serde::{Deserialize, Serialize};

use super::data::{CandidateLabel, Triple};
use super::HarnessError;

/// Proportions of ground-truth, entailing, neutral, and contradictory
/// utterances among top-1 picks. The four components sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankingMetrics {
    pub hits_at_1: f64,
    pub entail_at_1: f64,
    pub neutral_at_1: f64,
    pub contradict_at_1: f64,
}

pub fn ranking_metrics(top1_labels: &[CandidateLabel]) -> Result<RankingMetrics, HarnessError> {
    if top1_labels.is_empty() {
        return Err(HarnessError::EmptyInput("top-1 label list"));
    }
    let n = top1_labels.len() as f64;
    let count = |label: CandidateLabel| {
        top1_labels.iter().filter(|&&l| l == label).count() as f64 / n
    };
    Ok(RankingMetrics {
        hits_at_1: count(CandidateLabel::Gt),
        entail_at_1: count(CandidateLabel::Entail),
        neutral_at_1: count(CandidateLabel::Neutral),
        contradict_at_1: count(CandidateLabel::Contradict),
    })
}

fn check_persona_consistency(persona_triples: &[Triple]) -> Result<(), HarnessError> {
    for (i, a) in persona_triples.iter().enumerate() {
        for b in &persona_triples[i + 1..] {
            if a.entity1 == b.entity1 && a.relation == b.relation && a.entity2 != b.entity2 {
                return Err(HarnessError::SelfContradictoryPersona);
            }
        }
    }
    Ok(())
}

/// Triple-matching consistency oracle, standing in for a trained NLI model:
/// `1` if any persona triple matches the candidate triple exactly, `-1` if
/// any persona triple shares `(entity1, relation)` with a different
/// `entity2`, `0` otherwise. Contradiction dominates entailment, and a
/// persona that contradicts itself is rejected.
pub fn triple_nli(
    candidate_triple: &Triple,
    persona_triples: &[Triple],
) -> Result<i8, HarnessError> {
    check_persona_consistency(persona_triples)?;
    let mut entails = false;
    let mut contradicts = false;
    for persona_triple in persona_triples {
        if persona_triple.entity1 == candidate_triple.entity1
            && persona_triple.relation == candidate_triple.relation
        {
            if persona_triple.entity2 == candidate_triple.entity2 {
                entails = true;
            } else {
                contradicts = true;
            }
        }
    }
    Ok(if contradicts {
        -1
    } else if entails {
        1
    } else {
        0
    })
}

/// Consistency score of one utterance triple against a persona: the sum over
/// persona sentences of the per-sentence oracle score. Bounded by the persona
/// size in absolute value.
pub fn c_score(utterance_triple: &Triple, persona_triples: &[Triple]) -> Result<i32, HarnessError> {
    check_persona_consistency(persona_triples)?;
    let mut total = 0i32;
    for persona_triple in persona_triples {
        total += triple_nli(utterance_triple, core::slice::from_ref(persona_triple))? as i32;
    }
    Ok(total)
}

/// C score for a generated utterance that may ground several triples: each
/// persona sentence contributes `-1` if any utterance triple contradicts it,
/// else `1` if any entails it, else `0`.
pub fn utterance_c_score(
    utterance_triples: &[Triple],
    persona_triples: &[Triple],
) -> Result<i32, HarnessError> {
    check_persona_consistency(persona_triples)?;
    let mut total = 0i32;
    for persona_triple in persona_triples {
        let mut sentence_score = 0i32;
        for utterance_triple in utterance_triples {
            match triple_nli(utterance_triple, core::slice::from_ref(persona_triple))? {
                -1 => {
                    sentence_score = -1;
                    break;
                }
                1 => sentence_score = 1,
                _ => {}
            }
        }
        total += sentence_score;
    }
    Ok(total)
}

fn multiset_overlap(a: &[String], b: &[String]) -> usize {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for token in b {
        *counts.entry(token.as_str()).or_insert(0) += 1;
    }
    let mut overlap = 0;
    for token in a {
        if let Some(count) = counts.get_mut(token.as_str()) {
            if *count > 0 {
                *count -= 1;
                overlap += 1;
            }
        }
    }
    overlap
}

fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Token-multiset F1 between a prediction and a reference. Empty input is
/// defined as 0.
pub fn word_f1(prediction: &[String], reference: &[String]) -> f64 {
    if prediction.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let overlap = multiset_overlap(prediction, reference) as f64;
    f1(
        overlap / prediction.len() as f64,
        overlap / reference.len() as f64,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeScores {
    pub rouge1: f64,
    pub rouge_l: f64,
}

/// ROUGE-1 (unigram F1) and ROUGE-L (longest-common-subsequence F1) with
/// equal precision/recall weighting. Empty input scores 0.
pub fn rouge_scores(candidate: &[String], reference: &[String]) -> RougeScores {
    if candidate.is_empty() || reference.is_empty() {
        return RougeScores {
            rouge1: 0.0,
            rouge_l: 0.0,
        };
    }
    let rouge1 = word_f1(candidate, reference);
    let lcs = lcs_length(candidate, reference) as f64;
    let rouge_l = f1(lcs / candidate.len() as f64, lcs / reference.len() as f64);
    RougeScores { rouge1, rouge_l }
}

fn lcs_length(a: &[String], b: &[String]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for a_token in a {
        let mut diagonal = 0;
        for (j, b_token) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if a_token == b_token {
                diagonal + 1
            } else {
                row[j + 1].max(row[j])
            };
            diagonal = up;
        }
    }
    row[b.len()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize;

    fn persona() -> Vec<Triple> {
        vec![
            Triple::new("i", "like_music", "rock"),
            Triple::new("i", "have_pet", "dog"),
        ]
    }

    // ---- triple_nli ----

    #[test]
    fn exact_match_entails() {
        assert_eq!(
            triple_nli(&Triple::new("i", "like_music", "rock"), &persona()).unwrap(),
            1
        );
    }

    #[test]
    fn same_relation_different_object_contradicts() {
        assert_eq!(
            triple_nli(&Triple::new("i", "like_music", "country"), &persona()).unwrap(),
            -1
        );
    }

    #[test]
    fn unrelated_relation_is_neutral() {
        assert_eq!(
            triple_nli(&Triple::new("i", "like_food", "pizza"), &persona()).unwrap(),
            0
        );
    }

    #[test]
    fn oracle_is_symmetric_in_persona_order() {
        let mut reversed = persona();
        reversed.reverse();
        let candidate = Triple::new("i", "have_pet", "cat");
        assert_eq!(
            triple_nli(&candidate, &persona()).unwrap(),
            triple_nli(&candidate, &reversed).unwrap()
        );
    }

    #[test]
    fn self_contradictory_persona_is_rejected() {
        let bad = vec![
            Triple::new("i", "like_music", "rock"),
            Triple::new("i", "like_music", "jazz"),
        ];
        assert_eq!(
            triple_nli(&Triple::new("i", "like_music", "rock"), &bad).unwrap_err(),
            HarnessError::SelfContradictoryPersona
        );
    }

    // ---- ranking_metrics ----

    #[test]
    fn all_gt_is_perfect() {
        let m = ranking_metrics(&[CandidateLabel::Gt; 4]).unwrap();
        assert_eq!(m.hits_at_1, 1.0);
        assert_eq!(m.entail_at_1 + m.neutral_at_1 + m.contradict_at_1, 0.0);
    }

    #[test]
    fn proportions_match_counting() {
        let labels = [
            CandidateLabel::Gt,
            CandidateLabel::Entail,
            CandidateLabel::Contradict,
            CandidateLabel::Gt,
        ];
        let m = ranking_metrics(&labels).unwrap();
        assert_eq!(m.hits_at_1, 0.5);
        assert_eq!(m.entail_at_1, 0.25);
        assert_eq!(m.neutral_at_1, 0.0);
        assert_eq!(m.contradict_at_1, 0.25);
    }

    #[test]
    fn empty_labels_are_an_error() {
        assert!(ranking_metrics(&[]).is_err());
    }

    // ---- word_f1 ----

    #[test]
    fn identical_sequences_score_one() {
        let tokens = tokenize("i like dogs");
        assert_eq!(word_f1(&tokens, &tokens), 1.0);
    }

    #[test]
    fn partial_overlap_matches_hand_value() {
        let f = word_f1(&tokenize("i like dogs"), &tokenize("i like cats"));
        assert!((f - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_sequences_score_zero() {
        assert_eq!(word_f1(&tokenize("a b"), &tokenize("c d")), 0.0);
        assert_eq!(word_f1(&[], &tokenize("c d")), 0.0);
    }

    #[test]
    fn repeated_tokens_use_multiset_counts() {
        let f = word_f1(&tokenize("a a b"), &tokenize("a b b"));
        // overlap = {a, b} = 2; P = R = 2/3
        assert!((f - 2.0 / 3.0).abs() < 1e-12);
    }

    // ---- c_score ----

    #[test]
    fn c_score_sums_per_sentence() {
        // Entails sentence 1, neutral to sentence 2 -> 1.
        assert_eq!(
            c_score(&Triple::new("i", "like_music", "rock"), &persona()).unwrap(),
            1
        );
        // Contradicts sentence 1, neutral to sentence 2 -> -1.
        assert_eq!(
            c_score(&Triple::new("i", "like_music", "pop"), &persona()).unwrap(),
            -1
        );
        // Neutral everywhere -> 0.
        assert_eq!(
            c_score(&Triple::new("i", "like_food", "pizza"), &persona()).unwrap(),
            0
        );
    }

    #[test]
    fn c_score_is_bounded_by_persona_size() {
        let triples: Vec<Triple> = (0..4)
            .map(|i| Triple::new("i", "like_music", if i == 0 { "rock" } else { "x" }))
            .collect();
        // Not a valid persona (self-contradictory), so bound-check on a clean one.
        assert!(triples.len() == 4);
        let p = persona();
        for e2 in ["rock", "country", "dog", "cat"] {
            for rel in ["like_music", "have_pet", "play_sport"] {
                let score = c_score(&Triple::new("i", rel, e2), &p).unwrap();
                assert!(score.unsigned_abs() as usize <= p.len());
            }
        }
    }

    #[test]
    fn utterance_c_score_lets_contradiction_dominate() {
        let extracted = vec![
            Triple::new("i", "like_music", "rock"),
            Triple::new("i", "like_music", "pop"),
        ];
        // Persona sentence 1 is both entailed (rock) and contradicted (pop):
        // contradiction wins for that sentence.
        assert_eq!(utterance_c_score(&extracted, &persona()).unwrap(), -1);
    }

    // ---- rouge ----

    #[test]
    fn identical_sequences_rouge_one() {
        let tokens = tokenize("a b c d");
        let scores = rouge_scores(&tokens, &tokens);
        assert_eq!(scores.rouge1, 1.0);
        assert_eq!(scores.rouge_l, 1.0);
    }

    #[test]
    fn transposition_matches_hand_lcs() {
        let scores = rouge_scores(&tokenize("a b c d"), &tokenize("a c b d"));
        assert!((scores.rouge1 - 1.0).abs() < 1e-12);
        // LCS("abcd", "acbd") = 3 -> F1 = 0.75
        assert!((scores.rouge_l - 0.75).abs() < 1e-12);
    }

    #[test]
    fn disjoint_sequences_rouge_zero() {
        let scores = rouge_scores(&tokenize("a b"), &tokenize("c d"));
        assert_eq!(scores.rouge1, 0.0);
        assert_eq!(scores.rouge_l, 0.0);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn ranking_metrics_sum_to_one(raw in prop::collection::vec(0u8..4, 1..200)) {
                let labels: Vec<CandidateLabel> = raw
                    .into_iter()
                    .map(|x| match x {
                        0 => CandidateLabel::Gt,
                        1 => CandidateLabel::Entail,
                        2 => CandidateLabel::Neutral,
                        _ => CandidateLabel::Contradict,
                    })
                    .collect();
                let m = ranking_metrics(&labels).unwrap();
                let sum = m.hits_at_1 + m.entail_at_1 + m.neutral_at_1 + m.contradict_at_1;
                prop_assert!((sum - 1.0).abs() < 1e-12);
            }

            #[test]
            fn word_f1_is_bounded_and_symmetric_on_identity(
                tokens in prop::collection::vec(prop::sample::select(vec!["a","b","c","d"]), 1..12)
            ) {
                let tokens: Vec<String> = tokens.into_iter().map(String::from).collect();
                prop_assert_eq!(word_f1(&tokens, &tokens), 1.0);
                let other: Vec<String> = vec![String::from("z")];
                let f = word_f1(&tokens, &other);
                prop_assert!((0.0..=1.0).contains(&f));
            }
        }
    }
}
