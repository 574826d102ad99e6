//! The built-in deterministic conditional base speaker.
//!
//! `ConditionedNGramSpeaker` mixes three add-k smoothed components:
//! a unigram over the condition's token multiset, an order-n model over the
//! dialogue stream, and a background unigram over the training corpus. The
//! mixture guarantees full support, which the listener recursion requires,
//! and identical inputs always produce bit-identical distributions.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::text;

use super::dist::TokenDistribution;
use super::vocab::{TokenId, Vocabulary, BOS, EOS};
use super::{LmError, Speaker};

const WEIGHT_TOLERANCE: f64 = 1e-9;

/// Which role produced a dialogue turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpeakerTag {
    /// The agent whose utterances are being modeled.
    #[serde(rename = "self")]
    Agent,
    #[serde(rename = "partner")]
    Partner,
}

/// What a condition's sentences describe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConditionKind {
    Persona,
    OwnHistory,
}

/// The text a speaker is conditioned on: persona sentences, or the agent's
/// own prior responses when decoding for context consistency. Tokens are
/// stored as strings and resolved against a vocabulary at query time, so a
/// condition never becomes invalid under a different speaker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    sentences: Vec<Vec<String>>,
    kind: ConditionKind,
}

impl Condition {
    pub fn new(sentences: Vec<Vec<String>>, kind: ConditionKind) -> Result<Self, LmError> {
        let sentences: Vec<Vec<String>> =
            sentences.into_iter().filter(|s| !s.is_empty()).collect();
        if sentences.is_empty() {
            return Err(LmError::EmptyCondition);
        }
        Ok(Self { sentences, kind })
    }

    /// Tokenize raw sentence texts into a persona condition.
    pub fn persona_from_texts<S: AsRef<str>>(texts: &[S]) -> Result<Self, LmError> {
        Self::from_texts(texts, ConditionKind::Persona)
    }

    /// Tokenize raw texts (typically the agent's past responses) into an
    /// own-history condition.
    pub fn own_history_from_texts<S: AsRef<str>>(texts: &[S]) -> Result<Self, LmError> {
        Self::from_texts(texts, ConditionKind::OwnHistory)
    }

    fn from_texts<S: AsRef<str>>(texts: &[S], kind: ConditionKind) -> Result<Self, LmError> {
        Self::new(
            texts.iter().map(|t| text::tokenize(t.as_ref())).collect(),
            kind,
        )
    }

    pub fn sentences(&self) -> &[Vec<String>] {
        &self.sentences
    }

    pub fn kind(&self) -> ConditionKind {
        self.kind
    }

    /// Sentences as plain text, one string per sentence.
    pub fn sentence_texts(&self) -> Vec<String> {
        self.sentences.iter().map(|s| text::detokenize(s)).collect()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &String> {
        self.sentences.iter().flatten()
    }
}

/// One past turn: who spoke and the tokens they produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryTurn {
    pub speaker: SpeakerTag,
    pub tokens: Vec<String>,
}

/// Chronological dialogue history. Tags are expected to alternate but this is
/// not enforced; data is taken as given.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueHistory {
    turns: Vec<HistoryTurn>,
}

impl DialogueHistory {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_texts<S: AsRef<str>>(turns: &[(SpeakerTag, S)]) -> Self {
        let mut history = Self::empty();
        for (speaker, turn_text) in turns {
            history.push_text(*speaker, turn_text.as_ref());
        }
        history
    }

    pub fn push_text(&mut self, speaker: SpeakerTag, turn_text: &str) {
        self.turns.push(HistoryTurn {
            speaker,
            tokens: text::tokenize(turn_text),
        });
    }

    pub fn turns(&self) -> &[HistoryTurn] {
        &self.turns
    }

    /// Texts of the agent's own turns, in order.
    pub fn own_turn_texts(&self) -> Vec<String> {
        self.turns
            .iter()
            .filter(|t| t.speaker == SpeakerTag::Agent)
            .map(|t| text::detokenize(&t.tokens))
            .collect()
    }
}

/// One line of the training corpus: a condition and the turns spoken under it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingDialogue {
    pub condition: Vec<String>,
    pub turns: Vec<TrainingTurn>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingTurn {
    pub speaker: SpeakerTag,
    pub text: String,
}

/// Mixture and smoothing parameters for [`ConditionedNGramSpeaker`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeakerConfig {
    /// History model order `n`; the context is the previous `n - 1` tokens.
    pub order: usize,
    pub lambda_cond: f64,
    pub lambda_hist: f64,
    pub lambda_bg: f64,
    /// Add-k smoothing constant, applied per mixture component.
    pub smoothing: f64,
}

impl Default for SpeakerConfig {
    fn default() -> Self {
        Self {
            order: 2,
            lambda_cond: 0.5,
            lambda_hist: 0.3,
            lambda_bg: 0.2,
            smoothing: 0.01,
        }
    }
}

impl SpeakerConfig {
    pub fn validate(&self) -> Result<(), LmError> {
        if self.order < 1 {
            return Err(LmError::InvalidOrder(self.order));
        }
        let (c, h, b) = (self.lambda_cond, self.lambda_hist, self.lambda_bg);
        if c < 0.0 || h < 0.0 || b < 0.0 || ((c + h + b) - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(LmError::InvalidWeights(c, h, b));
        }
        if !self.smoothing.is_finite() || self.smoothing <= 0.0 {
            return Err(LmError::InvalidSmoothing(self.smoothing));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct CountTable {
    counts: BTreeMap<TokenId, u32>,
    total: u64,
}

impl CountTable {
    fn add(&mut self, token: TokenId) {
        *self.counts.entry(token).or_insert(0) += 1;
        self.total += 1;
    }
}

/// Deterministic base speaker: an add-k smoothed mixture of condition,
/// history, and background statistics. Immutable after training, hence safe
/// to share across readers.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionedNGramSpeaker {
    config: SpeakerConfig,
    vocab: Vocabulary,
    hist: BTreeMap<Vec<TokenId>, CountTable>,
    bg: CountTable,
}

/// `(token id, count)` pairs of one count table.
pub type TokenCounts = Vec<(u32, u32)>;
/// `(context ids, token counts)` rows of the history model.
pub type ContextCounts = Vec<(Vec<u32>, TokenCounts)>;

/// Flat, serialization-friendly view of a trained speaker. Snapshot formats
/// are owned by the IO layer; this type is the stable bridge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerParts {
    pub config: SpeakerConfig,
    pub vocab: Vec<String>,
    pub hist: ContextCounts,
    pub bg: TokenCounts,
}

impl ConditionedNGramSpeaker {
    /// Train on a corpus of (condition, turns) dialogues. The vocabulary is
    /// closed over all corpus tokens plus the reserved markers, in first-seen
    /// order.
    pub fn train(corpus: &[TrainingDialogue], config: SpeakerConfig) -> Result<Self, LmError> {
        config.validate()?;
        if corpus.is_empty() {
            return Err(LmError::EmptyCorpus);
        }

        let mut seen: Vec<String> = Vec::new();
        let mut tokenized_turns: Vec<Vec<Vec<String>>> = Vec::new();
        for dialogue in corpus {
            for sentence in &dialogue.condition {
                seen.extend(text::tokenize(sentence));
            }
            let turn_tokens: Vec<Vec<String>> = dialogue
                .turns
                .iter()
                .map(|t| text::tokenize(&t.text))
                .collect();
            for token in turn_tokens.iter().flatten() {
                seen.push(token.clone());
            }
            tokenized_turns.push(turn_tokens);
        }
        let vocab = Vocabulary::build(seen.iter().map(|s| s.as_str()));

        let mut speaker = ConditionedNGramSpeaker {
            config,
            vocab,
            hist: BTreeMap::new(),
            bg: CountTable::default(),
        };
        for turns in &tokenized_turns {
            speaker.count_dialogue(turns);
        }
        Ok(speaker)
    }

    /// Count one dialogue's turn stream: `order - 1` begin markers, then each
    /// turn's tokens followed by an end marker. Every stream target feeds both
    /// the history n-gram table and the background unigram.
    fn count_dialogue(&mut self, turns: &[Vec<String>]) {
        let ctx_len = self.config.order - 1;
        let mut stream: Vec<TokenId> = vec![BOS; ctx_len];
        for turn in turns {
            for token in turn {
                stream.push(self.vocab.id(token));
            }
            stream.push(EOS);
        }
        for i in ctx_len..stream.len() {
            let context = stream[i - ctx_len..i].to_vec();
            let target = stream[i];
            self.hist.entry(context).or_default().add(target);
            self.bg.add(target);
        }
    }

    pub fn config(&self) -> &SpeakerConfig {
        &self.config
    }

    /// The last `order - 1` tokens of the conversation stream so far:
    /// history turns (each closed with an end marker) followed by the partial
    /// utterance, padded at the front with begin markers.
    fn context_window(&self, history: &DialogueHistory, partial: &[TokenId]) -> Vec<TokenId> {
        let ctx_len = self.config.order - 1;
        let mut stream: Vec<TokenId> = vec![BOS; ctx_len];
        for turn in history.turns() {
            for token in &turn.tokens {
                stream.push(self.vocab.id(token));
            }
            stream.push(EOS);
        }
        stream.extend_from_slice(partial);
        stream[stream.len() - ctx_len..].to_vec()
    }

    /// Log-probability of an utterance under the speaker: the sum over
    /// positions of the log-probability of each token given everything before
    /// it. Full support keeps the result finite.
    pub fn sequence_logprob(
        &self,
        condition: &Condition,
        history: &DialogueHistory,
        utterance: &[TokenId],
    ) -> Result<f64, LmError> {
        if utterance.is_empty() {
            return Err(LmError::EmptyUtterance);
        }
        let mut logprob = 0.0;
        for t in 0..utterance.len() {
            let dist = self.next_token_distribution(condition, history, &utterance[..t]);
            logprob += libm::log(dist.get(utterance[t]));
        }
        Ok(logprob)
    }

    /// Per-position perplexity `exp(-log p)` for each utterance token, paired
    /// with the token string.
    pub fn per_token_report(
        &self,
        condition: &Condition,
        history: &DialogueHistory,
        utterance: &[TokenId],
    ) -> Result<Vec<(String, f64)>, LmError> {
        if utterance.is_empty() {
            return Err(LmError::EmptyUtterance);
        }
        let mut report = Vec::with_capacity(utterance.len());
        for t in 0..utterance.len() {
            let dist = self.next_token_distribution(condition, history, &utterance[..t]);
            let p = dist.get(utterance[t]);
            report.push((
                String::from(self.vocab.token(utterance[t])),
                libm::exp(-libm::log(p)),
            ));
        }
        Ok(report)
    }

    /// Perplexity of an utterance: `exp(-logprob / len)`.
    pub fn perplexity(
        &self,
        condition: &Condition,
        history: &DialogueHistory,
        utterance: &[TokenId],
    ) -> Result<f64, LmError> {
        let logprob = self.sequence_logprob(condition, history, utterance)?;
        Ok(libm::exp(-logprob / utterance.len() as f64))
    }

    pub fn to_parts(&self) -> SpeakerParts {
        SpeakerParts {
            config: self.config,
            vocab: self.vocab.tokens().to_vec(),
            hist: self
                .hist
                .iter()
                .map(|(ctx, table)| {
                    (
                        ctx.iter().map(|id| id.0).collect(),
                        table.counts.iter().map(|(id, &c)| (id.0, c)).collect(),
                    )
                })
                .collect(),
            bg: self.bg.counts.iter().map(|(id, &c)| (id.0, c)).collect(),
        }
    }

    pub fn from_parts(parts: SpeakerParts) -> Result<Self, LmError> {
        parts.config.validate()?;
        let vocab = Vocabulary::from_ordered_tokens(parts.vocab)
            .ok_or(LmError::InvalidSnapshot("malformed vocabulary"))?;
        let v = vocab.len() as u32;
        let valid = |id: u32| id < v;
        let mut hist = BTreeMap::new();
        for (ctx, pairs) in parts.hist {
            if ctx.len() != parts.config.order - 1 || ctx.iter().any(|&id| !valid(id)) {
                return Err(LmError::InvalidSnapshot("bad n-gram context"));
            }
            let mut table = CountTable::default();
            for (id, count) in pairs {
                if !valid(id) {
                    return Err(LmError::InvalidSnapshot("token id out of range"));
                }
                table.counts.insert(TokenId(id), count);
                table.total += count as u64;
            }
            hist.insert(ctx.into_iter().map(TokenId).collect(), table);
        }
        let mut bg = CountTable::default();
        for (id, count) in parts.bg {
            if !valid(id) {
                return Err(LmError::InvalidSnapshot("token id out of range"));
            }
            bg.counts.insert(TokenId(id), count);
            bg.total += count as u64;
        }
        Ok(Self {
            config: parts.config,
            vocab,
            hist,
            bg,
        })
    }
}

impl Speaker for ConditionedNGramSpeaker {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn next_token_distribution(
        &self,
        condition: &Condition,
        history: &DialogueHistory,
        partial: &[TokenId],
    ) -> TokenDistribution {
        let v = self.vocab.len();
        let k = self.config.smoothing;
        let kv = k * v as f64;

        // Condition component: unigram over the condition's token multiset,
        // computed against this speaker's vocabulary at query time.
        let mut cond_counts: BTreeMap<TokenId, u32> = BTreeMap::new();
        let mut cond_total = 0u64;
        for token in condition.tokens() {
            *cond_counts.entry(self.vocab.id(token)).or_insert(0) += 1;
            cond_total += 1;
        }

        let context = self.context_window(history, partial);
        let empty = CountTable::default();
        let hist_table = self.hist.get(&context).unwrap_or(&empty);

        let denom_cond = cond_total as f64 + kv;
        let denom_hist = hist_table.total as f64 + kv;
        let denom_bg = self.bg.total as f64 + kv;

        let floor = self.config.lambda_cond * k / denom_cond
            + self.config.lambda_hist * k / denom_hist
            + self.config.lambda_bg * k / denom_bg;
        let mut probs = vec![floor; v];
        for (&id, &count) in &cond_counts {
            probs[id.index()] += self.config.lambda_cond * count as f64 / denom_cond;
        }
        for (&id, &count) in &hist_table.counts {
            probs[id.index()] += self.config.lambda_hist * count as f64 / denom_hist;
        }
        for (&id, &count) in &self.bg.counts {
            probs[id.index()] += self.config.lambda_bg * count as f64 / denom_bg;
        }

        debug_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        TokenDistribution::new(probs).expect("smoothed mixture is a valid distribution")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::resolve_tokens;
    use crate::lm::vocab::UNK;

    fn dialogue(condition: &[&str], turns: &[(&str, SpeakerTag)]) -> TrainingDialogue {
        TrainingDialogue {
            condition: condition.iter().map(|s| String::from(*s)).collect(),
            turns: turns
                .iter()
                .map(|(turn_text, speaker)| TrainingTurn {
                    speaker: *speaker,
                    text: String::from(*turn_text),
                })
                .collect(),
        }
    }

    fn config(order: usize, weights: (f64, f64, f64), k: f64) -> SpeakerConfig {
        SpeakerConfig {
            order,
            lambda_cond: weights.0,
            lambda_hist: weights.1,
            lambda_bg: weights.2,
            smoothing: k,
        }
    }

    fn rock_corpus() -> Vec<TrainingDialogue> {
        vec![dialogue(&[], &[("i like rock", SpeakerTag::Agent)])]
    }

    #[test]
    fn background_only_speaker_matches_add_k_arithmetic() {
        let speaker =
            ConditionedNGramSpeaker::train(&rock_corpus(), config(1, (0.0, 0.0, 1.0), 0.01))
                .unwrap();
        // vocab: <bos> <eos> <unk> i like rock -> V = 6
        // bg counts: i, like, rock, <eos> each once -> total 4
        let cond = Condition::persona_from_texts(&["i"]).unwrap();
        let dist =
            speaker.next_token_distribution(&cond, &DialogueHistory::empty(), &[]);
        let expected = (1.0 + 0.01) / (4.0 + 0.01 * 6.0);
        let rock = speaker.vocab().id("rock");
        assert!((dist.get(rock) - expected).abs() < 1e-15);
        assert!((dist.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn condition_dominates_when_weighted_fully() {
        let speaker =
            ConditionedNGramSpeaker::train(&rock_corpus(), config(1, (1.0, 0.0, 0.0), 0.01))
                .unwrap();
        let cond = Condition::persona_from_texts(&["jazz"]).unwrap();
        let dist =
            speaker.next_token_distribution(&cond, &DialogueHistory::empty(), &[]);
        // "jazz" is out of vocabulary and resolves to <unk>.
        let rock = speaker.vocab().id("rock");
        assert!(dist.get(UNK) > dist.get(rock));
    }

    #[test]
    fn condition_unigram_matches_hand_evaluation() {
        // Effective vocab {a, b} plus reserved: V = 5.
        let corpus = vec![dialogue(&[], &[("a b", SpeakerTag::Agent)])];
        let speaker =
            ConditionedNGramSpeaker::train(&corpus, config(1, (1.0, 0.0, 0.0), 0.01)).unwrap();
        assert_eq!(speaker.vocab().len(), 5);
        let cond = Condition::persona_from_texts(&["a a a"]).unwrap();
        let dist =
            speaker.next_token_distribution(&cond, &DialogueHistory::empty(), &[]);
        let a = speaker.vocab().id("a");
        let expected = (3.0 + 0.01) / (3.0 + 0.01 * 5.0);
        assert!((dist.get(a) - expected).abs() < 1e-15);
    }

    #[test]
    fn training_is_deterministic() {
        let corpus = vec![
            dialogue(&["i like jazz"], &[("hello there", SpeakerTag::Partner)]),
            dialogue(&["i own a dog"], &[("i like my dog", SpeakerTag::Agent)]),
        ];
        let a = ConditionedNGramSpeaker::train(&corpus, SpeakerConfig::default()).unwrap();
        let b = ConditionedNGramSpeaker::train(&corpus, SpeakerConfig::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_parts(), b.to_parts());
    }

    #[test]
    fn empty_corpus_is_a_configuration_error() {
        assert_eq!(
            ConditionedNGramSpeaker::train(&[], SpeakerConfig::default()).unwrap_err(),
            LmError::EmptyCorpus
        );
    }

    #[test]
    fn invalid_weights_and_smoothing_are_rejected() {
        let corpus = rock_corpus();
        assert!(matches!(
            ConditionedNGramSpeaker::train(&corpus, config(1, (0.7, 0.2, 0.2), 0.01)),
            Err(LmError::InvalidWeights(..))
        ));
        assert!(matches!(
            ConditionedNGramSpeaker::train(&corpus, config(1, (-0.2, 0.6, 0.6), 0.01)),
            Err(LmError::InvalidWeights(..))
        ));
        assert!(matches!(
            ConditionedNGramSpeaker::train(&corpus, config(1, (0.5, 0.3, 0.2), 0.0)),
            Err(LmError::InvalidSmoothing(_))
        ));
    }

    #[test]
    fn distributions_are_normalized_and_strictly_positive() {
        let corpus = vec![
            dialogue(
                &["i like jazz", "i have a cat"],
                &[
                    ("what do you like ?", SpeakerTag::Partner),
                    ("i like jazz a lot", SpeakerTag::Agent),
                ],
            ),
        ];
        let speaker = ConditionedNGramSpeaker::train(&corpus, SpeakerConfig::default()).unwrap();
        let cond = Condition::persona_from_texts(&["i have a cat"]).unwrap();
        let history = DialogueHistory::from_texts(&[(SpeakerTag::Partner, "what do you like ?")]);
        let partial = resolve_tokens(speaker.vocab(), &crate::text::tokenize("i like"));
        let dist = speaker.next_token_distribution(&cond, &history, &partial);
        assert!((dist.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(dist.probs().iter().all(|&p| p > 0.0));
    }

    #[test]
    fn sequence_logprob_follows_chain_rule() {
        let corpus = vec![dialogue(
            &["i like rock"],
            &[("a b a b", SpeakerTag::Agent), ("b a", SpeakerTag::Partner)],
        )];
        let speaker = ConditionedNGramSpeaker::train(&corpus, SpeakerConfig::default()).unwrap();
        let cond = Condition::persona_from_texts(&["i like rock"]).unwrap();
        let history = DialogueHistory::empty();
        let a = speaker.vocab().id("a");
        let b = speaker.vocab().id("b");

        let prefix = speaker.sequence_logprob(&cond, &history, &[a]).unwrap();
        let full = speaker.sequence_logprob(&cond, &history, &[a, b]).unwrap();
        let step = speaker.next_token_distribution(&cond, &history, &[a]).get(b);
        assert!((full - (prefix + libm::log(step))).abs() < 1e-9);
    }

    #[test]
    fn single_token_logprob_matches_distribution() {
        let speaker =
            ConditionedNGramSpeaker::train(&rock_corpus(), SpeakerConfig::default()).unwrap();
        let cond = Condition::persona_from_texts(&["i like rock"]).unwrap();
        let history = DialogueHistory::empty();
        let rock = speaker.vocab().id("rock");
        let lp = speaker.sequence_logprob(&cond, &history, &[rock]).unwrap();
        let p = speaker
            .next_token_distribution(&cond, &history, &[])
            .get(rock);
        assert!((lp - libm::log(p)).abs() < 1e-12);
    }

    #[test]
    fn empty_utterance_is_an_input_error() {
        let speaker =
            ConditionedNGramSpeaker::train(&rock_corpus(), SpeakerConfig::default()).unwrap();
        let cond = Condition::persona_from_texts(&["i like rock"]).unwrap();
        assert_eq!(
            speaker
                .sequence_logprob(&cond, &DialogueHistory::empty(), &[])
                .unwrap_err(),
            LmError::EmptyUtterance
        );
    }

    #[test]
    fn matched_training_statistics_give_lower_perplexity() {
        // Both corpora cover the same words (full-support smoothing would
        // otherwise reward the out-of-vocabulary collapse), but only one was
        // trained on the utterance's actual statistics.
        let matched_corpus = vec![dialogue(
            &["i like rock music"],
            &[
                ("i like to listen to rock music", SpeakerTag::Agent),
                ("i like to listen to rock music", SpeakerTag::Agent),
            ],
        )];
        let scrambled_corpus = vec![dialogue(
            &["i like rock music"],
            &[
                ("music to bread listen sourdough i rock like", SpeakerTag::Agent),
                ("my oven is always warm and full of bread", SpeakerTag::Agent),
            ],
        )];
        let matched =
            ConditionedNGramSpeaker::train(&matched_corpus, SpeakerConfig::default()).unwrap();
        let scrambled =
            ConditionedNGramSpeaker::train(&scrambled_corpus, SpeakerConfig::default()).unwrap();

        let cond = Condition::persona_from_texts(&["i like rock music"]).unwrap();
        let gt = crate::text::tokenize("i like to listen to rock music");
        let ids_m = resolve_tokens(matched.vocab(), &gt);
        let ids_s = resolve_tokens(scrambled.vocab(), &gt);
        let ppl_matched = matched
            .perplexity(&cond, &DialogueHistory::empty(), &ids_m)
            .unwrap();
        let ppl_scrambled = scrambled
            .perplexity(&cond, &DialogueHistory::empty(), &ids_s)
            .unwrap();
        assert!(ppl_matched < ppl_scrambled);
    }

    #[test]
    fn per_token_report_reconstructs_sequence_logprob() {
        let speaker =
            ConditionedNGramSpeaker::train(&rock_corpus(), SpeakerConfig::default()).unwrap();
        let cond = Condition::persona_from_texts(&["i like rock"]).unwrap();
        let history = DialogueHistory::empty();
        let utterance = resolve_tokens(speaker.vocab(), &crate::text::tokenize("i like rock"));
        let report = speaker
            .per_token_report(&cond, &history, &utterance)
            .unwrap();
        assert_eq!(report.len(), 3);
        assert_eq!(report[0].0, "i");
        let logprob = speaker
            .sequence_logprob(&cond, &history, &utterance)
            .unwrap();
        let reconstructed: f64 = report.iter().map(|(_, ppl)| -libm::log(*ppl)).sum();
        assert!((reconstructed - logprob).abs() < 1e-9);
        assert!(report.iter().all(|(_, ppl)| *ppl > 1.0));
    }

    #[test]
    fn distinct_conditions_shift_the_distribution() {
        let corpus = vec![dialogue(
            &["i like rock", "i like jazz"],
            &[("rock and jazz", SpeakerTag::Agent)],
        )];
        let speaker =
            ConditionedNGramSpeaker::train(&corpus, config(2, (0.6, 0.2, 0.2), 0.01)).unwrap();
        let rock_cond = Condition::persona_from_texts(&["i like rock"]).unwrap();
        let jazz_cond = Condition::persona_from_texts(&["i like jazz"]).unwrap();
        let history = DialogueHistory::empty();
        let d_rock = speaker.next_token_distribution(&rock_cond, &history, &[]);
        let d_jazz = speaker.next_token_distribution(&jazz_cond, &history, &[]);
        let rock = speaker.vocab().id("rock");
        assert!(d_rock.get(rock) > d_jazz.get(rock));
        assert_ne!(d_rock, d_jazz);
    }

    #[test]
    fn parts_round_trip_preserves_the_speaker() {
        let corpus = vec![
            dialogue(
                &["i like jazz"],
                &[
                    ("what do you like ?", SpeakerTag::Partner),
                    ("jazz is my thing", SpeakerTag::Agent),
                ],
            ),
        ];
        let speaker = ConditionedNGramSpeaker::train(&corpus, SpeakerConfig::default()).unwrap();
        let rebuilt = ConditionedNGramSpeaker::from_parts(speaker.to_parts()).unwrap();
        assert_eq!(rebuilt, speaker);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_corpus() -> impl Strategy<Value = Vec<TrainingDialogue>> {
            let word = prop::sample::select(vec!["a", "b", "c", "d", "rock", "jazz"]);
            let sentence = prop::collection::vec(word, 1..5)
                .prop_map(|words| words.join(" "));
            let turns = prop::collection::vec(sentence.clone(), 1..4).prop_map(|texts| {
                texts
                    .into_iter()
                    .enumerate()
                    .map(|(i, turn_text)| TrainingTurn {
                        speaker: if i % 2 == 0 {
                            SpeakerTag::Partner
                        } else {
                            SpeakerTag::Agent
                        },
                        text: turn_text,
                    })
                    .collect::<Vec<_>>()
            });
            prop::collection::vec(
                (prop::collection::vec(sentence, 1..3), turns)
                    .prop_map(|(condition, turns)| TrainingDialogue { condition, turns }),
                1..4,
            )
        }

        proptest! {
            #[test]
            fn mixture_is_linear_in_the_weights(
                corpus in arb_corpus(),
                wa in (0.0f64..1.0, 0.0f64..1.0),
                wb in (0.0f64..1.0, 0.0f64..1.0),
            ) {
                // Two weight vectors on the simplex plus their midpoint.
                let norm = |(x, y): (f64, f64)| {
                    let rest = 1.0 - x.min(1.0);
                    (x.min(1.0), y.min(1.0) * rest, rest - y.min(1.0) * rest)
                };
                let (c1, h1, b1) = norm(wa);
                let (c2, h2, b2) = norm(wb);
                let mid = ((c1 + c2) / 2.0, (h1 + h2) / 2.0, (b1 + b2) / 2.0);

                let mk = |(c, h, b): (f64, f64, f64)| SpeakerConfig {
                    order: 2,
                    lambda_cond: c,
                    lambda_hist: h,
                    lambda_bg: b,
                    smoothing: 0.01,
                };
                let s1 = ConditionedNGramSpeaker::train(&corpus, mk((c1, h1, b1))).unwrap();
                let s2 = ConditionedNGramSpeaker::train(&corpus, mk((c2, h2, b2))).unwrap();
                let sm = ConditionedNGramSpeaker::train(&corpus, mk(mid)).unwrap();

                let cond = Condition::persona_from_texts(&["a rock c"]).unwrap();
                let history = DialogueHistory::from_texts(&[(SpeakerTag::Partner, "b d")]);
                let d1 = s1.next_token_distribution(&cond, &history, &[]);
                let d2 = s2.next_token_distribution(&cond, &history, &[]);
                let dm = sm.next_token_distribution(&cond, &history, &[]);
                for i in 0..dm.len() {
                    let avg = (d1.probs()[i] + d2.probs()[i]) / 2.0;
                    prop_assert!((dm.probs()[i] - avg).abs() < 1e-12);
                }
            }

            #[test]
            fn every_distribution_is_valid(corpus in arb_corpus(), partial_len in 0usize..4) {
                let speaker =
                    ConditionedNGramSpeaker::train(&corpus, SpeakerConfig::default()).unwrap();
                let cond = Condition::persona_from_texts(&["rock d"]).unwrap();
                let history = DialogueHistory::from_texts(&[(SpeakerTag::Partner, "a c")]);
                let partial = vec![speaker.vocab().id("a"); partial_len];
                let dist = speaker.next_token_distribution(&cond, &history, &partial);
                prop_assert!((dist.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
                prop_assert!(dist.probs().iter().all(|&p| p > 0.0));
            }
        }
    }
}
