//! Token space shared by speakers, listeners, and the decoder.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

/// Index into a [`Vocabulary`]. Also the coordinate index of every
/// [`TokenDistribution`](super::TokenDistribution).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenId(pub u32);

impl TokenId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Begin-of-sequence marker, fixed at index 0.
pub const BOS: TokenId = TokenId(0);
/// End-of-sequence marker, fixed at index 1.
pub const EOS: TokenId = TokenId(1);
/// Unknown-token marker, fixed at index 2.
pub const UNK: TokenId = TokenId(2);

pub const BOS_TOKEN: &str = "<bos>";
pub const EOS_TOKEN: &str = "<eos>";
pub const UNK_TOKEN: &str = "<unk>";

/// Ordered set of unique token strings with reserved markers at indices
/// 0, 1, 2. `token -> id` is a bijection; lookups of unseen strings yield
/// [`UNK`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: BTreeMap<String, TokenId>,
}

impl Vocabulary {
    fn with_reserved() -> Self {
        let mut vocab = Vocabulary {
            tokens: Vec::new(),
            index: BTreeMap::new(),
        };
        for reserved in [BOS_TOKEN, EOS_TOKEN, UNK_TOKEN] {
            vocab.insert(reserved);
        }
        vocab
    }

    /// Build a vocabulary from tokens in first-seen order, after the three
    /// reserved markers.
    pub fn build<'a, I: IntoIterator<Item = &'a str>>(tokens: I) -> Self {
        let mut vocab = Self::with_reserved();
        for token in tokens {
            vocab.insert(token);
        }
        vocab
    }

    /// Rebuild from an ordered token list (e.g. a snapshot). The list must
    /// start with the reserved markers.
    pub fn from_ordered_tokens(tokens: Vec<String>) -> Option<Self> {
        if tokens.len() < 3
            || tokens[0] != BOS_TOKEN
            || tokens[1] != EOS_TOKEN
            || tokens[2] != UNK_TOKEN
        {
            return None;
        }
        let mut vocab = Vocabulary {
            tokens: Vec::new(),
            index: BTreeMap::new(),
        };
        for token in &tokens {
            if vocab.index.contains_key(token) {
                return None;
            }
            vocab.insert(token);
        }
        Some(vocab)
    }

    fn insert(&mut self, token: &str) -> TokenId {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = TokenId(self.tokens.len() as u32);
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), id);
        id
    }

    /// Id for a token string; unseen strings resolve to [`UNK`].
    pub fn id(&self, token: &str) -> TokenId {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.tokens[id.index()]
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false // reserved tokens are always present
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}
