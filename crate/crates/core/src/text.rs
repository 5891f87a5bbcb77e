//! Tokenization and weighted token bags.
//!
//! Tokenization lowercases and splits on anything that is not alphanumeric.
//! There is no stemming and no stopword list.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// A multiset of tokens with non-negative real weights.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenBag(BTreeMap<String, f64>);

impl TokenBag {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut bag = Self::new();
        for t in tokens {
            bag.add(t, 1.0);
        }
        bag
    }

    /// Adds `weight` to `token`. Non-positive or non-finite weights are ignored.
    pub fn add(&mut self, token: impl Into<String>, weight: f64) {
        if weight > 0.0 && weight.is_finite() {
            *self.0.entry(token.into()).or_insert(0.0) += weight;
        }
    }

    pub fn weight(&self, token: &str) -> f64 {
        self.0.get(token).copied().unwrap_or(0.0)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains_key(token)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Iterates tokens in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    /// The `n` heaviest tokens, ties broken by token order.
    pub fn top(&self, n: usize) -> TokenBag {
        let mut entries: Vec<(&String, &f64)> = self.0.iter().collect();
        entries.sort_by(|a, b| b.1.total_cmp(a.1).then_with(|| a.0.cmp(b.0)));
        TokenBag(
            entries
                .into_iter()
                .take(n)
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
        )
    }
}

impl<S: Into<String>> FromIterator<(S, f64)> for TokenBag {
    fn from_iter<I: IntoIterator<Item = (S, f64)>>(iter: I) -> Self {
        let mut bag = TokenBag::new();
        for (t, w) in iter {
            bag.add(t, w);
        }
        bag
    }
}
