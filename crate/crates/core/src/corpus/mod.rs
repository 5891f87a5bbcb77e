//! The knowledge corpus of atomic learning actions.
//!
//! Each action is indexed as one document made of its body tokens followed by
//! its keywords twice. Document frequencies, the mean indexed length and
//! hashed TF-IDF embeddings are rebuilt on every mutation.

mod generate;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use generate::{generate_corpus, ClusterSpec, CorpusSpec};

use crate::bloom::BloomLevel;
use crate::error::{Error, Result};
use crate::retrieval::{embed_weighted, EmbeddingVector};
use crate::text::{tokenize, TokenBag};

/// Keywords are appended this many times to the indexed document.
pub const KEYWORD_REPEAT: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAction", into = "RawAction")]
pub struct LearningAction {
    pub id: String,
    pub title: String,
    pub summary: String,
    /// Sorted and de-duplicated.
    pub keywords: Vec<String>,
    pub bloom: BloomLevel,
    pub body_tokens: Vec<String>,
}

/// On-disk shape: the body is free text.
#[derive(Serialize, Deserialize)]
struct RawAction {
    id: String,
    #[serde(default)]
    title: String,
    #[serde(default)]
    summary: String,
    keywords: Vec<String>,
    bloom: BloomLevel,
    #[serde(default)]
    body: String,
}

impl TryFrom<RawAction> for LearningAction {
    type Error = Error;

    fn try_from(raw: RawAction) -> Result<Self> {
        LearningAction::new(
            raw.id,
            raw.title,
            raw.summary,
            raw.keywords,
            raw.bloom,
            tokenize(&raw.body),
        )
    }
}

impl From<LearningAction> for RawAction {
    fn from(a: LearningAction) -> Self {
        RawAction {
            id: a.id,
            title: a.title,
            summary: a.summary,
            keywords: a.keywords,
            bloom: a.bloom,
            body: a.body_tokens.join(" "),
        }
    }
}

impl LearningAction {
    /// Keywords are normalised through the tokenizer; at least one must survive.
    pub fn new(
        id: impl Into<String>,
        title: impl Into<String>,
        summary: impl Into<String>,
        keywords: impl IntoIterator<Item = impl AsRef<str>>,
        bloom: BloomLevel,
        body_tokens: Vec<String>,
    ) -> Result<Self> {
        let id = id.into();
        let keywords: BTreeSet<String> = keywords
            .into_iter()
            .flat_map(|k| tokenize(k.as_ref()))
            .collect();
        if keywords.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "action `{id}` has no keywords"
            )));
        }
        Ok(Self {
            id,
            title: title.into(),
            summary: summary.into(),
            keywords: keywords.into_iter().collect(),
            bloom,
            body_tokens,
        })
    }

    pub fn has_keyword(&self, token: &str) -> bool {
        self.keywords.binary_search_by(|k| k.as_str().cmp(token)).is_ok()
    }

    /// Tokens of the indexed document.
    pub fn document_tokens(&self) -> impl Iterator<Item = &str> {
        self.body_tokens.iter().map(String::as_str).chain(
            std::iter::repeat_n(self.keywords.iter().map(String::as_str), KEYWORD_REPEAT)
                .flatten(),
        )
    }
}

#[derive(Debug, Clone)]
struct IndexedDoc {
    tf: BTreeMap<String, u32>,
    len: usize,
    embedding: EmbeddingVector,
}

#[derive(Debug, Clone, Default)]
pub struct KnowledgeCorpus {
    actions: BTreeMap<String, LearningAction>,
    docs: BTreeMap<String, IndexedDoc>,
    df: BTreeMap<String, usize>,
    avgdl: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub actions: usize,
    pub avgdl: f64,
    pub vocabulary: usize,
}

impl KnowledgeCorpus {
    pub fn new(actions: Vec<LearningAction>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for a in actions {
            if map.contains_key(&a.id) {
                return Err(Error::DuplicateAction(a.id));
            }
            map.insert(a.id.clone(), a);
        }
        let mut corpus = Self {
            actions: map,
            ..Self::default()
        };
        corpus.rebuild();
        Ok(corpus)
    }

    pub fn insert(&mut self, action: LearningAction) -> Result<()> {
        if self.actions.contains_key(&action.id) {
            return Err(Error::DuplicateAction(action.id));
        }
        self.actions.insert(action.id.clone(), action);
        self.rebuild();
        Ok(())
    }

    pub fn remove(&mut self, id: &str) -> Option<LearningAction> {
        let removed = self.actions.remove(id);
        if removed.is_some() {
            self.rebuild();
        }
        removed
    }

    fn rebuild(&mut self) {
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        let mut tfs = Vec::with_capacity(self.actions.len());
        let mut total_len = 0usize;
        for a in self.actions.values() {
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            let mut len = 0;
            for t in a.document_tokens() {
                *tf.entry(t.to_string()).or_insert(0) += 1;
                len += 1;
            }
            for t in tf.keys() {
                *df.entry(t.clone()).or_insert(0) += 1;
            }
            total_len += len;
            tfs.push((a.id.clone(), tf, len));
        }
        self.df = df;
        self.avgdl = if self.actions.is_empty() {
            0.0
        } else {
            total_len as f64 / self.actions.len() as f64
        };
        self.docs = tfs
            .into_iter()
            .map(|(id, tf, len)| {
                let embedding =
                    embed_weighted(tf.iter().map(|(t, c)| (t.as_str(), *c as f64)), |t| {
                        self.dense_idf(t)
                    });
                (id, IndexedDoc { tf, len, embedding })
            })
            .collect();
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&LearningAction> {
        self.actions.get(id)
    }

    pub fn require(&self, id: &str) -> Result<&LearningAction> {
        self.get(id).ok_or_else(|| Error::UnknownAction(id.to_string()))
    }

    /// Actions in ascending id order.
    pub fn actions(&self) -> impl Iterator<Item = &LearningAction> {
        self.actions.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.actions.keys().map(String::as_str)
    }

    pub fn doc_freq(&self, token: &str) -> usize {
        self.df.get(token).copied().unwrap_or(0)
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn term_freq(&self, id: &str, token: &str) -> u32 {
        self.docs
            .get(id)
            .and_then(|d| d.tf.get(token))
            .copied()
            .unwrap_or(0)
    }

    pub fn doc_len(&self, id: &str) -> usize {
        self.docs.get(id).map_or(0, |d| d.len)
    }

    pub fn embedding(&self, id: &str) -> Option<&EmbeddingVector> {
        self.docs.get(id).map(|d| &d.embedding)
    }

    /// Smoothed IDF used for the dense side: `ln(1 + N / (1 + df))`.
    pub fn dense_idf(&self, token: &str) -> f64 {
        (1.0 + self.len() as f64 / (1.0 + self.doc_freq(token) as f64)).ln()
    }

    /// Hashed TF-IDF embedding of a token list under this corpus' statistics.
    pub fn embed(&self, tokens: &[String]) -> EmbeddingVector {
        let bag = TokenBag::from_tokens(tokens.iter().cloned());
        self.embed_bag(&bag)
    }

    pub fn embed_bag(&self, bag: &TokenBag) -> EmbeddingVector {
        embed_weighted(bag.iter(), |t| self.dense_idf(t))
    }

    pub fn stats(&self) -> CorpusStats {
        CorpusStats {
            actions: self.len(),
            avgdl: self.avgdl,
            vocabulary: self.df.len(),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let actions: Vec<LearningAction> = serde_json::from_str(s)?;
        Self::new(actions)
    }

    pub fn to_json(&self) -> Result<String> {
        let actions: Vec<&LearningAction> = self.actions.values().collect();
        Ok(serde_json::to_string_pretty(&actions)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
