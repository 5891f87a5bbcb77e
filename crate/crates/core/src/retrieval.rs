//! Hybrid lexical + dense candidate retrieval.
//!
//! `score(k) = alpha * bm25_norm(q, k) + (1 - alpha) * max(cos(q, k), 0)`,
//! where `bm25_norm` is Okapi BM25 min-max normalised over the scored pool and
//! the dense side is a hashed TF-IDF embedding.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::{KnowledgeCorpus, LearningAction};
use crate::error::{Error, Result};
use crate::text::TokenBag;

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;
pub const EMBEDDING_DIM: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    pub alpha: f64,
    pub k: usize,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self { alpha: 0.2, k: 10 }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if self.k == 0 {
            return Err(Error::InvalidArgument("retrieval k must be at least 1".into()));
        }
        Ok(())
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside [0, 1]")));
    }
    Ok(())
}

/// `ln(1 + (N - df + 0.5) / (df + 0.5))`.
pub fn bm25_idf(n_docs: usize, df: usize) -> f64 {
    let (n, df) = (n_docs as f64, df as f64);
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

/// Okapi BM25 of `action` for a weighted query; query weights multiply the
/// per-term contribution.
pub fn bm25_score(query: &TokenBag, action: &LearningAction, corpus: &KnowledgeCorpus) -> f64 {
    let n = corpus.len();
    let dl = corpus.doc_len(&action.id) as f64;
    let avgdl = corpus.avgdl();
    if n == 0 || avgdl <= 0.0 {
        return 0.0;
    }
    let norm = BM25_K1 * (1.0 - BM25_B + BM25_B * dl / avgdl);
    query
        .iter()
        .map(|(term, w)| {
            let tf = corpus.term_freq(&action.id, term) as f64;
            if tf == 0.0 {
                return 0.0;
            }
            let idf = bm25_idf(n, corpus.doc_freq(term));
            w * idf * tf * (BM25_K1 + 1.0) / (tf + norm)
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn zeros() -> Self {
        Self(vec![0.0; EMBEDDING_DIM])
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.len() != EMBEDDING_DIM || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "embedding must hold {EMBEDDING_DIM} finite values"
            )));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// 32-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u32 {
    let mut h: u32 = 0x811C_9DC5;
    for b in bytes {
        h ^= *b as u32;
        h = h.wrapping_mul(0x0100_0193);
    }
    h
}

fn bucket(token: &str) -> usize {
    fnv1a(token.as_bytes()) as usize % EMBEDDING_DIM
}

/// Hashes weighted tokens into buckets scaled by `idf`, then L2-normalises.
pub fn embed_weighted<'a, I, F>(tokens: I, idf: F) -> EmbeddingVector
where
    I: IntoIterator<Item = (&'a str, f64)>,
    F: Fn(&str) -> f64,
{
    let mut v = vec![0.0; EMBEDDING_DIM];
    for (t, tf) in tokens {
        v[bucket(t)] += tf * idf(t);
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    EmbeddingVector(v)
}

/// Corpus-free embedding (unit IDF). Use [`KnowledgeCorpus::embed`] to weight
/// by corpus statistics.
pub fn embed(tokens: &[String]) -> EmbeddingVector {
    let bag = TokenBag::from_tokens(tokens.iter().cloned());
    embed_weighted(bag.iter(), |_| 1.0)
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine_sim(a: &EmbeddingVector, b: &EmbeddingVector) -> f64 {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// Mixes a normalised BM25 value with a cosine similarity (clamped at 0).
pub fn combine(bm25_norm: f64, cosine: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(alpha * bm25_norm + (1.0 - alpha) * cosine.max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredAction {
    pub id: String,
    pub bm25: f64,
    pub bm25_norm: f64,
    pub cosine: f64,
    pub score: f64,
}

/// Scores every action in `pool` (ids must exist in `corpus`), normalising
/// BM25 over the pool. A pool with constant BM25 gets `bm25_norm = 0`.
pub fn score_pool<'a>(
    query: &TokenBag,
    corpus: &KnowledgeCorpus,
    pool: impl IntoIterator<Item = &'a LearningAction>,
    alpha: f64,
) -> Result<Vec<ScoredAction>> {
    check_alpha(alpha)?;
    let q_emb = corpus.embed_bag(query);
    let mut scored: Vec<ScoredAction> = pool
        .into_iter()
        .map(|a| {
            let cosine = corpus
                .embedding(&a.id)
                .map_or(0.0, |e| cosine_sim(&q_emb, e));
            ScoredAction {
                id: a.id.clone(),
                bm25: bm25_score(query, a, corpus),
                bm25_norm: 0.0,
                cosine,
                score: 0.0,
            }
        })
        .collect();
    let (lo, hi) = scored.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
        (lo.min(s.bm25), hi.max(s.bm25))
    });
    let range = hi - lo;
    for s in &mut scored {
        s.bm25_norm = if range > 0.0 { (s.bm25 - lo) / range } else { 0.0 };
        s.score = combine(s.bm25_norm, s.cosine, alpha)?;
    }
    Ok(scored)
}

/// Hybrid score of one action with the whole corpus as normalisation pool.
pub fn hybrid_score(
    query: &TokenBag,
    action: &LearningAction,
    corpus: &KnowledgeCorpus,
    alpha: f64,
) -> Result<f64> {
    let scored = score_pool(query, corpus, corpus.actions(), alpha)?;
    scored
        .into_iter()
        .find(|s| s.id == action.id)
        .map(|s| s.score)
        .ok_or_else(|| Error::UnknownAction(action.id.clone()))
}

/// Descending score, ties by ascending id.
pub fn rank(scored: &mut [ScoredAction]) {
    scored.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.id.cmp(&b.id)));
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    /// Learner the query was built for, when known.
    #[serde(default)]
    pub owner: Option<String>,
    pub ranked: Vec<ScoredAction>,
    pub k: usize,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.ranked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranked.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.ranked.iter().map(|s| s.id.as_str())
    }

    pub fn id_vec(&self) -> Vec<String> {
        self.ids().map(str::to_string).collect()
    }
}

/// Top-`k` actions not in `history`. An exhausted corpus yields an empty set.
pub fn retrieve(
    query: &TokenBag,
    corpus: &KnowledgeCorpus,
    history: &[String],
    config: &RetrievalConfig,
) -> Result<CandidateSet> {
    config.validate()?;
    let taken: BTreeSet<&str> = history.iter().map(String::as_str).collect();
    let eligible = corpus.actions().filter(|a| !taken.contains(a.id.as_str()));
    let mut scored = score_pool(query, corpus, eligible, config.alpha)?;
    rank(&mut scored);
    scored.truncate(config.k);
    Ok(CandidateSet {
        owner: None,
        ranked: scored,
        k: config.k,
    })
}
