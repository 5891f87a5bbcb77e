//! Deterministic synthetic corpus generation from a cluster specification.

use rand::seq::IndexedRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{KnowledgeCorpus, LearningAction};
use crate::bloom::BloomLevel;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub name: String,
    pub vocabulary: Vec<String>,
    pub actions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusSpec {
    #[serde(default)]
    pub seed: u64,
    pub clusters: Vec<ClusterSpec>,
    /// Relative frequency of each Bloom level, `Remembering` first.
    #[serde(default = "default_bloom_mix")]
    pub bloom_mix: [f64; 6],
    #[serde(default = "default_keywords_per_action")]
    pub keywords_per_action: usize,
    #[serde(default = "default_body_length")]
    pub body_length: usize,
    /// Generic filler shared by every cluster.
    #[serde(default = "default_common_vocabulary")]
    pub common_vocabulary: Vec<String>,
}

fn default_bloom_mix() -> [f64; 6] {
    [0.12, 0.2, 0.22, 0.2, 0.14, 0.12]
}

fn default_keywords_per_action() -> usize {
    3
}

fn default_body_length() -> usize {
    40
}

fn default_common_vocabulary() -> Vec<String> {
    words(&[
        "lecture", "example", "concept", "idea", "method", "result", "step", "case", "problem",
        "model", "data", "practice", "review", "summary", "section", "definition", "exercise",
        "intuition",
    ])
}

fn words(ws: &[&str]) -> Vec<String> {
    ws.iter().map(|w| w.to_string()).collect()
}

const DEFAULT_CLUSTERS: [(&str, [&str; 12]); 12] = [
    ("Linear Algebra", ["vector", "matrix", "eigenvalue", "determinant", "rank", "basis", "span", "orthogonal", "projection", "transpose", "inverse", "subspace"]),
    ("Calculus", ["derivative", "integral", "limit", "gradient", "chain", "series", "taylor", "continuity", "partial", "extremum", "convexity", "jacobian"]),
    ("Probability", ["probability", "distribution", "bayes", "variance", "expectation", "likelihood", "prior", "posterior", "sampling", "independence", "entropy", "gaussian"]),
    ("Optimization", ["descent", "momentum", "learningrate", "convergence", "saddle", "stochastic", "minibatch", "adam", "regularization", "penalty", "lagrange", "duality"]),
    ("Neural Networks", ["neuron", "activation", "backpropagation", "layer", "perceptron", "sigmoid", "relu", "softmax", "dropout", "initialization", "weights", "normalization"]),
    ("Computer Vision", ["convolution", "kernel", "pooling", "stride", "padding", "filter", "feature", "image", "pixel", "segmentation", "detection", "augmentation"]),
    ("Sequence Models", ["recurrent", "lstm", "attention", "transformer", "token", "embedding", "sequence", "encoder", "decoder", "positional", "language", "translation"]),
    ("Reinforcement Learning", ["reward", "policy", "agent", "environment", "bandit", "exploration", "qlearning", "markov", "bellman", "discount", "trajectory", "episode"]),
    ("Databases", ["relational", "query", "index", "transaction", "schema", "join", "sql", "btree", "consistency", "replication", "sharding", "normalform"]),
    ("Algorithms", ["sorting", "recursion", "complexity", "graph", "dynamic", "greedy", "hashing", "heap", "traversal", "divide", "conquer", "shortestpath"]),
    ("AI Ethics", ["fairness", "privacy", "accountability", "transparency", "consent", "surveillance", "equity", "regulation", "misinformation", "automation", "labor", "governance"]),
    ("Statistics", ["hypothesis", "regression", "correlation", "interval", "pvalue", "anova", "bootstrap", "estimator", "residual", "significance", "sample", "outlier"]),
];

impl Default for CorpusSpec {
    /// 148 actions over 12 clusters.
    fn default() -> Self {
        let clusters = DEFAULT_CLUSTERS
            .iter()
            .enumerate()
            .map(|(i, (name, vocab))| ClusterSpec {
                name: name.to_string(),
                vocabulary: words(vocab),
                actions: if i < 4 { 13 } else { 12 },
            })
            .collect();
        Self {
            seed: 0,
            clusters,
            bloom_mix: default_bloom_mix(),
            keywords_per_action: default_keywords_per_action(),
            body_length: default_body_length(),
            common_vocabulary: default_common_vocabulary(),
        }
    }
}

impl CorpusSpec {
    pub fn total_actions(&self) -> usize {
        self.clusters.iter().map(|c| c.actions).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.bloom_mix.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument("bloom_mix weights must be finite and non-negative".into()));
        }
        if self.total_actions() > 0 && self.bloom_mix.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidArgument("bloom_mix must have a positive weight".into()));
        }
        if self.keywords_per_action == 0 {
            return Err(Error::InvalidArgument("keywords_per_action must be at least 1".into()));
        }
        for c in &self.clusters {
            if c.actions > 0 && c.vocabulary.len() < self.keywords_per_action {
                return Err(Error::InvalidArgument(format!(
                    "cluster `{}` has {} vocabulary words, needs at least {}",
                    c.name,
                    c.vocabulary.len(),
                    self.keywords_per_action
                )));
            }
        }
        Ok(())
    }
}

fn sample_bloom(mix: &[f64; 6], rng: &mut rng::Rng) -> BloomLevel {
    let total: f64 = mix.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in mix.iter().enumerate() {
        if u < *w {
            return BloomLevel::ALL[i];
        }
        u -= w;
    }
    // Round-off lands on the last positive weight.
    let last = mix.iter().rposition(|w| *w > 0.0).unwrap_or(0);
    BloomLevel::ALL[last]
}

/// Generates the corpus described by `spec`. Action ids are `k000`, `k001`, ...
/// in cluster order.
pub fn generate_corpus(spec: &CorpusSpec) -> Result<KnowledgeCorpus> {
    spec.validate()?;
    let mut rng = rng::rng_for(spec.seed, 0xC0_4B05);
    let mut actions = Vec::with_capacity(spec.total_actions());
    let mut next_id = 0usize;
    for cluster in &spec.clusters {
        for _ in 0..cluster.actions {
            let keywords: Vec<String> = cluster
                .vocabulary
                .choose_multiple(&mut rng, spec.keywords_per_action)
                .cloned()
                .collect();
            let bloom = sample_bloom(&spec.bloom_mix, &mut rng);
            let mut body = Vec::with_capacity(spec.body_length);
            for i in 0..spec.body_length {
                let token = if i % 5 == 0 {
                    keywords[(i / 5) % keywords.len()].clone()
                } else if rng.random::<f64>() < 0.5 || spec.common_vocabulary.is_empty() {
                    cluster.vocabulary.choose(&mut rng).cloned().unwrap_or_default()
                } else {
                    spec.common_vocabulary.choose(&mut rng).cloned().unwrap_or_default()
                };
                if !token.is_empty() {
                    body.push(token);
                }
            }
            let id = format!("k{next_id:03}");
            next_id += 1;
            let title = format!("{}: {}", cluster.name, keywords.join(", "));
            let summary = format!(
                "A {} unit of {} covering {}.",
                bloom.name(),
                cluster.name,
                keywords.join(" and ")
            );
            actions.push(LearningAction::new(id, title, summary, &keywords, bloom, body)?);
        }
    }
    KnowledgeCorpus::new(actions)
}
