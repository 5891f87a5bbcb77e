//! Run configuration. Every field has a default, so `{}` is a valid config.
//!
//! ```json
//! {
//!   "paths": {
//!     "corpus": "corpus.json",
//!     "dataset": "dataset.json",
//!     "sft_checkpoint": "sft.ckpt.json",
//!     "grpo_checkpoint": "grpo.ckpt.json",
//!     "sft_log": "sft.log.jsonl",
//!     "grpo_log": "grpo.log.jsonl",
//!     "reports": "reports"
//!   },
//!   "seeds": { "corpus": 0, "data": 1, "train": 1, "eval": [..] },
//!   "benchmark": { "sessions": 300, "corpus": {..}, "population": {..}, "expert": {..},
//!                  "train": {..}, "episode": {..}, "act_mode": "sample", "eval_rollouts": 4 }
//! }
//! ```
//!
//! Default eval seeds are derived from 1, one per `eval_rollouts`.
//! Relative paths resolve against `--out`.

use std::path::{Path, PathBuf};

use pxplore_core::pipeline::BenchmarkConfig;
use pxplore_core::rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub corpus: PathBuf,
    pub dataset: PathBuf,
    pub sft_checkpoint: PathBuf,
    pub grpo_checkpoint: PathBuf,
    pub sft_log: PathBuf,
    pub grpo_log: PathBuf,
    pub reports: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            corpus: "corpus.json".into(),
            dataset: "dataset.json".into(),
            sft_checkpoint: "sft.ckpt.json".into(),
            grpo_checkpoint: "grpo.ckpt.json".into(),
            sft_log: "sft.log.jsonl".into(),
            grpo_log: "grpo.log.jsonl".into(),
            reports: "reports".into(),
        }
    }
}

impl Paths {
    pub fn resolve(&mut self, base: &Path) {
        for p in [
            &mut self.corpus,
            &mut self.dataset,
            &mut self.sft_checkpoint,
            &mut self.grpo_checkpoint,
            &mut self.sft_log,
            &mut self.grpo_log,
            &mut self.reports,
        ] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Seeds {
    pub corpus: u64,
    pub data: u64,
    pub train: u64,
    pub eval: Vec<u64>,
}

impl Default for Seeds {
    fn default() -> Self {
        let bench = BenchmarkConfig::default();
        Self {
            corpus: bench.corpus.seed,
            data: 1,
            train: 1,
            eval: bench.eval_seeds(1),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub paths: Paths,
    pub seeds: Seeds,
    pub benchmark: BenchmarkConfig,
}

impl RunConfig {
    /// Sets every seed from one value. Evaluation seeds are derived the way
    /// the benchmark derives them.
    pub fn override_seeds(&mut self, seed: u64) {
        self.seeds.corpus = seed;
        self.seeds.data = seed;
        self.seeds.train = seed;
        self.seeds.eval = self.benchmark.eval_seeds(seed);
    }

    pub fn sft_seed(&self) -> u64 {
        rng::derive(self.seeds.train, 1)
    }

    pub fn grpo_seed(&self) -> u64 {
        rng::derive(self.seeds.train, 2)
    }
}
