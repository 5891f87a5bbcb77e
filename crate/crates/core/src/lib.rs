//! Goal-driven learning path planning without a language model in the loop.
//!
//! The crate is organised the way a planning episode flows:
//!
//! - [`state`]: structured learner states (objectives and motivations with
//!   ALIGNED / NOT_ALIGNED status) and their bookkeeping.
//! - [`reward`]: the confidence-weighted alignment reward and discounted returns.
//! - [`corpus`] and [`retrieval`]: the knowledge corpus of atomic learning
//!   actions and hybrid BM25 + dense candidate retrieval.
//! - [`sim`] and [`expert`]: a seeded simulated learner standing in for the
//!   state evaluator, plus synthetic populations and expert-labelled datasets.
//! - [`profiler`]: rule-based learner profiling.
//! - [`policy`]: the linear-softmax policy, value baseline and planning rule.
//! - [`training`]: behavioural cloning followed by group-relative policy
//!   optimisation, with finite-difference gradient checks.
//! - [`metrics`] and [`compare`]: alignment reports, P@1 / NDCG@k and paired
//!   policy comparisons.
//! - [`pipeline`]: the default end-to-end synthetic benchmark.

pub mod bloom;
pub mod compare;
pub mod corpus;
pub mod error;
pub mod expert;
pub mod metrics;
pub mod pipeline;
pub mod policy;
pub mod profiler;
pub mod retrieval;
pub mod reward;
pub mod rng;
pub mod rollout;
pub mod sim;
pub mod state;
pub mod text;
pub mod training;

pub use bloom::BloomLevel;
pub use corpus::{KnowledgeCorpus, LearningAction};
pub use error::{Error, Result};
pub use policy::{ActionDistribution, FeatureVector, PolicyParams, ValueParams};
pub use profiler::{LearnerProfile, Persona};
pub use retrieval::CandidateSet;
pub use reward::{RewardBreakdown, RewardWeights};
pub use sim::{InteractionSummary, SimLearner};
pub use expert::ExpertRecord;
pub use metrics::{AlignmentReport, RankingCase};
pub use rollout::TrajectoryStep;
pub use state::{ComponentStatus, Dimension, LearnerState, StateComponent};
pub use text::TokenBag;
