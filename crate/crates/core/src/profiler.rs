//! Rule-based learner profiling.
//!
//! Interaction summaries become behavioural indicators (engagement, review
//! intensity, understanding); message tokens are split into discourse cues
//! and topical keywords; the two are synthesised into a profile with a
//! cognitive level, interests and one of four personas.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bloom::BloomLevel;
use crate::error::{Error, Result};
use crate::sim::InteractionSummary;
use crate::text::TokenBag;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfilerConfig {
    pub dwell_cap_seconds: f64,
    pub revisit_cap: f64,
    pub review_threshold: f64,
    pub breadth_threshold: usize,
    pub struggle_threshold: f64,
    pub interest_size: usize,
    /// Weight multiplier per summary of age when counting interests; the
    /// newest summary counts 1.
    pub interest_decay: f64,
    /// Understanding below the first cut maps to Understanding, below the
    /// second to Applying, otherwise Analyzing.
    pub cognition_cuts: (f64, f64),
}

impl Default for ProfilerConfig {
    fn default() -> Self {
        Self {
            dwell_cap_seconds: 600.0,
            revisit_cap: 5.0,
            review_threshold: 0.6,
            breadth_threshold: 8,
            struggle_threshold: 0.5,
            interest_size: 20,
            interest_decay: 0.5,
            cognition_cuts: (0.33, 0.66),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehavioralIndicators {
    pub engagement: f64,
    pub review_intensity: f64,
    pub understanding: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Persona {
    MomentumLearner,
    Consolidator,
    Explorer,
    Struggler,
}

impl Persona {
    pub const ALL: [Persona; 4] = [
        Persona::MomentumLearner,
        Persona::Consolidator,
        Persona::Explorer,
        Persona::Struggler,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn tag(self) -> &'static str {
        match self {
            Persona::MomentumLearner => "momentum",
            Persona::Consolidator => "consolidator",
            Persona::Explorer => "explorer",
            Persona::Struggler => "struggler",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerProfile {
    pub cognition: BloomLevel,
    pub engagement: f64,
    pub interest: TokenBag,
    pub persona: Persona,
}

pub fn analyze_behavior(summary: &InteractionSummary, cfg: &ProfilerConfig) -> BehavioralIndicators {
    let understanding = if summary.quiz_total == 0 {
        0.5
    } else {
        summary.quiz_correct as f64 / summary.quiz_total as f64
    };
    BehavioralIndicators {
        engagement: (summary.dwell_seconds / cfg.dwell_cap_seconds).clamp(0.0, 1.0),
        review_intensity: (summary.revisits as f64 / cfg.revisit_cap).clamp(0.0, 1.0),
        understanding: understanding.clamp(0.0, 1.0),
    }
}

/// Priority order: Struggler, Consolidator, Explorer, MomentumLearner.
pub fn classify_persona(ind: &BehavioralIndicators, interest_breadth: usize, cfg: &ProfilerConfig) -> Persona {
    if ind.understanding < cfg.struggle_threshold {
        Persona::Struggler
    } else if ind.review_intensity >= cfg.review_threshold {
        Persona::Consolidator
    } else if interest_breadth >= cfg.breadth_threshold {
        Persona::Explorer
    } else {
        Persona::MomentumLearner
    }
}

pub fn cognition_level(understanding: f64, cfg: &ProfilerConfig) -> BloomLevel {
    if understanding < cfg.cognition_cuts.0 {
        BloomLevel::Understanding
    } else if understanding < cfg.cognition_cuts.1 {
        BloomLevel::Applying
    } else {
        BloomLevel::Analyzing
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Intent {
    Questioning,
    Reflecting,
    Disagreeing,
    Neutral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Affect {
    Confused,
    Confident,
    Motivated,
    Neutral,
}

/// Keyword-rule annotation of one message's tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageAnnotation {
    pub intent: Intent,
    pub affect: Affect,
    pub bloom_cue: Option<BloomLevel>,
    pub topical: Vec<String>,
}

const QUESTION_CUES: [&str; 5] = ["why", "how", "what", "wait", "again"];
const REFLECT_CUES: [&str; 4] = ["think", "realize", "got", "see"];
const DISAGREE_CUES: [&str; 3] = ["but", "disagree", "wrong"];
const CONFUSED_CUES: [&str; 3] = ["confused", "lost", "hmm"];
const CONFIDENT_CUES: [&str; 3] = ["easy", "clear", "okay"];
const MOTIVATED_CUES: [&str; 3] = ["interesting", "cool", "excited"];
const FILLER: [&str; 12] = [
    "it", "the", "a", "an", "and", "of", "to", "is", "please", "thanks", "i", "this",
];
const BLOOM_CUES: [(&str, BloomLevel); 6] = [
    ("define", BloomLevel::Remembering),
    ("explain", BloomLevel::Understanding),
    ("apply", BloomLevel::Applying),
    ("compare", BloomLevel::Analyzing),
    ("judge", BloomLevel::Evaluating),
    ("design", BloomLevel::Creating),
];

fn is_cue(t: &str) -> bool {
    QUESTION_CUES.contains(&t)
        || REFLECT_CUES.contains(&t)
        || DISAGREE_CUES.contains(&t)
        || CONFUSED_CUES.contains(&t)
        || CONFIDENT_CUES.contains(&t)
        || MOTIVATED_CUES.contains(&t)
        || FILLER.contains(&t)
        || BLOOM_CUES.iter().any(|(c, _)| *c == t)
}

pub fn annotate(tokens: &[String]) -> MessageAnnotation {
    let has = |set: &[&str]| tokens.iter().any(|t| set.contains(&t.as_str()));
    let intent = if has(&DISAGREE_CUES) {
        Intent::Disagreeing
    } else if has(&QUESTION_CUES) {
        Intent::Questioning
    } else if has(&REFLECT_CUES) {
        Intent::Reflecting
    } else {
        Intent::Neutral
    };
    let affect = if has(&CONFUSED_CUES) {
        Affect::Confused
    } else if has(&MOTIVATED_CUES) {
        Affect::Motivated
    } else if has(&CONFIDENT_CUES) {
        Affect::Confident
    } else {
        Affect::Neutral
    };
    let bloom_cue = BLOOM_CUES
        .iter()
        .filter(|(c, _)| tokens.iter().any(|t| t == c))
        .map(|(_, b)| *b)
        .max();
    MessageAnnotation {
        intent,
        affect,
        bloom_cue,
        topical: tokens.iter().filter(|t| !is_cue(t)).cloned().collect(),
    }
}

/// Term-frequency bag of topical tokens across all summaries.
pub fn session_keywords(summaries: &[InteractionSummary]) -> TokenBag {
    recent_keywords(summaries, 1.0)
}

/// Like [`session_keywords`], but a summary `a` steps older than the newest
/// contributes `decay^a` per mention.
pub fn recent_keywords(summaries: &[InteractionSummary], decay: f64) -> TokenBag {
    let mut bag = TokenBag::new();
    let n = summaries.len();
    for (i, s) in summaries.iter().enumerate() {
        let w = decay.powi((n - 1 - i) as i32);
        for t in annotate(&s.message_tokens).topical {
            bag.add(t, w);
        }
    }
    bag
}

/// Order-independent mean.
fn mean(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn build_profile(
    summaries: &[InteractionSummary],
    keywords: &TokenBag,
    cfg: &ProfilerConfig,
) -> Result<LearnerProfile> {
    if summaries.is_empty() {
        return Err(Error::InvalidArgument("profile needs at least one summary".into()));
    }
    let inds: Vec<BehavioralIndicators> = summaries.iter().map(|s| analyze_behavior(s, cfg)).collect();
    let avg = BehavioralIndicators {
        engagement: mean(inds.iter().map(|i| i.engagement).collect()),
        review_intensity: mean(inds.iter().map(|i| i.review_intensity).collect()),
        understanding: mean(inds.iter().map(|i| i.understanding).collect()),
    };
    let interest = keywords.top(cfg.interest_size);
    Ok(LearnerProfile {
        cognition: cognition_level(avg.understanding, cfg),
        engagement: avg.engagement,
        persona: classify_persona(&avg, interest.len(), cfg),
        interest,
    })
}

/// Profile from summaries alone, with interests taken from their messages.
pub fn profile_from_summaries(summaries: &[InteractionSummary], cfg: &ProfilerConfig) -> Result<LearnerProfile> {
    build_profile(summaries, &recent_keywords(summaries, cfg.interest_decay), cfg)
}

/// Retrieval query for a profile: weighted interests plus persona and
/// cognition pseudo-tokens.
pub fn profile_query(p: &LearnerProfile) -> TokenBag {
    let mut bag: BTreeMap<String, f64> = p.interest.iter().map(|(t, w)| (t.to_string(), w)).collect();
    bag.insert(format!("persona:{}", p.persona.tag()), 1.0);
    bag.insert(format!("cognition:{}", p.cognition.name()), 1.0);
    bag.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{KnowledgeCorpus, LearningAction};
    use crate::retrieval::{retrieve, RetrievalConfig};
    use crate::text::tokenize;

    fn summary(dwell: f64, revisits: u32, correct: u32, total: u32, tokens: &[&str]) -> InteractionSummary {
        InteractionSummary {
            turns: 3,
            dwell_seconds: dwell,
            revisits,
            quiz_correct: correct,
            quiz_total: total,
            message_tokens: tokens.iter().map(|t| t.to_string()).collect(),
        }
    }

    #[test]
    fn behavior_caps_and_defaults() {
        let cfg = ProfilerConfig::default();
        let full = analyze_behavior(&summary(600.0, 5, 4, 4, &[]), &cfg);
        assert_eq!((full.engagement, full.review_intensity, full.understanding), (1.0, 1.0, 1.0));
        let zero = analyze_behavior(&summary(0.0, 0, 0, 0, &[]), &cfg);
        assert_eq!((zero.engagement, zero.review_intensity, zero.understanding), (0.0, 0.0, 0.5));
        assert_eq!(analyze_behavior(&summary(300.0, 0, 0, 0, &[]), &cfg).engagement, 0.5);
        assert_eq!(analyze_behavior(&summary(9000.0, 50, 0, 1, &[]), &cfg).engagement, 1.0);
    }

    fn ind(u: f64, r: f64) -> BehavioralIndicators {
        BehavioralIndicators { engagement: 0.5, review_intensity: r, understanding: u }
    }

    #[test]
    fn persona_rules() {
        let cfg = ProfilerConfig::default();
        assert_eq!(classify_persona(&ind(0.2, 1.0), 20, &cfg), Persona::Struggler);
        assert_eq!(classify_persona(&ind(0.9, 0.8), 0, &cfg), Persona::Consolidator);
        assert_eq!(classify_persona(&ind(0.9, 0.1), 3, &cfg), Persona::MomentumLearner);
        assert_eq!(classify_persona(&ind(0.9, 0.1), 8, &cfg), Persona::Explorer);
    }

    #[test]
    fn persona_rule_table_is_exhaustive() {
        // Every branch combination maps to the first rule that fires.
        let cfg = ProfilerConfig::default();
        for &u in &[0.0, 0.49, 0.5, 1.0] {
            for &r in &[0.0, 0.59, 0.6, 1.0] {
                for &b in &[0usize, 7, 8, 30] {
                    let expected = if u < 0.5 {
                        Persona::Struggler
                    } else if r >= 0.6 {
                        Persona::Consolidator
                    } else if b >= 8 {
                        Persona::Explorer
                    } else {
                        Persona::MomentumLearner
                    };
                    assert_eq!(classify_persona(&ind(u, r), b, &cfg), expected);
                }
            }
        }
    }

    #[test]
    fn cognition_bands() {
        let cfg = ProfilerConfig::default();
        assert_eq!(cognition_level(0.1, &cfg), BloomLevel::Understanding);
        assert_eq!(cognition_level(0.5, &cfg), BloomLevel::Applying);
        assert_eq!(cognition_level(0.9, &cfg), BloomLevel::Analyzing);
    }

    #[test]
    fn single_and_duplicate_summaries() {
        let cfg = ProfilerConfig::default();
        let s = summary(240.0, 1, 2, 3, &["matrix", "why", "rank"]);
        let kw = session_keywords(std::slice::from_ref(&s));
        let one = build_profile(std::slice::from_ref(&s), &kw, &cfg).unwrap();
        let ind = analyze_behavior(&s, &cfg);
        assert_eq!(one.engagement, ind.engagement);
        assert_eq!(one.persona, classify_persona(&ind, kw.len(), &cfg));
        let two = build_profile(&[s.clone(), s], &kw, &cfg).unwrap();
        assert_eq!(one, two);
        assert!(build_profile(&[], &kw, &cfg).is_err());
    }

    #[test]
    fn permutation_invariant() {
        let cfg = ProfilerConfig::default();
        let ss = vec![
            summary(100.0, 0, 1, 3, &["a"]),
            summary(333.3, 4, 3, 3, &["b"]),
            summary(512.7, 2, 0, 3, &["c"]),
            summary(77.1, 1, 2, 3, &["d"]),
        ];
        let kw = session_keywords(&ss);
        let base = build_profile(&ss, &kw, &cfg).unwrap();
        let mut rev = ss.clone();
        rev.reverse();
        assert_eq!(build_profile(&rev, &kw, &cfg).unwrap(), base);
        rev.swap(0, 2);
        assert_eq!(build_profile(&rev, &kw, &cfg).unwrap(), base);
    }

    #[test]
    fn mixed_session_majority_recomputation() {
        // Ten summaries; the averaged indicators are recomputed by hand.
        let cfg = ProfilerConfig::default();
        let ss: Vec<_> = (0..10)
            .map(|i| summary(60.0 * i as f64, (i % 4) as u32, (i % 3) as u32, 3, &["x"]))
            .collect();
        let kw = session_keywords(&ss);
        let u: f64 = ss.iter().map(|s| s.quiz_correct as f64 / 3.0).sum::<f64>() / 10.0;
        let r: f64 = ss.iter().map(|s| (s.revisits as f64 / 5.0).min(1.0)).sum::<f64>() / 10.0;
        let expected = if u < 0.5 {
            Persona::Struggler
        } else if r >= 0.6 {
            Persona::Consolidator
        } else {
            Persona::MomentumLearner
        };
        assert_eq!(build_profile(&ss, &kw, &cfg).unwrap().persona, expected);
    }

    #[test]
    fn annotation_separates_cues() {
        let a = annotate(&tokenize("why is the gradient confused hmm apply"));
        assert_eq!(a.intent, Intent::Questioning);
        assert_eq!(a.affect, Affect::Confused);
        assert_eq!(a.bloom_cue, Some(BloomLevel::Applying));
        assert_eq!(a.topical, vec!["gradient"]);
    }

    #[test]
    fn interest_keeps_top_twenty() {
        let cfg = ProfilerConfig::default();
        let toks: Vec<String> = (0..30).flat_map(|i| std::iter::repeat_n(format!("t{i:02}"), i + 1)).collect();
        let s = InteractionSummary { turns: 1, dwell_seconds: 1.0, revisits: 0, quiz_correct: 0, quiz_total: 0, message_tokens: toks };
        let p = profile_from_summaries(&[s], &cfg).unwrap();
        assert_eq!(p.interest.len(), 20);
        assert!(p.interest.contains("t29"));
        assert!(!p.interest.contains("t00"));
    }

    #[test]
    fn query_pseudo_tokens() {
        let empty = LearnerProfile {
            cognition: BloomLevel::Applying,
            engagement: 0.3,
            interest: TokenBag::new(),
            persona: Persona::Explorer,
        };
        let q = profile_query(&empty);
        assert_eq!(q.len(), 2);
        assert!(q.contains("persona:explorer"));
        assert!(q.contains("cognition:applying"));

        let mut interest = TokenBag::new();
        interest.add("gradient", 3.0);
        let q = profile_query(&LearnerProfile { interest, ..empty });
        assert_eq!(q.weight("gradient"), 3.0);
    }

    #[test]
    fn profile_drives_retrieval() {
        let mk = |id: &str, kw: &[&str], body: &str| {
            LearningAction::new(id, "", "", kw.iter().copied(), BloomLevel::Applying, tokenize(body)).unwrap()
        };
        let corpus = KnowledgeCorpus::new(vec![
            mk("a", &["policy", "reward"], "policy reward agent"),
            mk("b", &["matrix", "rank"], "matrix rank basis"),
            mk("c", &["sql", "join"], "sql join index"),
        ])
        .unwrap();
        let s = summary(300.0, 1, 2, 3, &["matrix", "rank", "why", "matrix"]);
        let p = profile_from_summaries(&[s], &ProfilerConfig::default()).unwrap();
        let got = retrieve(&profile_query(&p), &corpus, &[], &RetrievalConfig::default()).unwrap();
        assert_eq!(got.ranked[0].id, "b");
    }

    #[test]
    fn profile_json_round_trip() {
        let s = summary(300.0, 1, 2, 3, &["matrix", "rank"]);
        let p = profile_from_summaries(&[s], &ProfilerConfig::default()).unwrap();
        let back: LearnerProfile = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }
}
