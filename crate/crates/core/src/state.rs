//! Structured learner states.
//!
//! A state holds components across four dimensions: long-term objectives
//! (`O_L`), short-term objectives (`O_S`), implicit motivations (`M_I`) and
//! explicit motivations (`M_E`). Each component carries a status that is
//! either `NOT_ALIGNED` or `ALIGNED`.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ComponentStatus {
    #[default]
    #[serde(rename = "NOT_ALIGNED")]
    NotAligned,
    #[serde(rename = "ALIGNED")]
    Aligned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Dimension {
    #[serde(rename = "O_L")]
    LongTermObjective,
    #[serde(rename = "O_S")]
    ShortTermObjective,
    #[serde(rename = "M_I")]
    ImplicitMotivation,
    #[serde(rename = "M_E")]
    ExplicitMotivation,
}

impl Dimension {
    pub const ALL: [Dimension; 4] = [
        Dimension::LongTermObjective,
        Dimension::ShortTermObjective,
        Dimension::ImplicitMotivation,
        Dimension::ExplicitMotivation,
    ];

    /// Position in [`Dimension::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn code(self) -> &'static str {
        match self {
            Dimension::LongTermObjective => "O_L",
            Dimension::ShortTermObjective => "O_S",
            Dimension::ImplicitMotivation => "M_I",
            Dimension::ExplicitMotivation => "M_E",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceItem {
    #[serde(rename = "turn")]
    pub turn_index: u64,
    pub quote: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateComponent {
    pub id: String,
    pub dimension: Dimension,
    pub description: String,
    pub metric_name: String,
    pub threshold: f64,
    #[serde(default)]
    pub evidence: Vec<EvidenceItem>,
    pub confidence: f64,
    #[serde(default)]
    pub status: ComponentStatus,
}

impl StateComponent {
    pub fn is_aligned(&self) -> bool {
        self.status == ComponentStatus::Aligned
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::InvalidArgument(format!(
                "component `{}` confidence {} outside [0, 1]",
                self.id, self.confidence
            )));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::InvalidArgument(format!(
                "component `{}` threshold {} outside [0, 1]",
                self.id, self.threshold
            )));
        }
        Ok(())
    }
}

/// A learner state at timestep `t`.
///
/// Components keep their insertion order so JSON round-trips are exact;
/// lookups are by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawState")]
pub struct LearnerState {
    timestep: u64,
    components: Vec<StateComponent>,
}

#[derive(Deserialize)]
struct RawState {
    timestep: u64,
    components: Vec<StateComponent>,
}

impl TryFrom<RawState> for LearnerState {
    type Error = Error;

    fn try_from(raw: RawState) -> Result<Self> {
        LearnerState::from_parts(raw.timestep, raw.components)
    }
}

impl LearnerState {
    /// Builds a state at an arbitrary timestep, keeping component statuses.
    pub fn from_parts(timestep: u64, components: Vec<StateComponent>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for c in &components {
            if !seen.insert(c.id.as_str()) {
                return Err(Error::DuplicateComponent(c.id.clone()));
            }
            c.validate()?;
        }
        Ok(Self {
            timestep,
            components,
        })
    }

    pub fn timestep(&self) -> u64 {
        self.timestep
    }

    pub fn components(&self) -> &[StateComponent] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&StateComponent> {
        self.components.iter().find(|c| c.id == id)
    }

    pub fn in_dimension(&self, dim: Dimension) -> impl Iterator<Item = &StateComponent> {
        self.components.iter().filter(move |c| c.dimension == dim)
    }

    /// Next state skeleton: same components, timestep + 1.
    pub fn advance(&self) -> LearnerState {
        LearnerState {
            timestep: self.timestep + 1,
            components: self.components.clone(),
        }
    }

    pub fn get_mut(&mut self, id: &str) -> Option<&mut StateComponent> {
        self.components.iter_mut().find(|c| c.id == id)
    }

    /// Appends a component; rejects duplicate ids and out-of-range values.
    pub fn push(&mut self, component: StateComponent) -> Result<()> {
        if self.get(&component.id).is_some() {
            return Err(Error::DuplicateComponent(component.id));
        }
        component.validate()?;
        self.components.push(component);
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Creates the initial state (timestep 0) with every component NOT_ALIGNED.
pub fn new_state(components: Vec<StateComponent>) -> Result<LearnerState> {
    let components = components
        .into_iter()
        .map(|c| StateComponent {
            status: ComponentStatus::NotAligned,
            ..c
        })
        .collect();
    LearnerState::from_parts(0, components)
}

/// 1 if the component exists and is ALIGNED, 0 otherwise (absent counts as 0).
pub fn aligned_indicator(state: &LearnerState, component_id: &str) -> u8 {
    match state.get(component_id) {
        Some(c) if c.is_aligned() => 1,
        _ => 0,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffEntry {
    pub component_id: String,
    pub delta: i8,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StateDiff {
    pub entries: Vec<DiffEntry>,
    pub new_components: Vec<String>,
}

impl StateDiff {
    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|e| e.delta == 0)
    }
}

pub(crate) fn check_successor(prev: &LearnerState, next: &LearnerState) -> Result<()> {
    let expected = prev.timestep + 1;
    if next.timestep != expected {
        return Err(Error::TimestepMismatch {
            expected,
            actual: next.timestep,
        });
    }
    Ok(())
}

/// Per-component status deltas between consecutive states, one entry per
/// component of `next`.
pub fn diff_states(prev: &LearnerState, next: &LearnerState) -> Result<StateDiff> {
    check_successor(prev, next)?;
    let mut diff = StateDiff::default();
    for c in &next.components {
        let before = aligned_indicator(prev, &c.id) as i8;
        let after = c.is_aligned() as i8;
        if prev.get(&c.id).is_none() {
            diff.new_components.push(c.id.clone());
        }
        diff.entries.push(DiffEntry {
            component_id: c.id.clone(),
            delta: after - before,
        });
    }
    Ok(diff)
}

/// Aligned fraction within `dimension` (or all dimensions when `None`);
/// 0 for an empty scope.
pub fn alignment_rate(state: &LearnerState, dimension: Option<Dimension>) -> f64 {
    let (aligned, total) = alignment_counts(state, dimension);
    if total == 0 {
        0.0
    } else {
        aligned as f64 / total as f64
    }
}

pub fn alignment_counts(state: &LearnerState, dimension: Option<Dimension>) -> (usize, usize) {
    state
        .components
        .iter()
        .filter(|c| dimension.is_none_or(|d| c.dimension == d))
        .fold((0, 0), |(a, t), c| (a + c.is_aligned() as usize, t + 1))
}
