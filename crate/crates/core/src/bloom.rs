use serde::{Deserialize, Serialize};

/// Bloom's taxonomy level, ordinal from `Remembering` (0) to `Creating` (5).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BloomLevel {
    Remembering,
    Understanding,
    Applying,
    Analyzing,
    Evaluating,
    Creating,
}

impl BloomLevel {
    pub const ALL: [BloomLevel; 6] = [
        BloomLevel::Remembering,
        BloomLevel::Understanding,
        BloomLevel::Applying,
        BloomLevel::Analyzing,
        BloomLevel::Evaluating,
        BloomLevel::Creating,
    ];

    pub fn ordinal(self) -> u8 {
        self as u8
    }

    pub fn from_ordinal(n: u8) -> Option<Self> {
        Self::ALL.get(n as usize).copied()
    }

    /// Clamping constructor for signed offsets.
    pub fn saturating_from(n: i64) -> Self {
        Self::ALL[n.clamp(0, 5) as usize]
    }

    pub fn distance(self, other: BloomLevel) -> u8 {
        self.ordinal().abs_diff(other.ordinal())
    }

    pub fn name(self) -> &'static str {
        match self {
            BloomLevel::Remembering => "remembering",
            BloomLevel::Understanding => "understanding",
            BloomLevel::Applying => "applying",
            BloomLevel::Analyzing => "analyzing",
            BloomLevel::Evaluating => "evaluating",
            BloomLevel::Creating => "creating",
        }
    }
}
