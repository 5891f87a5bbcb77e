//! Ranking metrics against graded expert labels and alignment reports.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reward::RewardBreakdown;
use crate::state::{Dimension, LearnerState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingCase {
    pub ranked: Vec<String>,
    pub grades: BTreeMap<String, u8>,
}

impl RankingCase {
    pub fn new(ranked: Vec<String>, grades: BTreeMap<String, u8>) -> Result<Self> {
        if let Some(id) = ranked.iter().find(|id| !grades.contains_key(*id)) {
            return Err(Error::InvalidRanking(format!("`{id}` has no grade")));
        }
        Ok(Self { ranked, grades })
    }

    /// Grades in ranked order.
    pub fn ranked_grades(&self) -> Vec<u8> {
        self.ranked.iter().map(|id| self.grades.get(id).copied().unwrap_or(0)).collect()
    }
}

/// Fraction of cases whose first-ranked id is the unique grade-2 id.
pub fn precision_at_1(cases: &[RankingCase]) -> Result<f64> {
    if cases.is_empty() {
        return Err(Error::InvalidRanking("no cases".into()));
    }
    let mut hits = 0usize;
    for c in cases {
        let best = c.grades.values().filter(|g| **g == 2).count();
        if best != 1 {
            return Err(Error::InvalidRanking(format!("expected one grade-2 id, found {best}")));
        }
        if c.ranked.first().is_some_and(|id| c.grades.get(id) == Some(&2)) {
            hits += 1;
        }
    }
    Ok(hits as f64 / cases.len() as f64)
}

/// `sum_{i<=k} (2^g_i - 1) / log2(i + 1)`.
pub fn dcg(grades: &[u8], k: usize) -> f64 {
    grades
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, g)| ((1u64 << g) - 1) as f64 / ((i + 2) as f64).log2())
        .sum()
}

/// NDCG over ranked grades; 1.0 when the ideal DCG is 0.
pub fn ndcg_grades(grades: &[u8], k: usize) -> f64 {
    let mut ideal = grades.to_vec();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg = dcg(&ideal, k);
    if idcg == 0.0 {
        return 1.0;
    }
    dcg(grades, k) / idcg
}

pub fn ndcg_at_k(case: &RankingCase, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    Ok(ndcg_grades(&case.ranked_grades(), k))
}

pub fn mean_ndcg(cases: &[RankingCase], k: usize) -> Result<f64> {
    if cases.is_empty() {
        return Err(Error::InvalidRanking("no cases".into()));
    }
    let mut xs = cases.iter().map(|c| ndcg_at_k(c, k)).collect::<Result<Vec<_>>>()?;
    xs.sort_by(f64::total_cmp);
    Ok(xs.iter().sum::<f64>() / xs.len() as f64)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DimensionColumn {
    /// Percent of components aligned.
    pub alignment_rate: f64,
    pub reward: f64,
    pub components: usize,
    pub aligned: usize,
}

/// Per-dimension alignment, reward and component counts with averaged and
/// total columns. `avg.alignment_rate` is weighted by component counts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    #[serde(rename = "O_L")]
    pub long_term: DimensionColumn,
    #[serde(rename = "O_S")]
    pub short_term: DimensionColumn,
    #[serde(rename = "M_I")]
    pub implicit: DimensionColumn,
    #[serde(rename = "M_E")]
    pub explicit: DimensionColumn,
    #[serde(rename = "Avg")]
    pub avg: DimensionColumn,
    #[serde(rename = "Total")]
    pub total: DimensionColumn,
}

pub const REPORT_COLUMNS: [&str; 6] = ["O_L", "O_S", "M_I", "M_E", "Avg", "Total"];

impl AlignmentReport {
    pub fn column(&self, dim: Dimension) -> &DimensionColumn {
        match dim {
            Dimension::LongTermObjective => &self.long_term,
            Dimension::ShortTermObjective => &self.short_term,
            Dimension::ImplicitMotivation => &self.implicit,
            Dimension::ExplicitMotivation => &self.explicit,
        }
    }

    fn column_mut(&mut self, dim: Dimension) -> &mut DimensionColumn {
        match dim {
            Dimension::LongTermObjective => &mut self.long_term,
            Dimension::ShortTermObjective => &mut self.short_term,
            Dimension::ImplicitMotivation => &mut self.implicit,
            Dimension::ExplicitMotivation => &mut self.explicit,
        }
    }

    pub fn columns(&self) -> [&DimensionColumn; 6] {
        [&self.long_term, &self.short_term, &self.implicit, &self.explicit, &self.avg, &self.total]
    }

    /// Rows `alignment_rate`, `reward`, `components` under the six columns.
    pub fn to_csv(&self) -> String {
        let mut out = format!("metric,{}\n", REPORT_COLUMNS.join(","));
        let row = |name: &str, f: &dyn Fn(&DimensionColumn) -> String| {
            let cells: Vec<String> = self.columns().iter().map(|c| f(c)).collect();
            format!("{name},{}\n", cells.join(","))
        };
        out.push_str(&row("alignment_rate", &|c| format!("{:.4}", c.alignment_rate)));
        out.push_str(&row("reward", &|c| format!("{:.6}", c.reward)));
        out.push_str(&row("components", &|c| c.components.to_string()));
        out
    }
}

/// Alignment over `final_states` and reward sums over `reward_logs`.
pub fn alignment_report<'a>(
    final_states: &[LearnerState],
    reward_logs: impl IntoIterator<Item = &'a RewardBreakdown>,
) -> AlignmentReport {
    let mut report = AlignmentReport::default();
    for s in final_states {
        for c in s.components() {
            let col = report.column_mut(c.dimension);
            col.components += 1;
            col.aligned += c.is_aligned() as usize;
        }
    }
    let mut terms: [Vec<f64>; 4] = Default::default();
    for b in reward_logs {
        for t in &b.contributions {
            terms[t.dimension.index()].push(t.term_value);
        }
    }
    for dim in Dimension::ALL {
        let mut xs = std::mem::take(&mut terms[dim.index()]);
        // Sorted summation keeps the sum independent of population order.
        xs.sort_by(f64::total_cmp);
        let col = report.column_mut(dim);
        col.reward = xs.iter().sum();
        col.alignment_rate = rate(col.aligned, col.components);
    }
    let (mut comps, mut aligned, mut reward) = (0, 0, 0.0);
    for dim in Dimension::ALL {
        let c = report.column(dim);
        comps += c.components;
        aligned += c.aligned;
        reward += c.reward;
    }
    report.total = DimensionColumn {
        alignment_rate: rate(aligned, comps),
        reward,
        components: comps,
        aligned,
    };
    report.avg = DimensionColumn {
        alignment_rate: rate(aligned, comps),
        reward: reward / 4.0,
        components: comps / 4,
        aligned: aligned / 4,
    };
    report
}

fn rate(aligned: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * aligned as f64 / total as f64
    }
}
