use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::rank::rank;
use super::MetricFamily;
use crate::domain::{CellId, PromptVariant};
use crate::error::{Error, Result};
use crate::metrics::CellReport;

/// Relative change per step below which a step counts as flat.
pub const DEFAULT_TREND_THRESHOLD: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trend {
    Decreasing,
    Increasing,
    Flat,
    Mixed,
}

impl Trend {
    /// Classifies consecutive means. A step moves when its relative change
    /// exceeds `threshold`; the trend is the common direction of the moving
    /// steps.
    pub fn classify(means: &[f64], threshold: f64) -> Trend {
        let (mut up, mut down) = (false, false);
        for w in means.windows(2) {
            let diff = w[1] - w[0];
            let rel = if w[0] == 0.0 {
                if diff == 0.0 { 0.0 } else { diff.signum() * f64::INFINITY }
            } else {
                diff / w[0].abs()
            };
            if rel > threshold {
                up = true;
            } else if rel < -threshold {
                down = true;
            }
        }
        match (up, down) {
            (false, false) => Trend::Flat,
            (true, false) => Trend::Increasing,
            (false, true) => Trend::Decreasing,
            (true, true) => Trend::Mixed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub metric: String,
    /// Per variant: mean over cells with the metric defined, and the rank-1
    /// cell(s) among that variant's cells.
    pub per_variant: Vec<VariantEntry>,
    pub trend: Trend,
    /// Set when an expected variant has no defined value for this metric.
    pub partial: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantEntry {
    pub variant: PromptVariant,
    pub mean: Option<f64>,
    pub dominant: Vec<CellId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub threshold: f64,
    pub variants: Vec<PromptVariant>,
    pub rows: Vec<ComparisonRow>,
}

/// One row per metric family over V0..V3 (plus any further variants present).
pub fn build_comparison(cells: &[CellReport], threshold: f64) -> Result<ComparisonSummary> {
    if !(threshold.is_finite() && threshold >= 0.0) {
        return Err(Error::validation(format!("trend threshold must be >= 0, got {threshold}")));
    }
    let present: BTreeSet<PromptVariant> = cells.iter().map(|c| c.id.variant).collect();
    if present.len() < 2 {
        return Err(Error::validation(format!(
            "comparison needs at least 2 prompt variants, found {}",
            present.len()
        )));
    }
    let variants: Vec<PromptVariant> = PromptVariant::STANDARD
        .into_iter()
        .chain(present.iter().copied())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let rows = MetricFamily::ALL
        .into_iter()
        .map(|family| {
            let per_variant: Vec<VariantEntry> = variants
                .iter()
                .map(|&variant| {
                    let subset: Vec<CellReport> =
                        cells.iter().filter(|c| c.id.variant == variant).cloned().collect();
                    let vals: Vec<f64> = subset.iter().filter_map(|c| family.value(c)).collect();
                    let mean = (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64);
                    let dominant = rank(&subset, family)
                        .map(|t| t.leaders().into_iter().cloned().collect())
                        .unwrap_or_default();
                    VariantEntry { variant, mean, dominant }
                })
                .collect();
            let means: Vec<f64> = per_variant.iter().filter_map(|e| e.mean).collect();
            ComparisonRow {
                metric: family.name().to_string(),
                trend: Trend::classify(&means, threshold),
                partial: per_variant.iter().any(|e| e.mean.is_none()),
                per_variant,
            }
        })
        .collect();
    Ok(ComparisonSummary { threshold, variants, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trend_examples() {
        assert_eq!(Trend::classify(&[0.43, 0.39, 0.35, 0.31], 0.02), Trend::Decreasing);
        assert_eq!(Trend::classify(&[0.5; 4], 0.02), Trend::Flat);
        assert_eq!(Trend::classify(&[0.4, 0.2, 0.5, 0.3], 0.02), Trend::Mixed);
        assert_eq!(Trend::classify(&[1.0, 1.5, 1.51, 2.0], 0.02), Trend::Increasing);
        // a 1% wobble stays flat
        assert_eq!(Trend::classify(&[1.0, 1.01, 1.0], 0.02), Trend::Flat);
        assert_eq!(Trend::classify(&[0.0, 1.0], 0.02), Trend::Increasing);
        assert_eq!(Trend::classify(&[], 0.02), Trend::Flat);
    }
}
