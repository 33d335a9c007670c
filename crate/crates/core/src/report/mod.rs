//! Rankings, cross-variant comparison, serialized reports and charts.

mod chart;
mod compare;
mod rank;
mod serialize;

use serde::{Deserialize, Serialize};

pub use chart::{emit_charts, render_svg, Panel};
pub use compare::{
    build_comparison, ComparisonRow, ComparisonSummary, Trend, VariantEntry, DEFAULT_TREND_THRESHOLD,
};
pub use rank::{rank, rank_values, Direction, RankRow, RankingTable};
pub use serialize::{serialize, value_rows, Format, ValueRow, CSV_HEADER};

use crate::metrics::{CellReport, ScalarMetric};

/// A reported metric family: one of the scalar metrics, or GF_β (one value
/// per β, ranked by its mean over the configured βs).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MetricFamily {
    Scalar(ScalarMetric),
    Gf,
}

impl MetricFamily {
    pub const ALL: [MetricFamily; 9] = [
        MetricFamily::Scalar(ScalarMetric::Sci),
        MetricFamily::Scalar(ScalarMetric::Sei),
        MetricFamily::Scalar(ScalarMetric::Cer),
        MetricFamily::Scalar(ScalarMetric::Si),
        MetricFamily::Scalar(ScalarMetric::Gqi),
        MetricFamily::Scalar(ScalarMetric::ScvC),
        MetricFamily::Scalar(ScalarMetric::ScvE),
        MetricFamily::Scalar(ScalarMetric::Svi),
        MetricFamily::Gf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricFamily::Scalar(m) => m.name(),
            MetricFamily::Gf => "GF_beta",
        }
    }

    pub fn slug(self) -> String {
        self.name().to_ascii_lowercase()
    }

    pub fn direction(self) -> Direction {
        match self {
            MetricFamily::Scalar(m) if m.lower_is_better() => Direction::LowerBetter,
            _ => Direction::HigherBetter,
        }
    }

    /// Value used for ranking and comparison.
    pub fn value(self, cell: &CellReport) -> Option<f64> {
        match self {
            MetricFamily::Scalar(m) => cell.metrics.scalar(m),
            MetricFamily::Gf => cell.metrics.gf_mean(),
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(name) || f.slug() == name.to_ascii_lowercase())
    }
}

/// Formats a value for human-facing tables.
pub(crate) fn fmt_value(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-3..1e6).contains(&a) {
        format!("{v:.6}")
    } else {
        format!("{v:.6e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_families() {
        assert_eq!(MetricFamily::ALL.len(), 9);
        assert_eq!(MetricFamily::parse("scv_c"), Some(MetricFamily::Scalar(ScalarMetric::ScvC)));
        assert_eq!(MetricFamily::parse("GF_beta"), Some(MetricFamily::Gf));
        assert_eq!(MetricFamily::parse("nope"), None);
        assert_eq!(MetricFamily::Scalar(ScalarMetric::Sci).direction(), Direction::LowerBetter);
        assert_eq!(MetricFamily::Gf.direction(), Direction::HigherBetter);
    }

    #[test]
    fn value_formatting() {
        assert_eq!(fmt_value(0.48), "0.480000");
        assert_eq!(fmt_value(0.0), "0.000000");
        assert_eq!(fmt_value(1.5e-5), "1.500000e-5");
    }
}
