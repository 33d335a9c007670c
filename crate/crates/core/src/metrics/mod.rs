//! Primary and derived sustainability metrics, their normalization, and the
//! per-cell evaluation engine.

mod engine;
mod formulas;
mod normalize;
mod sweep;

use serde::{Deserialize, Serialize};

pub use engine::{compute_all, compute_all_sequential};
pub use formulas::{
    aggregate_si, compute_cer, compute_eco, compute_gf_beta, compute_gqi, compute_scv,
    compute_sci, compute_sei, compute_si, compute_svi, AggregatedSi, PrimarySeries, SiComponents,
};
pub use normalize::{
    build_normalization, Bounds, NormPoint, NormalizationContext, Quantity, ScopedNormalization,
};
pub use sweep::{gf_beta_sweep, gf_scores, group_regimes, BetaRegimes, GfInput, GfScore, RegimeEntry};

use crate::domain::{AnalysisConfig, CellId};

/// Every metric computed for one cell. `None` marks a metric that is
/// undefined (or skipped for lack of coverage); the reason is recorded in
/// the owning [`CellReport`]'s issues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MetricSet {
    /// g CO2e per functional run.
    pub sci: Option<f64>,
    /// Functional runs per g CO2e.
    pub sei: Option<f64>,
    /// Coverage percent per g CO2e.
    pub cer: Option<f64>,
    /// Aggregate stability; `None` in per-metric mode (see `si_components`).
    pub si: Option<f64>,
    pub si_components: SiComponents,
    pub gqi: Option<f64>,
    /// Coverage percent per (s * g CO2e).
    pub scv_c: Option<f64>,
    /// Coverage percent per (s * kWh).
    pub scv_e: Option<f64>,
    pub svi: Option<f64>,
    pub eco: Option<f64>,
    pub gf_beta: Vec<GfScore>,
}

/// Scalar metric families, in report order. GF_β is handled separately
/// because it carries one value per β.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ScalarMetric {
    Sci,
    Sei,
    Cer,
    Si,
    Gqi,
    ScvC,
    ScvE,
    Svi,
}

impl ScalarMetric {
    pub const ALL: [ScalarMetric; 8] = [
        ScalarMetric::Sci,
        ScalarMetric::Sei,
        ScalarMetric::Cer,
        ScalarMetric::Si,
        ScalarMetric::Gqi,
        ScalarMetric::ScvC,
        ScalarMetric::ScvE,
        ScalarMetric::Svi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScalarMetric::Sci => "SCI",
            ScalarMetric::Sei => "SEI",
            ScalarMetric::Cer => "CER",
            ScalarMetric::Si => "SI",
            ScalarMetric::Gqi => "GQI",
            ScalarMetric::ScvC => "SCV_C",
            ScalarMetric::ScvE => "SCV_E",
            ScalarMetric::Svi => "SVI",
        }
    }

    pub fn lower_is_better(self) -> bool {
        self == ScalarMetric::Sci
    }
}

impl MetricSet {
    pub fn scalar(&self, m: ScalarMetric) -> Option<f64> {
        match m {
            ScalarMetric::Sci => self.sci,
            ScalarMetric::Sei => self.sei,
            ScalarMetric::Cer => self.cer,
            ScalarMetric::Si => self.si,
            ScalarMetric::Gqi => self.gqi,
            ScalarMetric::ScvC => self.scv_c,
            ScalarMetric::ScvE => self.scv_e,
            ScalarMetric::Svi => self.svi,
        }
    }

    pub fn gf_at(&self, beta: f64) -> Option<f64> {
        self.gf_beta.iter().find(|g| g.beta == beta).and_then(|g| g.score)
    }

    /// Mean GF over the given βs; `None` unless every one is defined.
    pub fn gf_mean_over(&self, betas: impl IntoIterator<Item = f64>) -> Option<f64> {
        let vals: Option<Vec<f64>> = betas.into_iter().map(|b| self.gf_at(b)).collect();
        let vals = vals?;
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    /// Mean GF over every configured β.
    pub fn gf_mean(&self) -> Option<f64> {
        self.gf_mean_over(self.gf_beta.iter().map(|g| g.beta))
    }
}

/// Cell-level inputs the metrics were derived from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CellInputs {
    pub runs_used: usize,
    pub runs_failed: usize,
    /// Coverage percent actually used (after any per-model averaging).
    pub coverage_pct: Option<f64>,
    pub mean_energy_kwh: Option<f64>,
    pub mean_emissions_g_per_run: Option<f64>,
    pub mean_duration_s: Option<f64>,
    pub avg_std: Option<f64>,
    pub sci_hat: Option<f64>,
    pub t_hat: Option<f64>,
    pub sigma_hat: Option<f64>,
    pub energy_hat: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricIssue {
    pub metric: String,
    pub reason: String,
}

impl MetricIssue {
    pub fn new(metric: impl Into<String>, reason: impl Into<String>) -> Self {
        MetricIssue {
            metric: metric.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub id: CellId,
    pub inputs: CellInputs,
    pub metrics: MetricSet,
    pub issues: Vec<MetricIssue>,
}

impl CellReport {
    /// A cell succeeds when every metric it was asked for is defined.
    pub fn succeeded(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Result of evaluating every cell under one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub config: AnalysisConfig,
    /// Ordered by model, then variant.
    pub cells: Vec<CellReport>,
    pub beta_regimes: BetaRegimes,
}

impl Analysis {
    pub fn cell(&self, id: &CellId) -> Option<&CellReport> {
        self.cells.iter().find(|c| &c.id == id)
    }
}
