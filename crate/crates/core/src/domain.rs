//! Domain values shared by every stage of the pipeline.
//!
//! Everything here is an immutable value once constructed. Emissions are
//! carried in grams of CO2e; the only kilogram quantity is the one read from
//! (or written to) an emission log.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grams per kilogram.
pub const GRAMS_PER_KG: f64 = 1000.0;

/// The β values swept by default for the green F-β score.
pub const DEFAULT_BETAS: [f64; 6] = [0.3, 0.6, 0.9, 1.2, 1.5, 1.8];

/// Functional runs recorded per logged batch unless configured otherwise.
pub const DEFAULT_RUNS_PER_BATCH: u32 = 5;

pub const DEFAULT_EPSILON: f64 = 1e-12;

/// Converts a kilogram CO2e figure to grams.
pub fn to_grams(emissions_kg: f64) -> Result<f64> {
    if !emissions_kg.is_finite() || emissions_kg < 0.0 {
        return Err(Error::validation(format!(
            "emissions must be a finite non-negative number of kg, got {emissions_kg}"
        )));
    }
    Ok(emissions_kg * GRAMS_PER_KG)
}

/// Position on the prompt-variant ladder. `V0` is the minimal template; higher
/// indices add structure. Indices past `V3` are accepted for custom ladders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PromptVariant(pub u8);

impl PromptVariant {
    pub const V0: PromptVariant = PromptVariant(0);
    pub const V1: PromptVariant = PromptVariant(1);
    pub const V2: PromptVariant = PromptVariant(2);
    pub const V3: PromptVariant = PromptVariant(3);

    pub const STANDARD: [PromptVariant; 4] = [Self::V0, Self::V1, Self::V2, Self::V3];

    pub fn index(self) -> u8 {
        self.0
    }
}

impl fmt::Display for PromptVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "V{}", self.0)
    }
}

impl FromStr for PromptVariant {
    type Err = Error;

    /// Accepts `V2`, `v2`, `AP_V2`, `APV2` or a bare `2`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let upper = t.to_ascii_uppercase();
        let digits = upper
            .strip_prefix("AP_V")
            .or_else(|| upper.strip_prefix("APV"))
            .or_else(|| upper.strip_prefix('V'))
            .unwrap_or(&upper);
        digits
            .parse::<u8>()
            .map(PromptVariant)
            .map_err(|_| Error::validation(format!("invalid prompt variant `{s}`")))
    }
}

impl Serialize for PromptVariant {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PromptVariant {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Identifies one (model, prompt variant) cell. Orders by model, then variant.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellId {
    pub model_id: String,
    pub variant: PromptVariant,
}

impl CellId {
    pub fn new(model_id: impl Into<String>, variant: PromptVariant) -> Self {
        CellId {
            model_id: model_id.into(),
            variant,
        }
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.model_id, self.variant)
    }
}

/// One measured batch execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub model_id: String,
    pub prompt_variant: PromptVariant,
    pub batch_index: usize,
    pub duration_s: f64,
    pub energy_kwh: f64,
    pub emissions_g: f64,
    pub timestamp: Option<DateTime<Utc>>,
    pub source_file: PathBuf,
    /// Set when the generation command failed for this batch.
    #[serde(default)]
    pub failed: bool,
}

impl RunRecord {
    /// Builds a record from logged units (kg of CO2e), converting to grams.
    #[allow(clippy::too_many_arguments)]
    pub fn from_logged(
        model_id: impl Into<String>,
        prompt_variant: PromptVariant,
        batch_index: usize,
        duration_s: f64,
        energy_kwh: f64,
        emissions_kg: f64,
        timestamp: Option<DateTime<Utc>>,
        source_file: impl Into<PathBuf>,
    ) -> Result<Self> {
        if !(duration_s.is_finite() && duration_s > 0.0) {
            return Err(Error::validation(format!(
                "duration must be > 0 s, got {duration_s}"
            )));
        }
        if !(energy_kwh.is_finite() && energy_kwh >= 0.0) {
            return Err(Error::validation(format!(
                "energy must be >= 0 kWh, got {energy_kwh}"
            )));
        }
        Ok(RunRecord {
            model_id: model_id.into(),
            prompt_variant,
            batch_index,
            duration_s,
            energy_kwh,
            emissions_g: to_grams(emissions_kg)?,
            timestamp,
            source_file: source_file.into(),
            failed: false,
        })
    }

    pub fn emissions_kg(&self) -> f64 {
        self.emissions_g / GRAMS_PER_KG
    }
}

/// All runs for one (model, variant) pair plus the coverage they achieved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub model_id: String,
    pub prompt_variant: PromptVariant,
    pub runs: Vec<RunRecord>,
    /// `None` marks coverage as absent; Q-dependent metrics are then skipped.
    pub coverage_pct: Option<f64>,
}

impl Cell {
    pub fn new(
        model_id: impl Into<String>,
        prompt_variant: PromptVariant,
        runs: Vec<RunRecord>,
        coverage_pct: Option<f64>,
    ) -> Result<Self> {
        let model_id = model_id.into();
        if let Some(q) = coverage_pct {
            check_coverage(q)?;
        }
        if let Some(r) = runs
            .iter()
            .find(|r| r.model_id != model_id || r.prompt_variant != prompt_variant)
        {
            return Err(Error::validation(format!(
                "run {}/{} does not belong to cell {model_id}/{prompt_variant}",
                r.model_id, r.prompt_variant
            )));
        }
        Ok(Cell {
            model_id,
            prompt_variant,
            runs,
            coverage_pct,
        })
    }

    pub fn id(&self) -> CellId {
        CellId::new(self.model_id.clone(), self.prompt_variant)
    }
}

pub(crate) fn check_coverage(q: f64) -> Result<()> {
    if q.is_finite() && (0.0..=100.0).contains(&q) {
        Ok(())
    } else {
        Err(Error::validation(format!(
            "coverage must lie in [0, 100], got {q}"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationScope {
    #[default]
    AllCells,
    PerPromptVariant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GqiEnergyMode {
    /// Fractional coverage against raw batch energy in kWh.
    #[default]
    RawEnergyKwh,
    /// Fractional coverage against `1 - hat(energy)` over the normalization scope.
    NormalizedEfficiency,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SiAggregation {
    #[default]
    MeanOverPrimaryMetrics,
    PerMetric,
}

/// Which emission figure stands for "C" in the coverage ratios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EmissionBasis {
    /// Batch emissions divided by runs-per-batch.
    #[default]
    PerRun,
    /// Batch emissions as logged.
    RawBatch,
}

/// Which coverage figure feeds a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CoverageMode {
    /// Use each cell's own coverage.
    #[default]
    PerCell,
    /// Replace each cell's coverage by the mean over that model's variants.
    ModelMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub grid_intensity_g_per_kwh: f64,
    #[serde(default = "default_runs_per_batch")]
    pub runs_per_batch: u32,
    #[serde(default = "default_betas")]
    pub betas: Vec<f64>,
    #[serde(default)]
    pub normalization_scope: NormalizationScope,
    #[serde(default)]
    pub gqi_energy_mode: GqiEnergyMode,
    #[serde(default)]
    pub si_aggregation: SiAggregation,
    #[serde(default)]
    pub emission_basis: EmissionBasis,
    #[serde(default)]
    pub coverage_mode: CoverageMode,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_runs_per_batch() -> u32 {
    DEFAULT_RUNS_PER_BATCH
}

fn default_betas() -> Vec<f64> {
    DEFAULT_BETAS.to_vec()
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

impl AnalysisConfig {
    /// Default settings for a given grid intensity (there is no default intensity).
    pub fn new(grid_intensity_g_per_kwh: f64) -> Self {
        AnalysisConfig {
            grid_intensity_g_per_kwh,
            runs_per_batch: DEFAULT_RUNS_PER_BATCH,
            betas: default_betas(),
            normalization_scope: NormalizationScope::default(),
            gqi_energy_mode: GqiEnergyMode::default(),
            si_aggregation: SiAggregation::default(),
            emission_basis: EmissionBasis::default(),
            coverage_mode: CoverageMode::default(),
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let i = self.grid_intensity_g_per_kwh;
        if !(i.is_finite() && i > 0.0) {
            return Err(Error::validation(format!(
                "grid intensity must be > 0 g/kWh, got {i}"
            )));
        }
        if self.runs_per_batch == 0 {
            return Err(Error::validation("runs per batch must be >= 1"));
        }
        if self.betas.is_empty() {
            return Err(Error::validation("beta list must not be empty"));
        }
        if let Some(b) = self.betas.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
            return Err(Error::validation(format!("beta must be > 0, got {b}")));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::validation("epsilon must be > 0"));
        }
        Ok(())
    }

    /// Grams CO2e per kWh attributed to one functional run (I / R).
    pub fn carbon_per_run_factor(&self) -> f64 {
        self.grid_intensity_g_per_kwh / f64::from(self.runs_per_batch)
    }
}

/// Mean, standard deviation and sample count of a series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub std_dev: f64,
    pub n: usize,
}

/// Mean and population standard deviation (divides by `n`).
pub fn population_stats(values: &[f64]) -> Result<Stats> {
    let (mean, ss) = mean_and_squares(values)?;
    let n = values.len();
    Ok(Stats {
        mean,
        std_dev: (ss / n as f64).sqrt(),
        n,
    })
}

/// Mean and sample standard deviation (divides by `n - 1`); needs two values.
pub fn sample_stats(values: &[f64]) -> Result<Stats> {
    if values.len() < 2 {
        return Err(Error::validation(
            "sample standard deviation needs at least two values",
        ));
    }
    let (mean, ss) = mean_and_squares(values)?;
    let n = values.len();
    Ok(Stats {
        mean,
        std_dev: (ss / (n - 1) as f64).sqrt(),
        n,
    })
}

fn mean_and_squares(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::validation("statistics of an empty series"));
    }
    if values.iter().all(|v| *v == values[0]) {
        return Ok((values[0], 0.0));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    Ok((mean, ss))
}
