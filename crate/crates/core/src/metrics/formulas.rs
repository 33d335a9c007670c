//! Closed-form carbon, energy and quality metrics.
//!
//! Coverage arguments named `coverage_pct` are percentages in [0, 100];
//! arguments named `q` are fractions in [0, 1]. Emissions are grams CO2e.

use crate::domain::{population_stats, AnalysisConfig, SiAggregation};
use crate::error::{Error, Result};

fn check_pct(coverage_pct: f64) -> Result<()> {
    crate::domain::check_coverage(coverage_pct)
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::validation(format!("{name} must lie in [0, 1], got {v}")))
    }
}

/// Carbon per functional run: `(I / R) * E`, in grams CO2e.
pub fn compute_sci(energy_kwh: f64, config: &AnalysisConfig) -> Result<f64> {
    config.validate()?;
    if !(energy_kwh.is_finite() && energy_kwh >= 0.0) {
        return Err(Error::validation(format!("energy must be >= 0, got {energy_kwh}")));
    }
    Ok(config.carbon_per_run_factor() * energy_kwh)
}

/// Functional runs per gram CO2e.
pub fn compute_sei(sci: f64) -> Result<f64> {
    if sci == 0.0 {
        return Err(Error::undefined("SEI", "carbon intensity is zero"));
    }
    if !(sci.is_finite() && sci > 0.0) {
        return Err(Error::validation(format!("SCI must be > 0, got {sci}")));
    }
    Ok(1.0 / sci)
}

/// Coverage percentage per gram CO2e emitted per run.
pub fn compute_cer(coverage_pct: f64, emissions_g_per_run: f64) -> Result<f64> {
    check_pct(coverage_pct)?;
    if emissions_g_per_run == 0.0 {
        return Err(Error::undefined("CER", "emissions per run are zero"));
    }
    if !(emissions_g_per_run.is_finite() && emissions_g_per_run > 0.0) {
        return Err(Error::validation(format!(
            "emissions must be > 0 g, got {emissions_g_per_run}"
        )));
    }
    Ok(coverage_pct / emissions_g_per_run)
}

/// Stability of a series: `1 - sigma / mu` with population sigma. Can be
/// negative for very noisy series.
pub fn compute_si(series: &[f64], config: &AnalysisConfig) -> Result<f64> {
    let s = population_stats(series)?;
    if s.mean.abs() < config.epsilon || s.mean == 0.0 {
        return Err(Error::undefined("SI", "series mean is zero"));
    }
    Ok(1.0 - s.std_dev / s.mean)
}

/// Per-run series of the three primary metrics for one cell. A `None`
/// series is unavailable (for instance CER without coverage).
#[derive(Debug, Clone, Default)]
pub struct PrimarySeries<'a> {
    pub sci: Option<&'a [f64]>,
    pub sei: Option<&'a [f64]>,
    pub cer: Option<&'a [f64]>,
}

/// Stability of each available primary-metric series.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct SiComponents {
    pub sci: Option<f64>,
    pub sei: Option<f64>,
    pub cer: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AggregatedSi {
    Mean(f64),
    PerMetric(SiComponents),
}

/// Stability across the primary metrics: the mean of the available series'
/// indices, or the indices themselves in per-metric mode.
pub fn aggregate_si(series: &PrimarySeries<'_>, config: &AnalysisConfig) -> Result<AggregatedSi> {
    let one = |s: Option<&[f64]>| s.map(|s| compute_si(s, config)).transpose();
    let components = SiComponents {
        sci: one(series.sci)?,
        sei: one(series.sei)?,
        cer: one(series.cer)?,
    };
    match config.si_aggregation {
        SiAggregation::PerMetric => {
            if components.sci.is_none() && components.sei.is_none() && components.cer.is_none() {
                return Err(Error::validation("no primary-metric series available"));
            }
            Ok(AggregatedSi::PerMetric(components))
        }
        SiAggregation::MeanOverPrimaryMetrics => mean_si(&components).map(AggregatedSi::Mean),
    }
}

pub(crate) fn mean_si(c: &SiComponents) -> Result<f64> {
    let present: Vec<f64> = [c.sci, c.sei, c.cer].into_iter().flatten().collect();
    if present.is_empty() {
        return Err(Error::validation("no primary-metric series available"));
    }
    Ok(present.iter().sum::<f64>() / present.len() as f64)
}

/// Harmonic combination of fractional coverage and an energy term:
/// `2 q e / (q + e)` with `q = coverage_pct / 100`.
///
/// `energy_term` is raw batch energy in kWh or a normalized efficiency in
/// [0, 1], depending on the configured GQI mode.
pub fn compute_gqi(coverage_pct: f64, energy_term: f64) -> Result<f64> {
    check_pct(coverage_pct)?;
    if !(energy_term.is_finite() && energy_term >= 0.0) {
        return Err(Error::validation(format!(
            "GQI energy term must be >= 0, got {energy_term}"
        )));
    }
    let q = coverage_pct / 100.0;
    if q + energy_term == 0.0 {
        return Err(Error::undefined("GQI", "coverage and energy term are both zero"));
    }
    Ok(2.0 * q * energy_term / (q + energy_term))
}

/// Coverage velocity against carbon and against energy. Each side fails on
/// its own zero denominator without affecting the other.
pub fn compute_scv(
    coverage_pct: f64,
    duration_s: f64,
    emissions_g: f64,
    energy_kwh: f64,
) -> Result<(Result<f64>, Result<f64>)> {
    check_pct(coverage_pct)?;
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::validation(format!("duration must be > 0, got {duration_s}")));
    }
    let side = |name: &str, denom: f64| {
        if denom == 0.0 {
            Err(Error::undefined(name, "zero resource denominator"))
        } else if !(denom.is_finite() && denom > 0.0) {
            Err(Error::validation(format!("{name} denominator must be > 0, got {denom}")))
        } else {
            Ok(coverage_pct / (duration_s * denom))
        }
    };
    Ok((side("SCV_C", emissions_g), side("SCV_E", energy_kwh)))
}

/// `(Q/100) * 1/(1+sci_hat) * 1/(1+t_hat) * (1 - sigma_hat)`.
pub fn compute_svi(coverage_pct: f64, sci_hat: f64, t_hat: f64, sigma_hat: f64) -> Result<f64> {
    check_pct(coverage_pct)?;
    check_unit("normalized SCI", sci_hat)?;
    check_unit("normalized time", t_hat)?;
    check_unit("normalized instability", sigma_hat)?;
    Ok(coverage_pct / 100.0 / (1.0 + sci_hat) / (1.0 + t_hat) * (1.0 - sigma_hat))
}

/// Eco-efficiency `1 / ((1 + sci_hat)(1 + t_hat))`, in [0.25, 1].
pub fn compute_eco(sci_hat: f64, t_hat: f64) -> Result<f64> {
    check_unit("normalized SCI", sci_hat)?;
    check_unit("normalized time", t_hat)?;
    Ok(1.0 / ((1.0 + sci_hat) * (1.0 + t_hat)))
}

/// Green F-beta: `(1 + b^2) q eco / (b^2 q + eco)`. Small β leans on
/// coverage, large β on eco-efficiency.
pub fn compute_gf_beta(q: f64, eco: f64, beta: f64) -> Result<f64> {
    check_unit("coverage fraction", q)?;
    if !(eco.is_finite() && eco > 0.0 && eco <= 1.0) {
        return Err(Error::validation(format!("ECO must lie in (0, 1], got {eco}")));
    }
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::validation(format!("beta must be > 0, got {beta}")));
    }
    if q == eco {
        return Ok(q);
    }
    let b2 = beta * beta;
    let denom = b2 * q + eco;
    if denom == 0.0 {
        return Err(Error::undefined("GF_beta", "zero denominator"));
    }
    // a weighted harmonic mean; clamping only removes rounding overshoot
    Ok(((1.0 + b2) * q * eco / denom).clamp(q.min(eco), q.max(eco)))
}
