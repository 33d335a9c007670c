//! Evaluation of every cell in an analysis.
//!
//! Three passes: per-cell summaries (independent, run data-parallel when the
//! `parallel` feature is on), a sequential pass that builds the min-max
//! normalization over the whole population, and a second per-cell pass for
//! the metrics that depend on normalized quantities.
//!
//! Cell-level metrics evaluate each formula on the cell's mean inputs (mean
//! energy, mean per-run emissions, mean duration). For SCI this equals the
//! mean of the per-run values; for SEI it keeps `SEI * SCI = 1` exact. The
//! per-run series feed the stability index and the instability term.

use std::collections::BTreeMap;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use super::formulas::{
    compute_cer, compute_eco, compute_gqi, compute_scv, compute_sci, compute_sei, compute_si,
    compute_svi, mean_si, SiComponents,
};
use super::normalize::{build_normalization, NormPoint, Quantity, ScopedNormalization};
use super::sweep::{gf_scores, group_regimes, GfInput};
use super::{Analysis, CellInputs, CellReport, MetricIssue, MetricSet};
use crate::domain::{
    population_stats, AnalysisConfig, Cell, CoverageMode, EmissionBasis, GqiEnergyMode,
    SiAggregation,
};
use crate::error::{Error, Result};

const COVERAGE_ABSENT: &str = "coverage absent";

/// Evaluates every cell. Uses the data-parallel path when the `parallel`
/// feature is enabled.
///
/// Fails only on an invalid configuration or an empty cell list; problems in
/// individual cells are recorded on those cells.
pub fn compute_all(cells: &[Cell], config: &AnalysisConfig) -> Result<Analysis> {
    evaluate(cells, config, cfg!(feature = "parallel"))
}

/// Same as [`compute_all`] but always single-threaded.
pub fn compute_all_sequential(cells: &[Cell], config: &AnalysisConfig) -> Result<Analysis> {
    evaluate(cells, config, false)
}

fn map_cells<T, U, F>(items: &[T], parallel: bool, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        return items.par_iter().map(f).collect();
    }
    let _ = parallel;
    items.iter().map(f).collect()
}

struct Summary {
    report: CellReport,
    q: Option<f64>,
}

impl Summary {
    fn issue(&mut self, metric: &str, reason: impl Into<String>) {
        self.report.issues.push(MetricIssue::new(metric, reason));
    }

    fn take(&mut self, metric: &str, r: Result<f64>) -> Option<f64> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.issue(metric, reason_of(e));
                None
            }
        }
    }
}

fn reason_of(e: Error) -> String {
    match e {
        Error::UndefinedMetric { reason, .. } => reason,
        other => other.to_string(),
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn effective_coverage(cells: &[Cell], mode: CoverageMode) -> Vec<Option<f64>> {
    match mode {
        CoverageMode::PerCell => cells.iter().map(|c| c.coverage_pct).collect(),
        CoverageMode::ModelMean => {
            let mut acc: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
            for c in cells {
                if let Some(q) = c.coverage_pct {
                    let e = acc.entry(&c.model_id).or_insert((0.0, 0));
                    e.0 += q;
                    e.1 += 1;
                }
            }
            cells
                .iter()
                .map(|c| acc.get(c.model_id.as_str()).map(|(s, n)| s / *n as f64))
                .collect()
        }
    }
}

fn evaluate(cells: &[Cell], config: &AnalysisConfig, parallel: bool) -> Result<Analysis> {
    config.validate()?;
    if cells.is_empty() {
        return Err(Error::validation("no cells to analyse"));
    }
    let coverage = effective_coverage(cells, config.coverage_mode);
    let work: Vec<(&Cell, Option<f64>)> = cells.iter().zip(coverage).collect();

    let mut summaries = map_cells(&work, parallel, |(cell, q)| summarize(cell, *q, config));

    let points: Vec<NormPoint> = summaries
        .iter()
        .filter(|s| s.report.inputs.runs_used > 0)
        .map(|s| NormPoint {
            variant: s.report.id.variant,
            sci: s.report.metrics.sci,
            duration: s.report.inputs.mean_duration_s,
            avg_std: s.report.inputs.avg_std,
            energy: s.report.inputs.mean_energy_kwh,
        })
        .collect();
    let norm = if points.is_empty() {
        None
    } else {
        Some(build_normalization(&points, config.normalization_scope)?)
    };

    summaries = {
        let owned: Vec<Summary> = summaries;
        #[cfg(feature = "parallel")]
        {
            if parallel {
                owned
                    .into_par_iter()
                    .map(|s| finalize(s, norm.as_ref(), config))
                    .collect()
            } else {
                owned
                    .into_iter()
                    .map(|s| finalize(s, norm.as_ref(), config))
                    .collect()
            }
        }
        #[cfg(not(feature = "parallel"))]
        {
            owned
                .into_iter()
                .map(|s| finalize(s, norm.as_ref(), config))
                .collect()
        }
    };

    let mut reports: Vec<CellReport> = summaries.into_iter().map(|s| s.report).collect();
    reports.sort_by(|a, b| a.id.cmp(&b.id));
    let gf: Vec<_> = reports.iter().map(|r| r.metrics.gf_beta.clone()).collect();
    let beta_regimes = group_regimes(&gf, &config.betas);

    Ok(Analysis {
        config: config.clone(),
        cells: reports,
        beta_regimes,
    })
}

fn summarize(cell: &Cell, q: Option<f64>, config: &AnalysisConfig) -> Summary {
    let eps = config.epsilon;
    let mut s = Summary {
        report: CellReport {
            id: cell.id(),
            inputs: CellInputs {
                coverage_pct: q,
                ..CellInputs::default()
            },
            metrics: MetricSet::default(),
            issues: Vec::new(),
        },
        q,
    };

    let runs: Vec<_> = cell.runs.iter().filter(|r| !r.failed).collect();
    s.report.inputs.runs_used = runs.len();
    s.report.inputs.runs_failed = cell.runs.len() - runs.len();
    if runs.is_empty() {
        s.issue("*", "cell has no successful runs");
        s.report.metrics.gf_beta = config
            .betas
            .iter()
            .map(|&beta| super::GfScore { beta, score: None })
            .collect();
        return s;
    }

    let sci_series: Vec<f64> = match runs
        .iter()
        .map(|r| compute_sci(r.energy_kwh, config))
        .collect::<Result<Vec<_>>>()
    {
        Ok(v) => v,
        Err(e) => {
            s.issue("*", reason_of(e));
            return s;
        }
    };
    let per_run_c: Vec<f64> = runs
        .iter()
        .map(|r| match config.emission_basis {
            EmissionBasis::PerRun => r.emissions_g / f64::from(config.runs_per_batch),
            EmissionBasis::RawBatch => r.emissions_g,
        })
        .collect();
    let durations: Vec<f64> = runs.iter().map(|r| r.duration_s).collect();
    let energies: Vec<f64> = runs.iter().map(|r| r.energy_kwh).collect();

    let sei_series: Option<Vec<f64>> = sci_series
        .iter()
        .map(|&x| if x < eps { None } else { compute_sei(x).ok() })
        .collect();
    let cer_series: Option<Option<Vec<f64>>> = q.map(|q| {
        per_run_c
            .iter()
            .map(|&c| if c < eps { None } else { compute_cer(q, c).ok() })
            .collect()
    });

    let sci = mean(&sci_series);
    let c_mean = mean(&per_run_c);
    let t_mean = mean(&durations);
    let e_mean = mean(&energies);
    {
        let inputs = &mut s.report.inputs;
        inputs.mean_energy_kwh = Some(e_mean);
        inputs.mean_emissions_g_per_run = Some(c_mean);
        inputs.mean_duration_s = Some(t_mean);
    }
    s.report.metrics.sci = Some(sci);
    s.report.metrics.sei = if sci < eps {
        s.issue("SEI", "carbon intensity is zero");
        None
    } else {
        let v = compute_sei(sci);
        s.take("SEI", v)
    };
    s.report.metrics.cer = match q {
        None => {
            s.issue("CER", COVERAGE_ABSENT);
            None
        }
        Some(_) if c_mean < eps => {
            s.issue("CER", "emissions per run are zero");
            None
        }
        Some(q) => {
            let v = compute_cer(q, c_mean);
            s.take("CER", v)
        }
    };

    // stability
    let si_sci = compute_si(&sci_series, config);
    let si_sei = match &sei_series {
        Some(series) => compute_si(series, config),
        None => Err(Error::undefined("SI", "per-run SCI series contains zero")),
    };
    let si_cer = match &cer_series {
        None => None,
        Some(Some(series)) => Some(compute_si(series, config)),
        Some(None) => Some(Err(Error::undefined(
            "SI",
            "per-run emissions series contains zero",
        ))),
    };
    let mut undefined_part = None;
    let mut part = |r: Result<f64>| match r {
        Ok(v) => Some(v),
        Err(e) => {
            undefined_part.get_or_insert_with(|| reason_of(e));
            None
        }
    };
    let components = SiComponents {
        sci: part(si_sci),
        sei: part(si_sei),
        cer: si_cer.and_then(&mut part),
    };
    s.report.metrics.si_components = components;
    match (config.si_aggregation, undefined_part) {
        (SiAggregation::PerMetric, _) => {}
        (SiAggregation::MeanOverPrimaryMetrics, Some(reason)) => s.issue("SI", reason),
        (SiAggregation::MeanOverPrimaryMetrics, None) => {
            let v = mean_si(&components);
            s.report.metrics.si = s.take("SI", v);
        }
    }

    s.report.inputs.avg_std = match (&sei_series, &cer_series) {
        (Some(sei), Some(Some(cer))) => {
            let sd = |xs: &[f64]| population_stats(xs).map(|st| st.std_dev).ok();
            match (sd(&sci_series), sd(sei), sd(cer)) {
                (Some(a), Some(b), Some(c)) => Some((a + b + c) / 3.0),
                _ => None,
            }
        }
        _ => None,
    };

    if let Some(q) = q {
        if config.gqi_energy_mode == GqiEnergyMode::RawEnergyKwh {
            let v = compute_gqi(q, e_mean);
            s.report.metrics.gqi = s.take("GQI", v);
        }
        match compute_scv(q, t_mean, c_mean, e_mean) {
            Ok((c, e)) => {
                s.report.metrics.scv_c = if c_mean < eps {
                    s.issue("SCV_C", "emissions per run are zero");
                    None
                } else {
                    s.take("SCV_C", c)
                };
                s.report.metrics.scv_e = if e_mean < eps {
                    s.issue("SCV_E", "energy is zero");
                    None
                } else {
                    s.take("SCV_E", e)
                };
            }
            Err(e) => {
                let reason = reason_of(e);
                s.issue("SCV_C", reason.clone());
                s.issue("SCV_E", reason);
            }
        }
    } else {
        for m in ["GQI", "SCV_C", "SCV_E"] {
            s.issue(m, COVERAGE_ABSENT);
        }
    }
    s
}

fn finalize(mut s: Summary, norm: Option<&ScopedNormalization>, config: &AnalysisConfig) -> Summary {
    if s.report.inputs.runs_used == 0 {
        return s;
    }
    let ctx = norm.and_then(|n| n.context_for(s.report.id.variant));
    let hat = |quantity: Quantity, x: Option<f64>| ctx.and_then(|c| x.and_then(|x| c.hat(quantity, x)));
    let inputs = &s.report.inputs;
    let sci_hat = hat(Quantity::Sci, s.report.metrics.sci);
    let t_hat = hat(Quantity::Duration, inputs.mean_duration_s);
    let sigma_hat = hat(Quantity::AvgStd, inputs.avg_std);
    let energy_hat = hat(Quantity::Energy, inputs.mean_energy_kwh);
    s.report.inputs.sci_hat = sci_hat;
    s.report.inputs.t_hat = t_hat;
    s.report.inputs.sigma_hat = sigma_hat;
    s.report.inputs.energy_hat = energy_hat;

    s.report.metrics.eco = match (sci_hat, t_hat) {
        (Some(a), Some(b)) => {
            let v = compute_eco(a, b);
            s.take("ECO", v)
        }
        _ => {
            s.issue("ECO", "normalized SCI or time unavailable");
            None
        }
    };

    match s.q {
        None => s.issue("SVI", COVERAGE_ABSENT),
        Some(q) => match (sci_hat, t_hat, sigma_hat) {
            (Some(a), Some(b), Some(c)) => {
                let v = compute_svi(q, a, b, c);
                s.report.metrics.svi = s.take("SVI", v);
            }
            (_, _, None) => s.issue("SVI", "instability term unavailable"),
            _ => s.issue("SVI", "normalized SCI or time unavailable"),
        },
    }

    if config.gqi_energy_mode == GqiEnergyMode::NormalizedEfficiency {
        match (s.q, energy_hat) {
            (None, _) => s.issue("GQI", COVERAGE_ABSENT),
            (Some(_), None) => s.issue("GQI", "normalized energy unavailable"),
            (Some(q), Some(e)) => {
                let v = compute_gqi(q, 1.0 - e);
                s.report.metrics.gqi = s.take("GQI", v);
            }
        }
    }

    let input = GfInput {
        q_fraction: s.q.map(|q| q / 100.0),
        eco: s.report.metrics.eco,
    };
    match gf_scores(&input, &config.betas) {
        Ok(scores) => {
            if scores.iter().any(|g| g.score.is_none()) {
                let reason = if s.q.is_none() { COVERAGE_ABSENT } else { "ECO unavailable" };
                s.issue("GF_beta", reason);
            }
            s.report.metrics.gf_beta = scores;
        }
        Err(e) => {
            s.issue("GF_beta", reason_of(e));
            s.report.metrics.gf_beta = config
                .betas
                .iter()
                .map(|&beta| super::GfScore { beta, score: None })
                .collect();
        }
    }
    s
}
