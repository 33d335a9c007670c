//! Naive straight-line recomputation of every cell metric.
//!
//! Deliberately shares no code with the library's metric layer: it reads only
//! the raw run fields of each cell and re-derives everything with plain loops.

#![allow(dead_code)]

use std::collections::BTreeMap;

use carbonbench::domain::{
    AnalysisConfig, Cell, CoverageMode, EmissionBasis, GqiEnergyMode, NormalizationScope,
    SiAggregation,
};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OracleMetrics {
    pub sci: Option<f64>,
    pub sei: Option<f64>,
    pub cer: Option<f64>,
    pub si: Option<f64>,
    pub gqi: Option<f64>,
    pub scv_c: Option<f64>,
    pub scv_e: Option<f64>,
    pub svi: Option<f64>,
    pub eco: Option<f64>,
    pub gf: Vec<Option<f64>>,
}

struct Row {
    key: String,
    model: String,
    variant: u8,
    q: Option<f64>,
    sci: Option<f64>,
    sei: Option<f64>,
    cer: Option<f64>,
    si: Option<f64>,
    gqi_raw: Option<f64>,
    scv_c: Option<f64>,
    scv_e: Option<f64>,
    t: Option<f64>,
    e: Option<f64>,
    avg_std: Option<f64>,
}

fn mean(xs: &[f64]) -> f64 {
    let mut s = 0.0;
    for x in xs {
        s += x;
    }
    s / xs.len() as f64
}

fn pop_std(xs: &[f64]) -> f64 {
    // exactly zero spread for a constant series, whatever the rounding of the mean
    if xs.iter().all(|x| *x == xs[0]) {
        return 0.0;
    }
    let m = mean(xs);
    let mut s = 0.0;
    for x in xs {
        s += (x - m) * (x - m);
    }
    (s / xs.len() as f64).sqrt()
}

pub fn recompute(cells: &[Cell], cfg: &AnalysisConfig) -> BTreeMap<String, OracleMetrics> {
    let eps = cfg.epsilon;
    let k = cfg.grid_intensity_g_per_kwh / cfg.runs_per_batch as f64;

    // coverage, possibly averaged per model
    let mut model_cov: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for c in cells {
        if let Some(q) = c.coverage_pct {
            let e = model_cov.entry(c.model_id.clone()).or_insert((0.0, 0));
            e.0 += q;
            e.1 += 1;
        }
    }

    let mut rows = Vec::new();
    for c in cells {
        let key = format!("{}/V{}", c.model_id, c.prompt_variant.0);
        let q = match cfg.coverage_mode {
            CoverageMode::PerCell => c.coverage_pct,
            CoverageMode::ModelMean => model_cov.get(&c.model_id).map(|(s, n)| s / *n as f64),
        };
        let mut e_runs = Vec::new();
        let mut c_runs = Vec::new();
        let mut t_runs = Vec::new();
        for r in &c.runs {
            if r.failed {
                continue;
            }
            e_runs.push(r.energy_kwh);
            let per = match cfg.emission_basis {
                EmissionBasis::PerRun => r.emissions_g / cfg.runs_per_batch as f64,
                EmissionBasis::RawBatch => r.emissions_g,
            };
            c_runs.push(per);
            t_runs.push(r.duration_s);
        }
        if e_runs.is_empty() {
            rows.push(Row {
                key,
                model: c.model_id.clone(),
                variant: c.prompt_variant.0,
                q,
                sci: None,
                sei: None,
                cer: None,
                si: None,
                gqi_raw: None,
                scv_c: None,
                scv_e: None,
                t: None,
                e: None,
                avg_std: None,
            });
            continue;
        }

        let sci_series: Vec<f64> = e_runs.iter().map(|e| k * e).collect();
        let sei_series: Option<Vec<f64>> = if sci_series.iter().all(|s| *s >= eps) {
            Some(sci_series.iter().map(|s| 1.0 / s).collect())
        } else {
            None
        };
        let cer_series: Option<Vec<f64>> = match q {
            Some(q) if c_runs.iter().all(|x| *x >= eps) => Some(c_runs.iter().map(|x| q / x).collect()),
            _ => None,
        };

        let sci = mean(&sci_series);
        let sei = if sci >= eps { Some(1.0 / sci) } else { None };
        let c_mean = mean(&c_runs);
        let t_mean = mean(&t_runs);
        let e_mean = mean(&e_runs);
        let cer = match q {
            Some(q) if c_mean >= eps => Some(q / c_mean),
            _ => None,
        };

        let si_of = |xs: &Vec<f64>| {
            let m = mean(xs);
            if m.abs() < eps {
                None
            } else {
                Some(1.0 - pop_std(xs) / m)
            }
        };
        let si_sci = si_of(&sci_series);
        let si_sei = sei_series.as_ref().and_then(si_of);
        let si_cer = cer_series.as_ref().and_then(si_of);
        // SI: mean over SCI, SEI and (with coverage) CER series; any undefined part
        // makes the whole undefined
        let si = match (si_sci, si_sei) {
            (Some(a), Some(b)) if q.is_some() => si_cer.map(|c| mean(&[a, b, c])),
            (Some(a), Some(b)) => Some(mean(&[a, b])),
            _ => None,
        };
        let si = if cfg.si_aggregation == SiAggregation::PerMetric { None } else { si };

        let avg_std = match (&sei_series, &cer_series) {
            (Some(sei_s), Some(cer_s)) => {
                Some((pop_std(&sci_series) + pop_std(sei_s) + pop_std(cer_s)) / 3.0)
            }
            _ => None,
        };

        let gqi_raw = q.and_then(|q| {
            let qf = q / 100.0;
            if qf + e_mean == 0.0 {
                None
            } else {
                Some(2.0 * qf * e_mean / (qf + e_mean))
            }
        });
        let scv_c = q.and_then(|q| (c_mean >= eps).then(|| q / (t_mean * c_mean)));
        let scv_e = q.and_then(|q| (e_mean >= eps).then(|| q / (t_mean * e_mean)));

        rows.push(Row {
            key,
            model: c.model_id.clone(),
            variant: c.prompt_variant.0,
            q,
            sci: Some(sci),
            sei,
            cer,
            si,
            gqi_raw,
            scv_c,
            scv_e,
            t: Some(t_mean),
            e: Some(e_mean),
            avg_std,
        });
    }

    // min/max per scope group
    let group = |r: &Row| match cfg.normalization_scope {
        NormalizationScope::AllCells => -1i32,
        NormalizationScope::PerPromptVariant => r.variant as i32,
    };
    let minmax = |g: i32, f: &dyn Fn(&Row) -> Option<f64>| -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut any = false;
        for r in &rows {
            if group(r) != g {
                continue;
            }
            if let Some(v) = f(r) {
                any = true;
                if v < lo {
                    lo = v;
                }
                if v > hi {
                    hi = v;
                }
            }
        }
        if any {
            Some((lo, hi))
        } else {
            None
        }
    };
    let hat = |b: Option<(f64, f64)>, x: Option<f64>| -> Option<f64> {
        let (lo, hi) = b?;
        let x = x?;
        if hi == lo {
            Some(0.0)
        } else {
            Some((x - lo) / (hi - lo))
        }
    };

    let mut out = BTreeMap::new();
    for r in &rows {
        let g = group(r);
        let sci_hat = hat(minmax(g, &|r: &Row| r.sci), r.sci);
        let t_hat = hat(minmax(g, &|r: &Row| r.t), r.t);
        let s_hat = hat(minmax(g, &|r: &Row| r.avg_std), r.avg_std);
        let e_hat = hat(minmax(g, &|r: &Row| r.e), r.e);

        let eco = match (sci_hat, t_hat) {
            (Some(a), Some(b)) => Some(1.0 / ((1.0 + a) * (1.0 + b))),
            _ => None,
        };
        let svi = match (r.q, sci_hat, t_hat, s_hat) {
            (Some(q), Some(a), Some(b), Some(s)) => {
                Some((q / 100.0) * (1.0 / (1.0 + a)) * (1.0 / (1.0 + b)) * (1.0 - s))
            }
            _ => None,
        };
        let gqi = match cfg.gqi_energy_mode {
            GqiEnergyMode::RawEnergyKwh => r.gqi_raw,
            GqiEnergyMode::NormalizedEfficiency => match (r.q, e_hat) {
                (Some(q), Some(eh)) => {
                    let qf = q / 100.0;
                    let eff = 1.0 - eh;
                    if qf + eff == 0.0 {
                        None
                    } else {
                        Some(2.0 * qf * eff / (qf + eff))
                    }
                }
                _ => None,
            },
        };
        let gf = cfg
            .betas
            .iter()
            .map(|b| match (r.q, eco) {
                (Some(q), Some(e)) => {
                    let qf = q / 100.0;
                    Some((1.0 + b * b) * qf * e / (b * b * qf + e))
                }
                _ => None,
            })
            .collect();
        let _ = &r.model;
        out.insert(
            r.key.clone(),
            OracleMetrics {
                sci: r.sci,
                sei: r.sei,
                cer: r.cer,
                si: r.si,
                gqi,
                scv_c: r.scv_c,
                scv_e: r.scv_e,
                svi,
                eco,
                gf,
            },
        );
    }
    out
}

/// `|a - b| <= tol * max(1, |b|)`, with both-undefined counting as equal.
pub fn agree(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(a), Some(b)) => (a - b).abs() <= tol * b.abs().max(1.0),
        _ => false,
    }
}
