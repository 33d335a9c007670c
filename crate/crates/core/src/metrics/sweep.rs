//! β sweep of the green F-β score and grouping into weighting regimes.

use serde::{Deserialize, Serialize};

use super::formulas::compute_gf_beta;
use crate::error::Result;

/// GF_β for one β. `score` is `None` when undefined for the cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GfScore {
    pub beta: f64,
    pub score: Option<f64>,
}

/// Mean GF_β across cells for one β.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeEntry {
    pub beta: f64,
    /// `None` when no cell has a defined score at this β.
    pub mean: Option<f64>,
    pub cells: usize,
}

/// Per-β means split by β < 1 and β > 1. β = 1 belongs to neither and is
/// reported on its own.
///
/// Under the formula as written, small β weights coverage and large β weights
/// eco-efficiency; the regime names are labels only.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BetaRegimes {
    pub eco_domain: Vec<RegimeEntry>,
    pub quality_domain: Vec<RegimeEntry>,
    pub balanced: Option<RegimeEntry>,
}

impl BetaRegimes {
    /// Mean of the per-β means in a regime.
    pub fn domain_mean(entries: &[RegimeEntry]) -> Option<f64> {
        let vals: Vec<f64> = entries.iter().filter_map(|e| e.mean).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

/// Coverage fraction and eco-efficiency of one cell; either may be missing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GfInput {
    pub q_fraction: Option<f64>,
    pub eco: Option<f64>,
}

/// Scores of one cell over `betas`. Fails only on invalid inputs.
pub fn gf_scores(input: &GfInput, betas: &[f64]) -> Result<Vec<GfScore>> {
    betas
        .iter()
        .map(|&beta| {
            let score = match (input.q_fraction, input.eco) {
                (Some(q), Some(eco)) => Some(compute_gf_beta(q, eco, beta)?),
                _ => None,
            };
            Ok(GfScore { beta, score })
        })
        .collect()
}

/// Groups per-cell scores into regime means. Cells with an undefined score at
/// some β are left out of that β's mean with a warning.
pub fn group_regimes(per_cell: &[Vec<GfScore>], betas: &[f64]) -> BetaRegimes {
    let mut regimes = BetaRegimes::default();
    for (i, &beta) in betas.iter().enumerate() {
        let defined: Vec<f64> = per_cell
            .iter()
            .filter_map(|scores| scores.get(i).and_then(|s| s.score))
            .collect();
        let skipped = per_cell.len() - defined.len();
        if skipped > 0 {
            log::warn!("GF_beta at beta={beta}: {skipped} cell(s) undefined, excluded from mean");
        }
        let entry = RegimeEntry {
            beta,
            mean: (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64),
            cells: defined.len(),
        };
        if beta < 1.0 {
            regimes.eco_domain.push(entry);
        } else if beta > 1.0 {
            regimes.quality_domain.push(entry);
        } else {
            regimes.balanced = Some(entry);
        }
    }
    regimes
}

/// Evaluates every β for every cell and groups the means by regime.
pub fn gf_beta_sweep(inputs: &[GfInput], betas: &[f64]) -> Result<(Vec<Vec<GfScore>>, BetaRegimes)> {
    let per_cell = inputs
        .iter()
        .map(|i| gf_scores(i, betas))
        .collect::<Result<Vec<_>>>()?;
    let regimes = group_regimes(&per_cell, betas);
    Ok((per_cell, regimes))
}
