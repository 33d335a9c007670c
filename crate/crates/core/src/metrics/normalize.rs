//! Min-max normalization over an analysis population.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{NormalizationScope, PromptVariant};
use crate::error::{Error, Result};

/// Quantities that are min-max normalized across cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// Cell-level carbon per run.
    Sci,
    /// Mean batch duration.
    Duration,
    /// Mean of the standard deviations of the per-run SCI, SEI and CER series.
    AvgStd,
    /// Mean batch energy; only used by the normalized GQI mode.
    Energy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: f64,
    pub max: f64,
}

impl Bounds {
    /// `(x - min) / (max - min)`, or 0 when the population has no spread.
    pub fn hat(&self, x: f64) -> f64 {
        if self.max == self.min {
            0.0
        } else {
            (x - self.min) / (self.max - self.min)
        }
    }
}

/// Per-quantity bounds over one population.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NormalizationContext {
    pub quantity_bounds: BTreeMap<Quantity, Bounds>,
}

impl NormalizationContext {
    /// Builds bounds from `(quantity, value)` samples. Non-finite samples are
    /// ignored; a quantity with no samples gets no bounds.
    pub fn from_samples(samples: impl IntoIterator<Item = (Quantity, f64)>) -> Self {
        let mut quantity_bounds: BTreeMap<Quantity, Bounds> = BTreeMap::new();
        for (q, x) in samples {
            if !x.is_finite() {
                continue;
            }
            quantity_bounds
                .entry(q)
                .and_modify(|b| {
                    b.min = b.min.min(x);
                    b.max = b.max.max(x);
                })
                .or_insert(Bounds { min: x, max: x });
        }
        NormalizationContext { quantity_bounds }
    }

    pub fn bounds(&self, q: Quantity) -> Option<Bounds> {
        self.quantity_bounds.get(&q).copied()
    }

    pub fn hat(&self, q: Quantity, x: f64) -> Option<f64> {
        self.bounds(q).map(|b| b.hat(x))
    }
}

/// The quantities of one cell that enter normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormPoint {
    pub variant: PromptVariant,
    pub sci: Option<f64>,
    pub duration: Option<f64>,
    pub avg_std: Option<f64>,
    pub energy: Option<f64>,
}

impl NormPoint {
    fn samples(&self) -> impl Iterator<Item = (Quantity, f64)> {
        [
            (Quantity::Sci, self.sci),
            (Quantity::Duration, self.duration),
            (Quantity::AvgStd, self.avg_std),
            (Quantity::Energy, self.energy),
        ]
        .into_iter()
        .filter_map(|(q, v)| v.map(|v| (q, v)))
    }
}

/// Normalization contexts keyed by scope: one shared context, or one per
/// prompt variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScopedNormalization {
    pub scope: NormalizationScope,
    pub shared: Option<NormalizationContext>,
    pub per_variant: BTreeMap<PromptVariant, NormalizationContext>,
}

impl ScopedNormalization {
    pub fn context_for(&self, variant: PromptVariant) -> Option<&NormalizationContext> {
        match self.scope {
            NormalizationScope::AllCells => self.shared.as_ref(),
            NormalizationScope::PerPromptVariant => self.per_variant.get(&variant),
        }
    }
}

/// Records min/max of every quantity over the population in scope.
pub fn build_normalization(
    points: &[NormPoint],
    scope: NormalizationScope,
) -> Result<ScopedNormalization> {
    if points.is_empty() {
        return Err(Error::validation("normalization population is empty"));
    }
    Ok(match scope {
        NormalizationScope::AllCells => ScopedNormalization {
            scope,
            shared: Some(NormalizationContext::from_samples(
                points.iter().flat_map(NormPoint::samples),
            )),
            per_variant: BTreeMap::new(),
        },
        NormalizationScope::PerPromptVariant => {
            let mut groups: BTreeMap<PromptVariant, Vec<&NormPoint>> = BTreeMap::new();
            for p in points {
                groups.entry(p.variant).or_default().push(p);
            }
            ScopedNormalization {
                scope,
                shared: None,
                per_variant: groups
                    .into_iter()
                    .map(|(v, ps)| {
                        (v, NormalizationContext::from_samples(ps.into_iter().flat_map(NormPoint::samples)))
                    })
                    .collect(),
            }
        }
    })
}
