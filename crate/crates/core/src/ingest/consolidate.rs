use std::collections::BTreeSet;
use std::path::PathBuf;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::coverage::CoverageMap;
use super::emission_log::parse_emission_log;
use crate::domain::{Cell, CellId, PromptVariant};
use crate::error::{Error, Result};

/// One entry of a log manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogSpec {
    pub path: PathBuf,
    pub model_id: String,
    pub variant: PromptVariant,
}

/// Looks up a cell's coverage. Per-cell keys (`model/V1`, `model_V1`,
/// `model:V1`) win over a model-level key (`model`).
pub fn coverage_for(coverage: &CoverageMap, id: &CellId) -> Option<f64> {
    let m = &id.model_id;
    let v = id.variant;
    [
        format!("{m}/{v}"),
        format!("{m}_{v}"),
        format!("{m}:{v}"),
        m.clone(),
    ]
    .iter()
    .find_map(|k| coverage.get(k).copied())
}

/// Parses every log and merges it with coverage into one cell per
/// (model, variant), ordered by model then variant.
pub fn consolidate(logs: &[LogSpec], coverage: &CoverageMap) -> Result<Vec<Cell>> {
    let mut seen = BTreeSet::new();
    for l in logs {
        let id = CellId::new(l.model_id.clone(), l.variant);
        if !seen.insert(id.clone()) {
            return Err(Error::Conflict(format!(
                "more than one log for cell {id} ({})",
                l.path.display()
            )));
        }
    }

    let parse = |l: &LogSpec| -> Result<Cell> {
        let runs = parse_emission_log(&l.path, &l.model_id, l.variant)?;
        let id = CellId::new(l.model_id.clone(), l.variant);
        let q = coverage_for(coverage, &id);
        if q.is_none() {
            log::warn!("no coverage for cell {id}; quality metrics will be skipped");
        }
        Cell::new(l.model_id.clone(), l.variant, runs, q)
    };

    #[cfg(feature = "parallel")]
    let parsed: Vec<Result<Cell>> = logs.par_iter().map(parse).collect();
    #[cfg(not(feature = "parallel"))]
    let parsed: Vec<Result<Cell>> = logs.iter().map(parse).collect();

    let mut cells = parsed.into_iter().collect::<Result<Vec<_>>>()?;
    cells.sort_by_key(|c| c.id());
    Ok(cells)
}
