use serde::{Deserialize, Serialize};

use super::MetricFamily;
use crate::domain::CellId;
use crate::error::{Error, Result};
use crate::metrics::CellReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    LowerBetter,
    HigherBetter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub cell_id: CellId,
    pub value: f64,
    /// 1 is best; tied values share a rank (1, 1, 3).
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingTable {
    pub metric_name: String,
    pub direction: Direction,
    pub rows: Vec<RankRow>,
    /// Cells for which the metric is undefined, in id order.
    pub undefined: Vec<CellId>,
}

impl RankingTable {
    /// Every cell holding rank 1.
    pub fn leaders(&self) -> Vec<&CellId> {
        self.rows.iter().filter(|r| r.rank == 1).map(|r| &r.cell_id).collect()
    }
}

/// Competition ranking of arbitrary `(cell, value)` pairs. Row order among
/// ties follows cell id.
pub fn rank_values(
    metric_name: &str,
    direction: Direction,
    values: impl IntoIterator<Item = (CellId, Option<f64>)>,
) -> Result<RankingTable> {
    let mut defined = Vec::new();
    let mut undefined = Vec::new();
    for (id, v) in values {
        match v {
            Some(v) if v.is_finite() => defined.push((id, v)),
            _ => undefined.push(id),
        }
    }
    undefined.sort();
    if defined.is_empty() {
        return Err(Error::undefined(metric_name, "undefined for every cell; nothing to rank"));
    }
    defined.sort_by(|(ia, a), (ib, b)| {
        let ord = match direction {
            Direction::LowerBetter => a.total_cmp(b),
            Direction::HigherBetter => b.total_cmp(a),
        };
        ord.then_with(|| ia.cmp(ib))
    });
    let mut rows: Vec<RankRow> = Vec::with_capacity(defined.len());
    for (i, (cell_id, value)) in defined.into_iter().enumerate() {
        let rank = match rows.last() {
            Some(prev) if prev.value == value => prev.rank,
            _ => i + 1,
        };
        rows.push(RankRow { cell_id, value, rank });
    }
    Ok(RankingTable {
        metric_name: metric_name.to_string(),
        direction,
        rows,
        undefined,
    })
}

/// Ranks cells on one metric family in its natural direction.
pub fn rank(cells: &[CellReport], family: MetricFamily) -> Result<RankingTable> {
    rank_values(
        family.name(),
        family.direction(),
        cells.iter().map(|c| (c.id.clone(), family.value(c))),
    )
}
