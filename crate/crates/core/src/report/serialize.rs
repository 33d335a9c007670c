use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use super::compare::{build_comparison, DEFAULT_TREND_THRESHOLD};
use super::rank::{rank, Direction};
use super::{fmt_value, MetricFamily};
use crate::error::{Error, Result};
use crate::metrics::{Analysis, BetaRegimes, MetricSet, RegimeEntry, ScalarMetric};

pub const CSV_HEADER: [&str; 6] = ["model", "variant", "metric", "beta", "value", "status"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Format {
    Csv,
    Json,
    Markdown,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Markdown => "md",
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "markdown" | "md" => Ok(Format::Markdown),
            other => Err(Error::Usage(format!(
                "unknown report format `{other}` (expected csv, json or markdown)"
            ))),
        }
    }
}

/// One (cell, metric[, β]) value; the unit of the CSV report and chart data.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueRow {
    pub model: String,
    pub variant: String,
    pub metric: &'static str,
    pub beta: Option<f64>,
    pub value: Option<f64>,
}

impl ValueRow {
    pub fn status(&self) -> &'static str {
        if self.value.is_some() {
            "ok"
        } else {
            "undefined"
        }
    }

    pub(crate) fn record(&self) -> [String; 6] {
        [
            self.model.clone(),
            self.variant.clone(),
            self.metric.to_string(),
            self.beta.map(|b| b.to_string()).unwrap_or_default(),
            self.value.map(|v| v.to_string()).unwrap_or_default(),
            self.status().to_string(),
        ]
    }
}

/// Eight scalar rows plus one row per β for every cell, in cell order.
pub fn value_rows(analysis: &Analysis) -> Vec<ValueRow> {
    let mut rows = Vec::new();
    for cell in &analysis.cells {
        let base = |metric, beta, value| ValueRow {
            model: cell.id.model_id.clone(),
            variant: cell.id.variant.to_string(),
            metric,
            beta,
            value,
        };
        for m in ScalarMetric::ALL {
            rows.push(base(m.name(), None, cell.metrics.scalar(m)));
        }
        for g in &cell.metrics.gf_beta {
            rows.push(base(MetricFamily::Gf.name(), Some(g.beta), g.score));
        }
    }
    rows
}

pub fn serialize(analysis: &Analysis, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Csv => to_csv(analysis),
        Format::Json => to_json(analysis),
        Format::Markdown => Ok(to_markdown(analysis).into_bytes()),
    }
}

pub(crate) fn write_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(header)?;
    for r in rows {
        wtr.write_record(&r)?;
    }
    wtr.into_inner()
        .map_err(|e| Error::io("<memory>", e.into_error()))
}

fn to_csv(analysis: &Analysis) -> Result<Vec<u8>> {
    write_csv(
        &CSV_HEADER,
        value_rows(analysis).iter().map(|r| r.record().to_vec()),
    )
}

#[derive(Serialize)]
struct JsonReport<'a> {
    models: BTreeMap<&'a str, BTreeMap<String, &'a MetricSet>>,
    beta_regimes: &'a BetaRegimes,
}

fn to_json(analysis: &Analysis) -> Result<Vec<u8>> {
    let mut models: BTreeMap<&str, BTreeMap<String, &MetricSet>> = BTreeMap::new();
    for cell in &analysis.cells {
        models
            .entry(cell.id.model_id.as_str())
            .or_default()
            .insert(cell.id.variant.to_string(), &cell.metrics);
    }
    let mut out = serde_json::to_vec_pretty(&JsonReport {
        models,
        beta_regimes: &analysis.beta_regimes,
    })?;
    out.push(b'\n');
    Ok(out)
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_value).unwrap_or_else(|| "n/a".into())
}

fn to_markdown(analysis: &Analysis) -> String {
    let cfg = &analysis.config;
    let mut s = String::new();
    let _ = writeln!(s, "# Sustainability metrics report\n");
    let _ = writeln!(s, "| Setting | Value |\n|---|---|");
    let _ = writeln!(s, "| Cells | {} |", analysis.cells.len());
    let _ = writeln!(s, "| Grid intensity (g CO2e/kWh) | {} |", cfg.grid_intensity_g_per_kwh);
    let _ = writeln!(s, "| Runs per batch | {} |", cfg.runs_per_batch);
    let _ = writeln!(s, "| Betas | {} |", join(cfg.betas.iter().map(|b| b.to_string())));
    let _ = writeln!(s, "| GQI energy mode | {:?} |", cfg.gqi_energy_mode);
    let _ = writeln!(s, "| SI aggregation | {:?} |", cfg.si_aggregation);
    let _ = writeln!(s, "| Normalization scope | {:?} |", cfg.normalization_scope);
    let _ = writeln!(s, "| Emission basis | {:?} |", cfg.emission_basis);
    let _ = writeln!(s, "| Coverage mode | {:?} |\n", cfg.coverage_mode);

    let _ = writeln!(s, "## Rankings\n");
    for family in MetricFamily::ALL {
        let dir = match family.direction() {
            Direction::LowerBetter => "lower is better",
            Direction::HigherBetter => "higher is better",
        };
        let _ = write!(s, "### {} ({dir})\n\n", family.name());
        if family == MetricFamily::Gf {
            let _ = writeln!(s, "Ranked by the mean over all configured betas.\n");
        }
        match rank(&analysis.cells, family) {
            Ok(table) => {
                let _ = writeln!(s, "| Rank | Cell | Value |\n|---:|---|---:|");
                for r in &table.rows {
                    let _ = writeln!(s, "| {} | {} | {} |", r.rank, r.cell_id, fmt_value(r.value));
                }
                if !table.undefined.is_empty() {
                    let _ = writeln!(
                        s,
                        "\nUndefined: {}",
                        join(table.undefined.iter().map(|c| c.to_string()))
                    );
                }
            }
            Err(e) => {
                let _ = writeln!(s, "_{e}_");
            }
        }
        s.push('\n');
    }

    let _ = writeln!(s, "## Prompt-variant comparison\n");
    match build_comparison(&analysis.cells, DEFAULT_TREND_THRESHOLD) {
        Ok(cmp) => {
            let _ = writeln!(
                s,
                "Trend over variant means; steps within {}% relative change count as flat.\n",
                cmp.threshold * 100.0
            );
            let mut header = String::from("| Metric |");
            let mut rule = String::from("|---|");
            for v in &cmp.variants {
                let _ = write!(header, " {v} mean | {v} leader |");
                rule.push_str("---:|---|");
            }
            let _ = writeln!(s, "{header} Trend | Partial |\n{rule}---|---|");
            for row in &cmp.rows {
                let mut line = format!("| {} |", row.metric);
                for e in &row.per_variant {
                    let leaders = if e.dominant.is_empty() {
                        "n/a".to_string()
                    } else {
                        join(e.dominant.iter().map(|c| c.model_id.clone()))
                    };
                    let _ = write!(line, " {} | {} |", opt(e.mean), leaders);
                }
                let _ = writeln!(
                    s,
                    "{line} {:?} | {} |",
                    row.trend,
                    if row.partial { "yes" } else { "no" }
                );
            }
        }
        Err(e) => {
            let _ = writeln!(s, "_{e}_");
        }
    }
    s.push('\n');

    let r = &analysis.beta_regimes;
    let _ = writeln!(s, "## GF_beta regimes\n");
    let _ = writeln!(
        s,
        "Scores follow (1+b^2)*q*ECO/(b^2*q+ECO), so small b leans toward coverage and large b toward \
         eco-efficiency. The eco/quality names only label the b < 1 and b > 1 groups.\n"
    );
    let _ = writeln!(s, "| Beta | Regime | Mean | Cells |\n|---:|---|---:|---:|");
    let mut line = |e: &RegimeEntry, regime: &str| {
        let _ = writeln!(s, "| {} | {regime} | {} | {} |", e.beta, opt(e.mean), e.cells);
    };
    for e in &r.eco_domain {
        line(e, "eco (b < 1)");
    }
    if let Some(e) = &r.balanced {
        line(e, "balanced");
    }
    for e in &r.quality_domain {
        line(e, "quality (b > 1)");
    }
    let _ = writeln!(
        s,
        "\nRegime means: eco {}, quality {}",
        opt(BetaRegimes::domain_mean(&r.eco_domain)),
        opt(BetaRegimes::domain_mean(&r.quality_domain))
    );
    s
}

fn join(items: impl Iterator<Item = String>) -> String {
    items.collect::<Vec<_>>().join(", ")
}
