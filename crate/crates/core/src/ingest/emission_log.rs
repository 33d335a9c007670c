//! CodeCarbon-compatible emission logs.
//!
//! Required columns are `duration` (s), `emissions` (kg CO2e) and
//! `energy_consumed` (kWh). Columns this module does not interpret are kept
//! verbatim so that logs from newer logger versions survive a round trip.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDateTime, Utc};
use csv::StringRecord;

use super::Finding;
use crate::domain::{PromptVariant, RunRecord};
use crate::error::{Error, Result};

pub const REQUIRED_COLUMNS: [&str; 3] = ["duration", "emissions", "energy_consumed"];
pub const FAILED_COLUMN: &str = "failed";

/// One data row of an emission log, in logged units.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionLogRow {
    pub timestamp: Option<String>,
    pub project_name: Option<String>,
    pub duration: f64,
    pub emissions: f64,
    pub energy_consumed: f64,
    pub cpu_energy: Option<f64>,
    pub gpu_energy: Option<f64>,
    pub ram_energy: Option<f64>,
    /// Uninterpreted columns, in file order.
    pub extra: Vec<(String, String)>,
}

impl EmissionLogRow {
    pub fn failed(&self) -> bool {
        self.extra
            .iter()
            .any(|(k, v)| k == FAILED_COLUMN && matches!(v.trim(), "true" | "1" | "True" | "TRUE"))
    }
}

struct Columns {
    headers: Vec<String>,
    duration: usize,
    emissions: usize,
    energy: usize,
    timestamp: Option<usize>,
    project: Option<usize>,
    cpu: Option<usize>,
    gpu: Option<usize>,
    ram: Option<usize>,
}

impl Columns {
    fn resolve(headers: &StringRecord) -> std::result::Result<Self, Vec<String>> {
        let headers: Vec<String> = headers.iter().map(|h| h.trim().to_string()).collect();
        let find = |name: &str| headers.iter().position(|h| h == name);
        let missing: Vec<String> = REQUIRED_COLUMNS
            .iter()
            .filter(|c| find(c).is_none())
            .map(|c| c.to_string())
            .collect();
        if !missing.is_empty() {
            return Err(missing);
        }
        Ok(Columns {
            duration: find("duration").unwrap(),
            emissions: find("emissions").unwrap(),
            energy: find("energy_consumed").unwrap(),
            timestamp: find("timestamp"),
            project: find("project_name"),
            cpu: find("cpu_energy"),
            gpu: find("gpu_energy"),
            ram: find("ram_energy"),
            headers,
        })
    }

    fn is_known(&self, i: usize) -> bool {
        [Some(self.duration), Some(self.emissions), Some(self.energy)]
            .into_iter()
            .chain([self.timestamp, self.project, self.cpu, self.gpu, self.ram])
            .flatten()
            .any(|k| k == i)
    }

    fn parse_row(&self, rec: &StringRecord) -> std::result::Result<EmissionLogRow, String> {
        let required = |i: usize| -> std::result::Result<f64, String> {
            let name = &self.headers[i];
            let raw = rec.get(i).unwrap_or("").trim();
            let v: f64 = raw
                .parse()
                .map_err(|_| format!("column `{name}`: cannot parse `{raw}` as a number"))?;
            if !v.is_finite() || v < 0.0 {
                return Err(format!("column `{name}`: expected a finite value >= 0, got {raw}"));
            }
            Ok(v)
        };
        let optional = |i: Option<usize>| -> std::result::Result<Option<f64>, String> {
            match i.and_then(|i| rec.get(i)).map(str::trim) {
                None | Some("") => Ok(None),
                Some(raw) => raw
                    .parse()
                    .map(Some)
                    .map_err(|_| format!("cannot parse `{raw}` as a number")),
            }
        };
        let text = |i: Option<usize>| {
            i.and_then(|i| rec.get(i))
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
        };
        let duration = required(self.duration)?;
        if duration <= 0.0 {
            return Err("column `duration`: must be > 0".into());
        }
        Ok(EmissionLogRow {
            timestamp: text(self.timestamp),
            project_name: text(self.project),
            duration,
            emissions: required(self.emissions)?,
            energy_consumed: required(self.energy)?,
            cpu_energy: optional(self.cpu)?,
            gpu_energy: optional(self.gpu)?,
            ram_energy: optional(self.ram)?,
            extra: self
                .headers
                .iter()
                .enumerate()
                .filter(|(i, _)| !self.is_known(*i))
                .map(|(i, h)| (h.clone(), rec.get(i).unwrap_or("").to_string()))
                .collect(),
        })
    }
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn line_of(rec: &StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

/// Reads every data row of a log, failing on the first problem.
pub fn read_emission_rows(path: &Path) -> Result<Vec<EmissionLogRow>> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers()?.clone();
    let cols = Columns::resolve(&headers).map_err(|missing| Error::Schema {
        path: path.to_path_buf(),
        column: missing[0].clone(),
    })?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_row_error(path, e))?;
        let row = cols.parse_row(&rec).map_err(|message| Error::Row {
            path: path.to_path_buf(),
            line: line_of(&rec),
            message,
        })?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::validation(format!(
            "{}: emission log has no data rows",
            path.display()
        )));
    }
    Ok(rows)
}

fn csv_row_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::Row {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    }
}

/// Parses a log into run records, one per row, with emissions in grams.
pub fn parse_emission_log(
    path: &Path,
    model_id: &str,
    prompt_variant: PromptVariant,
) -> Result<Vec<RunRecord>> {
    read_emission_rows(path)?
        .into_iter()
        .enumerate()
        .map(|(batch_index, row)| {
            let mut rec = RunRecord::from_logged(
                model_id,
                prompt_variant,
                batch_index,
                row.duration,
                row.energy_consumed,
                row.emissions,
                row.timestamp.as_deref().and_then(parse_timestamp),
                path,
            )?;
            rec.failed = row.failed();
            Ok(rec)
        })
        .collect()
}

/// Schema-checks a log without stopping at the first problem.
pub fn check_emission_log(path: &Path) -> Vec<Finding> {
    let mut findings = Vec::new();
    let mut rdr = match reader(path) {
        Ok(r) => r,
        Err(e) => return vec![Finding::new(path, None, e.to_string())],
    };
    let headers = match rdr.headers() {
        Ok(h) => h.clone(),
        Err(e) => return vec![Finding::new(path, None, e.to_string())],
    };
    let cols = match Columns::resolve(&headers) {
        Ok(c) => Some(c),
        Err(missing) => {
            for column in missing {
                findings.push(Finding::new(
                    path,
                    Some(1),
                    format!("missing required column `{column}`"),
                ));
            }
            None
        }
    };
    let mut n_rows = 0usize;
    for rec in rdr.records() {
        n_rows += 1;
        match rec {
            Err(e) => findings.push(Finding::new(
                path,
                e.position().map(|p| p.line()),
                e.to_string(),
            )),
            Ok(rec) => {
                if let Some(cols) = &cols {
                    if let Err(msg) = cols.parse_row(&rec) {
                        findings.push(Finding::new(path, Some(line_of(&rec)), msg));
                    }
                }
            }
        }
    }
    if n_rows == 0 {
        findings.push(Finding::new(path, None, "emission log has no data rows"));
    }
    findings
}

/// Parses the timestamp formats emitted by common logger versions.
pub fn parse_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(raw) {
        return Some(t.with_timezone(&Utc));
    }
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(raw, fmt).ok())
        .map(|n| n.and_utc())
}

/// Writes rows in the same schema [`read_emission_rows`] consumes.
///
/// Numbers are written in shortest round-trip form, so re-reading a file
/// reproduces the written values bit for bit.
pub fn write_emission_log(path: &Path, rows: &[EmissionLogRow]) -> Result<PathBuf> {
    let mut extra_cols: Vec<&str> = Vec::new();
    for row in rows {
        for (k, _) in &row.extra {
            if !extra_cols.contains(&k.as_str()) {
                extra_cols.push(k);
            }
        }
    }
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "timestamp",
        "project_name",
        "duration",
        "emissions",
        "energy_consumed",
        "cpu_energy",
        "gpu_energy",
        "ram_energy",
    ];
    header.extend(extra_cols.iter().copied());
    wtr.write_record(&header)?;
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for row in rows {
        let mut rec = vec![
            row.timestamp.clone().unwrap_or_default(),
            row.project_name.clone().unwrap_or_default(),
            row.duration.to_string(),
            row.emissions.to_string(),
            row.energy_consumed.to_string(),
            opt(row.cpu_energy),
            opt(row.gpu_energy),
            opt(row.ram_energy),
        ];
        for col in &extra_cols {
            rec.push(
                row.extra
                    .iter()
                    .find(|(k, _)| k == col)
                    .map(|(_, v)| v.clone())
                    .unwrap_or_default(),
            );
        }
        wtr.write_record(&rec)?;
    }
    let bytes = wtr
        .into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?;
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}
