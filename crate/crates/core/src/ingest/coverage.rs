//! Coverage summaries: either `id,coverage_percent` CSV or a JSON report.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde_json::Value;

use super::Finding;
use crate::domain::check_coverage;
use crate::error::{Error, Result};

pub type CoverageMap = BTreeMap<String, f64>;

/// Parses a coverage file. CSV input may carry a header row; JSON input may be
/// a coverage.py-style report (`totals.percent_covered`, keyed by file stem)
/// or a flat `{id: percent}` object.
pub fn parse_coverage(path: &Path) -> Result<CoverageMap> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let map = if looks_like_json(path, &text) {
        parse_json(path, &text)?
    } else {
        parse_csv(path, &text)?
    };
    if map.is_empty() {
        log::warn!("{}: coverage file has no entries", path.display());
    }
    Ok(map)
}

fn looks_like_json(path: &Path, text: &str) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
        || text.trim_start().starts_with('{')
}

fn parse_csv(path: &Path, text: &str) -> Result<CoverageMap> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut map = CoverageMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(i as u64 + 1);
        if rec.len() != 2 {
            return Err(Error::Format(format!(
                "{}:{line}: expected `id,coverage_percent`, found {} fields",
                path.display(),
                rec.len()
            )));
        }
        let (id, raw) = (&rec[0], &rec[1]);
        let value = match raw.trim_end_matches('%').parse::<f64>() {
            Ok(v) => v,
            // header row
            Err(_) if i == 0 => continue,
            Err(_) => {
                return Err(Error::Row {
                    path: path.to_path_buf(),
                    line,
                    message: format!("cannot parse coverage `{raw}`"),
                })
            }
        };
        check_coverage(value).map_err(|_| {
            Error::validation(format!(
                "{}:{line}: coverage for `{id}` is {value}, outside [0, 100]",
                path.display()
            ))
        })?;
        map.insert(id.to_string(), value);
    }
    Ok(map)
}

fn parse_json(path: &Path, text: &str) -> Result<CoverageMap> {
    let doc: Value = serde_json::from_str(text)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let obj = doc
        .as_object()
        .ok_or_else(|| Error::Format(format!("{}: expected a JSON object", path.display())))?;
    let mut map = CoverageMap::new();
    if let Some(totals) = obj.get("totals") {
        let pct = totals
            .get("percent_covered")
            .and_then(Value::as_f64)
            .ok_or_else(|| {
                Error::Format(format!(
                    "{}: `totals` has no numeric `percent_covered`",
                    path.display()
                ))
            })?;
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        map.insert(id, pct);
    } else if let Some(pct) = obj.get("percent_covered").and_then(Value::as_f64) {
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        map.insert(id, pct);
    } else {
        for (k, v) in obj {
            let pct = v.as_f64().ok_or_else(|| {
                Error::Format(format!(
                    "{}: no totals figure and `{k}` is not a number",
                    path.display()
                ))
            })?;
            map.insert(k.clone(), pct);
        }
    }
    for (id, v) in &map {
        check_coverage(*v).map_err(|_| {
            Error::validation(format!(
                "{}: coverage for `{id}` is {v}, outside [0, 100]",
                path.display()
            ))
        })?;
    }
    Ok(map)
}

pub fn check_coverage_file(path: &Path) -> Vec<Finding> {
    match parse_coverage(path) {
        Ok(_) => Vec::new(),
        Err(e) => {
            let line = match &e {
                Error::Row { line, .. } => Some(*line),
                _ => None,
            };
            vec![Finding::new(path, line, e.to_string())]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(name: &str, body: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(name);
        fs::write(&p, body).unwrap();
        (dir, p)
    }

    #[test]
    fn plain_csv() {
        let (_d, p) = file("c.csv", "m1,91.0\n");
        let m = parse_coverage(&p).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m["m1"], 91.0);
    }

    #[test]
    fn csv_with_header() {
        let (_d, p) = file("c.csv", "id,coverage_percent\nm1/V0,80\nm1/V1,82.5%\n");
        let m = parse_coverage(&p).unwrap();
        assert_eq!(m["m1/V1"], 82.5);
    }

    #[test]
    fn out_of_bounds() {
        let (_d, p) = file("c.csv", "m1,101\n");
        assert!(matches!(parse_coverage(&p), Err(Error::Validation(_))));
        let (_d, p) = file("c.csv", "m1,-1\n");
        assert!(matches!(parse_coverage(&p), Err(Error::Validation(_))));
    }

    #[test]
    fn empty_csv_is_empty_map() {
        let (_d, p) = file("c.csv", "");
        assert!(parse_coverage(&p).unwrap().is_empty());
    }

    #[test]
    fn coverage_py_json() {
        let (_d, p) = file(
            "qwen.json",
            r#"{"meta": {"version": "7.4"}, "totals": {"covered_lines": 91, "percent_covered": 91.0}}"#,
        );
        let m = parse_coverage(&p).unwrap();
        assert_eq!(m["qwen"], 91.0);
    }

    #[test]
    fn flat_json() {
        let (_d, p) = file("c.json", r#"{"a": 10, "b": 20.5}"#);
        let m = parse_coverage(&p).unwrap();
        assert_eq!(m["b"], 20.5);
    }

    #[test]
    fn unknown_format() {
        let (_d, p) = file("c.json", r#"[1, 2]"#);
        assert!(matches!(parse_coverage(&p), Err(Error::Format(_))));
        let (_d, p) = file("c.csv", "a,b,c\n");
        assert!(matches!(parse_coverage(&p), Err(Error::Format(_))));
    }
}
