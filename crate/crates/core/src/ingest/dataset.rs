//! Benchmark task records and their conversion into runnable modules.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One benchmark task as shipped in the JSON-lines dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub task_id: String,
    pub prompt: String,
    pub canonical_solution: String,
    pub test: String,
    pub entry_point: String,
}

/// A task merged into a single runnable source file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PreparedModule {
    pub task_id: String,
    pub entry_point: String,
    pub runnable_source: String,
    pub baseline_tests: String,
}

impl PreparedModule {
    /// File name derived from the task id (`HumanEval/7` -> `HumanEval_7.py`).
    pub fn file_name(&self) -> String {
        module_file_name(&self.task_id)
    }
}

pub fn module_file_name(task_id: &str) -> String {
    let stem: String = task_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{stem}.py")
}

/// Reads a JSON-lines dataset. Blank lines are ignored.
pub fn parse_dataset(path: &Path) -> Result<Vec<DatasetRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = i as u64 + 1;
        let rec: DatasetRecord = serde_json::from_str(line).map_err(|e| Error::Row {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        for (name, value) in [
            ("task_id", &rec.task_id),
            ("prompt", &rec.prompt),
            ("test", &rec.test),
            ("entry_point", &rec.entry_point),
        ] {
            if value.trim().is_empty() {
                return Err(Error::Row {
                    path: path.to_path_buf(),
                    line: line_no,
                    message: format!("field `{name}` is empty"),
                });
            }
        }
        records.push(rec);
    }
    if records.is_empty() {
        return Err(Error::validation(format!(
            "{}: dataset has no records",
            path.display()
        )));
    }
    Ok(records)
}

/// Merges each record's prompt (signature and docstring) with its reference
/// body. Records with a blank solution are skipped with a warning.
pub fn prepare_modules(records: &[DatasetRecord]) -> Vec<PreparedModule> {
    records
        .iter()
        .filter_map(|r| {
            if r.canonical_solution.trim().is_empty() {
                log::warn!("{}: canonical solution is blank, skipping", r.task_id);
                return None;
            }
            let mut source = String::with_capacity(r.prompt.len() + r.canonical_solution.len() + 1);
            source.push_str(&r.prompt);
            if !r.prompt.ends_with('\n') {
                source.push('\n');
            }
            source.push_str(&r.canonical_solution);
            if !source.ends_with('\n') {
                source.push('\n');
            }
            Some(PreparedModule {
                task_id: r.task_id.clone(),
                entry_point: r.entry_point.clone(),
                runnable_source: source,
                baseline_tests: r.test.clone(),
            })
        })
        .collect()
}

/// Directory, relative to the module directory, holding the baseline tests.
pub const BASELINE_TEST_DIR: &str = "baseline_tests";

/// Writes modules to `out_dir` and their baseline tests to
/// `out_dir/baseline_tests/`. Returns the module paths.
pub fn write_modules(modules: &[PreparedModule], out_dir: &Path) -> Result<Vec<PathBuf>> {
    let test_dir = out_dir.join(BASELINE_TEST_DIR);
    fs::create_dir_all(&test_dir).map_err(|e| Error::io(&test_dir, e))?;
    let mut paths = Vec::with_capacity(modules.len());
    for m in modules {
        let p = out_dir.join(m.file_name());
        fs::write(&p, &m.runnable_source).map_err(|e| Error::io(&p, e))?;
        let t = test_dir.join(m.file_name());
        fs::write(&t, &m.baseline_tests).map_err(|e| Error::io(&t, e))?;
        paths.push(p);
    }
    Ok(paths)
}
