//! Readers for emission logs, coverage summaries, benchmark datasets and
//! prompt templates, plus the consolidation step that turns them into cells.

mod consolidate;
mod coverage;
mod dataset;
mod emission_log;
mod prompt;

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;

pub use consolidate::{consolidate, coverage_for, LogSpec};
pub use coverage::{check_coverage_file, parse_coverage, CoverageMap};
pub use dataset::{
    module_file_name, parse_dataset, prepare_modules, write_modules, DatasetRecord,
    PreparedModule, BASELINE_TEST_DIR,
};
pub use emission_log::{
    check_emission_log, parse_emission_log, parse_timestamp, read_emission_rows,
    write_emission_log, EmissionLogRow, FAILED_COLUMN, REQUIRED_COLUMNS,
};
pub use prompt::{compose_prompt, PromptFeature, PromptTemplates, PromptVariantSpec};

/// A single problem found while schema-checking an input file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub path: PathBuf,
    pub line: Option<u64>,
    pub message: String,
}

impl Finding {
    pub fn new(path: &Path, line: Option<u64>, message: impl Into<String>) -> Self {
        Finding {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{}: {}", self.path.display(), l, self.message),
            None => write!(f, "{}: {}", self.path.display(), self.message),
        }
    }
}
