//! File-backed CLI configuration with flag overrides.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::domain::{
    AnalysisConfig, CoverageMode, EmissionBasis, GqiEnergyMode, NormalizationScope, PromptVariant,
    SiAggregation,
};
use crate::error::{Error, Result};
use crate::ingest::LogSpec;
use crate::runner::MeterKind;

/// One JSON document describing a whole invocation. Relative paths are
/// resolved against the directory holding the document.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    pub grid_intensity_g_per_kwh: Option<f64>,
    pub runs_per_batch: Option<u32>,
    pub betas: Option<Vec<f64>>,
    pub normalization_scope: Option<NormalizationScope>,
    pub gqi_energy_mode: Option<GqiEnergyMode>,
    pub si_aggregation: Option<SiAggregation>,
    pub emission_basis: Option<EmissionBasis>,
    pub coverage_mode: Option<CoverageMode>,
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub logs: Vec<LogSpec>,
    pub coverage: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub formats: Vec<String>,
    #[serde(default)]
    pub charts: bool,
    pub run: Option<RunSection>,
}

/// Generation runs: every model under every listed variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub command_template: String,
    pub models: Vec<String>,
    #[serde(default = "standard_variants")]
    pub variants: Vec<PromptVariant>,
    /// Explicit module files; alternatively every `*.py` in `inputs_dir`.
    #[serde(default)]
    pub inputs: Vec<PathBuf>,
    pub inputs_dir: Option<PathBuf>,
    #[serde(default)]
    pub generation_params: BTreeMap<String, String>,
    pub templates_dir: Option<PathBuf>,
    pub meter: MeterKind,
}

fn standard_variants() -> Vec<PromptVariant> {
    PromptVariant::STANDARD.to_vec()
}

/// Analysis settings given on the command line; each wins over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub grid_intensity: Option<f64>,
    pub runs_per_batch: Option<u32>,
    pub betas: Option<Vec<f64>>,
    pub gqi_mode: Option<GqiEnergyMode>,
    pub si_aggregation: Option<SiAggregation>,
    pub norm_scope: Option<NormalizationScope>,
}

/// Parses a snake_case enum name the way the config file spells it.
pub fn parse_enum<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_")))
        .map_err(|_| format!("unrecognised value `{s}`"))
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl CliConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: CliConfig = serde_json::from_str(&text)
            .map_err(|e| Error::validation(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        for l in &mut self.logs {
            resolve(base, &mut l.path);
        }
        for p in [&mut self.coverage, &mut self.dataset, &mut self.out_dir]
            .into_iter()
            .flatten()
        {
            resolve(base, p);
        }
        if let Some(run) = &mut self.run {
            for p in &mut run.inputs {
                resolve(base, p);
            }
            for p in [&mut run.inputs_dir, &mut run.templates_dir].into_iter().flatten() {
                resolve(base, p);
            }
            if let MeterKind::ReplayFile { path } = &mut run.meter {
                resolve(base, path);
            }
        }
    }

    /// Merges file settings with overrides into a validated analysis config.
    pub fn analysis(&self, o: &Overrides) -> Result<AnalysisConfig> {
        let intensity = o.grid_intensity.or(self.grid_intensity_g_per_kwh).ok_or_else(|| {
            Error::Usage("grid intensity has no default; set grid_intensity_g_per_kwh or --grid-intensity".into())
        })?;
        let mut cfg = AnalysisConfig::new(intensity);
        if let Some(r) = o.runs_per_batch.or(self.runs_per_batch) {
            cfg.runs_per_batch = r;
        }
        if let Some(b) = o.betas.clone().or_else(|| self.betas.clone()) {
            cfg.betas = b;
        }
        if let Some(v) = o.norm_scope.or(self.normalization_scope) {
            cfg.normalization_scope = v;
        }
        if let Some(v) = o.gqi_mode.or(self.gqi_energy_mode) {
            cfg.gqi_energy_mode = v;
        }
        if let Some(v) = o.si_aggregation.or(self.si_aggregation) {
            cfg.si_aggregation = v;
        }
        if let Some(v) = self.emission_basis {
            cfg.emission_basis = v;
        }
        if let Some(v) = self.coverage_mode {
            cfg.coverage_mode = v;
        }
        if let Some(v) = self.epsilon {
            cfg.epsilon = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every path the document references that does not exist.
    pub fn missing_paths(&self) -> Vec<PathBuf> {
        let mut paths: Vec<&PathBuf> = self.logs.iter().map(|l| &l.path).collect();
        paths.extend(self.coverage.iter());
        paths.extend(self.dataset.iter());
        if let Some(run) = &self.run {
            paths.extend(run.inputs.iter());
            paths.extend(run.inputs_dir.iter());
            paths.extend(run.templates_dir.iter());
            if let MeterKind::ReplayFile { path } = &run.meter {
                paths.push(path);
            }
        }
        paths.into_iter().filter(|p| !p.exists()).cloned().collect()
    }
}

impl RunSection {
    /// Explicit inputs, else the sorted `*.py` files directly in `inputs_dir`.
    pub fn resolve_inputs(&self) -> Result<Vec<PathBuf>> {
        if !self.inputs.is_empty() {
            return Ok(self.inputs.clone());
        }
        let Some(dir) = &self.inputs_dir else {
            return Err(Error::validation("run section needs `inputs` or `inputs_dir`"));
        };
        let mut files: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "py"))
            .collect();
        files.sort();
        Ok(files)
    }
}
