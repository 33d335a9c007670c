use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{CliConfig, Overrides};
use super::{Cmd, EXIT_INVALID, EXIT_OK, EXIT_PARTIAL};
use crate::domain::{AnalysisConfig, CellId};
use crate::error::{Error, Result};
use crate::ingest::{
    check_coverage_file, check_emission_log, consolidate, parse_coverage, parse_dataset,
    prepare_modules, write_modules, CoverageMap, Finding, LogSpec, REQUIRED_COLUMNS,
};
use crate::metrics::{compute_all, Analysis, MetricIssue};
use crate::report::{emit_charts, serialize, Format};
use crate::runner::{execute_plan, MeterSpec, RunPlan};

pub const METRICS_FILE: &str = "metrics.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const COMPUTE_CONFIG_FILE: &str = "compute_config.json";

pub(super) fn dispatch(cmd: Cmd) -> Result<u8> {
    match cmd {
        Cmd::Prepare { dataset, config, out } => cmd_prepare(dataset, config, out),
        Cmd::Run { config, out, dry_run, overrides } => cmd_run(&config, out, dry_run, overrides.into()),
        Cmd::Compute { config, out, overrides } => cmd_compute(&config, out, overrides.into()),
        Cmd::Report { artifact, config, out, format, charts } => {
            cmd_report(artifact, config, out, format, charts)
        }
        Cmd::Validate { paths } => Ok(cmd_validate(&paths)),
    }
}

fn load_optional(config: Option<&PathBuf>) -> Result<CliConfig> {
    config.map(|p| CliConfig::load(p)).transpose().map(Option::unwrap_or_default)
}

fn out_dir(flag: Option<PathBuf>, cfg: &CliConfig) -> Result<PathBuf> {
    flag.or_else(|| cfg.out_dir.clone())
        .ok_or_else(|| Error::Usage("no output directory; pass --out or set out_dir".into()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn cmd_prepare(dataset: Option<PathBuf>, config: Option<PathBuf>, out: Option<PathBuf>) -> Result<u8> {
    let cfg = load_optional(config.as_ref())?;
    let dataset = dataset
        .or_else(|| cfg.dataset.clone())
        .ok_or_else(|| Error::Usage("no dataset given".into()))?;
    let out = out_dir(out, &cfg)?;
    let records = parse_dataset(&dataset)?;
    let modules = prepare_modules(&records);
    let written = write_modules(&modules, &out)?;
    println!("wrote {} modules to {}", written.len(), out.display());
    Ok(EXIT_OK)
}

fn cmd_run(config: &Path, out: Option<PathBuf>, dry_run: bool, overrides: Overrides) -> Result<u8> {
    let cfg = CliConfig::load(config)?;
    let section = cfg
        .run
        .clone()
        .ok_or_else(|| Error::Usage(format!("{} has no `run` section", config.display())))?;
    let analysis = cfg.analysis(&overrides)?;
    let out = out_dir(out, &cfg)?;
    let inputs = section.resolve_inputs()?;
    let meter = MeterSpec {
        kind: section.meter.clone(),
        grid_intensity_g_per_kwh: analysis.grid_intensity_g_per_kwh,
    };
    let plans: Vec<RunPlan> = section
        .models
        .iter()
        .flat_map(|model| {
            section.variants.iter().map(|&variant| RunPlan {
                command_template: section.command_template.clone(),
                inputs: inputs.clone(),
                runs_per_batch: analysis.runs_per_batch,
                generation_params: section.generation_params.clone(),
                model_id: model.clone(),
                prompt_variant: variant,
                templates_dir: section.templates_dir.clone(),
            })
        })
        .collect();
    if plans.is_empty() {
        return Err(Error::validation("run section lists no models or no variants"));
    }
    for p in &plans {
        p.validate()?;
    }
    meter.validate()?;

    if dry_run {
        println!("meter: {}", serde_json::to_string(&meter)?);
        for p in &plans {
            print!("{}", p.describe(&out));
        }
        return Ok(EXIT_OK);
    }

    let mut logs = Vec::new();
    let mut all_failed = false;
    for p in &plans {
        let outcome = execute_plan(p, &meter, &out)?;
        let failed = outcome.records.iter().filter(|r| r.failed).count();
        println!(
            "{}: {} batches ({failed} failed)",
            outcome.log_path.display(),
            outcome.records.len()
        );
        all_failed |= failed == outcome.records.len();
        logs.push(LogSpec {
            path: PathBuf::from(p.log_file_name()),
            model_id: p.model_id.clone(),
            variant: p.prompt_variant,
        });
    }
    let follow_up = CliConfig {
        grid_intensity_g_per_kwh: Some(analysis.grid_intensity_g_per_kwh),
        runs_per_batch: Some(analysis.runs_per_batch),
        logs,
        ..Default::default()
    };
    write_json(&out.join(COMPUTE_CONFIG_FILE), &follow_up)?;
    Ok(if all_failed { EXIT_PARTIAL } else { EXIT_OK })
}

#[derive(Serialize)]
struct CellStatus<'a> {
    cell: String,
    runs_used: usize,
    runs_failed: usize,
    issues: &'a [MetricIssue],
}

#[derive(Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a AnalysisConfig,
    logs: &'a [LogSpec],
    coverage: Option<&'a PathBuf>,
    cells: usize,
    cells_with_metrics: usize,
    status: Vec<CellStatus<'a>>,
}

/// A cell counts as computed when its runs yielded a carbon intensity; other
/// metrics may still be undefined and are listed as issues.
fn cell_computed(cell: &crate::metrics::CellReport) -> bool {
    cell.metrics.sci.is_some()
}

fn cmd_compute(config: &Path, out: Option<PathBuf>, overrides: Overrides) -> Result<u8> {
    let cfg = CliConfig::load(config)?;
    let analysis_cfg = cfg.analysis(&overrides)?;
    if cfg.logs.is_empty() {
        return Err(Error::validation(format!("{}: log manifest is empty", config.display())));
    }
    if let Some(missing) = cfg.missing_paths().first() {
        return Err(Error::validation(format!("referenced file not found: {}", missing.display())));
    }
    let out = out_dir(out, &cfg)?;
    let coverage: CoverageMap = match &cfg.coverage {
        Some(p) => parse_coverage(p)?,
        None => {
            log::warn!("no coverage file configured; quality metrics will be skipped");
            CoverageMap::new()
        }
    };
    let cells = consolidate(&cfg.logs, &coverage)?;
    let analysis = compute_all(&cells, &analysis_cfg)?;

    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    write_json(&out.join(METRICS_FILE), &analysis)?;
    let status: Vec<CellStatus> = analysis
        .cells
        .iter()
        .map(|c| CellStatus {
            cell: c.id.to_string(),
            runs_used: c.inputs.runs_used,
            runs_failed: c.inputs.runs_failed,
            issues: &c.issues,
        })
        .collect();
    let computed = analysis.cells.iter().filter(|c| cell_computed(c)).count();
    write_json(
        &out.join(MANIFEST_FILE),
        &RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            config: &analysis.config,
            logs: &cfg.logs,
            coverage: cfg.coverage.as_ref(),
            cells: analysis.cells.len(),
            cells_with_metrics: computed,
            status,
        },
    )?;
    for c in &analysis.cells {
        for issue in &c.issues {
            eprintln!("{}: {} {}", c.id, issue.metric, issue.reason);
        }
    }
    println!(
        "{} cells, {computed} with metrics -> {}",
        analysis.cells.len(),
        out.join(METRICS_FILE).display()
    );
    Ok(if computed > 0 { EXIT_OK } else { EXIT_PARTIAL })
}

fn cmd_report(
    artifact: Option<PathBuf>,
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    format: Vec<String>,
    charts: bool,
) -> Result<u8> {
    let cfg = load_optional(config.as_ref())?;
    let names = if format.is_empty() { cfg.formats.clone() } else { format };
    let formats = names
        .iter()
        .map(|f| f.parse::<Format>())
        .collect::<Result<Vec<_>>>()?;
    let charts = charts || cfg.charts;
    if formats.is_empty() && !charts {
        return Err(Error::Usage("nothing to report; pass --format or --charts".into()));
    }
    let artifact = artifact
        .or_else(|| cfg.out_dir.as_ref().map(|d| d.join(METRICS_FILE)))
        .ok_or_else(|| Error::Usage("no metrics artifact; pass --artifact".into()))?;
    let out = out
        .or_else(|| cfg.out_dir.clone())
        .or_else(|| artifact.parent().map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("."));

    let text = fs::read_to_string(&artifact).map_err(|e| Error::io(&artifact, e))?;
    let analysis: Analysis = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: not a metrics artifact: {e}", artifact.display())))?;
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    for f in formats {
        let path = out.join(format!("report.{}", f.extension()));
        fs::write(&path, serialize(&analysis, f)?).map_err(|e| Error::io(&path, e))?;
        println!("{}", path.display());
    }
    if charts {
        let files = emit_charts(&analysis, &out.join("charts"))?;
        println!("{} chart files in {}", files.len(), out.join("charts").display());
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FileKind {
    EmissionLog,
    Coverage,
    Dataset,
    Config,
}

fn detect(path: &Path) -> Result<FileKind> {
    let ext = path
        .extension()
        .map(|e| e.to_string_lossy().to_ascii_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "jsonl" => Ok(FileKind::Dataset),
        "json" => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let v: serde_json::Value = serde_json::from_str(&text)?;
            let config_keys = ["logs", "grid_intensity_g_per_kwh", "run", "dataset", "out_dir"];
            let is_config = v
                .as_object()
                .is_some_and(|o| config_keys.iter().any(|k| o.contains_key(*k)));
            Ok(if is_config { FileKind::Config } else { FileKind::Coverage })
        }
        _ => {
            let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
            let mut first = String::new();
            BufReader::new(f)
                .read_line(&mut first)
                .map_err(|e| Error::io(path, e))?;
            let cols: Vec<&str> = first.trim().split(',').map(str::trim).collect();
            let log_like = REQUIRED_COLUMNS.iter().any(|c| cols.contains(c)) || cols.contains(&"project_name");
            Ok(if log_like { FileKind::EmissionLog } else { FileKind::Coverage })
        }
    }
}

fn check_config(path: &Path) -> Vec<Finding> {
    let cfg = match CliConfig::load(path) {
        Ok(c) => c,
        Err(e) => return vec![Finding::new(path, None, e.to_string())],
    };
    let mut findings: Vec<Finding> = cfg
        .missing_paths()
        .into_iter()
        .map(|p| Finding::new(path, None, format!("referenced file not found: {}", p.display())))
        .collect();
    if cfg.grid_intensity_g_per_kwh.is_some() {
        if let Err(e) = cfg.analysis(&Overrides::default()) {
            findings.push(Finding::new(path, None, e.to_string()));
        }
    }
    let mut seen = std::collections::BTreeSet::new();
    for l in &cfg.logs {
        let id = CellId::new(l.model_id.clone(), l.variant);
        if !seen.insert(id.clone()) {
            findings.push(Finding::new(path, None, format!("cell {id} listed more than once")));
        }
    }
    findings
}

fn cmd_validate(paths: &[PathBuf]) -> u8 {
    let mut findings = Vec::new();
    for p in paths {
        let kind = match detect(p) {
            Ok(k) => k,
            Err(e) => {
                findings.push(Finding::new(p, None, e.to_string()));
                continue;
            }
        };
        let mut found = match kind {
            FileKind::EmissionLog => check_emission_log(p),
            FileKind::Coverage => check_coverage_file(p),
            FileKind::Dataset => match parse_dataset(p) {
                Ok(_) => Vec::new(),
                Err(e) => vec![Finding::new(p, None, e.to_string())],
            },
            FileKind::Config => check_config(p),
        };
        log::info!("{}: checked as {kind:?}, {} finding(s)", p.display(), found.len());
        findings.append(&mut found);
    }
    for f in &findings {
        println!("{f}");
    }
    println!("{} finding(s) in {} file(s)", findings.len(), paths.len());
    if findings.is_empty() {
        EXIT_OK
    } else {
        EXIT_INVALID
    }
}
