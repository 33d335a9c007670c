//! Batched execution of an external generation command with energy metering.
//!
//! Batches run strictly one after another so that a shared meter attributes
//! energy to exactly one batch. Each batch produces one emission-log row.

mod meter;

use std::collections::BTreeMap;
use std::env;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::Instant;

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

pub use meter::{
    read_power_trace, replay_meter_energy, sample_watts, trapezoid_joules, window_joules,
    MeterKind, MeterSpec, SamplerSession, JOULES_PER_KWH,
};

use crate::domain::{PromptVariant, RunRecord, DEFAULT_RUNS_PER_BATCH};
use crate::error::{Error, Result};
use crate::ingest::{write_emission_log, EmissionLogRow, PromptTemplates, PromptVariantSpec, FAILED_COLUMN};

pub const INPUT_PLACEHOLDER: &str = "{input_file}";
pub const PROMPT_PLACEHOLDER: &str = "{prompt_file}";
pub const OUTPUT_PLACEHOLDER: &str = "{output_dir}";

/// Prefix of the environment variables carrying generation parameters.
pub const PARAM_ENV_PREFIX: &str = "CARBONBENCH_PARAM_";

const SHELL_BUILTINS: [&str; 9] = [":", "true", "false", "echo", "exit", "test", "[", "printf", "cd"];

fn default_runs_per_batch() -> u32 {
    DEFAULT_RUNS_PER_BATCH
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunPlan {
    /// Shell command run once per input. Must contain `{input_file}`;
    /// `{prompt_file}` and `{output_dir}` are optional.
    pub command_template: String,
    pub inputs: Vec<PathBuf>,
    #[serde(default = "default_runs_per_batch")]
    pub runs_per_batch: u32,
    /// Passed through to the command as `CARBONBENCH_PARAM_<KEY>`; never read.
    #[serde(default)]
    pub generation_params: BTreeMap<String, String>,
    pub model_id: String,
    pub prompt_variant: PromptVariant,
    /// Directory of prompt block overrides.
    #[serde(default)]
    pub templates_dir: Option<PathBuf>,
}

impl RunPlan {
    pub fn validate(&self) -> Result<()> {
        if self.runs_per_batch < 1 {
            return Err(Error::validation("runs_per_batch must be >= 1"));
        }
        if self.inputs.is_empty() {
            return Err(Error::validation("run plan has no inputs"));
        }
        if !self.command_template.contains(INPUT_PLACEHOLDER) {
            return Err(Error::validation(format!(
                "command template must contain {INPUT_PLACEHOLDER}"
            )));
        }
        if self.model_id.trim().is_empty() {
            return Err(Error::validation("model_id is empty"));
        }
        Ok(())
    }

    /// Inputs split into consecutive batches of `runs_per_batch`; the last
    /// may be smaller.
    pub fn batches(&self) -> Vec<&[PathBuf]> {
        self.inputs.chunks(self.runs_per_batch.max(1) as usize).collect()
    }

    pub fn log_file_name(&self) -> String {
        format!("emissions_{}_{}.csv", self.model_id, self.prompt_variant)
    }

    fn project_name(&self) -> String {
        format!("{}_{}", self.model_id, self.prompt_variant)
    }

    /// Human-readable description of what the plan would execute.
    pub fn describe(&self, out_dir: &Path) -> String {
        let mut s = format!(
            "plan {}/{}: {} inputs, {} batches of up to {}\n",
            self.model_id,
            self.prompt_variant,
            self.inputs.len(),
            self.batches().len(),
            self.runs_per_batch
        );
        for (k, v) in &self.generation_params {
            s.push_str(&format!("  env {}={v}\n", param_env_name(k)));
        }
        for (i, batch) in self.batches().iter().enumerate() {
            s.push_str(&format!("  batch {i}:\n"));
            for input in *batch {
                let prompt = prompt_path(out_dir, self, input);
                s.push_str(&format!(
                    "    {}\n",
                    render_command(&self.command_template, input, &prompt, out_dir)
                ));
            }
        }
        s.push_str(&format!("  log: {}\n", out_dir.join(self.log_file_name()).display()));
        s
    }
}

/// One executed batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutcome {
    pub index: usize,
    pub inputs: usize,
    pub failed_inputs: usize,
    pub duration_s: f64,
    pub energy_kwh: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutcome {
    pub records: Vec<RunRecord>,
    pub log_path: PathBuf,
    pub batches: Vec<BatchOutcome>,
}

pub fn param_env_name(key: &str) -> String {
    let k: String = key
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_uppercase() } else { '_' })
        .collect();
    format!("{PARAM_ENV_PREFIX}{k}")
}

fn shell_quote(p: &Path) -> String {
    format!("'{}'", p.display().to_string().replace('\'', r"'\''"))
}

fn render_command(template: &str, input: &Path, prompt: &Path, out_dir: &Path) -> String {
    template
        .replace(INPUT_PLACEHOLDER, &shell_quote(input))
        .replace(PROMPT_PLACEHOLDER, &shell_quote(prompt))
        .replace(OUTPUT_PLACEHOLDER, &shell_quote(out_dir))
}

fn prompt_path(out_dir: &Path, plan: &RunPlan, input: &Path) -> PathBuf {
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "input".into());
    out_dir
        .join("prompts")
        .join(plan.project_name())
        .join(format!("{stem}.txt"))
}

/// Checks that the program the template starts with can be found.
pub fn check_command_resolvable(template: &str) -> Result<()> {
    let program = template
        .split_whitespace()
        .find(|tok| !tok.contains('='))
        .ok_or_else(|| Error::validation("command template is empty"))?;
    if SHELL_BUILTINS.contains(&program) {
        return Ok(());
    }
    let found = if program.contains('/') {
        Path::new(program).is_file()
    } else {
        env::var_os("PATH")
            .map(|paths| env::split_paths(&paths).any(|d| d.join(program).is_file()))
            .unwrap_or(false)
    };
    if found {
        Ok(())
    } else {
        Err(Error::Command(format!("`{program}` not found on PATH")))
    }
}

/// Clock shared by all batches of one plan; replay traces use its seconds.
struct PlanClock(Instant);

impl PlanClock {
    fn now(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

fn measure_batch<F>(meter: &MeterSpec, clock: &PlanClock, run: F) -> Result<(f64, f64, usize)>
where
    F: FnOnce() -> Result<usize>,
{
    match &meter.kind {
        MeterKind::ConstantPower { watts } => {
            let t0 = clock.now();
            let failed = run()?;
            let dur = clock.now() - t0;
            Ok((dur, watts * dur / JOULES_PER_KWH, failed))
        }
        MeterKind::ReplayFile { path } => {
            let trace = read_power_trace(path)?;
            let t0 = clock.now();
            let failed = run()?;
            let t1 = clock.now();
            let joules = window_joules(&trace, t0, t1)
                .map_err(|e| Error::Meter(format!("replay trace {}: {e}", path.display())))?;
            Ok((t1 - t0, joules / JOULES_PER_KWH, failed))
        }
        MeterKind::SamplerCommand { command, poll_interval_s } => {
            let session = SamplerSession::start(command, *poll_interval_s)?;
            let t0 = clock.now();
            let outcome = run();
            let t1 = clock.now();
            let samples = session.finish()?;
            let failed = outcome?;
            Ok((t1 - t0, trapezoid_joules(&samples) / JOULES_PER_KWH, failed))
        }
    }
}

/// Runs every batch of `plan`, writes `emissions_{model}_{variant}.csv` into
/// `out_dir` and returns the records as they would be re-read from that log.
pub fn execute_plan(plan: &RunPlan, meter: &MeterSpec, out_dir: &Path) -> Result<PlanOutcome> {
    plan.validate()?;
    meter.validate()?;
    check_command_resolvable(&plan.command_template)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let needs_prompt = plan.command_template.contains(PROMPT_PLACEHOLDER);
    let templates = match &plan.templates_dir {
        Some(dir) => PromptTemplates::from_dir(dir)?,
        None => PromptTemplates::builtin(),
    };
    let spec = if needs_prompt {
        Some(PromptVariantSpec::standard(plan.prompt_variant)?)
    } else {
        None
    };

    let clock = PlanClock(Instant::now());
    let mut rows = Vec::new();
    let mut batches = Vec::new();
    let log_path = out_dir.join(plan.log_file_name());

    for (index, batch) in plan.batches().into_iter().enumerate() {
        let mut commands = Vec::with_capacity(batch.len());
        for input in batch {
            let prompt = prompt_path(out_dir, plan, input);
            if let Some(spec) = &spec {
                let source = fs::read_to_string(input).map_err(|e| Error::io(input, e))?;
                let dir = prompt.parent().expect("prompt path has a parent");
                fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                fs::write(&prompt, templates.compose(spec, &source)).map_err(|e| Error::io(&prompt, e))?;
            }
            commands.push(render_command(&plan.command_template, input, &prompt, out_dir));
        }

        let started = Utc::now();
        let (duration_s, energy_kwh, failed_inputs) = measure_batch(meter, &clock, || {
            let mut failed = 0;
            for cmd in &commands {
                let status = Command::new("sh")
                    .arg("-c")
                    .arg(cmd)
                    .envs(plan.generation_params.iter().map(|(k, v)| (param_env_name(k), v)))
                    .env("CARBONBENCH_MODEL", &plan.model_id)
                    .env("CARBONBENCH_VARIANT", plan.prompt_variant.to_string())
                    .stdin(Stdio::null())
                    .status()
                    .map_err(|e| Error::Command(format!("cannot spawn `{cmd}`: {e}")))?;
                if !status.success() {
                    log::warn!("batch {index}: `{cmd}` exited with {status}");
                    failed += 1;
                }
            }
            Ok(failed)
        })?;

        let emissions_kg = energy_kwh * meter.grid_intensity_g_per_kwh / 1000.0;
        let mut extra = vec![("batch_size".to_string(), batch.len().to_string())];
        extra.push((FAILED_COLUMN.to_string(), (failed_inputs > 0).to_string()));
        rows.push(EmissionLogRow {
            timestamp: Some(started.to_rfc3339_opts(SecondsFormat::Micros, true)),
            project_name: Some(plan.project_name()),
            duration: duration_s,
            emissions: emissions_kg,
            energy_consumed: energy_kwh,
            cpu_energy: None,
            gpu_energy: None,
            ram_energy: None,
            extra,
        });
        log::info!(
            "{}/{} batch {index}: {} inputs, {duration_s:.3} s, {energy_kwh:.3e} kWh",
            plan.model_id,
            plan.prompt_variant,
            batch.len()
        );
        batches.push(BatchOutcome {
            index,
            inputs: batch.len(),
            failed_inputs,
            duration_s,
            energy_kwh,
        });
    }

    write_emission_log(&log_path, &rows)?;
    let records = rows
        .iter()
        .zip(&batches)
        .map(|(row, b)| {
            let mut rec = RunRecord::from_logged(
                plan.model_id.clone(),
                plan.prompt_variant,
                b.index,
                row.duration,
                row.energy_consumed,
                row.emissions,
                row.timestamp.as_deref().and_then(crate::ingest::parse_timestamp),
                &log_path,
            )?;
            rec.failed = b.failed_inputs > 0;
            Ok(rec)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PlanOutcome {
        records,
        log_path,
        batches,
    })
}
