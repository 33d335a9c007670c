//! Power meters and energy integration.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const JOULES_PER_KWH: f64 = 3.6e6;

/// `(seconds, watts)` readings.
type Samples = Vec<(f64, f64)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeterKind {
    /// Fixed draw; energy is watts times wall-clock duration.
    ConstantPower { watts: f64 },
    /// Recorded `timestamp_s,watts` trace. Timestamps are seconds on the plan
    /// clock, which starts at 0 when the plan starts executing.
    ReplayFile { path: PathBuf },
    /// External command printing one watts reading per invocation, polled
    /// while a batch runs.
    SamplerCommand { command: String, poll_interval_s: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeterSpec {
    #[serde(flatten)]
    pub kind: MeterKind,
    pub grid_intensity_g_per_kwh: f64,
}

impl MeterSpec {
    pub fn validate(&self) -> Result<()> {
        let i = self.grid_intensity_g_per_kwh;
        if !(i.is_finite() && i > 0.0) {
            return Err(Error::validation(format!("grid intensity must be > 0, got {i}")));
        }
        match &self.kind {
            MeterKind::ConstantPower { watts } if !(watts.is_finite() && *watts > 0.0) => {
                Err(Error::validation(format!("constant power must be > 0 W, got {watts}")))
            }
            MeterKind::SamplerCommand { poll_interval_s, .. }
                if !(poll_interval_s.is_finite() && *poll_interval_s > 0.0) =>
            {
                Err(Error::validation(format!(
                    "poll interval must be > 0 s, got {poll_interval_s}"
                )))
            }
            MeterKind::SamplerCommand { command, .. } if command.trim().is_empty() => {
                Err(Error::validation("sampler command is empty"))
            }
            _ => Ok(()),
        }
    }
}

/// Trapezoidal integral of `(t_s, watts)` samples, in joules. Samples must be
/// sorted by time.
pub fn trapezoid_joules(samples: &[(f64, f64)]) -> f64 {
    samples
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

/// Reads a `timestamp_s,watts` trace. A header row is optional.
pub fn read_power_trace(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(i as u64 + 1);
        let parse = |j: usize| rec.get(j).and_then(|s| s.parse::<f64>().ok());
        match (parse(0), parse(1)) {
            (Some(t), Some(w)) if t.is_finite() && w.is_finite() && w >= 0.0 => {
                if out.last().is_some_and(|(prev, _)| *prev > t) {
                    return Err(Error::Row {
                        path: path.to_path_buf(),
                        line,
                        message: "timestamps must be sorted".into(),
                    });
                }
                out.push((t, w));
            }
            _ if i == 0 => continue,
            _ => {
                return Err(Error::Row {
                    path: path.to_path_buf(),
                    line,
                    message: "expected `timestamp_s,watts` with watts >= 0".into(),
                })
            }
        }
    }
    if out.is_empty() {
        return Err(Error::validation(format!("{}: empty power trace", path.display())));
    }
    Ok(out)
}

fn interpolate(trace: &[(f64, f64)], t: f64) -> f64 {
    let idx = trace.partition_point(|(ts, _)| *ts <= t);
    if idx == 0 {
        return trace[0].1;
    }
    if idx == trace.len() {
        return trace[idx - 1].1;
    }
    let (t0, w0) = trace[idx - 1];
    let (t1, w1) = trace[idx];
    if t1 == t0 {
        w1
    } else {
        w0 + (w1 - w0) * (t - t0) / (t1 - t0)
    }
}

/// Energy in `[t_start, t_end]` of a piecewise-linear power trace, in joules.
pub fn window_joules(trace: &[(f64, f64)], t_start: f64, t_end: f64) -> Result<f64> {
    let (first, last) = (trace[0].0, trace[trace.len() - 1].0);
    if t_start.is_nan() || t_end.is_nan() || t_start > t_end {
        return Err(Error::Range(format!("window start {t_start} is after end {t_end}")));
    }
    if t_start < first || t_end > last {
        return Err(Error::Range(format!(
            "window [{t_start}, {t_end}] s lies outside the trace span [{first}, {last}] s"
        )));
    }
    if t_start == t_end {
        return Ok(0.0);
    }
    let mut pts = vec![(t_start, interpolate(trace, t_start))];
    pts.extend(trace.iter().copied().filter(|(t, _)| *t > t_start && *t < t_end));
    pts.push((t_end, interpolate(trace, t_end)));
    Ok(trapezoid_joules(&pts))
}

/// Energy in kWh drawn between two times of a replayed power trace.
pub fn replay_meter_energy(path: &Path, t_start: f64, t_end: f64) -> Result<f64> {
    let trace = read_power_trace(path)?;
    Ok(window_joules(&trace, t_start, t_end)? / JOULES_PER_KWH)
}

/// Runs a sampler command once and parses its watts reading.
pub fn sample_watts(command: &str) -> Result<f64> {
    let out = Command::new("sh")
        .arg("-c")
        .arg(command)
        .output()
        .map_err(|e| Error::Meter(format!("cannot run sampler `{command}`: {e}")))?;
    if !out.status.success() {
        return Err(Error::Meter(format!(
            "sampler `{command}` exited with {}",
            out.status
        )));
    }
    let text = String::from_utf8_lossy(&out.stdout);
    let v: f64 = text.trim().parse().map_err(|_| {
        Error::Meter(format!("sampler `{command}` printed `{}`, not a number", text.trim()))
    })?;
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::Meter(format!("sampler `{command}` reported {v} W")));
    }
    Ok(v)
}

/// Background poller for a sampler command. Stopping it takes a final
/// reading so the samples span the whole batch.
pub struct SamplerSession {
    command: String,
    origin: Instant,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<Result<Samples>>>,
}

impl SamplerSession {
    pub fn start(command: &str, poll_interval_s: f64) -> Result<Self> {
        let origin = Instant::now();
        let first = sample_watts(command)?;
        let stop = Arc::new(AtomicBool::new(false));
        let cmd = command.to_string();
        let flag = Arc::clone(&stop);
        let interval = Duration::from_secs_f64(poll_interval_s);
        let handle = thread::spawn(move || {
            let mut samples = vec![(0.0, first)];
            let tick = Duration::from_millis(5).min(interval);
            let mut next = origin + interval;
            while !flag.load(Ordering::Acquire) {
                if Instant::now() >= next {
                    let w = sample_watts(&cmd)?;
                    samples.push((origin.elapsed().as_secs_f64(), w));
                    next += interval;
                } else {
                    thread::sleep(tick);
                }
            }
            Ok(samples)
        });
        Ok(SamplerSession {
            command: command.to_string(),
            origin,
            stop,
            handle: Some(handle),
        })
    }

    /// Stops polling and returns samples timed from session start.
    pub fn finish(mut self) -> Result<Vec<(f64, f64)>> {
        self.stop.store(true, Ordering::Release);
        let handle = self.handle.take().expect("sampler already finished");
        let mut samples = handle
            .join()
            .map_err(|_| Error::Meter("sampler thread panicked".into()))??;
        let end = self.origin.elapsed().as_secs_f64();
        samples.push((end, sample_watts(&self.command)?));
        Ok(samples)
    }
}

impl Drop for SamplerSession {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Release);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(body: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("trace.csv");
        fs::write(&p, body).unwrap();
        (dir, p)
    }

    #[test]
    fn constant_hundred_watts_for_36_seconds() {
        let (_d, p) = trace("timestamp_s,watts\n0,100\n36,100\n");
        assert!((replay_meter_energy(&p, 0.0, 36.0).unwrap() - 0.001).abs() < 1e-15);
    }

    #[test]
    fn zero_width_window() {
        let (_d, p) = trace("timestamp_s,watts\n0,100\n36,100\n");
        assert_eq!(replay_meter_energy(&p, 10.0, 10.0).unwrap(), 0.0);
    }

    #[test]
    fn linear_ramp() {
        let (_d, p) = trace("timestamp_s,watts\n0,0\n72,100\n");
        assert!((replay_meter_energy(&p, 0.0, 72.0).unwrap() - 0.001).abs() < 1e-15);
        // interior window of the ramp: 25 W..75 W over 36 s = 1800 J
        assert!((replay_meter_energy(&p, 18.0, 54.0).unwrap() - 0.0005).abs() < 1e-15);
    }

    #[test]
    fn window_outside_span() {
        let (_d, p) = trace("timestamp_s,watts\n0,100\n36,100\n");
        assert!(matches!(replay_meter_energy(&p, -1.0, 5.0), Err(Error::Range(_))));
        assert!(matches!(replay_meter_energy(&p, 1.0, 40.0), Err(Error::Range(_))));
    }

    #[test]
    fn unsorted_trace_rejected() {
        let (_d, p) = trace("0,1\n5,1\n3,1\n");
        assert!(matches!(read_power_trace(&p), Err(Error::Row { line: 3, .. })));
    }

    #[test]
    fn windows_are_additive() {
        let tr: Vec<(f64, f64)> = (0..50).map(|i| (i as f64 * 0.7, 40.0 + (i * 37 % 23) as f64)).collect();
        let whole = window_joules(&tr, 1.3, 30.1).unwrap();
        let split = window_joules(&tr, 1.3, 12.45).unwrap() + window_joules(&tr, 12.45, 30.1).unwrap();
        assert!((whole - split).abs() <= 1e-9 * whole);
    }

    #[test]
    fn meter_validation() {
        let m = |kind| MeterSpec { kind, grid_intensity_g_per_kwh: 100.0 };
        assert!(m(MeterKind::ConstantPower { watts: 0.0 }).validate().is_err());
        assert!(m(MeterKind::SamplerCommand { command: "echo 1".into(), poll_interval_s: 0.0 })
            .validate()
            .is_err());
        assert!(m(MeterKind::ConstantPower { watts: 60.0 }).validate().is_ok());
    }

    #[test]
    fn sampler_reads_numbers_and_rejects_garbage() {
        assert_eq!(sample_watts("echo 42.5").unwrap(), 42.5);
        assert!(matches!(sample_watts("echo watts"), Err(Error::Meter(_))));
        assert!(matches!(sample_watts("exit 3"), Err(Error::Meter(_))));
    }

    #[test]
    fn sampler_session_spans_window() {
        let s = SamplerSession::start("echo 10", 0.02).unwrap();
        thread::sleep(Duration::from_millis(120));
        let samples = s.finish().unwrap();
        assert!(samples.len() >= 3);
        assert_eq!(samples[0].0, 0.0);
        let span = samples.last().unwrap().0;
        assert!((trapezoid_joules(&samples) - 10.0 * span).abs() < 1e-9);
    }
}
