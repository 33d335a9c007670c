//! Regenerates the bundled fixtures: 5 models x 4 prompt variants of
//! 33-batch emission logs, coverage, a compute config and a tiny dataset.
//!
//! cargo run --example make_fixtures -- crates/core/fixtures

use std::fs;
use std::path::PathBuf;

use chrono::{Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use carbonbench::ingest::{write_emission_log, EmissionLogRow};

const INTENSITY: f64 = 400.0;
const BATCHES: usize = 33;

// (model, base batch energy in Wh, base batch seconds, per-variant energy
// multipliers, per-variant coverage)
type ModelSpec = (&'static str, f64, f64, [f64; 4], [f64; 4]);

const MODELS: [ModelSpec; 5] = [
    ("alpha-7b", 9.0, 95.0, [1.00, 0.93, 0.86, 0.78], [71.5, 76.0, 81.2, 84.9]),
    ("bravo-6.7b", 7.5, 80.0, [1.00, 1.04, 0.97, 0.99], [68.0, 70.4, 69.1, 74.3]),
    ("charlie-3b", 4.2, 48.0, [1.00, 1.08, 1.15, 1.21], [55.2, 58.9, 63.0, 66.7]),
    ("delta-8b", 11.0, 120.0, [1.00, 0.90, 1.05, 0.88], [79.4, 80.2, 83.5, 88.1]),
    ("echo-1.5b", 2.8, 35.0, [1.00, 1.00, 1.01, 1.00], [42.0, 47.5, 51.3, 53.8]),
];

fn main() {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures".into()));
    let logs_dir = dir.join("logs");
    fs::create_dir_all(&logs_dir).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_611);
    let mut coverage = String::from("cell,coverage_pct\n");
    let mut manifest = Vec::new();

    for (mi, (model, wh, secs, mult, cov)) in MODELS.iter().enumerate() {
        for v in 0..4 {
            let mut t = Utc.with_ymd_and_hms(2025, 3, 1 + mi as u32, 8 + v as u32 * 3, 0, 0).unwrap();
            let rows: Vec<EmissionLogRow> = (0..BATCHES)
                .map(|b| {
                    // the last batch holds 4 of 164 inputs
                    let share = if b == BATCHES - 1 { 0.8 } else { 1.0 };
                    let duration = secs * mult[v] * share * rng.gen_range(0.9..1.1);
                    let energy = wh * mult[v] * share * rng.gen_range(0.92..1.08) / 1000.0;
                    let cpu = energy * 0.3;
                    let ram = energy * 0.05;
                    let row = EmissionLogRow {
                        timestamp: Some(t.format("%Y-%m-%dT%H:%M:%S").to_string()),
                        project_name: Some(format!("{model}_V{v}")),
                        duration: round(duration, 6),
                        emissions: round(energy * INTENSITY / 1000.0, 12),
                        energy_consumed: round(energy, 12),
                        cpu_energy: Some(round(cpu, 12)),
                        gpu_energy: Some(round(energy - cpu - ram, 12)),
                        ram_energy: Some(round(ram, 12)),
                        extra: vec![("country_iso_code".into(), "XXX".into())],
                    };
                    t += Duration::milliseconds((duration * 1000.0) as i64 + 2000);
                    row
                })
                .collect();
            let name = format!("emissions_{model}_V{v}.csv");
            write_emission_log(&logs_dir.join(&name), &rows).unwrap();
            coverage.push_str(&format!("{model}/V{v},{}\n", cov[v]));
            manifest.push(serde_json::json!({
                "path": format!("logs/{name}"),
                "model_id": model,
                "variant": format!("V{v}"),
            }));
        }
    }
    fs::write(dir.join("coverage.csv"), coverage).unwrap();

    let config = serde_json::json!({
        "grid_intensity_g_per_kwh": INTENSITY,
        "runs_per_batch": 5,
        "logs": manifest,
        "coverage": "coverage.csv",
        "out_dir": "out",
        "formats": ["markdown", "csv", "json"],
    });
    fs::write(dir.join("config.json"), serde_json::to_string_pretty(&config).unwrap() + "\n").unwrap();

    let tasks = [
        ("add", "def add(a, b):\n    \"\"\"Return a + b.\"\"\"\n", "    return a + b\n"),
        ("is_even", "def is_even(n):\n    \"\"\"True when n is even.\"\"\"\n", "    return n % 2 == 0\n"),
        ("reverse", "def reverse(s):\n    \"\"\"Reverse a string.\"\"\"\n", "    return s[::-1]\n"),
        ("maximum", "def maximum(xs):\n    \"\"\"Largest element of a non-empty list.\"\"\"\n", "    return max(xs)\n"),
        ("count_vowels", "def count_vowels(s):\n    \"\"\"Number of vowels in s.\"\"\"\n", "    return sum(c in 'aeiou' for c in s.lower())\n"),
        ("fib", "def fib(n):\n    \"\"\"n-th Fibonacci number.\"\"\"\n", "    a, b = 0, 1\n    for _ in range(n):\n        a, b = b, a + b\n    return a\n"),
    ];
    let mut jsonl = String::new();
    for (i, (entry, prompt, body)) in tasks.iter().enumerate() {
        let rec = serde_json::json!({
            "task_id": format!("HumanEval/{i}"),
            "prompt": prompt,
            "canonical_solution": body,
            "test": format!("def check(candidate):\n    assert candidate is not None\n"),
            "entry_point": entry,
        });
        jsonl.push_str(&serde_json::to_string(&rec).unwrap());
        jsonl.push('\n');
    }
    fs::write(dir.join("dataset.jsonl"), jsonl).unwrap();
    println!("fixtures written to {}", dir.display());
}

fn round(x: f64, places: i32) -> f64 {
    let k = 10f64.powi(places);
    (x * k).round() / k
}
