//! Seeded synthetic cells for property and acceptance tests.

use carbonbench::domain::{Cell, PromptVariant, RunRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One cell with `runs` batches of plausible magnitudes: 20-120 s per batch,
/// 1-15 Wh per batch, emissions at the given grid intensity with +-10 % noise.
pub fn random_cell(
    rng: &mut impl Rng,
    model: &str,
    variant: PromptVariant,
    runs: usize,
    intensity: f64,
    coverage: Option<f64>,
) -> Cell {
    let base_t = rng.gen_range(20.0..120.0);
    let base_e = rng.gen_range(0.001..0.015);
    let records = (0..runs)
        .map(|i| {
            let t = base_t * rng.gen_range(0.8..1.2);
            let e = base_e * rng.gen_range(0.7..1.3);
            let c_kg = e * intensity / 1000.0 * rng.gen_range(0.9..1.1);
            RunRecord::from_logged(model, variant, i, t, e, c_kg, None, "synthetic").unwrap()
        })
        .collect();
    Cell::new(model, variant, records, coverage).unwrap()
}

/// `models` x 4 variants x `runs` runs, every cell with coverage.
pub fn grid(seed: u64, models: usize, runs: usize, intensity: f64) -> Vec<Cell> {
    let mut r = rng(seed);
    let mut cells = Vec::new();
    for m in 0..models {
        for v in PromptVariant::STANDARD {
            let q = r.gen_range(40.0..98.0);
            cells.push(random_cell(&mut r, &format!("model-{m}"), v, runs, intensity, Some(q)));
        }
    }
    cells
}
