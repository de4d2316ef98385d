//! Benchmark harness mirroring the execution-time comparison: four schedule
//! rows (natural, eta=0.2, eta=1.0, and the eta=1.0 slice baseline) across
//! the DP and GSB families and sample sizes, timing the sweep and the
//! density-grid evaluation separately.
//!
//! Absolute seconds are hardware-bound and not comparable across machines;
//! the report carries one machine-local soft ordering check (finite-natural
//! DP faster than slice DP at the larger n) that downgrades to a warning.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{ConfigLayer, RunConfig};
use crate::data::simulate_mixture;
use crate::diagnostics::mixture_density;
use crate::error::Result;
use crate::runner::{default_grid, AnySampler};

/// One (model, schedule, n) cell of the timing matrix.
#[derive(Debug, Clone, Serialize)]
pub struct BenchCell {
    pub model: String,
    pub schedule: String,
    pub row_label: String,
    pub n: usize,
    pub total_s: f64,
    pub sweep_s: f64,
    pub density_s: f64,
    pub mean_k_star: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SoftCheck {
    pub description: String,
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub iters: usize,
    pub grid: usize,
    pub seed: u64,
    pub sample_sizes: Vec<usize>,
    pub note: String,
    pub cells: Vec<BenchCell>,
    pub soft_check: SoftCheck,
}

/// The four schedule rows of the comparison, as (label, schedule, slice?).
pub fn schedule_rows() -> Vec<(&'static str, &'static str, bool)> {
    vec![
        ("natural", "natural", false),
        ("eta=0.2", "exp:0.2", false),
        ("eta=1.0", "exp:1", false),
        ("eta=1.0 (slice)", "exp:1", true),
    ]
}

fn cell_config(family_finite: &str, family_slice: &str, row: (&str, &str, bool), n: usize, iters: usize, grid: usize, seed: u64) -> Result<RunConfig> {
    let (_, schedule, is_slice) = row;
    let model = if is_slice { family_slice } else { family_finite };
    RunConfig::resolve(&[ConfigLayer {
        model: Some(model.into()),
        schedule: Some(schedule.into()),
        iters: Some(iters),
        burnin: Some(0),
        seed: Some(seed),
        grid: Some(grid),
        data: Some(format!("bench-n{n}")),
        ..Default::default()
    }])
}

/// Runs the full timing matrix over the simulated four-component mixture.
pub fn run_bench(iters: usize, grid: usize, seed: u64, sample_sizes: &[usize]) -> Result<BenchReport> {
    let mut cells = Vec::new();
    for &n in sample_sizes {
        let dataset = simulate_mixture(n, seed);
        let grid_points = default_grid(&dataset.values, grid);
        for (family_finite, family_slice) in [("dp-finite", "dp-slice"), ("gsb-finite", "gsb-slice")] {
            for row in schedule_rows() {
                let cfg = cell_config(family_finite, family_slice, row, n, iters, grid, seed)?;
                let cell = time_cell(&cfg, &dataset.values, &grid_points, row.0)?;
                cells.push(cell);
            }
        }
    }

    // Soft ordering check at the largest sample size.
    let largest = sample_sizes.iter().copied().max();
    let soft_check = match largest {
        Some(n) => {
            let find = |model: &str, label: &str| {
                cells
                    .iter()
                    .find(|c| c.model == model && c.row_label == label && c.n == n)
                    .map(|c| c.total_s)
            };
            let natural = find("dp-finite", "natural");
            let slice = find("dp-slice", "eta=1.0 (slice)");
            let pass = match (natural, slice) {
                (Some(a), Some(b)) => Some(a < b),
                _ => None,
            };
            SoftCheck {
                description: format!(
                    "dp-finite/natural wall-clock < dp-slice/eta=1.0 at n={n} (machine-local \
                     ordering; failure is a warning, not an error)"
                ),
                pass,
            }
        }
        None => SoftCheck {
            description: "no sample sizes benchmarked".into(),
            pass: None,
        },
    };

    Ok(BenchReport {
        iters,
        grid,
        seed,
        sample_sizes: sample_sizes.to_vec(),
        note: "absolute times are hardware-bound and not comparable across machines; \
               density evaluation time scales with the grid size and is reported separately"
            .into(),
        cells,
        soft_check,
    })
}

fn time_cell(cfg: &RunConfig, data: &[f64], grid: &[f64], row_label: &str) -> Result<BenchCell> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut sampler = AnySampler::build(cfg, data.to_vec(), &mut rng)?;
    let mut weights = Vec::new();
    let mut atoms = Vec::new();
    let mut row = vec![0.0; grid.len()];
    let mut sweep_s = 0.0;
    let mut density_s = 0.0;
    let mut k_star_sum = 0usize;

    let start = Instant::now();
    for _ in 0..cfg.iters {
        let t0 = Instant::now();
        sampler.sweep(&mut rng)?;
        sweep_s += t0.elapsed().as_secs_f64();

        let t1 = Instant::now();
        sampler.mixture_into(&mut weights, &mut atoms);
        mixture_density(&weights, &atoms, grid, &mut row);
        density_s += t1.elapsed().as_secs_f64();

        k_star_sum += sampler.k_star();
    }
    let total_s = start.elapsed().as_secs_f64();

    Ok(BenchCell {
        model: cfg.model.as_str().into(),
        schedule: cfg.schedule.clone(),
        row_label: row_label.into(),
        n: data.len(),
        total_s,
        sweep_s,
        density_s,
        mean_k_star: k_star_sum as f64 / cfg.iters as f64,
    })
}

/// Plain-text table: schedule rows by family and sample size.
pub fn format_table(report: &BenchReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "Execution times (s) for {} iterations, grid {} points\n",
        report.iters, report.grid
    ));
    let ns = &report.sample_sizes;
    out.push_str(&format!("{:<18}", "schedule"));
    for family in ["DP", "GSB"] {
        for n in ns {
            out.push_str(&format!("{:>16}", format!("{family} n={n}")));
        }
    }
    out.push('\n');
    for row in schedule_rows() {
        out.push_str(&format!("{:<18}", row.0));
        for family in ["dp", "gsb"] {
            for &n in ns {
                let model_prefix = family;
                let cell = report.cells.iter().find(|c| {
                    c.row_label == row.0 && c.n == n && c.model.starts_with(model_prefix)
                });
                match cell {
                    Some(c) => out.push_str(&format!("{:>16.3}", c.total_s)),
                    None => out.push_str(&format!("{:>16}", "-")),
                }
            }
        }
        out.push('\n');
    }
    out.push_str(&format!("note: {}\n", report.note));
    match report.soft_check.pass {
        Some(true) => out.push_str("soft check passed: "),
        Some(false) => out.push_str("WARNING, soft check failed: "),
        None => out.push_str("soft check skipped: "),
    }
    out.push_str(&report.soft_check.description);
    out.push('\n');
    out
}
