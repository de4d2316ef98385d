//! Fit orchestration: builds the configured sampler, runs chains, and emits
//! the result artifacts (trace.csv per chain, pooled density.csv,
//! summary.json).

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::RunConfig;
use crate::data::Dataset;
use crate::diagnostics::{quantile_sorted, DensityAccumulator};
use crate::error::{Error, Result};
use crate::gibbs::{FiniteGibbs, MixtureSampler};
use crate::slice::SliceSampler;
use crate::sticks::Atom;

/// Either sampler behind one dispatch point.
pub enum AnySampler {
    Finite(FiniteGibbs),
    Slice(SliceSampler),
}

impl AnySampler {
    pub fn build<R: rand::Rng + ?Sized>(
        cfg: &RunConfig,
        data: Vec<f64>,
        rng: &mut R,
    ) -> Result<Self> {
        let spec = cfg.model_spec()?;
        Ok(if cfg.model.is_slice() {
            AnySampler::Slice(SliceSampler::new(spec, data, rng)?)
        } else {
            AnySampler::Finite(FiniteGibbs::new(spec, data, rng))
        })
    }

    pub fn sweep<R: rand::Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        match self {
            AnySampler::Finite(s) => s.sweep(rng),
            AnySampler::Slice(s) => s.sweep(rng),
        }
    }

    pub fn k_star(&self) -> usize {
        match self {
            AnySampler::Finite(s) => s.k_star(),
            AnySampler::Slice(s) => s.k_star(),
        }
    }

    pub fn occupied_clusters(&self) -> usize {
        match self {
            AnySampler::Finite(s) => s.occupied_clusters(),
            AnySampler::Slice(s) => s.occupied_clusters(),
        }
    }

    pub fn concentration_or_v(&self) -> f64 {
        match self {
            AnySampler::Finite(s) => s.concentration_or_v(),
            AnySampler::Slice(s) => s.concentration_or_v(),
        }
    }

    pub fn mixture_into(&self, weights: &mut Vec<f64>, atoms: &mut Vec<Atom>) {
        match self {
            AnySampler::Finite(s) => s.mixture_into(weights, atoms),
            AnySampler::Slice(s) => s.mixture_into(weights, atoms),
        }
    }
}

/// Density grid: `points` equally spaced values covering the data range
/// plus three sample standard deviations on each side.
pub fn default_grid(data: &[f64], points: usize) -> Vec<f64> {
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let var = data.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    let sd = var.sqrt();
    let lo = data.iter().cloned().fold(f64::INFINITY, f64::min) - 3.0 * sd;
    let hi = data.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 3.0 * sd;
    let step = (hi - lo) / (points as f64 - 1.0);
    (0..points).map(|i| lo + i as f64 * step).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct StatSummary {
    pub mean: f64,
    pub q025: f64,
    pub q975: f64,
}

impl StatSummary {
    fn from_series(xs: &[f64]) -> Self {
        // total_cmp: the betaseq models have no scalar weight parameter and
        // report NaN, which must not panic the sort (JSON emits null).
        let mut sorted = xs.to_vec();
        sorted.sort_by(f64::total_cmp);
        StatSummary {
            mean: xs.iter().sum::<f64>() / xs.len() as f64,
            q025: quantile_sorted(&sorted, 0.025),
            q975: quantile_sorted(&sorted, 0.975),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainSummary {
    pub chain: usize,
    pub elapsed_s: f64,
    pub mean_c_n: f64,
    pub mean_k_star: f64,
}

/// Contents of summary.json.
#[derive(Debug, Clone, Serialize)]
pub struct FitSummary {
    pub model: String,
    pub schedule: String,
    pub data_name: String,
    pub data_provenance: String,
    pub n: usize,
    pub iters: usize,
    pub burnin: usize,
    pub seed: u64,
    pub chains: usize,
    pub grid_points: usize,
    pub c_n: StatSummary,
    pub k_star: StatSummary,
    pub concentration_or_v: StatSummary,
    pub elapsed_s: f64,
    pub per_chain: Vec<ChainSummary>,
}

/// In-memory result of one chain, before pooling.
pub struct ChainRun {
    pub density: DensityAccumulator,
    pub c_n: Vec<f64>,
    pub k_star: Vec<f64>,
    pub conc_or_v: Vec<f64>,
    pub elapsed_s: f64,
}

/// Runs one chain, streaming trace rows to `trace_path` (every iteration,
/// including burn-in; post-burn-in draws feed the density and summary
/// accumulators).
pub fn run_chain(
    cfg: &RunConfig,
    dataset: &Dataset,
    chain_index: usize,
    grid: &[f64],
    trace_path: &Path,
) -> Result<ChainRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(chain_index as u64);
    let mut sampler = AnySampler::build(cfg, dataset.values.clone(), &mut rng)?;

    let file = fs::File::create(trace_path).map_err(|source| Error::Io {
        path: trace_path.into(),
        source,
    })?;
    let mut trace = BufWriter::new(file);
    writeln!(trace, "iter,c_n,k_star,conc_or_v,elapsed_s").map_err(|source| Error::Io {
        path: trace_path.into(),
        source,
    })?;

    let keep = cfg.iters - cfg.burnin;
    let mut density = DensityAccumulator::new(grid.to_vec(), cfg.density_thin);
    let mut c_n = Vec::with_capacity(keep);
    let mut k_star = Vec::with_capacity(keep);
    let mut conc = Vec::with_capacity(keep);
    let mut weights = Vec::new();
    let mut atoms = Vec::new();
    let mut scratch = Vec::new();

    let start = Instant::now();
    for iter in 1..=cfg.iters {
        sampler.sweep(&mut rng)?;
        let cn_now = sampler.occupied_clusters();
        let ks_now = sampler.k_star();
        let cv_now = sampler.concentration_or_v();
        debug_assert!(cn_now >= 1 && cn_now <= dataset.len().min(ks_now));
        writeln!(
            trace,
            "{iter},{cn_now},{ks_now},{cv_now},{:.6}",
            start.elapsed().as_secs_f64()
        )
        .map_err(|source| Error::Io {
            path: trace_path.into(),
            source,
        })?;

        if iter > cfg.burnin {
            sampler.mixture_into(&mut weights, &mut atoms);
            density.push_mixture(&weights, &atoms, &mut scratch);
            c_n.push(cn_now as f64);
            k_star.push(ks_now as f64);
            conc.push(cv_now);
        }
    }
    trace.flush().map_err(|source| Error::Io {
        path: trace_path.into(),
        source,
    })?;

    Ok(ChainRun {
        density,
        c_n,
        k_star,
        conc_or_v: conc,
        elapsed_s: start.elapsed().as_secs_f64(),
    })
}

fn trace_file_name(chain_index: usize) -> String {
    if chain_index == 0 {
        "trace.csv".into()
    } else {
        format!("trace{}.csv", chain_index + 1)
    }
}

/// Runs all configured chains (in parallel when chains > 1; chain RNG
/// streams are derived from the seed, so parallelism never changes output),
/// then writes density.csv, per-chain trace files, and summary.json into the
/// output directory.
pub fn run_fit(cfg: &RunConfig) -> Result<FitSummary> {
    cfg.validate()?;
    let dataset = cfg.load_data()?;
    fs::create_dir_all(&cfg.out).map_err(|source| Error::Io {
        path: cfg.out.clone(),
        source,
    })?;
    let grid = default_grid(&dataset.values, cfg.grid);

    let chain_paths: Vec<PathBuf> = (0..cfg.chains)
        .map(|c| cfg.out.join(trace_file_name(c)))
        .collect();

    let mut runs: Vec<ChainRun> = Vec::with_capacity(cfg.chains);
    if cfg.chains == 1 {
        runs.push(run_chain(cfg, &dataset, 0, &grid, &chain_paths[0])?);
    } else {
        let results: Vec<Result<ChainRun>> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..cfg.chains)
                .map(|c| {
                    let grid = &grid;
                    let dataset = &dataset;
                    let path = &chain_paths[c];
                    scope.spawn(move || run_chain(cfg, dataset, c, grid, path))
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        for r in results {
            runs.push(r?);
        }
    }

    // Pool density draws and summary series across chains.
    let mut pooled = runs[0].density.clone();
    for run in &runs[1..] {
        pooled.merge(&run.density);
    }
    let gather = |f: fn(&ChainRun) -> &Vec<f64>| -> Vec<f64> {
        runs.iter().flat_map(|r| f(r).iter().copied()).collect()
    };
    let c_n_all = gather(|r| &r.c_n);
    let k_star_all = gather(|r| &r.k_star);
    let conc_all = gather(|r| &r.conc_or_v);

    write_density_csv(&cfg.out.join("density.csv"), &pooled)?;

    let summary = FitSummary {
        model: cfg.model.as_str().into(),
        schedule: cfg.schedule.clone(),
        data_name: dataset.name.clone(),
        data_provenance: dataset.provenance.clone(),
        n: dataset.len(),
        iters: cfg.iters,
        burnin: cfg.burnin,
        seed: cfg.seed,
        chains: cfg.chains,
        grid_points: cfg.grid,
        c_n: StatSummary::from_series(&c_n_all),
        k_star: StatSummary::from_series(&k_star_all),
        concentration_or_v: StatSummary::from_series(&conc_all),
        elapsed_s: runs.iter().map(|r| r.elapsed_s).sum(),
        per_chain: runs
            .iter()
            .enumerate()
            .map(|(c, r)| ChainSummary {
                chain: c + 1,
                elapsed_s: r.elapsed_s,
                mean_c_n: r.c_n.iter().sum::<f64>() / r.c_n.len() as f64,
                mean_k_star: r.k_star.iter().sum::<f64>() / r.k_star.len() as f64,
            })
            .collect(),
    };
    let json_path = cfg.out.join("summary.json");
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(&json_path, json).map_err(|source| Error::Io {
        path: json_path,
        source,
    })?;
    Ok(summary)
}

fn write_density_csv(path: &Path, density: &DensityAccumulator) -> Result<()> {
    let mean = density.mean();
    let (lo, hi) = if density.stored_rows() >= 2 {
        density.band(0.95)
    } else {
        (mean.clone(), mean.clone())
    };
    let mut out = String::from("x,mean,lo95,hi95\n");
    for (((x, m), l), h) in density.grid().iter().zip(&mean).zip(&lo).zip(&hi) {
        out.push_str(&format!("{x},{m},{l},{h}\n"));
    }
    fs::write(path, out).map_err(|source| Error::Io {
        path: path.into(),
        source,
    })
}
