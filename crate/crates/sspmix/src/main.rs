use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use sspmix::bench::{format_table, run_bench};
use sspmix::config::{ConfigLayer, RunConfig};
use sspmix::data::{simulate_mixture, write_csv};
use sspmix::runner::run_fit;
use sspmix::validation::run_default_battery;

#[derive(Parser)]
#[command(
    name = "sspmix",
    about = "Species sampling process mixtures via exact finite representations",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a dataset from the four-component benchmark mixture.
    Simulate {
        /// Number of observations.
        #[arg(long, default_value_t = 250)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an MCMC fit and write density.csv, trace.csv, summary.json.
    Fit(FitArgs),
    /// Run the validation battery and write a JSON report.
    Validate {
        #[arg(long, default_value_t = 20240501)]
        seed: u64,
        /// Reduced Monte Carlo budgets for quick feedback.
        #[arg(long)]
        quick: bool,
        /// Report path (JSON).
        #[arg(long, default_value = "validation.json")]
        out: PathBuf,
    },
    /// Time the sampler matrix on simulated data and write bench.json.
    Bench {
        /// Iterations per cell (the full comparison budget is 100000).
        #[arg(long, default_value_t = 100_000)]
        iters: usize,
        #[arg(long, default_value_t = 500)]
        grid: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Comma-separated sample sizes.
        #[arg(long, default_value = "250,1000", value_delimiter = ',')]
        n: Vec<usize>,
        #[arg(long, default_value = "bench.json")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct FitArgs {
    /// Config file (TOML key = value; flags override it).
    #[arg(long)]
    config: Option<PathBuf>,
    /// dp-finite | gsb-finite | betaseq-finite | dp-slice | gsb-slice
    #[arg(long)]
    model: Option<String>,
    /// natural | exp:<eta> | geom:<rho>
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    burnin: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    chains: Option<usize>,
    /// CSV path, or "galaxy" for the bundled data.
    #[arg(long)]
    data: Option<String>,
    /// Density grid size.
    #[arg(long)]
    grid: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    mu0: Option<f64>,
    #[arg(long)]
    tau0: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    a_alpha: Option<f64>,
    #[arg(long)]
    b_alpha: Option<f64>,
    #[arg(long)]
    a_v: Option<f64>,
    #[arg(long)]
    b_v: Option<f64>,
    #[arg(long)]
    beta_a: Option<f64>,
    #[arg(long)]
    beta_b: Option<f64>,
    #[arg(long)]
    beta_b_slope: Option<f64>,
    #[arg(long)]
    freeze_concentration: Option<bool>,
    #[arg(long)]
    density_thin: Option<usize>,
}

impl FitArgs {
    fn layers(&self) -> anyhow::Result<Vec<ConfigLayer>> {
        let mut layers = Vec::new();
        if let Some(path) = &self.config {
            layers.push(
                ConfigLayer::from_toml_file(path)
                    .with_context(|| format!("reading config {}", path.display()))?,
            );
        }
        layers.push(ConfigLayer {
            model: self.model.clone(),
            schedule: self.schedule.clone(),
            iters: self.iters,
            burnin: self.burnin,
            seed: self.seed,
            chains: self.chains,
            data: self.data.clone(),
            grid: self.grid,
            out: self.out.clone(),
            mu0: self.mu0,
            tau0: self.tau0,
            a: self.a,
            b: self.b,
            a_alpha: self.a_alpha,
            b_alpha: self.b_alpha,
            a_v: self.a_v,
            b_v: self.b_v,
            beta_a: self.beta_a,
            beta_b: self.beta_b,
            beta_b_slope: self.beta_b_slope,
            freeze_concentration: self.freeze_concentration,
            density_thin: self.density_thin,
        });
        Ok(layers)
    }
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Simulate { n, seed, out } => {
            let dataset = simulate_mixture(n, seed);
            write_csv(&out, &dataset.values, Some("x"))?;
            println!("wrote {} observations to {}", n, out.display());
        }
        Command::Fit(args) => {
            let cfg = RunConfig::resolve(&args.layers()?)?;
            let summary = run_fit(&cfg)?;
            println!(
                "{} ({}) on {}: n={} iters={} burnin={} chains={}",
                summary.model,
                summary.schedule,
                summary.data_name,
                summary.n,
                summary.iters,
                summary.burnin,
                summary.chains
            );
            println!(
                "posterior mean c_n = {:.3} [{:.1}, {:.1}], k* = {:.3}, elapsed {:.3}s",
                summary.c_n.mean,
                summary.c_n.q025,
                summary.c_n.q975,
                summary.k_star.mean,
                summary.elapsed_s
            );
            println!("artifacts in {}", cfg.out.display());
        }
        Command::Validate { seed, quick, out } => {
            let report = run_default_battery(seed, quick)?;
            for check in &report.checks {
                println!(
                    "{} {:<45} statistic {:>12.3e} vs {:>9.3e} ({})",
                    if check.pass { "PASS" } else { "FAIL" },
                    check.name,
                    check.statistic,
                    check.tolerance,
                    check.details
                );
            }
            std::fs::write(&out, serde_json::to_string_pretty(&report)?)?;
            println!("report written to {}", out.display());
            if !report.all_pass {
                anyhow::bail!("validation failed");
            }
        }
        Command::Bench {
            iters,
            grid,
            seed,
            n,
            out,
        } => {
            let report = run_bench(iters, grid, seed, &n)?;
            print!("{}", format_table(&report));
            std::fs::write(&out, serde_json::to_string_pretty(&report)?)?;
            println!("report written to {}", out.display());
        }
    }
    Ok(())
}
