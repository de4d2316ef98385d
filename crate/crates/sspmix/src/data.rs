//! Dataset ingestion: one-column CSV files, the bundled galaxy velocities,
//! and the four-component simulated mixture.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal as NormalDist};

use crate::error::{Error, Result};

/// Parameters of the simulated four-component normal mixture.
pub const SIM_WEIGHTS: [f64; 4] = [0.5, 0.2, 0.2, 0.1];
pub const SIM_MEANS: [f64; 4] = [-4.0, 0.0, 5.0, 8.0];
pub const SIM_SDS: [f64; 4] = [0.8, 1.0, 0.5, 1.5];

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub values: Vec<f64>,
    pub provenance: String,
}

impl Dataset {
    pub fn new(name: impl Into<String>, values: Vec<f64>, provenance: impl Into<String>) -> Self {
        let ds = Dataset {
            name: name.into(),
            values,
            provenance: provenance.into(),
        };
        assert!(!ds.values.is_empty(), "dataset must be nonempty");
        assert!(
            ds.values.iter().all(|v| v.is_finite()),
            "dataset values must be finite"
        );
        ds
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Velocities (1000 km/s) of 82 galaxies from the Corona Borealis region.
/// Bundled from the `galaxies` dataset of the MASS R package (version
/// 7.3-65, CRAN), divided by 1000 as is conventional for this benchmark.
pub fn galaxy() -> Dataset {
    let raw = include_str!("../data/galaxy.csv");
    let values = parse_csv_str(raw, Path::new("data/galaxy.csv")).expect("bundled data is valid");
    Dataset::new(
        "galaxy",
        values,
        "MASS 7.3-65 'galaxies' (CRAN), velocities of 82 galaxies, scaled to 1000 km/s",
    )
}

/// Loads a one-value-per-row CSV. A non-numeric first line is treated as a
/// header and skipped; any other malformed row is an error with its line
/// number.
pub fn load_csv(path: &Path) -> Result<Dataset> {
    let raw = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.into(),
        source,
    })?;
    let values = parse_csv_str(&raw, path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data".into());
    Ok(Dataset::new(name, values, format!("loaded from {}", path.display())))
}

fn parse_csv_str(raw: &str, path: &Path) -> Result<Vec<f64>> {
    let mut values = Vec::new();
    for (idx, line) in raw.lines().enumerate() {
        let trimmed = line.trim().trim_end_matches(',');
        if trimmed.is_empty() {
            continue;
        }
        match trimmed.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(v) => {
                return Err(Error::DataFormat {
                    path: path.into(),
                    line: idx + 1,
                    msg: format!("non-finite value {v}"),
                })
            }
            Err(_) if idx == 0 => continue, // header row
            Err(_) => {
                return Err(Error::DataFormat {
                    path: path.into(),
                    line: idx + 1,
                    msg: format!("could not parse '{trimmed}' as a number"),
                })
            }
        }
    }
    if values.is_empty() {
        return Err(Error::DataFormat {
            path: path.into(),
            line: 0,
            msg: "no numeric rows".into(),
        });
    }
    Ok(values)
}

/// Writes one value per row using the shortest decimal representation that
/// round-trips to the same f64, so write-then-load is bit-exact.
pub fn write_csv(path: &Path, values: &[f64], header: Option<&str>) -> Result<()> {
    let mut out = String::new();
    if let Some(h) = header {
        out.push_str(h);
        out.push('\n');
    }
    for v in values {
        out.push_str(&format!("{v}\n"));
    }
    let mut file = fs::File::create(path).map_err(|source| Error::Io {
        path: path.into(),
        source,
    })?;
    file.write_all(out.as_bytes()).map_err(|source| Error::Io {
        path: path.into(),
        source,
    })
}

/// Draws n observations from the four-component mixture
/// `0.5 N(-4, 0.8^2) + 0.2 N(0, 1) + 0.2 N(5, 0.5^2) + 0.1 N(8, 1.5^2)`.
pub fn simulate_mixture(n: usize, seed: u64) -> Dataset {
    use rand::SeedableRng;
    assert!(n >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.gen();
        let mut comp = SIM_WEIGHTS.len() - 1;
        let mut acc = 0.0;
        for (c, &w) in SIM_WEIGHTS.iter().enumerate() {
            acc += w;
            if u <= acc {
                comp = c;
                break;
            }
        }
        let x = NormalDist::new(SIM_MEANS[comp], SIM_SDS[comp])
            .unwrap()
            .sample(&mut rng);
        values.push(x);
    }
    Dataset::new(
        format!("sim4-n{n}-seed{seed}"),
        values,
        "four-component normal mixture, seeded generator",
    )
}

/// Density of the simulating mixture (the ground truth for recovery checks).
pub fn simulated_mixture_density(x: f64) -> f64 {
    SIM_WEIGHTS
        .iter()
        .zip(SIM_MEANS.iter())
        .zip(SIM_SDS.iter())
        .map(|((&w, &mu), &sd)| {
            let tau = 1.0 / (sd * sd);
            w * crate::model::normal_logpdf(x, mu, tau).exp()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn galaxy_is_canonical() {
        let g = galaxy();
        assert_eq!(g.len(), 82);
        let mean = g.values.iter().sum::<f64>() / 82.0;
        assert!((mean - 20.828_170_731_707_32).abs() < 1e-9, "mean {mean}");
        assert_eq!(g.values[0], 9.172);
        assert_eq!(*g.values.last().unwrap(), 34.279);
        assert!(g.values.windows(2).all(|w| w[0] <= w[1]), "sorted");
    }

    #[test]
    fn parse_basic_and_header() {
        let p = Path::new("test.csv");
        assert_eq!(parse_csv_str("1.0\n2.5\n", p).unwrap(), vec![1.0, 2.5]);
        assert_eq!(parse_csv_str("x\n1.0\n", p).unwrap(), vec![1.0]);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let p = Path::new("test.csv");
        let err = parse_csv_str("1.0\nabc\n", p).unwrap_err();
        match err {
            Error::DataFormat { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
        assert!(parse_csv_str("", p).is_err());
        assert!(parse_csv_str("header_only\n", p).is_err());
    }

    #[test]
    fn simulate_seed_reproducible() {
        let a = simulate_mixture(100, 7);
        let b = simulate_mixture(100, 7);
        assert_eq!(a.values, b.values);
        let c = simulate_mixture(100, 8);
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn simulate_moments_and_fractions() {
        let n = 1_000_000;
        let d = simulate_mixture(n, 1);
        let mean = d.values.iter().sum::<f64>() / n as f64;
        // E[X] = -0.2; Var = sum w(mu^2 + sd^2) - mean^2.
        let ex2: f64 = SIM_WEIGHTS
            .iter()
            .zip(SIM_MEANS.iter())
            .zip(SIM_SDS.iter())
            .map(|((&w, &m), &s)| w * (m * m + s * s))
            .sum();
        let sd = (ex2 - 0.04f64).sqrt();
        let se = sd / (n as f64).sqrt();
        assert!((mean + 0.2).abs() < 3.0 * se, "mean {mean}");

        // Component fractions via proximity (modes are well separated).
        let frac_low = d.values.iter().filter(|&&x| x < -2.0).count() as f64 / n as f64;
        assert!((frac_low - 0.5).abs() < 0.005, "low fraction {frac_low}");
    }

    #[test]
    fn csv_round_trip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sim.csv");
        let d = simulate_mixture(500, 42);
        write_csv(&path, &d.values, Some("x")).unwrap();
        let back = load_csv(&path).unwrap();
        assert_eq!(back.values, d.values);
    }

    #[test]
    fn true_density_integrates_to_one() {
        let step = 0.01;
        let integral: f64 = (0..4001)
            .map(|i| simulated_mixture_density(-12.0 + i as f64 * step) * step)
            .sum();
        assert!((integral - 1.0).abs() < 1e-4, "integral {integral}");
    }
}
