//! Run configuration: defaults, a flat TOML config file, and CLI overrides
//! (flags win over the file, the file wins over defaults).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FamilySpec, ModelSpec};
use crate::schedule::Schedule;
use crate::sticks::BaseMeasure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ModelKind {
    DpFinite,
    GsbFinite,
    BetaSeqFinite,
    DpSlice,
    GsbSlice,
}

impl ModelKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "dp-finite" => Ok(ModelKind::DpFinite),
            "gsb-finite" => Ok(ModelKind::GsbFinite),
            "betaseq-finite" => Ok(ModelKind::BetaSeqFinite),
            "dp-slice" => Ok(ModelKind::DpSlice),
            "gsb-slice" => Ok(ModelKind::GsbSlice),
            other => Err(Error::Config(format!(
                "unknown model '{other}' (expected dp-finite, gsb-finite, betaseq-finite, \
                 dp-slice, or gsb-slice)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::DpFinite => "dp-finite",
            ModelKind::GsbFinite => "gsb-finite",
            ModelKind::BetaSeqFinite => "betaseq-finite",
            ModelKind::DpSlice => "dp-slice",
            ModelKind::GsbSlice => "gsb-slice",
        }
    }

    pub fn is_slice(&self) -> bool {
        matches!(self, ModelKind::DpSlice | ModelKind::GsbSlice)
    }
}

/// Optional layer of settings, as read from a config file or CLI flags.
/// Every field mirrors `RunConfig`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    pub model: Option<String>,
    pub schedule: Option<String>,
    pub iters: Option<usize>,
    pub burnin: Option<usize>,
    pub seed: Option<u64>,
    pub chains: Option<usize>,
    pub data: Option<String>,
    pub grid: Option<usize>,
    pub out: Option<PathBuf>,
    pub mu0: Option<f64>,
    pub tau0: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub a_alpha: Option<f64>,
    pub b_alpha: Option<f64>,
    pub a_v: Option<f64>,
    pub b_v: Option<f64>,
    pub beta_a: Option<f64>,
    pub beta_b: Option<f64>,
    pub beta_b_slope: Option<f64>,
    pub freeze_concentration: Option<bool>,
    pub density_thin: Option<usize>,
}

impl ConfigLayer {
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.into(),
            source,
        })?;
        toml::from_str(&raw).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub model: ModelKind,
    pub schedule: String,
    pub iters: usize,
    pub burnin: usize,
    pub seed: u64,
    pub chains: usize,
    /// Path to a one-column CSV, or the literal "galaxy" for the bundled
    /// benchmark data.
    pub data: String,
    pub grid: usize,
    pub out: PathBuf,
    pub mu0: f64,
    /// Prior precision of the component means.
    pub tau0: f64,
    /// Gamma shape of the component precisions.
    pub a: f64,
    /// Gamma rate of the component precisions.
    pub b: f64,
    pub a_alpha: f64,
    pub b_alpha: f64,
    pub a_v: f64,
    pub b_v: f64,
    pub beta_a: f64,
    pub beta_b: f64,
    pub beta_b_slope: f64,
    pub freeze_concentration: bool,
    /// Keep every thin-th density row for the credible band (1 = all).
    pub density_thin: usize,
}

impl RunConfig {
    /// The weakly informative defaults of the experiments: base measure
    /// (0, 0.001, 0.001, 0.001), alpha ~ Gamma(0.1, 0.1), v ~ Beta(1, 1),
    /// 100000 iterations with 20000 burn-in, 500 grid points.
    pub fn resolve(layers: &[ConfigLayer]) -> Result<RunConfig> {
        macro_rules! pick {
            ($field:ident, $default:expr) => {
                layers
                    .iter()
                    .rev()
                    .find_map(|l| l.$field.clone())
                    .unwrap_or($default)
            };
        }
        let model = ModelKind::parse(&pick!(model, "dp-finite".into()))?;
        let schedule_default = if model.is_slice() { "exp:1" } else { "natural" };
        let cfg = RunConfig {
            model,
            schedule: pick!(schedule, schedule_default.into()),
            iters: pick!(iters, 100_000),
            burnin: pick!(burnin, 20_000),
            seed: pick!(seed, 1),
            chains: pick!(chains, 1),
            data: pick!(data, "galaxy".into()),
            grid: pick!(grid, 500),
            out: pick!(out, PathBuf::from("runs/out")),
            mu0: pick!(mu0, 0.0),
            tau0: pick!(tau0, 0.001),
            a: pick!(a, 0.001),
            b: pick!(b, 0.001),
            a_alpha: pick!(a_alpha, 0.1),
            b_alpha: pick!(b_alpha, 0.1),
            a_v: pick!(a_v, 1.0),
            b_v: pick!(b_v, 1.0),
            beta_a: pick!(beta_a, 1.0),
            beta_b: pick!(beta_b, 1.0),
            beta_b_slope: pick!(beta_b_slope, 0.0),
            freeze_concentration: pick!(freeze_concentration, false),
            density_thin: pick!(density_thin, 10),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.iters < 1 {
            return Err(Error::Config("iters must be >= 1".into()));
        }
        if self.burnin >= self.iters {
            return Err(Error::Config(format!(
                "burnin ({}) must be smaller than iters ({})",
                self.burnin, self.iters
            )));
        }
        if self.grid < 2 {
            return Err(Error::Config("grid must be >= 2".into()));
        }
        if self.chains < 1 {
            return Err(Error::Config("chains must be >= 1".into()));
        }
        if self.density_thin < 1 {
            return Err(Error::Config("density_thin must be >= 1".into()));
        }
        let schedule = self.parsed_schedule()?;
        if self.model.is_slice() && schedule.is_natural() {
            return Err(Error::Config(
                "slice models need a deterministic schedule (exp:<eta> or geom:<rho>)".into(),
            ));
        }
        Ok(())
    }

    pub fn parsed_schedule(&self) -> Result<Schedule> {
        Schedule::parse(&self.schedule)
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        let base = BaseMeasure::new(self.mu0, self.tau0, self.a, self.b)?;
        let family = match self.model {
            ModelKind::DpFinite | ModelKind::DpSlice => FamilySpec::Dp {
                a_alpha: self.a_alpha,
                b_alpha: self.b_alpha,
            },
            ModelKind::GsbFinite | ModelKind::GsbSlice => FamilySpec::Gsb {
                a_v: self.a_v,
                b_v: self.b_v,
            },
            ModelKind::BetaSeqFinite => FamilySpec::BetaSeq {
                a: self.beta_a,
                b0: self.beta_b,
                b1: self.beta_b_slope,
            },
        };
        let mut spec = ModelSpec::new(base, family, self.parsed_schedule()?)?;
        spec.freeze_concentration = self.freeze_concentration;
        Ok(spec)
    }

    /// Loads the configured dataset.
    pub fn load_data(&self) -> Result<crate::data::Dataset> {
        if self.data == "galaxy" {
            Ok(crate::data::galaxy())
        } else {
            crate::data::load_csv(Path::new(&self.data))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_experiment_settings() {
        let cfg = RunConfig::resolve(&[]).unwrap();
        assert_eq!(cfg.model, ModelKind::DpFinite);
        assert_eq!(cfg.schedule, "natural");
        assert_eq!(cfg.iters, 100_000);
        assert_eq!(cfg.burnin, 20_000);
        assert_eq!(cfg.grid, 500);
        assert_eq!((cfg.mu0, cfg.tau0, cfg.a, cfg.b), (0.0, 0.001, 0.001, 0.001));
        assert_eq!((cfg.a_alpha, cfg.b_alpha), (0.1, 0.1));
        assert_eq!((cfg.a_v, cfg.b_v), (1.0, 1.0));
    }

    #[test]
    fn layers_override_in_order() {
        let file: ConfigLayer = toml::from_str(
            r#"
            model = "gsb-finite"
            schedule = "exp:0.2"
            iters = 5000
            burnin = 1000
            "#,
        )
        .unwrap();
        let flags = ConfigLayer {
            schedule: Some("geom:0.5".into()),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(&[file, flags]).unwrap();
        assert_eq!(cfg.model, ModelKind::GsbFinite);
        assert_eq!(cfg.schedule, "geom:0.5"); // flag wins
        assert_eq!(cfg.iters, 5000);
    }

    #[test]
    fn unknown_keys_rejected() {
        let r: std::result::Result<ConfigLayer, _> = toml::from_str("itres = 100\n");
        assert!(r.is_err());
    }

    #[test]
    fn invariants_enforced() {
        let bad = ConfigLayer {
            iters: Some(10),
            burnin: Some(10),
            ..Default::default()
        };
        assert!(RunConfig::resolve(&[bad]).is_err());

        let bad_grid = ConfigLayer {
            iters: Some(10),
            burnin: Some(1),
            grid: Some(1),
            ..Default::default()
        };
        assert!(RunConfig::resolve(&[bad_grid]).is_err());

        let slice_natural = ConfigLayer {
            model: Some("dp-slice".into()),
            schedule: Some("natural".into()),
            ..Default::default()
        };
        assert!(RunConfig::resolve(&[slice_natural]).is_err());
    }

    #[test]
    fn slice_models_default_to_exp_schedule() {
        let layer = ConfigLayer {
            model: Some("dp-slice".into()),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(&[layer]).unwrap();
        assert_eq!(cfg.schedule, "exp:1");
        assert!(cfg.model_spec().is_ok());
    }

    #[test]
    fn model_spec_families() {
        let mk = |model: &str| {
            RunConfig::resolve(&[ConfigLayer {
                model: Some(model.into()),
                ..Default::default()
            }])
            .unwrap()
            .model_spec()
            .unwrap()
        };
        assert!(matches!(mk("dp-finite").family, FamilySpec::Dp { .. }));
        assert!(matches!(mk("gsb-finite").family, FamilySpec::Gsb { .. }));
        assert!(matches!(
            mk("betaseq-finite").family,
            FamilySpec::BetaSeq { .. }
        ));
    }
}
