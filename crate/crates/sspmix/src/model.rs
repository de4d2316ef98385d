//! Hierarchical mixture model state and its joint density.
//!
//! Each observation carries an allocation `z_i` and an algorithmic
//! truncation level `k_i`; the joint density factorizes as
//!
//! ```text
//! p(x, z, k, theta, w) = p(w) prod_i (xi_{k_i} - xi_{k_i+1}) I(z_i <= k_i)
//!     * prod_{j<=k*} p(theta_j) (w_j / xi_j)^{n_j} prod_{i: z_i=j} N(x_i | mu_j, 1/tau_j)
//! ```
//!
//! with `k* = max_i k_i`. `p(w)` enters through the stick-length densities of
//! the instantiated prefix only; no density over infinite sequences is ever
//! evaluated.

use rand::Rng;
use rand_distr::{Beta as BetaDist, Distribution, Gamma as GammaDist};

use crate::error::{Error, Result};
use crate::schedule::Schedule;
use crate::sticks::{beta_logpdf, gamma_logpdf, Atom, BaseMeasure, StickFamily, StickState};

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Number of quantile blocks used to seed a chain.
pub const INIT_COMPONENTS: usize = 10;

pub fn normal_logpdf(x: f64, mu: f64, tau: f64) -> f64 {
    0.5 * (tau.ln() - LN_2PI) - 0.5 * tau * (x - mu) * (x - mu)
}

/// Which stick-breaking prior drives the weights, with its hyperpriors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FamilySpec {
    /// Dirichlet process with `alpha ~ Gamma(a_alpha, b_alpha)`.
    Dp { a_alpha: f64, b_alpha: f64 },
    /// Fixed Beta(a, b0 + b1 j) length priors (covers Pitman-Yor).
    BetaSeq { a: f64, b0: f64, b1: f64 },
    /// Geometric stick-breaking with `v ~ Beta(a_v, b_v)`.
    Gsb { a_v: f64, b_v: f64 },
}

impl FamilySpec {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            FamilySpec::Dp { a_alpha, b_alpha } => a_alpha > 0.0 && b_alpha > 0.0,
            FamilySpec::BetaSeq { a, b0, b1 } => a > 0.0 && b0 + b1 > 0.0 && b1 >= 0.0,
            FamilySpec::Gsb { a_v, b_v } => a_v > 0.0 && b_v > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "non-positive hyperparameter in {self:?}"
            )))
        }
    }

    pub fn is_gsb(&self) -> bool {
        matches!(self, FamilySpec::Gsb { .. })
    }

    pub fn is_dp(&self) -> bool {
        matches!(self, FamilySpec::Dp { .. })
    }
}

/// Full model specification: kernel base measure, weight prior, schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub base: BaseMeasure,
    pub family: FamilySpec,
    pub schedule: Schedule,
    /// Skip the concentration update, keeping alpha at its initial draw.
    pub freeze_concentration: bool,
}

impl ModelSpec {
    pub fn new(base: BaseMeasure, family: FamilySpec, schedule: Schedule) -> Result<Self> {
        family.validate()?;
        Ok(ModelSpec {
            base,
            family,
            schedule,
            freeze_concentration: false,
        })
    }

    /// Draws the top-level weight parameter (alpha or the GSB v) from its
    /// prior and returns the matching stick family.
    pub fn draw_stick_family<R: Rng + ?Sized>(&self, rng: &mut R) -> StickFamily {
        match self.family {
            FamilySpec::Dp { a_alpha, b_alpha } => StickFamily::Dp {
                alpha: GammaDist::new(a_alpha, b_alpha.recip())
                    .unwrap()
                    .sample(rng)
                    .max(f64::MIN_POSITIVE),
            },
            FamilySpec::BetaSeq { a, b0, b1 } => StickFamily::BetaSeq { a, b0, b1 },
            FamilySpec::Gsb { a_v, b_v } => StickFamily::Gsb {
                v: BetaDist::new(a_v, b_v)
                    .unwrap()
                    .sample(rng)
                    .clamp(crate::sticks::LENGTH_EPS, 1.0 - crate::sticks::LENGTH_EPS),
            },
        }
    }

    /// Forward draw from the full hierarchical prior: weights, per-
    /// observation truncations `k_i ~ P(K | w)`, allocations from the
    /// reweighted atoms, component parameters, and data. This is the
    /// marginal-conditional simulator of the Geweke test and the partition
    /// oracle's sampler.
    pub fn sample_prior<R: Rng + ?Sized>(
        &self,
        n: usize,
        rng: &mut R,
    ) -> Result<(LatentState, Vec<f64>)> {
        use crate::sticks::{finite_weights, sample_truncation, StickState};
        let mut sticks = StickState::new(self.draw_stick_family(rng));
        let mut z = vec![0usize; n];
        let mut k = vec![0usize; n];
        for i in 0..n {
            let ki = sample_truncation(&mut sticks, &self.schedule, rng)?;
            let w = finite_weights(&mut sticks, &self.schedule, ki, rng);
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut zi = ki;
            for (idx, &wj) in w.iter().enumerate() {
                acc += wj;
                if u <= acc {
                    zi = idx + 1;
                    break;
                }
            }
            z[i] = zi;
            k[i] = ki;
        }
        let k_star = k.iter().copied().max().unwrap_or(1).max(1);
        sticks.extend_to(k_star, rng);
        let atoms: Vec<Atom> = (0..k_star).map(|_| self.base.draw_atom(rng)).collect();
        let data: Vec<f64> = z
            .iter()
            .map(|&zi| {
                let atom = &atoms[zi - 1];
                rand_distr::Normal::new(atom.mu, atom.tau.recip().sqrt())
                    .unwrap()
                    .sample(rng)
            })
            .collect();
        Ok((
            LatentState {
                z,
                k,
                atoms,
                sticks,
                k_star,
            },
            data,
        ))
    }

    /// Dispersed initial state: observations are split into up to
    /// `INIT_COMPONENTS` quantile blocks, each block seeded with its own
    /// moment-matched atom, and `k_i` set to the block count.
    ///
    /// Starting instead from the one-cluster state is nearly absorbing under
    /// the weakly informative base measure: the Case A stick conditional
    /// pins v_1 at 1 and fresh base-measure atoms almost never produce a
    /// competitive likelihood, so the chain cannot nucleate new clusters at
    /// any useful rate.
    pub fn init_state<R: Rng + ?Sized>(&self, data: &[f64], rng: &mut R) -> LatentState {
        let n = data.len();
        assert!(n >= 1);
        let m0 = n.min(INIT_COMPONENTS);

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| data[a].partial_cmp(&data[b]).unwrap());
        let mut z = vec![0usize; n];
        for (rank, &i) in order.iter().enumerate() {
            z[i] = 1 + rank * m0 / n;
        }

        let grand_mean = data.iter().sum::<f64>() / n as f64;
        let grand_var = data
            .iter()
            .map(|x| (x - grand_mean) * (x - grand_mean))
            .sum::<f64>()
            / n as f64;
        let var_floor = (grand_var * 1e-6).max(1e-12);

        let mut atoms = Vec::with_capacity(m0);
        for j in 1..=m0 {
            let members: Vec<f64> = data
                .iter()
                .zip(&z)
                .filter(|(_, &zj)| zj == j)
                .map(|(&x, _)| x)
                .collect();
            let mean = members.iter().sum::<f64>() / members.len() as f64;
            let var = if members.len() > 1 {
                members.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
                    / (members.len() - 1) as f64
            } else {
                grand_var.max(var_floor)
            };
            atoms.push(Atom {
                mu: mean,
                tau: 1.0 / var.max(var_floor),
            });
        }

        let mut sticks = StickState::new(self.draw_stick_family(rng));
        sticks.extend_to(m0, rng);
        LatentState {
            z,
            k: vec![m0; n],
            atoms,
            sticks,
            k_star: m0,
        }
    }
}

/// Per-chain latent state of the finite-representation sampler.
#[derive(Debug, Clone)]
pub struct LatentState {
    /// Allocations, 1-based component indices.
    pub z: Vec<usize>,
    /// Per-observation truncation levels, `z_i <= k_i`.
    pub k: Vec<usize>,
    /// Component parameters through at least `k_star` (extras are inert).
    pub atoms: Vec<Atom>,
    pub sticks: StickState,
    /// Highest active component index, `max_i k_i` after bookkeeping.
    pub k_star: usize,
}

impl LatentState {
    pub fn n(&self) -> usize {
        self.z.len()
    }

    /// The scalar weight parameter recorded in traces: the DP concentration,
    /// the GSB length, or NaN for fixed Beta sequences.
    pub fn concentration_or_v(&self) -> f64 {
        match self.sticks.family() {
            StickFamily::Dp { alpha } => *alpha,
            StickFamily::Gsb { v } => *v,
            StickFamily::BetaSeq { .. } => f64::NAN,
        }
    }

    /// Panics if the structural invariants do not hold (programming error,
    /// as opposed to the support indicator which is a density-zero event).
    fn assert_consistent(&self) {
        assert_eq!(self.z.len(), self.k.len(), "z/k length mismatch");
        assert!(self.k_star >= 1);
        assert!(
            self.atoms.len() >= self.k_star,
            "atoms not instantiated through k_star"
        );
        assert!(
            self.sticks.len() >= self.k_star,
            "sticks not instantiated through k_star"
        );
        let max_k = self.k.iter().copied().max().unwrap_or(1);
        assert!(
            max_k <= self.k_star && self.sticks.len() >= max_k && self.atoms.len() >= max_k,
            "truncation levels exceed the instantiated state"
        );
    }
}

/// Occupancy and truncation counts for `j = 1..k_star`.
///
/// * `n[j-1]`: observations allocated to j;
/// * `m[j-1]`: observations with `k_i = j`;
/// * `h[j-1]`: observations with `k_i > j`;
/// * `r[j-1]`: observations with `z_i > j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counts {
    pub n: Vec<usize>,
    pub m: Vec<usize>,
    pub h: Vec<usize>,
    pub r: Vec<usize>,
}

pub fn recompute_counts(state: &LatentState) -> Counts {
    let ks = state.k_star;
    let mut n = vec![0usize; ks];
    let mut m = vec![0usize; ks];
    let mut h = vec![0usize; ks];
    let mut r = vec![0usize; ks];
    for (&zi, &ki) in state.z.iter().zip(&state.k) {
        if zi <= ks {
            n[zi - 1] += 1;
        }
        if ki <= ks {
            m[ki - 1] += 1;
        }
        // I(k_i > j) and I(z_i > j) as suffix counts.
        for j in 1..=ks.min(ki.saturating_sub(1)) {
            h[j - 1] += 1;
        }
        for j in 1..=ks.min(zi.saturating_sub(1)) {
            r[j - 1] += 1;
        }
    }
    Counts { n, m, h, r }
}

/// Log of the joint density, `-inf` when any `z_i > k_i`.
pub fn log_joint(state: &LatentState, data: &[f64], spec: &ModelSpec) -> f64 {
    state.assert_consistent();
    assert_eq!(data.len(), state.n(), "data/state length mismatch");

    if state.z.iter().zip(&state.k).any(|(&z, &k)| z > k || z == 0) {
        return f64::NEG_INFINITY;
    }

    let sticks = &state.sticks;
    let schedule = &spec.schedule;
    let mut lp = 0.0;

    // Truncation-gap terms, one per observation.
    for &ki in &state.k {
        lp += schedule.log_xi_gap(ki, sticks);
    }

    // Component blocks j = 1..k*.
    let counts = recompute_counts(state);
    for j in 1..=state.k_star {
        lp += spec.base.log_density(&state.atoms[j - 1]);
        let nj = counts.n[j - 1];
        if nj > 0 {
            let log_ratio = match schedule {
                // w_j / xi_j = v_j under the natural schedule.
                Schedule::Natural => sticks.length(j).ln(),
                _ => sticks.log_weight(j) - schedule.log_xi(j, sticks),
            };
            lp += nj as f64 * log_ratio;
        }
    }

    // Likelihood.
    for (&x, &zi) in data.iter().zip(&state.z) {
        let atom = &state.atoms[zi - 1];
        lp += normal_logpdf(x, atom.mu, atom.tau);
    }

    // Priors on the weight-generating variables (instantiated prefix only).
    lp += log_weight_prior(state, spec);
    lp
}

/// Prior terms for the stick lengths and their hyperparameters.
pub(crate) fn log_weight_prior(state: &LatentState, spec: &ModelSpec) -> f64 {
    let sticks = &state.sticks;
    match (spec.family, sticks.family()) {
        (FamilySpec::Dp { a_alpha, b_alpha }, StickFamily::Dp { alpha }) => {
            let mut lp = gamma_logpdf(*alpha, a_alpha, b_alpha);
            for j in 1..=state.k_star {
                lp += beta_logpdf(sticks.length(j), 1.0, *alpha);
            }
            lp
        }
        (FamilySpec::BetaSeq { .. }, StickFamily::BetaSeq { .. }) => {
            let mut lp = 0.0;
            for j in 1..=state.k_star {
                let (a, b) = sticks.family().length_prior(j);
                lp += beta_logpdf(sticks.length(j), a, b);
            }
            lp
        }
        (FamilySpec::Gsb { a_v, b_v }, StickFamily::Gsb { v }) => beta_logpdf(*v, a_v, b_v),
        _ => panic!("model spec and stick family disagree"),
    }
}
