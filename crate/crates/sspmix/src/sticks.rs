//! Stick-breaking state, base measure, and the prior-level finite
//! representation of a proper species sampling process.
//!
//! A stick-breaking SSP has weights `w_1 = v_1`, `w_j = v_j prod_{l<j}(1-v_l)`
//! built from length variables `v_j` in (0,1). The finite representation
//! attaches a latent truncation level `K` with
//! `P(K = k | w) = (xi_k - xi_{k+1}) s_k`, `s_k = sum_{i<=k} w_i / xi_i`, and
//! reweighted atoms `w~_j = (w_j / xi_j) / s_k`; marginalizing over `K`
//! recovers the original random measure exactly.

use rand::Rng;
use rand_distr::{Beta as BetaDist, Distribution, Gamma as GammaDist, Normal as NormalDist};

use crate::error::{Error, Result};
use crate::schedule::Schedule;

/// Hard cap on sequential truncation searches (see `Error::DegenerateSchedule`).
pub const TRUNCATION_SEARCH_CAP: usize = 1_000_000;

/// Stick lengths are clamped into `[LENGTH_EPS, 1 - LENGTH_EPS]` so that
/// `ln(v)` and `ln(1 - v)` stay finite.
pub const LENGTH_EPS: f64 = 1e-15;

/// Law of the stick-breaking length variables.
#[derive(Debug, Clone, PartialEq)]
pub enum StickFamily {
    /// Dirichlet process: `v_j ~ Beta(1, alpha)` i.i.d. The concentration is
    /// mutable because it is itself resampled during MCMC.
    Dp { alpha: f64 },
    /// Independent `v_j ~ Beta(a, b0 + b1 * j)`. The affine rate covers the
    /// Pitman-Yor configuration `a = 1 - sigma`, `b_j = theta + j * sigma`.
    BetaSeq { a: f64, b0: f64, b1: f64 },
    /// Geometric stick-breaking: a single shared length `v`, so
    /// `w_j = v (1-v)^{j-1}`. No per-index lengths are stored.
    Gsb { v: f64 },
}

impl StickFamily {
    /// Beta parameters of the prior for the j-th length (1-based).
    pub fn length_prior(&self, j: usize) -> (f64, f64) {
        match *self {
            StickFamily::Dp { alpha } => (1.0, alpha),
            StickFamily::BetaSeq { a, b0, b1 } => (a, b0 + b1 * j as f64),
            StickFamily::Gsb { v: _ } => {
                unreachable!("GSB has no per-index length prior")
            }
        }
    }

    pub fn is_gsb(&self) -> bool {
        matches!(self, StickFamily::Gsb { .. })
    }
}

/// Lazily extended stick-breaking lengths, weights, and exact tail masses.
///
/// Tails are maintained as cumulative log-products `sum_{l<=j} ln(1 - v_l)`
/// and never by subtracting partial weight sums, which keeps the identity
/// `sum_{l>=j} w_l = prod_{l<j}(1 - v_l)` exact. For the natural schedule of
/// the finite representation this log-product is also `ln xi_j`.
#[derive(Debug, Clone)]
pub struct StickState {
    family: StickFamily,
    /// Instantiated lengths v_1..v_m (empty for GSB).
    lengths: Vec<f64>,
    /// `cum_log[j] = sum_{l=1..j} ln(1 - v_l)`, with `cum_log[0] = 0`.
    /// Always has `lengths.len() + 1` entries (two entries for GSB are
    /// implicit through the shared length instead).
    cum_log: Vec<f64>,
}

impl StickState {
    pub fn new(family: StickFamily) -> Self {
        if let StickFamily::Gsb { v } = family {
            assert!(v > 0.0 && v < 1.0, "GSB length must lie in (0,1)");
        }
        StickState {
            family,
            lengths: Vec::new(),
            cum_log: vec![0.0],
        }
    }

    pub fn family(&self) -> &StickFamily {
        &self.family
    }

    /// Number of instantiated lengths. Unbounded (usize::MAX) for GSB, where
    /// every index shares the same length.
    pub fn len(&self) -> usize {
        if self.family.is_gsb() {
            usize::MAX
        } else {
            self.lengths.len()
        }
    }

    pub fn is_empty(&self) -> bool {
        !self.family.is_gsb() && self.lengths.is_empty()
    }

    /// The shared GSB length.
    pub fn gsb_v(&self) -> f64 {
        match self.family {
            StickFamily::Gsb { v } => v,
            _ => panic!("gsb_v on a non-GSB stick state"),
        }
    }

    pub fn set_gsb_v(&mut self, v: f64) {
        match &mut self.family {
            StickFamily::Gsb { v: slot } => *slot = v.clamp(LENGTH_EPS, 1.0 - LENGTH_EPS),
            _ => panic!("set_gsb_v on a non-GSB stick state"),
        }
    }

    /// Dirichlet concentration parameter.
    pub fn dp_alpha(&self) -> f64 {
        match self.family {
            StickFamily::Dp { alpha } => alpha,
            _ => panic!("dp_alpha on a non-DP stick state"),
        }
    }

    pub fn set_dp_alpha(&mut self, alpha: f64) {
        match &mut self.family {
            StickFamily::Dp { alpha: slot } => *slot = alpha,
            _ => panic!("set_dp_alpha on a non-DP stick state"),
        }
    }

    /// Length v_j (1-based). Panics if not instantiated.
    pub fn length(&self, j: usize) -> f64 {
        assert!(j >= 1);
        match self.family {
            StickFamily::Gsb { v } => v,
            _ => self.lengths[j - 1],
        }
    }

    /// Weight `w_j = v_j prod_{l<j}(1 - v_l)` (1-based).
    pub fn weight(&self, j: usize) -> f64 {
        self.length(j) * self.log_tail(j).exp()
    }

    pub fn log_weight(&self, j: usize) -> f64 {
        self.length(j).ln() + self.log_tail(j)
    }

    /// `ln prod_{l<j}(1 - v_l) = ln sum_{l>=j} w_l`, the exact log tail mass
    /// ahead of index j (1-based; `log_tail(1) = 0`). Valid for
    /// `j <= len() + 1`.
    pub fn log_tail(&self, j: usize) -> f64 {
        assert!(j >= 1);
        match self.family {
            StickFamily::Gsb { v } => (j as f64 - 1.0) * (1.0 - v).ln(),
            _ => self.cum_log[j - 1],
        }
    }

    /// Draws lengths from the prior until at least `j` are instantiated.
    pub fn extend_to<R: Rng + ?Sized>(&mut self, j: usize, rng: &mut R) {
        if self.family.is_gsb() {
            return;
        }
        while self.lengths.len() < j {
            let next = self.lengths.len() + 1;
            let (a, b) = self.family.length_prior(next);
            let v = draw_beta(a, b, rng);
            self.push_length(v);
        }
    }

    /// Appends one length, updating the cumulative log tail.
    pub fn push_length(&mut self, v: f64) {
        assert!(!self.family.is_gsb(), "GSB sticks share a single length");
        let v = v.clamp(LENGTH_EPS, 1.0 - LENGTH_EPS);
        let last = *self.cum_log.last().unwrap();
        self.lengths.push(v);
        self.cum_log.push(last + (1.0 - v).ln());
    }

    /// Overwrites v_j (1-based) and rebuilds the affected log tails.
    pub fn set_length(&mut self, j: usize, v: f64) {
        assert!(!self.family.is_gsb(), "GSB sticks share a single length");
        assert!(j >= 1 && j <= self.lengths.len());
        self.lengths[j - 1] = v.clamp(LENGTH_EPS, 1.0 - LENGTH_EPS);
        for i in j..=self.lengths.len() {
            self.cum_log[i] = self.cum_log[i - 1] + (1.0 - self.lengths[i - 1]).ln();
        }
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }
}

fn draw_beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    BetaDist::new(a, b)
        .expect("Beta parameters must be positive")
        .sample(rng)
}

/// Independent Normal x Gamma base measure over component parameters:
/// `mu ~ N(mu0, 1/tau0)`, `tau ~ Gamma(shape, rate)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BaseMeasure {
    pub mu0: f64,
    pub tau0: f64,
    pub shape: f64,
    pub rate: f64,
}

impl BaseMeasure {
    pub fn new(mu0: f64, tau0: f64, shape: f64, rate: f64) -> Result<Self> {
        if !mu0.is_finite() || tau0 <= 0.0 || shape <= 0.0 || rate <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "base measure requires finite mu0 and positive tau0/shape/rate, got \
                 ({mu0}, {tau0}, {shape}, {rate})"
            )));
        }
        Ok(BaseMeasure {
            mu0,
            tau0,
            shape,
            rate,
        })
    }

    pub fn draw_atom<R: Rng + ?Sized>(&self, rng: &mut R) -> Atom {
        let mu = NormalDist::new(self.mu0, self.tau0.recip().sqrt())
            .unwrap()
            .sample(rng);
        // rand_distr parameterizes Gamma by shape/scale.
        let tau = GammaDist::new(self.shape, self.rate.recip())
            .unwrap()
            .sample(rng);
        Atom {
            mu,
            tau: tau.max(f64::MIN_POSITIVE),
        }
    }

    /// Log density of an atom under the product base measure.
    pub fn log_density(&self, atom: &Atom) -> f64 {
        crate::model::normal_logpdf(atom.mu, self.mu0, self.tau0)
            + gamma_logpdf(atom.tau, self.shape, self.rate)
    }
}

/// Component parameters of the Normal kernel: mean and precision.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Atom {
    pub mu: f64,
    pub tau: f64,
}

pub(crate) fn gamma_logpdf(x: f64, shape: f64, rate: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() - statrs::function::gamma::ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

pub(crate) fn beta_logpdf(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return f64::NEG_INFINITY;
    }
    use statrs::function::gamma::ln_gamma;
    (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() + ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b)
}

/// `P(K = k | w) = (xi_k - xi_{k+1}) sum_{i<=k} w_i / xi_i`.
///
/// Closed forms are used where the schedule and the weights share structure:
/// the natural schedule gives `w_k sum_{j<=k} v_j`, and GSB under its natural
/// schedule gives `k v^2 (1-v)^{k-1}` (computed with exactly that
/// arithmetic, so tests may compare bitwise). Extends the sticks on demand.
pub fn truncation_pmf<R: Rng + ?Sized>(
    sticks: &mut StickState,
    schedule: &Schedule,
    k: usize,
    rng: &mut R,
) -> f64 {
    assert!(k >= 1);
    match (schedule, &sticks.family) {
        (Schedule::Natural, StickFamily::Gsb { v }) => {
            k as f64 * v * v * (1.0 - v).powi(k as i32 - 1)
        }
        (Schedule::Natural, _) => {
            sticks.extend_to(k, rng);
            let sum_v: f64 = (1..=k).map(|j| sticks.length(j)).sum();
            sticks.weight(k) * sum_v
        }
        _ => {
            sticks.extend_to(k, rng);
            // log-sum-exp accumulation of s_k = sum w_i / xi_i; the summands
            // can overflow f64 for deep indices under fast-decaying schedules.
            let mut log_s = f64::NEG_INFINITY;
            for i in 1..=k {
                log_s = log_add_exp(log_s, sticks.log_weight(i) - schedule.log_xi(i, sticks));
            }
            let log_gap = schedule.log_xi_gap(k, sticks);
            (log_gap + log_s).exp()
        }
    }
}

/// Reweighted atoms of the finite representation given `K = k`:
/// `w~_j = (w_j / xi_j) / s_k`, paired with the first k atoms.
pub fn finite_representation<R: Rng + ?Sized>(
    sticks: &mut StickState,
    schedule: &Schedule,
    atoms: &[Atom],
    k: usize,
    rng: &mut R,
) -> (Vec<f64>, Vec<Atom>) {
    assert!(k >= 1);
    assert!(atoms.len() >= k, "need at least k atoms");
    let weights = finite_weights(sticks, schedule, k, rng);
    (weights, atoms[..k].to_vec())
}

/// The normalized weights of the finite representation given `K = k`.
pub fn finite_weights<R: Rng + ?Sized>(
    sticks: &mut StickState,
    schedule: &Schedule,
    k: usize,
    rng: &mut R,
) -> Vec<f64> {
    sticks.extend_to(k, rng);
    match (schedule, &sticks.family) {
        (Schedule::Natural, StickFamily::Gsb { .. }) => vec![1.0 / k as f64; k],
        (Schedule::Natural, _) => {
            let vs: Vec<f64> = (1..=k).map(|j| sticks.length(j)).collect();
            let s: f64 = vs.iter().sum();
            vs.iter().map(|v| v / s).collect()
        }
        _ => {
            let logs: Vec<f64> = (1..=k)
                .map(|j| sticks.log_weight(j) - schedule.log_xi(j, sticks))
                .collect();
            let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let unnorm: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
            let s: f64 = unnorm.iter().sum();
            unnorm.iter().map(|u| u / s).collect()
        }
    }
}

/// Samples the prior-level truncation `K` by sequential CDF inversion,
/// extending the sticks on the fly. The running normalizer `s_k` is
/// maintained incrementally, so a draw costs O(K).
pub fn sample_truncation<R: Rng + ?Sized>(
    sticks: &mut StickState,
    schedule: &Schedule,
    rng: &mut R,
) -> Result<usize> {
    match (schedule, sticks.family().clone()) {
        // k v^2 (1-v)^{k-1} is the pmf of 1 + NegBin(2, v), i.e. one plus
        // two independent geometric jumps; no scan needed.
        (Schedule::Natural, StickFamily::Gsb { v }) => {
            let g = rand_distr::Geometric::new(v).expect("GSB length lies in (0,1)");
            Ok(1 + g.sample(rng) as usize + g.sample(rng) as usize)
        }
        (Schedule::Natural, _) => {
            let u: f64 = rng.gen();
            let mut cdf = 0.0;
            let mut sum_v = 0.0;
            for k in 1..=TRUNCATION_SEARCH_CAP {
                sticks.extend_to(k, rng);
                sum_v += sticks.length(k);
                cdf += sticks.weight(k) * sum_v;
                if cdf >= u {
                    return Ok(k);
                }
            }
            Err(Error::DegenerateSchedule {
                cap: TRUNCATION_SEARCH_CAP,
            })
        }
        _ => {
            let u: f64 = rng.gen();
            let mut cdf = 0.0;
            let mut log_s = f64::NEG_INFINITY;
            for k in 1..=TRUNCATION_SEARCH_CAP {
                sticks.extend_to(k, rng);
                log_s = log_add_exp(log_s, sticks.log_weight(k) - schedule.log_xi(k, sticks));
                cdf += (schedule.log_xi_gap(k, sticks) + log_s).exp();
                if cdf >= u {
                    return Ok(k);
                }
            }
            Err(Error::DegenerateSchedule {
                cap: TRUNCATION_SEARCH_CAP,
            })
        }
    }
}

pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}
