//! Full-conditional updates and the sweep for the finite-representation
//! Gibbs samplers (DPFinite, BetaSeq-Finite, GSBFinite).
//!
//! Two regimes for the truncation machinery:
//!
//! * Case A (natural schedule): truncation levels interact with the stick
//!   lengths; `v_j | z,k ~ Beta(a_j + n_j + m_j, b_j + h_j)` and `k_i | z_i`
//!   is inverted over the exact stick tails, growing the state on the fly.
//! * Case B (deterministic schedule): the sticks get the standard conditionals
//!   `v_j | z ~ Beta(a_j + n_j, b_j + r_j)` and `k_i | z_i` has loop-free
//!   closed forms (floor formula for exponential, geometric jump otherwise).
//!
//! Components above `k_star` stay in the state but are inert; a reactivated
//! index is overwritten with fresh prior draws.

use rand::Rng;
use rand_distr::{Beta as BetaDist, Distribution, Gamma as GammaDist, Geometric, Normal as NormalDist};

use crate::diagnostics::occupied_clusters;
use crate::error::{Error, Result};
use crate::model::{normal_logpdf, recompute_counts, Counts, FamilySpec, LatentState, ModelSpec};
use crate::schedule::Schedule;
use crate::sticks::{Atom, BaseMeasure, StickFamily, TRUNCATION_SEARCH_CAP};

/// Common surface of the finite and slice samplers used by the run
/// orchestrator and the benchmark harness.
pub trait MixtureSampler {
    fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()>;
    fn n(&self) -> usize;
    fn k_star(&self) -> usize;
    fn occupied_clusters(&self) -> usize;
    fn concentration_or_v(&self) -> f64;
    /// Current draw's unnormalized first-`k_star` weights and atoms
    /// (the inner sum of the Monte Carlo density estimator).
    fn mixture_into(&self, weights: &mut Vec<f64>, atoms: &mut Vec<Atom>);
    /// Redraws every observation from its allocated component (used by the
    /// successive-conditional simulator of the Geweke test).
    fn resample_data<R: Rng + ?Sized>(&mut self, rng: &mut R);
    fn data(&self) -> &[f64];
}

// ---------------------------------------------------------------------------
// Conditional parameter algebra (pure, unit-tested against the closed forms)
// ---------------------------------------------------------------------------

/// Case A stick update: `Beta(a_j + n_j + m_j, b_j + h_j)`.
pub fn case_a_beta_params(prior: (f64, f64), n_j: usize, m_j: usize, h_j: usize) -> (f64, f64) {
    (prior.0 + (n_j + m_j) as f64, prior.1 + h_j as f64)
}

/// Case B stick update: `Beta(a_j + n_j, b_j + r_j)`.
pub fn case_b_beta_params(prior: (f64, f64), n_j: usize, r_j: usize) -> (f64, f64) {
    (prior.0 + n_j as f64, prior.1 + r_j as f64)
}

/// GSB shared-length update under its natural schedule:
/// `Beta(a + 2n, b + sum_i (k_i - 1))`.
pub fn gsb_v_params_natural(prior: (f64, f64), n: usize, k: &[usize]) -> (f64, f64) {
    let exceed: usize = k.iter().map(|&ki| ki - 1).sum();
    (prior.0 + 2.0 * n as f64, prior.1 + exceed as f64)
}

/// GSB shared-length update under a deterministic schedule, where only the
/// weights `w_{z_i} = v (1-v)^{z_i-1}` carry v: `Beta(a + n, b + sum_i (z_i - 1))`.
pub fn gsb_v_params_deterministic(prior: (f64, f64), n: usize, z: &[usize]) -> (f64, f64) {
    let exceed: usize = z.iter().map(|&zi| zi - 1).sum();
    (prior.0 + n as f64, prior.1 + exceed as f64)
}

/// Conjugate concentration update from the Beta(1, alpha) likelihood of the
/// instantiated lengths: `Gamma(a_alpha + k*, b_alpha - sum_{j<=k*} ln(1-v_j))`.
pub fn concentration_params(prior: (f64, f64), lengths: &[f64]) -> (f64, f64) {
    let log_sum: f64 = lengths
        .iter()
        .map(|&v| (1.0 - v.min(1.0 - 1e-15)).ln())
        .sum();
    (prior.0 + lengths.len() as f64, prior.1 - log_sum)
}

/// Semi-conjugate two-block atom draw under the independent Normal x Gamma
/// base measure: `mu | tau` then `tau | mu`, from the cluster sufficient
/// statistics. Empty clusters reduce to a base-measure draw.
pub fn atom_conditional_draw<R: Rng + ?Sized>(
    base: &BaseMeasure,
    n_j: usize,
    sum_x: f64,
    sumsq_x: f64,
    current_tau: f64,
    rng: &mut R,
) -> Atom {
    if n_j == 0 {
        return base.draw_atom(rng);
    }
    let nj = n_j as f64;
    let precision = base.tau0 + nj * current_tau;
    let mean = (base.tau0 * base.mu0 + current_tau * sum_x) / precision;
    let mu = NormalDist::new(mean, precision.recip().sqrt())
        .unwrap()
        .sample(rng);

    let ssd = (sumsq_x - 2.0 * mu * sum_x + nj * mu * mu).max(0.0);
    let shape = base.shape + nj / 2.0;
    let rate = base.rate + 0.5 * ssd;
    let tau = GammaDist::new(shape, rate.recip())
        .unwrap()
        .sample(rng)
        .max(f64::MIN_POSITIVE);
    Atom { mu, tau }
}

// ---------------------------------------------------------------------------
// Per-coordinate updates
// ---------------------------------------------------------------------------

/// Resamples component j's parameters from its full conditional.
pub fn update_atom<R: Rng + ?Sized>(
    j: usize,
    data: &[f64],
    state: &LatentState,
    spec: &ModelSpec,
    rng: &mut R,
) -> Atom {
    debug_assert!(j >= 1 && j <= state.k_star);
    let mut n_j = 0usize;
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for (&x, &zi) in data.iter().zip(&state.z) {
        if zi == j {
            n_j += 1;
            sum += x;
            sumsq += x * x;
        }
    }
    atom_conditional_draw(&spec.base, n_j, sum, sumsq, state.atoms[j - 1].tau, rng)
}

/// Resamples every atom through k* from one pass of per-cluster sufficient
/// statistics; equivalent to calling `update_atom` for each j in turn.
pub fn update_all_atoms<R: Rng + ?Sized>(
    state: &mut LatentState,
    data: &[f64],
    spec: &ModelSpec,
    rng: &mut R,
) {
    let ks = state.k_star;
    let mut n = vec![0usize; ks];
    let mut sum = vec![0.0; ks];
    let mut sumsq = vec![0.0; ks];
    for (&x, &zi) in data.iter().zip(&state.z) {
        n[zi - 1] += 1;
        sum[zi - 1] += x;
        sumsq[zi - 1] += x * x;
    }
    for j in 1..=ks {
        state.atoms[j - 1] = atom_conditional_draw(
            &spec.base,
            n[j - 1],
            sum[j - 1],
            sumsq[j - 1],
            state.atoms[j - 1].tau,
            rng,
        );
    }
}

/// Case A stick sweep over j = 1..k*.
pub fn update_sticks_case_a<R: Rng + ?Sized>(
    state: &mut LatentState,
    counts: &Counts,
    rng: &mut R,
) {
    for j in 1..=state.k_star {
        let prior = state.sticks.family().length_prior(j);
        let (a, b) = case_a_beta_params(prior, counts.n[j - 1], counts.m[j - 1], counts.h[j - 1]);
        let v = BetaDist::new(a, b).unwrap().sample(rng);
        state.sticks.set_length(j, v);
    }
}

/// Case B stick sweep over j = 1..k*.
pub fn update_sticks_case_b<R: Rng + ?Sized>(
    state: &mut LatentState,
    counts: &Counts,
    rng: &mut R,
) {
    for j in 1..=state.k_star {
        let prior = state.sticks.family().length_prior(j);
        let (a, b) = case_b_beta_params(prior, counts.n[j - 1], counts.r[j - 1]);
        let v = BetaDist::new(a, b).unwrap().sample(rng);
        state.sticks.set_length(j, v);
    }
}

/// Shared GSB length update; the sufficient statistics depend on whether the
/// schedule is the natural one or deterministic.
pub fn update_gsb_v<R: Rng + ?Sized>(state: &mut LatentState, spec: &ModelSpec, rng: &mut R) {
    let prior = match spec.family {
        FamilySpec::Gsb { a_v, b_v } => (a_v, b_v),
        _ => panic!("update_gsb_v on a non-GSB model"),
    };
    let n = state.n();
    let (a, b) = match spec.schedule {
        Schedule::Natural => gsb_v_params_natural(prior, n, &state.k),
        _ => gsb_v_params_deterministic(prior, n, &state.z),
    };
    let v = BetaDist::new(a, b).unwrap().sample(rng);
    state.sticks.set_gsb_v(v);
}

/// Conjugate concentration draw; returns the new alpha.
pub fn update_concentration<R: Rng + ?Sized>(
    state: &mut LatentState,
    spec: &ModelSpec,
    rng: &mut R,
) -> f64 {
    let prior = match spec.family {
        FamilySpec::Dp { a_alpha, b_alpha } => (a_alpha, b_alpha),
        _ => panic!("update_concentration on a non-DP model"),
    };
    let (shape, rate) = concentration_params(prior, &state.sticks.lengths()[..state.k_star]);
    let alpha = GammaDist::new(shape, rate.recip())
        .unwrap()
        .sample(rng)
        .max(f64::MIN_POSITIVE);
    state.sticks.set_dp_alpha(alpha);
    alpha
}

/// Allocation draw `z_i | k_i` over j = 1..k_i with log-sum-exp
/// normalization; `log_w_over_xi[j-1]` caches `ln(w_j / xi_j)` (for the
/// natural schedule this is `ln v_j`; constant and ignorable for GSB-natural).
pub fn update_allocation<R: Rng + ?Sized>(
    i: usize,
    data: &[f64],
    state: &mut LatentState,
    log_w_over_xi: &[f64],
    rng: &mut R,
) -> usize {
    let ki = state.k[i];
    let x = data[i];
    debug_assert!(ki <= log_w_over_xi.len());
    let mut logs = Vec::with_capacity(ki);
    let mut max = f64::NEG_INFINITY;
    for j in 1..=ki {
        let atom = &state.atoms[j - 1];
        let l = log_w_over_xi[j - 1] + normal_logpdf(x, atom.mu, atom.tau);
        max = max.max(l);
        logs.push(l);
    }
    assert!(max > f64::NEG_INFINITY, "allocation row is all -inf");
    let mut total = 0.0;
    for l in logs.iter_mut() {
        *l = (*l - max).exp();
        total += *l;
    }
    let u: f64 = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (idx, &p) in logs.iter().enumerate() {
        acc += p;
        if u <= acc {
            state.z[i] = idx + 1;
            return idx + 1;
        }
    }
    state.z[i] = ki;
    ki
}

/// Case A truncation draw `k_i | z_i` with pmf `w_k / T_{z_i}` on
/// `{z_i, z_i+1, ...}`, via tail inversion in log space: the stopping rule
/// `T_{k+1} <= (1-U) T_{z_i}` becomes a comparison of cumulative log tails.
/// Grows the sticks and atoms (fresh prior draws) past `k_star` as the search
/// explores the tail.
pub fn update_truncation_case_a<R: Rng + ?Sized>(
    i: usize,
    state: &mut LatentState,
    spec: &ModelSpec,
    rng: &mut R,
) -> Result<usize> {
    let zi = state.z[i];
    let u: f64 = rng.gen();
    // ln((1-U) T_{z_i}); U in [0,1) keeps the threshold finite.
    let log_threshold = (1.0 - u).ln() + state.sticks.log_tail(zi);
    let mut k = zi;
    loop {
        activate_through(state, spec, k, rng);
        if state.sticks.log_tail(k + 1) <= log_threshold {
            state.k[i] = k;
            return Ok(k);
        }
        k += 1;
        if k > TRUNCATION_SEARCH_CAP {
            return Err(Error::DegenerateSchedule {
                cap: TRUNCATION_SEARCH_CAP,
            });
        }
    }
}

/// Case B truncation draw under a deterministic schedule: the inverse-CDF
/// solution is loop-free.
pub fn update_truncation_case_b<R: Rng + ?Sized>(
    i: usize,
    state: &mut LatentState,
    schedule: &Schedule,
    rng: &mut R,
) -> usize {
    let zi = state.z[i];
    let k = match *schedule {
        // k_i = floor(z_i - ln(U)/eta), U ~ Unif(0,1).
        Schedule::Exponential { eta } => {
            let u: f64 = 1.0 - rng.gen::<f64>(); // (0, 1]
            (zi as f64 - u.ln() / eta).floor() as usize
        }
        // k_i = z_i + S, S ~ Geometric({0,1,...}, success 1 - rho).
        Schedule::Geometric { rho } => {
            let s = Geometric::new(1.0 - rho).unwrap().sample(rng) as usize;
            zi + s
        }
        Schedule::Natural => panic!("Case B truncation requires a deterministic schedule"),
    };
    state.k[i] = k;
    k
}

/// GSB truncation under the natural schedule: `k_i = z_i + S`,
/// `S ~ Geometric({0,1,...}, success v)`.
pub fn update_truncation_gsb<R: Rng + ?Sized>(
    i: usize,
    state: &mut LatentState,
    rng: &mut R,
) -> usize {
    let zi = state.z[i];
    let v = state.sticks.gsb_v();
    let s = Geometric::new(v).unwrap().sample(rng) as usize;
    state.k[i] = zi + s;
    state.k[i]
}

/// Ensures component slots through index j are active, overwriting inert
/// leftovers with fresh prior draws, and raises `k_star` to j.
pub fn activate_through<R: Rng + ?Sized>(
    state: &mut LatentState,
    spec: &ModelSpec,
    j: usize,
    rng: &mut R,
) {
    while state.k_star < j {
        let idx = state.k_star + 1;
        let atom = spec.base.draw_atom(rng);
        if idx <= state.atoms.len() {
            state.atoms[idx - 1] = atom;
        } else {
            state.atoms.push(atom);
        }
        if !state.sticks.family().is_gsb() {
            let (a, b) = state.sticks.family().length_prior(idx);
            let v = BetaDist::new(a, b).unwrap().sample(rng);
            if idx <= state.sticks.lengths().len() {
                state.sticks.set_length(idx, v);
            } else {
                state.sticks.push_length(v);
            }
        }
        state.k_star = idx;
    }
}

/// Sets `k* = max_i k_i`, activating new components if the truncation
/// updates moved past the previous maximum (Case B and GSB; under Case A the
/// growth already happened during the tail search and this is bookkeeping).
pub fn bookkeeping_kstar<R: Rng + ?Sized>(
    state: &mut LatentState,
    spec: &ModelSpec,
    rng: &mut R,
) -> usize {
    let k0 = state.k.iter().copied().max().unwrap_or(state.k_star).max(1);
    if k0 > state.k_star {
        activate_through(state, spec, k0, rng);
    }
    state.k_star = k0;
    k0
}

// ---------------------------------------------------------------------------
// The sampler
// ---------------------------------------------------------------------------

/// One chain of the finite-representation Gibbs sampler. Owns its data copy
/// and latent state; independent chains use independent RNG streams.
#[derive(Debug, Clone)]
pub struct FiniteGibbs {
    pub spec: ModelSpec,
    pub data: Vec<f64>,
    pub state: LatentState,
    /// Scratch: `ln(w_j / xi_j)` for j = 1..k* at the start of the
    /// per-observation pass.
    log_w_over_xi: Vec<f64>,
}

impl FiniteGibbs {
    pub fn new<R: Rng + ?Sized>(spec: ModelSpec, data: Vec<f64>, rng: &mut R) -> Self {
        assert!(!data.is_empty(), "sampler requires at least one observation");
        let state = spec.init_state(&data, rng);
        FiniteGibbs {
            spec,
            data,
            state,
            log_w_over_xi: Vec::new(),
        }
    }

    /// Starts a chain from an explicit state (Geweke and tests).
    pub fn from_state(spec: ModelSpec, data: Vec<f64>, state: LatentState) -> Self {
        FiniteGibbs {
            spec,
            data,
            state,
            log_w_over_xi: Vec::new(),
        }
    }

    fn refresh_weight_cache(&mut self) {
        let ks = self.state.k_star;
        self.log_w_over_xi.clear();
        self.log_w_over_xi.reserve(ks);
        for j in 1..=ks {
            let lw = match (&self.spec.schedule, self.state.sticks.family()) {
                // Equal reweighted atoms: the constant cancels in the draw.
                (Schedule::Natural, StickFamily::Gsb { .. }) => 0.0,
                (Schedule::Natural, _) => self.state.sticks.length(j).ln(),
                (sched, _) => self.state.sticks.log_weight(j) - sched.log_xi_det(j).unwrap(),
            };
            self.log_w_over_xi.push(lw);
        }
    }

    /// One full Gibbs cycle: atoms, stick lengths (and alpha or the shared
    /// GSB v), the per-observation joint `(z_i, k_i)` pass, and the `k*`
    /// bookkeeping update.
    pub fn sweep_once<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let counts = recompute_counts(&self.state);

        update_all_atoms(&mut self.state, &self.data, &self.spec, rng);

        match self.spec.family {
            FamilySpec::Gsb { .. } => update_gsb_v(&mut self.state, &self.spec, rng),
            _ => {
                if self.spec.schedule.is_natural() {
                    update_sticks_case_a(&mut self.state, &counts, rng);
                } else {
                    update_sticks_case_b(&mut self.state, &counts, rng);
                }
                if self.spec.family.is_dp() && !self.spec.freeze_concentration {
                    update_concentration(&mut self.state, &self.spec, rng);
                }
            }
        }

        self.refresh_weight_cache();
        for i in 0..self.data.len() {
            update_allocation(i, &self.data, &mut self.state, &self.log_w_over_xi, rng);
            match (&self.spec.schedule, self.spec.family.is_gsb()) {
                (Schedule::Natural, true) => {
                    update_truncation_gsb(i, &mut self.state, rng);
                }
                (Schedule::Natural, false) => {
                    update_truncation_case_a(i, &mut self.state, &self.spec, rng)?;
                }
                (sched, _) => {
                    let sched = *sched;
                    update_truncation_case_b(i, &mut self.state, &sched, rng);
                }
            }
        }

        bookkeeping_kstar(&mut self.state, &self.spec, rng);
        Ok(())
    }

    /// Sum of the instantiated stick lengths through k* (a Geweke statistic).
    pub fn sum_active_lengths(&self) -> f64 {
        match self.state.sticks.family() {
            StickFamily::Gsb { v } => *v * self.state.k_star as f64,
            _ => (1..=self.state.k_star)
                .map(|j| self.state.sticks.length(j))
                .sum(),
        }
    }
}

impl MixtureSampler for FiniteGibbs {
    fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        self.sweep_once(rng)
    }

    fn n(&self) -> usize {
        self.data.len()
    }

    fn k_star(&self) -> usize {
        self.state.k_star
    }

    fn occupied_clusters(&self) -> usize {
        occupied_clusters(&self.state.z, self.state.k_star)
    }

    fn concentration_or_v(&self) -> f64 {
        self.state.concentration_or_v()
    }

    fn mixture_into(&self, weights: &mut Vec<f64>, atoms: &mut Vec<Atom>) {
        weights.clear();
        atoms.clear();
        for j in 1..=self.state.k_star {
            weights.push(self.state.sticks.weight(j));
            atoms.push(self.state.atoms[j - 1]);
        }
    }

    fn resample_data<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for (x, &zi) in self.data.iter_mut().zip(&self.state.z) {
            let atom = &self.state.atoms[zi - 1];
            *x = NormalDist::new(atom.mu, atom.tau.recip().sqrt())
                .unwrap()
                .sample(rng);
        }
    }

    fn data(&self) -> &[f64] {
        &self.data
    }
}
