//! Generalized slice sampler baseline (DPSlice / GSBSlice).
//!
//! Augments each observation with `u_i ~ Unif(0, xi_{z_i})` so the admissible
//! allocation set `{j : xi_j > u_i}` is finite. Under an exponential schedule
//! the induced per-observation truncation `max{j : xi_j > u_i}` equals the
//! closed-form draw `floor(z_i - ln(U)/eta)` of the discrete representation,
//! which is exactly the equivalence the validation suite certifies.

use rand::Rng;
use rand_distr::{Distribution, Normal as NormalDist};

use crate::diagnostics::occupied_clusters;
use crate::error::{Error, Result};
use crate::gibbs::{
    activate_through, case_b_beta_params, gsb_v_params_deterministic, update_all_atoms,
    update_concentration, MixtureSampler,
};
use crate::model::{
    log_weight_prior, normal_logpdf, recompute_counts, FamilySpec, LatentState, ModelSpec,
};
use crate::schedule::Schedule;
use crate::sticks::Atom;
use rand_distr::Beta as BetaDist;

/// One chain of the slice sampler. Reuses `LatentState`, with `state.k`
/// holding the slice-induced truncation levels.
#[derive(Debug, Clone)]
pub struct SliceSampler {
    pub spec: ModelSpec,
    pub data: Vec<f64>,
    pub state: LatentState,
    /// Slice variables, `u_i < xi_{z_i}`.
    pub u: Vec<f64>,
}

impl SliceSampler {
    pub fn new<R: Rng + ?Sized>(spec: ModelSpec, data: Vec<f64>, rng: &mut R) -> Result<Self> {
        if spec.schedule.is_natural() {
            return Err(Error::InvalidParameter(
                "the slice baseline requires a deterministic schedule (exp:<eta> or geom:<rho>)"
                    .into(),
            ));
        }
        assert!(!data.is_empty(), "sampler requires at least one observation");
        let n = data.len();
        let state = spec.init_state(&data, rng);
        let mut sampler = SliceSampler {
            spec,
            data,
            state,
            u: vec![0.0; n],
        };
        // Draw the slice variables from their conditional at z_i = 1.
        for i in 0..n {
            sampler.update_u(i, rng);
        }
        let max_k = *sampler.state.k.iter().max().unwrap();
        activate_through(&mut sampler.state, &sampler.spec, max_k, rng);
        sampler.state.k_star = max_k;
        Ok(sampler)
    }

    /// `u_i ~ Unif(0, xi_{z_i})`, plus the induced truncation bookkeeping.
    pub fn update_u<R: Rng + ?Sized>(&mut self, i: usize, rng: &mut R) -> f64 {
        let zi = self.state.z[i];
        let xi_z = self.spec.schedule.log_xi_det(zi).unwrap().exp();
        let mut unif: f64 = rng.gen();
        while unif == 0.0 {
            unif = rng.gen();
        }
        let u = unif * xi_z;
        self.u[i] = u;
        self.state.k[i] = max_admissible(&self.spec.schedule, u);
        u
    }

    /// `z_i` over the admissible set `{1..k_i}`, proportional to
    /// `(w_j / xi_j) f(x_i | theta_j)`.
    pub fn update_z<R: Rng + ?Sized>(&mut self, i: usize, rng: &mut R) -> usize {
        let ki = self.state.k[i];
        debug_assert!(ki <= self.state.k_star);
        let x = self.data[i];
        let mut logs = Vec::with_capacity(ki);
        let mut max = f64::NEG_INFINITY;
        for j in 1..=ki {
            let atom = &self.state.atoms[j - 1];
            let l = self.state.sticks.log_weight(j) - self.spec.schedule.log_xi_det(j).unwrap()
                + normal_logpdf(x, atom.mu, atom.tau);
            max = max.max(l);
            logs.push(l);
        }
        assert!(max > f64::NEG_INFINITY, "slice allocation row is all -inf");
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
                self.state.z[i] = idx + 1;
                return idx + 1;
            }
        }
        self.state.z[i] = ki;
        ki
    }

    /// Full cycle: atoms, sticks (standard Case B conditionals), slice
    /// variables and allocations, then the `k*` bookkeeping.
    pub fn sweep_once<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let counts = recompute_counts(&self.state);

        update_all_atoms(&mut self.state, &self.data, &self.spec, rng);

        match self.spec.family {
            FamilySpec::Gsb { a_v, b_v } => {
                let (a, b) = gsb_v_params_deterministic((a_v, b_v), self.state.n(), &self.state.z);
                let v = BetaDist::new(a, b).unwrap().sample(rng);
                self.state.sticks.set_gsb_v(v);
            }
            _ => {
                for j in 1..=self.state.k_star {
                    let prior = self.state.sticks.family().length_prior(j);
                    let (a, b) = case_b_beta_params(prior, counts.n[j - 1], counts.r[j - 1]);
                    let v = BetaDist::new(a, b).unwrap().sample(rng);
                    self.state.sticks.set_length(j, v);
                }
                if self.spec.family.is_dp() && !self.spec.freeze_concentration {
                    update_concentration(&mut self.state, &self.spec, rng);
                }
            }
        }

        for i in 0..self.data.len() {
            self.update_u(i, rng);
            let ki = self.state.k[i];
            if ki > self.state.k_star {
                activate_through(&mut self.state, &self.spec, ki, rng);
            }
            self.update_z(i, rng);
        }

        // Bookkeeping: k* tracks the largest admissible index.
        self.state.k_star = *self.state.k.iter().max().unwrap();
        Ok(())
    }
}

/// Largest j with `xi_j > u` for a deterministic schedule.
pub fn max_admissible(schedule: &Schedule, u: f64) -> usize {
    debug_assert!(u > 0.0);
    let lu = u.ln();
    let guess = match *schedule {
        Schedule::Exponential { eta } => (-lu / eta).floor() as i64,
        Schedule::Geometric { rho } => 1 + ((lu - (1.0 - rho).ln()) / rho.ln()).ceil() as i64 - 1,
        Schedule::Natural => panic!("max_admissible requires a deterministic schedule"),
    };
    let mut j = guess.max(1) as usize;
    while j > 1 && schedule.log_xi_det(j).unwrap() <= lu {
        j -= 1;
    }
    while schedule.log_xi_det(j + 1).unwrap() > lu {
        j += 1;
    }
    assert!(
        schedule.log_xi_det(j).unwrap() > lu,
        "no admissible index: u >= xi_1"
    );
    j
}

/// Log joint density of the slice augmentation
/// `p(w) prod_j p(theta_j) prod_i I(u_i < xi_{z_i}) xi_{z_i}^{-1} w_{z_i} f(x_i|theta_{z_i})`,
/// over the instantiated prefix `j <= k*`. Used by the consistency tests.
pub fn slice_log_joint(sampler: &SliceSampler) -> f64 {
    let state = &sampler.state;
    let spec = &sampler.spec;
    let mut lp = log_weight_prior(state, spec);
    for j in 1..=state.k_star {
        lp += spec.base.log_density(&state.atoms[j - 1]);
    }
    for ((&x, &zi), &ui) in sampler.data.iter().zip(&state.z).zip(&sampler.u) {
        let log_xi_z = spec.schedule.log_xi_det(zi).unwrap();
        if ui >= log_xi_z.exp() || ui <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let atom = &state.atoms[zi - 1];
        lp += state.sticks.log_weight(zi) - log_xi_z + normal_logpdf(x, atom.mu, atom.tau);
    }
    lp
}

impl MixtureSampler for SliceSampler {
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sticks::BaseMeasure;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn dp_slice_spec(eta: f64) -> ModelSpec {
        ModelSpec::new(
            BaseMeasure::new(0.0, 1.0, 2.0, 1.0).unwrap(),
            FamilySpec::Dp {
                a_alpha: 2.0,
                b_alpha: 2.0,
            },
            Schedule::exponential(eta).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn rejects_natural_schedule() {
        let spec = ModelSpec::new(
            BaseMeasure::new(0.0, 1.0, 2.0, 1.0).unwrap(),
            FamilySpec::Dp {
                a_alpha: 2.0,
                b_alpha: 2.0,
            },
            Schedule::Natural,
        )
        .unwrap();
        assert!(SliceSampler::new(spec, vec![0.0], &mut rng(0)).is_err());
    }

    #[test]
    fn slice_u_scaling_example() {
        // xi_{z} = e^{-1}, U = 0.5 -> u = 0.5 e^{-1}.
        let u = 0.5 * (-1.0f64).exp();
        assert!((u - 0.183_939_720_585_721_2).abs() < 1e-15);
    }

    #[test]
    fn admissible_set_examples() {
        let e1 = Schedule::exponential(1.0).unwrap();
        // u just below xi_1 leaves only {1}.
        let u = (-1.0f64).exp() * 0.999;
        assert_eq!(max_admissible(&e1, u), 1);
        // K(u) = floor(-ln u / eta) in the generic position.
        for &(u, expect) in &[(0.3f64, 1usize), (0.1, 2), (0.01, 4), (1e-6, 13)] {
            assert_eq!(max_admissible(&e1, u), expect, "u={u}");
            let brute = (1..1000)
                .take_while(|&j| e1.log_xi_det(j).unwrap().exp() > u)
                .count();
            assert_eq!(max_admissible(&e1, u), brute);
        }
        // Geometric schedule agrees with brute force.
        let g = Schedule::geometric(0.6).unwrap();
        for &u in &[0.39, 0.2, 0.05, 1e-4] {
            let brute = (1..1000)
                .take_while(|&j| g.log_xi_det(j).unwrap().exp() > u)
                .count();
            assert_eq!(max_admissible(&g, u), brute, "u={u}");
        }
    }

    #[test]
    fn induced_truncation_matches_closed_form() {
        // u_i = U xi_{z_i} => max admissible = floor(z_i - ln(U)/eta).
        let eta = 0.7;
        let e = Schedule::exponential(eta).unwrap();
        let mut r = rng(2);
        for _ in 0..10_000 {
            let z = 1 + (r.gen::<f64>() * 5.0) as usize;
            let unif: f64 = r.gen::<f64>().max(1e-300);
            let u = unif * e.log_xi_det(z).unwrap().exp();
            let induced = max_admissible(&e, u);
            let closed = (z as f64 - unif.ln() / eta).floor() as usize;
            assert_eq!(induced, closed, "z={z} U={unif}");
        }
    }

    #[test]
    fn support_invariant_after_sweeps() {
        let mut r = rng(4);
        let data = vec![0.2, -0.4, 3.8, 4.1, 0.0];
        let mut s = SliceSampler::new(dp_slice_spec(1.0), data, &mut r).unwrap();
        for _ in 0..300 {
            s.sweep_once(&mut r).unwrap();
            for (i, (&ui, &zi)) in s.u.iter().zip(&s.state.z).enumerate() {
                let xi_z = s.spec.schedule.log_xi_det(zi).unwrap().exp();
                assert!(ui < xi_z, "obs {i}: u {ui} >= xi_z {xi_z}");
                assert!(zi <= s.state.k[i]);
            }
            assert_eq!(s.state.k_star, *s.state.k.iter().max().unwrap());
            assert!(slice_log_joint(&s).is_finite());
        }
    }

    #[test]
    fn symmetric_admissible_atoms_split_evenly() {
        // Two admissible atoms with equal xi^{-1} w and equal likelihood
        // must each get probability one half.
        let mut r = rng(6);
        let mut s = SliceSampler::new(dp_slice_spec(1.0), vec![0.0], &mut r).unwrap();
        activate_through(&mut s.state, &dp_slice_spec(1.0), 2, &mut r);
        s.state.k_star = 2;
        s.state.k[0] = 2;
        s.state.atoms[0] = Atom { mu: -1.0, tau: 1.0 };
        s.state.atoms[1] = Atom { mu: 1.0, tau: 1.0 };
        // Force w_1 / xi_1 = w_2 / xi_2: w_2 = w_1 e^{-1}.
        let v1 = 0.4;
        let v2 = {
            // w_2 = v_2 (1 - v_1); want w_2 = w_1 e^{-eta} = v_1 e^{-1}.
            v1 * (-1.0f64).exp() / (1.0 - v1)
        };
        s.state.sticks.set_length(1, v1);
        s.state.sticks.set_length(2, v2);
        let n = 100_000;
        let mut ones = 0;
        for _ in 0..n {
            if s.update_z(0, &mut r) == 1 {
                ones += 1;
            }
        }
        let frac = ones as f64 / n as f64;
        assert!((frac - 0.5).abs() < 0.008, "frac {frac}");
    }

    #[test]
    fn slice_sweeps_reproducible() {
        let data = vec![0.2, -0.4, 3.8];
        let run = |seed: u64| {
            let mut r = rng(seed);
            let mut s = SliceSampler::new(dp_slice_spec(1.0), data.clone(), &mut r).unwrap();
            for _ in 0..40 {
                s.sweep_once(&mut r).unwrap();
            }
            (s.state.z.clone(), s.u.clone())
        };
        assert_eq!(run(3), run(3));
    }
}
