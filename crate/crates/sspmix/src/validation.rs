//! Brute-force oracles and statistical tests certifying the finite
//! representation identities, the slice equivalence, and sampler
//! correctness. Every check is deterministic given (seed, config) and emits
//! a machine-readable pass/fail record.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::distribution::{ChiSquared, Continuous, ContinuousCDF};

use crate::error::Result;
use crate::gibbs::{
    case_a_beta_params, case_b_beta_params, concentration_params, gsb_v_params_deterministic,
    gsb_v_params_natural, FiniteGibbs, MixtureSampler,
};
use crate::model::{log_joint, recompute_counts, FamilySpec, LatentState, ModelSpec};
use crate::schedule::Schedule;
use crate::slice::{slice_log_joint, SliceSampler};
use crate::sticks::{truncation_pmf, Atom, BaseMeasure, StickFamily, StickState};

/// One named check: statistic vs tolerance.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub statistic: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub details: String,
}

impl CheckResult {
    fn leq(name: &str, statistic: f64, tolerance: f64, details: String) -> Self {
        CheckResult {
            name: name.into(),
            statistic,
            tolerance,
            pass: statistic.is_finite() && statistic <= tolerance,
            details,
        }
    }

    /// For p-value style checks where larger is better.
    fn geq(name: &str, statistic: f64, floor: f64, details: String) -> Self {
        CheckResult {
            name: name.into(),
            statistic,
            tolerance: floor,
            pass: statistic.is_finite() && statistic >= floor,
            details,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    pub all_pass: bool,
}

impl ValidationReport {
    pub fn new(seed: u64, checks: Vec<CheckResult>) -> Self {
        let all_pass = checks.iter().all(|c| c.pass);
        ValidationReport {
            seed,
            checks,
            all_pass,
        }
    }
}

// ---------------------------------------------------------------------------
// Representation identities
// ---------------------------------------------------------------------------

/// Normalization of the truncation pmf. With the exact telescoping
/// remainder, `sum_{k<=K} pmf(k) + xi_{K+1} s_K + sum_{j>K} w_j = 1` holds to
/// float accuracy for any K; the weight tail comes from the stick log
/// products, so both remainder terms are exact.
pub fn check_pmf_normalization(
    sticks: &mut StickState,
    schedule: &Schedule,
    k_max: usize,
    rng: &mut ChaCha8Rng,
) -> f64 {
    sticks.extend_to(k_max + 1, rng);
    let partial: f64 = (1..=k_max)
        .map(|k| truncation_pmf(sticks, schedule, k, rng))
        .sum();
    // log s_K = logsumexp of ln(w_i / xi_i).
    let mut log_s = f64::NEG_INFINITY;
    for i in 1..=k_max {
        log_s = crate::sticks::log_add_exp(
            log_s,
            sticks.log_weight(i) - schedule.log_xi(i, sticks),
        );
    }
    let remainder = (schedule.log_xi(k_max + 1, sticks) + log_s).exp();
    let weight_tail = sticks.log_tail(k_max + 1).exp();
    (partial + remainder + weight_tail - 1.0).abs()
}

/// Marginalization bridge: for each j, summing
/// `(xi_k - xi_{k+1}) w_j / xi_j` over `k = j..K` recovers `w_j` up to the
/// telescoping remainder `xi_{K+1} w_j / xi_j`.
pub fn check_marginalization_bridge(
    sticks: &mut StickState,
    schedule: &Schedule,
    k_max: usize,
    j_max: usize,
    rng: &mut ChaCha8Rng,
) -> f64 {
    sticks.extend_to(k_max + 1, rng);
    let mut worst: f64 = 0.0;
    for j in 1..=j_max {
        let log_ratio = sticks.log_weight(j) - schedule.log_xi(j, sticks);
        let sum: f64 = (j..=k_max)
            .map(|k| (schedule.log_xi_gap(k, sticks) + log_ratio).exp())
            .sum();
        let w_j = sticks.log_weight(j).exp();
        let remainder = (schedule.log_xi(k_max + 1, sticks) + log_ratio).exp();
        let err = (sum - w_j).abs() - remainder;
        worst = worst.max(err);
    }
    worst
}

/// GSB closed form: `pmf(k) == k v^2 (1-v)^{k-1}` with the
/// same arithmetic, plus the brute-force moment `E[K] = (2-v)/v`.
pub fn check_gsb_pmf_closed_form(v: f64, k_max: usize) -> (bool, f64) {
    let mut sticks = StickState::new(StickFamily::Gsb { v });
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut exact = true;
    let mut mean = 0.0;
    for k in 1..=k_max {
        let pmf = truncation_pmf(&mut sticks, &Schedule::Natural, k, &mut rng);
        let closed = k as f64 * v * v * (1.0 - v).powi(k as i32 - 1);
        if pmf != closed {
            exact = false;
        }
        mean += k as f64 * pmf;
    }
    let moment_err = (mean - (2.0 - v) / v).abs();
    (exact, moment_err)
}

/// Slice equivalence: the slice-induced truncation
/// `floor(z - ln(U)/eta)` follows the Case B closed-form pmf
/// `(xi_k - xi_{k+1}) / xi_z`. Returns (max exact-pmf error over k <= z+50,
/// chi-squared p-value of the simulation).
pub fn check_slice_truncation_equivalence(
    eta: f64,
    z: usize,
    draws: usize,
    rng: &mut ChaCha8Rng,
) -> (f64, f64) {
    let schedule = Schedule::exponential(eta).unwrap();
    let sticks = StickState::new(StickFamily::Dp { alpha: 1.0 });

    // Exact route: the ratio pmf equals a geometric law on {z, z+1, ...}.
    let mut max_err: f64 = 0.0;
    let log_xi_z = schedule.log_xi_det(z).unwrap();
    for k in z..=z + 50 {
        let ratio = (schedule.log_xi_gap(k, &sticks) - log_xi_z).exp();
        let geom = (1.0 - (-eta).exp()) * (-eta * (k - z) as f64).exp();
        max_err = max_err.max((ratio - geom).abs());
    }

    // Simulation route.
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for _ in 0..draws {
        let u: f64 = 1.0 - rng.gen::<f64>();
        let k = (z as f64 - u.ln() / eta).floor() as usize;
        *counts.entry(k).or_insert(0) += 1;
    }
    let p = chi_square_pvalue_vs_pmf(
        &counts,
        |k| {
            if k < z {
                0.0
            } else {
                (schedule.log_xi_gap(k, &sticks) - log_xi_z).exp()
            }
        },
        draws,
    );
    (max_err, p)
}

/// Prior partition oracle: mean occupied-cluster count from hierarchical
/// prior simulation vs the Chinese-restaurant expectation
/// `sum_{i=1}^n alpha / (alpha + i - 1)`. Returns (|diff|, 3 * MC s.e.).
pub fn check_prior_crp_moments(
    alpha: f64,
    n: usize,
    sims: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, f64)> {
    let spec = ModelSpec::new(
        BaseMeasure::new(0.0, 1.0, 1.0, 1.0).unwrap(),
        FamilySpec::Dp {
            a_alpha: 1.0,
            b_alpha: 1.0,
        },
        Schedule::Natural,
    )
    .unwrap();
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for _ in 0..sims {
        let (state, _) = sample_prior_with_fixed_alpha(&spec, alpha, n, rng)?;
        let c = crate::diagnostics::occupied_clusters(&state.z, state.k_star) as f64;
        sum += c;
        sumsq += c * c;
    }
    let mean = sum / sims as f64;
    let sd = (sumsq / sims as f64 - mean * mean).max(0.0).sqrt();
    let se = sd / (sims as f64).sqrt();
    let expect: f64 = (1..=n).map(|i| alpha / (alpha + (i - 1) as f64)).sum();
    Ok(((mean - expect).abs(), 3.0 * se))
}

/// Forward draw with the concentration pinned (the CRP oracle is stated for
/// fixed alpha, not under the Gamma hyperprior).
fn sample_prior_with_fixed_alpha(
    spec: &ModelSpec,
    alpha: f64,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(LatentState, Vec<f64>)> {
    use crate::sticks::{finite_weights, sample_truncation};
    let mut sticks = StickState::new(StickFamily::Dp { alpha });
    let mut z = vec![0usize; n];
    let mut k = vec![0usize; n];
    for i in 0..n {
        let ki = sample_truncation(&mut sticks, &spec.schedule, rng)?;
        let w = finite_weights(&mut sticks, &spec.schedule, ki, rng);
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
    let k_star = k.iter().copied().max().unwrap().max(1);
    sticks.extend_to(k_star, rng);
    let atoms = vec![Atom { mu: 0.0, tau: 1.0 }; k_star];
    Ok((
        LatentState {
            z,
            k,
            atoms,
            sticks,
            k_star,
        },
        Vec::new(),
    ))
}

// ---------------------------------------------------------------------------
// Chi-squared helper
// ---------------------------------------------------------------------------

/// Goodness-of-fit p-value of observed counts against a pmf, merging the
/// tail so every bucket has expected count >= 5.
pub fn chi_square_pvalue_vs_pmf(
    counts: &HashMap<usize, usize>,
    mut pmf: impl FnMut(usize) -> f64,
    draws: usize,
) -> f64 {
    let kmin = *counts.keys().min().expect("no observations");
    let total = draws as f64;
    let mut buckets: Vec<(f64, f64)> = Vec::new();
    let mut used_e = 0.0;
    let mut used_o = 0.0;
    let mut k = kmin;
    loop {
        let e = pmf(k) * total;
        if e < 5.0 {
            break;
        }
        let o = *counts.get(&k).unwrap_or(&0) as f64;
        buckets.push((o, e));
        used_e += e;
        used_o += o;
        k += 1;
        if buckets.len() > 10_000 {
            break;
        }
    }
    let tail_e = (total - used_e).max(0.0);
    let tail_o = total - used_o;
    if tail_e >= 5.0 {
        buckets.push((tail_o, tail_e));
    } else if let Some(last) = buckets.last_mut() {
        last.0 += tail_o;
        last.1 += tail_e;
    }
    if buckets.len() < 2 {
        return 1.0;
    }
    let t: f64 = buckets.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = (buckets.len() - 1) as f64;
    ChiSquared::new(dof).unwrap().sf(t)
}

// ---------------------------------------------------------------------------
// Conditional / joint consistency
// ---------------------------------------------------------------------------

/// Verifies that every full-conditional kernel matches the joint density:
/// for any single-coordinate change, the conditional log-density difference
/// must equal the log-joint difference. Runs over randomized tiny states and
/// returns the worst absolute discrepancy.
pub fn check_conditional_consistency(spec: &ModelSpec, reps: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;

    for _ in 0..reps {
        let n = 1 + rng.gen_range(0..5);
        let k_star = 2 + rng.gen_range(0..3);
        let state = random_state(spec, n, k_star, &mut rng);
        let data: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
        let counts = recompute_counts(&state);
        let base_lj = log_joint(&state, &data, spec);
        assert!(base_lj.is_finite());

        // Stick coordinates.
        match spec.family {
            FamilySpec::Gsb { a_v, b_v } => {
                let (a, b) = match spec.schedule {
                    Schedule::Natural => gsb_v_params_natural((a_v, b_v), n, &state.k),
                    _ => gsb_v_params_deterministic((a_v, b_v), n, &state.z),
                };
                let cand = rng.gen_range(0.05..0.95);
                let mut alt = state.clone();
                alt.sticks.set_gsb_v(cand);
                let d_joint = log_joint(&alt, &data, spec) - base_lj;
                let dist = statrs::distribution::Beta::new(a, b).unwrap();
                let d_cond = dist.ln_pdf(cand) - dist.ln_pdf(state.sticks.gsb_v());
                worst = worst.max((d_joint - d_cond).abs());
            }
            _ => {
                let j = 1 + rng.gen_range(0..k_star);
                let prior = state.sticks.family().length_prior(j);
                let (a, b) = if spec.schedule.is_natural() {
                    case_a_beta_params(prior, counts.n[j - 1], counts.m[j - 1], counts.h[j - 1])
                } else {
                    case_b_beta_params(prior, counts.n[j - 1], counts.r[j - 1])
                };
                let cand = rng.gen_range(0.05..0.95);
                let mut alt = state.clone();
                alt.sticks.set_length(j, cand);
                let d_joint = log_joint(&alt, &data, spec) - base_lj;
                let dist = statrs::distribution::Beta::new(a, b).unwrap();
                let d_cond = dist.ln_pdf(cand) - dist.ln_pdf(state.sticks.length(j));
                worst = worst.max((d_joint - d_cond).abs());
            }
        }

        // Concentration.
        if let FamilySpec::Dp { a_alpha, b_alpha } = spec.family {
            let (shape, rate) =
                concentration_params((a_alpha, b_alpha), &state.sticks.lengths()[..k_star]);
            let cand = 0.2 + rng.gen::<f64>() * 3.0;
            let mut alt = state.clone();
            alt.sticks.set_dp_alpha(cand);
            let d_joint = log_joint(&alt, &data, spec) - base_lj;
            let dist = statrs::distribution::Gamma::new(shape, rate).unwrap();
            let d_cond = dist.ln_pdf(cand) - dist.ln_pdf(state.sticks.dp_alpha());
            worst = worst.max((d_joint - d_cond).abs());
        }

        // Atom mean and precision.
        {
            let j = 1 + rng.gen_range(0..k_star);
            let members: Vec<f64> = data
                .iter()
                .zip(&state.z)
                .filter(|(_, &z)| z == j)
                .map(|(&x, _)| x)
                .collect();
            let nj = members.len() as f64;
            let sum: f64 = members.iter().sum();
            let atom = state.atoms[j - 1];

            let precision = spec.base.tau0 + nj * atom.tau;
            let mean = (spec.base.tau0 * spec.base.mu0 + atom.tau * sum) / precision;
            let cand_mu = mean + rng.gen::<f64>() - 0.5;
            let mut alt = state.clone();
            alt.atoms[j - 1].mu = cand_mu;
            let d_joint = log_joint(&alt, &data, spec) - base_lj;
            let dist = statrs::distribution::Normal::new(mean, precision.recip().sqrt()).unwrap();
            let d_cond = dist.ln_pdf(cand_mu) - dist.ln_pdf(atom.mu);
            worst = worst.max((d_joint - d_cond).abs());

            let ssd: f64 = members.iter().map(|x| (x - atom.mu) * (x - atom.mu)).sum();
            let (shape, rate) = (spec.base.shape + nj / 2.0, spec.base.rate + 0.5 * ssd);
            let cand_tau = 0.2 + rng.gen::<f64>() * 2.0;
            let mut alt = state.clone();
            alt.atoms[j - 1].tau = cand_tau;
            let d_joint = log_joint(&alt, &data, spec) - base_lj;
            let dist = statrs::distribution::Gamma::new(shape, rate).unwrap();
            let d_cond = dist.ln_pdf(cand_tau) - dist.ln_pdf(atom.tau);
            worst = worst.max((d_joint - d_cond).abs());
        }

        // Allocation z_i: kernel (w_j / xi_j) f(x_i | theta_j) on 1..k_i.
        {
            let i = rng.gen_range(0..n);
            let ki = state.k[i];
            let cand = 1 + rng.gen_range(0..ki);
            let mut alt = state.clone();
            alt.z[i] = cand;
            let d_joint = log_joint(&alt, &data, spec) - base_lj;
            let lw = |st: &LatentState, j: usize| -> f64 {
                let atom = &st.atoms[j - 1];
                let log_ratio = match spec.schedule {
                    Schedule::Natural => match st.sticks.family() {
                        StickFamily::Gsb { .. } => 0.0,
                        _ => st.sticks.length(j).ln(),
                    },
                    _ => st.sticks.log_weight(j) - spec.schedule.log_xi_det(j).unwrap(),
                };
                log_ratio + crate::model::normal_logpdf(data[i], atom.mu, atom.tau)
            };
            let d_cond = lw(&state, cand) - lw(&state, state.z[i]);
            worst = worst.max((d_joint - d_cond).abs());
        }

        // Truncation k_i: kernel (xi_k - xi_{k+1}) on {z_i, ..., k_star}.
        {
            let i = rng.gen_range(0..n);
            let zi = state.z[i];
            let cand = zi + rng.gen_range(0..=(k_star - zi));
            let mut alt = state.clone();
            alt.k[i] = cand;
            let d_joint = log_joint(&alt, &data, spec) - base_lj;
            let d_cond = spec.schedule.log_xi_gap(cand, &state.sticks)
                - spec.schedule.log_xi_gap(state.k[i], &state.sticks);
            worst = worst.max((d_joint - d_cond).abs());
        }
    }
    worst
}

/// Same game for the slice sampler's kernel, including the shared-v update
/// used for GSBSlice (the shared-length conditional under a
/// deterministic schedule).
pub fn check_slice_conditional_consistency(spec: &ModelSpec, reps: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..reps {
        let n = 1 + rng.gen_range(0..5);
        let data: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
        let mut sampler = SliceSampler::new(spec.clone(), data.clone(), &mut rng).unwrap();
        for _ in 0..5 {
            sampler.sweep_once(&mut rng).unwrap();
        }
        let base_lj = slice_log_joint(&sampler);
        assert!(base_lj.is_finite());
        let counts = recompute_counts(&sampler.state);
        let k_star = sampler.state.k_star;

        // Slice variable u_i: flat on (0, xi_{z_i}), zero outside.
        {
            let i = rng.gen_range(0..n);
            let xi_z = spec
                .schedule
                .log_xi_det(sampler.state.z[i])
                .unwrap()
                .exp();
            let mut alt = sampler.clone();
            alt.u[i] = rng.gen::<f64>() * xi_z;
            let d_joint = slice_log_joint(&alt) - base_lj;
            worst = worst.max(d_joint.abs());
            alt.u[i] = xi_z * (1.0 + rng.gen::<f64>());
            assert_eq!(slice_log_joint(&alt), f64::NEG_INFINITY);
        }

        // Allocation over the admissible set.
        {
            let i = rng.gen_range(0..n);
            let ki = sampler.state.k[i];
            let cand = 1 + rng.gen_range(0..ki);
            let mut alt = sampler.clone();
            alt.state.z[i] = cand;
            let d_joint = slice_log_joint(&alt) - base_lj;
            let lw = |j: usize| -> f64 {
                let atom = &sampler.state.atoms[j - 1];
                sampler.state.sticks.log_weight(j) - spec.schedule.log_xi_det(j).unwrap()
                    + crate::model::normal_logpdf(data[i], atom.mu, atom.tau)
            };
            let d_cond = lw(cand) - lw(sampler.state.z[i]);
            worst = worst.max((d_joint - d_cond).abs());
        }

        // Stick coordinates under the slice joint.
        match spec.family {
            FamilySpec::Gsb { a_v, b_v } => {
                let (a, b) = gsb_v_params_deterministic((a_v, b_v), n, &sampler.state.z);
                let cand = rng.gen_range(0.05..0.95);
                let mut alt = sampler.clone();
                alt.state.sticks.set_gsb_v(cand);
                let d_joint = slice_log_joint(&alt) - base_lj;
                let dist = statrs::distribution::Beta::new(a, b).unwrap();
                let d_cond = dist.ln_pdf(cand) - dist.ln_pdf(sampler.state.sticks.gsb_v());
                worst = worst.max((d_joint - d_cond).abs());
            }
            _ => {
                let j = 1 + rng.gen_range(0..k_star);
                let prior = sampler.state.sticks.family().length_prior(j);
                let (a, b) = case_b_beta_params(prior, counts.n[j - 1], counts.r[j - 1]);
                let cand = rng.gen_range(0.05..0.95);
                let mut alt = sampler.clone();
                alt.state.sticks.set_length(j, cand);
                let d_joint = slice_log_joint(&alt) - base_lj;
                let dist = statrs::distribution::Beta::new(a, b).unwrap();
                let d_cond = dist.ln_pdf(cand) - dist.ln_pdf(sampler.state.sticks.length(j));
                worst = worst.max((d_joint - d_cond).abs());
            }
        }
    }
    worst
}

/// Randomized consistent latent state for the consistency checks.
fn random_state(spec: &ModelSpec, n: usize, k_star: usize, rng: &mut ChaCha8Rng) -> LatentState {
    let mut sticks = StickState::new(spec.draw_stick_family(rng));
    sticks.extend_to(k_star, rng);
    let atoms: Vec<Atom> = (0..k_star)
        .map(|_| Atom {
            mu: rng.gen::<f64>() * 4.0 - 2.0,
            tau: 0.3 + rng.gen::<f64>() * 2.0,
        })
        .collect();
    let mut z = Vec::with_capacity(n);
    let mut k = Vec::with_capacity(n);
    for _ in 0..n {
        let ki = 1 + rng.gen_range(0..k_star);
        let zi = 1 + rng.gen_range(0..ki);
        z.push(zi);
        k.push(ki);
    }
    // Keep k_star = max k_i by pinning one observation at the top.
    if let Some(first) = k.first_mut() {
        *first = k_star;
    }
    LatentState {
        z,
        k,
        atoms,
        sticks,
        k_star,
    }
}

// ---------------------------------------------------------------------------
// Geweke joint-distribution test
// ---------------------------------------------------------------------------

pub const GEWEKE_STAT_NAMES: [&str; 5] = [
    "c_n",
    "k_star",
    "sum_active_lengths",
    "concentration_or_v",
    "data_mean",
];

#[derive(Debug, Clone, Serialize)]
pub struct GewekeStat {
    pub name: String,
    pub forward_mean: f64,
    pub forward_se: f64,
    pub chain_mean: f64,
    pub chain_se: f64,
    /// |mean difference| in combined standard errors.
    pub z_abs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GewekeOutcome {
    pub stats: Vec<GewekeStat>,
    pub max_z: f64,
}

fn geweke_stats(sampler: &FiniteGibbs) -> [f64; 5] {
    let n = sampler.data.len() as f64;
    [
        sampler.occupied_clusters() as f64,
        sampler.state.k_star as f64,
        sampler.sum_active_lengths(),
        sampler.concentration_or_v(),
        sampler.data.iter().sum::<f64>() / n,
    ]
}

/// Marginal-conditional vs successive-conditional simulation: if every full
/// conditional is correct, both target the same joint and the test-statistic
/// means agree up to Monte Carlo error.
pub fn run_geweke(spec: &ModelSpec, n: usize, iters: usize, seed: u64) -> Result<GewekeOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut forward: Vec<Vec<f64>> = (0..5).map(|_| Vec::with_capacity(iters)).collect();
    for _ in 0..iters {
        let (state, data) = spec.sample_prior(n, &mut rng)?;
        let sampler = FiniteGibbs::from_state(spec.clone(), data, state);
        for (acc, v) in forward.iter_mut().zip(geweke_stats(&sampler)) {
            acc.push(v);
        }
    }

    let (state, data) = spec.sample_prior(n, &mut rng)?;
    let mut sampler = FiniteGibbs::from_state(spec.clone(), data, state);
    let mut chain: Vec<Vec<f64>> = (0..5).map(|_| Vec::with_capacity(iters)).collect();
    for _ in 0..iters {
        sampler.sweep_once(&mut rng)?;
        sampler.resample_data(&mut rng);
        for (acc, v) in chain.iter_mut().zip(geweke_stats(&sampler)) {
            acc.push(v);
        }
    }

    let mut stats = Vec::with_capacity(5);
    let mut max_z: f64 = 0.0;
    for s in 0..5 {
        let (fm, fse) = mean_and_se_iid(&forward[s]);
        let (cm, cse) = mean_and_se_batched(&chain[s]);
        let z = (fm - cm).abs() / (fse * fse + cse * cse).sqrt().max(1e-300);
        max_z = max_z.max(z);
        stats.push(GewekeStat {
            name: GEWEKE_STAT_NAMES[s].into(),
            forward_mean: fm,
            forward_se: fse,
            chain_mean: cm,
            chain_se: cse,
            z_abs: z,
        });
    }
    Ok(GewekeOutcome { stats, max_z })
}

/// Cross-sampler agreement: the finite natural-schedule sampler and the
/// slice baseline target the same posterior, so their posterior mean
/// densities (pointwise) and mean c_n must agree within Monte Carlo error.
/// Returns the worst |z| over the compared statistics.
pub fn check_cross_sampler_agreement(seed: u64, sweeps: usize, burnin: usize) -> Result<f64> {
    use crate::diagnostics::mixture_density;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Two well-separated components.
    let data: Vec<f64> = (0..40)
        .map(|i| {
            let center = if i % 2 == 0 { -3.0 } else { 3.0 };
            center + 0.5 * gauss(&mut rng)
        })
        .collect();
    let grid = [-3.5, -3.0, -1.5, 0.0, 1.5, 3.0, 3.5];

    let base = BaseMeasure::new(0.0, 0.1, 2.0, 1.0).unwrap();
    let dp = FamilySpec::Dp {
        a_alpha: 2.0,
        b_alpha: 2.0,
    };
    let finite_spec = ModelSpec::new(base, dp, Schedule::Natural).unwrap();
    let slice_spec = ModelSpec::new(base, dp, Schedule::exponential(1.0).unwrap()).unwrap();

    fn collect<S: MixtureSampler>(
        mut sampler: S,
        grid: &[f64],
        sweeps: usize,
        burnin: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<Vec<f64>>> {
        let mut series: Vec<Vec<f64>> =
            (0..=grid.len()).map(|_| Vec::with_capacity(sweeps)).collect();
        let mut weights = Vec::new();
        let mut atoms = Vec::new();
        let mut row = vec![0.0; grid.len()];
        for t in 0..sweeps + burnin {
            sampler.sweep(rng)?;
            if t >= burnin {
                sampler.mixture_into(&mut weights, &mut atoms);
                mixture_density(&weights, &atoms, grid, &mut row);
                series[0].push(sampler.occupied_clusters() as f64);
                for (g, v) in row.iter().enumerate() {
                    series[g + 1].push(*v);
                }
            }
        }
        Ok(series)
    }

    let fin = collect(
        crate::gibbs::FiniteGibbs::new(finite_spec, data.clone(), &mut rng),
        &grid,
        sweeps,
        burnin,
        &mut rng,
    )?;
    let sli = collect(
        SliceSampler::new(slice_spec, data, &mut rng)?,
        &grid,
        sweeps,
        burnin,
        &mut rng,
    )?;
    let mut max_z: f64 = 0.0;
    for (a, b) in fin.iter().zip(&sli) {
        let (ma, sa) = mean_and_se_batched(a);
        let (mb, sb) = mean_and_se_batched(b);
        let z = (ma - mb).abs() / (sa * sa + sb * sb).sqrt().max(1e-12);
        max_z = max_z.max(z);
    }
    Ok(max_z)
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng)
}

fn mean_and_se_iid(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Standard error of an autocorrelated chain mean via batch means. Batches
/// are kept long (about 4 sqrt(n) each) so slowly mixing series do not
/// understate their variance too badly.
fn mean_and_se_batched(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    let nb = ((n as f64).sqrt() / 4.0).floor().max(10.0) as usize;
    let bs = n / nb;
    let used = nb * bs;
    let mean = xs[..used].iter().sum::<f64>() / used as f64;
    let batch_means: Vec<f64> = (0..nb)
        .map(|b| xs[b * bs..(b + 1) * bs].iter().sum::<f64>() / bs as f64)
        .collect();
    let var_b = batch_means
        .iter()
        .map(|m| (m - mean) * (m - mean))
        .sum::<f64>()
        / (nb as f64 - 1.0);
    (mean, (var_b / nb as f64).sqrt())
}

// ---------------------------------------------------------------------------
// Default battery
// ---------------------------------------------------------------------------

fn moderate_base() -> BaseMeasure {
    BaseMeasure::new(0.0, 1.0, 2.0, 1.0).unwrap()
}

pub fn geweke_configs() -> Vec<(String, ModelSpec)> {
    vec![
        (
            "dp-finite/natural".into(),
            ModelSpec::new(
                moderate_base(),
                FamilySpec::Dp {
                    a_alpha: 2.0,
                    b_alpha: 2.0,
                },
                Schedule::Natural,
            )
            .unwrap(),
        ),
        (
            "dp-finite/exp:1".into(),
            ModelSpec::new(
                moderate_base(),
                FamilySpec::Dp {
                    a_alpha: 2.0,
                    b_alpha: 2.0,
                },
                Schedule::exponential(1.0).unwrap(),
            )
            .unwrap(),
        ),
        (
            // Beta(2,2) keeps the prior-level truncation draws of the
            // forward simulator away from the v -> 0 blowup (E[K] = (2-v)/v).
            "gsb-finite/natural".into(),
            ModelSpec::new(
                moderate_base(),
                FamilySpec::Gsb { a_v: 2.0, b_v: 2.0 },
                Schedule::Natural,
            )
            .unwrap(),
        ),
    ]
}

/// The full validation battery. `quick` trims the Monte Carlo budgets for
/// day-to-day runs; the acceptance suite uses the full budgets.
pub fn run_default_battery(seed: u64, quick: bool) -> Result<ValidationReport> {
    let mut checks = Vec::new();
    let reps = if quick { 10 } else { 100 };
    let chi_draws = if quick { 100_000 } else { 1_000_000 };
    let geweke_iters = if quick { 20_000 } else { 200_000 };
    let crp_sims = if quick { 5_000 } else { 20_000 };

    // Representation identities over random stick realizations, all three schedule
    // families, plus the fixed half-stick cases.
    for (label, schedule) in [
        ("natural", Schedule::Natural),
        ("exp:1", Schedule::exponential(1.0).unwrap()),
        ("geom:0.5", Schedule::geometric(0.5).unwrap()),
    ] {
        let mut worst_norm: f64 = 0.0;
        let mut worst_bridge: f64 = 0.0;
        for rep in 0..reps {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (rep as u64) << 8);
            let mut sticks = StickState::new(StickFamily::Dp { alpha: 1.0 });
            worst_norm = worst_norm.max(check_pmf_normalization(
                &mut sticks,
                &schedule,
                300,
                &mut rng,
            ));
            let mut sticks = StickState::new(StickFamily::Dp { alpha: 1.0 });
            worst_bridge = worst_bridge.max(check_marginalization_bridge(
                &mut sticks,
                &schedule,
                300,
                20,
                &mut rng,
            ));
        }
        // Deterministic v = 0.5 sticks and the GSB prior as pinned cases.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut forced = StickState::new(StickFamily::Dp { alpha: 1.0 });
        for _ in 0..301 {
            forced.push_length(0.5);
        }
        worst_norm = worst_norm.max(check_pmf_normalization(&mut forced, &schedule, 300, &mut rng));
        let mut gsb = StickState::new(StickFamily::Gsb { v: 0.5 });
        worst_norm = worst_norm.max(check_pmf_normalization(&mut gsb, &schedule, 300, &mut rng));

        checks.push(CheckResult::leq(
            &format!("pmf_normalization/{label}"),
            worst_norm,
            1e-10,
            format!("{reps} random DP(1) realizations + pinned cases, K_max=300"),
        ));
        checks.push(CheckResult::leq(
            &format!("marginalization_bridge/{label}"),
            worst_bridge,
            1e-10,
            format!("{reps} random DP(1) realizations, j<=20, K_max=300"),
        ));
    }

    // GSB closed form.
    let mut worst_moment: f64 = 0.0;
    let mut all_exact = true;
    for &v in &[0.1, 0.3, 0.5, 0.9] {
        let (exact, moment_err) = check_gsb_pmf_closed_form(v, 2000);
        all_exact &= exact;
        worst_moment = worst_moment.max(moment_err);
    }
    checks.push(CheckResult::leq(
        "gsb_pmf_closed_form/exact",
        if all_exact { 0.0 } else { 1.0 },
        0.0,
        "bitwise equality of truncation_pmf with k v^2 (1-v)^(k-1)".into(),
    ));
    checks.push(CheckResult::leq(
        "gsb_pmf_closed_form/mean",
        worst_moment,
        1e-10,
        "brute-force E[K] vs (2-v)/v for v in {0.1,0.3,0.5,0.9}".into(),
    ));

    // Slice-equivalence of the induced truncations.
    for (eta, z) in [(1.0, 1usize), (0.2, 3), (1.0, 10)] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
        let (exact_err, p) = check_slice_truncation_equivalence(eta, z, chi_draws, &mut rng);
        checks.push(CheckResult::leq(
            &format!("slice_truncation_exact_pmf/eta={eta}/z={z}"),
            exact_err,
            1e-12,
            "closed-form pmf ratio vs geometric law, k <= z+50".into(),
        ));
        checks.push(CheckResult::geq(
            &format!("slice_truncation_chi2/eta={eta}/z={z}"),
            p,
            1e-3,
            format!("{chi_draws} simulated slice-induced truncations"),
        ));
    }

    // Prior partition oracle.
    {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x51ab);
        let (diff, bound) = check_prior_crp_moments(1.0, 82, crp_sims, &mut rng)?;
        checks.push(CheckResult::leq(
            "prior_crp_mean_c_n/alpha=1/n=82",
            diff,
            bound,
            format!("{crp_sims} hierarchical prior simulations vs harmonic sum"),
        ));
    }

    // Conditional/joint consistency, finite and slice kernels.
    for (label, spec) in all_consistency_specs() {
        let worst = check_conditional_consistency(&spec, 40, seed ^ 0x77);
        checks.push(CheckResult::leq(
            &format!("conditional_consistency/{label}"),
            worst,
            1e-10,
            "log-kernel ratio vs log-joint ratio on randomized tiny states".into(),
        ));
    }
    for (label, spec) in slice_consistency_specs() {
        let worst = check_slice_conditional_consistency(&spec, 40, seed ^ 0x99);
        checks.push(CheckResult::leq(
            &format!("slice_conditional_consistency/{label}"),
            worst,
            1e-10,
            "slice kernel vs slice joint on randomized tiny states".into(),
        ));
    }

    // Finite vs slice posterior agreement on a two-component toy set.
    {
        let (sweeps, burnin) = if quick { (8_000, 2_000) } else { (30_000, 5_000) };
        let max_z = check_cross_sampler_agreement(seed ^ 0x3c, sweeps, burnin)?;
        checks.push(CheckResult::leq(
            "cross_sampler_density_agreement",
            max_z,
            5.0,
            format!(
                "finite-natural vs slice-exp:1, {sweeps} sweeps, density grid + c_n; \
                 wide gate for the slowly mixing trough densities"
            ),
        ));
    }

    // Geweke joint-distribution test.
    for (label, spec) in geweke_configs() {
        let outcome = run_geweke(&spec, 5, geweke_iters, seed ^ 0x6e)?;
        checks.push(CheckResult::leq(
            &format!("geweke/{label}"),
            outcome.max_z,
            4.0,
            format!(
                "{geweke_iters} iterations; worst stat {}",
                outcome
                    .stats
                    .iter()
                    .max_by(|a, b| a.z_abs.partial_cmp(&b.z_abs).unwrap())
                    .map(|s| s.name.clone())
                    .unwrap_or_default()
            ),
        ));
    }

    Ok(ValidationReport::new(seed, checks))
}

pub fn all_consistency_specs() -> Vec<(String, ModelSpec)> {
    let base = moderate_base();
    let dp = FamilySpec::Dp {
        a_alpha: 2.0,
        b_alpha: 2.0,
    };
    let betaseq = FamilySpec::BetaSeq {
        a: 0.7,
        b0: 1.5,
        b1: 0.3,
    };
    let gsb = FamilySpec::Gsb { a_v: 1.0, b_v: 1.0 };
    vec![
        (
            "dp/natural".into(),
            ModelSpec::new(base, dp, Schedule::Natural).unwrap(),
        ),
        (
            "dp/exp:1".into(),
            ModelSpec::new(base, dp, Schedule::exponential(1.0).unwrap()).unwrap(),
        ),
        (
            "dp/geom:0.5".into(),
            ModelSpec::new(base, dp, Schedule::geometric(0.5).unwrap()).unwrap(),
        ),
        (
            "betaseq/natural".into(),
            ModelSpec::new(base, betaseq, Schedule::Natural).unwrap(),
        ),
        (
            "betaseq/exp:0.5".into(),
            ModelSpec::new(base, betaseq, Schedule::exponential(0.5).unwrap()).unwrap(),
        ),
        (
            "gsb/natural".into(),
            ModelSpec::new(base, gsb, Schedule::Natural).unwrap(),
        ),
        (
            "gsb/exp:1".into(),
            ModelSpec::new(base, gsb, Schedule::exponential(1.0).unwrap()).unwrap(),
        ),
    ]
}

pub fn slice_consistency_specs() -> Vec<(String, ModelSpec)> {
    let base = moderate_base();
    vec![
        (
            "dp-slice/exp:1".into(),
            ModelSpec::new(
                base,
                FamilySpec::Dp {
                    a_alpha: 2.0,
                    b_alpha: 2.0,
                },
                Schedule::exponential(1.0).unwrap(),
            )
            .unwrap(),
        ),
        (
            "gsb-slice/exp:1".into(),
            ModelSpec::new(
                base,
                FamilySpec::Gsb { a_v: 1.0, b_v: 1.0 },
                Schedule::exponential(1.0).unwrap(),
            )
            .unwrap(),
        ),
    ]
}
