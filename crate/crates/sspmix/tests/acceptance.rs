//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its runtime (run with `cargo test --test acceptance -- --nocapture` to see
//! them). Tolerances are pinned in code.

use std::collections::HashMap;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sspmix::bench::run_bench;
use sspmix::config::{ConfigLayer, RunConfig};
use sspmix::data::{galaxy, simulate_mixture, simulated_mixture_density};
use sspmix::runner::run_fit;
use sspmix::schedule::Schedule;
use sspmix::sticks::{StickFamily, StickState};
use sspmix::validation::{
    all_consistency_specs, check_conditional_consistency, check_gsb_pmf_closed_form,
    check_marginalization_bridge, check_pmf_normalization, check_prior_crp_moments,
    check_slice_conditional_consistency, check_slice_truncation_equivalence, geweke_configs,
    run_geweke,
    slice_consistency_specs,
};

/// Pilot-derived L1 bound for the simulated-data density recovery. Pilot
/// runs (n = 250, 2e4 iterations) measured L1 distances of 0.204-0.211
/// across seeds for the natural schedule and 0.207 for exp:1, essentially
/// the information limit at this sample size (an oracle-bandwidth KDE on the
/// same data reaches 0.179, Silverman 0.600). Frozen at ~1.45x the worst
/// pilot value.
const SIM_DENSITY_L1_BOUND: f64 = 0.30;

fn report(criterion: usize, desc: &str, start: Instant) {
    println!(
        "PASS criterion {criterion}: {desc} ({:.2}s)",
        start.elapsed().as_secs_f64()
    );
}

#[test]
fn acceptance_1_representation_identities() {
    let start = Instant::now();
    let schedules = [
        ("natural", Schedule::Natural),
        ("exp:1", Schedule::exponential(1.0).unwrap()),
        ("geom:0.5", Schedule::geometric(0.5).unwrap()),
    ];
    for (label, schedule) in schedules {
        for rep in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + rep);
            let mut sticks = StickState::new(StickFamily::Dp { alpha: 1.0 });
            let norm_err = check_pmf_normalization(&mut sticks, &schedule, 300, &mut rng);
            assert!(
                norm_err <= 1e-10,
                "{label} rep {rep}: normalization error {norm_err}"
            );
            let mut sticks = StickState::new(StickFamily::Dp { alpha: 1.0 });
            let bridge_err =
                check_marginalization_bridge(&mut sticks, &schedule, 300, 20, &mut rng);
            assert!(
                bridge_err <= 1e-10,
                "{label} rep {rep}: bridge error {bridge_err}"
            );
        }
    }
    assert!(start.elapsed().as_secs_f64() < 10.0, "criterion 1 over budget");
    report(
        1,
        "pmf normalization and marginalization bridge at 1e-10, 100 stick realizations x 3 schedules",
        start,
    );
}

#[test]
fn acceptance_2_gsb_closed_form() {
    let start = Instant::now();
    for &v in &[0.1, 0.3, 0.5, 0.9] {
        let (exact, moment_err) = check_gsb_pmf_closed_form(v, 2000);
        assert!(exact, "v={v}: pmf not bitwise equal to k v^2 (1-v)^(k-1)");
        assert!(moment_err <= 1e-10, "v={v}: E[K] error {moment_err}");
    }
    assert!(start.elapsed().as_secs_f64() < 1.0, "criterion 2 over budget");
    report(2, "GSB truncation pmf closed form and E[K] = (2-v)/v", start);
}

#[test]
fn acceptance_3_slice_truncation_equivalence() {
    let start = Instant::now();
    for (eta, z) in [(1.0, 1usize), (0.2, 3), (1.0, 10)] {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let (exact_err, p) = check_slice_truncation_equivalence(eta, z, 1_000_000, &mut rng);
        assert!(exact_err <= 1e-12, "eta={eta} z={z}: exact pmf error {exact_err}");
        assert!(p > 1e-3, "eta={eta} z={z}: chi-squared p = {p}");
    }
    assert!(start.elapsed().as_secs_f64() < 30.0, "criterion 3 over budget");
    report(
        3,
        "slice-induced truncations match the Case B closed form (chi-squared at 1e6 draws)",
        start,
    );
}

#[test]
fn acceptance_4_gibbs_correctness() {
    let start = Instant::now();
    for (label, spec) in all_consistency_specs() {
        let worst = check_conditional_consistency(&spec, 40, 99);
        assert!(worst <= 1e-10, "{label}: conditional consistency {worst}");
    }
    for (label, spec) in slice_consistency_specs() {
        let worst = check_slice_conditional_consistency(&spec, 40, 99);
        assert!(worst <= 1e-10, "{label}: slice consistency {worst}");
    }
    for (label, spec) in geweke_configs() {
        let outcome = run_geweke(&spec, 5, 200_000, 2024).unwrap();
        assert!(
            outcome.max_z <= 4.0,
            "{label}: Geweke max |z| = {:.2} (stats: {:?})",
            outcome.max_z,
            outcome
                .stats
                .iter()
                .map(|s| format!("{}={:.2}", s.name, s.z_abs))
                .collect::<Vec<_>>()
        );
    }
    assert!(start.elapsed().as_secs_f64() < 300.0, "criterion 4 over budget");
    report(
        4,
        "conditional/joint consistency at 1e-10 and Geweke within 4 s.e. (3 configs, 2e5 iters)",
        start,
    );
}

#[test]
fn acceptance_5_prior_partition_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(321);
    let (diff, bound) = check_prior_crp_moments(1.0, 82, 20_000, &mut rng).unwrap();
    assert!(diff <= bound, "mean c_n off by {diff} (3 s.e. = {bound})");
    // The harmonic-sum oracle itself (frozen; the comparison above uses the
    // sum computed in place).
    let h: f64 = (1..=82).map(|i| 1.0 / i as f64).sum();
    assert!((h - 4.990_020_079_909_081).abs() < 1e-12, "harmonic sum H_82 = {h}");
    assert!(start.elapsed().as_secs_f64() < 60.0, "criterion 5 over budget");
    report(
        5,
        "hierarchical-prior mean c_n matches the CRP harmonic sum (alpha=1, n=82, 2e4 sims)",
        start,
    );
}

fn fit_cfg(
    dir: &Path,
    sub: &str,
    model: &str,
    schedule: &str,
    data: &str,
    iters: usize,
    burnin: usize,
    seed: u64,
) -> RunConfig {
    RunConfig::resolve(&[ConfigLayer {
        model: Some(model.into()),
        schedule: Some(schedule.into()),
        iters: Some(iters),
        burnin: Some(burnin),
        seed: Some(seed),
        grid: Some(500),
        data: Some(data.into()),
        out: Some(dir.join(sub)),
        density_thin: Some(20),
        ..Default::default()
    }])
    .unwrap()
}

fn density_l1_vs_truth(out_dir: &Path) -> f64 {
    let raw = std::fs::read_to_string(out_dir.join("density.csv")).unwrap();
    let rows: Vec<(f64, f64)> = raw
        .lines()
        .skip(1)
        .map(|l| {
            let mut it = l.split(',');
            let x: f64 = it.next().unwrap().parse().unwrap();
            let m: f64 = it.next().unwrap().parse().unwrap();
            (x, m)
        })
        .collect();
    let step = rows[1].0 - rows[0].0;
    rows.iter()
        .map(|&(x, m)| (m - simulated_mixture_density(x)).abs() * step)
        .sum()
}

#[test]
fn acceptance_6_simulated_mixture_reproduction() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate_mixture(250, 41);
    let data_path = dir.path().join("sim250.csv");
    sspmix::data::write_csv(&data_path, &sim.values, Some("x")).unwrap();
    let data = data_path.to_string_lossy().into_owned();

    let dp_nat = run_fit(&fit_cfg(dir.path(), "dp-nat", "dp-finite", "natural", &data, 20_000, 5_000, 11)).unwrap();
    let dp_exp = run_fit(&fit_cfg(dir.path(), "dp-exp", "dp-finite", "exp:1", &data, 20_000, 5_000, 11)).unwrap();
    let gsb_nat = run_fit(&fit_cfg(dir.path(), "gsb-nat", "gsb-finite", "natural", &data, 20_000, 5_000, 11)).unwrap();

    for (label, summary) in [("dp-natural", &dp_nat), ("dp-exp1", &dp_exp)] {
        assert!(
            (3.5..=6.5).contains(&summary.c_n.mean),
            "{label}: posterior mean c_n = {:.3} outside [3.5, 6.5]",
            summary.c_n.mean
        );
    }
    assert!(
        gsb_nat.c_n.mean >= dp_nat.c_n.mean,
        "GSB mean c_n {:.3} < DP mean c_n {:.3}",
        gsb_nat.c_n.mean,
        dp_nat.c_n.mean
    );

    for sub in ["dp-nat", "dp-exp"] {
        let l1 = density_l1_vs_truth(&dir.path().join(sub));
        assert!(
            l1 < SIM_DENSITY_L1_BOUND,
            "{sub}: L1(mean density, truth) = {l1:.4} >= {SIM_DENSITY_L1_BOUND}"
        );
    }
    assert!(start.elapsed().as_secs_f64() < 300.0, "criterion 6 over budget");
    report(
        6,
        "four-component mixture recovery: c_n in [3.5, 6.5], GSB >= DP, density L1 under pilot bound",
        start,
    );
}

fn trace_mean_c_n_after_burnin(out_dir: &Path, burnin: usize) -> f64 {
    let raw = std::fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    let c: Vec<f64> = raw
        .lines()
        .skip(1 + burnin)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    c.iter().sum::<f64>() / c.len() as f64
}

#[test]
fn acceptance_7_galaxy_reproduction() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(galaxy().len(), 82);

    let burnin = 5_000;
    run_fit(&fit_cfg(dir.path(), "nat", "dp-finite", "natural", "galaxy", 20_000, burnin, 4)).unwrap();
    let nat = trace_mean_c_n_after_burnin(&dir.path().join("nat"), burnin);
    assert!(
        (2.5..=5.5).contains(&nat),
        "galaxy dp-natural ergodic mean c_n = {nat:.3} outside [2.5, 5.5]"
    );
    assert!(start.elapsed().as_secs_f64() < 120.0, "criterion 7 over budget");
    report(
        7,
        "galaxy: dp-finite/natural ergodic mean c_n stabilizes in [2.5, 5.5]",
        start,
    );
}

/// Known-failing check, kept as stated. The finite representation is exact,
/// so the stationary posterior of c_n cannot depend on the schedule: 2e5-
/// iteration reference runs converge to mean c_n = 3.00-3.02 for natural,
/// exp:0.5, exp:1.0, and the slice baseline alike. The strict eta ordering
/// asserted here is a finite-run transient that this implementation
/// consistently realizes in the opposite direction (the exp(eta*j)
/// reweighting makes high-index clusters stickier as eta grows), across
/// seeds, initial block counts, and with the concentration pinned. See the
/// repository README for the summary of what was tried.
#[test]
fn acceptance_7_galaxy_eta_ordering_known_red() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let burnin = 5_000;
    run_fit(&fit_cfg(dir.path(), "e05", "dp-finite", "exp:0.5", "galaxy", 20_000, burnin, 4)).unwrap();
    run_fit(&fit_cfg(dir.path(), "e10", "dp-finite", "exp:1", "galaxy", 20_000, burnin, 4)).unwrap();
    let e05 = trace_mean_c_n_after_burnin(&dir.path().join("e05"), burnin);
    let e10 = trace_mean_c_n_after_burnin(&dir.path().join("e10"), burnin);
    if e05 > e10 {
        report(7, "galaxy: eta=0.5 mean c_n above eta=1.0 (seed-dependent)", start);
    }
    assert!(
        e05 > e10,
        "FAIL criterion 7 (eta ordering): mean c_n exp:0.5 = {e05:.3} vs exp:1.0 = {e10:.3}. \
         Both schedules target the same posterior (reference runs agree at 3.00-3.02), so the \
         asserted strict ordering is a transient property this sampler does not reproduce; \
         kept red by design rather than weakened."
    );
}

#[test]
fn acceptance_8_timing_harness() {
    let start = Instant::now();
    let report_data = run_bench(2_000, 500, 1, &[250, 1000]).unwrap();

    // Full matrix: 4 schedule rows x {DP, GSB} x n in {250, 1000}.
    assert_eq!(report_data.cells.len(), 16);
    let mut seen: HashMap<(String, String, usize), usize> = HashMap::new();
    for cell in &report_data.cells {
        assert!(cell.total_s > 0.0);
        *seen
            .entry((cell.model.clone(), cell.row_label.clone(), cell.n))
            .or_insert(0) += 1;
    }
    assert!(seen.values().all(|&c| c == 1), "duplicate cells");
    for label in ["natural", "eta=0.2", "eta=1.0", "eta=1.0 (slice)"] {
        assert_eq!(
            report_data
                .cells
                .iter()
                .filter(|c| c.row_label == label)
                .count(),
            4,
            "row {label} incomplete"
        );
    }

    // Soft ordering check: a failure is a warning, never a test failure.
    match report_data.soft_check.pass {
        Some(true) => {}
        Some(false) => eprintln!(
            "WARNING: soft timing check failed on this machine: {}",
            report_data.soft_check.description
        ),
        None => eprintln!("WARNING: soft timing check could not run"),
    }
    report(
        8,
        "bench matrix structure (4 schedules x DP/GSB x n in {250,1000}); absolute seconds declared non-reproducible",
        start,
    );
}
