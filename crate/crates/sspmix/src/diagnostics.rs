//! Posterior summaries: the Monte Carlo density estimator with credible
//! bands, occupied-cluster counts, and ergodic means.

use crate::model::normal_logpdf;
use crate::sticks::Atom;

/// Number of occupied components `c_n = sum_j I(n_j > 0)`.
pub fn occupied_clusters(z: &[usize], k_star: usize) -> usize {
    let mut seen = vec![false; k_star.max(z.iter().copied().max().unwrap_or(0))];
    let mut count = 0;
    for &zi in z {
        if !seen[zi - 1] {
            seen[zi - 1] = true;
            count += 1;
        }
    }
    count
}

/// Mixture density `sum_j w_j N(x; mu_j, 1/tau_j)` on a grid, using the
/// draw's unnormalized first-k* weights; the estimator leaves the truncated
/// tail mass out of each draw, so a single row integrates to slightly
/// below one.
pub fn mixture_density(weights: &[f64], atoms: &[Atom], grid: &[f64], out: &mut [f64]) {
    assert_eq!(weights.len(), atoms.len());
    assert_eq!(grid.len(), out.len());
    out.fill(0.0);
    for (&w, atom) in weights.iter().zip(atoms) {
        if w == 0.0 {
            continue;
        }
        for (o, &x) in out.iter_mut().zip(grid) {
            *o += w * normal_logpdf(x, atom.mu, atom.tau).exp();
        }
    }
}

/// Running averages `a_t = (1/t) sum_{s<=t} x_s`.
pub fn ergodic_mean(series: &[f64]) -> Vec<f64> {
    assert!(!series.is_empty());
    let mut out = Vec::with_capacity(series.len());
    let mut acc = 0.0;
    for (t, &x) in series.iter().enumerate() {
        acc += x;
        out.push(acc / (t + 1) as f64);
    }
    out
}

/// Empirical quantile with linear interpolation between order statistics
/// (the `h = (n-1)p + 1` convention). `sorted` must be ascending.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    assert!((0.0..=1.0).contains(&p));
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n as f64 - 1.0) * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Pointwise credible band at the given level from stored per-draw rows.
pub fn credible_band(draws: &[Vec<f64>], level: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(draws.len() >= 2, "credible band needs at least two draws");
    let width = draws[0].len();
    let lo_p = (1.0 - level) / 2.0;
    let hi_p = 1.0 - lo_p;
    let mut lo = Vec::with_capacity(width);
    let mut hi = Vec::with_capacity(width);
    let mut column = vec![0.0; draws.len()];
    for g in 0..width {
        for (c, row) in column.iter_mut().zip(draws) {
            *c = row[g];
        }
        column.sort_by(|a, b| a.partial_cmp(b).unwrap());
        lo.push(quantile_sorted(&column, lo_p));
        hi.push(quantile_sorted(&column, hi_p));
    }
    (lo, hi)
}

/// Streams per-draw density rows: the mean accumulates over every draw,
/// while rows kept for the quantile band can be thinned to bound memory
/// (thin = 1 stores all draws, the exact-quantile mode).
#[derive(Debug, Clone)]
pub struct DensityAccumulator {
    grid: Vec<f64>,
    sum: Vec<f64>,
    count: usize,
    stored: Vec<Vec<f64>>,
    thin: usize,
}

impl DensityAccumulator {
    pub fn new(grid: Vec<f64>, thin: usize) -> Self {
        assert!(thin >= 1);
        let width = grid.len();
        DensityAccumulator {
            grid,
            sum: vec![0.0; width],
            count: 0,
            stored: Vec::new(),
            thin,
        }
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Rows retained for the quantile band.
    pub fn stored_rows(&self) -> usize {
        self.stored.len()
    }

    pub fn push_mixture(&mut self, weights: &[f64], atoms: &[Atom], scratch: &mut Vec<f64>) {
        scratch.resize(self.grid.len(), 0.0);
        mixture_density(weights, atoms, &self.grid, scratch);
        self.push_row(scratch);
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.grid.len());
        for (s, &r) in self.sum.iter_mut().zip(row) {
            *s += r;
        }
        if self.count % self.thin == 0 {
            self.stored.push(row.to_vec());
        }
        self.count += 1;
    }

    /// Merges another accumulator over the same grid (cross-chain pooling).
    pub fn merge(&mut self, other: &DensityAccumulator) {
        assert_eq!(self.grid, other.grid);
        for (s, &o) in self.sum.iter_mut().zip(&other.sum) {
            *s += o;
        }
        self.count += other.count;
        self.stored.extend(other.stored.iter().cloned());
    }

    pub fn mean(&self) -> Vec<f64> {
        assert!(self.count > 0);
        self.sum.iter().map(|s| s / self.count as f64).collect()
    }

    pub fn band(&self, level: f64) -> (Vec<f64>, Vec<f64>) {
        credible_band(&self.stored, level)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn occupied_cluster_counts() {
        assert_eq!(occupied_clusters(&[3, 3, 3], 4), 1);
        assert_eq!(occupied_clusters(&[1, 1, 2, 5], 5), 3);
        let all: Vec<usize> = (1..=7).collect();
        assert_eq!(occupied_clusters(&all, 7), 7);
        // Brute-force set-count oracle on a scrambled vector.
        let z = [2usize, 4, 2, 1, 4, 4, 6];
        let brute: std::collections::HashSet<_> = z.iter().collect();
        assert_eq!(occupied_clusters(&z, 6), brute.len());
    }

    #[test]
    fn density_single_standard_normal_atom() {
        let atoms = [Atom { mu: 0.0, tau: 1.0 }];
        let mut out = [0.0];
        mixture_density(&[1.0], &atoms, &[0.0], &mut out);
        assert!((out[0] - 0.398_942_280_401_432_7).abs() < 1e-14);
    }

    #[test]
    fn density_symmetric_atoms() {
        let atoms = [Atom { mu: -2.0, tau: 1.5 }, Atom { mu: 2.0, tau: 1.5 }];
        let grid = [-1.3, 0.0, 1.3];
        let mut out = [0.0; 3];
        mixture_density(&[0.5, 0.5], &atoms, &grid, &mut out);
        assert!((out[0] - out[2]).abs() < 1e-15);
    }

    #[test]
    fn density_partial_weights_integrate_below_one() {
        // GSB k*=4, v=0.5: weights sum to 0.9375; the trapezoid integral of
        // the mixture matches that mass up to grid truncation.
        let v: f64 = 0.5;
        let weights: Vec<f64> = (1..=4).map(|j| v * (1.0 - v).powi(j - 1)).collect();
        assert!((weights.iter().sum::<f64>() - 0.9375).abs() < 1e-15);
        let atoms = vec![Atom { mu: 0.0, tau: 4.0 }; 4];
        let grid: Vec<f64> = (0..4001).map(|i| -10.0 + i as f64 * 0.005).collect();
        let mut out = vec![0.0; grid.len()];
        mixture_density(&weights, &atoms, &grid, &mut out);
        let integral: f64 = out.windows(2).map(|w| 0.5 * (w[0] + w[1]) * 0.005).sum();
        assert!((integral - 0.9375).abs() < 1e-6, "integral {integral}");
    }

    #[test]
    fn ergodic_mean_examples() {
        assert_eq!(ergodic_mean(&[2.0, 2.0, 2.0]), vec![2.0, 2.0, 2.0]);
        assert_eq!(ergodic_mean(&[1.0, 2.0, 3.0]), vec![1.0, 1.5, 2.0]);
        // Linearity.
        let xs = [0.4, -1.0, 3.0, 0.0];
        let scaled: Vec<f64> = xs.iter().map(|x| 2.5 * x).collect();
        let lhs = ergodic_mean(&scaled);
        let rhs: Vec<f64> = ergodic_mean(&xs).iter().map(|m| 2.5 * m).collect();
        for (a, b) in lhs.iter().zip(&rhs) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn band_order_statistic_interpolation() {
        // Draws {1..100} at one point: (3.475, 97.525) under h = (n-1)p + 1.
        let draws: Vec<Vec<f64>> = (1..=100).map(|i| vec![i as f64]).collect();
        let (lo, hi) = credible_band(&draws, 0.95);
        assert!((lo[0] - 3.475).abs() < 1e-12);
        assert!((hi[0] - 97.525).abs() < 1e-12);
    }

    #[test]
    fn band_collapses_on_identical_draws() {
        let draws = vec![vec![0.7, 0.1]; 5];
        let (lo, hi) = credible_band(&draws, 0.95);
        assert_eq!(lo, vec![0.7, 0.1]);
        assert_eq!(hi, vec![0.7, 0.1]);
    }

    #[test]
    fn band_contains_mean_for_symmetric_draws() {
        let draws: Vec<Vec<f64>> = (-50..=50).map(|i| vec![i as f64 / 10.0]).collect();
        let mean: f64 = draws.iter().map(|d| d[0]).sum::<f64>() / draws.len() as f64;
        let (lo, hi) = credible_band(&draws, 0.95);
        assert!(lo[0] <= mean && mean <= hi[0]);
    }

    #[test]
    fn streaming_mean_equals_batch_mean() {
        let rows = vec![
            vec![0.1, 0.4, 0.3],
            vec![0.2, 0.2, 0.2],
            vec![0.7, 0.0, 0.1],
            vec![0.5, 0.5, 0.5],
            vec![0.9, 0.3, 0.2],
        ];
        // Thinned storage must not change the mean.
        let mut acc = DensityAccumulator::new(vec![0.0, 1.0, 2.0], 2);
        for r in &rows {
            acc.push_row(r);
        }
        let mean = acc.mean();
        for g in 0..3 {
            let batch: f64 = rows.iter().map(|r| r[g]).sum::<f64>() / rows.len() as f64;
            assert!((mean[g] - batch).abs() <= 1e-12);
        }
        assert_eq!(acc.stored.len(), 3); // rows 0, 2, 4
    }

    #[test]
    fn accumulator_merge_pools_chains() {
        let mut a = DensityAccumulator::new(vec![0.0], 1);
        let mut b = DensityAccumulator::new(vec![0.0], 1);
        a.push_row(&[1.0]);
        b.push_row(&[3.0]);
        a.merge(&b);
        assert_eq!(a.mean(), vec![2.0]);
        assert_eq!(a.count(), 2);
    }
}
