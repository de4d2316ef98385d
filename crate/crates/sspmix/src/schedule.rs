//! Decreasing truncation schedules `xi_1 > xi_2 > ... > 0`.
//!
//! The finite representation works for any strictly decreasing sequence in
//! (0,1] vanishing at infinity. Three families are supported:
//!
//! * `Natural`: `xi_j = prod_{l<j}(1 - v_l)`, induced by the stick lengths
//!   themselves (Case A updates);
//! * `Exponential`: `xi_j = exp(-eta * j)` with `eta > 0` (Case B);
//! * `Geometric`: `xi_j = (1 - rho) rho^{j-1}` with `rho` in (0,1) (Case B).
//!
//! All values are computed in log space: the tail inversion used by the
//! truncation updates compares ratios of xi's that underflow long before
//! their logs do.

use rand::Rng;

use crate::error::{Error, Result};
use crate::sticks::{StickState, TRUNCATION_SEARCH_CAP};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    /// Stick-induced schedule; shares state with the chain's `StickState`.
    Natural,
    Exponential { eta: f64 },
    Geometric { rho: f64 },
}

impl Schedule {
    pub fn exponential(eta: f64) -> Result<Self> {
        if !eta.is_finite() || eta <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "exponential schedule needs eta > 0, got {eta}"
            )));
        }
        Ok(Schedule::Exponential { eta })
    }

    pub fn geometric(rho: f64) -> Result<Self> {
        if !rho.is_finite() || rho <= 0.0 || rho >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "geometric schedule needs rho in (0,1), got {rho}"
            )));
        }
        Ok(Schedule::Geometric { rho })
    }

    /// Parses the config syntax `"natural" | "exp:<eta>" | "geom:<rho>"`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "natural" {
            return Ok(Schedule::Natural);
        }
        if let Some(eta) = s.strip_prefix("exp:") {
            let eta: f64 = eta
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad eta in schedule '{s}'")))?;
            return Self::exponential(eta);
        }
        if let Some(rho) = s.strip_prefix("geom:") {
            let rho: f64 = rho
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad rho in schedule '{s}'")))?;
            return Self::geometric(rho);
        }
        Err(Error::InvalidParameter(format!(
            "unknown schedule '{s}' (expected natural, exp:<eta>, or geom:<rho>)"
        )))
    }

    pub fn is_natural(&self) -> bool {
        matches!(self, Schedule::Natural)
    }

    /// `ln xi_j` for a deterministic schedule; `None` for `Natural`.
    pub fn log_xi_det(&self, j: usize) -> Option<f64> {
        debug_assert!(j >= 1);
        match *self {
            Schedule::Natural => None,
            Schedule::Exponential { eta } => Some(-eta * j as f64),
            Schedule::Geometric { rho } => {
                Some((1.0 - rho).ln() + (j as f64 - 1.0) * rho.ln())
            }
        }
    }

    /// `ln xi_j`. The natural variant reads the stick tails, which must be
    /// instantiated through index `j - 1`.
    pub fn log_xi(&self, j: usize, sticks: &StickState) -> f64 {
        self.log_xi_det(j).unwrap_or_else(|| sticks.log_tail(j))
    }

    /// `xi_j`, extending the sticks from the prior when the natural schedule
    /// has not yet reached index `j`.
    pub fn xi<R: Rng + ?Sized>(&self, j: usize, sticks: &mut StickState, rng: &mut R) -> f64 {
        assert!(j >= 1);
        if self.is_natural() {
            sticks.extend_to(j.saturating_sub(1), rng);
        }
        self.log_xi(j, sticks).exp()
    }

    /// `xi_k - xi_{k+1}`. For the natural schedule this telescopes to the
    /// stick weight `w_k` exactly (same products).
    pub fn xi_gap<R: Rng + ?Sized>(&self, k: usize, sticks: &mut StickState, rng: &mut R) -> f64 {
        assert!(k >= 1);
        match self {
            Schedule::Natural => {
                sticks.extend_to(k, rng);
                sticks.weight(k)
            }
            // Same arithmetic path as xi(k) - xi(k+1).
            _ => self.log_xi_det(k).unwrap().exp() - self.log_xi_det(k + 1).unwrap().exp(),
        }
    }

    /// `ln(xi_k - xi_{k+1})`, stable deep in the tail.
    pub fn log_xi_gap(&self, k: usize, sticks: &StickState) -> f64 {
        match self {
            Schedule::Natural => sticks.log_weight(k),
            _ => {
                let a = self.log_xi_det(k).unwrap();
                let b = self.log_xi_det(k + 1).unwrap();
                // ln(e^a - e^b) = a + ln(1 - e^{b-a})
                a + (-(b - a).exp()).ln_1p()
            }
        }
    }

    /// Smallest `j >= 1` with `xi_{j+1} <= threshold`. Closed-form for the
    /// deterministic variants (plus a float-boundary fix-up); iterative with
    /// on-the-fly extension for `Natural`, capped at `TRUNCATION_SEARCH_CAP`.
    pub fn smallest_index_with_xi_below<R: Rng + ?Sized>(
        &self,
        threshold: f64,
        sticks: &mut StickState,
        rng: &mut R,
    ) -> Result<usize> {
        assert!(threshold > 0.0 && threshold < 1.0);
        let log_t = threshold.ln();
        match *self {
            Schedule::Exponential { eta } => {
                let mut j = ((-log_t / eta - 1.0).ceil() as i64).max(1) as usize;
                while j > 1 && self.log_xi_det(j).unwrap() <= log_t {
                    j -= 1;
                }
                while self.log_xi_det(j + 1).unwrap() > log_t {
                    j += 1;
                }
                Ok(j)
            }
            Schedule::Geometric { rho } => {
                let raw = (log_t - (1.0 - rho).ln()) / rho.ln();
                let mut j = (raw.ceil() as i64).max(1) as usize;
                while j > 1 && self.log_xi_det(j).unwrap() <= log_t {
                    j -= 1;
                }
                while self.log_xi_det(j + 1).unwrap() > log_t {
                    j += 1;
                }
                Ok(j)
            }
            Schedule::Natural => {
                for j in 1..=TRUNCATION_SEARCH_CAP {
                    sticks.extend_to(j, rng);
                    if sticks.log_tail(j + 1) <= log_t {
                        return Ok(j);
                    }
                }
                Err(Error::DegenerateSchedule {
                    cap: TRUNCATION_SEARCH_CAP,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sticks::StickFamily;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn forced(vs: &[f64]) -> StickState {
        let mut s = StickState::new(StickFamily::Dp { alpha: 1.0 });
        for &v in vs {
            s.push_length(v);
        }
        s
    }

    #[test]
    fn parse_round_trip() {
        assert_eq!(Schedule::parse("natural").unwrap(), Schedule::Natural);
        assert_eq!(
            Schedule::parse("exp:0.2").unwrap(),
            Schedule::Exponential { eta: 0.2 }
        );
        assert_eq!(
            Schedule::parse("geom:0.5").unwrap(),
            Schedule::Geometric { rho: 0.5 }
        );
        assert!(Schedule::parse("exp:-1").is_err());
        assert!(Schedule::parse("geom:1.5").is_err());
        assert!(Schedule::parse("linear").is_err());
        assert!(Schedule::parse("exp:abc").is_err());
    }

    #[test]
    fn xi_closed_forms() {
        let mut r = ChaCha8Rng::seed_from_u64(0);
        let mut s = forced(&[0.5, 0.5, 0.5]);

        let e = Schedule::exponential(1.0).unwrap();
        assert!((e.xi(2, &mut s, &mut r) - 0.135_335_283_236_612_7).abs() < 1e-15);

        let g = Schedule::geometric(0.5).unwrap();
        assert!((g.xi(1, &mut s, &mut r) - 0.5).abs() < 1e-15);
        assert!((g.xi(3, &mut s, &mut r) - 0.125).abs() < 1e-15);

        let n = Schedule::Natural;
        assert!((n.xi(3, &mut s, &mut r) - 0.25).abs() < 1e-15);
        assert!((n.xi(1, &mut s, &mut r) - 1.0).abs() == 0.0);
    }

    #[test]
    fn xi_gap_examples() {
        let mut r = ChaCha8Rng::seed_from_u64(0);
        let mut s = forced(&[0.5, 0.5, 0.5]);

        assert!((Schedule::Natural.xi_gap(2, &mut s, &mut r) - 0.25).abs() < 1e-15);

        let e = Schedule::exponential(1.0).unwrap();
        assert!((e.xi_gap(1, &mut s, &mut r) - 0.232_544_157_934_829_6).abs() < 1e-12);

        let g = Schedule::geometric(0.5).unwrap();
        assert!((g.xi_gap(2, &mut s, &mut r) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn gap_is_exact_difference_for_deterministic() {
        let mut r = ChaCha8Rng::seed_from_u64(0);
        let mut s = forced(&[0.5]);
        for sched in [
            Schedule::exponential(0.37).unwrap(),
            Schedule::geometric(0.81).unwrap(),
        ] {
            for k in [1usize, 2, 5, 40, 300] {
                let gap = sched.xi_gap(k, &mut s, &mut r);
                let diff = sched.xi(k, &mut s, &mut r) - sched.xi(k + 1, &mut s, &mut r);
                assert_eq!(gap, diff, "{sched:?} k={k}");
            }
        }
    }

    #[test]
    fn gap_matches_weight_for_natural() {
        // The subtraction route xi(k) - xi(k+1) cancels catastrophically when
        // v_k is tiny, so agreement is measured relative to the tail xi_k.
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let mut s = StickState::new(StickFamily::Dp { alpha: 2.0 });
        s.extend_to(200, &mut r);
        for k in 1..=200 {
            let gap = Schedule::Natural.xi_gap(k, &mut s, &mut r);
            assert_eq!(gap, s.weight(k));
            let diff =
                Schedule::Natural.xi(k, &mut s, &mut r) - Schedule::Natural.xi(k + 1, &mut s, &mut r);
            let scale = Schedule::Natural.xi(k, &mut s, &mut r);
            assert!((gap - diff).abs() <= 1e-14 * scale, "k={k}");
        }
    }

    #[test]
    fn smallest_index_examples() {
        let mut r = ChaCha8Rng::seed_from_u64(0);
        let mut s = forced(&[0.5]);

        let e = Schedule::exponential(1.0).unwrap();
        assert_eq!(e.smallest_index_with_xi_below(0.05, &mut s, &mut r).unwrap(), 2);

        let g = Schedule::geometric(0.5).unwrap();
        assert_eq!(g.smallest_index_with_xi_below(0.2, &mut s, &mut r).unwrap(), 2);

        let mut s9 = forced(&[0.9, 0.9, 0.9, 0.9]);
        let n = Schedule::Natural;
        assert_eq!(
            n.smallest_index_with_xi_below(0.009, &mut s9, &mut r).unwrap(),
            3
        );
    }

    #[test]
    fn smallest_index_handles_large_thresholds() {
        // Thresholds above xi_2 must return 1, never 0.
        let mut r = ChaCha8Rng::seed_from_u64(0);
        let mut s = forced(&[0.5]);
        let e = Schedule::exponential(2.0).unwrap();
        assert_eq!(e.smallest_index_with_xi_below(0.9, &mut s, &mut r).unwrap(), 1);
        let g = Schedule::geometric(0.3).unwrap();
        assert_eq!(g.smallest_index_with_xi_below(0.9, &mut s, &mut r).unwrap(), 1);
    }

    proptest! {
        #[test]
        fn strictly_decreasing_and_vanishing(eta in 0.01f64..4.0, rho in 0.01f64..0.99) {
            let mut r = ChaCha8Rng::seed_from_u64(0);
            let mut s = forced(&[0.5]);
            for sched in [Schedule::exponential(eta).unwrap(), Schedule::geometric(rho).unwrap()] {
                let mut prev = f64::INFINITY;
                for j in (1..10_000).step_by(97) {
                    let x = sched.xi(j, &mut s, &mut r);
                    prop_assert!(x > 0.0 && x <= 1.0 || x == 0.0 && j > 100);
                    prop_assert!(x < prev || (x == 0.0 && prev == 0.0));
                    prev = x;
                }
                // log xi still decreases strictly even when xi underflows.
                prop_assert!(sched.log_xi_det(1_000_000).unwrap() < sched.log_xi_det(999_999).unwrap());
            }
        }

        #[test]
        fn telescoping_gap_sums(eta in 0.05f64..3.0, j0 in 1usize..20) {
            let mut r = ChaCha8Rng::seed_from_u64(0);
            let mut s = forced(&[0.5]);
            let sched = Schedule::exponential(eta).unwrap();
            let upper = 1000usize;
            let sum: f64 = (j0..=upper).map(|k| sched.xi_gap(k, &mut s, &mut r)).sum();
            let expect = sched.xi(j0, &mut s, &mut r) - sched.xi(upper + 1, &mut s, &mut r);
            prop_assert!((sum - expect).abs() <= 1e-12);
        }

        #[test]
        fn smallest_index_postcondition(eta in 0.05f64..3.0, t in 1e-9f64..0.9) {
            let mut r = ChaCha8Rng::seed_from_u64(0);
            let mut s = forced(&[0.5]);
            let sched = Schedule::exponential(eta).unwrap();
            let j = sched.smallest_index_with_xi_below(t, &mut s, &mut r).unwrap();
            prop_assert!(sched.xi(j + 1, &mut s, &mut r) <= t);
            if j > 1 {
                prop_assert!(sched.xi(j, &mut s, &mut r) > t);
            }
        }
    }

    #[test]
    fn degenerate_natural_schedule_is_an_error() {
        // Lengths at the clamp floor make the tail vanish too slowly to
        // invert within the search cap.
        let mut r = ChaCha8Rng::seed_from_u64(0);
        let mut s = StickState::new(StickFamily::Dp { alpha: 1.0 });
        for _ in 0..crate::sticks::TRUNCATION_SEARCH_CAP + 1 {
            s.push_length(1e-18);
        }
        let err = Schedule::Natural
            .smallest_index_with_xi_below(0.5, &mut s, &mut r)
            .unwrap_err();
        assert!(matches!(err, crate::error::Error::DegenerateSchedule { .. }));
        let err = crate::sticks::sample_truncation(&mut s, &Schedule::Natural, &mut r).unwrap_err();
        assert!(matches!(err, crate::error::Error::DegenerateSchedule { .. }));
    }

    #[test]
    fn natural_strict_decrease_deep() {
        let mut r = ChaCha8Rng::seed_from_u64(9);
        let mut s = StickState::new(StickFamily::Dp { alpha: 5.0 });
        s.extend_to(10_000, &mut r);
        let mut prev = 0.0; // log xi_1
        for j in 2..=10_000 {
            let cur = s.log_tail(j);
            assert!(cur < prev, "log tail not strictly decreasing at {j}");
            prev = cur;
        }
    }
}
