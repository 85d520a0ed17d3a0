//! Piecewise-linear annealing schedules `A(t)` on `[0, T]`.
//!
//! Only the interior breakpoints are stored. The endpoints `A(0) = 0` and
//! `A(T) = 1` are implicit, so an optimizer moving the interior values can
//! never violate them.

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ScheduleWire {
    #[serde(rename = "T")]
    total_time: f64,
    points: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleWire", into = "ScheduleWire")]
pub struct Schedule {
    total_time: f64,
    /// Interior breakpoints `(t_j, a_j)`, strictly increasing in `t`.
    points: Vec<(f64, f64)>,
}

impl TryFrom<ScheduleWire> for Schedule {
    type Error = Error;

    fn try_from(w: ScheduleWire) -> Result<Self> {
        Schedule::new(w.total_time, w.points.into_iter().map(|[t, a]| (t, a)).collect())
    }
}

impl From<Schedule> for ScheduleWire {
    fn from(s: Schedule) -> Self {
        ScheduleWire {
            total_time: s.total_time,
            points: s.points.into_iter().map(|(t, a)| [t, a]).collect(),
        }
    }
}

/// Breakpoint times `j T / (k + 1)` for `j = 1..=k`.
fn uniform_times(total_time: f64, k: usize) -> impl Iterator<Item = f64> {
    (1..=k).map(move |j| j as f64 * total_time / (k + 1) as f64)
}

impl Schedule {
    pub fn new(total_time: f64, points: Vec<(f64, f64)>) -> Result<Self> {
        if !(total_time > 0.0) || !total_time.is_finite() {
            return Err(Error::InvalidSchedule(format!("T must be positive, got {total_time}")));
        }
        let mut prev = 0.0;
        for &(t, a) in &points {
            if !t.is_finite() || !a.is_finite() {
                return Err(Error::InvalidSchedule("non-finite breakpoint".into()));
            }
            if !(t > prev) {
                return Err(Error::InvalidSchedule(format!(
                    "breakpoint times must increase strictly from 0, got {t} after {prev}"
                )));
            }
            prev = t;
        }
        if !(prev < total_time) && !points.is_empty() {
            return Err(Error::InvalidSchedule(format!(
                "last breakpoint {prev} must lie before T = {total_time}"
            )));
        }
        Ok(Schedule { total_time, points })
    }

    /// `A(t) = t / T`.
    pub fn linear(total_time: f64) -> Result<Self> {
        Self::new(total_time, Vec::new())
    }

    /// `k` breakpoints on the uniform grid with values drawn from `U[0, 1]`.
    pub fn init_random<R: Rng + ?Sized>(total_time: f64, k: usize, rng: &mut R) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidArgument("need at least one interior breakpoint".into()));
        }
        let points = uniform_times(total_time, k)
            .map(|t| (t, rng.random::<f64>()))
            .collect();
        Self::new(total_time, points)
    }

    /// Breakpoints on the uniform grid with the given values.
    pub fn uniform(total_time: f64, values: &[f64]) -> Result<Self> {
        let points = uniform_times(total_time, values.len())
            .zip(values.iter().copied())
            .collect();
        Self::new(total_time, points)
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn num_points(&self) -> usize {
        self.points.len()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }

    /// Same breakpoint times, new values.
    pub fn with_values(&self, values: &[f64]) -> Result<Self> {
        if values.len() != self.points.len() {
            return Err(Error::DimensionMismatch {
                expected: self.points.len(),
                got: values.len(),
            });
        }
        let points = self
            .points
            .iter()
            .zip(values)
            .map(|(&(t, _), &a)| (t, a))
            .collect();
        Self::new(self.total_time, points)
    }

    pub fn evaluate(&self, t: f64) -> Result<f64> {
        if !(0.0..=self.total_time).contains(&t) {
            return Err(Error::TimeOutOfRange {
                t,
                total: self.total_time,
            });
        }
        Ok(self.value_at(t))
    }

    /// Interpolated value without the range check; `t` is clamped to `[0, T]`.
    pub fn value_at(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.total_time);
        // Index of the first breakpoint strictly after t.
        let i = self.points.partition_point(|p| p.0 <= t);
        let (t0, a0) = if i == 0 { (0.0, 0.0) } else { self.points[i - 1] };
        let (t1, a1) = self.points.get(i).copied().unwrap_or((self.total_time, 1.0));
        if t1 <= t0 {
            return a0;
        }
        a0 + (a1 - a0) * (t - t0) / (t1 - t0)
    }

    /// Doubles the resolution: `k` points become `2k + 1` points on the grid
    /// `j T / (2k + 2)`, sampled from the current schedule.
    ///
    /// On a uniform grid (everything produced by [`Schedule::init_random`] and
    /// `refine` itself) the old breakpoints are kept, so `A(t)` is unchanged.
    pub fn refine(&self) -> Schedule {
        let k = 2 * self.points.len() + 1;
        let points = uniform_times(self.total_time, k)
            .map(|t| (t, self.value_at(t)))
            .collect();
        Schedule {
            total_time: self.total_time,
            points,
        }
    }

    /// Number of transversal passages of `A(t)` through `level`.
    ///
    /// Touching the level at a breakpoint and turning back is not a crossing.
    pub fn crossing_count(&self, level: f64) -> usize {
        let nodes = std::iter::once(0.0)
            .chain(self.points.iter().map(|p| p.1))
            .chain(std::iter::once(1.0));
        let mut crossings = 0;
        let mut last_sign = 0.0f64;
        for a in nodes {
            let d = a - level;
            if d == 0.0 {
                continue;
            }
            let s = d.signum();
            if last_sign != 0.0 && s != last_sign {
                crossings += 1;
            }
            last_sign = s;
        }
        crossings
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn evaluate_examples() {
        let lin = Schedule::linear(12.5).unwrap();
        assert_eq!(lin.evaluate(0.0).unwrap(), 0.0);
        assert_eq!(lin.evaluate(6.25).unwrap(), 0.5);
        assert_eq!(lin.evaluate(12.5).unwrap(), 1.0);

        let s = Schedule::new(4.0, vec![(1.0, 0.8), (2.0, 0.4), (3.0, 0.9)]).unwrap();
        assert!((s.evaluate(1.5).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(s.evaluate(0.0).unwrap(), 0.0);
        assert_eq!(s.evaluate(4.0).unwrap(), 1.0);
        assert!(s.evaluate(4.1).is_err());
        assert!(s.evaluate(-0.1).is_err());
    }

    #[test]
    fn rejects_malformed_breakpoints() {
        assert!(Schedule::new(0.0, vec![]).is_err());
        assert!(Schedule::new(4.0, vec![(2.0, 0.1), (1.0, 0.2)]).is_err());
        assert!(Schedule::new(4.0, vec![(1.0, 0.1), (1.0, 0.2)]).is_err());
        assert!(Schedule::new(4.0, vec![(4.0, 0.1)]).is_err());
        assert!(Schedule::new(4.0, vec![(0.0, 0.1)]).is_err());
    }

    #[test]
    fn random_init_positions_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = Schedule::init_random(12.5, 3, &mut rng).unwrap();
        let ts: Vec<f64> = s.points().iter().map(|p| p.0).collect();
        assert_eq!(ts, vec![3.125, 6.25, 9.375]);
        assert!(s.values().iter().all(|a| (0.0..=1.0).contains(a)));

        let s = Schedule::init_random(10.0, 4, &mut rng).unwrap();
        let ts: Vec<f64> = s.points().iter().map(|p| p.0).collect();
        assert_eq!(ts, vec![2.0, 4.0, 6.0, 8.0]);

        let a = Schedule::init_random(5.0, 5, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let b = Schedule::init_random(5.0, 5, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(a, b);
        assert!(Schedule::init_random(5.0, 0, &mut rng).is_err());
    }

    #[test]
    fn refinement_counts_and_midpoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = Schedule::init_random(12.5, 3, &mut rng).unwrap();
        let r1 = s.refine();
        let r2 = r1.refine();
        assert_eq!((r1.num_points(), r2.num_points()), (7, 15));

        let lin = Schedule::linear(8.0).unwrap().refine();
        assert_eq!(lin.points(), &[(4.0, 0.5)]);
    }

    #[test]
    fn refinement_is_exact_on_a_fine_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = Schedule::init_random(12.5, 3, &mut rng).unwrap();
        let r = s.refine().refine();
        for i in 0..=1000 {
            let t = 12.5 * i as f64 / 1000.0;
            assert!((s.value_at(t) - r.value_at(t)).abs() < 1e-14);
        }
    }

    #[test]
    fn crossing_examples() {
        let a_star = 1.0 / 1.1;
        assert_eq!(Schedule::linear(3.0).unwrap().crossing_count(a_star), 1);
        let t = 8.0;
        let s = Schedule::new(t, vec![(t / 4.0, 0.95), (t / 2.0, 0.85), (3.0 * t / 4.0, 0.95)]).unwrap();
        assert_eq!(s.crossing_count(a_star), 3);
        assert_eq!(s.crossing_count(1.5), 0);
        // Touching the level and turning back.
        let touch = Schedule::new(3.0, vec![(1.0, 0.5), (2.0, 0.2)]).unwrap();
        assert_eq!(touch.crossing_count(0.5), 1);
        // Passing exactly through a breakpoint value counts once.
        let through = Schedule::new(3.0, vec![(1.0, 0.5), (2.0, 0.7)]).unwrap();
        assert_eq!(through.crossing_count(0.5), 1);
    }

    #[test]
    fn json_layout() {
        let s = Schedule::new(4.0, vec![(1.0, 0.8), (2.0, 0.4)]).unwrap();
        let js = serde_json::to_string(&s).unwrap();
        assert_eq!(js, r#"{"T":4.0,"points":[[1.0,0.8],[2.0,0.4]]}"#);
        assert!(serde_json::from_str::<Schedule>(r#"{"T":4.0,"points":[[2.0,0.8],[1.0,0.4]]}"#).is_err());
    }

    fn arb_schedule() -> impl Strategy<Value = Schedule> {
        (0.1f64..100.0, prop::collection::vec(-2.0f64..3.0, 0..20))
            .prop_map(|(t, vals)| Schedule::uniform(t, &vals).unwrap())
    }

    proptest! {
        #[test]
        fn double_refinement_preserves_values(s in arb_schedule(), u in 0.0f64..1.0) {
            let r = s.refine().refine();
            let t = u * s.total_time();
            prop_assert!((s.value_at(t) - r.value_at(t)).abs() < 1e-12);
        }

        #[test]
        fn json_round_trip_evaluates_identically(s in arb_schedule(), u in 0.0f64..1.0) {
            let back: Schedule = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
            let t = u * s.total_time();
            prop_assert_eq!(back.value_at(t), s.value_at(t));
            prop_assert_eq!(back, s);
        }

        #[test]
        fn piecewise_linear_within_segments(s in arb_schedule()) {
            // Uniform grid of 4 samples strictly inside the first segment.
            let seg_end = s.points().first().map(|p| p.0).unwrap_or(s.total_time());
            let h = seg_end / 5.0;
            let v: Vec<f64> = (1..=4).map(|i| s.value_at(i as f64 * h)).collect();
            for w in v.windows(3) {
                prop_assert!((w[0] - 2.0 * w[1] + w[2]).abs() < 1e-9);
            }
        }
    }
}
