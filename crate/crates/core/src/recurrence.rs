//! Approach of orbits to the singular set.

use serde::{Deserialize, Serialize};

use crate::maps::MapSystem;
use crate::orbits::{BackwardOrbit, Orbit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceProfile {
    pub delta: f64,
    pub violations: Vec<usize>,
    pub last_violation: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailSums {
    pub delta: f64,
    /// `tail_sums[n - 1]` is the orbit fraction inside `B(S, e^{-n delta})`.
    pub tail_sums: Vec<f64>,
    pub tail_sum_total: f64,
    /// `-(1/delta)` times the orbit mean of `log d(., S)` restricted to `B(S, e^{-delta})`.
    pub integral_bound: f64,
}

/// Depths `k` at which `x_{-k}` lies in `B(S, e^{-k delta})`.
pub fn slow_recurrence_profile(map: &MapSystem, bw: &BackwardOrbit, delta: f64) -> RecurrenceProfile {
    let violations: Vec<usize> = if map.singular_set.is_empty() {
        Vec::new()
    } else {
        (1..=bw.depth())
            .filter(|&k| map.singular_distance(bw.x(k)) < (-(k as f64) * delta).exp())
            .collect()
    };
    let last_violation = violations.last().copied().unwrap_or(0);
    RecurrenceProfile { delta, violations, last_violation }
}

pub fn tail_sum_estimate(map: &MapSystem, orbit: &Orbit, delta: f64, n_max: usize) -> TailSums {
    if map.singular_set.is_empty() || orbit.is_empty() {
        return TailSums { delta, tail_sums: vec![0.0; n_max], tail_sum_total: 0.0, integral_bound: 0.0 };
    }
    let mut d: Vec<f64> = orbit.points.iter().map(|&x| map.singular_distance(x)).collect();
    d.sort_by(f64::total_cmp);
    let total_points = d.len() as f64;
    let tail_sums: Vec<f64> = (1..=n_max)
        .map(|n| {
            let r = (-(n as f64) * delta).exp();
            d.partition_point(|&v| v < r) as f64 / total_points
        })
        .collect();
    let r1 = (-delta).exp();
    let integral_bound = -d.iter().take_while(|&&v| v < r1).map(|v| v.ln()).sum::<f64>() / total_points / delta;
    TailSums { delta, tail_sum_total: tail_sums.iter().sum(), tail_sums, integral_bound }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(points: Vec<f64>) -> BackwardOrbit {
        let end_index = points.len() - 1;
        BackwardOrbit { points, end_index }
    }

    #[test]
    fn empty_singular_set_never_violates() {
        let m = MapSystem::from_name("doubling").unwrap();
        let p = slow_recurrence_profile(&m, &window(vec![0.0, 1e-9, 0.5, 0.7]), 0.5);
        assert!(p.violations.is_empty() && p.last_violation == 0);
    }

    #[test]
    fn cusp_close_approach_is_a_violation() {
        let m = MapSystem::from_name("cusp").unwrap();
        let p = slow_recurrence_profile(&m, &window(vec![0.1, 0.9, 0.9, 0.9]), 0.5);
        assert_eq!(p.violations, vec![3]);
        assert_eq!(p.last_violation, 3);
    }

    #[test]
    fn tail_sums_are_monotone_and_bounded() {
        let m = MapSystem::from_name("cusp").unwrap();
        let points: Vec<f64> = (0..1000).map(|i| -1.0 + (i as f64 + 0.5) / 500.0).collect();
        let o = Orbit { points, map_id: m.name(), x0: 0.0, seed: 0, restarts: 0 };
        let t = tail_sum_estimate(&m, &o, 1.0, 10);
        assert!(t.tail_sums.windows(2).all(|w| w[1] <= w[0]));
        assert!((t.tail_sum_total - t.tail_sums.iter().sum::<f64>()).abs() < 1e-15);
        assert!(t.tail_sum_total <= t.integral_bound);
    }
}
