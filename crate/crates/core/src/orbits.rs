//! Forward orbits, Birkhoff averages, Lyapunov exponents and backward windows.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::MapSystem;
use crate::potential::Potential;

pub const BURN_IN: usize = 1000;
pub const MAX_RESTARTS: usize = 100;
pub const RESTART_STEP: f64 = 1e-9;
/// Amplitude of the per-step jitter applied to piecewise-linear maps.
pub const DITHER: f64 = 1.0 / (1u64 << 50) as f64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Orbit {
    pub points: Vec<f64>,
    pub map_id: String,
    pub x0: f64,
    pub seed: u64,
    pub restarts: usize,
}

impl Orbit {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Truncated natural-extension point `(x_{-N}, ..., x_0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackwardOrbit {
    pub points: Vec<f64>,
    pub end_index: usize,
}

impl BackwardOrbit {
    pub fn depth(&self) -> usize {
        self.points.len() - 1
    }

    /// `x_{-k}`
    pub fn x(&self, k: usize) -> f64 {
        self.points[self.depth() - k]
    }

    pub fn x0(&self) -> f64 {
        self.x(0)
    }

    /// The window shifted `j` steps into the past, `f^-j(x̂)`.
    pub fn shifted(&self, j: usize) -> BackwardOrbit {
        BackwardOrbit { points: self.points[..self.points.len() - j].to_vec(), end_index: self.end_index - j }
    }
}

/// Numerically stable running mean.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunningMean {
    count: usize,
    mean: f64,
    m2: f64,
}

impl RunningMean {
    pub fn push(&mut self, v: f64) {
        self.count += 1;
        let d = v - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (v - self.mean);
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn std_error(&self) -> f64 {
        if self.count < 2 {
            return f64::NAN;
        }
        (self.m2 / (self.count - 1) as f64 / self.count as f64).sqrt()
    }
}

pub fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = RunningMean::default();
    for v in values {
        acc.push(v);
    }
    acc.mean()
}

fn try_iterate(map: &MapSystem, x0: f64, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let dither = map.needs_dither();
    let mut points = Vec::with_capacity(n);
    let mut x = x0;
    map.eval(x)?;
    points.push(x);
    for _ in 1..n {
        let mut y = map.eval(x)?;
        if dither {
            y += DITHER * rng.random_range(-1.0..1.0);
            y = if map.is_circle() { map.domain.wrap(y) } else { y.clamp(map.domain.lo, map.domain.hi) };
        }
        points.push(y);
        x = y;
    }
    if let Some(&last) = points.last() {
        map.eval(last)?;
    }
    Ok(points)
}

/// `n` points starting at `x0`, restarting from a nudged seed point whenever
/// the orbit lands in the singular guard.
pub fn iterate(map: &MapSystem, x0: f64, n: usize, seed: u64) -> Result<Orbit> {
    if n < 1 {
        return Err(Error::BadParameter("orbit length must be at least 1".into()));
    }
    if !map.is_circle() && !map.domain.contains(x0) {
        return Err(Error::OutOfDomain { x: x0, lo: map.domain.lo, hi: map.domain.hi });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 0..=MAX_RESTARTS {
        let mut start = x0 + RESTART_STEP * attempt as f64;
        if !map.is_circle() && start > map.domain.hi {
            start = x0 - RESTART_STEP * attempt as f64;
        }
        let start = map.domain.wrap(start);
        match try_iterate(map, start, n, &mut rng) {
            Ok(points) => {
                return Ok(Orbit { points, map_id: map.name(), x0, seed, restarts: attempt });
            }
            Err(Error::SingularPoint { x }) => {
                log::warn!("{}: orbit from {start} hit the singular guard at {x}, restart {}", map.name(), attempt + 1);
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::PersistentSingularHit { retries: MAX_RESTARTS })
}

/// Orbit of length `n` after discarding `burn_in` transient iterates.
pub fn typical_orbit(map: &MapSystem, x0: f64, n: usize, seed: u64, burn_in: usize) -> Result<Orbit> {
    let mut orbit = iterate(map, x0, n + burn_in, seed)?;
    orbit.points.drain(..burn_in);
    Ok(orbit)
}

pub fn birkhoff_average(map: &MapSystem, orbit: &Orbit, phi: &Potential) -> Result<f64> {
    let mut acc = RunningMean::default();
    for &x in &orbit.points {
        acc.push(phi.eval(map, x)?);
    }
    Ok(acc.mean())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrabilityEntry {
    pub name: String,
    pub applicable: bool,
    pub mean: f64,
    pub std_error: f64,
    pub half_mean: f64,
    pub drift: f64,
    pub divergent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicEstimates {
    pub chi_lower: f64,
    pub lambda_forward: f64,
    pub chi_half: f64,
    pub chi_drift: f64,
    pub samples: usize,
    pub birkhoff_means: Vec<(String, f64)>,
    pub integrability: Vec<IntegrabilityEntry>,
}

impl ErgodicEstimates {
    pub fn birkhoff_mean(&self, name: &str) -> Option<f64> {
        self.birkhoff_means.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn any_divergent(&self) -> bool {
        self.integrability.iter().any(|e| e.divergent)
    }
}

fn half_and_full(values: &[f64]) -> (RunningMean, f64) {
    let mut acc = RunningMean::default();
    let mut half = f64::NAN;
    let h = values.len() / 2;
    for (i, &v) in values.iter().enumerate() {
        acc.push(v);
        if i + 1 == h {
            half = acc.mean();
        }
    }
    if h == 0 {
        half = acc.mean();
    }
    (acc, half)
}

/// In one dimension both exponents are the Birkhoff mean of `ln|f'|`.
pub fn lyapunov_estimates(map: &MapSystem, orbit: &Orbit) -> Result<ErgodicEstimates> {
    let logs: Vec<f64> = orbit.points.iter().map(|&x| map.log_derivative(x)).collect::<Result<_>>()?;
    let (acc, half) = half_and_full(&logs);
    Ok(ErgodicEstimates {
        chi_lower: acc.mean(),
        lambda_forward: acc.mean(),
        chi_half: half,
        chi_drift: (half - acc.mean()).abs(),
        samples: logs.len(),
        birkhoff_means: Vec::new(),
        integrability: Vec::new(),
    })
}

/// Means of `log+|f'|`, `log+|1/f'|`, `log d(., S)`, `log G` and `log H`,
/// flagged when the half-orbit mean drifts from the full mean by more than
/// `threshold * max(1, |mean|)`.
pub fn integrability_diagnostics(map: &MapSystem, orbit: &Orbit, threshold: f64) -> Vec<IntegrabilityEntry> {
    type Obs<'a> = Box<dyn Fn(f64) -> f64 + 'a>;
    let observables: Vec<(&str, bool, Obs)> = vec![
        ("log_plus_derivative", true, Box::new(|x| map.log_derivative(x).map_or(f64::NAN, |l| l.max(0.0)))),
        ("log_plus_inverse_derivative", true, Box::new(|x| map.log_derivative(x).map_or(f64::INFINITY, |l| (-l).max(0.0)))),
        ("log_singular_distance", !map.singular_set.is_empty(), Box::new(|x| map.singular_distance(x).ln())),
        ("log_g", true, Box::new(|x| map.holder_g(x).ln())),
        ("log_h", true, Box::new(|x| map.holder_h(x).ln())),
    ];
    observables
        .into_iter()
        .map(|(name, applicable, obs)| {
            if !applicable {
                return IntegrabilityEntry {
                    name: name.into(),
                    applicable,
                    mean: f64::NAN,
                    std_error: f64::NAN,
                    half_mean: f64::NAN,
                    drift: f64::NAN,
                    divergent: false,
                };
            }
            let values: Vec<f64> = orbit.points.iter().map(|&x| obs(x)).collect();
            let (acc, half) = half_and_full(&values);
            let drift = (half - acc.mean()).abs();
            let divergent = !acc.mean().is_finite() || drift > threshold * acc.mean().abs().max(1.0);
            IntegrabilityEntry {
                name: name.into(),
                applicable,
                mean: acc.mean(),
                std_error: acc.std_error(),
                half_mean: half,
                drift,
                divergent,
            }
        })
        .collect()
}

/// Lyapunov estimates, Birkhoff means of `potentials` and integrability table.
pub fn ergodic_estimates(map: &MapSystem, orbit: &Orbit, potentials: &[Potential], threshold: f64) -> Result<ErgodicEstimates> {
    let mut est = lyapunov_estimates(map, orbit)?;
    for phi in potentials {
        est.birkhoff_means.push((phi.to_string(), birkhoff_average(map, orbit, phi)?));
    }
    est.integrability = integrability_diagnostics(map, orbit, threshold);
    Ok(est)
}

/// Running Birkhoff means sampled every `stride` iterates.
pub fn running_means(map: &MapSystem, orbit: &Orbit, potentials: &[Potential], stride: usize) -> Result<Vec<(usize, Vec<f64>)>> {
    let stride = stride.max(1);
    let mut accs = vec![RunningMean::default(); potentials.len()];
    let mut rows = Vec::new();
    for (i, &x) in orbit.points.iter().enumerate() {
        for (acc, phi) in accs.iter_mut().zip(potentials) {
            acc.push(phi.eval(map, x)?);
        }
        if (i + 1) % stride == 0 || i + 1 == orbit.len() {
            rows.push((i + 1, accs.iter().map(RunningMean::mean).collect()));
        }
    }
    Ok(rows)
}

pub fn backward_window(orbit: &Orbit, end_index: usize, depth: usize) -> Result<BackwardOrbit> {
    if end_index >= orbit.len() {
        return Err(Error::BadParameter(format!("end index {end_index} is past the orbit of length {}", orbit.len())));
    }
    if end_index < depth {
        return Err(Error::DepthExceedsHistory { depth, available: end_index });
    }
    Ok(BackwardOrbit { points: orbit.points[end_index - depth..=end_index].to_vec(), end_index })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doubling_short_orbit() {
        let m = MapSystem::from_name("doubling").unwrap();
        let o = iterate(&m, 0.1, 3, 0).unwrap();
        assert_eq!(o.len(), 3);
        for (a, b) in o.points.iter().zip([0.1, 0.2, 0.4]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn cusp_exact_hit_restarts() {
        let m = MapSystem::from_name("cusp").unwrap();
        let o = iterate(&m, 0.25, 2, 0).unwrap();
        assert_eq!(o.restarts, 1);
        assert!(o.points[1] != 0.0 && m.singular_distance(o.points[1]) > 1e-14);
    }

    #[test]
    fn gauss_fixed_point() {
        let m = MapSystem::from_name("gauss").unwrap();
        let x0 = 2f64.sqrt() - 1.0;
        let o = iterate(&m, x0, 2, 0).unwrap();
        assert!((o.points[1] - x0).abs() < 1e-12);
    }

    #[test]
    fn start_on_singular_set_is_nudged() {
        let m = MapSystem::from_name("cusp").unwrap();
        let o = iterate(&m, 0.0, 5, 0).unwrap();
        assert_eq!(o.restarts, 1);
        assert_eq!(o.points[0], RESTART_STEP);
    }

    #[test]
    fn constant_potential_average_is_exact() {
        let m = MapSystem::from_name("gauss").unwrap();
        let o = iterate(&m, 0.3, 1000, 1).unwrap();
        assert_eq!(birkhoff_average(&m, &o, &Potential::Constant { c: 0.7 }).unwrap(), 0.7);
    }

    #[test]
    fn doubling_lyapunov_is_ln2() {
        let m = MapSystem::from_name("doubling").unwrap();
        let o = typical_orbit(&m, 0.123, 5000, 3, BURN_IN).unwrap();
        let e = lyapunov_estimates(&m, &o).unwrap();
        assert_eq!(e.chi_lower, std::f64::consts::LN_2);
        assert_eq!(e.lambda_forward, std::f64::consts::LN_2);
    }

    #[test]
    fn quadratic_critical_point_is_non_finite() {
        let m = MapSystem::from_name("quadratic:2").unwrap().with_singular_set(vec![]);
        let o = Orbit { points: vec![0.0], map_id: m.name(), x0: 0.0, seed: 0, restarts: 0 };
        assert!(matches!(lyapunov_estimates(&m, &o), Err(Error::NonFiniteLog { .. })));
    }

    #[test]
    fn window_examples() {
        let o = Orbit { points: vec![0.1, 0.2, 0.4, 0.8], map_id: "doubling".into(), x0: 0.1, seed: 0, restarts: 0 };
        let w = backward_window(&o, 3, 2).unwrap();
        assert_eq!(w.points, vec![0.2, 0.4, 0.8]);
        assert_eq!((w.x(0), w.x(2)), (0.8, 0.2));
        assert_eq!(backward_window(&o, 2, 0).unwrap().points, vec![0.4]);
        assert_eq!(backward_window(&o, 3, 3).unwrap().points, o.points);
        assert!(matches!(backward_window(&o, 1, 2), Err(Error::DepthExceedsHistory { .. })));
    }

    #[test]
    fn doubling_integrability_marks_singular_distance_na() {
        let m = MapSystem::from_name("doubling").unwrap();
        let o = typical_orbit(&m, 0.3, 10_000, 0, BURN_IN).unwrap();
        let table = integrability_diagnostics(&m, &o, 0.05);
        let d = table.iter().find(|e| e.name == "log_singular_distance").unwrap();
        assert!(!d.applicable && !d.divergent);
        assert!(table.iter().filter(|e| e.applicable).all(|e| e.mean.is_finite() && !e.divergent));
    }

    #[test]
    fn running_means_end_at_full_mean() {
        let m = MapSystem::from_name("cusp").unwrap();
        let o = typical_orbit(&m, 0.3, 1001, 0, 10).unwrap();
        let rows = running_means(&m, &o, &[Potential::Coordinate], 100).unwrap();
        assert_eq!(rows.last().unwrap().0, 1001);
        let full = birkhoff_average(&m, &o, &Potential::Coordinate).unwrap();
        assert!((rows.last().unwrap().1[0] - full).abs() < 1e-15);
    }
}
