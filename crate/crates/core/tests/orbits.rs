use repeller_core::maps::MapSystem;
use repeller_core::orbits::{backward_window, birkhoff_average, ergodic_estimates, lyapunov_estimates, typical_orbit};
use repeller_core::recurrence::{slow_recurrence_profile, tail_sum_estimate};
use repeller_core::Potential;

const X0: f64 = 0.123456789;

#[test]
fn doubling_exponent_is_ln2() {
    let map = MapSystem::from_name("doubling").unwrap();
    let orbit = typical_orbit(&map, X0, 100_000, 1, 1000).unwrap();
    assert_eq!(lyapunov_estimates(&map, &orbit).unwrap().chi_lower, 2f64.ln());
}

#[test]
fn gauss_exponent_and_distance_mean() {
    let map = MapSystem::from_name("gauss").unwrap();
    let orbit = typical_orbit(&map, X0, 1_000_000, 1, 1000).unwrap();
    let est = ergodic_estimates(&map, &orbit, &[], 0.05).unwrap();
    let chi = std::f64::consts::PI.powi(2) / (6.0 * 2f64.ln());
    assert!((est.chi_lower / chi - 1.0).abs() < 0.02, "chi = {}", est.chi_lower);
    let log_d = est.integrability.iter().find(|e| e.name == "log_singular_distance").unwrap();
    let oracle = -std::f64::consts::PI.powi(2) / (12.0 * 2f64.ln());
    assert!((log_d.mean - oracle).abs() < 0.01, "E log x = {}", log_d.mean);
    assert!(!est.any_divergent());
}

#[test]
fn cusp_exponent_is_one_half() {
    let map = MapSystem::from_name("cusp").unwrap();
    let orbit = typical_orbit(&map, X0, 1_000_000, 1, 1000).unwrap();
    let chi = lyapunov_estimates(&map, &orbit).unwrap().chi_lower;
    assert!((chi - 0.5).abs() < 0.02, "chi = {chi}");
}

#[test]
fn birkhoff_average_is_linear() {
    let map = MapSystem::from_name("tent").unwrap();
    let orbit = typical_orbit(&map, X0, 50_000, 3, 1000).unwrap();
    let (a, b) = (2.5, -0.75);
    let combo = Potential::Combination { terms: vec![(a, Potential::Coordinate), (b, Potential::Power { p: 2 })] };
    let lhs = birkhoff_average(&map, &orbit, &combo).unwrap();
    let rhs = a * birkhoff_average(&map, &orbit, &Potential::Coordinate).unwrap()
        + b * birkhoff_average(&map, &orbit, &Potential::Power { p: 2 }).unwrap();
    assert!((lhs - rhs).abs() < 1e-12);
}

#[test]
fn orbits_are_reproducible_from_the_seed() {
    for name in ["doubling", "cusp", "gauss"] {
        let map = MapSystem::from_name(name).unwrap();
        let a = typical_orbit(&map, X0, 20_000, 9, 1000).unwrap();
        let b = typical_orbit(&map, X0, 20_000, 9, 1000).unwrap();
        assert!(a.points.iter().zip(&b.points).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

#[test]
fn cusp_tail_sums_follow_the_geometric_series() {
    let map = MapSystem::from_name("cusp").unwrap();
    let orbit = typical_orbit(&map, X0, 1_000_000, 1, 1000).unwrap();
    let delta = 0.05;
    let tails = tail_sum_estimate(&map, &orbit, delta, 20);
    // Lebesgue is invariant, so the orbit spends a fraction r in B(0, r).
    let mut oracle_total = 0.0;
    for (i, &t) in tails.tail_sums.iter().enumerate() {
        let r = (-((i + 1) as f64) * delta).exp();
        oracle_total += r;
        assert!((t / r - 1.0).abs() < 0.1, "n = {}: {t} vs {r}", i + 1);
    }
    assert!((tails.tail_sum_total / oracle_total - 1.0).abs() < 0.1);
}

#[test]
fn empty_singular_set_gives_no_violations() {
    let map = MapSystem::from_name("doubling").unwrap();
    let orbit = typical_orbit(&map, X0, 5_000, 1, 1000).unwrap();
    for end in (200..5_000).step_by(97) {
        let bw = backward_window(&orbit, end, 200).unwrap();
        let p = slow_recurrence_profile(&map, &bw, 0.05);
        assert!(p.violations.is_empty());
        assert_eq!(p.last_violation, 0);
    }
    assert_eq!(tail_sum_estimate(&map, &orbit, 0.05, 10).tail_sum_total, 0.0);
}
