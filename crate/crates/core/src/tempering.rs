//! Regularity data along finite backward orbits: `C_eps`, the adapted norm,
//! the tempering kernel and the backward contraction radius.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::MapSystem;
use crate::orbits::BackwardOrbit;

pub const SAFETY_PROBES: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperingProfile {
    pub chi: f64,
    pub epsilon: f64,
    pub c_eps: f64,
    /// `C_eps` recomputed on the older half of the window.
    pub c_eps_half: f64,
    pub adapted_norm_factor: f64,
    pub r_tilde: f64,
    pub r: f64,
    pub safety: f64,
    pub rho: f64,
    pub depth_used: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptedNorm {
    pub value: f64,
    /// `||T^-1 v||'` at the previous point divided by `||v||'`, when the window allows it.
    pub one_step_ratio: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractionStep {
    pub k: usize,
    pub log_derivative: f64,
    pub distance: f64,
    pub log_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub steps: Vec<ContractionStep>,
    pub initial_distance: f64,
    pub pass: bool,
}

pub fn check_epsilon(chi: f64, eps: f64) -> Result<()> {
    if eps > 0.0 && eps < chi / 3.0 {
        Ok(())
    } else {
        Err(Error::InvalidEpsilon { eps, chi })
    }
}

/// `ln |f'(x_{-k})|` for `k = 1..=depth`, stored at index `k`.
fn window_logs(map: &MapSystem, bw: &BackwardOrbit) -> Result<Vec<f64>> {
    let mut ld = vec![0.0; bw.depth() + 1];
    for (k, slot) in ld.iter_mut().enumerate().skip(1) {
        let x = bw.x(k);
        *slot = match map.log_derivative(x) {
            Ok(l) => l,
            Err(Error::NonFiniteLog { .. }) => return Err(Error::ZeroDerivative { k, x }),
            Err(e) => return Err(e),
        };
    }
    Ok(ld)
}

/// `log C_eps` at every shift `f^-j(x̂)`, `j = 0..=depth`, truncated at the window start.
fn shifted_log_c(ld: &[f64], chi: f64, eps: f64) -> Vec<f64> {
    let n = ld.len() - 1;
    let mut lc = vec![0.0; n + 1];
    for j in (0..n).rev() {
        lc[j] = (chi - eps - ld[j + 1] + lc[j + 1]).max(0.0);
    }
    lc
}

fn log_c_direct(ld: &[f64], upto: usize, chi: f64, eps: f64) -> f64 {
    let mut s = 0.0;
    let mut best: f64 = 0.0;
    for (n, l) in ld.iter().enumerate().take(upto + 1).skip(1) {
        s += l;
        best = best.max(n as f64 * (chi - eps) - s);
    }
    best
}

/// `sup_n |(f^n)'(x_{-n})|^-1 e^{n(chi - eps)}` over the window.
pub fn c_epsilon(map: &MapSystem, bw: &BackwardOrbit, chi: f64, eps: f64) -> Result<f64> {
    check_epsilon(chi, eps)?;
    let ld = window_logs(map, bw)?;
    Ok(log_c_direct(&ld, bw.depth(), chi, eps).exp())
}

pub fn adapted_norm(map: &MapSystem, bw: &BackwardOrbit, chi: f64, eps: f64, v: f64) -> Result<AdaptedNorm> {
    check_epsilon(chi, eps)?;
    let ld = window_logs(map, bw)?;
    let mut s = 0.0;
    let mut value = v.abs();
    for (n, l) in ld.iter().enumerate().skip(1) {
        s += l;
        value = value.max(v.abs() * (n as f64 * (chi - eps) - s).exp());
    }
    let one_step_ratio = (bw.depth() >= 1 && value > 0.0).then(|| {
        let prev = log_c_direct(&ld[1..], bw.depth() - 1, chi, eps).exp();
        v.abs() * (-ld[1]).exp() * prev / value
    });
    Ok(AdaptedNorm { value, one_step_ratio })
}

/// Two-pass infima `b_i = inf_n x_{i+n} e^{n eps}`, `r_i = inf_n b_{i-n} e^{n eps}`
/// over a sequence listed in forward time.
pub fn tempering_kernel(values: &[f64], eps: f64) -> Result<Vec<f64>> {
    if !(eps > 0.0) {
        return Err(Error::BadParameter(format!("kernel needs eps > 0, got {eps}")));
    }
    if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonPositiveInput { index, value });
    }
    let mut b: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    for i in (0..b.len().saturating_sub(1)).rev() {
        b[i] = b[i].min(b[i + 1] + eps);
    }
    for i in 1..b.len() {
        b[i] = b[i].min(b[i - 1] + eps);
    }
    Ok(b.into_iter().map(f64::exp).collect())
}

/// Backward pull of `y` along the window's branches, checked against the
/// uniform rate `e^{-k(chi - 2 eps)}`.
pub fn verify_backward_contraction(map: &MapSystem, bw: &BackwardOrbit, y: f64, chi: f64, eps: f64) -> Result<ContractionReport> {
    let rate = chi - 2.0 * eps;
    let slack = 1e-14 * map.domain.length();
    let x0 = bw.x0();
    let initial_distance = map.metric(x0, y);
    let mut py = y;
    let mut px = x0;
    let mut log_der = 0.0;
    let mut steps = Vec::with_capacity(bw.depth());
    let mut pass = true;
    for k in 1..=bw.depth() {
        let reference = bw.x(k);
        py = map.pullback(py, reference)?;
        px = map.pullback(px, reference)?;
        let l = match map.log_derivative(py) {
            Ok(l) => l,
            Err(Error::SingularPoint { .. } | Error::NonFiniteLog { .. }) => {
                pass = false;
                break;
            }
            Err(e) => return Err(e),
        };
        log_der -= l;
        let log_bound = -(k as f64) * rate;
        let distance = map.metric(px, py);
        if log_der > log_bound + 1e-12 * (k as f64 * rate).max(1.0) || distance > log_bound.exp() * initial_distance * (1.0 + 1e-12) + slack {
            pass = false;
        }
        steps.push(ContractionStep { k, log_derivative: log_der, distance, log_bound });
    }
    Ok(ContractionReport { steps, initial_distance, pass })
}

fn probes(map: &MapSystem, x0: f64, radius: f64) -> Vec<f64> {
    [-1.0 + 1e-9, -0.5, 0.5, 1.0 - 1e-9]
        .iter()
        .map(|s| {
            let y = x0 + s * radius;
            if map.is_circle() {
                map.domain.wrap(y)
            } else {
                y.clamp(map.domain.lo, map.domain.hi)
            }
        })
        .collect()
}

fn safety_passes(map: &MapSystem, bw: &BackwardOrbit, chi: f64, eps: f64, radius: f64) -> bool {
    probes(map, bw.x0(), radius)
        .into_iter()
        .all(|y| verify_backward_contraction(map, bw, y, chi, eps).is_ok_and(|rep| rep.pass))
}

/// Full tempering profile of the window; `TemperingTooWeak` when `C_eps >= e^eps`.
pub fn contraction_radius(map: &MapSystem, bw: &BackwardOrbit, chi: f64, eps: f64) -> Result<TemperingProfile> {
    check_epsilon(chi, eps)?;
    if bw.depth() < 1 {
        return Err(Error::DepthExceedsHistory { depth: 1, available: 0 });
    }
    let ld = window_logs(map, bw)?;
    let lc = shifted_log_c(&ld, chi, eps);
    if lc[0] >= eps {
        return Err(Error::TemperingTooWeak { c_eps: lc[0].exp(), bound: eps.exp() });
    }
    let half = bw.depth() / 2;
    let r_tilde_at = |j: usize| -> f64 {
        if lc[j] >= eps {
            return f64::INFINITY;
        }
        let x = bw.x(j);
        let num = (-chi + 2.0 * eps - lc[j]).exp() - (-chi + eps).exp();
        let first = (num / (lc[j + 1].exp() * map.holder_h(x))).powf(1.0 / map.beta);
        first.min(1.0).min(map.holder_g(x))
    };
    let series: Vec<f64> = (0..=half).rev().map(r_tilde_at).collect();
    let r_tilde = series[half];
    if !(r_tilde > 0.0) {
        return Err(Error::NonPositiveInput { index: half, value: r_tilde });
    }
    let r = tempering_kernel(&series, eps)?[half];

    let (mut lo, mut hi) = (0u32, SAFETY_PROBES);
    if safety_passes(map, bw, chi, eps, r) {
        hi = 0;
    }
    while lo < hi {
        let mid = (lo + hi) / 2;
        if safety_passes(map, bw, chi, eps, r * 0.5f64.powi(mid as i32)) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    if lo == SAFETY_PROBES {
        return Err(Error::NoSafetyFactor);
    }
    let safety = 0.5f64.powi(lo as i32);
    Ok(TemperingProfile {
        chi,
        epsilon: eps,
        c_eps: lc[0].exp(),
        c_eps_half: log_c_direct(&ld, half, chi, eps).exp(),
        adapted_norm_factor: lc[0].exp(),
        r_tilde,
        r,
        safety,
        rho: r * safety,
        depth_used: bw.depth(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn window(points: Vec<f64>) -> BackwardOrbit {
        let end_index = points.len() - 1;
        BackwardOrbit { points, end_index }
    }

    fn doubling_window(depth: usize) -> BackwardOrbit {
        let m = MapSystem::from_name("doubling").unwrap();
        let o = crate::orbits::iterate(&m, 0.1234567, depth + 1, 9).unwrap();
        window(o.points)
    }

    #[test]
    fn doubling_c_eps_is_one() {
        let m = MapSystem::from_name("doubling").unwrap();
        let bw = doubling_window(50);
        assert_eq!(c_epsilon(&m, &bw, LN_2, 0.1).unwrap(), 1.0);
        assert_eq!(adapted_norm(&m, &bw, LN_2, 0.1, 1.0).unwrap().value, 1.0);
        assert_eq!(adapted_norm(&m, &bw, LN_2, 0.1, 0.0).unwrap().value, 0.0);
    }

    #[test]
    fn epsilon_gate() {
        let m = MapSystem::from_name("doubling").unwrap();
        let bw = doubling_window(5);
        assert!(matches!(c_epsilon(&m, &bw, LN_2, LN_2 / 3.0), Err(Error::InvalidEpsilon { .. })));
        assert!(matches!(c_epsilon(&m, &bw, LN_2, 0.0), Err(Error::InvalidEpsilon { .. })));
    }

    #[test]
    fn kernel_constant_and_spike() {
        assert_eq!(tempering_kernel(&[0.3; 6], 0.1).unwrap(), vec![0.3; 6]);
        let out = tempering_kernel(&[1.0, 1.0, 1e-3, 1.0, 1.0], 0.1).unwrap();
        let e = 0.1f64.exp();
        let want = [1e-3 * e * e, 1e-3 * e, 1e-3, 1e-3 * e, 1e-3 * e * e];
        for (a, b) in out.iter().zip(want) {
            assert!((a / b - 1.0).abs() < 1e-12);
        }
        assert!(matches!(tempering_kernel(&[1.0, 0.0], 0.1), Err(Error::NonPositiveInput { index: 1, .. })));
    }

    #[test]
    fn kernel_keeps_slowly_growing_sequence() {
        let eps = 0.2;
        let seq: Vec<f64> = (0..30).map(|n| 0.7 * (eps * n as f64 / 2.0).exp()).collect();
        let out = tempering_kernel(&seq, eps).unwrap();
        for (a, b) in out.iter().zip(&seq) {
            assert!((a / b - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn doubling_radius_closed_form() {
        let m = MapSystem::from_name("doubling").unwrap();
        let bw = doubling_window(200);
        let p = contraction_radius(&m, &bw, LN_2, 0.1).unwrap();
        let want = 0.5 * (0.2f64.exp() - 0.1f64.exp());
        assert!((p.r_tilde - want).abs() < 1e-15);
        assert!((p.r - want).abs() < 1e-15);
        assert!(p.rho <= p.r && p.safety <= 1.0);
        assert_eq!(p.c_eps, 1.0);
    }

    #[test]
    fn linear_mod_radius_uses_its_exponent() {
        let m = MapSystem::from_name("ternary").unwrap();
        let o = crate::orbits::iterate(&m, 0.31, 101, 2).unwrap();
        let chi = 3f64.ln();
        let p = contraction_radius(&m, &window(o.points), chi, 0.2).unwrap();
        let want = (-chi + 0.4f64).exp() - (-chi + 0.2f64).exp();
        assert!((p.r_tilde - want.min(1.0)).abs() < 1e-15);
    }

    #[test]
    fn weak_tempering_is_rejected() {
        let m = MapSystem::from_name("cusp").unwrap();
        // x_{-1} near +-1 has |f'| close to 1, far below e^{chi - eps}
        let bw = window(vec![0.99, m.eval(0.99).unwrap()]);
        assert!(matches!(contraction_radius(&m, &bw, 0.5, 0.1), Err(Error::TemperingTooWeak { .. })));
    }

    #[test]
    fn verify_trivial_cases() {
        let m = MapSystem::from_name("doubling").unwrap();
        let bw = doubling_window(40);
        let rep = verify_backward_contraction(&m, &bw, bw.x0(), LN_2, 0.1).unwrap();
        assert!(rep.pass && rep.steps.iter().all(|s| s.distance == 0.0));
        let y = m.domain.wrap(bw.x0() + 0.01);
        let rep = verify_backward_contraction(&m, &bw, y, LN_2, 0.1).unwrap();
        assert!(rep.pass);
        for s in &rep.steps {
            assert!((s.log_derivative + s.k as f64 * LN_2).abs() < 1e-12);
        }
    }
}
