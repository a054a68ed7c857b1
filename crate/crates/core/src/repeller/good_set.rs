use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::MapSystem;
use crate::orbits::{backward_window, Orbit};
use crate::potential::Potential;
use crate::recurrence::slow_recurrence_profile;
use crate::tempering::{check_epsilon, contraction_radius, TemperingProfile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodSetParams {
    pub chi: f64,
    pub eps: f64,
    pub delta: f64,
    pub depth: usize,
    pub windows: usize,
    pub n: usize,
    /// Potentials paired with their orbit estimate of `∫ φ dμ`.
    pub potentials: Vec<(Potential, f64)>,
}

impl GoodSetParams {
    /// Number of return times tried, `floor(eps n)` but at least one.
    pub fn return_span(&self) -> usize {
        ((self.eps * self.n as f64).floor() as usize).max(1)
    }

    pub fn orbit_len_needed(&self) -> usize {
        self.depth + self.windows + self.n + self.return_span()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodPoint {
    pub index: usize,
    pub x: f64,
    pub rho: f64,
    pub c_eps: f64,
    pub last_violation: usize,
    /// Times `k` in the return window at which the point comes back to its cell
    /// inside the regular set with Birkhoff averages on target.
    pub return_times: Vec<usize>,
    /// `x, f(x), ...` up to the end of the return window.
    pub forward: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodSet {
    pub points: Vec<GoodPoint>,
    pub rho: f64,
    pub acceptance_rate: f64,
    /// Fraction of examined windows that also pass the recurrence filter.
    pub lambda_star_rate: f64,
    pub delta: f64,
    pub chi: f64,
    pub eps: f64,
    pub n: usize,
    pub return_span: usize,
    pub windows_examined: usize,
    pub depth: usize,
    pub cell_width: f64,
    pub thin: bool,
    /// Per-window outcomes for the examined windows: `(index, profile or None, last_violation)`.
    pub profiles: Vec<WindowOutcome>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowOutcome {
    pub index: usize,
    pub profile: Option<TemperingProfile>,
    pub last_violation: usize,
    pub in_lambda1: bool,
}

/// Width of the partition cells: the largest `L / c` strictly below `rho / 4`.
pub fn cell_width(map: &MapSystem, rho: f64) -> f64 {
    let len = map.domain.length();
    len / ((len / (0.25 * rho)).floor() + 1.0)
}

pub fn cell_of(map: &MapSystem, width: f64, x: f64) -> i64 {
    ((x - map.domain.lo) / width).floor() as i64
}

fn lower_quantile(mut v: Vec<f64>, q: f64) -> f64 {
    v.sort_by(f64::total_cmp);
    let i = ((q * v.len() as f64).floor() as usize).min(v.len() - 1);
    v[i]
}

/// Selects the good set and fails with `GoodSetTooThin` when fewer than
/// `1 - 2 delta` of the windows are regular.
pub fn select_good_set(map: &MapSystem, orbit: &Orbit, params: &GoodSetParams) -> Result<GoodSet> {
    let set = select_good_set_lenient(map, orbit, params)?;
    if set.thin {
        return Err(Error::GoodSetTooThin { rate: set.acceptance_rate, threshold: 1.0 - 2.0 * params.delta });
    }
    Ok(set)
}

/// Like [`select_good_set`] but returns a thin set with `thin = true`.
pub fn select_good_set_lenient(map: &MapSystem, orbit: &Orbit, params: &GoodSetParams) -> Result<GoodSet> {
    check_epsilon(params.chi, params.eps)?;
    if !(params.delta > 0.0 && params.delta < 0.5) {
        return Err(Error::BadParameter(format!("delta must lie in (0, 1/2), got {}", params.delta)));
    }
    if params.windows < 1 || params.n < 1 {
        return Err(Error::BadParameter("need at least one window and n >= 1".into()));
    }
    let span = params.return_span();
    let needed = params.orbit_len_needed();
    if orbit.len() < needed {
        return Err(Error::DepthExceedsHistory { depth: needed, available: orbit.len() });
    }
    let start = params.depth;
    let outcomes: Vec<WindowOutcome> = (start..needed)
        .into_par_iter()
        .map(|index| -> Result<WindowOutcome> {
            let bw = backward_window(orbit, index, params.depth)?;
            let last_violation = slow_recurrence_profile(map, &bw, params.chi).last_violation;
            let profile = match contraction_radius(map, &bw, params.chi, params.eps) {
                Ok(p) => Some(p),
                Err(Error::TemperingTooWeak { .. } | Error::NoSafetyFactor | Error::ZeroDerivative { .. }) => None,
                Err(e) => return Err(e),
            };
            Ok(WindowOutcome { index, profile, last_violation, in_lambda1: false })
        })
        .collect::<Result<_>>()?;
    let regular = |o: &WindowOutcome| o.profile.is_some() && o.last_violation < params.n;

    let examined = &outcomes[..params.windows];
    let radii: Vec<f64> = examined.iter().filter(|o| regular(o)).map(|o| o.profile.unwrap().rho).collect();
    if radii.is_empty() {
        return Ok(GoodSet {
            points: Vec::new(),
            rho: 0.0,
            acceptance_rate: 0.0,
            lambda_star_rate: 0.0,
            delta: params.delta,
            chi: params.chi,
            eps: params.eps,
            n: params.n,
            return_span: span,
            windows_examined: params.windows,
            depth: params.depth,
            cell_width: 0.0,
            thin: true,
            profiles: examined.to_vec(),
        });
    }
    let rho = lower_quantile(radii, params.delta);
    let mut outcomes = outcomes;
    for o in outcomes.iter_mut() {
        o.in_lambda1 = regular(o) && o.profile.unwrap().rho >= rho;
    }
    let accepted = outcomes[..params.windows].iter().filter(|o| o.in_lambda1).count();
    let acceptance_rate = accepted as f64 / params.windows as f64;

    let width = cell_width(map, rho);
    let points: Vec<GoodPoint> = outcomes[..params.windows]
        .par_iter()
        .filter(|o| o.in_lambda1)
        .map(|o| -> Result<Option<GoodPoint>> {
            let i = o.index;
            let forward = orbit.points[i..i + params.n + span].to_vec();
            let home = cell_of(map, width, forward[0]);
            let mut sums = vec![0.0; params.potentials.len()];
            let mut return_times = Vec::new();
            for (k, &y) in forward.iter().enumerate() {
                if k >= params.n {
                    let on_target = params
                        .potentials
                        .iter()
                        .zip(&sums)
                        .all(|((_, integral), s)| (s / k as f64 - integral).abs() <= params.eps);
                    if on_target && cell_of(map, width, y) == home && outcomes[i + k - start].in_lambda1 {
                        return_times.push(k);
                    }
                }
                for ((phi, _), s) in params.potentials.iter().zip(sums.iter_mut()) {
                    *s += phi.eval(map, y)?;
                }
            }
            let p = o.profile.unwrap();
            Ok((!return_times.is_empty()).then(|| GoodPoint {
                index: i,
                x: forward[0],
                rho: p.rho,
                c_eps: p.c_eps,
                last_violation: o.last_violation,
                return_times,
                forward,
            }))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    Ok(GoodSet {
        lambda_star_rate: points.len() as f64 / params.windows as f64,
        points,
        rho,
        acceptance_rate,
        delta: params.delta,
        chi: params.chi,
        eps: params.eps,
        n: params.n,
        return_span: span,
        windows_examined: params.windows,
        depth: params.depth,
        cell_width: width,
        thin: acceptance_rate < 1.0 - 2.0 * params.delta,
        profiles: outcomes[..params.windows].to_vec(),
    })
}
