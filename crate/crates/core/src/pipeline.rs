//! End-to-end construction: orbit statistics, entropy, good set, classing,
//! repeller and verification.

use serde::{Deserialize, Serialize};

use crate::entropy::{katok_entropy, EntropyEstimate};
use crate::error::Result;
use crate::maps::MapSystem;
use crate::orbits::{ergodic_estimates, typical_orbit, ErgodicEstimates, Orbit, BURN_IN};
use crate::potential::Potential;
use crate::repeller::{
    build_ifs, return_classing, select_good_set_lenient, verify_theorem, GoodSet, GoodSetParams, RepellerIFS, ReturnClassing,
    TargetEstimates, VerificationReport, VerifyParams,
};
use crate::tempering::check_epsilon;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineParams {
    pub x0: f64,
    pub seed: u64,
    pub orbit_len: usize,
    pub burn_in: usize,
    pub eps: f64,
    pub delta: f64,
    pub depth: usize,
    pub windows: usize,
    pub n: usize,
    pub potentials: Vec<Potential>,
    pub entropy_pool: usize,
    pub n_grid: Vec<usize>,
    pub eps_grid: Vec<f64>,
    pub drift_threshold: f64,
    pub verify: VerifyParams,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            x0: 0.123456789,
            seed: 1,
            orbit_len: 200_000,
            burn_in: BURN_IN,
            eps: 0.15,
            delta: 0.05,
            depth: 200,
            windows: 100_000,
            n: 10,
            potentials: vec![Potential::Coordinate],
            entropy_pool: 100_000,
            n_grid: (1..=12).collect(),
            eps_grid: vec![1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0],
            drift_threshold: 0.05,
            verify: VerifyParams::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Estimation {
    pub orbit: Orbit,
    pub estimates: ErgodicEstimates,
    pub entropy: EntropyEstimate,
}

#[derive(Debug, Clone)]
pub struct BuildOutcome {
    pub estimation: Estimation,
    pub good: GoodSet,
    pub classing: ReturnClassing,
    pub ifs: RepellerIFS,
    pub report: VerificationReport,
}

pub fn targets_from(est: &Estimation, potentials: &[Potential]) -> TargetEstimates {
    TargetEstimates {
        h_mu: est.entropy.h,
        chi: est.estimates.chi_lower,
        integrals: potentials
            .iter()
            .map(|p| (p.clone(), est.estimates.birkhoff_mean(&p.to_string()).unwrap_or(f64::NAN)))
            .collect(),
    }
}

impl PipelineParams {
    pub fn good_set_params(&self, chi: f64, integrals: Vec<(Potential, f64)>) -> GoodSetParams {
        GoodSetParams {
            chi,
            eps: self.eps,
            delta: self.delta,
            depth: self.depth,
            windows: self.windows,
            n: self.n,
            potentials: integrals,
        }
    }

    /// Orbit long enough for both the statistics and the good-set windows.
    pub fn orbit_len_needed(&self) -> usize {
        let g = self.good_set_params(1.0, Vec::new());
        self.orbit_len.max(g.orbit_len_needed()).max(self.entropy_pool)
    }
}

/// Orbit, ergodic estimates and the Katok entropy.
pub fn estimate(map: &MapSystem, params: &PipelineParams) -> Result<Estimation> {
    let orbit = typical_orbit(map, params.x0, params.orbit_len_needed(), params.seed, params.burn_in)?;
    let estimates = ergodic_estimates(map, &orbit, &params.potentials, params.drift_threshold)?;
    let pool = &orbit.points[..params.entropy_pool.min(orbit.len())];
    let entropy = katok_entropy(map, pool, params.delta, &params.n_grid, &params.eps_grid)?;
    Ok(Estimation { orbit, estimates, entropy })
}

pub fn build(map: &MapSystem, params: &PipelineParams) -> Result<BuildOutcome> {
    let estimation = estimate(map, params)?;
    build_from(map, params, estimation)
}

pub fn build_from(map: &MapSystem, params: &PipelineParams, estimation: Estimation) -> Result<BuildOutcome> {
    let chi = estimation.estimates.chi_lower;
    check_epsilon(chi, params.eps)?;
    let targets = targets_from(&estimation, &params.potentials);
    let gp = params.good_set_params(chi, targets.integrals.clone());
    let good = select_good_set_lenient(map, &estimation.orbit, &gp)?;
    if good.thin {
        log::warn!(
            "{}: good-set acceptance {:.4} is below 1 - 2 delta = {:.4}",
            map.name(),
            good.acceptance_rate,
            1.0 - 2.0 * params.delta
        );
    }
    let classing = return_classing(map, &good, params.n, params.eps)?;
    let ifs = build_ifs(map, &classing, chi, params.eps)?;
    let report = verify_theorem(&ifs, &targets, params.eps, &params.verify)?;
    Ok(BuildOutcome { estimation, good, classing, ifs, report })
}
