use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ifs::{periodic_point, repeller_entropy, repeller_pressure, words, PeriodicPoint, RepellerIFS};
use crate::error::Result;
use crate::potential::Potential;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyParams {
    pub pressure_k: usize,
    pub max_word_len: usize,
    pub word_cap: usize,
    pub seed: u64,
    /// Grid size for the sampled oscillation check of each potential over `rho`.
    pub oscillation_grid: usize,
}

impl Default for VerifyParams {
    fn default() -> Self {
        Self { pressure_k: 2, max_word_len: 3, word_cap: super::ifs::DEFAULT_WORD_CAP, seed: 0, oscillation_grid: 10_000 }
    }
}

/// Orbit-side quantities the repeller is compared against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetEstimates {
    pub h_mu: f64,
    pub chi: f64,
    /// Potentials with their orbit estimate of `∫ φ dμ`.
    pub integrals: Vec<(Potential, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialCheck {
    pub potential: String,
    pub integral: f64,
    pub pressure: f64,
    pub pressure_target: f64,
    pub pressure_words: usize,
    pub pressure_subsampled: bool,
    pub max_deviation: f64,
    pub oscillation: f64,
    pub oscillation_ok: bool,
    pub pass_b: bool,
    pub pass_c: bool,
    pub nominal_b: bool,
    pub nominal_c: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub map: String,
    pub m: usize,
    pub branches: usize,
    pub rejected: usize,
    pub eps: f64,
    pub h_repeller: f64,
    pub h_mu: f64,
    pub chi: f64,
    pub budget_a: f64,
    pub budget_b: f64,
    pub budget_c: f64,
    pub budget_d: f64,
    pub periodic_points_tested: usize,
    pub periodic_words_subsampled: bool,
    pub max_step_residual: f64,
    pub min_periodic_lyapunov: f64,
    pub potentials: Vec<PotentialCheck>,
    pub pass_a: bool,
    pub pass_b: bool,
    pub pass_c: bool,
    pub pass_d: bool,
    pub nominal_a: bool,
    pub nominal_d: bool,
}

impl VerificationReport {
    pub fn all_pass(&self) -> bool {
        self.pass_a && self.pass_b && self.pass_c && self.pass_d
    }

    pub fn margin_a(&self) -> f64 {
        self.h_repeller - (self.h_mu - self.budget_a)
    }

    pub fn margin_d(&self) -> f64 {
        self.min_periodic_lyapunov - (self.chi - self.budget_d)
    }
}

/// Periodic points for every word of length `1..=max_len`, capped per length.
pub fn test_periodic_points(ifs: &RepellerIFS, max_len: usize, cap: usize, seed: u64) -> Result<(Vec<PeriodicPoint>, bool)> {
    let mut all = Vec::new();
    let mut subsampled = false;
    for k in 1..=max_len {
        let (ws, _, sub) = words(ifs, k, cap, seed.wrapping_add(k as u64), true)?;
        subsampled |= sub;
        let pts: Vec<PeriodicPoint> = ws.par_iter().map(|w| periodic_point(ifs, w)).collect::<Result<_>>()?;
        all.extend(pts);
    }
    Ok((all, subsampled))
}

/// Checks the four conclusions against the budgets `3 eps`, `5 eps`, `2 eps`
/// and `2 eps`, and records whether the nominal `eps` would also pass.
pub fn verify_theorem(ifs: &RepellerIFS, targets: &TargetEstimates, eps: f64, params: &VerifyParams) -> Result<VerificationReport> {
    let map = &ifs.map;
    let h_repeller = repeller_entropy(ifs);
    let (points, periodic_words_subsampled) = test_periodic_points(ifs, params.max_word_len, params.word_cap, params.seed)?;
    let min_periodic_lyapunov = points.iter().map(PeriodicPoint::lyapunov).fold(f64::INFINITY, f64::min);
    let max_step_residual = points.iter().map(|p| p.step_residual).fold(0.0, f64::max);

    let mut potentials = Vec::with_capacity(targets.integrals.len());
    for (phi, integral) in &targets.integrals {
        let pressure = repeller_pressure(ifs, phi, params.pressure_k, params.word_cap, params.seed)?;
        let mut max_deviation: f64 = 0.0;
        for p in &points {
            max_deviation = max_deviation.max((p.birkhoff_average(map, phi)? - integral).abs());
        }
        let oscillation = phi.oscillation(map, ifs.rho, params.oscillation_grid);
        let pressure_target = targets.h_mu + integral - 5.0 * eps;
        potentials.push(PotentialCheck {
            potential: phi.to_string(),
            integral: *integral,
            pressure: pressure.value,
            pressure_target,
            pressure_words: pressure.words_used,
            pressure_subsampled: pressure.subsampled,
            max_deviation,
            oscillation,
            oscillation_ok: oscillation <= eps,
            pass_b: pressure.value >= pressure_target,
            pass_c: max_deviation <= 2.0 * eps,
            nominal_b: pressure.value >= targets.h_mu + integral - eps,
            nominal_c: max_deviation < eps,
        });
    }
    let slack = 1e-12;
    Ok(VerificationReport {
        map: map.name(),
        m: ifs.m,
        branches: ifs.branches.len(),
        rejected: ifs.rejected,
        eps,
        h_repeller,
        h_mu: targets.h_mu,
        chi: targets.chi,
        budget_a: 3.0 * eps,
        budget_b: 5.0 * eps,
        budget_c: 2.0 * eps,
        budget_d: 2.0 * eps,
        periodic_points_tested: points.len(),
        periodic_words_subsampled,
        max_step_residual,
        min_periodic_lyapunov,
        pass_a: h_repeller >= targets.h_mu - 3.0 * eps,
        pass_b: potentials.iter().all(|p| p.pass_b),
        pass_c: potentials.iter().all(|p| p.pass_c),
        pass_d: min_periodic_lyapunov >= targets.chi - 2.0 * eps - slack,
        nominal_a: h_repeller >= targets.h_mu - eps,
        nominal_d: min_periodic_lyapunov >= targets.chi - eps - slack,
        potentials,
    })
}
