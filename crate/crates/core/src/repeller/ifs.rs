use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::classing::ReturnClassing;
use crate::error::{Error, Result};
use crate::maps::MapSystem;
use crate::potential::Potential;

pub const PERIODIC_TOLERANCE: f64 = 1e-13;
pub const PERIODIC_MAX_ITER: usize = 1000;
pub const STEP_RESIDUAL_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_WORD_CAP: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IfsBranch {
    pub anchor: f64,
    /// Branch index of `f^t(anchor)` for `t = 0..m`.
    pub word: Vec<i64>,
    /// `f^t(anchor)` for `t = 0..m`; the pullback at step `t` picks the preimage along it.
    pub references: Vec<f64>,
    /// `U_x` as offsets from the base centre.
    pub lo: f64,
    pub hi: f64,
    /// Largest `|(f^m)'|^-1` seen on `U_x`.
    pub lipschitz: f64,
}

impl IfsBranch {
    pub fn diameter(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepellerIFS {
    pub map: MapSystem,
    pub base_center: f64,
    pub base_radius: f64,
    pub m: usize,
    pub branches: Vec<IfsBranch>,
    pub contraction_bound: f64,
    pub chi: f64,
    pub eps: f64,
    pub rho: f64,
    pub rejected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicPoint {
    pub word: Vec<usize>,
    pub p: f64,
    /// `p, f(p), ..., f^{mk-1}(p)`
    pub orbit: Vec<f64>,
    /// `ln |(f^{mk})'(p)|`
    pub log_derivative: f64,
    /// Largest `d(f(q_t), q_{t+1})` along the orbit, wrapping at the end.
    pub step_residual: f64,
    /// `d(f^{mk}(p), p)` by plain forward iteration.
    pub forward_residual: f64,
    pub iterations: usize,
}

impl PeriodicPoint {
    pub fn period(&self) -> usize {
        self.orbit.len()
    }

    pub fn lyapunov(&self) -> f64 {
        self.log_derivative / self.period() as f64
    }

    pub fn birkhoff_average(&self, map: &MapSystem, phi: &Potential) -> Result<f64> {
        let mut s = 0.0;
        for &q in &self.orbit {
            s += phi.eval(map, q)?;
        }
        Ok(s / self.period() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PressureEstimate {
    pub value: f64,
    pub k: usize,
    pub words_used: usize,
    pub total_words: f64,
    /// Words were subsampled, which biases the estimate downwards.
    pub subsampled: bool,
}

impl RepellerIFS {
    /// IFS from explicit branches, each given by the orbit segment it follows.
    pub fn from_references(map: MapSystem, base_center: f64, base_radius: f64, references: Vec<Vec<f64>>, chi: f64, eps: f64) -> Result<Self> {
        let m = references.first().map_or(0, Vec::len);
        if m == 0 || references.iter().any(|r| r.len() != m) {
            return Err(Error::BadParameter("every branch needs the same non-zero number of references".into()));
        }
        let mut branches = Vec::with_capacity(references.len());
        for refs in references {
            let word = refs.iter().map(|&r| map.branch_of(r)).collect::<Result<_>>()?;
            branches.push(IfsBranch { anchor: refs[0], word, references: refs, lo: 0.0, hi: 0.0, lipschitz: 0.0 });
        }
        let mut ifs = RepellerIFS {
            map,
            base_center,
            base_radius,
            m,
            branches,
            contraction_bound: (-(m as f64) * (chi - 2.0 * eps)).exp(),
            chi,
            eps,
            rho: 2.0 * base_radius,
            rejected: 0,
        };
        for i in 0..ifs.branches.len() {
            let (lo, hi, lip) = ifs.image_of_base(&ifs.branches[i])?;
            let b = &mut ifs.branches[i];
            (b.lo, b.hi, b.lipschitz) = (lo, hi, lip);
        }
        Ok(ifs)
    }

    pub fn entropy(&self) -> f64 {
        repeller_entropy(self)
    }

    /// Pulls `y` back through the `m` inverse branches of `branch`.
    pub fn apply(&self, branch: &IfsBranch, y: f64) -> Result<f64> {
        let mut y = y;
        for &r in branch.references.iter().rev() {
            y = self.map.pullback(y, r)?;
        }
        Ok(y)
    }

    fn offset(&self, y: f64) -> f64 {
        self.map.domain.displacement(self.base_center, y)
    }

    fn base_offsets(&self) -> (f64, f64) {
        let (mut lo, mut hi) = (-self.base_radius, self.base_radius);
        if !self.map.is_circle() {
            lo = lo.max(self.map.domain.lo - self.base_center);
            hi = hi.min(self.map.domain.hi - self.base_center);
        }
        (lo, hi)
    }

    /// `U_x` as offsets from the base centre and the largest inverse derivative on it.
    fn image_of_base(&self, branch: &IfsBranch) -> Result<(f64, f64, f64)> {
        let (lo, hi) = self.base_offsets();
        let mut offsets = Vec::with_capacity(9);
        let mut lip: f64 = 0.0;
        for i in 0..=8 {
            let y = self.map.domain.wrap(self.base_center + lo + (hi - lo) * i as f64 / 8.0);
            let mut z = y;
            let mut log_d = 0.0;
            for &r in branch.references.iter().rev() {
                z = self.map.pullback(z, r)?;
                log_d -= self.map.log_derivative(z)?;
            }
            offsets.push(self.offset(z));
            lip = lip.max(log_d.exp());
        }
        let a = offsets.iter().copied().fold(f64::INFINITY, f64::min);
        let b = offsets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok((a, b, lip))
    }
}

/// Inverse-branch system over the points of `F_m` in the chosen cell.
///
/// Branches whose pullback is undefined, too wide, leaves the base ball or
/// overlaps an earlier branch are dropped and counted.
pub fn build_ifs(map: &MapSystem, classing: &ReturnClassing, chi: f64, eps: f64) -> Result<RepellerIFS> {
    let m = classing.m;
    let mut ifs = RepellerIFS {
        map: map.clone(),
        base_center: classing.base_center,
        base_radius: 0.5 * classing.rho,
        m,
        branches: Vec::new(),
        contraction_bound: (-(m as f64) * (chi - 2.0 * eps)).exp(),
        chi,
        eps,
        rho: classing.rho,
        rejected: 0,
    };
    let (base_lo, base_hi) = ifs.base_offsets();
    let slack = 1e-12 * classing.rho;
    let candidates: Vec<Option<IfsBranch>> = classing
        .f_m_cell
        .par_iter()
        .map(|p| {
            let references = p.forward[..m].to_vec();
            let word: Vec<i64> = references.iter().map(|&r| map.branch_of(r)).collect::<Result<_>>().ok()?;
            let mut b = IfsBranch { anchor: p.x, word, references, lo: 0.0, hi: 0.0, lipschitz: 0.0 };
            let (lo, hi, lip) = ifs.image_of_base(&b).ok()?;
            (b.lo, b.hi, b.lipschitz) = (lo, hi, lip);
            let ok = hi - lo <= ifs.contraction_bound * classing.rho * (1.0 + 1e-12)
                && lip <= ifs.contraction_bound * (1.0 + 1e-12)
                && lo >= base_lo - slack
                && hi <= base_hi + slack;
            ok.then_some(b)
        })
        .collect();
    let mut kept: Vec<IfsBranch> = Vec::new();
    for c in candidates {
        match c {
            Some(b) if kept.iter().all(|k| b.hi < k.lo || b.lo > k.hi) => kept.push(b),
            _ => ifs.rejected += 1,
        }
    }
    if kept.is_empty() {
        return Err(Error::AllBranchesRejected);
    }
    kept.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    ifs.branches = kept;
    Ok(ifs)
}

/// Fixed point of `g_{w_k} ∘ ... ∘ g_{w_1}`, where `w_1` is applied first.
pub fn periodic_point(ifs: &RepellerIFS, word: &[usize]) -> Result<PeriodicPoint> {
    if word.is_empty() {
        return Err(Error::BadParameter("periodic word must be non-empty".into()));
    }
    if let Some(&w) = word.iter().find(|&&w| w >= ifs.branches.len()) {
        return Err(Error::BadParameter(format!("branch {w} does not exist")));
    }
    let compose = |y: f64, trail: Option<&mut Vec<f64>>| -> Result<f64> {
        let mut y = y;
        let mut trail = trail;
        for &w in word {
            for &r in ifs.branches[w].references.iter().rev() {
                y = ifs.map.pullback(y, r)?;
                if let Some(t) = trail.as_deref_mut() {
                    t.push(y);
                }
            }
        }
        Ok(y)
    };
    let mut y = ifs.base_center;
    let mut iterations = 0;
    loop {
        let next = compose(y, None)?;
        iterations += 1;
        let step = ifs.map.metric(next, y);
        y = next;
        if step < PERIODIC_TOLERANCE {
            break;
        }
        if iterations >= PERIODIC_MAX_ITER {
            return Err(Error::NoConvergence { iterations });
        }
    }
    let mut trail = Vec::with_capacity(word.len() * ifs.m);
    let p = compose(y, Some(&mut trail))?;
    trail.reverse();
    let orbit = trail;

    let mut log_derivative = 0.0;
    let mut step_residual: f64 = 0.0;
    for (t, &q) in orbit.iter().enumerate() {
        log_derivative += ifs.map.log_derivative(q)?;
        let next = orbit[(t + 1) % orbit.len()];
        step_residual = step_residual.max(ifs.map.metric(ifs.map.eval(q)?, next));
    }
    let mut z = p;
    for _ in 0..orbit.len() {
        z = ifs.map.eval(z)?;
    }
    if step_residual >= STEP_RESIDUAL_TOLERANCE {
        return Err(Error::NoConvergence { iterations });
    }
    Ok(PeriodicPoint {
        word: word.to_vec(),
        p,
        forward_residual: ifs.map.metric(z, p),
        orbit,
        log_derivative,
        step_residual,
        iterations,
    })
}

/// `(1/m) ln (number of branches)`
pub fn repeller_entropy(ifs: &RepellerIFS) -> f64 {
    if ifs.branches.is_empty() {
        return 0.0;
    }
    (ifs.branches.len() as f64).ln() / ifs.m as f64
}

/// Word `index` in base `b`, most significant letter first.
pub fn word_of(mut index: usize, b: usize, k: usize) -> Vec<usize> {
    let mut w = vec![0; k];
    for slot in w.iter_mut().rev() {
        *slot = index % b;
        index /= b;
    }
    w
}

/// Words of length `k` over the branch alphabet, all of them when there are at
/// most `cap`, otherwise `cap` uniform draws (or `CapExceeded` without subsampling).
pub fn words(ifs: &RepellerIFS, k: usize, cap: usize, seed: u64, subsample: bool) -> Result<(Vec<Vec<usize>>, f64, bool)> {
    let b = ifs.branches.len();
    let total = (b as f64).powi(k as i32);
    if total <= cap as f64 {
        let n = b.pow(k as u32);
        return Ok(((0..n).map(|i| word_of(i, b, k)).collect(), total, false));
    }
    if !subsample {
        return Err(Error::CapExceeded { words: total.min(u128::MAX as f64) as u128, cap });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample = (0..cap).map(|_| (0..k).map(|_| rng.random_range(0..b)).collect()).collect();
    log::info!("pressure: sampling {cap} of {total:e} words of length {k}");
    Ok((sample, total, true))
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return top;
    }
    top + values.iter().map(|v| (v - top).exp()).sum::<f64>().ln()
}

/// `(1/(mk)) ln Σ_w exp(S_{mk} φ(p_w))` over words of length `k`.
pub fn repeller_pressure(ifs: &RepellerIFS, phi: &Potential, k: usize, cap: usize, seed: u64) -> Result<PressureEstimate> {
    if k < 1 {
        return Err(Error::BadParameter("pressure needs k >= 1".into()));
    }
    let (ws, total, subsampled) = words(ifs, k, cap, seed, true)?;
    let sums: Vec<f64> = ws
        .par_iter()
        .map(|w| -> Result<f64> {
            let p = periodic_point(ifs, w)?;
            let mut s = 0.0;
            for &q in &p.orbit {
                s += phi.eval(&ifs.map, q)?;
            }
            Ok(s)
        })
        .collect::<Result<_>>()?;
    let mut lse = log_sum_exp(&sums);
    if subsampled {
        lse += total.ln() - (sums.len() as f64).ln();
    }
    Ok(PressureEstimate { value: lse / (ifs.m * k) as f64, k, words_used: ws.len(), total_words: total, subsampled })
}
