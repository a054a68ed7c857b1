//! One-dimensional maps with singular sets, inverse branches and Hölder data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative width of the band around `S` that evaluation refuses.
pub const SINGULAR_GUARD: f64 = 1e-14;

/// Stand-in for `d(x, S)` when `S` is empty, in units of the domain length.
pub const EMPTY_DISTANCE_FACTOR: f64 = 1e6;

pub const DEFAULT_GAUSS_BRANCHES: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub lo: f64,
    pub hi: f64,
    pub circle: bool,
}

impl Domain {
    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn metric(&self, x: f64, y: f64) -> f64 {
        let d = (x - y).abs();
        if self.circle {
            let l = self.length();
            let d = d.rem_euclid(l);
            d.min(l - d)
        } else {
            d
        }
    }

    /// Signed displacement from `x` to `y`, taking the short way round on the circle.
    pub fn displacement(&self, x: f64, y: f64) -> f64 {
        let d = y - x;
        if self.circle {
            let l = self.length();
            let d = d.rem_euclid(l);
            if d > 0.5 * l {
                d - l
            } else {
                d
            }
        } else {
            d
        }
    }

    pub fn wrap(&self, x: f64) -> f64 {
        if self.circle {
            let w = self.lo + (x - self.lo).rem_euclid(self.length());
            if w >= self.hi {
                self.lo
            } else {
                w
            }
        } else {
            x
        }
    }
}

/// Closed-form branch primitive of a custom piecewise map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Formula {
    /// `slope * x + intercept`
    Affine { slope: f64, intercept: f64 },
    /// `c * |x - s|^p + t`
    Power { c: f64, p: f64, s: f64, t: f64 },
    /// `c / (x - s) + t`
    Reciprocal { c: f64, s: f64, t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchSpec {
    pub lo: f64,
    pub hi: f64,
    pub formula: Formula,
}

impl BranchSpec {
    fn side(&self, s: f64) -> f64 {
        if 0.5 * (self.lo + self.hi) >= s {
            1.0
        } else {
            -1.0
        }
    }

    fn eval(&self, x: f64) -> f64 {
        match self.formula {
            Formula::Affine { slope, intercept } => slope * x + intercept,
            Formula::Power { c, p, s, t } => c * (x - s).abs().powf(p) + t,
            Formula::Reciprocal { c, s, t } => c / (x - s) + t,
        }
    }

    fn derivative(&self, x: f64) -> f64 {
        match self.formula {
            Formula::Affine { slope, .. } => slope,
            Formula::Power { c, p, s, .. } => c * p * self.side(s) * (x - s).abs().powf(p - 1.0),
            Formula::Reciprocal { c, s, .. } => -c / ((x - s) * (x - s)),
        }
    }

    fn inverse(&self, y: f64) -> f64 {
        match self.formula {
            Formula::Affine { slope, intercept } => (y - intercept) / slope,
            Formula::Power { c, p, s, t } => s + self.side(s) * ((y - t) / c).max(0.0).powf(1.0 / p),
            Formula::Reciprocal { c, s, t } => s + c / (y - t),
        }
    }

    fn image(&self) -> (f64, f64) {
        let a = self.eval(self.lo);
        let b = self.eval(self.hi);
        (a.min(b), a.max(b))
    }

    fn validate(&self) -> Result<()> {
        if !(self.lo < self.hi) {
            return Err(Error::BadParameter(format!("branch [{}, {}] is empty", self.lo, self.hi)));
        }
        let bad = |msg: &str| Err(Error::BadParameter(format!("branch [{}, {}]: {msg}", self.lo, self.hi)));
        match self.formula {
            Formula::Affine { slope: 0.0, .. } => bad("zero slope"),
            Formula::Power { c, p, s, .. } if c == 0.0 || p <= 0.0 || (s > self.lo && s < self.hi) => {
                bad("power needs c != 0, p > 0 and its centre outside the branch")
            }
            Formula::Reciprocal { c, s, .. } if c == 0.0 || (s >= self.lo && s <= self.hi) => {
                bad("reciprocal needs c != 0 and its pole outside the branch")
            }
            _ => Ok(()),
        }
    }
}

/// A user-defined interval map glued from monotone analytic branches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseSpec {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    #[serde(default)]
    pub singular_set: Vec<f64>,
    pub branches: Vec<BranchSpec>,
    #[serde(default = "one")]
    pub h0: f64,
    #[serde(default)]
    pub alpha: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapKind {
    Doubling,
    /// `x -> k x mod 1`
    LinearMod { k: u32 },
    Tent,
    /// `x -> 1 - a x^2` on `[-1, 1]`
    Quadratic { a: f64 },
    Gauss { max_branches: usize },
    Cusp,
    Piecewise(PiecewiseSpec),
}

/// Bounds `H` and `G` for the Hölder constant of the inverse derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HolderProfile {
    Constant { h: f64, g: f64 },
    /// `H(y) = ((1-y)/2)^(-3/2) / (4 sqrt a)`, `G(y) = (1-y)/2`
    Quadratic { a: f64 },
    /// `H = h0 d(x,S)^(-alpha)`, `G = d(x,S)/2`
    Fallback { h0: f64, alpha: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSystem {
    pub kind: MapKind,
    pub domain: Domain,
    pub singular_set: Vec<f64>,
    pub beta: f64,
    pub holder: HolderProfile,
}

/// Fitted two-sided power envelope `H^-1 d^alpha <= |f'| <= H d^-alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonFlatnessFit {
    pub alpha: f64,
    pub h_const: f64,
    pub residual: f64,
}

pub fn make_builtin(kind: MapKind) -> Result<MapSystem> {
    MapSystem::new(kind)
}

impl MapSystem {
    pub fn new(kind: MapKind) -> Result<Self> {
        let circle = Domain { lo: 0.0, hi: 1.0, circle: true };
        let unit = Domain { lo: 0.0, hi: 1.0, circle: false };
        let sym = Domain { lo: -1.0, hi: 1.0, circle: false };
        let flat = HolderProfile::Constant { h: 1.0, g: 1.0 };
        let (domain, singular_set, holder) = match &kind {
            MapKind::Doubling => (circle, vec![], flat),
            MapKind::LinearMod { k } => {
                if *k < 2 {
                    return Err(Error::BadParameter(format!("linear_mod needs k >= 2, got {k}")));
                }
                (circle, vec![], flat)
            }
            MapKind::Tent => (unit, vec![0.5], flat),
            MapKind::Quadratic { a } => {
                if !(*a > 1.0 && *a <= 2.0) {
                    return Err(Error::BadParameter(format!("quadratic needs a in (1, 2], got {a}")));
                }
                (sym, vec![0.0], HolderProfile::Quadratic { a: *a })
            }
            MapKind::Gauss { max_branches } => {
                if *max_branches < 1 {
                    return Err(Error::BadParameter("gauss needs max_branches >= 1".into()));
                }
                (unit, vec![0.0], HolderProfile::Constant { h: 2.0, g: 1.0 })
            }
            MapKind::Cusp => (sym, vec![0.0], HolderProfile::Constant { h: 0.5, g: 1.0 }),
            MapKind::Piecewise(spec) => {
                validate_piecewise(spec)?;
                let mut s = spec.singular_set.clone();
                s.sort_by(f64::total_cmp);
                (
                    Domain { lo: spec.lo, hi: spec.hi, circle: false },
                    s,
                    HolderProfile::Fallback { h0: spec.h0, alpha: spec.alpha },
                )
            }
        };
        Ok(Self { kind, domain, singular_set, beta: 1.0, holder })
    }

    /// Parses `doubling`, `ternary`, `linear_mod:K`, `tent`, `quadratic[:A]`,
    /// `gauss[:BRANCHES]` and `cusp`.
    pub fn from_name(name: &str) -> Result<Self> {
        let (head, arg) = match name.split_once(':') {
            Some((h, a)) => (h.trim(), Some(a.trim())),
            None => (name.trim(), None),
        };
        let num = |default: f64| -> Result<f64> {
            match arg {
                None => Ok(default),
                Some(a) => a.parse().map_err(|_| Error::BadParameter(format!("cannot parse '{a}' in map '{name}'"))),
            }
        };
        let kind = match head {
            "doubling" => MapKind::Doubling,
            "ternary" => MapKind::LinearMod { k: 3 },
            "linear_mod" => MapKind::LinearMod { k: num(2.0)? as u32 },
            "tent" => MapKind::Tent,
            "quadratic" => MapKind::Quadratic { a: num(2.0)? },
            "gauss" => MapKind::Gauss { max_branches: num(DEFAULT_GAUSS_BRANCHES as f64)? as usize },
            "cusp" => MapKind::Cusp,
            _ => return Err(Error::BadParameter(format!("unknown map '{name}'"))),
        };
        Self::new(kind)
    }

    /// Replaces the singular set; used to probe constant-slope maps.
    pub fn with_singular_set(mut self, mut s: Vec<f64>) -> Self {
        s.sort_by(f64::total_cmp);
        self.singular_set = s;
        self
    }

    pub fn name(&self) -> String {
        match &self.kind {
            MapKind::Doubling => "doubling".into(),
            MapKind::LinearMod { k } => format!("linear_mod:{k}"),
            MapKind::Tent => "tent".into(),
            MapKind::Quadratic { a } => format!("quadratic:{a}"),
            MapKind::Gauss { max_branches } => format!("gauss:{max_branches}"),
            MapKind::Cusp => "cusp".into(),
            MapKind::Piecewise(spec) => spec.name.clone(),
        }
    }

    pub fn is_circle(&self) -> bool {
        self.domain.circle
    }

    pub fn metric(&self, x: f64, y: f64) -> f64 {
        self.domain.metric(x, y)
    }

    pub fn branch_count(&self) -> usize {
        match &self.kind {
            MapKind::Doubling => 2,
            MapKind::LinearMod { k } => *k as usize,
            MapKind::Tent | MapKind::Quadratic { .. } | MapKind::Cusp => 2,
            MapKind::Gauss { max_branches } => *max_branches,
            MapKind::Piecewise(spec) => spec.branches.len(),
        }
    }

    /// Whether floating-point orbits of this map collapse onto dyadic rationals.
    pub fn needs_dither(&self) -> bool {
        match &self.kind {
            MapKind::Doubling | MapKind::LinearMod { .. } | MapKind::Tent => true,
            MapKind::Piecewise(spec) => spec.branches.iter().all(|b| matches!(b.formula, Formula::Affine { .. })),
            _ => false,
        }
    }

    pub fn singular_distance(&self, x: f64) -> f64 {
        self.singular_set
            .iter()
            .map(|&s| self.domain.metric(x, s))
            .fold(self.domain.length() * EMPTY_DISTANCE_FACTOR, f64::min)
    }

    fn check(&self, x: f64) -> Result<f64> {
        let x = if self.domain.circle {
            if !x.is_finite() {
                return Err(Error::OutOfDomain { x, lo: self.domain.lo, hi: self.domain.hi });
            }
            self.domain.wrap(x)
        } else if self.domain.contains(x) {
            x
        } else {
            return Err(Error::OutOfDomain { x, lo: self.domain.lo, hi: self.domain.hi });
        };
        if self.singular_distance(x) <= SINGULAR_GUARD * self.domain.length() {
            return Err(Error::SingularPoint { x });
        }
        Ok(x)
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let x = self.check(x)?;
        let y = match &self.kind {
            MapKind::Doubling => 2.0 * x,
            MapKind::LinearMod { k } => *k as f64 * x,
            MapKind::Tent => 1.0 - (2.0 * x - 1.0).abs(),
            MapKind::Quadratic { a } => 1.0 - a * x * x,
            MapKind::Gauss { .. } => {
                let r = 1.0 / x;
                (r - r.floor()).max(0.0)
            }
            MapKind::Cusp => {
                if x > 0.0 {
                    2.0 * x.sqrt() - 1.0
                } else {
                    1.0 - 2.0 * (-x).sqrt()
                }
            }
            MapKind::Piecewise(spec) => {
                let b = &spec.branches[piecewise_branch(spec, x)];
                b.eval(x).clamp(spec.lo, spec.hi)
            }
        };
        Ok(self.domain.wrap(y))
    }

    pub fn derivative(&self, x: f64) -> Result<f64> {
        let x = self.check(x)?;
        Ok(match &self.kind {
            MapKind::Doubling => 2.0,
            MapKind::LinearMod { k } => *k as f64,
            MapKind::Tent => {
                if x <= 0.5 {
                    2.0
                } else {
                    -2.0
                }
            }
            MapKind::Quadratic { a } => -2.0 * a * x,
            MapKind::Gauss { .. } => -1.0 / (x * x),
            MapKind::Cusp => 1.0 / x.abs().sqrt(),
            MapKind::Piecewise(spec) => spec.branches[piecewise_branch(spec, x)].derivative(x),
        })
    }

    /// `ln |f'(x)|`; fails with `NonFiniteLog` at critical points.
    pub fn log_derivative(&self, x: f64) -> Result<f64> {
        let l = self.derivative(x)?.abs().ln();
        if l.is_finite() {
            Ok(l)
        } else {
            Err(Error::NonFiniteLog { x })
        }
    }

    /// Branch index of `x`: the interval of monotonicity containing it.
    pub fn branch_of(&self, x: f64) -> Result<i64> {
        let x = self.check(x)?;
        Ok(match &self.kind {
            MapKind::Doubling => ((2.0 * x).floor() as i64).min(1),
            MapKind::LinearMod { k } => ((*k as f64 * x).floor() as i64).min(*k as i64 - 1),
            MapKind::Tent => i64::from(x > 0.5),
            MapKind::Quadratic { .. } | MapKind::Cusp => i64::from(x > 0.0),
            MapKind::Gauss { .. } => ((1.0 / x).floor() as i64).max(1),
            MapKind::Piecewise(spec) => piecewise_branch(spec, x) as i64,
        })
    }

    fn branch_image(&self, branch: i64) -> (f64, f64) {
        match &self.kind {
            MapKind::Quadratic { a } => (1.0 - a, 1.0),
            MapKind::Piecewise(spec) => spec.branches[branch as usize].image(),
            _ => (self.domain.lo, self.domain.hi),
        }
    }

    fn branch_valid(&self, branch: i64) -> bool {
        match &self.kind {
            MapKind::Doubling => (0..2).contains(&branch),
            MapKind::LinearMod { k } => (0..*k as i64).contains(&branch),
            MapKind::Tent | MapKind::Quadratic { .. } | MapKind::Cusp => (0..2).contains(&branch),
            MapKind::Gauss { .. } => branch >= 1,
            MapKind::Piecewise(spec) => (0..spec.branches.len() as i64).contains(&branch),
        }
    }

    /// Preimage of `y` on the given branch.
    pub fn inverse_on_branch(&self, y: f64, branch: i64) -> Result<f64> {
        if !self.branch_valid(branch) {
            return Err(Error::BadParameter(format!("branch {branch} does not exist for {}", self.name())));
        }
        let y = self.domain.wrap(y);
        let tol = 1e-12 * self.domain.length();
        let (ilo, ihi) = self.branch_image(branch);
        if !y.is_finite() || y < ilo - tol || y > ihi + tol {
            return Err(Error::BranchEscape { y, branch });
        }
        let y = y.clamp(ilo, ihi);
        Ok(match &self.kind {
            MapKind::Doubling => (y + branch as f64) / 2.0,
            MapKind::LinearMod { k } => (y + branch as f64) / *k as f64,
            MapKind::Tent => {
                if branch == 0 {
                    0.5 * y
                } else {
                    1.0 - 0.5 * y
                }
            }
            MapKind::Quadratic { a } => {
                let r = ((1.0 - y) / a).max(0.0).sqrt();
                if branch == 0 {
                    -r
                } else {
                    r
                }
            }
            MapKind::Gauss { .. } => {
                if y >= 1.0 {
                    return Err(Error::BranchEscape { y, branch });
                }
                1.0 / (branch as f64 + y)
            }
            MapKind::Cusp => {
                if branch == 0 {
                    let r = 0.5 * (1.0 - y);
                    -(r * r)
                } else {
                    let r = 0.5 * (y + 1.0);
                    r * r
                }
            }
            MapKind::Piecewise(spec) => {
                let b = &spec.branches[branch as usize];
                b.inverse(y).clamp(b.lo, b.hi)
            }
        })
    }

    /// All preimages of `y`, at most `max_branches`, in branch-id order.
    pub fn inverse_branches(&self, y: f64, max_branches: usize) -> Result<Vec<(f64, i64)>> {
        if max_branches < 1 {
            return Err(Error::BadParameter("max_branches must be at least 1".into()));
        }
        let ids: Vec<i64> = match &self.kind {
            MapKind::Gauss { max_branches: cap } => (1..=(*cap).min(max_branches) as i64).collect(),
            _ => (0..self.branch_count() as i64).take(max_branches).collect(),
        };
        let mut out: Vec<(f64, i64)> = Vec::new();
        for b in ids {
            if let Ok(x) = self.inverse_on_branch(y, b) {
                if out.last().is_some_and(|&(px, _)| px == x) {
                    continue;
                }
                out.push((x, b));
            }
        }
        if out.is_empty() {
            Err(Error::NoPreimage { y })
        } else {
            Ok(out)
        }
    }

    /// Preimage of `y` along the inverse branch selected by the orbit point `reference`.
    ///
    /// On the circle this is the preimage nearest to `reference`, which keeps
    /// the pullback continuous across the wrap-around.
    pub fn pullback(&self, y: f64, reference: f64) -> Result<f64> {
        match &self.kind {
            MapKind::Doubling | MapKind::LinearMod { .. } => {
                let k = self.branch_count() as i64;
                let mut best = (f64::INFINITY, 0.0);
                for b in 0..k {
                    let x = self.inverse_on_branch(y, b)?;
                    let d = self.domain.metric(x, reference);
                    if d < best.0 {
                        best = (d, x);
                    }
                }
                Ok(best.1)
            }
            _ => {
                let b = self.branch_of(reference)?;
                self.inverse_on_branch(y, b)
            }
        }
    }

    pub fn holder_h(&self, x: f64) -> f64 {
        match self.holder {
            HolderProfile::Constant { h, .. } => h,
            HolderProfile::Quadratic { a } => {
                let g = (0.5 * (1.0 - x)).max(f64::MIN_POSITIVE);
                g.powf(-1.5) / (4.0 * a.sqrt())
            }
            HolderProfile::Fallback { h0, alpha } => h0 * self.singular_distance(x).powf(-alpha),
        }
    }

    pub fn holder_g(&self, x: f64) -> f64 {
        match self.holder {
            HolderProfile::Constant { g, .. } => g,
            HolderProfile::Quadratic { .. } => (0.5 * (1.0 - x)).max(0.0),
            HolderProfile::Fallback { .. } => 0.5 * self.singular_distance(x),
        }
    }
}

fn validate_piecewise(spec: &PiecewiseSpec) -> Result<()> {
    if !(spec.lo < spec.hi) || spec.branches.is_empty() {
        return Err(Error::BadParameter("piecewise map needs lo < hi and at least one branch".into()));
    }
    let tol = 1e-12 * (spec.hi - spec.lo);
    let mut edge = spec.lo;
    for b in &spec.branches {
        b.validate()?;
        if (b.lo - edge).abs() > tol {
            return Err(Error::BadParameter(format!("branches must tile [{}, {}] without gaps", spec.lo, spec.hi)));
        }
        let (ilo, ihi) = b.image();
        if !(ilo.is_finite() && ihi.is_finite()) || ilo < spec.lo - tol || ihi > spec.hi + tol {
            return Err(Error::BadParameter(format!("branch [{}, {}] maps outside the domain", b.lo, b.hi)));
        }
        edge = b.hi;
    }
    if (edge - spec.hi).abs() > tol {
        return Err(Error::BadParameter(format!("branches must tile [{}, {}] without gaps", spec.lo, spec.hi)));
    }
    Ok(())
}

fn piecewise_branch(spec: &PiecewiseSpec, x: f64) -> usize {
    spec.branches.partition_point(|b| b.hi < x).min(spec.branches.len() - 1)
}

/// Least-squares fit of `ln|f'|` against `-ln d(x, S)`.
pub fn fit_nonflatness(map: &MapSystem, samples: &[f64]) -> Result<NonFlatnessFit> {
    if map.singular_set.is_empty() {
        return Err(Error::EmptySingularSet);
    }
    if samples.len() < 10 {
        return Err(Error::TooFewSamples { needed: 10, got: samples.len() });
    }
    let mut u = Vec::with_capacity(samples.len());
    let mut v = Vec::with_capacity(samples.len());
    for &x in samples {
        let d = map.singular_distance(x);
        if d <= 0.0 {
            return Err(Error::SingularPoint { x });
        }
        u.push(-d.ln());
        v.push(map.log_derivative(x)?);
    }
    let n = u.len() as f64;
    let mu = u.iter().sum::<f64>() / n;
    let mv = v.iter().sum::<f64>() / n;
    let sxx: f64 = u.iter().map(|a| (a - mu) * (a - mu)).sum();
    let sxy: f64 = u.iter().zip(&v).map(|(a, b)| (a - mu) * (b - mv)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = mv - slope * mu;
    let alpha = slope.abs();
    let residual = u
        .iter()
        .zip(&v)
        .map(|(a, b)| (b - intercept - slope * a).abs())
        .fold(0.0, f64::max);
    let log_h = u
        .iter()
        .zip(&v)
        .map(|(a, b)| (b - alpha * a).max(-alpha * a - b))
        .fold(0.0, f64::max);
    Ok(NonFlatnessFit { alpha, h_const: log_h.exp(), residual })
}
