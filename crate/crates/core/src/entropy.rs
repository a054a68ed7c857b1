//! Bowen-metric separated sets and the Katok entropy estimator.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::MapSystem;

/// A cell `(n, eps)` counts as resolved while `card * RESOLUTION <= pool`.
pub const RESOLUTION: usize = 32;
pub const PLATEAU_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparatedSet {
    pub points: Vec<f64>,
    /// Pool indices of the selected points, in selection order.
    pub greedy_order: Vec<usize>,
    pub n: usize,
    pub eps_tilde: f64,
    pub source_pool_size: usize,
    /// Pool points discarded because their orbit met the singular set.
    pub dropped: usize,
}

impl SeparatedSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyCell {
    pub n: usize,
    pub eps_tilde: f64,
    pub card: usize,
    /// `(1/n) ln card`
    pub rate: f64,
    /// Growth of `ln card` per step since the previous `n` in the grid.
    pub slope: Option<f64>,
    pub saturated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub h: f64,
    pub delta: f64,
    pub pool_size: usize,
    pub grid: Vec<EntropyCell>,
    pub chosen_n: usize,
    pub chosen_eps: f64,
    pub plateau_found: bool,
    pub monotone_in_eps: bool,
}

pub fn bowen_distance(map: &MapSystem, x: f64, y: f64, n: usize) -> Result<f64> {
    let (mut a, mut b) = (x, y);
    let mut d: f64 = 0.0;
    for k in 0..n {
        d = d.max(map.metric(a, b));
        if k + 1 < n {
            a = map.eval(a)?;
            b = map.eval(b)?;
        }
    }
    Ok(d)
}

fn orbit_of(map: &MapSystem, x: f64, n: usize) -> Option<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    let mut a = x;
    for k in 0..n {
        if k > 0 {
            a = map.eval(a).ok()?;
        } else {
            map.eval(a).ok()?;
        }
        out.push(a);
    }
    Some(out)
}

struct Grid {
    lo: f64,
    width: f64,
    cells: i64,
    circle: bool,
}

impl Grid {
    fn new(map: &MapSystem, eps: f64) -> Self {
        let len = map.domain.length();
        let cells = ((len / eps).floor() as i64).clamp(1, 1 << 20);
        Grid { lo: map.domain.lo, width: len / cells as f64, cells, circle: map.is_circle() }
    }

    fn cell(&self, x: f64) -> i64 {
        (((x - self.lo) / self.width).floor() as i64).clamp(0, self.cells - 1)
    }

    fn neighbours(&self, c: i64) -> Vec<i64> {
        let mut out: Vec<i64> = (c - 1..=c + 1)
            .filter_map(|i| {
                if self.circle {
                    Some(i.rem_euclid(self.cells))
                } else {
                    (0..self.cells).contains(&i).then_some(i)
                }
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// First-fit maximal `(n, eps_tilde)`-separated subset of `pool`, in pool order.
pub fn greedy_separated(map: &MapSystem, pool: &[f64], n: usize, eps_tilde: f64) -> Result<SeparatedSet> {
    if n < 1 || !(eps_tilde > 0.0) {
        return Err(Error::BadParameter(format!("need n >= 1 and eps > 0, got n = {n}, eps = {eps_tilde}")));
    }
    let orbits: Vec<Option<Vec<f64>>> = pool.par_iter().map(|&x| orbit_of(map, x, n)).collect();
    let grid = Grid::new(map, eps_tilde);
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let mut chosen: Vec<usize> = Vec::new();
    let mut dropped = 0;
    for (i, orbit) in orbits.iter().enumerate() {
        let Some(orbit) = orbit else {
            dropped += 1;
            continue;
        };
        let (c0, c1) = (grid.cell(orbit[0]), grid.cell(orbit[n - 1]));
        let mut close = false;
        'scan: for a in grid.neighbours(c0) {
            for b in grid.neighbours(c1) {
                if let Some(members) = buckets.get(&(a, b)) {
                    for &j in members {
                        let other = orbits[j].as_ref().expect("selected points have orbits");
                        if orbit.iter().zip(other).all(|(p, q)| map.metric(*p, *q) < eps_tilde) {
                            close = true;
                            break 'scan;
                        }
                    }
                }
            }
        }
        if !close {
            buckets.entry((c0, c1)).or_default().push(i);
            chosen.push(i);
        }
    }
    Ok(SeparatedSet {
        points: chosen.iter().map(|&i| pool[i]).collect(),
        greedy_order: chosen,
        n,
        eps_tilde,
        source_pool_size: pool.len(),
        dropped,
    })
}

/// Smallest pairwise Bowen distance in the set, recomputed from scratch.
pub fn min_pairwise_distance(map: &MapSystem, set: &SeparatedSet) -> Result<f64> {
    let pts = &set.points;
    let per_row: Vec<f64> = (0..pts.len())
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let mut best = f64::INFINITY;
            for j in i + 1..pts.len() {
                best = best.min(bowen_distance(map, pts[i], pts[j], set.n)?);
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;
    Ok(per_row.into_iter().fold(f64::INFINITY, f64::min))
}

/// Katok estimate from separated-set growth over an `(n, eps_tilde)` grid.
///
/// The readout is the growth of `ln card` between consecutive `n`, restricted
/// to cells the pool still resolves. `h` is the last slope of the smallest
/// `eps_tilde` whose two last slopes agree within [`PLATEAU_TOLERANCE`].
pub fn katok_entropy(map: &MapSystem, pool: &[f64], delta: f64, n_grid: &[usize], eps_grid: &[f64]) -> Result<EntropyEstimate> {
    if n_grid.is_empty() || eps_grid.is_empty() {
        return Err(Error::BadParameter("entropy grids must be non-empty".into()));
    }
    let mut sorted = pool.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut ns = n_grid.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let mut eps: Vec<f64> = eps_grid.to_vec();
    eps.sort_by(|a, b| b.total_cmp(a));
    eps.dedup();

    let jobs: Vec<(usize, f64)> = eps.iter().flat_map(|&e| ns.iter().map(move |&n| (n, e))).collect();
    let cards: Vec<usize> = jobs
        .par_iter()
        .map(|&(n, e)| greedy_separated(map, &sorted, n, e).map(|s| s.len()))
        .collect::<Result<_>>()?;
    let size = sorted.len();
    let first = cards[0];
    if first == 0 || first * 10 > size {
        return Err(Error::PoolTooSmall { pool: size });
    }

    let mut grid = Vec::with_capacity(jobs.len());
    for (row, &e) in eps.iter().enumerate() {
        for (col, &n) in ns.iter().enumerate() {
            let card = cards[row * ns.len() + col];
            let saturated = card * RESOLUTION > size;
            let slope = (col > 0).then(|| {
                let prev = &grid[grid.len() - 1];
                let prev: &EntropyCell = prev;
                (!saturated && !prev.saturated && prev.card > 0)
                    .then(|| ((card as f64).ln() - (prev.card as f64).ln()) / (n - prev.n) as f64)
            });
            grid.push(EntropyCell {
                n,
                eps_tilde: e,
                card,
                rate: if card > 0 { (card as f64).ln() / n as f64 } else { 0.0 },
                slope: slope.flatten(),
                saturated,
            });
        }
    }

    let row_slopes = |e: f64| -> Vec<&EntropyCell> { grid.iter().filter(|c| c.eps_tilde == e && c.slope.is_some()).collect() };
    let mut pick: Option<(&EntropyCell, bool)> = None;
    for &e in eps.iter().rev() {
        let s = row_slopes(e);
        if s.len() >= 2 {
            let (a, b) = (s[s.len() - 2].slope.unwrap(), s[s.len() - 1].slope.unwrap());
            if (a - b).abs() < PLATEAU_TOLERANCE {
                pick = Some((s[s.len() - 1], true));
                break;
            }
        }
    }
    if pick.is_none() {
        pick = eps.iter().rev().find_map(|&e| row_slopes(e).last().map(|c| (*c, false)));
    }
    let Some((cell, plateau_found)) = pick else {
        return Err(Error::PoolTooSmall { pool: size });
    };
    let monotone_in_eps = ns.iter().all(|&n| {
        let col: Vec<usize> = grid.iter().filter(|c| c.n == n).map(|c| c.card).collect();
        col.windows(2).all(|w| w[1] >= w[0])
    });
    Ok(EntropyEstimate {
        h: cell.slope.unwrap().max(0.0),
        delta,
        pool_size: size,
        chosen_n: cell.n,
        chosen_eps: cell.eps_tilde,
        plateau_found,
        monotone_in_eps,
        grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bowen_distance_examples() {
        let m = MapSystem::from_name("doubling").unwrap();
        assert!((bowen_distance(&m, 0.0, 0.01, 5).unwrap() - 0.16).abs() < 1e-15);
        assert_eq!(bowen_distance(&m, 0.3, 0.3, 7).unwrap(), 0.0);
        let g = MapSystem::from_name("gauss").unwrap();
        let (mut a, mut b, mut d) = (0.41f64, 0.42f64, 0.0f64);
        for _ in 0..3 {
            d = d.max((a - b).abs());
            a = 1.0 / a - (1.0 / a).floor();
            b = 1.0 / b - (1.0 / b).floor();
        }
        assert!((bowen_distance(&g, 0.41, 0.42, 3).unwrap() - d).abs() < 1e-12);
    }

    #[test]
    fn greedy_examples() {
        let m = MapSystem::from_name("doubling").unwrap();
        let grid: Vec<f64> = (0..10_000).map(|i| i as f64 / 10_000.0).collect();
        let s = greedy_separated(&m, &grid, 3, 0.2).unwrap();
        assert!((19..=21).contains(&s.len()), "{}", s.len());
        assert_eq!(greedy_separated(&m, &grid, 1, 0.25).unwrap().len(), 4);
        assert_eq!(greedy_separated(&m, &grid[..100], 1, 0.9).unwrap().len(), 1);
    }

    #[test]
    fn greedy_is_separated_and_spanning() {
        let m = MapSystem::from_name("cusp").unwrap();
        let pool: Vec<f64> = (0..500).map(|i| -0.999 + 1.998 * ((i * 7919) % 500) as f64 / 500.0).collect();
        let s = greedy_separated(&m, &pool, 4, 0.1).unwrap();
        assert!(min_pairwise_distance(&m, &s).unwrap() >= 0.1);
        let mut skipped = 0;
        for &x in &pool {
            if bowen_distance(&m, x, x, 4).is_err() {
                skipped += 1;
                continue;
            }
            let near = s.points.iter().any(|&p| bowen_distance(&m, x, p, 4).unwrap() < 0.1);
            assert!(near);
        }
        assert_eq!(skipped, s.dropped);
    }

    #[test]
    fn fixed_point_pool_has_zero_entropy() {
        let m = MapSystem::from_name("doubling").unwrap();
        let pool = vec![0.0; 1000];
        let e = katok_entropy(&m, &pool, 0.05, &[1, 2, 3, 4], &[0.1, 0.05]).unwrap();
        assert_eq!(e.h, 0.0);
    }

    #[test]
    fn tiny_pool_is_rejected() {
        let m = MapSystem::from_name("doubling").unwrap();
        let pool: Vec<f64> = (0..20).map(|i| i as f64 / 20.0).collect();
        assert!(matches!(katok_entropy(&m, &pool, 0.05, &[4, 5], &[0.01]), Err(Error::PoolTooSmall { .. })));
    }
}
