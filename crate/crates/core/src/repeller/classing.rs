use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::good_set::{cell_of, GoodPoint, GoodSet};
use crate::entropy::greedy_separated;
use crate::error::{Error, Result};
use crate::maps::MapSystem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnClassing {
    pub n: usize,
    pub eps: f64,
    pub rho: f64,
    pub cell_width: f64,
    /// The separated set `E`, sorted by position.
    pub e_points: Vec<GoodPoint>,
    /// One centre per occupied cell: the leftmost point of `E` in it.
    pub cover_centers: Vec<f64>,
    pub j: usize,
    /// `(k, indices into e_points)` for every return time with a non-empty class.
    pub classes: Vec<(usize, Vec<usize>)>,
    pub m: usize,
    pub chosen_cell: i64,
    pub base_center: f64,
    pub f_m_cell: Vec<GoodPoint>,
    pub card_f_m: usize,
    pub dropped: usize,
    /// `ln j / eps`
    pub n1: f64,
    /// `ln 4 / (chi - 2 eps)`
    pub n3: f64,
}

impl ReturnClassing {
    pub fn card_e(&self) -> usize {
        self.e_points.len()
    }

    /// `card F_m >= card E / (eps n)`
    pub fn pigeonhole_holds(&self) -> bool {
        self.card_f_m as f64 * self.eps * self.n as f64 >= (self.card_e() - self.dropped) as f64
    }

    /// `card (F_m ∩ cell) >= card F_m / j`
    pub fn cell_bound_holds(&self) -> bool {
        (self.f_m_cell.len() * self.j) >= self.card_f_m
    }
}

pub fn return_classing(map: &MapSystem, good: &GoodSet, n: usize, eps: f64) -> Result<ReturnClassing> {
    if n != good.n {
        return Err(Error::BadParameter(format!("good set was built for n = {}, not {n}", good.n)));
    }
    let mut pool: Vec<&GoodPoint> = good.points.iter().collect();
    pool.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.index.cmp(&b.index)));
    let xs: Vec<f64> = pool.iter().map(|p| p.x).collect();
    let e = greedy_separated(map, &xs, n, 0.5 * good.rho)?;
    let e_points: Vec<GoodPoint> = e.greedy_order.iter().map(|&i| pool[i].clone()).collect();
    if e_points.is_empty() {
        return Err(Error::NoReturns);
    }

    let mut by_k: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut dropped = 0;
    for (i, p) in e_points.iter().enumerate() {
        match p.return_times.first() {
            Some(&k) => by_k.entry(k).or_default().push(i),
            None => dropped += 1,
        }
    }
    let largest = by_k.values().map(Vec::len).max().unwrap_or(0);
    let Some((&m, _)) = by_k.iter().find(|(_, v)| v.len() == largest) else {
        return Err(Error::NoReturns);
    };
    let card_f_m = largest;

    let w = good.cell_width;
    let mut centers: BTreeMap<i64, f64> = BTreeMap::new();
    for p in &e_points {
        centers.entry(cell_of(map, w, p.x)).or_insert(p.x);
    }
    let mut per_cell: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for &i in &by_k[&m] {
        per_cell.entry(cell_of(map, w, e_points[i].x)).or_default().push(i);
    }
    let best = per_cell.values().map(Vec::len).max().unwrap_or(0);
    let (&chosen_cell, members) = per_cell.iter().find(|(_, v)| v.len() == best).expect("F_m is non-empty");
    let f_m_cell: Vec<GoodPoint> = members.iter().map(|&i| e_points[i].clone()).collect();
    let j = centers.len();
    Ok(ReturnClassing {
        n,
        eps,
        rho: good.rho,
        cell_width: w,
        cover_centers: centers.values().copied().collect(),
        j,
        classes: by_k.into_iter().collect(),
        m,
        chosen_cell,
        base_center: centers[&chosen_cell],
        card_f_m,
        f_m_cell,
        dropped,
        e_points,
        n1: (j as f64).ln() / eps,
        n3: 4f64.ln() / (good.chi - 2.0 * eps),
    })
}
