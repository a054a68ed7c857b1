//! Observables evaluated along orbits.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::MapSystem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Potential {
    Constant { c: f64 },
    Coordinate,
    Power { p: i32 },
    /// `ln |f'(x)|`
    LogDerivative,
    /// Piecewise-linear interpolation through `(x, y)` knots, flat outside.
    Table { knots: Vec<(f64, f64)> },
    Combination { terms: Vec<(f64, Potential)> },
}

impl Potential {
    /// Parses `constant:C`, `coordinate`, `square`, `power:P`,
    /// `log_derivative`, `neg_log_derivative` and `table:x0=y0;x1=y1;...`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h.trim(), Some(a.trim())),
            None => (s, None),
        };
        let bad = || Error::BadParameter(format!("cannot parse potential '{s}'"));
        let num = |a: Option<&str>| -> Result<f64> { a.ok_or_else(bad)?.parse().map_err(|_| bad()) };
        Ok(match head {
            "constant" => Potential::Constant { c: num(arg)? },
            "coordinate" | "x" => Potential::Coordinate,
            "square" => Potential::Power { p: 2 },
            "power" => Potential::Power { p: num(arg)? as i32 },
            "log_derivative" => Potential::LogDerivative,
            "neg_log_derivative" => Potential::Combination { terms: vec![(-1.0, Potential::LogDerivative)] },
            "table" => {
                let mut knots = Vec::new();
                for pair in arg.ok_or_else(bad)?.split(';').filter(|p| !p.trim().is_empty()) {
                    let (x, y) = pair.split_once('=').ok_or_else(bad)?;
                    knots.push((x.trim().parse().map_err(|_| bad())?, y.trim().parse().map_err(|_| bad())?));
                }
                Potential::table(knots)?
            }
            _ => return Err(bad()),
        })
    }

    pub fn table(mut knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::BadParameter("table potential needs at least one knot".into()));
        }
        knots.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Potential::Table { knots })
    }

    pub fn eval(&self, map: &MapSystem, x: f64) -> Result<f64> {
        Ok(match self {
            Potential::Constant { c } => *c,
            Potential::Coordinate => x,
            Potential::Power { p } => x.powi(*p),
            Potential::LogDerivative => map.log_derivative(x)?,
            Potential::Table { knots } => interpolate(knots, x),
            Potential::Combination { terms } => {
                let mut acc = 0.0;
                for (w, p) in terms {
                    acc += w * p.eval(map, x)?;
                }
                acc
            }
        })
    }

    /// Largest variation of the potential over pairs at distance at most `r`,
    /// estimated on a uniform grid of the domain.
    pub fn oscillation(&self, map: &MapSystem, r: f64, grid: usize) -> f64 {
        let (lo, hi) = (map.domain.lo, map.domain.hi);
        let step = (hi - lo) / grid as f64;
        let mut worst: f64 = 0.0;
        for i in 0..grid {
            let x = lo + (i as f64 + 0.5) * step;
            let y = if map.is_circle() { map.domain.wrap(x + r) } else { (x + r).min(hi) };
            if let (Ok(a), Ok(b)) = (self.eval(map, x), self.eval(map, y)) {
                worst = worst.max((a - b).abs());
            }
        }
        worst
    }
}

fn interpolate(knots: &[(f64, f64)], x: f64) -> f64 {
    let i = knots.partition_point(|k| k.0 <= x);
    if i == 0 {
        return knots[0].1;
    }
    if i == knots.len() {
        return knots[i - 1].1;
    }
    let (x0, y0) = knots[i - 1];
    let (x1, y1) = knots[i];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

impl fmt::Display for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::Constant { c } => write!(f, "constant:{c}"),
            Potential::Coordinate => write!(f, "coordinate"),
            Potential::Power { p: 2 } => write!(f, "square"),
            Potential::Power { p } => write!(f, "power:{p}"),
            Potential::LogDerivative => write!(f, "log_derivative"),
            Potential::Table { knots } => {
                write!(f, "table:")?;
                for (i, (x, y)) in knots.iter().enumerate() {
                    if i > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{x}={y}")?;
                }
                Ok(())
            }
            Potential::Combination { terms } => {
                if let [(w, Potential::LogDerivative)] = terms.as_slice() {
                    if *w == -1.0 {
                        return write!(f, "neg_log_derivative");
                    }
                }
                for (i, (w, p)) in terms.iter().enumerate() {
                    if i > 0 {
                        write!(f, "+")?;
                    }
                    write!(f, "{w}*({p})")?;
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trip() {
        for s in ["constant:1.5", "coordinate", "square", "power:3", "log_derivative", "neg_log_derivative", "table:0=0;0.5=1;1=0"] {
            assert_eq!(Potential::parse(s).unwrap().to_string(), s);
        }
        assert!(Potential::parse("nope").is_err());
        assert!(Potential::parse("constant").is_err());
    }

    #[test]
    fn table_interpolates_and_clamps() {
        let m = MapSystem::from_name("doubling").unwrap();
        let t = Potential::parse("table:0=0;0.5=1;1=0").unwrap();
        assert_eq!(t.eval(&m, 0.25).unwrap(), 0.5);
        assert_eq!(t.eval(&m, 0.75).unwrap(), 0.5);
        assert_eq!(t.eval(&m, -1.0).unwrap(), 0.0);
    }

    #[test]
    fn oscillation_of_coordinate_is_step() {
        let m = MapSystem::from_name("cusp").unwrap();
        let osc = Potential::Coordinate.oscillation(&m, 0.1, 1000);
        assert!((osc - 0.1).abs() < 1e-12);
    }
}
