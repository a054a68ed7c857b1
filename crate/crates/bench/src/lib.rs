//! Shared fixtures for the benchmarks.

use repeller_core::maps::MapSystem;
use repeller_core::orbits::typical_orbit;
use repeller_core::{Orbit, RepellerIFS};

pub const X0: f64 = 0.123456789;

pub fn map(name: &str) -> MapSystem {
    MapSystem::from_name(name).expect("builtin map")
}

pub fn orbit(name: &str, len: usize) -> Orbit {
    typical_orbit(&map(name), X0, len, 1, 1000).expect("orbit")
}

/// The two-branch inverse system of the doubling map over the whole circle.
pub fn full_doubling() -> RepellerIFS {
    RepellerIFS::from_references(map("doubling"), 0.5, 0.5, vec![vec![0.25], vec![0.75]], 2f64.ln(), 0.1).expect("ifs")
}
