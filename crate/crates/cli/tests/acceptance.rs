//! The ten acceptance criteria, each reported as one PASS/FAIL line.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use repeller_cli::{cmd_build, Config};
use repeller_core::entropy::{bowen_distance, greedy_separated, katok_entropy};
use repeller_core::maps::MapSystem;
use repeller_core::orbits::{backward_window, lyapunov_estimates, typical_orbit};
use repeller_core::pipeline::{build, BuildOutcome, PipelineParams};
use repeller_core::recurrence::{slow_recurrence_profile, tail_sum_estimate};
use repeller_core::repeller::ifs::word_of;
use repeller_core::repeller::{periodic_point, repeller_pressure};
use repeller_core::tempering::{adapted_norm, c_epsilon, tempering_kernel};
use repeller_core::{Potential, RepellerIFS};

const X0: f64 = 0.123456789;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn chi_of(name: &str, len: usize) -> f64 {
    let map = MapSystem::from_name(name).unwrap();
    let orbit = typical_orbit(&map, X0, len, 1, 1000).unwrap();
    lyapunov_estimates(&map, &orbit).unwrap().chi_lower
}

fn full_doubling() -> RepellerIFS {
    let map = MapSystem::from_name("doubling").unwrap();
    RepellerIFS::from_references(map, 0.5, 0.5, vec![vec![0.25], vec![0.75]], 2f64.ln(), 0.1).unwrap()
}

fn catalog() -> Vec<Potential> {
    ["coordinate", "square", "constant:1", "table:0=0;0.5=1;1=0"].iter().map(|s| Potential::parse(s).unwrap()).collect()
}

struct Runs {
    doubling: BuildOutcome,
    others: Vec<BuildOutcome>,
    params: PipelineParams,
}

impl Runs {
    fn all(&self) -> impl Iterator<Item = &BuildOutcome> {
        std::iter::once(&self.doubling).chain(&self.others)
    }
}

fn runs() -> Runs {
    let params = PipelineParams { potentials: catalog(), ..PipelineParams::default() };
    let doubling = build(&MapSystem::from_name("doubling").unwrap(), &params).unwrap();
    let others = ["tent", "cusp"]
        .iter()
        .map(|m| build(&MapSystem::from_name(m).unwrap(), &PipelineParams::default()).unwrap())
        .collect();
    Runs { doubling, others, params }
}

fn criterion_1() -> Check {
    let d = chi_of("doubling", 1_000_000);
    ensure(d == 2f64.ln(), format!("doubling chi = {d}"))?;
    let t = Instant::now();
    let g = chi_of("gauss", 1_000_000);
    let secs = t.elapsed().as_secs_f64();
    ensure((g / 2.3731 - 1.0).abs() < 0.02 && secs < 30.0, format!("gauss chi = {g} in {secs:.1} s"))?;
    let c = chi_of("cusp", 1_000_000);
    ensure((c - 0.5).abs() < 0.02, format!("cusp chi = {c}"))?;
    Ok(format!("doubling {d}, gauss {g:.4} ({secs:.1} s), cusp {c:.4}"))
}

fn criterion_2() -> Check {
    let eps_grid = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0];
    let n_grid: Vec<usize> = (1..=12).collect();
    let entropy = |name: &str| {
        let map = MapSystem::from_name(name).unwrap();
        let pool = typical_orbit(&map, X0, 100_000, 1, 1000).unwrap();
        katok_entropy(&map, &pool.points, 0.05, &n_grid, &eps_grid).unwrap()
    };
    let t = Instant::now();
    let d = entropy("doubling");
    let secs = t.elapsed().as_secs_f64();
    let ln2 = 2f64.ln();
    ensure(d.h >= ln2 - 0.05 && d.h <= ln2 + 0.03 && d.plateau_found, format!("doubling h = {}", d.h))?;
    ensure(d.chosen_eps == 1.0 / 128.0 && d.chosen_n <= 12, format!("doubling read at n = {}, eps = {}", d.chosen_n, d.chosen_eps))?;
    ensure(secs < 120.0, format!("doubling took {secs:.1} s"))?;
    let t3 = entropy("ternary");
    ensure((t3.h - 3f64.ln()).abs() <= 0.06, format!("ternary h = {}", t3.h))?;
    Ok(format!("doubling h = {:.4} ({secs:.1} s), ternary h = {:.4}", d.h, t3.h))
}

fn counting_chain(runs: &Runs) -> Result<(), String> {
    for out in runs.all() {
        let c = &out.classing;
        ensure(c.pigeonhole_holds(), format!("{}: card F_m = {} < card E / (eps n)", out.report.map, c.card_f_m))?;
        ensure(c.cell_bound_holds(), format!("{}: card F_m cell = {} < card F_m / j", out.report.map, c.f_m_cell.len()))?;
    }
    Ok(())
}

fn criterion_3(runs: &Runs) -> Check {
    let r = &runs.doubling.report;
    ensure(r.h_repeller >= r.h_mu - 3.0 * runs.params.eps, format!("h_repeller {} < {} - 3 eps", r.h_repeller, r.h_mu))?;
    counting_chain(runs)?;
    let c = &runs.doubling.classing;
    Ok(format!(
        "h_repeller {:.4} >= {:.4}; card E {}, j {}, card F_m {}, cell {}",
        r.h_repeller,
        r.h_mu - 3.0 * runs.params.eps,
        c.card_e(),
        c.j,
        c.card_f_m,
        c.f_m_cell.len()
    ))
}

fn criterion_4(runs: &Runs) -> Check {
    let mut worst: f64 = 0.0;
    for ifs in runs.all().map(|o| &o.ifs).chain(std::iter::once(&full_doubling())) {
        for c in [-1.0, 0.0, 0.5, 2.0] {
            let p = repeller_pressure(ifs, &Potential::Constant { c }, 2, 100_000, 0).unwrap();
            worst = worst.max((p.value - ifs.entropy() - c).abs());
        }
    }
    ensure(worst < 1e-12, format!("constant potential off by {worst}"))?;
    let geo = Potential::parse("neg_log_derivative").unwrap();
    let p0 = repeller_pressure(&full_doubling(), &geo, 4, 100_000, 0).unwrap().value;
    ensure(p0.abs() < 1e-9, format!("P(-log|f'|) = {p0}"))?;
    let r = &runs.doubling.report;
    ensure(r.pass_b, "5 eps pressure bound fails on the doubling run")?;
    Ok(format!("constant error {worst:e}, P(-log|f'|) = {p0:e}, {} potentials above target", r.potentials.len()))
}

fn criterion_5(runs: &Runs) -> Check {
    let r = &runs.doubling.report;
    let worst = r.potentials.iter().map(|p| p.max_deviation).fold(0.0, f64::max);
    ensure(r.pass_c && worst <= 2.0 * r.eps, format!("max deviation {worst} > 2 eps"))?;
    Ok(format!("{} periodic points, max deviation {worst:.4} <= {}", r.periodic_points_tested, 2.0 * r.eps))
}

fn criterion_6(runs: &Runs) -> Check {
    for out in runs.all() {
        let r = &out.report;
        ensure(r.pass_d, format!("{}: min periodic exponent {} < chi - 2 eps", r.map, r.min_periodic_lyapunov))?;
    }
    let m = runs.doubling.report.margin_d();
    ensure((m - 2.0 * runs.params.eps).abs() < 1e-12, format!("doubling margin {m}"))?;
    Ok(format!("doubling margin {m} = 2 eps"))
}

fn criterion_7() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..1000 {
        let len: usize = rng.random_range(1..80);
        let values: Vec<f64> = (0..len).map(|_| (rng.random_range(-8.0..8.0f64)).exp()).collect();
        let eps = rng.random_range(0.01..1.0);
        let r = tempering_kernel(&values, eps).unwrap();
        for i in 0..len {
            for j in 0..len {
                let bound = (i.abs_diff(j) as f64 * eps).exp() * (1.0 + 1e-12);
                ensure(r[i] / r[j] <= bound, format!("sequence {case}: r[{i}] / r[{j}] too large"))?;
            }
        }
    }
    for (name, chi) in [("doubling", 2f64.ln()), ("ternary", 3f64.ln())] {
        let map = MapSystem::from_name(name).unwrap();
        let orbit = typical_orbit(&map, X0, 2_000, 1, 1000).unwrap();
        let bw = backward_window(&orbit, 1_999, 200).unwrap();
        ensure(c_epsilon(&map, &bw, chi, 0.1).unwrap() == 1.0, format!("{name}: C_eps != 1"))?;
    }
    let cusp = MapSystem::from_name("cusp").unwrap();
    let orbit = typical_orbit(&cusp, X0, 1_200, 1, 1000).unwrap();
    let mut largest: f64 = 1.0;
    for end in 200..1_200 {
        let bw = backward_window(&orbit, end, 200).unwrap();
        let c = c_epsilon(&cusp, &bw, 0.5, 0.15).unwrap();
        let ratio = adapted_norm(&cusp, &bw, 0.5, 0.15, 1.0).unwrap().value;
        ensure(ratio >= 1.0 && ratio <= c * (1.0 + 1e-12), format!("cusp window {end}: ratio {ratio}, C = {c}"))?;
        largest = largest.max(c);
    }
    Ok(format!("1000 sequences tempered, C_eps = 1 on constant slope, 1000 cusp windows sandwiched (max C {largest:.3})"))
}

fn criterion_8(runs: &Runs) -> Check {
    let cusp = MapSystem::from_name("cusp").unwrap();
    let orbit = typical_orbit(&cusp, X0, 1_000_000, 1, 1000).unwrap();
    let tails = tail_sum_estimate(&cusp, &orbit, 0.05, 20);
    let oracle: f64 = (1..=20).map(|n| (-(n as f64) * 0.05).exp()).sum();
    let rel = (tails.tail_sum_total / oracle - 1.0).abs();
    ensure(rel < 0.1, format!("tail sum {} vs {oracle}", tails.tail_sum_total))?;
    let doubling = MapSystem::from_name("doubling").unwrap();
    let d_orbit = typical_orbit(&doubling, X0, 2_000, 1, 1000).unwrap();
    for end in 200..2_000 {
        let p = slow_recurrence_profile(&doubling, &backward_window(&d_orbit, end, 200).unwrap(), 0.05);
        ensure(p.violations.is_empty(), "violation on a map with empty S")?;
    }
    let mut admitted = 0;
    for out in runs.all() {
        for p in &out.good.points {
            ensure(p.last_violation < out.good.n, format!("{}: admitted window {} recurs at {}", out.report.map, p.index, p.last_violation))?;
        }
        admitted += out.good.points.len();
    }
    Ok(format!("tail sums within {:.2}%, {admitted} admitted windows recur slowly", 100.0 * rel))
}

/// Exact maximum independent set on at most 128 vertices.
fn mis(adj: &[u128], mask: u128) -> usize {
    if mask == 0 {
        return 0;
    }
    let deg = |v: usize| (adj[v] & mask).count_ones();
    let vs = (0..adj.len()).filter(|&v| mask >> v & 1 == 1);
    let low = vs.clone().min_by_key(|&v| deg(v)).unwrap();
    if deg(low) <= 1 {
        return 1 + mis(adj, mask & !adj[low] & !(1 << low));
    }
    let high = vs.max_by_key(|&v| deg(v)).unwrap();
    mis(adj, mask & !(1 << high)).max(1 + mis(adj, mask & !adj[high] & !(1 << high)))
}

fn max_separated(map: &MapSystem, pool: &[f64], n: usize, eps: f64) -> Result<usize, String> {
    let pts: Vec<f64> = pool.iter().copied().filter(|&x| bowen_distance(map, x, x, n).is_ok()).collect();
    let mut comp: Vec<usize> = (0..pts.len()).collect();
    let mut edges = Vec::new();
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            if bowen_distance(map, pts[i], pts[j], n).unwrap() < eps {
                edges.push((i, j));
                let (a, b) = (comp[i], comp[j]);
                comp.iter_mut().filter(|c| **c == a).for_each(|c| *c = b);
            }
        }
    }
    let mut total = 0;
    let mut labels = comp.clone();
    labels.sort_unstable();
    labels.dedup();
    for label in labels {
        let members: Vec<usize> = (0..pts.len()).filter(|&i| comp[i] == label).collect();
        ensure(members.len() <= 128, format!("component of {} points", members.len()))?;
        let pos = |v: usize| members.binary_search(&v).ok();
        let mut adj = vec![0u128; members.len()];
        for &(i, j) in &edges {
            if let (Some(a), Some(b)) = (pos(i), pos(j)) {
                adj[a] |= 1 << b;
                adj[b] |= 1 << a;
            }
        }
        let all = if members.len() == 128 { u128::MAX } else { (1u128 << members.len()) - 1 };
        total += mis(&adj, all);
    }
    Ok(total)
}

fn criterion_9() -> Check {
    let mut cases = 0;
    for (name, growth) in [("doubling", 2.0), ("tent", 2.0), ("cusp", 1.0), ("gauss", 1.0)] {
        let map = MapSystem::from_name(name).unwrap();
        let mut pool = typical_orbit(&map, X0, 1000, 5, 1000).unwrap().points;
        pool.sort_by(f64::total_cmp);
        for n in 1..=4 {
            let eps = 1e-3 * map.domain.length() * f64::powi(growth, n as i32 - 1);
            let greedy = greedy_separated(&map, &pool, n, eps).unwrap().len();
            let exact = max_separated(&map, &pool, n, eps)?;
            ensure(greedy.abs_diff(exact) <= 1, format!("{name} n = {n}: greedy {greedy}, exact {exact}"))?;
            cases += 1;
        }
    }
    let ifs = full_doubling();
    let mut worst: f64 = 0.0;
    for k in 1..=3 {
        for i in 0..1 << k {
            let w = word_of(i, 2, k);
            let num: f64 = w.iter().enumerate().map(|(j, &b)| (b << j) as f64).sum();
            let expected = (num / ((1 << k) - 1) as f64).rem_euclid(1.0);
            worst = worst.max(ifs.map.metric(periodic_point(&ifs, &w).unwrap().p, expected));
        }
    }
    ensure(worst < 1e-12, format!("periodic point error {worst}"))?;
    Ok(format!("{cases} greedy/exact pairs within 1, periodic points within {worst:e}"))
}

fn criterion_10() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = Config::default();
    cfg.pipeline.windows = 20_000;
    cfg.entropy.pool = 20_000;
    cfg.potentials.catalog = vec!["coordinate".into(), "square".into()];
    cfg.output.dir = dir.path().join("run");
    let snapshot = |files: &[std::path::PathBuf]| -> Vec<(String, Vec<u8>)> {
        files.iter().map(|f| (f.display().to_string(), std::fs::read(f).unwrap())).collect()
    };
    let first = cmd_build(&cfg).map_err(|e| e.to_string())?;
    let a = snapshot(&first.files);
    let second = cmd_build(&cfg).map_err(|e| e.to_string())?;
    let b = snapshot(&second.files);
    ensure(a == b, "outputs differ between runs")?;
    Ok(format!("{} files byte-identical across two builds", a.len()))
}

#[test]
fn acceptance_criteria() {
    let runs = runs();
    let results: Vec<(usize, Check)> = vec![
        (1, criterion_1()),
        (2, criterion_2()),
        (3, criterion_3(&runs)),
        (4, criterion_4(&runs)),
        (5, criterion_5(&runs)),
        (6, criterion_6(&runs)),
        (7, criterion_7()),
        (8, criterion_8(&runs)),
        (9, criterion_9()),
        (10, criterion_10()),
    ];
    let mut err = std::io::stderr().lock();
    let mut failed = Vec::new();
    for (i, r) in &results {
        match r {
            Ok(msg) => writeln!(err, "criterion {i:>2}: PASS  {msg}").unwrap(),
            Err(msg) => {
                writeln!(err, "criterion {i:>2}: FAIL  {msg}").unwrap();
                failed.push(*i);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
