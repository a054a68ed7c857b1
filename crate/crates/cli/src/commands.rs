//! The four subcommands. Each writes its files into the output directory and
//! returns the exit code it wants.

use std::path::{Path, PathBuf};

use repeller_core::maps::fit_nonflatness;
use repeller_core::orbits::{backward_window, birkhoff_average, ergodic_estimates, running_means, typical_orbit};
use repeller_core::pipeline::{build_from, estimate, targets_from, BuildOutcome};
use repeller_core::recurrence::{slow_recurrence_profile, tail_sum_estimate};
use repeller_core::repeller::{verify_theorem, TargetEstimates};
use repeller_core::{EntropyEstimate, MapSystem, Potential, RepellerIFS, VerificationReport};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::Config;
use crate::error::CliError;
use crate::report::{num, opt, write_csv, Report};

pub const IFS_FILE: &str = "ifs.json";
pub const VERIFICATION_FILE: &str = "verification.txt";
pub const IFS_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

/// Serialized repeller together with the orbit targets it was checked against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IfsFile {
    pub format: u32,
    pub targets: TargetEstimates,
    pub ifs: RepellerIFS,
}

impl IfsFile {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)?;
        let file: IfsFile = serde_json::from_str(&text)?;
        if file.format != IFS_FORMAT {
            return Err(CliError::Config(format!("{}: unsupported IFS format {}", path.display(), file.format)));
        }
        Ok(file)
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

struct Files {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Files {
    fn new(cfg: &Config) -> Result<Self, CliError> {
        std::fs::create_dir_all(&cfg.output.dir)?;
        Ok(Self { dir: cfg.output.dir.clone(), written: Vec::new() })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.written.push(p.clone());
        p
    }
}

fn map_section(map: &MapSystem) -> serde_json::Value {
    json!({
        "name": map.name(),
        "domain_lo": map.domain.lo,
        "domain_hi": map.domain.hi,
        "circle": map.is_circle(),
        "singular_set": map.singular_set,
        "branch_count": map.branch_count(),
        "beta": map.beta,
        "holder": map.holder,
    })
}

fn entropy_summary(e: &EntropyEstimate) -> serde_json::Value {
    json!({
        "h": e.h,
        "delta": e.delta,
        "pool_size": e.pool_size,
        "chosen_n": e.chosen_n,
        "chosen_eps": e.chosen_eps,
        "plateau_found": e.plateau_found,
        "monotone_in_eps": e.monotone_in_eps,
    })
}

fn write_entropy_grid(path: &Path, e: &EntropyEstimate) -> Result<(), CliError> {
    let rows = e.grid.iter().map(|c| vec![c.n.to_string(), num(c.eps_tilde), c.card.to_string(), num(c.rate), opt(c.slope), c.saturated.to_string()]);
    write_csv(path, &["n", "eps_tilde", "card", "rate", "slope", "saturated"], rows)
}

/// Orbit statistics, integrability table, tail sums and recurrence profiles.
pub fn cmd_analyze(cfg: &Config) -> Result<Outcome, CliError> {
    let chi_probe = cfg.validate()?;
    let map = cfg.map_system()?;
    let potentials = cfg.potentials()?;
    let orbit = typical_orbit(&map, cfg.orbit.x0, cfg.orbit.length, cfg.orbit.seed, cfg.orbit.burn_in)?;
    let est = ergodic_estimates(&map, &orbit, &potentials, cfg.pipeline.drift_threshold)?;
    let tails = tail_sum_estimate(&map, &orbit, cfg.pipeline.delta, cfg.caps.tail_n_max);
    let fit = if map.singular_set.is_empty() { None } else { Some(fit_nonflatness(&map, &orbit.points)?) };

    let mut files = Files::new(cfg)?;
    let integrability = files.path("integrability.csv");
    write_csv(
        &integrability,
        &["observable", "applicable", "mean", "std_error", "half_mean", "drift", "divergent"],
        est.integrability.iter().map(|e| {
            vec![e.name.clone(), e.applicable.to_string(), num(e.mean), num(e.std_error), num(e.half_mean), num(e.drift), e.divergent.to_string()]
        }),
    )?;

    let tail_path = files.path("tail_sums.csv");
    let r = (1..=tails.tail_sums.len()).map(|n| vec![n.to_string(), num((-(n as f64) * tails.delta).exp()), num(tails.tail_sums[n - 1])]);
    write_csv(&tail_path, &["n", "radius", "fraction"], r)?;

    let depth = cfg.pipeline.depth;
    let windows = cfg.caps.recurrence_windows;
    let mut rec_rows = Vec::new();
    let mut with_violation = 0;
    let mut max_last = 0;
    if orbit.len() > depth && windows > 0 {
        let span = orbit.len() - 1 - depth;
        for w in 0..windows {
            let end = depth + if windows > 1 { span * w / (windows - 1) } else { span };
            let bw = backward_window(&orbit, end, depth)?;
            let prof = slow_recurrence_profile(&map, &bw, cfg.pipeline.delta);
            with_violation += usize::from(!prof.violations.is_empty());
            max_last = max_last.max(prof.last_violation);
            for k in 1..=depth {
                let x = bw.x(k);
                let d = map.singular_distance(x);
                let bound = (-(k as f64) * cfg.pipeline.delta).exp();
                rec_rows.push(vec![end.to_string(), k.to_string(), num(x), num(d), num(bound), (d < bound).to_string()]);
            }
        }
    }
    let rec_path = files.path("recurrence.csv");
    write_csv(&rec_path, &["window_end", "k", "x", "distance", "threshold", "violation"], rec_rows)?;

    let mut observed = vec![Potential::LogDerivative];
    observed.extend(potentials.iter().cloned());
    let means = running_means(&map, &orbit, &observed, cfg.caps.running_mean_stride)?;
    let mut header = vec!["iterates".to_string()];
    header.extend(observed.iter().map(|p| p.to_string()));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rm_path = files.path("running_means.csv");
    write_csv(&rm_path, &header, means.into_iter().map(|(i, v)| std::iter::once(i.to_string()).chain(v.into_iter().map(num)).collect()))?;

    let divergent = est.any_divergent();
    let mut report = Report::new();
    report
        .section("config", cfg)?
        .section("map", &map_section(&map))?
        .section("estimates", &est)?
        .section("tail_sums", &tails)?
        .section("nonflatness", &fit)?
        .section(
            "recurrence",
            &json!({"windows": windows, "depth": depth, "windows_with_violations": with_violation, "max_last_violation": max_last}),
        )?
        .section("flags", &json!({"chi_probe": chi_probe, "divergent_integrability": divergent}))?;
    let report_path = files.path("analyze_report.txt");
    report.write(&report_path)?;

    let summary = vec![
        format!("map {}", map.name()),
        format!("chi = {}", est.chi_lower),
        format!("divergent integrability: {divergent}"),
    ];
    Ok(Outcome { exit_code: if divergent { 2 } else { 0 }, files: files.written, summary })
}

/// Katok entropy grid and plateau.
pub fn cmd_entropy(cfg: &Config) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let map = cfg.map_system()?;
    let pool = typical_orbit(&map, cfg.orbit.x0, cfg.entropy.pool, cfg.orbit.seed, cfg.orbit.burn_in)?;
    let e = repeller_core::entropy::katok_entropy(&map, &pool.points, cfg.pipeline.delta, &cfg.entropy.n_grid, &cfg.entropy.eps_grid)?;

    let mut files = Files::new(cfg)?;
    let grid = files.path("entropy_grid.csv");
    write_entropy_grid(&grid, &e)?;
    let mut report = Report::new();
    report.section("config", cfg)?.section("map", &map_section(&map))?.section("entropy", &entropy_summary(&e))?;
    let report_path = files.path("entropy_report.txt");
    report.write(&report_path)?;

    let summary = vec![format!("map {}", map.name()), format!("h = {} (plateau found: {})", e.h, e.plateau_found)];
    Ok(Outcome { exit_code: if e.plateau_found { 0 } else { 2 }, files: files.written, summary })
}

fn verification_report(report: &VerificationReport) -> Result<Report, CliError> {
    let mut r = Report::new();
    r.section("verification", report)?;
    r.section(
        "flags",
        &json!({
            "all_pass": report.all_pass(),
            "margin_a": report.margin_a(),
            "margin_d": report.margin_d(),
        }),
    )?;
    Ok(r)
}

fn build_report(cfg: &Config, map: &MapSystem, out: &BuildOutcome) -> Result<Report, CliError> {
    let g = &out.good;
    let c = &out.classing;
    let ifs = &out.ifs;
    let mut r = Report::new();
    r.section("config", cfg)?
        .section("map", &map_section(map))?
        .section("estimates", &out.estimation.estimates)?
        .section("entropy", &entropy_summary(&out.estimation.entropy))?
        .section(
            "good_set",
            &json!({
                "points": g.points.len(),
                "rho": g.rho,
                "acceptance_rate": g.acceptance_rate,
                "lambda_star_rate": g.lambda_star_rate,
                "required_rate": 1.0 - 2.0 * g.delta,
                "thin": g.thin,
                "windows_examined": g.windows_examined,
                "depth": g.depth,
                "return_span": g.return_span,
                "cell_width": g.cell_width,
            }),
        )?
        .section(
            "classing",
            &json!({
                "card_e": c.card_e(),
                "dropped": c.dropped,
                "j": c.j,
                "m": c.m,
                "card_f_m": c.card_f_m,
                "card_f_m_cell": c.f_m_cell.len(),
                "chosen_cell": c.chosen_cell,
                "base_center": c.base_center,
                "classes": c.classes.iter().map(|(k, v)| format!("{k}:{}", v.len())).collect::<Vec<_>>(),
                "pigeonhole_holds": c.pigeonhole_holds(),
                "cell_bound_holds": c.cell_bound_holds(),
                "n1": c.n1,
                "n3": c.n3,
            }),
        )?
        .section(
            "ifs",
            &json!({
                "m": ifs.m,
                "branches": ifs.branches.len(),
                "rejected": ifs.rejected,
                "base_center": ifs.base_center,
                "base_radius": ifs.base_radius,
                "contraction_bound": ifs.contraction_bound,
                "rho": ifs.rho,
                "entropy": ifs.entropy(),
            }),
        )?;
    r.extend(verification_report(&out.report)?);
    Ok(r)
}

/// Good set, classing, repeller and verification from a fresh orbit.
pub fn cmd_build(cfg: &Config) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let map = cfg.map_system()?;
    let params = cfg.pipeline_params()?;
    let mut estimation = estimate(&map, &params)?;
    if let Some(chi) = cfg.pipeline.chi {
        estimation.estimates.chi_lower = chi;
    }
    let out = build_from(&map, &params, estimation)?;

    let mut files = Files::new(cfg)?;
    let ifs_path = files.path(IFS_FILE);
    let targets = targets_from(&out.estimation, &params.potentials);
    let targets = TargetEstimates { chi: out.estimation.estimates.chi_lower, ..targets };
    IfsFile { format: IFS_FORMAT, targets, ifs: out.ifs.clone() }.write(&ifs_path)?;

    let ver = files.path(VERIFICATION_FILE);
    verification_report(&out.report)?.write(&ver)?;
    let rep = files.path("build_report.txt");
    build_report(cfg, &map, &out)?.write(&rep)?;

    let grid = files.path("entropy_grid.csv");
    write_entropy_grid(&grid, &out.estimation.entropy)?;
    let tempering = files.path("tempering.csv");
    write_csv(
        &tempering,
        &["index", "c_eps", "r_tilde", "r", "safety", "rho", "last_violation", "in_lambda1"],
        out.good.profiles.iter().map(|w| match &w.profile {
            Some(p) => vec![
                w.index.to_string(),
                num(p.c_eps),
                num(p.r_tilde),
                num(p.r),
                num(p.safety),
                num(p.rho),
                w.last_violation.to_string(),
                w.in_lambda1.to_string(),
            ],
            None => vec![w.index.to_string(), String::new(), String::new(), String::new(), String::new(), String::new(), w.last_violation.to_string(), w.in_lambda1.to_string()],
        }),
    )?;
    let classes = files.path("classes.csv");
    write_csv(&classes, &["k", "card"], out.classing.classes.iter().map(|(k, v)| vec![k.to_string(), v.len().to_string()]))?;
    let branches = files.path("branches.csv");
    write_csv(
        &branches,
        &["branch", "anchor", "lo", "hi", "lipschitz"],
        out.ifs.branches.iter().enumerate().map(|(i, b)| vec![i.to_string(), num(b.anchor), num(b.lo), num(b.hi), num(b.lipschitz)]),
    )?;

    let rep = &out.report;
    let summary = vec![
        format!("map {}: {} branches of period {} ({} rejected)", map.name(), rep.branches, rep.m, rep.rejected),
        format!("h_repeller = {}, h_mu = {}, chi = {}", rep.h_repeller, rep.h_mu, rep.chi),
        format!("(a) {} (b) {} (c) {} (d) {}", rep.pass_a, rep.pass_b, rep.pass_c, rep.pass_d),
        format!("good-set acceptance {} (thin: {})", out.good.acceptance_rate, out.good.thin),
    ];
    Ok(Outcome { exit_code: if rep.all_pass() { 0 } else { 2 }, files: files.written, summary })
}

/// Re-checks a serialized repeller against the targets stored with it and the
/// orbit integrals of the configured potentials.
pub fn cmd_verify(cfg: &Config, ifs_path: &Path) -> Result<Outcome, CliError> {
    cfg.check_shape()?;
    let file = IfsFile::read(ifs_path)?;
    let map = cfg.map_system()?;
    if map != file.ifs.map {
        return Err(CliError::Config(format!("config map {} does not match the IFS map {}", map.name(), file.ifs.map.name())));
    }
    let params = cfg.pipeline_params()?;
    let orbit = typical_orbit(&map, params.x0, params.orbit_len_needed(), params.seed, params.burn_in)?;
    let mut integrals = Vec::new();
    for phi in &params.potentials {
        if integrals.iter().any(|(p, _)| p == phi) {
            continue;
        }
        integrals.push((phi.clone(), birkhoff_average(&map, &orbit, phi)?));
    }
    let targets = TargetEstimates { h_mu: file.targets.h_mu, chi: file.targets.chi, integrals };
    let report = verify_theorem(&file.ifs, &targets, file.ifs.eps, &cfg.verify_params())?;

    let mut files = Files::new(cfg)?;
    let ver = files.path(VERIFICATION_FILE);
    verification_report(&report)?.write(&ver)?;
    let summary = vec![
        format!("map {}: {} branches, h_repeller = {}", map.name(), report.branches, report.h_repeller),
        format!("(a) {} (b) {} (c) {} (d) {}", report.pass_a, report.pass_b, report.pass_c, report.pass_d),
    ];
    Ok(Outcome { exit_code: if report.all_pass() { 0 } else { 2 }, files: files.written, summary })
}
