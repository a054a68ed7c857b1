use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::{cmd_analyze, cmd_build, cmd_entropy, cmd_verify, Outcome};
use crate::config::Config;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "repeller", version, about = "Horseshoe-type repellers from orbits of one-dimensional maps")]
pub struct Cli {
    /// TOML configuration; every missing key takes its default.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Size of the worker pool used by parallel stages.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Builtin map name, e.g. `doubling`, `ternary`, `tent`, `gauss`, `cusp`.
    #[arg(long, global = true)]
    pub map: Option<String>,
    /// Extra potential appended to the catalog; repeatable.
    #[arg(long = "potential", global = true)]
    pub potentials: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Lyapunov exponent, Birkhoff means, integrability and recurrence.
    Analyze {
        #[arg(long)]
        length: Option<usize>,
    },
    /// Katok entropy over the configured grid.
    Entropy {
        #[arg(long)]
        pool: Option<usize>,
    },
    /// Builds the repeller and checks it.
    Build(BuildArgs),
    /// Re-checks a serialized repeller.
    Verify {
        #[arg(long)]
        ifs: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub windows: Option<usize>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub chi: Option<f64>,
}

impl Cli {
    /// The config file with the command-line overrides applied.
    pub fn resolve_config(&self) -> Result<Config, CliError> {
        let mut cfg = match &self.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        if let Some(seed) = self.seed {
            cfg.orbit.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output.dir = out.clone();
        }
        if let Some(map) = &self.map {
            cfg.map.name = map.clone();
            cfg.map.custom = None;
        }
        cfg.potentials.catalog.extend(self.potentials.iter().cloned());
        match &self.command {
            Command::Analyze { length: Some(l) } => cfg.orbit.length = *l,
            Command::Entropy { pool: Some(p) } => cfg.entropy.pool = *p,
            Command::Build(b) => {
                if let Some(v) = b.eps {
                    cfg.pipeline.eps = v;
                }
                if let Some(v) = b.n {
                    cfg.pipeline.n = v;
                }
                if let Some(v) = b.delta {
                    cfg.pipeline.delta = v;
                }
                if let Some(v) = b.windows {
                    cfg.pipeline.windows = v;
                }
                if let Some(v) = b.depth {
                    cfg.pipeline.depth = v;
                }
                if b.chi.is_some() {
                    cfg.pipeline.chi = b.chi;
                }
            }
            _ => {}
        }
        Ok(cfg)
    }

    pub fn run(&self) -> Result<Outcome, CliError> {
        let cfg = self.resolve_config()?;
        let go = || match &self.command {
            Command::Analyze { .. } => cmd_analyze(&cfg),
            Command::Entropy { .. } => cmd_entropy(&cfg),
            Command::Build(_) => cmd_build(&cfg),
            Command::Verify { ifs } => cmd_verify(&cfg, ifs),
        };
        match self.workers {
            Some(w) => rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| CliError::Config(e.to_string()))?
                .install(go),
            None => go(),
        }
    }
}
