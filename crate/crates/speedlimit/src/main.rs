use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use speedlimit::analysis::parse_triplets;
use speedlimit::config::AnalyzeParams;
use speedlimit::{run_experiment, Experiment, ExperimentConfig, HarnessError, Kind, Result};

#[derive(Parser)]
#[command(
    name = "speedlimit",
    version,
    about = "Thermodynamic speed limits of training dynamics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Power-law NTK spectrum: W2, entropy, T_SL and path lengths against t.
    NtkScaling(Common),
    /// Ratio T_SL/t and path lengths for an NTK spectrum.
    NtkInefficiency(Common),
    /// Finite-size Bayesian ridge regression over several seeds.
    LinregFinite(Common),
    /// Large-system limit under the Marchenko-Pastur law, optionally swept.
    LinregAsymptotic(Common),
    /// Ornstein-Uhlenbeck speed limit with a Monte Carlo check.
    LangevinSim(Common),
    /// Speed-limit analysis of a recorded trajectory archive.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Archive directory; alternative to a config file.
        #[arg(long)]
        archive: Option<PathBuf>,
        /// Checkpoint index used as the warm-start origin.
        #[arg(long)]
        warm_start: Option<usize>,
        /// Weight triplets to trace, as `i,j,k;i,j,k`.
        #[arg(long)]
        triplets: Option<String>,
    },
}

fn execute(cli: Cli) -> Result<()> {
    let (common, kind, archive, warm_start, triplets) = match cli.command {
        Command::NtkScaling(c) => (c, Kind::NtkScaling, None, None, None),
        Command::NtkInefficiency(c) => (c, Kind::NtkInefficiency, None, None, None),
        Command::LinregFinite(c) => (c, Kind::LinregFinite, None, None, None),
        Command::LinregAsymptotic(c) => (c, Kind::LinregAsymptotic, None, None, None),
        Command::LangevinSim(c) => (c, Kind::LangevinSim, None, None, None),
        Command::Analyze {
            common,
            archive,
            warm_start,
            triplets,
        } => (
            common,
            Kind::AnalyzeTrajectory,
            archive,
            warm_start,
            triplets,
        ),
    };
    let mut cfg = match (&common.config, archive) {
        (Some(path), None) => ExperimentConfig::load(path, Some(kind))?,
        (None, Some(archive)) => ExperimentConfig {
            kind,
            seed: 0,
            output_dir: None,
            parameters: Default::default(),
            experiment: Experiment::AnalyzeTrajectory(AnalyzeParams {
                archive,
                warm_start: None,
                triplets: Vec::new(),
            }),
        },
        (Some(_), Some(_)) => {
            return Err(HarnessError::Config(
                "give either --config or --archive, not both".into(),
            ))
        }
        (None, None) => return Err(HarnessError::Config("--config is required".into())),
    };
    if let Experiment::AnalyzeTrajectory(p) = &mut cfg.experiment {
        if warm_start.is_some() {
            p.warm_start = warm_start;
        }
        if let Some(spec) = triplets {
            p.triplets = parse_triplets(&spec)?;
        }
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out = common
        .out
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| HarnessError::Config("output_dir: not set (use --out)".into()))?;
    let run = run_experiment(&cfg, &out)?;
    log::info!("wrote {} files to {}", run.files.len(), run.dir.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
