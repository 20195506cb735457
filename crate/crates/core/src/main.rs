use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fvporous::cli::{cmd_converge, cmd_inequalities, cmd_monitors, cmd_solve, RunConfig, RunSummary};

#[derive(Parser)]
#[command(name = "fvporous", version, about = "Finite-volume solver and experiments for degenerate porous-media flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out` in the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one problem and write the trajectory.
    Solve {
        #[command(flatten)]
        common: Common,
    },
    /// Error against a fine reference grid and observed order.
    Converge {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "16,32,64,128")]
        ns: Vec<usize>,
        #[arg(long, default_value_t = 1024)]
        ref_n: usize,
    },
    /// Random sampling of the interpolation inequalities.
    Inequalities {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "4,8,16,64,256")]
        ns: Vec<usize>,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        /// Overrides `seed` in the configuration.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Grid-independence of the a-priori bound monitors.
    Monitors {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "32,64,128,256,512")]
        ns: Vec<usize>,
    },
}

fn out_dir(common: &Common, cfg: &RunConfig) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn run(cli: Cli) -> fvporous::Result<RunSummary> {
    match cli.command {
        Command::Solve { common } => {
            let cfg = RunConfig::load(&common.config)?;
            cmd_solve(&cfg, &out_dir(&common, &cfg))
        }
        Command::Converge { common, ns, ref_n } => {
            let cfg = RunConfig::load(&common.config)?;
            cmd_converge(&cfg, &ns, ref_n, &out_dir(&common, &cfg))
        }
        Command::Inequalities {
            common,
            ns,
            samples,
            seed,
        } => {
            let cfg = RunConfig::load(&common.config)?;
            let seed = seed.unwrap_or(cfg.seed);
            cmd_inequalities(&cfg, samples, &ns, seed, &out_dir(&common, &cfg))
        }
        Command::Monitors { common, ns } => {
            let cfg = RunConfig::load(&common.config)?;
            cmd_monitors(&cfg, &ns, &out_dir(&common, &cfg))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(summary) if summary.passed => ExitCode::SUCCESS,
        Ok(summary) => {
            eprintln!("{}: acceptance predicate failed, see summary.json", summary.command);
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
