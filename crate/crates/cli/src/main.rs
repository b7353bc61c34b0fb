use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use piston_cli::{commands, CliError, Overrides, RunConfig};

/// Autonomous flux-piston heat engine: steady states, pV loops and
/// stochastic rotor simulations.
#[derive(Debug, Parser)]
#[command(name = "piston", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Reduce circuit element values (SI) to engine parameters and check the regime
    Params(Common),
    /// Chamber and filter occupations against detuning
    SteadyState(Common),
    /// pV loops for a set of non-adiabaticities
    Pv(Common),
    /// Run a trajectory ensemble and write series, statistics and a manifest
    Simulate(Common),
    /// Check a statistics file against the first-order predictions
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Statistics file (default: <out>/stats.csv)
        #[arg(long)]
        stats: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in parameter set: fig2b, fig2c, fig2d or fig3
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "n-traj")]
    n_traj: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// Worker threads for the ensemble (results do not depend on it)
    #[arg(long, hide = true)]
    threads: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, CliError> {
        let overrides = Overrides {
            preset: self.preset.clone(),
            seed: self.seed,
            out: self.out.clone(),
            n_traj: self.n_traj,
            dt: self.dt,
            t_end: self.t_end,
        };
        RunConfig::load(self.config.as_deref(), &overrides)
    }
}

fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Params(c) => commands::params(&c.load()?),
        Command::SteadyState(c) => commands::steady_state(&c.load()?),
        Command::Pv(c) => commands::pv(&c.load()?),
        Command::Simulate(c) => {
            if c.threads == Some(0) {
                return Err(CliError::Config("--threads must be at least 1".into()));
            }
            commands::simulate(&c.load()?, c.threads)
        }
        Command::Analyze { common, stats } => commands::analyze(&common.load()?, stats.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("piston: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
