use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sisd_cli::{read_grid, run_scenario, sweep, CliError, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "sisd",
    version,
    about = "Controlled SIS epidemics on weighted networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and run its certificate checks
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run a scenario for every (beta, gamma) pair in a grid file
    Sweep {
        config: PathBuf,
        /// JSON array of [beta, gamma] pairs
        #[arg(long)]
        grid: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Artifact directory, overriding the config
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Master seed, overriding the config
    #[arg(long)]
    seed: Option<u64>,
}

fn load(path: &Path, common: &Common) -> Result<ScenarioConfig, CliError> {
    let mut config = ScenarioConfig::from_path(path)?;
    if let Some(dir) = &common.out_dir {
        config.outputs.directory = dir.clone();
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn print_json<T: serde::Serialize>(value: &T) {
    match serde_json::to_string_pretty(value) {
        Ok(s) => println!("{s}"),
        Err(e) => eprintln!("cannot render summary: {e}"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result =
        match &cli.command {
            Command::Run { config, common } => load(config, common)
                .and_then(|c| run_scenario(&c))
                .map(|summary| {
                    print_json(&summary);
                    summary.exit_code
                }),
            Command::Sweep {
                config,
                grid,
                common,
            } => load(config, common).and_then(|c| {
                let grid = read_grid(grid)?;
                let report = sweep(&c, &grid, c.seed)?;
                for err in report.rows.iter().filter_map(|r| r.error.as_ref()) {
                    eprintln!("{err}");
                }
                print_json(&report);
                Ok(report.exit_code())
            }),
        };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
