use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};

use flight_energy::params::{default_drone, params_to_toml};
use flight_energy_cli::commands;
use flight_energy_cli::config::{self, DownwashCompareConfig, EpmCurveConfig, OptimizeConfig, RegulateConfig, SweepConfig};
use flight_energy_cli::mission::MissionSpec;
use flight_energy_cli::{CliError, RunContext};

/// Minimum-energy drone flight studies.
#[derive(Parser)]
#[command(name = "plan", version)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    /// Print the default parameter set (or, after a subcommand, its default
    /// config) as TOML and exit.
    #[arg(long, global = true)]
    print_defaults: bool,
    /// More log output; repeat for solver iterations.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// EPM and its breakdown over an airspeed grid.
    EpmCurve(RunArgs),
    /// Root, Hover and Glauert downwash and EPM side by side.
    DownwashCompare(RunArgs),
    /// Closed-loop airspeed regulator simulation.
    Regulate(RunArgs),
    /// Minimum-energy trajectory for one boundary-value problem.
    Optimize(RunArgs),
    /// Energy against horizon with and without the landing incentive.
    TfSweep(RunArgs),
    /// Takeoff, cruise and landing phases in sequence.
    Mission(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML config; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory [default: out].
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl From<&RunArgs> for RunContext {
    fn from(a: &RunArgs) -> Self {
        Self {
            config: a.config.clone(),
            out: a.out.clone(),
            seed: a.seed,
        }
    }
}

fn defaults_toml(cmd: &Command) -> String {
    let drone = Some(default_drone());
    match cmd {
        Command::EpmCurve(_) => config::to_toml(&EpmCurveConfig { drone, ..Default::default() }),
        Command::DownwashCompare(_) => config::to_toml(&DownwashCompareConfig { drone, ..Default::default() }),
        Command::Regulate(_) => config::to_toml(&RegulateConfig { drone, ..Default::default() }),
        Command::Optimize(_) => config::to_toml(&OptimizeConfig { drone, ..Default::default() }),
        Command::TfSweep(_) => config::to_toml(&SweepConfig { drone, ..Default::default() }),
        Command::Mission(_) => config::to_toml(&MissionSpec { drone, ..Default::default() }),
    }
}

fn run(cmd: &Command) -> Result<(), CliError> {
    match cmd {
        Command::EpmCurve(a) => commands::epm_curve_cmd(&a.into()),
        Command::DownwashCompare(a) => commands::downwash_compare_cmd(&a.into()),
        Command::Regulate(a) => commands::regulate_cmd(&a.into()),
        Command::Optimize(a) => commands::optimize_cmd(&a.into()),
        Command::TfSweep(a) => commands::tf_sweep_cmd(&a.into()),
        Command::Mission(a) => commands::mission_cmd(&a.into()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let Some(cmd) = cli.command else {
        if cli.print_defaults {
            print!("{}", params_to_toml(&default_drone()));
            return ExitCode::SUCCESS;
        }
        Cli::command().print_help().ok();
        return ExitCode::from(2);
    };
    if cli.print_defaults {
        print!("{}", defaults_toml(&cmd));
        return ExitCode::SUCCESS;
    }
    match run(&cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
