use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use snapnet_cli::presets::Kind;
use snapnet_cli::{cmd_analyze, cmd_fit, cmd_simulate, cmd_sweep, load_file, load_input, CliError, Outcome};

#[derive(Parser)]
#[command(name = "snapnet", version, about = "Pneumatic snap-through network simulator")]
struct Cli {
    /// Output directory (default: the scenario's output_dir, then ./snapnet-out)
    #[arg(long, global = true, env = "SNAPNET_OUT_DIR")]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write trace, events and reports
    Simulate {
        /// Scenario file or preset name
        #[arg(long)]
        scenario: String,
    },
    /// Speed, stride and regime over a list of drive frequencies
    Sweep {
        #[arg(long)]
        scenario: String,
        /// Comma-separated frequencies in Hz (default: the scenario's sweep list)
        #[arg(long)]
        freqs: Option<String>,
    },
    /// Hysteresis, threshold and phase reports from a trace or pressure log CSV
    Analyze {
        /// Trace CSV, or a `t_s,p_mbar` pressure log
        trace: String,
        /// Scenario giving element nodes and the drive period
        #[arg(long)]
        scenario: Option<String>,
    },
    /// Fit scenario parameters to targets and emit the fitted scenario
    Fit {
        #[arg(long)]
        scenario: String,
        /// Targets file or preset name
        #[arg(long)]
        targets: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        tol: Option<f64>,
    },
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    let out = cli.out_dir.as_deref();
    match cli.command {
        Command::Simulate { scenario } => cmd_simulate(&load_input(&scenario, Kind::Scenario)?, out),
        Command::Sweep { scenario, freqs } => cmd_sweep(&load_input(&scenario, Kind::Scenario)?, freqs.as_deref(), out),
        Command::Analyze { trace, scenario } => {
            let sc = scenario.map(|s| load_input(&s, Kind::Scenario)).transpose()?;
            cmd_analyze(&load_file(&trace)?, sc.as_ref(), out)
        }
        Command::Fit { scenario, targets, seed, tol } => cmd_fit(
            &load_input(&scenario, Kind::Scenario)?,
            &load_input(&targets, Kind::Targets)?,
            seed,
            tol,
            out,
        ),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(o) => {
            print!("{}", o.summary);
            println!("wrote {} artifacts to {}", o.artifacts.len() + 1, o.out_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
