use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use formfield::Mode;
use formfield_cli::commands::{compare_command, preset_command, run_command};
use formfield_cli::Status;

#[derive(Parser)]
#[command(
    name = "formfield",
    version,
    about = "Multi-UAV formation planning with adaptive potential fields"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write trace.csv, trajectory.svg and report.json.
    Run {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override sim.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's mode.
        #[arg(long, value_parser = parse_mode)]
        mode: Option<Mode>,
    },
    /// Run the same scenario under several modes and tabulate the results.
    Compare {
        config: PathBuf,
        /// Comma-separated list, e.g. aapf,dsa_aapf.
        #[arg(long)]
        modes: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Expand a built-in scenario to a config file.
    Preset {
        name: String,
        /// Write to stdout instead of <out>/<name>.json.
        #[arg(long)]
        print: bool,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                Status::Error.into()
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Run {
            config,
            out,
            seed,
            mode,
        } => run_command(&config, &out, seed, mode),
        Command::Compare { config, modes, out } => compare_command(&config, &modes, &out),
        Command::Preset { name, print, out } => preset_command(&name, print, &out),
    };
    match result {
        Ok(status) => status.into(),
        Err(e) => {
            eprintln!("error: {e:#}");
            Status::Error.into()
        }
    }
}
