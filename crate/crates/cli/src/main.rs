use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ergodic_hjb_cli::{run_cli, Subcommand};

/// Ergodic eigenvalue solver, certificates and Monte Carlo cross-checks.
#[derive(Parser)]
#[command(name = "ergodic-hjb", version)]
struct Args {
    /// One of eigen, radial, bounds, simulate, sweep, crosscheck.
    subcommand: Subcommand,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set grid.nodes=401`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(2);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    let code = run_cli(args.subcommand, args.config.as_deref(), &args.sets);
    ExitCode::from(code as u8)
}
