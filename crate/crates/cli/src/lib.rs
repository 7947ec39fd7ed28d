//! Batch front-end for the `ergodic-hjb` solvers.
//!
//! `ergodic-hjb <subcommand> [--config PATH] [--set key=value]...` writes into
//! the output directory:
//!
//! - `result.json`: estimates, certificate, diagnostics and the config echo
//! - `timings.json`: wall time per stage
//! - `summary.txt`: one line per estimate, also printed to stdout
//! - `config.txt`: the full configuration, reusable with `--config`
//! - `*.tsv`: field and profile tables
//!
//! The directory is `output.dir` if set, else `$ERGODIC_HJB_OUT`, else `out`.

pub mod config;
pub mod run;
pub mod table;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

pub use config::{ConfigError, RunConfig, Subcommand};
pub use run::{execute, Outcome, RunResult, Status};

pub const OUTPUT_ENV: &str = "ERGODIC_HJB_OUT";

pub const EXIT_SUCCESS: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_ACCEPTANCE: i32 = 4;

/// Reads the config file (if any), applies overrides and validates.
pub fn load_config(
    subcommand: Subcommand,
    path: Option<&Path>,
    sets: &[String],
) -> Result<RunConfig, String> {
    let text = match path {
        Some(p) => fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?,
        None => String::new(),
    };
    let mut cfg = RunConfig::parse(&text).map_err(|e| e.to_string())?;
    cfg.apply_overrides(sets).map_err(|e| e.to_string())?;
    cfg.subcommand = subcommand;
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

pub fn output_dir(cfg: &RunConfig) -> PathBuf {
    cfg.output_dir
        .clone()
        .or_else(|| std::env::var(OUTPUT_ENV).ok().filter(|s| !s.is_empty()))
        .unwrap_or_else(|| "out".into())
        .into()
}

pub fn result_json(result: &RunResult) -> String {
    let mut s = serde_json::to_string_pretty(result).expect("result serializes");
    s.push('\n');
    s
}

/// Writes every artifact of `outcome` into `dir`.
pub fn emit(outcome: &Outcome, cfg: &RunConfig, dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("result.json"), result_json(&outcome.result))?;
    let timings: serde_json::Map<String, serde_json::Value> = outcome
        .timings
        .iter()
        .map(|(k, v)| (k.clone(), (*v).into()))
        .collect();
    let mut t = serde_json::to_string_pretty(&timings).expect("timings serialize");
    t.push('\n');
    fs::write(dir.join("timings.json"), t)?;
    fs::write(dir.join("config.txt"), cfg.to_text())?;
    let mut summary = outcome.summary.join("\n");
    summary.push('\n');
    fs::write(dir.join("summary.txt"), summary)?;
    for table in &outcome.tables {
        let file = fs::File::create(dir.join(format!("{}.tsv", table.name)))?;
        let mut w = io::BufWriter::new(file);
        table.write_to(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

/// Runs one invocation and returns the process exit code.
pub fn run_cli(subcommand: Subcommand, config: Option<&Path>, sets: &[String]) -> i32 {
    let cfg = match load_config(subcommand, config, sets) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return EXIT_VALIDATION;
        }
    };
    let outcome = execute(&cfg);
    let dir = output_dir(&cfg);
    if let Err(e) = emit(&outcome, &cfg, &dir) {
        eprintln!("cannot write to {}: {e}", dir.display());
        return EXIT_SOLVER;
    }
    // A closed stdout (e.g. piped into `head`) is not a failure.
    let mut out = io::stdout().lock();
    for line in &outcome.summary {
        if writeln!(out, "{line}").is_err() {
            break;
        }
    }
    match outcome.status {
        Status::Success => EXIT_SUCCESS,
        Status::SolverFailure => EXIT_SOLVER,
        Status::AcceptanceFailure => EXIT_ACCEPTANCE,
    }
}
