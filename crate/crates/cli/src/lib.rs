//! Command-line front end for `switchrep-core`.
//!
//! [`run`] parses arguments, executes one subcommand and returns the process
//! exit code. Exit codes: 0 success, 2 configuration error, 3 numerical or
//! validation failure.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::config::{ConfigError, Engine, Format, PartialConfig, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Environment variable capping the number of ensemble workers.
pub const THREADS_ENV: &str = "SWITCHREP_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("validation failed")]
    ValidationFailed,
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => EXIT_CONFIG,
            CliError::Numerical(_) | CliError::ValidationFailed => EXIT_NUMERICAL,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "switchrep", version, about = "Replicator dynamics under periodically switched update rules")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Replicator coefficients of pairwise comparison and imitation.
    Coeff(PartialConfig),
    /// Critical switching instants of a two-rule schedule.
    Thresholds(PartialConfig),
    /// Time series of the cooperator fraction from the selected engine.
    Trajectory(PartialConfig),
    /// Drift sum, stable point and convergence period counts.
    Classify(PartialConfig),
    /// Cross-check the engines against each other.
    Validate(PartialConfig),
    /// Agent-based ensemble on random regular graphs.
    Simulate(PartialConfig),
}

impl Command {
    fn flags(&self) -> &PartialConfig {
        match self {
            Command::Coeff(p)
            | Command::Thresholds(p)
            | Command::Trajectory(p)
            | Command::Classify(p)
            | Command::Validate(p)
            | Command::Simulate(p) => p,
        }
    }
}

/// Parse `args` (including the program name), run the subcommand and return
/// the exit code. Diagnostics go to `stderr`; results go to `--out` or `stdout`.
pub fn run<I, T>(args: I, threads_env: Option<&str>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                return EXIT_CONFIG;
            }
            let _ = write!(stdout, "{}", e.render());
            return EXIT_OK;
        }
    };
    match execute(&cli.command, threads_env, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn parse_threads(value: Option<&str>) -> Result<Option<usize>, CliError> {
    match value.map(str::trim).filter(|v| !v.is_empty()) {
        None => Ok(None),
        Some(v) => match v.parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!(
                "{THREADS_ENV} must be a positive integer, got '{v}'"
            ))),
        },
    }
}

pub fn execute(
    command: &Command,
    threads_env: Option<&str>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    let mut warnings = Vec::new();
    let resolved = RunConfig::resolve(command.flags(), &mut |w| warnings.push(w));
    for w in &warnings {
        writeln!(stderr, "warning: {w}")?;
    }
    let mut cfg = resolved?;
    let threads = parse_threads(threads_env)?;

    let mut sink: Box<dyn Write + '_> = match &cfg.out {
        Some(path) => Box::new(BufWriter::new(File::create(path).map_err(|e| {
            CliError::Config(format!("cannot create output file {}: {e}", path.display()))
        })?)),
        None => Box::new(BufWriter::new(stdout)),
    };
    let out: &mut dyn Write = &mut sink;

    match command {
        Command::Coeff(_) | Command::Thresholds(_) | Command::Classify(_) => {
            let format = cfg.format.unwrap_or(Format::Text);
            let report = match command {
                Command::Coeff(_) => commands::coeff(&cfg, &mut |w| {
                    let _ = writeln!(stderr, "warning: {w}");
                })?,
                Command::Thresholds(_) => commands::thresholds(&cfg)?,
                _ => commands::classify(&cfg)?,
            };
            report.write(out, format, &cfg.echo())?;
        }
        Command::Trajectory(_) | Command::Simulate(_) => {
            if matches!(command, Command::Simulate(_)) {
                if cfg.engine != Engine::Agent && command.flags().engine.is_some() {
                    writeln!(stderr, "warning: simulate always uses the agent engine")?;
                }
                cfg.engine = Engine::Agent;
            }
            let table = commands::trajectory(&cfg, threads)?;
            table.write(out, cfg.format.unwrap_or(Format::Csv), &cfg.echo())?;
        }
        Command::Validate(_) => {
            let format = cfg.format.unwrap_or(Format::Json);
            if format == Format::Csv {
                return Err(CliError::Config("validate writes text or json".into()));
            }
            let report = commands::validate(&cfg, threads)?;
            commands::write_validation(out, &report, format)?;
            out.flush()?;
            if !report.pass {
                return Err(CliError::ValidationFailed);
            }
        }
    }
    out.flush()?;
    Ok(())
}
