//! Front end for the `cvmdi` binary: configuration, command dispatch and
//! CSV/JSON rendering. Kept in a library so tests can drive it in-process.

pub mod config;
mod render;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;
use cvmdi::Error;

pub use config::{Cli, Command, Format, RunConfig};
pub use render::Report;

/// Environment variable capping the worker threads (0 or unset = one per core).
pub const THREADS_ENV: &str = "CVMDI_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid {flag}: {message}")]
    Validation { flag: String, message: String },
    #[error(transparent)]
    Usage(#[from] clap::Error),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn validation(flag: impl Into<String>, message: String) -> Self {
        CliError::Validation {
            flag: flag.into(),
            message,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation { .. } => 2,
            CliError::Usage(e) => e.exit_code(),
            CliError::Core(Error::InvalidParameter { .. }) => 2,
            CliError::Core(Error::NoPositiveRate(_) | Error::InsufficientAcceptance { .. }) => 3,
            CliError::Core(_) | CliError::Io(_) => 1,
        }
    }
}

/// How a completed run ended. Both variants still produce an artifact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// No positive key (or no usable statistics) in the requested range.
    NoKey,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::NoKey => 3,
        }
    }
}

// Core parameter names mapped to the flag that sets them.
fn flag_for(name: &str) -> &str {
    match name {
        "v" => "--va/--vb",
        "k" => "--k",
        "t_ps" => "--tps",
        "eps" | "eps_a" | "eps_b" => "--eps",
        "beta" => "--beta",
        "samples" => "--samples",
        "step" => "--step",
        "range" => "--dmin/--dmax",
        "l_ac" | "l_bc" | "loss_db_per_km" => "--loss",
        other => other,
    }
}

fn promote(err: CliError) -> CliError {
    match err {
        CliError::Core(Error::InvalidParameter { name, reason }) => CliError::validation(flag_for(name), reason),
        other => other,
    }
}

fn thread_count() -> Result<usize, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map_err(|_| CliError::validation(THREADS_ENV, format!("expected a thread count, got `{v}`"))),
        _ => Ok(0),
    }
}

/// Computes the artifact for `cfg` without writing it.
pub fn run(cfg: &RunConfig) -> Result<Report, CliError> {
    let threads = thread_count()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::validation(THREADS_ENV, e.to_string()))?;
    pool.install(|| render::execute(cfg)).map_err(promote)
}

/// Parses `args`, runs, and writes the artifact to `--out` or `stdout`.
/// Returns the process exit code; diagnostics go to `stderr`.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render();
            let _ = if code == 0 {
                write!(stdout, "{rendered}")
            } else {
                write!(stderr, "{}", rendered.ansi())
            };
            return code;
        }
    };
    let result = RunConfig::resolve(cli).map_err(promote).and_then(|cfg| {
        let report = run(&cfg)?;
        match &cfg.out {
            Some(path) => std::fs::write(path, &report.body)?,
            None => stdout.write_all(report.body.as_bytes())?,
        }
        Ok(report)
    });
    match result {
        Ok(report) => {
            if let Some(note) = &report.note {
                let _ = writeln!(stderr, "cvmdi: {note}");
            }
            report.status.exit_code()
        }
        Err(e) => {
            let _ = writeln!(stderr, "cvmdi: {e}");
            e.exit_code()
        }
    }
}
