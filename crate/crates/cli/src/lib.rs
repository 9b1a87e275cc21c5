//! Experiment runner behind the `disttest` binary.
//!
//! An [`ExperimentSpec`] fixes the output completely: trial `i` of a run
//! draws from the stream seeded by `derive_seed(master_seed, i)` (grid
//! commands key rows by `s` instead of `i`), and rows come back in index
//! order however many workers ran them.

pub mod commands;
pub mod instance;
pub mod spec;
pub mod table;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};

use clap::Parser;
use thiserror::Error;

pub use commands::execute;
pub use instance::Instance;
pub use spec::{Cli, CommandKind, ExperimentSpec, Overrides, SChoice};
pub use table::{Cell, Format, Table};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] disttest_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl CliError {
    /// 2 for refused preconditions and bad usage, 3 for I/O and malformed
    /// input, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use disttest_core::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(E::Io(_) | E::Format(_)) => 3,
            CliError::Core(E::EstimatorFailure { .. }) => 1,
            CliError::Core(_) => 2,
            CliError::Io(_) | CliError::Csv(_) => 3,
            CliError::Pool(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Runs one experiment and writes its table.
pub fn run(spec: &ExperimentSpec) -> Result<Table> {
    let table = execute(spec)?;
    // `generate` uses `--out` as its target directory.
    let dest = match spec.command {
        CommandKind::Generate => None,
        _ => spec.output.as_ref(),
    };
    match dest {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            table.write(&mut w, spec.format)?;
            w.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            table.write(&mut w, spec.format)?;
            w.flush()?;
        }
    }
    Ok(table)
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match ExperimentSpec::try_from(cli).and_then(|spec| run(&spec)) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("disttest: {e}");
            e.exit_code()
        }
    }
}
