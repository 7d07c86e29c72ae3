//! Command-line experiment runner for the `qsf` simulation crate.
//!
//! Seven subcommands cover the workflows the library supports: single
//! estimates (`estimate-poly`, `entropy`, `fidelity`), eigenvalue search
//! (`maxeig`), sweep experiments (`convergence`, `compare-baselines`),
//! and coefficient-loading training (`train-prep`). Every command is
//! fully determined by its flags plus `--seed`; the sweep commands
//! parallelize their repeats without changing a byte of output.
//!
//! Point commands print a structured-text summary, one `key value` pair
//! per line. Sweep commands print CSV, or write it to `--out` and print
//! the summary instead. All floating-point output carries 12 significant
//! digits so reruns can be compared bytewise.

mod config;
mod point;
mod source;
mod sweep;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::Path;

use clap::{Parser, Subcommand};
use thiserror::Error;

use config::FileConfig;

/// Errors surfaced to `main`: usage problems keep clap's own exit
/// handling (so `--help` still exits 0), everything else prints one line
/// and exits 1.
#[derive(Debug, Error)]
pub enum CliError {
    /// Usage and parse errors from clap, including `--help`/`--version`.
    #[error(transparent)]
    Usage(#[from] clap::Error),
    /// Errors bubbled up from the simulation library.
    #[error(transparent)]
    Lib(#[from] qsf::Error),
    /// Config-file and flag-validation problems.
    #[error("{0}")]
    Config(String),
    /// Filesystem problems, tagged with the offending path.
    #[error("{0}")]
    Io(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(
    name = "qsf",
    version,
    about = "Experiment runner for polynomial quantum-state functionals"
)]
struct Cli {
    /// Structured-text config file (`key value` lines, `#` comments).
    /// Command-line flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<std::path::PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate a polynomial functional of a state from a spec file.
    EstimatePoly(point::EstimatePolyArgs),
    /// Plan and run a von Neumann entropy estimate.
    Entropy(point::EntropyArgs),
    /// Plan and run an Uhlmann fidelity estimate.
    Fidelity(point::FidelityArgs),
    /// Bisection search for the largest eigenvalue.
    Maxeig(point::MaxeigArgs),
    /// Error-versus-shots sweep for entropy or fidelity.
    Convergence(sweep::ConvergenceArgs),
    /// MSE and copy cost against the term-by-term swap baseline.
    CompareBaselines(sweep::CompareBaselinesArgs),
    /// Train the coefficient-loading circuit and measure its effect.
    TrainPrep(point::TrainPrepArgs),
}

/// Parses `argv`, runs the selected command, and returns what belongs on
/// stdout. Commands with `--out` (and `--dump-shots`) also write files.
pub fn run<I, S>(argv: I) -> CliResult<String>
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv)?;
    let cfg = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::empty(),
    };
    match cli.command {
        Command::EstimatePoly(args) => point::estimate_poly(args, &cfg),
        Command::Entropy(args) => point::entropy(args, &cfg),
        Command::Fidelity(args) => point::fidelity(args, &cfg),
        Command::Maxeig(args) => point::maxeig(args, &cfg),
        Command::Convergence(args) => sweep::convergence(args, &cfg),
        Command::CompareBaselines(args) => sweep::compare_baselines(args, &cfg),
        Command::TrainPrep(args) => point::train_prep(args, &cfg),
    }
}

/// 12 significant digits, scientific notation. Every float the tool
/// prints goes through here, which is what makes reruns byte-comparable.
pub(crate) fn sig(x: f64) -> String {
    format!("{x:.11e}")
}

/// Key-value summary builder. One record per command run.
pub(crate) struct Summary {
    text: String,
}

impl Summary {
    pub fn new(command: &str) -> Self {
        let mut text = String::new();
        let _ = writeln!(text, "command {command}");
        Self { text }
    }

    pub fn push(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.text, "{key} {value}");
    }

    pub fn push_sig(&mut self, key: &str, x: f64) {
        self.push(key, sig(x));
    }

    /// Appends a preformatted line, for history tables inside a summary.
    pub fn line(&mut self, raw: &str) {
        let _ = writeln!(self.text, "{raw}");
    }

    pub fn finish(self) -> String {
        self.text
    }
}

/// Finalizes a point-command summary: optionally mirrors it to `--out`,
/// always returns it for stdout.
pub(crate) fn emit(summary: Summary, out: Option<&Path>) -> CliResult<String> {
    let text = summary.finish();
    if let Some(path) = out {
        write_text(path, &text)?;
    }
    Ok(text)
}

pub(crate) fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub(crate) fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
