//! Input loading shared by the subcommands: states from files or seeded
//! generators, specs from files or the built-in series constructors.

use std::path::{Path, PathBuf};

use clap::Args;
use qsf::coefficients::{entropy_taylor_spec, sqrt_taylor_spec, PolySpec};
use qsf::states::{load_state_text, random_state, DensityMatrix};

use crate::config::FileConfig;
use crate::{read_text, CliError, CliResult};

/// Where the input state ρ comes from: a file, or a seeded generator.
#[derive(Args, Debug, Clone)]
pub(crate) struct StateFlags {
    /// Density-matrix file in the text format the library writes.
    #[arg(long, value_name = "PATH", conflicts_with = "state")]
    pub state_file: Option<PathBuf>,
    /// Generated state kind: `random` (seeded) or `mixed` (I/d).
    #[arg(long, value_name = "KIND")]
    pub state: Option<String>,
    /// Dimension for generated states.
    #[arg(long, value_name = "DIM")]
    pub d: Option<usize>,
    /// Rank for `--state random`; defaults to full rank.
    #[arg(long, value_name = "RANK")]
    pub rank: Option<usize>,
    /// Seed for `--state random`, separate from the sampling seed.
    #[arg(long, value_name = "SEED")]
    pub state_seed: Option<u64>,
}

pub(crate) const STATE_KEYS: [&str; 5] = ["state-file", "state", "d", "rank", "state-seed"];

impl StateFlags {
    /// Loads or generates ρ, plus a one-line description for the summary.
    pub fn resolve(&self, cfg: &FileConfig) -> CliResult<(DensityMatrix, String)> {
        let file = match &self.state_file {
            Some(p) => Some(p.clone()),
            None => cfg.get::<String>("state-file")?.map(PathBuf::from),
        };
        let kind = match &self.state {
            Some(k) => Some(k.clone()),
            None => cfg.get("state")?,
        };
        let d = crate::config::pick(self.d, cfg.get("d")?, 2);
        let rank = match self.rank {
            Some(r) => Some(r),
            None => cfg.get("rank")?,
        };
        let seed = crate::config::pick(self.state_seed, cfg.get("state-seed")?, 1);
        generate(file, kind, d, rank, seed)
    }
}

/// The second state for fidelity-style commands. Generated states share
/// the first state's dimension.
#[derive(Args, Debug, Clone)]
pub(crate) struct SigmaFlags {
    /// Second-state file.
    #[arg(long, value_name = "PATH", conflicts_with = "sigma")]
    pub sigma_file: Option<PathBuf>,
    /// Generated second state: `random` or `mixed`.
    #[arg(long, value_name = "KIND")]
    pub sigma: Option<String>,
    /// Rank for `--sigma random`; defaults to full rank.
    #[arg(long, value_name = "RANK")]
    pub sigma_rank: Option<usize>,
    /// Seed for `--sigma random`.
    #[arg(long, value_name = "SEED")]
    pub sigma_seed: Option<u64>,
}

pub(crate) const SIGMA_KEYS: [&str; 4] = ["sigma-file", "sigma", "sigma-rank", "sigma-seed"];

impl SigmaFlags {
    pub fn resolve(&self, cfg: &FileConfig, d: usize) -> CliResult<(DensityMatrix, String)> {
        let file = match &self.sigma_file {
            Some(p) => Some(p.clone()),
            None => cfg.get::<String>("sigma-file")?.map(PathBuf::from),
        };
        let kind = match &self.sigma {
            Some(k) => Some(k.clone()),
            None => cfg.get("sigma")?,
        };
        let rank = match self.sigma_rank {
            Some(r) => Some(r),
            None => cfg.get("sigma-rank")?,
        };
        let seed = crate::config::pick(self.sigma_seed, cfg.get("sigma-seed")?, 2);
        generate(file, kind, d, rank, seed)
    }
}

fn generate(
    file: Option<PathBuf>,
    kind: Option<String>,
    d: usize,
    rank: Option<usize>,
    seed: u64,
) -> CliResult<(DensityMatrix, String)> {
    if let Some(path) = file {
        let rho = load_state_text(&read_text(&path)?)?;
        let label = format!("file {} (d={})", path.display(), rho.dim());
        return Ok((rho, label));
    }
    match kind.as_deref().unwrap_or("random") {
        "random" => {
            let rank = rank.unwrap_or(d);
            let rho = random_state(d, rank, seed)?;
            Ok((rho, format!("random d={d} rank={rank} seed={seed}")))
        }
        "mixed" => Ok((
            DensityMatrix::maximally_mixed(d),
            format!("mixed d={d}"),
        )),
        other => Err(CliError::Config(format!(
            "unknown state kind {other:?}: expected `random` or `mixed`"
        ))),
    }
}

pub(crate) fn load_spec(path: &Path) -> CliResult<PolySpec> {
    Ok(PolySpec::from_text(&read_text(path)?)?)
}

/// The built-in spec families. For `entropy`, `degree` is the top trace
/// power in the truncated series; for `fidelity` it is the square-root
/// series degree.
pub(crate) fn application_spec(app: &str, degree: usize) -> CliResult<PolySpec> {
    match app {
        "entropy" => {
            if degree < 2 {
                return Err(CliError::Config(
                    "the entropy series needs --degree 2 or higher".into(),
                ));
            }
            Ok(entropy_taylor_spec(degree - 1)?)
        }
        "fidelity" => Ok(sqrt_taylor_spec(degree)?),
        other => Err(CliError::Config(format!(
            "unknown application {other:?}: expected `entropy` or `fidelity`"
        ))),
    }
}
