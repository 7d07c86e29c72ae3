//! Sweep commands: grids of seeded runs gathered into stable CSV tables.
//!
//! Each cell of a sweep gets its seed assigned up front, in a fixed task
//! order, from a dedicated seed stream. Workers then race through the
//! tasks in any order and the rows are emitted in task order afterwards,
//! so the CSV bytes never depend on the pool size.

use std::path::PathBuf;

use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use qsf::applications::{estimate_fidelity_with, estimate_poly_function, FidelityProblem};
use qsf::circuit::{joint_distribution, JointDistribution};
use qsf::coefficients::{Mode, PolySpec};
use qsf::sampler::{
    baseline_generalized_swap, estimate_from_tally, sample_tally, CopyAccounting,
};
use qsf::states::{poly_function_exact, von_neumann_entropy, DensityMatrix};

use crate::config::{parse_list, pick, FileConfig};
use crate::source::{application_spec, SigmaFlags, StateFlags, SIGMA_KEYS, STATE_KEYS};
use crate::{sig, write_text, CliError, CliResult, Summary};

const DEFAULT_SCHEDULE: &str = "100,1000,10000,100000,1000000";

/// Runs `f` on a dedicated pool of `workers` threads, or on the global
/// pool when `workers` is zero.
fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// One seed per task, drawn in task order from a stream independent of
/// everything else.
fn seeds_for(seed: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.gen()).collect()
}

/// Either CSV on stdout, or CSV in a file plus a summary on stdout.
fn emit_csv(csv: String, summary: Summary, out: Option<PathBuf>) -> CliResult<String> {
    match out {
        Some(path) => {
            write_text(&path, &csv)?;
            let mut summary = summary;
            summary.push("csv", path.display());
            Ok(summary.finish())
        }
        None => Ok(csv),
    }
}

const MODES: [Mode; 2] = [Mode::Standard, Mode::Variant];

fn mode_name(idx: usize) -> &'static str {
    MODES[idx].as_str()
}

/// The target pipeline of a convergence sweep, with both mode variants of
/// its spec and the two reference values each row repeats.
enum Pipeline {
    Entropy {
        specs: [PolySpec; 2],
        rho: DensityMatrix,
    },
    Fidelity {
        specs: [PolySpec; 2],
        problem: FidelityProblem,
    },
}

impl Pipeline {
    /// (truncated-series value, full functional value).
    fn references(&self) -> qsf::Result<(f64, f64)> {
        match self {
            Pipeline::Entropy { specs, rho } => Ok((
                poly_function_exact(&specs[0], rho)?,
                von_neumann_entropy(rho),
            )),
            Pipeline::Fidelity { specs, problem } => {
                let sqrt_exact = problem.sqrt_polynomial_exact(&specs[0])?;
                Ok((sqrt_exact * sqrt_exact, problem.exact_fidelity()))
            }
        }
    }

    /// (estimate, fresh copies) for one cell. Fidelity rows report the
    /// raw squared estimate, not the clamped one, so convergence from
    /// both sides stays visible.
    fn run(&self, mode: usize, shots: u64, seed: u64) -> qsf::Result<(f64, u64)> {
        match self {
            Pipeline::Entropy { specs, rho } => {
                let report = estimate_poly_function(&specs[mode], rho, shots, seed)?;
                Ok((report.estimate, report.copies.fresh_copies_total))
            }
            Pipeline::Fidelity { specs, problem } => {
                let report = estimate_fidelity_with(problem, &specs[mode], shots, seed)?;
                Ok((report.raw, report.sqrt_level.copies.fresh_copies_total))
            }
        }
    }
}

#[derive(Args, Debug)]
pub(crate) struct ConvergenceArgs {
    /// Which pipeline to sweep: `entropy` or `fidelity`.
    #[arg(long, value_name = "APP")]
    application: Option<String>,
    /// Top power (entropy) or series degree (fidelity).
    #[arg(long)]
    degree: Option<usize>,
    /// Comma-separated shot counts.
    #[arg(long, value_name = "LIST")]
    shots_schedule: Option<String>,
    /// Estimates per (shots, mode) cell.
    #[arg(long)]
    repeats: Option<usize>,
    #[command(flatten)]
    state: StateFlags,
    #[command(flatten)]
    sigma: SigmaFlags,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the sweep (0 = library default).
    #[arg(long)]
    workers: Option<usize>,
    /// CSV destination; without it the CSV itself is the output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

pub(crate) fn convergence(args: ConvergenceArgs, cfg: &FileConfig) -> CliResult<String> {
    let mut keys = vec![
        "application",
        "degree",
        "shots-schedule",
        "repeats",
        "seed",
        "workers",
        "out",
    ];
    keys.extend(STATE_KEYS);
    keys.extend(SIGMA_KEYS);
    cfg.check_keys(&keys)?;

    let application = pick(args.application, cfg.get("application")?, "entropy".into());
    let degree = pick(args.degree, cfg.get("degree")?, 6);
    let schedule_raw = pick(
        args.shots_schedule,
        cfg.get("shots-schedule")?,
        DEFAULT_SCHEDULE.into(),
    );
    let schedule: Vec<u64> = parse_list(&schedule_raw, "--shots-schedule")?;
    let repeats = pick(args.repeats, cfg.get("repeats")?, 10);
    let seed = pick(args.seed, cfg.get("seed")?, 0);
    let workers = pick(args.workers, cfg.get("workers")?, 0);
    if repeats == 0 {
        return Err(CliError::Config("--repeats must be positive".into()));
    }

    let (rho, rho_label) = args.state.resolve(cfg)?;
    let spec = application_spec(&application, degree)?;
    let specs = [spec.with_mode(Mode::Standard)?, spec.with_mode(Mode::Variant)?];
    let mut sigma_label = None;
    let pipeline = match application.as_str() {
        "entropy" => Pipeline::Entropy { specs, rho },
        _ => {
            let (sigma, label) = args.sigma.resolve(cfg, rho.dim())?;
            sigma_label = Some(label);
            Pipeline::Fidelity {
                specs,
                problem: FidelityProblem::new(&rho, &sigma)?,
            }
        }
    };
    let (exact_truncated, exact_full) = pipeline.references()?;

    struct Task {
        shots: u64,
        repeat: usize,
        mode: usize,
        seed: u64,
    }
    let mut tasks = Vec::with_capacity(schedule.len() * repeats * 2);
    for &shots in &schedule {
        for repeat in 0..repeats {
            for mode in 0..2 {
                tasks.push(Task {
                    shots,
                    repeat,
                    mode,
                    seed: 0,
                });
            }
        }
    }
    let task_seeds = seeds_for(seed, tasks.len());
    for (task, s) in tasks.iter_mut().zip(task_seeds) {
        task.seed = s;
    }

    let results = with_pool(workers, || {
        tasks
            .par_iter()
            .map(|t| pipeline.run(t.mode, t.shots, t.seed))
            .collect::<qsf::Result<Vec<_>>>()
    })??;

    let mut csv = String::from(
        "shots,repeat,estimate,exact_truncated,exact_full,abs_error,copies_consumed,mode\n",
    );
    for (task, &(estimate, copies)) in tasks.iter().zip(results.iter()) {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            task.shots,
            task.repeat,
            sig(estimate),
            sig(exact_truncated),
            sig(exact_full),
            sig((estimate - exact_truncated).abs()),
            copies,
            mode_name(task.mode),
        ));
    }

    let mut summary = Summary::new("convergence");
    summary.push("application", &application);
    summary.push("degree", degree);
    summary.push("state", rho_label);
    if let Some(label) = sigma_label {
        summary.push("sigma", label);
    }
    summary.push("shots-schedule", &schedule_raw);
    summary.push("repeats", repeats);
    summary.push("seed", seed);
    summary.push_sig("exact-truncated", exact_truncated);
    summary.push_sig("exact-full", exact_full);
    summary.push_sig("truncation-gap", (exact_truncated - exact_full).abs());
    summary.push("rows", tasks.len());
    emit_csv(csv, summary, out_flag(args.out, cfg)?)
}

fn out_flag(flag: Option<PathBuf>, cfg: &FileConfig) -> CliResult<Option<PathBuf>> {
    Ok(match flag {
        Some(p) => Some(p),
        None => cfg.get::<String>("out")?.map(PathBuf::from),
    })
}

/// Everything per polynomial size that the baseline grid reuses across
/// budgets and repeats.
struct SizeCase {
    n: usize,
    spec: PolySpec,
    dist: JointDistribution,
    exact: f64,
    /// Mean fresh copies per shot under branch sampling.
    expected: f64,
    /// Total copies one shot of every term costs the swap baseline.
    term_weight: u64,
}

const METHODS: [&str; 3] = ["qsf-pessimistic", "qsf-reuse", "swap"];

fn baseline_cell(
    method: &str,
    case: &SizeCase,
    rho: &DensityMatrix,
    budget: u64,
    seed: u64,
) -> qsf::Result<(f64, u64, u64)> {
    match method {
        "qsf-pessimistic" => {
            let shots = (budget / case.spec.max_power() as u64).max(1);
            let tally = sample_tally(&case.dist, shots, seed)?;
            let report = estimate_from_tally(&tally, &case.spec, CopyAccounting::Pessimistic)?;
            let err = report.estimate - case.exact;
            Ok((err * err, report.copies.fresh_copies_total, shots))
        }
        "qsf-reuse" => {
            let shots = ((budget as f64 / case.expected).floor() as u64).max(1);
            let tally = sample_tally(&case.dist, shots, seed)?;
            let report = estimate_from_tally(&tally, &case.spec, CopyAccounting::Reuse)?;
            let err = report.estimate - case.exact;
            Ok((err * err, report.copies.fresh_copies_total, shots))
        }
        _ => {
            let per_term = (budget / case.term_weight).max(1);
            let report = baseline_generalized_swap(&case.spec, rho, per_term, seed)?;
            let err = report.estimate - case.exact;
            Ok((err * err, report.copies.fresh_copies_total, report.shots))
        }
    }
}

#[derive(Args, Debug)]
pub(crate) struct CompareBaselinesArgs {
    /// Comma-separated polynomial sizes (top powers).
    #[arg(long, value_name = "LIST")]
    degrees: Option<String>,
    /// Comma-separated total copy budgets.
    #[arg(long, value_name = "LIST")]
    budgets: Option<String>,
    /// Runs averaged into each MSE cell.
    #[arg(long)]
    repeats: Option<usize>,
    #[command(flatten)]
    state: StateFlags,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the sweep (0 = library default).
    #[arg(long)]
    workers: Option<usize>,
    /// CSV destination; without it the CSV itself is the output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

pub(crate) fn compare_baselines(
    args: CompareBaselinesArgs,
    cfg: &FileConfig,
) -> CliResult<String> {
    let mut keys = vec!["degrees", "budgets", "repeats", "seed", "workers", "out"];
    keys.extend(STATE_KEYS);
    cfg.check_keys(&keys)?;

    let degrees_raw = pick(args.degrees, cfg.get("degrees")?, "2,4,8".into());
    let degrees: Vec<usize> = parse_list(&degrees_raw, "--degrees")?;
    let budgets_raw = pick(args.budgets, cfg.get("budgets")?, "1000,10000,100000".into());
    let budgets: Vec<u64> = parse_list(&budgets_raw, "--budgets")?;
    let repeats = pick(args.repeats, cfg.get("repeats")?, 10);
    let seed = pick(args.seed, cfg.get("seed")?, 0);
    let workers = pick(args.workers, cfg.get("workers")?, 0);
    if repeats == 0 {
        return Err(CliError::Config("--repeats must be positive".into()));
    }

    let (rho, rho_label) = args.state.resolve(cfg)?;
    let cases = degrees
        .iter()
        .map(|&n| {
            let spec = match n {
                0 => {
                    return Err(CliError::Config(
                        "--degrees entries must be positive".into(),
                    ))
                }
                1 => PolySpec::new(Mode::Standard, 0.0, [(1usize, 1.0)])?,
                _ => application_spec("entropy", n)?,
            };
            let dist = joint_distribution(&spec, &rho)?;
            let exact = poly_function_exact(&spec, &rho)?;
            let expected = spec
                .branch_distribution()
                .iter()
                .enumerate()
                .map(|(idx, p)| (idx + 1) as f64 * p)
                .sum();
            let term_weight = spec
                .powers()
                .filter(|&(_, a)| a != 0.0)
                .map(|(j, _)| j as u64)
                .sum();
            Ok(SizeCase {
                n,
                spec,
                dist,
                exact,
                expected,
                term_weight,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;

    struct Cell<'a> {
        method: &'static str,
        case: &'a SizeCase,
        budget: u64,
        seeds: Vec<u64>,
    }
    let mut cells = Vec::with_capacity(METHODS.len() * cases.len() * budgets.len());
    for method in METHODS {
        for case in &cases {
            for &budget in &budgets {
                cells.push(Cell {
                    method,
                    case,
                    budget,
                    seeds: Vec::new(),
                });
            }
        }
    }
    let all_seeds = seeds_for(seed, cells.len() * repeats);
    for (idx, cell) in cells.iter_mut().enumerate() {
        cell.seeds = all_seeds[idx * repeats..(idx + 1) * repeats].to_vec();
    }

    let rows = with_pool(workers, || {
        cells
            .par_iter()
            .map(|cell| {
                let mut mse = 0.0;
                let mut copies = 0.0;
                let mut shots = 0;
                for &s in &cell.seeds {
                    let (sq_err, fresh, used) =
                        baseline_cell(cell.method, cell.case, &rho, cell.budget, s)?;
                    mse += sq_err;
                    copies += fresh as f64;
                    shots = used;
                }
                let k = cell.seeds.len() as f64;
                Ok(format!(
                    "{},{},{},{},{},{}\n",
                    cell.method,
                    cell.case.n,
                    cell.budget,
                    shots,
                    sig(mse / k),
                    sig(copies / k),
                ))
            })
            .collect::<qsf::Result<Vec<String>>>()
    })??;

    let mut csv = String::from("method,n,budget,shots,mse,copies_mean\n");
    for row in rows {
        csv.push_str(&row);
    }

    let mut summary = Summary::new("compare-baselines");
    summary.push("state", rho_label);
    summary.push("degrees", &degrees_raw);
    summary.push("budgets", &budgets_raw);
    summary.push("repeats", repeats);
    summary.push("seed", seed);
    for case in &cases {
        summary.push_sig(&format!("exact-{}", case.n), case.exact);
    }
    summary.push("rows", cells.len());
    emit_csv(csv, summary, out_flag(args.out, cfg)?)
}
