//! Single-run commands: one estimate, search, or training run, reported
//! as a key-value summary.

use std::path::PathBuf;

use clap::Args;
use num_complex::Complex64;
use qsf::applications::{
    estimate_entropy, estimate_fidelity, estimate_fidelity_with, estimate_poly_function,
    max_eigenvalue, FidelityProblem, ProbePlan,
};
use qsf::circuit::{joint_distribution, simulate_full};
use qsf::coefficients::{
    entropy_taylor_spec, entropy_truncation_order, sqrt_degree_for, sqrt_taylor_spec, Mode,
    PolySpec,
};
use qsf::sampler::{
    dump_shots, estimate_with_accounting, sample_shots, CopyAccounting, EstimateReport,
};
use qsf::stateprep::{
    exact_prep, hadamard_prep, pqc_prep, target_amplitudes, train_pqc, TRAIN_TARGET,
};
use qsf::states::{min_nonzero_eigenvalue, poly_function_exact};

use crate::config::{pick, FileConfig};
use crate::source::{application_spec, load_spec, SigmaFlags, StateFlags, SIGMA_KEYS, STATE_KEYS};
use crate::{emit, sig, write_text, CliError, CliResult, Summary};

fn push_spec(s: &mut Summary, spec: &PolySpec) {
    s.push("mode", spec.mode().as_str());
    s.push("branches", spec.degree());
    s.push("max-power", spec.max_power());
    s.push_sig("gamma", spec.gamma());
    s.push_sig("scale", spec.estimator_scale());
}

fn push_report(s: &mut Summary, report: &EstimateReport) {
    s.push("shots", report.shots);
    s.push_sig("estimate", report.estimate);
    s.push_sig("std-error", report.std_error);
    if let Some(exact) = report.exact_value {
        s.push_sig("exact", exact);
        s.push_sig("abs-error", (report.estimate - exact).abs());
    }
    s.push("fresh-copies", report.copies.fresh_copies_total);
    s.push("reclaimed-copies", report.copies.reclaimed_total);
    s.push_sig("expected-copies-per-shot", report.copies.expected_per_shot);
    if report.shots > 0 {
        s.push_sig(
            "mean-copies-per-shot",
            report.copies.fresh_copies_total as f64 / report.shots as f64,
        );
    }
}

fn out_path(flag: Option<PathBuf>, cfg: &FileConfig) -> CliResult<Option<PathBuf>> {
    Ok(match flag {
        Some(p) => Some(p),
        None => cfg.get::<String>("out")?.map(PathBuf::from),
    })
}

#[derive(Args, Debug)]
pub(crate) struct EstimatePolyArgs {
    /// Polynomial spec file: a mode line, a constant line, then
    /// `power coefficient` lines.
    #[arg(long, visible_alias = "spec", value_name = "PATH")]
    spec_file: Option<PathBuf>,
    /// Override the spec file's estimator mode.
    #[arg(long, value_name = "standard|variant")]
    mode: Option<String>,
    #[command(flatten)]
    state: StateFlags,
    /// Measurement shots.
    #[arg(long)]
    shots: Option<u64>,
    /// Sampling seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Write every shot as a `j x` line (materializes the whole record
    /// stream; plain estimates stream in constant memory instead).
    #[arg(long, value_name = "PATH")]
    dump_shots: Option<PathBuf>,
    /// Mirror the summary to a file.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

pub(crate) fn estimate_poly(args: EstimatePolyArgs, cfg: &FileConfig) -> CliResult<String> {
    let mut keys = vec!["spec-file", "mode", "shots", "seed", "dump-shots", "out"];
    keys.extend(STATE_KEYS);
    cfg.check_keys(&keys)?;

    let spec_path = match args.spec_file {
        Some(p) => p,
        None => cfg
            .get::<String>("spec-file")?
            .map(PathBuf::from)
            .ok_or_else(|| CliError::Config("estimate-poly needs --spec-file".into()))?,
    };
    let mut spec = load_spec(&spec_path)?;
    if let Some(mode) = args.mode.or(cfg.get("mode")?) {
        spec = spec.with_mode(Mode::parse(&mode)?)?;
    }
    let (rho, state_label) = args.state.resolve(cfg)?;
    let shots = pick(args.shots, cfg.get("shots")?, 100_000);
    let seed = pick(args.seed, cfg.get("seed")?, 0);
    let dump = match args.dump_shots {
        Some(p) => Some(p),
        None => cfg.get::<String>("dump-shots")?.map(PathBuf::from),
    };

    let report = match dump {
        Some(dump_path) => {
            let dist = joint_distribution(&spec, &rho)?;
            let records = sample_shots(&dist, shots, seed)?;
            write_text(&dump_path, &dump_shots(&records))?;
            let mut report = estimate_with_accounting(&records, &spec, CopyAccounting::Reuse)?;
            report.exact_value = Some(poly_function_exact(&spec, &rho)?);
            report
        }
        None => estimate_poly_function(&spec, &rho, shots, seed)?,
    };

    let mut s = Summary::new("estimate-poly");
    s.push("spec-file", spec_path.display());
    s.push("state", state_label);
    s.push("seed", seed);
    push_spec(&mut s, &spec);
    push_report(&mut s, &report);
    emit(s, out_path(args.out, cfg)?.as_deref())
}

#[derive(Args, Debug)]
pub(crate) struct EntropyArgs {
    /// Total error budget, split evenly between series truncation and
    /// sampling.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Allowed probability of missing the epsilon window.
    #[arg(long)]
    delta: Option<f64>,
    #[command(flatten)]
    state: StateFlags,
    #[arg(long)]
    seed: Option<u64>,
    /// Mirror the summary to a file.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

pub(crate) fn entropy(args: EntropyArgs, cfg: &FileConfig) -> CliResult<String> {
    let mut keys = vec!["epsilon", "delta", "seed", "out"];
    keys.extend(STATE_KEYS);
    cfg.check_keys(&keys)?;

    let (rho, state_label) = args.state.resolve(cfg)?;
    let epsilon = pick(args.epsilon, cfg.get("epsilon")?, 0.1);
    let delta = pick(args.delta, cfg.get("delta")?, 0.05);
    let seed = pick(args.seed, cfg.get("seed")?, 0);

    let report = estimate_entropy(&rho, epsilon, delta, seed)?;
    let exact = report
        .exact_value
        .expect("entropy reports carry the oracle");
    let kappa = min_nonzero_eigenvalue(&rho);
    let order = entropy_truncation_order(epsilon, kappa)?;
    let spec = entropy_taylor_spec(order)?;
    let truncated = poly_function_exact(&spec, &rho)?;

    let mut s = Summary::new("entropy");
    s.push("state", state_label);
    s.push_sig("epsilon", epsilon);
    s.push_sig("delta", delta);
    s.push("seed", seed);
    s.push_sig("kappa", kappa);
    s.push("series-order", order);
    push_spec(&mut s, &spec);
    s.push_sig("entropy-truncated", truncated);
    s.push_sig("truncation-gap", (truncated - exact).abs());
    push_report(&mut s, &report);
    emit(s, out_path(args.out, cfg)?.as_deref())
}

#[derive(Args, Debug)]
pub(crate) struct FidelityArgs {
    /// Total error budget for the planned run.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Allowed failure probability for the planned run.
    #[arg(long)]
    delta: Option<f64>,
    /// Fixed square-root series degree, bypassing the planner.
    #[arg(long)]
    degree: Option<usize>,
    /// Fixed shot count, bypassing the planner.
    #[arg(long)]
    shots: Option<u64>,
    /// Estimator mode for the fixed-degree path.
    #[arg(long, value_name = "standard|variant")]
    mode: Option<String>,
    #[command(flatten)]
    state: StateFlags,
    #[command(flatten)]
    sigma: SigmaFlags,
    #[arg(long)]
    seed: Option<u64>,
    /// Mirror the summary to a file.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

pub(crate) fn fidelity(args: FidelityArgs, cfg: &FileConfig) -> CliResult<String> {
    let mut keys = vec![
        "epsilon", "delta", "degree", "shots", "mode", "seed", "out",
    ];
    keys.extend(STATE_KEYS);
    keys.extend(SIGMA_KEYS);
    cfg.check_keys(&keys)?;

    let (rho, rho_label) = args.state.resolve(cfg)?;
    let (sigma, sigma_label) = args.sigma.resolve(cfg, rho.dim())?;
    let seed = pick(args.seed, cfg.get("seed")?, 0);
    let degree = args.degree.or(cfg.get("degree")?);
    let shots = args.shots.or(cfg.get("shots")?);
    let mode = args.mode.or(cfg.get("mode")?);
    let fixed = degree.is_some() || shots.is_some() || mode.is_some();
    if fixed && (args.epsilon.is_some() || args.delta.is_some()) {
        return Err(CliError::Config(
            "pass either --epsilon/--delta (planned) or --degree/--shots/--mode (fixed), not both"
                .into(),
        ));
    }

    let problem = FidelityProblem::new(&rho, &sigma)?;
    let (report, spec) = if fixed {
        let degree = degree.unwrap_or(6);
        let shots = shots.unwrap_or(100_000);
        let mut spec = application_spec("fidelity", degree)?;
        if let Some(m) = mode {
            spec = spec.with_mode(Mode::parse(&m)?)?;
        }
        let report = estimate_fidelity_with(&problem, &spec, shots, seed)?;
        (report, spec)
    } else {
        let epsilon = pick(args.epsilon, cfg.get("epsilon")?, 0.1);
        let delta = pick(args.delta, cfg.get("delta")?, 0.05);
        let report = estimate_fidelity(&rho, &sigma, epsilon, delta, seed)?;
        // Rebuild the spec the planner chose so its parameters can be
        // reported; the rule is deterministic in (epsilon, kappa).
        let spec = sqrt_taylor_spec(sqrt_degree_for(epsilon, problem.kappa())?)?;
        (report, spec)
    };

    let mut s = Summary::new("fidelity");
    s.push("state", rho_label);
    s.push("sigma", sigma_label);
    s.push("seed", seed);
    s.push("rank", report.rank);
    s.push_sig("kappa", problem.kappa());
    push_spec(&mut s, &spec);
    s.push("shots", report.sqrt_level.shots);
    s.push_sig("sqrt-estimate", report.sqrt_level.estimate);
    s.push_sig("sqrt-std-error", report.sqrt_level.std_error);
    if let Some(exact_sqrt) = report.sqrt_level.exact_value {
        s.push_sig("sqrt-exact", exact_sqrt);
    }
    s.push_sig("fidelity", report.fidelity);
    s.push_sig("fidelity-raw", report.raw);
    s.push_sig("fidelity-polynomial", report.exact_polynomial);
    s.push_sig("fidelity-exact", report.exact);
    s.push_sig("abs-error", (report.raw - report.exact_polynomial).abs());
    s.push("fresh-copies", report.sqrt_level.copies.fresh_copies_total);
    s.push("reclaimed-copies", report.sqrt_level.copies.reclaimed_total);
    s.push_sig(
        "expected-copies-per-shot",
        report.sqrt_level.copies.expected_per_shot,
    );
    emit(s, out_path(args.out, cfg)?.as_deref())
}

#[derive(Args, Debug)]
pub(crate) struct MaxeigArgs {
    /// Step-polynomial degree for the indicator fits.
    #[arg(long)]
    degree: Option<usize>,
    /// Stopping band half-width: the search stops when a probe lands in
    /// [tol, 1-tol].
    #[arg(long)]
    tol: Option<f64>,
    /// Bracket width that ends the search when no probe hits the band.
    #[arg(long)]
    width_cutoff: Option<f64>,
    /// `exact` evaluates probes on trace powers; `sampled` draws shots.
    #[arg(long, value_name = "exact|sampled")]
    probes: Option<String>,
    /// Shots per probe under `--probes sampled`.
    #[arg(long)]
    shots: Option<u64>,
    #[command(flatten)]
    state: StateFlags,
    #[arg(long)]
    seed: Option<u64>,
    /// Mirror the summary to a file.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

pub(crate) fn maxeig(args: MaxeigArgs, cfg: &FileConfig) -> CliResult<String> {
    let mut keys = vec![
        "degree",
        "tol",
        "width-cutoff",
        "probes",
        "shots",
        "seed",
        "out",
    ];
    keys.extend(STATE_KEYS);
    cfg.check_keys(&keys)?;

    let (rho, state_label) = args.state.resolve(cfg)?;
    let degree = pick(args.degree, cfg.get("degree")?, 16);
    let tol = pick(args.tol, cfg.get("tol")?, 0.49);
    let width_cutoff = pick(args.width_cutoff, cfg.get("width-cutoff")?, 0.04);
    let probes = pick(args.probes, cfg.get("probes")?, "sampled".to_string());
    let shots = pick(args.shots, cfg.get("shots")?, 100_000);
    let seed = pick(args.seed, cfg.get("seed")?, 0);

    let plan = match probes.as_str() {
        "exact" => ProbePlan::Exact,
        "sampled" => ProbePlan::Sampled { shots },
        other => {
            return Err(CliError::Config(format!(
                "unknown probe plan {other:?}: expected `exact` or `sampled`"
            )))
        }
    };
    let report = max_eigenvalue(&rho, tol, degree, plan, width_cutoff, seed)?;

    let mut s = Summary::new("maxeig");
    s.push("state", state_label);
    s.push("degree", degree);
    s.push_sig("tol", tol);
    s.push_sig("width-cutoff", width_cutoff);
    s.push("probes", &probes);
    if probes == "sampled" {
        s.push("shots-per-probe", shots);
    }
    s.push("seed", seed);
    s.push_sig("beta", report.beta);
    s.push("degenerate", report.degenerate);
    s.push("probe-count", report.steps.len());
    s.push("shots-used", report.shots_used);
    s.push("history", "step,beta,o_beta,action");
    for (step, probe) in report.steps.iter().enumerate() {
        let action = if probe.o_beta >= tol && probe.o_beta <= 1.0 - tol {
            "stop"
        } else if probe.o_beta < tol {
            "tighten-right"
        } else {
            "tighten-left"
        };
        s.line(&format!(
            "{step},{},{},{action}",
            sig(probe.beta),
            sig(probe.o_beta)
        ));
    }
    emit(s, out_path(args.out, cfg)?.as_deref())
}

#[derive(Args, Debug)]
pub(crate) struct TrainPrepArgs {
    /// Spec file whose branch amplitudes are the training target.
    #[arg(long, visible_alias = "spec", value_name = "PATH")]
    spec_file: Option<PathBuf>,
    /// Built-in spec family when no file is given: `entropy` or
    /// `fidelity`.
    #[arg(long, value_name = "APP")]
    application: Option<String>,
    /// Top power (entropy) or series degree (fidelity).
    #[arg(long)]
    degree: Option<usize>,
    /// Preparation to build: `pqc` (trained), `exact`, or `hadamard`.
    #[arg(long, value_name = "KIND")]
    prep: Option<String>,
    /// Ansatz depth for `--prep pqc`.
    #[arg(long)]
    layers: Option<usize>,
    #[command(flatten)]
    state: StateFlags,
    /// Training seed (restarts draw from it).
    #[arg(long)]
    seed: Option<u64>,
    /// Mirror the summary to a file.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

pub(crate) fn train_prep(args: TrainPrepArgs, cfg: &FileConfig) -> CliResult<String> {
    let mut keys = vec![
        "spec-file",
        "application",
        "degree",
        "prep",
        "layers",
        "seed",
        "out",
    ];
    keys.extend(STATE_KEYS);
    cfg.check_keys(&keys)?;

    let spec_path = match args.spec_file {
        Some(p) => Some(p),
        None => cfg.get::<String>("spec-file")?.map(PathBuf::from),
    };
    let application = args.application.or(cfg.get("application")?);
    if spec_path.is_some() && application.is_some() {
        return Err(CliError::Config(
            "pass --spec-file or --application, not both".into(),
        ));
    }
    let (spec, spec_label) = match spec_path {
        Some(path) => {
            let spec = load_spec(&path)?;
            (spec, format!("file {}", path.display()))
        }
        None => {
            let app = application.unwrap_or_else(|| "entropy".to_string());
            let degree = pick(args.degree, cfg.get("degree")?, 6);
            (
                application_spec(&app, degree)?,
                format!("{app} degree={degree}"),
            )
        }
    };

    let target = target_amplitudes(&spec);
    let qubits = target.len().trailing_zeros() as usize;
    let prep_kind = pick(args.prep, cfg.get("prep")?, "pqc".to_string());
    let layers = pick(args.layers, cfg.get("layers")?, 4);
    let seed = pick(args.seed, cfg.get("seed")?, 0);

    let (prep, trained) = match prep_kind.as_str() {
        "exact" => (exact_prep(&target)?, None),
        "hadamard" => (hadamard_prep(qubits)?, None),
        "pqc" => {
            let (params, infidelity) = train_pqc(&target, layers, seed)?;
            (pqc_prep(&params, &target)?, Some(infidelity))
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown prep kind {other:?}: expected `exact`, `pqc`, or `hadamard`"
            )))
        }
    };

    let amps = prep.amplitudes();
    let overlap: Complex64 = target
        .iter()
        .zip(&amps)
        .map(|(t, a)| a * t)
        .sum();
    let target_infidelity = (1.0 - overlap.norm_sqr()).max(0.0);

    let (rho, state_label) = args.state.resolve(cfg)?;
    let reference = exact_prep(&target)?;
    let x_exact = simulate_full(&spec, &rho, &reference)?.expectation_x();
    let x_prep = simulate_full(&spec, &rho, &prep)?.expectation_x();

    let mut s = Summary::new("train-prep");
    s.push("spec", spec_label);
    push_spec(&mut s, &spec);
    s.push("qubits", qubits);
    s.push("prep", &prep_kind);
    if prep_kind == "pqc" {
        s.push("layers", layers);
        s.push("seed", seed);
        s.push_sig("train-target", TRAIN_TARGET);
    }
    if let Some(infidelity) = trained {
        s.push_sig("trained-infidelity", infidelity);
    }
    s.push_sig("target-infidelity", target_infidelity);
    s.push("state", state_label);
    s.push_sig("x-exact", x_exact);
    s.push_sig("x-prep", x_prep);
    s.push_sig("x-shift", (x_prep - x_exact).abs());
    emit(s, out_path(args.out, cfg)?.as_deref())
}
