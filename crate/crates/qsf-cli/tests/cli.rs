//! End-to-end runs through the library entry point: output schemas,
//! flag/config resolution, and bit-reproducibility across worker counts.

use std::fs;
use std::path::PathBuf;

use qsf::applications::FidelityProblem;
use qsf::coefficients::{sqrt_taylor_spec, Mode, PolySpec};
use qsf::states::{save_state_text, DensityMatrix};
use qsf_cli::run;

fn run_ok(args: &[&str]) -> String {
    match run(args.iter().copied()) {
        Ok(text) => text,
        Err(e) => panic!("{args:?} failed: {e}"),
    }
}

fn run_err(args: &[&str]) -> String {
    match run(args.iter().copied()) {
        Ok(text) => panic!("{args:?} unexpectedly succeeded:\n{text}"),
        Err(e) => e.to_string(),
    }
}

/// The value of a `key value` summary line.
fn grab<'a>(summary: &'a str, key: &str) -> &'a str {
    summary
        .lines()
        .find_map(|l| l.strip_prefix(key).and_then(|rest| rest.strip_prefix(' ')))
        .unwrap_or_else(|| panic!("no `{key}` line in:\n{summary}"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("qsf-cli-tests").join(name);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn sig(x: f64) -> String {
    format!("{x:.11e}")
}

#[test]
fn degree_one_spec_estimates_exactly_one() {
    let dir = scratch("degree-one");
    let spec = dir.join("trace.spec");
    fs::write(&spec, "standard\n0\n1 1\n").unwrap();
    let out = run_ok(&[
        "qsf",
        "estimate-poly",
        "--spec-file",
        spec.to_str().unwrap(),
        "--state",
        "mixed",
        "--d",
        "3",
        "--shots",
        "50",
        "--seed",
        "9",
    ]);
    assert_eq!(grab(&out, "estimate"), sig(1.0));
    assert_eq!(grab(&out, "std-error"), sig(0.0));
    assert_eq!(grab(&out, "exact"), sig(1.0));
}

#[test]
fn estimate_poly_matches_the_library_path() {
    let dir = scratch("purity");
    let spec_path = dir.join("purity.spec");
    fs::write(&spec_path, "standard\n0\n2 1\n").unwrap();
    let out = run_ok(&[
        "qsf",
        "estimate-poly",
        "--spec",
        spec_path.to_str().unwrap(),
        "--state",
        "random",
        "--d",
        "2",
        "--shots",
        "20000",
        "--seed",
        "7",
    ]);

    let spec = PolySpec::from_text("standard\n0\n2 1\n").unwrap();
    let rho = qsf::states::random_state(2, 2, 1).unwrap();
    let report = qsf::applications::estimate_poly_function(&spec, &rho, 20_000, 7).unwrap();
    assert_eq!(grab(&out, "estimate"), sig(report.estimate));
    assert_eq!(grab(&out, "std-error"), sig(report.std_error));
    assert_eq!(grab(&out, "exact"), sig(report.exact_value.unwrap()));
    assert_eq!(
        grab(&out, "fresh-copies"),
        report.copies.fresh_copies_total.to_string()
    );
}

#[test]
fn mode_flag_overrides_the_spec_file() {
    let dir = scratch("mode-override");
    let spec_path = dir.join("purity.spec");
    fs::write(&spec_path, "standard\n0\n2 1\n").unwrap();
    let out = run_ok(&[
        "qsf",
        "estimate-poly",
        "--spec-file",
        spec_path.to_str().unwrap(),
        "--mode",
        "variant",
        "--shots",
        "100",
        "--seed",
        "3",
    ]);
    let variant = PolySpec::from_text("standard\n0\n2 1\n")
        .unwrap()
        .with_mode(Mode::Variant)
        .unwrap();
    assert_eq!(grab(&out, "mode"), "variant");
    assert_eq!(grab(&out, "scale"), sig(variant.estimator_scale()));
}

#[test]
fn dump_shots_writes_one_line_per_shot() {
    let dir = scratch("dump");
    let spec_path = dir.join("purity.spec");
    fs::write(&spec_path, "standard\n0\n2 1\n").unwrap();
    let dump_path = dir.join("shots.txt");
    let out = run_ok(&[
        "qsf",
        "estimate-poly",
        "--spec-file",
        spec_path.to_str().unwrap(),
        "--shots",
        "40",
        "--seed",
        "11",
        "--dump-shots",
        dump_path.to_str().unwrap(),
    ]);

    let dump = fs::read_to_string(&dump_path).unwrap();
    let lines: Vec<&str> = dump.lines().collect();
    assert_eq!(lines.len(), 40);
    for line in &lines {
        let mut parts = line.split_whitespace();
        let j: usize = parts.next().unwrap().parse().unwrap();
        let x: i8 = parts.next().unwrap().parse().unwrap();
        assert!((1..=2).contains(&j));
        assert!(x == 1 || x == -1);
        assert!(parts.next().is_none());
    }

    // The tally path without the dump gives the same estimate: both draw
    // the same per-chunk streams.
    let plain = run_ok(&[
        "qsf",
        "estimate-poly",
        "--spec-file",
        spec_path.to_str().unwrap(),
        "--shots",
        "40",
        "--seed",
        "11",
    ]);
    assert_eq!(grab(&out, "estimate"), grab(&plain, "estimate"));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = scratch("config");
    let spec_path = dir.join("purity.spec");
    fs::write(&spec_path, "standard\n0\n2 1\n").unwrap();
    let config_path = dir.join("run.cfg");
    fs::write(
        &config_path,
        format!(
            "spec-file {}\nshots 64\nseed 3\nstate mixed\n",
            spec_path.display()
        ),
    )
    .unwrap();

    let from_file = run_ok(&[
        "qsf",
        "estimate-poly",
        "--config",
        config_path.to_str().unwrap(),
    ]);
    assert_eq!(grab(&from_file, "shots"), "64");
    assert_eq!(grab(&from_file, "state"), "mixed d=2");

    let overridden = run_ok(&[
        "qsf",
        "estimate-poly",
        "--config",
        config_path.to_str().unwrap(),
        "--shots",
        "32",
    ]);
    assert_eq!(grab(&overridden, "shots"), "32");
}

#[test]
fn unknown_config_keys_fail_loudly() {
    let dir = scratch("bad-config");
    let config_path = dir.join("run.cfg");
    fs::write(&config_path, "shotz 10\n").unwrap();
    let err = run_err(&[
        "qsf",
        "entropy",
        "--config",
        config_path.to_str().unwrap(),
    ]);
    assert!(err.contains("shotz"), "unhelpful message: {err}");
}

#[test]
fn entropy_summary_carries_the_plan_and_lands_in_budget() {
    let out = run_ok(&[
        "qsf", "entropy", "--state", "mixed", "--epsilon", "0.2", "--delta", "0.2", "--seed", "4",
    ]);
    assert_eq!(grab(&out, "series-order"), "5");
    assert_eq!(grab(&out, "kappa"), sig(0.5));
    let estimate: f64 = grab(&out, "estimate").parse().unwrap();
    let exact: f64 = grab(&out, "exact").parse().unwrap();
    assert!((exact - std::f64::consts::LN_2).abs() < 1e-12);
    assert!((estimate - exact).abs() <= 0.2);
    let truncated: f64 = grab(&out, "entropy-truncated").parse().unwrap();
    assert!((truncated - exact).abs() <= 0.1);
}

#[test]
fn fixed_degree_fidelity_reports_the_polynomial_oracle() {
    let dir = scratch("fidelity");
    let rho = DensityMatrix::from_probabilities(&[0.8, 0.2]).unwrap();
    let sigma = DensityMatrix::from_probabilities(&[0.6, 0.4]).unwrap();
    let rho_path = dir.join("rho.txt");
    let sigma_path = dir.join("sigma.txt");
    fs::write(&rho_path, save_state_text(&rho)).unwrap();
    fs::write(&sigma_path, save_state_text(&sigma)).unwrap();

    let out = run_ok(&[
        "qsf",
        "fidelity",
        "--state-file",
        rho_path.to_str().unwrap(),
        "--sigma-file",
        sigma_path.to_str().unwrap(),
        "--degree",
        "4",
        "--shots",
        "20000",
        "--seed",
        "2",
    ]);

    let problem = FidelityProblem::new(&rho, &sigma).unwrap();
    let spec = sqrt_taylor_spec(4).unwrap();
    let sqrt_exact = problem.sqrt_polynomial_exact(&spec).unwrap();
    assert_eq!(grab(&out, "rank"), "2");
    assert_eq!(grab(&out, "fidelity-polynomial"), sig(sqrt_exact * sqrt_exact));
    assert_eq!(grab(&out, "sqrt-exact"), sig(sqrt_exact));
    let clamped: f64 = grab(&out, "fidelity").parse().unwrap();
    assert!((0.0..=1.0).contains(&clamped));
}

#[test]
fn mixing_planned_and_fixed_fidelity_flags_is_rejected() {
    let err = run_err(&[
        "qsf", "fidelity", "--epsilon", "0.1", "--degree", "4",
    ]);
    assert!(err.contains("not both"), "unhelpful message: {err}");
}

#[test]
fn maxeig_exact_probes_find_a_separated_eigenvalue() {
    let dir = scratch("maxeig");
    let rho = DensityMatrix::from_probabilities(&[0.7, 0.3]).unwrap();
    let path = dir.join("rho.txt");
    fs::write(&path, save_state_text(&rho)).unwrap();

    let out = run_ok(&[
        "qsf",
        "maxeig",
        "--state-file",
        path.to_str().unwrap(),
        "--probes",
        "exact",
    ]);
    let beta: f64 = grab(&out, "beta").parse().unwrap();
    assert!((beta - 0.7).abs() <= 0.02, "beta {beta}");
    assert_eq!(grab(&out, "shots-used"), "0");

    // One history line per probe, each with the documented four fields.
    let probe_count: usize = grab(&out, "probe-count").parse().unwrap();
    let history: Vec<&str> = out
        .lines()
        .skip_while(|l| !l.starts_with("history "))
        .skip(1)
        .collect();
    assert_eq!(history.len(), probe_count);
    for (idx, line) in history.iter().enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 4, "bad history line {line}");
        assert_eq!(fields[0].parse::<usize>().unwrap(), idx);
        let o: f64 = fields[2].parse().unwrap();
        assert!((0.0..=1.0 + 1e-9).contains(&o));
        assert!(matches!(
            fields[3],
            "stop" | "tighten-left" | "tighten-right"
        ));
    }
}

#[test]
fn maxeig_sampled_probes_with_default_flags() {
    let dir = scratch("maxeig-sampled");
    let rho = DensityMatrix::from_probabilities(&[0.7, 0.3]).unwrap();
    let path = dir.join("rho.txt");
    fs::write(&path, save_state_text(&rho)).unwrap();

    let out = run_ok(&[
        "qsf",
        "maxeig",
        "--state-file",
        path.to_str().unwrap(),
        "--seed",
        "1",
    ]);
    let beta: f64 = grab(&out, "beta").parse().unwrap();
    assert!((beta - 0.7).abs() <= 0.02, "beta {beta}");
    let probes: u64 = grab(&out, "probe-count").parse().unwrap();
    let shots_used: u64 = grab(&out, "shots-used").parse().unwrap();
    assert_eq!(shots_used, probes * 100_000);
}

#[test]
fn convergence_csv_covers_the_grid_and_ignores_worker_count() {
    let args = |workers: &'static str| {
        vec![
            "qsf",
            "convergence",
            "--application",
            "entropy",
            "--degree",
            "6",
            "--shots-schedule",
            "100,1000",
            "--repeats",
            "3",
            "--seed",
            "5",
            "--workers",
            workers,
        ]
    };
    let csv_one = run_ok(&args("1"));
    let csv_many = run_ok(&args("4"));
    assert_eq!(csv_one, csv_many, "worker count changed the CSV bytes");

    let lines: Vec<&str> = csv_one.lines().collect();
    assert_eq!(
        lines[0],
        "shots,repeat,estimate,exact_truncated,exact_full,abs_error,copies_consumed,mode"
    );
    assert_eq!(lines.len(), 1 + 2 * 3 * 2);
    for row in &lines[1..] {
        assert_eq!(row.split(',').count(), 8);
    }
    // Rows arrive sorted by (shots, repeat, mode), modes alternating.
    let modes: Vec<&str> = lines[1..]
        .iter()
        .map(|r| r.split(',').last().unwrap())
        .collect();
    assert!(modes.chunks(2).all(|c| c == ["standard", "variant"]));
}

#[test]
fn convergence_sweeps_fidelity_with_raw_estimates() {
    let csv = run_ok(&[
        "qsf",
        "convergence",
        "--application",
        "fidelity",
        "--degree",
        "4",
        "--shots-schedule",
        "500",
        "--repeats",
        "2",
        "--seed",
        "3",
        "--sigma",
        "mixed",
    ]);
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    for row in rows {
        let fields: Vec<&str> = row.split(',').collect();
        let estimate: f64 = fields[2].parse().unwrap();
        let exact_truncated: f64 = fields[3].parse().unwrap();
        let abs_error: f64 = fields[5].parse().unwrap();
        // The columns are rounded to 12 significant digits independently,
        // so the identity holds to roughly that precision.
        assert!((abs_error - (estimate - exact_truncated).abs()).abs() < 1e-10);
    }
}

#[test]
fn compare_baselines_rows_are_sorted_and_degree_one_is_exact() {
    let csv = run_ok(&[
        "qsf",
        "compare-baselines",
        "--degrees",
        "1,2",
        "--budgets",
        "500,1000",
        "--repeats",
        "2",
        "--seed",
        "1",
    ]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "method,n,budget,shots,mse,copies_mean");
    assert_eq!(lines.len(), 1 + 3 * 2 * 2);

    let keys: Vec<(String, u64, u64)> = lines[1..]
        .iter()
        .map(|row| {
            let f: Vec<&str> = row.split(',').collect();
            (f[0].to_string(), f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted, "rows not sorted by (method, n, budget)");

    for row in &lines[1..] {
        let f: Vec<&str> = row.split(',').collect();
        if f[1] == "1" {
            let mse: f64 = f[4].parse().unwrap();
            assert!(mse <= 1e-30, "degree-1 run not exact: {row}");
        }
    }
}

#[test]
fn compare_baselines_ignores_worker_count() {
    let args = |workers: &'static str| {
        vec![
            "qsf",
            "compare-baselines",
            "--degrees",
            "2,4",
            "--budgets",
            "2000",
            "--repeats",
            "2",
            "--seed",
            "8",
            "--workers",
            workers,
        ]
    };
    assert_eq!(run_ok(&args("1")), run_ok(&args("3")));
}

#[test]
fn out_flag_mirrors_csv_to_disk_and_prints_the_summary() {
    let dir = scratch("out");
    let csv_path = dir.join("conv.csv");
    let summary = run_ok(&[
        "qsf",
        "convergence",
        "--application",
        "entropy",
        "--degree",
        "4",
        "--shots-schedule",
        "200",
        "--repeats",
        "1",
        "--seed",
        "2",
        "--out",
        csv_path.to_str().unwrap(),
    ]);
    assert_eq!(grab(&summary, "command"), "convergence");
    assert_eq!(grab(&summary, "rows"), "2");
    let csv = fs::read_to_string(&csv_path).unwrap();
    assert!(csv.starts_with("shots,repeat,"));
    assert_eq!(csv.lines().count(), 3);

    // Without --out the same CSV goes to stdout.
    let direct = run_ok(&[
        "qsf",
        "convergence",
        "--application",
        "entropy",
        "--degree",
        "4",
        "--shots-schedule",
        "200",
        "--repeats",
        "1",
        "--seed",
        "2",
    ]);
    assert_eq!(direct, csv);
}

#[test]
fn train_prep_exact_preparation_shifts_nothing() {
    let out = run_ok(&[
        "qsf",
        "train-prep",
        "--application",
        "entropy",
        "--degree",
        "4",
        "--prep",
        "exact",
    ]);
    assert_eq!(grab(&out, "x-shift"), sig(0.0));
    assert_eq!(grab(&out, "target-infidelity"), sig(0.0));
    assert_eq!(grab(&out, "qubits"), "2");
}

#[test]
fn train_prep_trains_a_small_target() {
    let out = run_ok(&[
        "qsf",
        "train-prep",
        "--application",
        "entropy",
        "--degree",
        "2",
        "--prep",
        "pqc",
        "--layers",
        "2",
        "--seed",
        "0",
    ]);
    let infidelity: f64 = grab(&out, "trained-infidelity").parse().unwrap();
    assert!(infidelity <= 1e-3, "training missed: {infidelity}");
    let shift: f64 = grab(&out, "x-shift").parse().unwrap();
    assert!(shift <= 0.05, "shift {shift}");
}

#[test]
fn missing_inputs_produce_named_errors() {
    let err = run_err(&["qsf", "estimate-poly"]);
    assert!(err.contains("--spec-file"), "unhelpful message: {err}");

    let err = run_err(&["qsf", "entropy", "--state", "thermal"]);
    assert!(err.contains("thermal"), "unhelpful message: {err}");

    let err = run_err(&["qsf", "entropy", "--state-file", "/nonexistent/rho.txt"]);
    assert!(err.contains("/nonexistent/rho.txt"), "unhelpful message: {err}");
}
