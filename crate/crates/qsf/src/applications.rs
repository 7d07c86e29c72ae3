//! End-to-end estimators: von Neumann entropy, state fidelity, and a
//! binary search for the largest eigenvalue.
//!
//! All three pipelines share one shape. A polynomial spec is chosen for
//! the target function, the state's trace powers become an analytic joint
//! outcome table, shots stream through the tally sampler, and the result
//! comes back as an [`EstimateReport`] with uncertainty, copy cost, and a
//! matching exact oracle value. Nothing here touches the dense simulator,
//! so there is no register-capacity ceiling: a truncation order of forty
//! works as well as one of four.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::circuit::{joint_distribution, joint_distribution_from_powers};
use crate::coefficients::{
    entropy_taylor_spec, entropy_truncation_order, shots_for, sqrt_degree_for, sqrt_taylor_spec,
    step_probe_fit, PolySpec, ProbeFitConfig, StepFit,
};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, matrix_sqrt_psd};
use crate::sampler::{estimate_from_tally, sample_tally, CopyAccounting, EstimateReport};
use crate::states::{
    fidelity_exact, min_nonzero_eigenvalue, poly_function_exact, von_neumann_entropy,
    DensityMatrix, RANK_CUTOFF,
};

fn check_probability(name: &str, value: f64) -> Result<()> {
    if !(value > 0.0 && value < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "{name} must be in (0, 1), got {value}"
        )));
    }
    Ok(())
}

/// Samples the estimator for an arbitrary spec against a state and
/// attaches the exact polynomial value as the reference. The generic
/// workhorse behind the entropy pipeline and the CLI.
pub fn estimate_poly_function(
    spec: &PolySpec,
    rho: &DensityMatrix,
    shots: u64,
    seed: u64,
) -> Result<EstimateReport> {
    let dist = joint_distribution(spec, rho)?;
    let tally = sample_tally(&dist, shots, seed)?;
    let mut report = estimate_from_tally(&tally, spec, CopyAccounting::Reuse)?;
    report.exact_value = Some(poly_function_exact(spec, rho)?);
    Ok(report)
}

/// Entropy estimation end to end: spectrum floor → series order → shot
/// plan → sampled estimate of the truncated entropy `S_N(ρ)`.
///
/// The truncation order guarantees `|S_N − S| ≤ ε/2` and the Hoeffding
/// budget covers the remaining ε/2 with failure probability at most δ, so
/// the report lands within ε of the true entropy with probability
/// ≥ 1 − δ. The attached `exact_value` is the full von Neumann entropy,
/// not the truncation.
pub fn estimate_entropy(
    rho: &DensityMatrix,
    epsilon: f64,
    delta: f64,
    seed: u64,
) -> Result<EstimateReport> {
    check_probability("precision", epsilon)?;
    check_probability("failure probability", delta)?;
    let kappa = min_nonzero_eigenvalue(rho);
    let order = entropy_truncation_order(epsilon, kappa)?;
    let spec = entropy_taylor_spec(order)?;
    let shots = shots_for(epsilon / 2.0, delta, spec.gamma())?;
    let mut report = estimate_poly_function(&spec, rho, shots, seed)?;
    report.exact_value = Some(von_neumann_entropy(rho));
    Ok(report)
}

/// The spectral data behind a fidelity estimate.
///
/// `√ρ·σ·√ρ` is positive semidefinite and shares its spectrum `{μ_i}`
/// with `ρσ`, so `tr[(ρσ)^k] = Σ_i μ_i^k` is real, nonnegative, and at
/// most 1. Those product trace powers replace the single-state trace
/// powers as the estimator's atoms: one shot with branch outcome `k`
/// reads out exactly the observable that a cyclic permutation of `2k`
/// interleaved copies of ρ and σ measures.
#[derive(Debug, Clone)]
pub struct FidelityProblem {
    eigenvalues: Vec<f64>,
    rank: usize,
    exact: f64,
}

impl FidelityProblem {
    pub fn new(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<Self> {
        if rho.dim() != sigma.dim() {
            return Err(Error::DimensionMismatch(format!(
                "fidelity needs equal dimensions, got {} and {}",
                rho.dim(),
                sigma.dim()
            )));
        }
        let root = matrix_sqrt_psd(rho.matrix())?;
        let sandwich = root.mul(sigma.matrix())?.mul(&root)?;
        let sandwich = sandwich
            .add(&sandwich.dagger())?
            .scale(num_complex::Complex64::new(0.5, 0.0));
        let eig = hermitian_eig(&sandwich)?;
        let mut eigenvalues = eig.eigenvalues;
        for mu in eigenvalues.iter_mut() {
            if *mu < -1e-10 {
                return Err(Error::Numerical(format!(
                    "product spectrum has negative weight {mu:.3e}"
                )));
            }
            *mu = mu.max(0.0);
        }
        eigenvalues.sort_by(|a, b| b.partial_cmp(a).expect("finite eigenvalues"));
        let rank = eigenvalues.iter().filter(|&&mu| mu > RANK_CUTOFF).count();
        let exact = fidelity_exact(rho, sigma)?;
        Ok(FidelityProblem {
            eigenvalues,
            rank,
            exact,
        })
    }

    /// Spectrum of `ρσ`, descending, clamped to nonnegative.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Number of eigenvalues above the rank cutoff. Zero means the states
    /// have orthogonal supports and the fidelity is exactly 0.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Smallest nonzero eigenvalue of `ρσ`, the `κ` that picks the series
    /// degree. Zero when the supports are orthogonal.
    pub fn kappa(&self) -> f64 {
        if self.rank == 0 {
            0.0
        } else {
            self.eigenvalues[self.rank - 1]
        }
    }

    /// Exact Uhlmann fidelity `(tr √(√ρ·σ·√ρ))²`.
    pub fn exact_fidelity(&self) -> f64 {
        self.exact
    }

    /// `tr[(ρσ)^k] = Σ_i μ_i^k`.
    pub fn product_trace_power(&self, k: usize) -> Result<f64> {
        if k == 0 {
            return Err(Error::InvalidArgument(
                "trace power wants an exponent ≥ 1".into(),
            ));
        }
        Ok(self.eigenvalues.iter().map(|&mu| mu.powi(k as i32)).sum())
    }

    /// Noise-free value of the square-root estimator at this degree:
    /// `Σ_{μ_i > 0} p(μ_i) = rank·a₀ + Σ_k a_k·tr[(ρσ)^k]`.
    ///
    /// The constant counts once per eigenvalue in the support. Squaring
    /// this value approximates the fidelity to the spec's accuracy; with
    /// the constant counted once (or `dim` times) the pure-state case and
    /// the full-rank case cannot both come out right, because `a₀` decays
    /// only as `1/√degree`.
    pub fn sqrt_polynomial_exact(&self, spec: &PolySpec) -> Result<f64> {
        let mut acc = self.rank as f64 * spec.const_term();
        for (k, a) in spec.powers() {
            if a != 0.0 {
                acc += a * self.product_trace_power(k)?;
            }
        }
        Ok(acc)
    }
}

/// Fidelity pipeline outcome. The squaring happens after sampling, so the
/// report keeps both the squared values and the √-level sampling record.
#[derive(Debug, Clone, PartialEq)]
pub struct FidelityReport {
    /// `F̂` clamped into [0, 1].
    pub fidelity: f64,
    /// `F̂ = (f̂ + rank·a₀)²` before clamping; sampling noise can push it
    /// past 1.
    pub raw: f64,
    /// Exact Uhlmann fidelity.
    pub exact: f64,
    /// The same estimator with noise-free atoms, squared: what `raw`
    /// converges to as shots grow.
    pub exact_polynomial: f64,
    /// Constant-term multiplicity, the rank of `ρσ`.
    pub rank: usize,
    /// The √-level sampling record. Its `estimate` includes the rank-fold
    /// constant, its `exact_value` is [`FidelityProblem::sqrt_polynomial_exact`],
    /// and its ledger charges copy pairs (one ρ and one σ per unit).
    pub sqrt_level: EstimateReport,
}

/// Fidelity estimation end to end: spectrum of `ρσ` → square-root series
/// degree via the ε/4 rule at `κ` → Hoeffding shot plan at ε/4 → sampled
/// √-level estimate, squared.
///
/// Orthogonal-support pairs make `κ = 0`; no finite-degree series covers
/// that, so the degree search reports an approximation error. Callers who
/// want a fixed degree regardless of spectrum use
/// [`estimate_fidelity_with`].
pub fn estimate_fidelity(
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
    epsilon: f64,
    delta: f64,
    seed: u64,
) -> Result<FidelityReport> {
    check_probability("precision", epsilon)?;
    check_probability("failure probability", delta)?;
    let problem = FidelityProblem::new(rho, sigma)?;
    if problem.rank() == 0 {
        return Err(Error::Approximation(
            "states have orthogonal supports: the product spectrum has no floor, so no \
             polynomial degree reaches the target (the fidelity is exactly 0)"
                .into(),
        ));
    }
    let degree = sqrt_degree_for(epsilon, problem.kappa())?;
    let spec = sqrt_taylor_spec(degree)?;
    let shots = shots_for(epsilon / 4.0, delta, spec.gamma())?;
    estimate_fidelity_with(&problem, &spec, shots, seed)
}

/// The sampling half of the fidelity pipeline, with the spec and shot
/// count under caller control.
pub fn estimate_fidelity_with(
    problem: &FidelityProblem,
    spec: &PolySpec,
    shots: u64,
    seed: u64,
) -> Result<FidelityReport> {
    let atoms: Vec<f64> = (1..=spec.degree())
        .map(|k| problem.product_trace_power(k))
        .collect::<Result<_>>()?;
    let dist = joint_distribution_from_powers(spec, &atoms)?;
    let tally = sample_tally(&dist, shots, seed)?;
    let mut report = estimate_from_tally(&tally, spec, CopyAccounting::Reuse)?;
    report.estimate += (problem.rank() as f64 - 1.0) * spec.const_term();
    report.exact_value = Some(problem.sqrt_polynomial_exact(spec)?);
    // Every copy is a ρ/σ pair on the interleaved register.
    report.copies.fresh_copies_total *= 2;
    report.copies.reclaimed_total *= 2;
    report.copies.expected_per_shot *= 2.0;
    let raw = report.estimate * report.estimate;
    let exact_sqrt = report.exact_value.expect("just attached");
    Ok(FidelityReport {
        fidelity: raw.clamp(0.0, 1.0),
        raw,
        exact: problem.exact_fidelity(),
        exact_polynomial: exact_sqrt * exact_sqrt,
        rank: problem.rank(),
        sqrt_level: report,
    })
}

/// How an eigenvalue-search probe reads out the indicator value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbePlan {
    /// Evaluate the fitted step polynomial on exact trace powers.
    Exact,
    /// Sample the estimator with this many shots per probe.
    Sampled { shots: u64 },
}

/// One bisection probe: the bracket it saw, where it looked, what it read.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeStep {
    pub left: f64,
    pub right: f64,
    pub beta: f64,
    pub o_beta: f64,
}

/// Eigenvalue-search outcome: the threshold estimate, the probe trail,
/// and how the loop ended.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxEigReport {
    /// Estimated largest eigenvalue: the stopping threshold plus the root
    /// of the last fit's 1/2-crossing inside its transition zone.
    pub beta: f64,
    /// Set when the loop ended through the width guard: the bracket
    /// collapsed below the cutoff without the indicator ever landing in
    /// the stopping band. A degenerate top eigenvalue always ends this
    /// way, because the indicator jumps from one shelf to the other with
    /// no intermediate reading. A separated spectrum can end this way
    /// too when the bisection midpoints happen to straddle the narrow
    /// transition zone, so the flag means "band never observed", not
    /// "spectrum provably degenerate"; the crossing-root refinement makes
    /// the returned threshold accurate in either case.
    pub degenerate: bool,
    pub steps: Vec<ProbeStep>,
    /// Total shots across all probes; zero under [`ProbePlan::Exact`].
    pub shots_used: u64,
}

/// Probe fits depend only on the threshold and the degree, and each one
/// costs a few hundred solver passes over a thousand-point grid, so they
/// are memoized for the life of the process.
static PROBE_FITS: OnceLock<Mutex<HashMap<(u64, usize), StepFit>>> = OnceLock::new();

fn probe_fit_cached(beta: f64, degree: usize) -> Result<StepFit> {
    let cache = PROBE_FITS.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (beta.to_bits(), degree);
    if let Some(fit) = cache.lock().expect("probe cache lock").get(&key) {
        return Ok(fit.clone());
    }
    let fit = step_probe_fit(&ProbeFitConfig::for_search(beta, degree))?;
    cache
        .lock()
        .expect("probe cache lock")
        .insert(key, fit.clone());
    Ok(fit)
}

/// Root of `p(β + t) − 1/2` inside the fit's transition zone, found by
/// bisection; zero when the fit does not cross 1/2 there. Sharpens the
/// final threshold from "somewhere in the last bracket" to the point the
/// fitted step actually switches.
fn crossing_shift(spec: &PolySpec, beta: f64, degree: usize) -> f64 {
    let steepness = 2.0 * degree as f64;
    let mut lo = (-2.0 / steepness).max(-beta);
    let mut hi = (4.0 / steepness).min(1.0 - beta);
    let f = |t: f64| spec.evaluate(beta + t) - 0.5;
    if f(lo) > 0.0 || f(hi) < 0.0 {
        return 0.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn probe_value(
    fit: &StepFit,
    rho: &DensityMatrix,
    plan: ProbePlan,
    seed_source: &mut ChaCha8Rng,
    shots_used: &mut u64,
) -> Result<f64> {
    let extra_consts = (rho.dim() as f64 - 1.0) * fit.spec.const_term();
    match plan {
        ProbePlan::Exact => Ok(poly_function_exact(&fit.spec, rho)? + extra_consts),
        ProbePlan::Sampled { shots } => {
            let dist = joint_distribution(&fit.spec, rho)?;
            let tally = sample_tally(&dist, shots, seed_source.gen())?;
            let report = estimate_from_tally(&tally, &fit.spec, CopyAccounting::Reuse)?;
            *shots_used += shots;
            Ok(report.estimate + extra_consts)
        }
    }
}

const SEARCH_STEP_CAP: usize = 200;

/// Binary search for the largest eigenvalue of ρ.
///
/// Each probe fits a step polynomial at the midpoint threshold β and
/// reads the indicator `o_β = Σ_k p_β(λ_k) = d·a₀ + Σ_j a_j·tr(ρ^j)`,
/// which counts the eigenvalues above β. `o_β > 1 − tol` means the top
/// eigenvalue is above the threshold, so the left edge moves up;
/// `o_β < tol` moves the right edge down; a reading inside `[tol, 1−tol]`
/// means β sits in the transition zone of exactly one eigenvalue and the
/// search stops there. A bracket narrower than `width_cutoff` stops the
/// loop unconditionally and flags the result, since an indicator that
/// jumps across the band without ever landing in it is the signature of
/// a degenerate top eigenvalue. Either way the final threshold is
/// sharpened by the fitted step's own 1/2-crossing.
///
/// The seed feeds per-probe substreams and is ignored under
/// [`ProbePlan::Exact`].
pub fn max_eigenvalue(
    rho: &DensityMatrix,
    tol: f64,
    degree: usize,
    plan: ProbePlan,
    width_cutoff: f64,
    seed: u64,
) -> Result<MaxEigReport> {
    if !(tol > 0.0 && tol < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "stopping band must satisfy 0 < tol < 1/2, got {tol}"
        )));
    }
    if !(width_cutoff > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "width cutoff must be positive, got {width_cutoff}"
        )));
    }
    if let ProbePlan::Sampled { shots: 0 } = plan {
        return Err(Error::InvalidArgument(
            "sampled probes need at least one shot".into(),
        ));
    }
    let mut seed_source = ChaCha8Rng::seed_from_u64(seed);
    let mut shots_used = 0u64;
    let mut steps = Vec::new();
    let mut left = 0.0f64;
    let mut right = 1.0f64;
    for _ in 0..SEARCH_STEP_CAP {
        let beta = 0.5 * (left + right);
        let fit = probe_fit_cached(beta, degree)?;
        let o = probe_value(&fit, rho, plan, &mut seed_source, &mut shots_used)?;
        steps.push(ProbeStep {
            left,
            right,
            beta,
            o_beta: o,
        });
        if tol <= o && o <= 1.0 - tol {
            return Ok(MaxEigReport {
                beta: beta + crossing_shift(&fit.spec, beta, degree),
                degenerate: false,
                steps,
                shots_used,
            });
        }
        if o < tol {
            right = beta;
        } else {
            left = beta;
        }
        if right - left < width_cutoff {
            let mid = 0.5 * (left + right);
            let fit = probe_fit_cached(mid, degree)?;
            return Ok(MaxEigReport {
                beta: mid + crossing_shift(&fit.spec, mid, degree),
                degenerate: true,
                steps,
                shots_used,
            });
        }
    }
    Err(Error::SearchFailure(format!(
        "indicator readings never entered the stopping band and the bracket failed to \
         collapse within {SEARCH_STEP_CAP} probes"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cycle_permutation_matrix, kron_list, ComplexMatrix};
    use crate::states::random_state;

    #[test]
    fn poly_report_attaches_oracle() {
        let spec = entropy_taylor_spec(3).unwrap();
        let rho = random_state(2, 2, 40).unwrap();
        let report = estimate_poly_function(&spec, &rho, 200_000, 7).unwrap();
        let exact = report.exact_value.unwrap();
        assert!((exact - poly_function_exact(&spec, &rho).unwrap()).abs() < 1e-15);
        assert!((report.estimate - exact).abs() <= 4.0 * report.std_error);
    }

    #[test]
    fn entropy_follows_the_plan() {
        let rho = DensityMatrix::from_probabilities(&[0.6, 0.4]).unwrap();
        let epsilon = 0.2;
        let delta = 0.1;
        let report = estimate_entropy(&rho, epsilon, delta, 3).unwrap();

        let kappa = min_nonzero_eigenvalue(&rho);
        let order = entropy_truncation_order(epsilon, kappa).unwrap();
        let spec = entropy_taylor_spec(order).unwrap();
        assert_eq!(report.spec_degree, spec.degree());
        assert_eq!(
            report.shots,
            shots_for(epsilon / 2.0, delta, spec.gamma()).unwrap()
        );
        assert_eq!(report.exact_value, Some(von_neumann_entropy(&rho)));

        let truncated = poly_function_exact(&spec, &rho).unwrap();
        assert!(
            (report.estimate - truncated).abs() <= epsilon / 2.0,
            "sampled {} vs truncated {truncated}",
            report.estimate
        );
        assert!((report.estimate - report.exact_value.unwrap()).abs() <= epsilon);
    }

    #[test]
    fn entropy_of_maximally_mixed_state() {
        let rho = DensityMatrix::maximally_mixed(2);
        let report = estimate_entropy(&rho, 0.1, 0.05, 11).unwrap();
        assert!((report.estimate - 2f64.ln()).abs() <= 0.1);
        assert_eq!(report.exact_value, Some(2f64.ln()));
    }

    #[test]
    fn entropy_of_pure_state_is_noise_around_zero() {
        let rho = random_state(2, 1, 42).unwrap();
        let report = estimate_entropy(&rho, 0.2, 0.1, 5).unwrap();
        assert!(report.exact_value.unwrap().abs() < 1e-9);
        assert!(report.estimate.abs() <= 4.0 * report.std_error.max(1e-12));
    }

    #[test]
    fn entropy_rejects_bad_probabilities() {
        let rho = DensityMatrix::maximally_mixed(2);
        assert!(estimate_entropy(&rho, 0.0, 0.1, 0).is_err());
        assert!(estimate_entropy(&rho, 1.5, 0.1, 0).is_err());
        assert!(estimate_entropy(&rho, 0.1, 0.0, 0).is_err());
        assert!(estimate_entropy(&rho, 0.1, 1.0, 0).is_err());
    }

    #[test]
    fn fidelity_problem_spectrum_for_commuting_pair() {
        let rho = DensityMatrix::from_probabilities(&[0.8, 0.2]).unwrap();
        let sigma = DensityMatrix::from_probabilities(&[0.4, 0.6]).unwrap();
        let problem = FidelityProblem::new(&rho, &sigma).unwrap();

        // Commuting diagonals: μ are the products of the eigenvalues.
        let expected = [0.8 * 0.4, 0.2 * 0.6];
        assert!((problem.eigenvalues()[0] - expected[0]).abs() < 1e-12);
        assert!((problem.eigenvalues()[1] - expected[1]).abs() < 1e-12);
        assert_eq!(problem.rank(), 2);
        assert!((problem.kappa() - 0.12).abs() < 1e-12);

        let sqrt_sum: f64 = expected.iter().map(|m| m.sqrt()).sum();
        assert!((problem.exact_fidelity() - sqrt_sum * sqrt_sum).abs() < 1e-12);
        assert!(
            (problem.product_trace_power(2).unwrap()
                - (expected[0] * expected[0] + expected[1] * expected[1]))
                .abs()
                < 1e-14
        );
    }

    #[test]
    fn product_atoms_match_interleaved_permutation() {
        // Dense oracle: tr[(ρ⊗σ)^⊗k · P_2k] computed literally as a
        // 2k-system cyclic permutation against the interleaved product
        // state, compared with the eigenvalue route.
        for (d, seed) in [(2usize, 1u64), (2, 2), (3, 3)] {
            let rho = random_state(d, d, seed).unwrap();
            let sigma = random_state(d, d, seed + 50).unwrap();
            let problem = FidelityProblem::new(&rho, &sigma).unwrap();
            for k in 1..=2usize {
                let factors: Vec<ComplexMatrix> = (0..2 * k)
                    .map(|i| {
                        if i % 2 == 0 {
                            rho.matrix().clone()
                        } else {
                            sigma.matrix().clone()
                        }
                    })
                    .collect();
                let tensor = kron_list(&factors).unwrap();
                let perm = cycle_permutation_matrix(2 * k, 2 * k, d).unwrap();
                let dense = perm.mul(&tensor).unwrap().trace().re;
                let spectral = problem.product_trace_power(k).unwrap();
                assert!(
                    (dense - spectral).abs() < 1e-10,
                    "d={d} k={k}: dense {dense} vs spectral {spectral}"
                );
            }
        }
    }

    #[test]
    fn fidelity_of_pure_state_with_itself() {
        let rho = random_state(2, 1, 43).unwrap();
        let report = estimate_fidelity(&rho, &rho, 0.2, 0.1, 9).unwrap();
        assert_eq!(report.rank, 1);
        assert!((report.exact - 1.0).abs() < 1e-10);
        assert!((report.exact_polynomial - 1.0).abs() < 1e-10);
        let se = report.sqrt_level.std_error;
        assert!(
            (report.raw - 1.0).abs() <= 4.0 * se * (2.0 + 4.0 * se),
            "raw {} strayed from 1 (√-level se {se})",
            report.raw
        );
        assert!(report.fidelity <= 1.0);
    }

    #[test]
    fn fidelity_chain_stays_within_epsilon() {
        // Noise-free check of the whole approximation chain: degree from
        // the ε/4 rule at the κ of each pair, constant counted once per
        // support eigenvalue, squared value within ε of the true fidelity.
        let epsilon = 0.1;
        for seed in [1u64, 2, 3, 4, 5, 6, 7, 8] {
            let rho = random_state(2, 2, 100 + seed).unwrap();
            let sigma = random_state(2, 2, 200 + seed).unwrap();
            let problem = FidelityProblem::new(&rho, &sigma).unwrap();
            let degree = sqrt_degree_for(epsilon, problem.kappa()).unwrap();
            let spec = sqrt_taylor_spec(degree).unwrap();
            let poly = problem.sqrt_polynomial_exact(&spec).unwrap();
            assert!(
                (poly * poly - problem.exact_fidelity()).abs() <= epsilon,
                "seed {seed}: (Σp(μ))² = {} vs F = {} at degree {degree}",
                poly * poly,
                problem.exact_fidelity()
            );
        }
    }

    #[test]
    fn fidelity_sampling_brackets_its_polynomial() {
        let rho = random_state(2, 2, 44).unwrap();
        let sigma = DensityMatrix::maximally_mixed(2);
        let problem = FidelityProblem::new(&rho, &sigma).unwrap();
        let spec = sqrt_taylor_spec(6).unwrap();
        let report = estimate_fidelity_with(&problem, &spec, 100_000, 13).unwrap();

        let sqrt = &report.sqrt_level;
        let target = sqrt.exact_value.unwrap();
        assert!(
            (sqrt.estimate - target).abs() <= 4.0 * sqrt.std_error,
            "√-level estimate {} vs {target} (se {})",
            sqrt.estimate,
            sqrt.std_error
        );
        assert!((report.raw - report.exact_polynomial).abs() <= 0.05);
        assert_eq!(report.fidelity, report.raw.clamp(0.0, 1.0));
    }

    #[test]
    fn fidelity_ledger_charges_copy_pairs() {
        let rho = random_state(2, 2, 45).unwrap();
        let sigma = random_state(2, 2, 46).unwrap();
        let problem = FidelityProblem::new(&rho, &sigma).unwrap();
        let spec = sqrt_taylor_spec(4).unwrap();
        let shots = 5_000u64;
        let report = estimate_fidelity_with(&problem, &spec, shots, 3).unwrap();
        let ledger = report.sqrt_level.copies;
        assert_eq!(
            ledger.fresh_copies_total + ledger.reclaimed_total,
            2 * shots * spec.max_power() as u64
        );
        let per_branch: f64 = spec
            .branch_distribution()
            .iter()
            .enumerate()
            .map(|(idx, p)| (idx + 1) as f64 * p)
            .sum();
        assert!((ledger.expected_per_shot - 2.0 * per_branch).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_supports_are_rejected_by_the_planner() {
        let rho = DensityMatrix::from_probabilities(&[1.0, 0.0]).unwrap();
        let sigma = DensityMatrix::from_probabilities(&[0.0, 1.0]).unwrap();
        let problem = FidelityProblem::new(&rho, &sigma).unwrap();
        assert_eq!(problem.rank(), 0);
        assert_eq!(problem.kappa(), 0.0);
        assert!((problem.exact_fidelity()).abs() < 1e-12);
        assert!(matches!(
            estimate_fidelity(&rho, &sigma, 0.1, 0.05, 0),
            Err(Error::Approximation(_))
        ));
    }

    #[test]
    fn fidelity_rejects_mismatched_dimensions() {
        let rho = DensityMatrix::maximally_mixed(2);
        let sigma = DensityMatrix::maximally_mixed(3);
        assert!(FidelityProblem::new(&rho, &sigma).is_err());
    }

    #[test]
    fn search_finds_separated_top_eigenvalues() {
        let two = DensityMatrix::from_probabilities(&[0.7, 0.3]).unwrap();
        let report = max_eigenvalue(&two, 0.49, 16, ProbePlan::Exact, 0.04, 0).unwrap();
        assert!(
            (report.beta - 0.7).abs() <= 0.02,
            "two-level: {} (degenerate={})",
            report.beta,
            report.degenerate
        );
        assert_eq!(report.shots_used, 0);

        let three = DensityMatrix::from_probabilities(&[0.6, 0.25, 0.15]).unwrap();
        let report = max_eigenvalue(&three, 0.49, 16, ProbePlan::Exact, 0.04, 0).unwrap();
        assert!(
            (report.beta - 0.6).abs() <= 0.02,
            "three-level: {} (degenerate={})",
            report.beta,
            report.degenerate
        );
    }

    #[test]
    fn search_flags_degenerate_spectrum() {
        let rho = DensityMatrix::maximally_mixed(2);
        let report = max_eigenvalue(&rho, 0.49, 16, ProbePlan::Exact, 0.04, 0).unwrap();
        assert!(report.degenerate, "I/2 must trip the width guard");
        assert!(
            (report.beta - 0.5).abs() <= 0.1,
            "I/2 threshold: {}",
            report.beta
        );
    }

    #[test]
    fn search_handles_pure_state_at_the_edge() {
        let rho = DensityMatrix::from_probabilities(&[1.0, 0.0]).unwrap();
        let report = max_eigenvalue(&rho, 0.49, 16, ProbePlan::Exact, 0.04, 0).unwrap();
        assert!(
            (report.beta - 1.0).abs() <= 0.04,
            "pure state: {}",
            report.beta
        );
    }

    #[test]
    fn search_with_sampled_probes() {
        let rho = DensityMatrix::from_probabilities(&[0.7, 0.3]).unwrap();
        let report = max_eigenvalue(
            &rho,
            0.49,
            16,
            ProbePlan::Sampled { shots: 100_000 },
            0.04,
            1,
        )
        .unwrap();
        assert!(
            report.beta >= 0.68 && report.beta <= 0.72,
            "sampled search: {}",
            report.beta
        );
        assert_eq!(report.shots_used, report.steps.len() as u64 * 100_000);
    }

    #[test]
    fn search_brackets_stay_nested_around_the_crossing() {
        let rho = DensityMatrix::from_probabilities(&[0.7, 0.3]).unwrap();
        let report = max_eigenvalue(&rho, 0.49, 16, ProbePlan::Exact, 0.04, 0).unwrap();
        let steepness = 2.0 * 16.0;
        let zone = (0.7 - 2.0 / steepness, 0.7 + 4.0 / steepness);
        let mut prev = (0.0, 1.0);
        for step in &report.steps {
            assert!(step.left >= prev.0 - 1e-15 && step.right <= prev.1 + 1e-15);
            assert!(
                step.left <= zone.1 && step.right >= zone.0,
                "bracket [{}, {}] lost the transition zone",
                step.left,
                step.right
            );
            prev = (step.left, step.right);
        }
    }

    #[test]
    fn search_rejects_bad_arguments() {
        let rho = DensityMatrix::maximally_mixed(2);
        assert!(max_eigenvalue(&rho, 0.0, 16, ProbePlan::Exact, 0.04, 0).is_err());
        assert!(max_eigenvalue(&rho, 0.5, 16, ProbePlan::Exact, 0.04, 0).is_err());
        assert!(max_eigenvalue(&rho, 0.49, 16, ProbePlan::Exact, 0.0, 0).is_err());
        assert!(max_eigenvalue(&rho, 0.49, 16, ProbePlan::Sampled { shots: 0 }, 0.04, 0).is_err());
    }
}
