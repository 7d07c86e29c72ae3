//! Validated density matrices and the exact functionals estimators are
//! judged against.
//!
//! Every estimator in this crate ultimately claims to approximate some
//! number computable from the state's spectrum. This module owns the
//! ground truth: trace powers, von Neumann entropy, Uhlmann fidelity, and
//! exact polynomial evaluations, all through the eigendecomposition cached
//! at construction time.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_eig, matrix_power_trace, matrix_sqrt_psd, Complex64, ComplexMatrix,
};
use crate::coefficients::PolySpec;

/// Validation tolerance for hermiticity and unit trace.
const STATE_TOL: f64 = 1e-10;

/// Eigenvalues at or below this magnitude count as zero rank.
pub const RANK_CUTOFF: f64 = 1e-10;

/// A quantum state: Hermitian, unit-trace, positive semidefinite within
/// `1e-10`, with its spectrum computed once up front.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
    eigenvalues: Vec<f64>,
}

impl DensityMatrix {
    /// Validates and wraps a candidate density matrix.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "density matrix must be square, got {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        if !matrix.is_hermitian(STATE_TOL) {
            return Err(Error::Validation(format!(
                "not Hermitian: worst elementwise defect {:.3e}",
                matrix.hermiticity_defect()
            )));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(Error::Validation(format!(
                "trace is {tr}, expected 1 within {STATE_TOL:.0e}"
            )));
        }
        let eig = hermitian_eig(&matrix)?;
        if let Some(&worst) = eig.eigenvalues.iter().find(|&&l| l < -STATE_TOL) {
            return Err(Error::Validation(format!(
                "negative eigenvalue {worst:.3e} below the −{STATE_TOL:.0e} tolerance"
            )));
        }
        Ok(Self {
            matrix,
            eigenvalues: eig.eigenvalues,
        })
    }

    /// The pure state `|ψ⟩⟨ψ|` of a unit vector (normalized here, so any
    /// nonzero amplitude vector works).
    pub fn from_pure(amplitudes: &[Complex64]) -> Result<Self> {
        let norm_sq: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if norm_sq <= 0.0 {
            return Err(Error::InvalidArgument("zero state vector".into()));
        }
        let d = amplitudes.len();
        let mut m = ComplexMatrix::zeros(d, d);
        for r in 0..d {
            for c in 0..d {
                m.set(r, c, amplitudes[r] * amplitudes[c].conj() / norm_sq);
            }
        }
        Self::new(m)
    }

    /// `I_d / d`.
    pub fn maximally_mixed(d: usize) -> Self {
        let diag = vec![1.0 / d as f64; d];
        Self::new(ComplexMatrix::from_diagonal(&diag))
            .expect("maximally mixed state always validates")
    }

    /// Diagonal state from a probability vector.
    pub fn from_probabilities(probs: &[f64]) -> Result<Self> {
        Self::new(ComplexMatrix::from_diagonal(probs))
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// Ascending spectrum, as validated at construction.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Number of eigenvalues above [`RANK_CUTOFF`].
    pub fn rank(&self) -> usize {
        self.eigenvalues.iter().filter(|&&l| l > RANK_CUTOFF).count()
    }
}

/// Draws a random state of the given rank: `G·G†` normalized to unit
/// trace, where `G` is `d × rank` with independent complex Gaussian
/// entries from a stream seeded by `seed`.
///
/// The same seed always produces the same state. With probability one the
/// result has exactly the requested rank.
pub fn random_state(d: usize, rank: usize, seed: u64) -> Result<DensityMatrix> {
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be ≥ 1".into()));
    }
    if rank < 1 || rank > d {
        return Err(Error::InvalidArgument(format!(
            "rank {rank} out of range 1..={d}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = ComplexMatrix::zeros(d, rank);
    for r in 0..d {
        for c in 0..rank {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            g.set(r, c, Complex64::new(re, im));
        }
    }
    let gg = g.mul(&g.dagger())?;
    let tr = gg.trace().re;
    let rho = gg.scale(Complex64::new(1.0 / tr, 0.0));
    DensityMatrix::new(rho)
}

/// `tr(ρ^j)` from the cached spectrum. Always in `(0, 1]`, equal to 1
/// exactly when `j = 1` or the state is pure.
pub fn trace_power(rho: &DensityMatrix, j: usize) -> Result<f64> {
    if j == 0 {
        return Err(Error::InvalidArgument("power must be ≥ 1".into()));
    }
    Ok(rho
        .eigenvalues()
        .iter()
        .map(|&l| l.max(0.0).powi(j as i32))
        .sum())
}

/// Von Neumann entropy `−Σ λ ln λ` in nats, skipping eigenvalues at or
/// below `1e-12`.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    rho.eigenvalues()
        .iter()
        .filter(|&&l| l > 1e-12)
        .map(|&l| -l * l.ln())
        .sum()
}

fn fidelity_sandwich(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    let root = matrix_sqrt_psd(rho.matrix())?;
    let inner = root.mul(sigma.matrix())?.mul(&root)?;
    // inner is Hermitian PSD up to rounding; symmetrize the tiny skew
    // before taking the square root.
    let inner = inner.add(&inner.dagger())?.scale(Complex64::new(0.5, 0.0));
    let outer_root = matrix_sqrt_psd(&inner)?;
    Ok(outer_root.trace().re.powi(2))
}

/// Uhlmann fidelity `(tr √(√ρ·σ·√ρ))²`, clamped into `[0, 1]` when
/// rounding pushes it out by at most `1e-9`.
///
/// Both sandwich orders are evaluated and averaged: the value is the same
/// in exact arithmetic, and averaging makes the computed result exactly
/// symmetric in its arguments instead of symmetric only up to the rounding
/// of whichever square root went first.
pub fn fidelity_exact(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch(format!(
            "fidelity needs equal dimensions, got {} and {}",
            rho.dim(),
            sigma.dim()
        )));
    }
    let f = 0.5 * (fidelity_sandwich(rho, sigma)? + fidelity_sandwich(sigma, rho)?);
    if !(-1e-9..=1.0 + 1e-9).contains(&f) {
        return Err(Error::Numerical(format!(
            "fidelity {f} strayed outside [0, 1] beyond tolerance"
        )));
    }
    Ok(f.clamp(0.0, 1.0))
}

/// Smallest eigenvalue above the rank cutoff `1e-10`; the `κ` that
/// truncation-order rules consume.
pub fn min_nonzero_eigenvalue(rho: &DensityMatrix) -> f64 {
    rho.eigenvalues()
        .iter()
        .copied()
        .filter(|&l| l > RANK_CUTOFF)
        .fold(f64::INFINITY, f64::min)
}

/// Exact value of the spec's polynomial on the state:
/// `const_term + Σ_j α_j·tr(ρ^j)`. The ground truth every estimator in
/// this crate is measured against.
pub fn poly_function_exact(spec: &PolySpec, rho: &DensityMatrix) -> Result<f64> {
    let mut acc = spec.const_term();
    for (j, a) in spec.powers() {
        if a != 0.0 {
            acc += a * trace_power(rho, j)?;
        }
    }
    Ok(acc)
}

/// The matrix `Σ_j α_j·ρ^j` (constant term excluded), Hermitian by
/// construction.
pub fn poly_transform_exact(spec: &PolySpec, rho: &DensityMatrix) -> Result<ComplexMatrix> {
    let d = rho.dim();
    let mut acc = ComplexMatrix::zeros(d, d);
    let mut power = ComplexMatrix::identity(d);
    let mut cur = 0usize;
    for (j, a) in spec.powers() {
        if a == 0.0 {
            continue;
        }
        while cur < j {
            power = power.mul(rho.matrix())?;
            cur += 1;
        }
        acc = acc.add(&power.scale(Complex64::new(a, 0.0)))?;
    }
    Ok(acc)
}

fn format_complex(z: Complex64) -> String {
    format!("{}{:+}j", z.re, z.im)
}

fn parse_complex(token: &str) -> Result<Complex64> {
    let bad = || Error::Format(format!("cannot parse complex entry '{token}'"));
    let body = token.strip_suffix(['j', 'J']).ok_or_else(bad)?;
    let bytes = body.as_bytes();
    // The split point is the last sign that does not follow an exponent
    // marker and is not the leading sign of the real part.
    let mut split = None;
    for i in (1..bytes.len()).rev() {
        let b = bytes[i];
        if (b == b'+' || b == b'-') && !matches!(bytes[i - 1], b'e' | b'E') {
            split = Some(i);
            break;
        }
    }
    let split = split.ok_or_else(bad)?;
    let re: f64 = body[..split].parse().map_err(|_| bad())?;
    let im: f64 = body[split..].parse().map_err(|_| bad())?;
    Ok(Complex64::new(re, im))
}

/// Renders a state in the text format used by `--state-file`: a dimension
/// line, then one row per line with entries like `0.7+0j`.
pub fn save_state_text(rho: &DensityMatrix) -> String {
    let d = rho.dim();
    let mut out = format!("{d}\n");
    for r in 0..d {
        let row: Vec<String> = (0..d)
            .map(|c| format_complex(rho.matrix().get(r, c)))
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Parses the [`save_state_text`] format and validates the result as a
/// density matrix.
pub fn load_state_text(text: &str) -> Result<DensityMatrix> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let d: usize = lines
        .next()
        .ok_or_else(|| Error::Format("empty state file".into()))?
        .trim()
        .parse()
        .map_err(|e| Error::Format(format!("bad dimension line: {e}")))?;
    if d == 0 {
        return Err(Error::Format("dimension must be ≥ 1".into()));
    }
    let mut m = ComplexMatrix::zeros(d, d);
    for r in 0..d {
        let line = lines
            .next()
            .ok_or_else(|| Error::Format(format!("missing row {r} of {d}")))?;
        let entries: Vec<&str> = line.split_whitespace().collect();
        if entries.len() != d {
            return Err(Error::Format(format!(
                "row {r} has {} entries, expected {d}",
                entries.len()
            )));
        }
        for (c, tok) in entries.iter().enumerate() {
            m.set(r, c, parse_complex(tok)?);
        }
    }
    if lines.next().is_some() {
        return Err(Error::Format(format!("more than {d} rows in state file")));
    }
    DensityMatrix::new(m)
}

/// `tr(ρ^j)` recomputed by literal matrix multiplication, bypassing the
/// spectrum cache. Exists for cross-checking; estimator code should use
/// [`trace_power`].
pub fn trace_power_dense(rho: &DensityMatrix, j: usize) -> Result<f64> {
    Ok(matrix_power_trace(rho.matrix(), j)?.re)
}
