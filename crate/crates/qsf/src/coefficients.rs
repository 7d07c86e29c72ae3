//! Polynomial specifications and the rules that produce them.
//!
//! A [`PolySpec`] is the classical description a QSF circuit is compiled
//! from: coefficients `α_j` for the trace powers, a constant term that is
//! added classically rather than encoded, a normalization `γ`, and the
//! rotation angles `θ_j` the readout qubit sees. Constructors here build
//! the specs for the three applications (entropy series, square-root
//! series for fidelity, step approximations for eigenvalue thresholding)
//! and plan shot budgets.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Largest truncation order accepted by the exact-arithmetic series
/// constructors. Alternating binomial sums grow like `2^N`; beyond this the
/// float conversion itself is meaningless.
pub const MAX_SERIES_ORDER: usize = 60;

/// Residual ceiling for [`step_poly_spec`]; a fit above this is rejected.
pub const STEP_RESIDUAL_LIMIT: f64 = 0.1;

/// How the normalization and rotation angles are derived from the
/// coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// `γ = Σ_j |α_j|`, `θ_j = sign(α_j)·π/2`; branch `j` is drawn with
    /// probability `|α_j|/γ`.
    Standard,
    /// `γ = max_j |α_j|`, `θ_j = arcsin(α_j/γ)`; branches are drawn
    /// uniformly and the estimator scale grows to `n·γ`.
    Variant,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Standard => "standard",
            Mode::Variant => "variant",
        }
    }

    pub fn parse(s: &str) -> Result<Mode> {
        match s.trim() {
            "standard" => Ok(Mode::Standard),
            "variant" => Ok(Mode::Variant),
            other => Err(Error::Format(format!("unknown mode '{other}'"))),
        }
    }
}

/// A polynomial `f(x) = const_term + Σ_{j=1}^{n} α_j x^j` packaged with
/// everything the circuit and sampler need to realize it.
///
/// The coefficient map always covers powers `1..=n` where `n` is the
/// smallest power of two at or above the highest requested power; the
/// padding entries are exact zeros and correspond to branches that are
/// never drawn (standard mode) or contribute nothing (variant mode).
#[derive(Debug, Clone)]
pub struct PolySpec {
    alphas: BTreeMap<usize, f64>,
    const_term: f64,
    gamma: f64,
    thetas: BTreeMap<usize, f64>,
    mode: Mode,
}

impl PolySpec {
    /// Builds a spec from `(power, coefficient)` pairs, deriving `γ` and
    /// the angles for the requested mode and zero-padding powers up to the
    /// next power of two.
    pub fn new(
        mode: Mode,
        const_term: f64,
        coefficients: impl IntoIterator<Item = (usize, f64)>,
    ) -> Result<Self> {
        let mut raw: BTreeMap<usize, f64> = BTreeMap::new();
        for (j, a) in coefficients {
            if j == 0 {
                return Err(Error::InvalidArgument(
                    "power 0 belongs in the constant term, not the coefficient map".into(),
                ));
            }
            if !a.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "coefficient for power {j} is not finite"
                )));
            }
            if raw.insert(j, a).is_some() {
                return Err(Error::InvalidArgument(format!("power {j} given twice")));
            }
        }
        let max_power = *raw
            .keys()
            .max()
            .ok_or_else(|| Error::InvalidArgument("spec needs at least one power".into()))?;
        let n = max_power.next_power_of_two();
        let mut alphas = BTreeMap::new();
        for j in 1..=n {
            alphas.insert(j, raw.get(&j).copied().unwrap_or(0.0));
        }
        let gamma = match mode {
            Mode::Standard => alphas.values().map(|a| a.abs()).sum::<f64>(),
            Mode::Variant => alphas.values().fold(0.0f64, |m, a| m.max(a.abs())),
        };
        if gamma <= 0.0 {
            return Err(Error::InvalidArgument(
                "all coefficients are zero; normalization would vanish".into(),
            ));
        }
        let thetas = alphas
            .iter()
            .map(|(&j, &a)| {
                let theta = match mode {
                    Mode::Standard => {
                        if a > 0.0 {
                            std::f64::consts::FRAC_PI_2
                        } else if a < 0.0 {
                            -std::f64::consts::FRAC_PI_2
                        } else {
                            0.0
                        }
                    }
                    Mode::Variant => (a / gamma).asin(),
                };
                (j, theta)
            })
            .collect();
        Ok(Self {
            alphas,
            const_term,
            gamma,
            thetas,
            mode,
        })
    }

    /// Same coefficients, other mode; `γ` and angles are rederived.
    pub fn with_mode(&self, mode: Mode) -> Result<Self> {
        Self::new(mode, self.const_term, self.alphas.clone())
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn const_term(&self) -> f64 {
        self.const_term
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Padded degree `n`: a power of two, the number of circuit branches.
    pub fn degree(&self) -> usize {
        *self.alphas.keys().max().unwrap()
    }

    /// Coefficient of `x^j` (zero for padding powers and `j > n`).
    pub fn alpha(&self, j: usize) -> f64 {
        self.alphas.get(&j).copied().unwrap_or(0.0)
    }

    /// Highest power with a nonzero coefficient. This is how many state
    /// copies one shot can consume, and how many the copy register holds.
    pub fn max_power(&self) -> usize {
        self.alphas
            .iter()
            .filter(|&(_, &a)| a != 0.0)
            .map(|(&j, _)| j)
            .max()
            .expect("construction guarantees a nonzero coefficient")
    }

    /// Rotation angle for branch `j`.
    pub fn theta(&self, j: usize) -> f64 {
        self.thetas.get(&j).copied().unwrap_or(0.0)
    }

    /// All `(power, coefficient)` pairs including the zero padding, in
    /// ascending power order.
    pub fn powers(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.alphas.iter().map(|(&j, &a)| (j, a))
    }

    /// Probability of drawing branch `j`, one entry per power `1..=n`.
    ///
    /// Standard mode weights branches by `|α_j|/γ`; variant mode is
    /// uniform across all `n` branches, padding included.
    pub fn branch_distribution(&self) -> Vec<f64> {
        let n = self.degree();
        match self.mode {
            Mode::Standard => (1..=n).map(|j| self.alpha(j).abs() / self.gamma).collect(),
            Mode::Variant => vec![1.0 / n as f64; n],
        }
    }

    /// The factor that converts the mean ±1 readout into the encoded
    /// polynomial value: `γ` in standard mode, `n·γ` in variant mode.
    pub fn estimator_scale(&self) -> f64 {
        match self.mode {
            Mode::Standard => self.gamma,
            Mode::Variant => self.degree() as f64 * self.gamma,
        }
    }

    /// Scalar evaluation `const_term + Σ α_j x^j` by Horner's rule over the
    /// dense padded range.
    pub fn evaluate(&self, x: f64) -> f64 {
        let n = self.degree();
        let mut acc = 0.0;
        for j in (1..=n).rev() {
            acc = acc * x + self.alpha(j);
        }
        self.const_term + acc * x
    }

    /// Serializes to the text record consumed by `--spec-file`: a mode
    /// line, a constant-term line, then one `j alpha_j` line per power.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.mode.as_str());
        let _ = writeln!(out, "{}", self.const_term);
        for (j, a) in self.powers() {
            let _ = writeln!(out, "{j} {a}");
        }
        out
    }

    /// Parses the [`to_text`](Self::to_text) format. `γ` and the angles are
    /// rederived, so hand-edited coefficient lines stay consistent.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let mode = Mode::parse(
            lines
                .next()
                .ok_or_else(|| Error::Format("empty spec file".into()))?,
        )?;
        let const_term: f64 = lines
            .next()
            .ok_or_else(|| Error::Format("missing constant-term line".into()))?
            .trim()
            .parse()
            .map_err(|e| Error::Format(format!("bad constant term: {e}")))?;
        let mut coeffs = Vec::new();
        for line in lines {
            let mut parts = line.split_whitespace();
            let j: usize = parts
                .next()
                .ok_or_else(|| Error::Format("empty coefficient line".into()))?
                .parse()
                .map_err(|e| Error::Format(format!("bad power: {e}")))?;
            let a: f64 = parts
                .next()
                .ok_or_else(|| Error::Format(format!("power {j} has no coefficient")))?
                .parse()
                .map_err(|e| Error::Format(format!("bad coefficient for power {j}: {e}")))?;
            if parts.next().is_some() {
                return Err(Error::Format(format!(
                    "trailing tokens on coefficient line for power {j}"
                )));
            }
            coeffs.push((j, a));
        }
        Self::new(mode, const_term, coeffs)
    }
}

fn big_binomial(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

fn rational_to_f64(r: &BigRational) -> Result<f64> {
    r.to_f64()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Numerical("exact coefficient does not fit in an f64".into()))
}

/// Coefficients of the order-`N` entropy series
/// `S_N(ρ) = Σ_{j=1}^{N} (1/j)·tr[ρ(I−ρ)^j]`, expanded into trace powers.
///
/// The coefficient of `tr(ρ^{m})` is `Σ_{k=1}^{N} (−1)^{m−1}·C(k, m−1)/k`,
/// accumulated in exact rational arithmetic; the alternating sums cancel
/// heavily, so floats only enter at the very end. The power-1 term stays in
/// the coefficient map (its permutation is the identity, which costs
/// nothing), leaving the constant term zero.
pub fn entropy_taylor_spec(order: usize) -> Result<PolySpec> {
    if order < 1 {
        return Err(Error::InvalidArgument(
            "entropy series order must be ≥ 1".into(),
        ));
    }
    if order > MAX_SERIES_ORDER {
        return Err(Error::Numerical(format!(
            "entropy series order {order} exceeds the exact-arithmetic cap {MAX_SERIES_ORDER}"
        )));
    }
    let mut coeffs = Vec::with_capacity(order + 1);
    for j in 0..=order {
        let mut acc = BigRational::zero();
        for k in 1..=order {
            let c = big_binomial(k, j);
            if c.is_zero() {
                continue;
            }
            acc += BigRational::new(c, BigInt::from(k));
        }
        if j % 2 == 1 {
            acc = -acc;
        }
        coeffs.push((j + 1, rational_to_f64(&acc)?));
    }
    PolySpec::new(Mode::Standard, 0.0, coeffs)
}

/// Series order that guarantees `|S_N(ρ) − S(ρ)| ≤ ε/2` when `κ` lower
/// bounds the nonzero spectrum: `N = ⌈ln(2/(εκ)) / ln(1/(1−κ))⌉`.
///
/// Values of `κ` above 1/2 clamp to 1/2; the bound only tightens.
pub fn entropy_truncation_order(epsilon: f64, kappa: f64) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "precision must be in (0, 1], got {epsilon}"
        )));
    }
    if kappa <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "minimal nonzero eigenvalue must be positive, got {kappa}"
        )));
    }
    let kappa = kappa.min(0.5);
    let n = ((2.0 / (epsilon * kappa)).ln() / (1.0 / (1.0 - kappa)).ln()).ceil();
    Ok((n as usize).max(1))
}

fn half_binomial(k: usize) -> BigRational {
    // C(1/2, k) = Π_{i=0}^{k−1} (1/2 − i) / k!
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for i in 0..k {
        num *= BigInt::from(1i64 - 2 * i as i64);
        den *= BigInt::from(2 * (i + 1));
    }
    BigRational::new(num, den)
}

/// Degree-`N` Taylor polynomial of `√x` about `x = 1`, expanded into
/// monomials.
///
/// The `x⁰` coefficient lands in the constant term (added classically);
/// powers `1..=N` are circuit-encoded. All coefficients sum to exactly 1
/// because the polynomial interpolates `√1`.
pub fn sqrt_taylor_spec(degree: usize) -> Result<PolySpec> {
    if degree < 1 {
        return Err(Error::InvalidArgument(
            "square-root series degree must be ≥ 1".into(),
        ));
    }
    if degree > MAX_SERIES_ORDER {
        return Err(Error::Numerical(format!(
            "square-root series degree {degree} exceeds the exact-arithmetic cap \
             {MAX_SERIES_ORDER}"
        )));
    }
    // Σ_k C(1/2,k)(x−1)^k, re-expanded: the x^i coefficient is
    // Σ_{k=i}^{N} C(1/2,k)·C(k,i)·(−1)^{k−i}.
    let mut monomial = vec![BigRational::zero(); degree + 1];
    for k in 0..=degree {
        let ck = half_binomial(k);
        for (i, slot) in monomial.iter_mut().enumerate().take(k + 1) {
            let mut term = &ck * BigRational::from_integer(big_binomial(k, i));
            if (k - i) % 2 == 1 {
                term = -term;
            }
            *slot += term;
        }
    }
    let const_term = rational_to_f64(&monomial[0])?;
    let coeffs: Vec<(usize, f64)> = monomial[1..]
        .iter()
        .enumerate()
        .map(|(i, r)| Ok((i + 1, rational_to_f64(r)?)))
        .collect::<Result<_>>()?;
    PolySpec::new(Mode::Standard, const_term, coeffs)
}

/// Smallest square-root series degree whose worst-case scalar error on
/// `[κ, 1]` is at most `ε/4`, capped at [`MAX_SERIES_ORDER`].
pub fn sqrt_degree_for(epsilon: f64, kappa: f64) -> Result<usize> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument("precision must be positive".into()));
    }
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "eigenvalue floor must be in (0, 1], got {kappa}"
        )));
    }
    let target = epsilon / 4.0;
    for degree in 1..=MAX_SERIES_ORDER {
        let spec = sqrt_taylor_spec(degree)?;
        let mut worst = 0.0f64;
        for g in 0..=2000 {
            let x = kappa + (1.0 - kappa) * g as f64 / 2000.0;
            worst = worst.max((spec.evaluate(x) - x.sqrt()).abs());
        }
        if worst <= target {
            return Ok(degree);
        }
    }
    Err(Error::Approximation(format!(
        "no square-root series of degree ≤ {MAX_SERIES_ORDER} reaches error {target:.3e} \
         on [{kappa}, 1]; the spectrum floor is too small"
    )))
}

/// A fitted step approximation together with its measured quality.
#[derive(Debug, Clone)]
pub struct StepFit {
    pub spec: PolySpec,
    /// Largest absolute deviation from the logistic target on the fit
    /// grid, transition zone excluded.
    pub residual: f64,
}

/// Uniform grid on [0, 1] with `count` points.
fn unit_grid(count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| i as f64 / (count - 1) as f64)
        .collect()
}

fn logistic(x: f64, beta: f64, steepness: f64) -> f64 {
    1.0 / (1.0 + (-steepness * (x - beta)).exp())
}

/// Solves the square system `a·x = b` in place by Gaussian elimination
/// with partial pivoting. Sized for the small normal systems the fits
/// produce.
fn solve_dense(a: &mut [Vec<f64>], b: &mut [f64]) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r1, &r2| a[r1][col].abs().partial_cmp(&a[r2][col].abs()).unwrap())
            .unwrap();
        if a[pivot][col].abs() < 1e-300 {
            return Err(Error::Numerical("singular normal system in fit".into()));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in (row + 1)..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

/// Weighted least squares `min Σ w_i (Σ_c basis[i][c]·a_c − y_i)²` via the
/// normal equations, with a small trace-scaled ridge so nearly collinear
/// columns stay solvable.
fn weighted_lsq(basis: &[Vec<f64>], y: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    let cols = basis[0].len();
    let mut ata = vec![vec![0.0; cols]; cols];
    let mut atb = vec![0.0; cols];
    for (i, row) in basis.iter().enumerate() {
        for c1 in 0..cols {
            let wr = w[i] * row[c1];
            atb[c1] += wr * y[i];
            for c2 in c1..cols {
                ata[c1][c2] += wr * row[c2];
            }
        }
    }
    for c1 in 0..cols {
        for c2 in 0..c1 {
            ata[c1][c2] = ata[c2][c1];
        }
    }
    let trace: f64 = (0..cols).map(|c| ata[c][c]).sum();
    let ridge = 1e-12 * trace / cols as f64;
    for (c, row) in ata.iter_mut().enumerate() {
        row[c] += ridge;
    }
    solve_dense(&mut ata, &mut atb)
}

/// Monomial coefficient rows of the shifted Chebyshev polynomials
/// `T_k(2x−1)` for `k = 0..=degree`, exact in integer arithmetic.
fn shifted_chebyshev_monomials(degree: usize) -> Vec<Vec<i128>> {
    let width = degree + 1;
    let mut rows: Vec<Vec<i128>> = Vec::with_capacity(width);
    let mut t0 = vec![0i128; width];
    t0[0] = 1;
    rows.push(t0);
    if degree == 0 {
        return rows;
    }
    let mut t1 = vec![0i128; width];
    t1[0] = -1;
    t1[1] = 2;
    rows.push(t1);
    for k in 2..=degree {
        // T_k = 2(2x−1)·T_{k−1} − T_{k−2}
        let mut next = vec![0i128; width];
        for i in 0..width {
            let prev = rows[k - 1][i];
            if i + 1 < width {
                next[i + 1] += 4 * prev;
            }
            next[i] -= 2 * prev;
            next[i] -= rows[k - 2][i];
        }
        rows.push(next);
    }
    rows
}

fn chebyshev_basis_row(x: f64, degree: usize) -> Vec<f64> {
    let y = 2.0 * x - 1.0;
    let mut row = Vec::with_capacity(degree + 1);
    row.push(1.0);
    if degree >= 1 {
        row.push(y);
    }
    for k in 2..=degree {
        let v = 2.0 * y * row[k - 1] - row[k - 2];
        row.push(v);
    }
    row
}

/// Least-squares step approximation for thresholding at `β`.
///
/// Fits a degree-`degree` polynomial (Chebyshev basis on [0, 1], converted
/// to monomials afterwards) to the logistic surrogate
/// `1/(1+exp(−s(x−β)))` on a 1001-point grid with the transition zone
/// `|x−β| < 2/s` masked out. Lawson reweighting pushes the fit toward
/// minimax on the kept points, and points well clear of the transition
/// carry extra static weight so the shelves stay flat.
///
/// The result reports the worst absolute deviation on the masked grid; a
/// residual above [`STEP_RESIDUAL_LIMIT`] is an error suggesting a higher
/// degree.
pub fn step_poly_spec(beta: f64, degree: usize, steepness: f64) -> Result<StepFit> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold must be inside (0, 1), got {beta}"
        )));
    }
    if degree < 4 {
        return Err(Error::InvalidArgument(
            "step fits need degree ≥ 4".into(),
        ));
    }
    if !(steepness > 0.0) {
        return Err(Error::InvalidArgument("steepness must be positive".into()));
    }
    let grid = unit_grid(1001);
    let kept: Vec<f64> = grid
        .iter()
        .copied()
        .filter(|x| (x - beta).abs() >= 2.0 / steepness)
        .collect();
    if kept.len() <= degree + 1 {
        return Err(Error::InvalidArgument(
            "transition zone swallows the whole grid; lower the steepness".into(),
        ));
    }
    let basis: Vec<Vec<f64>> = kept
        .iter()
        .map(|&x| chebyshev_basis_row(x, degree))
        .collect();
    let y: Vec<f64> = kept
        .iter()
        .map(|&x| logistic(x, beta, steepness))
        .collect();
    let profile: Vec<f64> = kept
        .iter()
        .map(|&x| {
            let dist = (x - beta).abs();
            if dist >= (6.0 / steepness).max(0.25) {
                2.4
            } else if dist >= 6.0 / steepness {
                1.6
            } else {
                1.0
            }
        })
        .collect();

    // Lawson reweighting converges to the approximation minimizing
    // max_i profile_i·|error_i|, because the profile multiplies into the
    // weight update every round. Shelf points therefore carry a fraction
    // of the transition-edge error, set by the profile ratios.
    let mut lawson = vec![1.0; kept.len()];
    let mut coeffs = Vec::new();
    for _ in 0..60 {
        coeffs = weighted_lsq(&basis, &y, &lawson)?;
        let mut total = 0.0;
        for (i, row) in basis.iter().enumerate() {
            let fit: f64 = row.iter().zip(&coeffs).map(|(b, c)| b * c).sum();
            lawson[i] *= profile[i] * (fit - y[i]).abs();
            total += lawson[i];
        }
        if total <= 0.0 {
            lawson = vec![1.0; kept.len()];
        } else {
            let mean = total / kept.len() as f64;
            for l in &mut lawson {
                *l /= mean;
            }
        }
    }

    let cheb_rows = shifted_chebyshev_monomials(degree);
    let mut monomial = vec![0.0; degree + 1];
    for (k, c) in coeffs.iter().enumerate() {
        for (i, slot) in monomial.iter_mut().enumerate() {
            *slot += c * cheb_rows[k][i] as f64;
        }
    }
    let spec = PolySpec::new(
        Mode::Standard,
        monomial[0],
        monomial[1..]
            .iter()
            .enumerate()
            .map(|(i, &a)| (i + 1, a)),
    )?;
    let residual = kept
        .iter()
        .map(|&x| (spec.evaluate(x) - logistic(x, beta, steepness)).abs())
        .fold(0.0f64, f64::max);
    if residual > STEP_RESIDUAL_LIMIT {
        return Err(Error::Approximation(format!(
            "step fit at threshold {beta} missed the grid by {residual:.4}; \
             raise the degree (got {degree})"
        )));
    }
    Ok(StepFit { spec, residual })
}

/// Knobs for the probe fit used inside the eigenvalue search.
///
/// The search needs shallower logistic targets, an asymmetric masked zone,
/// and above all small coefficient mass `γ`, so it runs a sparsity-seeking
/// variant of the step fit instead of [`step_poly_spec`].
#[derive(Debug, Clone)]
pub struct ProbeFitConfig {
    pub beta: f64,
    pub degree: usize,
    /// Logistic steepness; the search uses `2·degree`.
    pub steepness: f64,
    /// Masked zone in grid units: `[β − below, β + above]` is excluded.
    pub mask_below: f64,
    pub mask_above: f64,
    /// Residual ceiling a candidate fit must meet to be preferred.
    pub residual_cap: f64,
}

impl ProbeFitConfig {
    pub fn for_search(beta: f64, degree: usize) -> Self {
        let steepness = 2.0 * degree as f64;
        ProbeFitConfig {
            beta,
            degree,
            steepness,
            mask_below: 2.0 / steepness,
            mask_above: 4.0 / steepness,
            residual_cap: 0.09,
        }
    }
}

fn probe_irls_fit(
    basis: &[Vec<f64>],
    y: &[f64],
    lambda: f64,
    col_weights: &[f64],
) -> Result<Vec<f64>> {
    let cols = basis[0].len();
    let rows = basis.len();
    let mut coeffs = vec![0.0; cols];
    let mut lawson = vec![1.0; rows];
    for &eps in &[1e-2, 1e-4, 1e-6] {
        for _ in 0..100 {
            let mut ata = vec![vec![0.0; cols]; cols];
            let mut atb = vec![0.0; cols];
            for (i, row) in basis.iter().enumerate() {
                for c1 in 0..cols {
                    let wr = lawson[i] * row[c1];
                    atb[c1] += wr * y[i];
                    for c2 in c1..cols {
                        ata[c1][c2] += wr * row[c2];
                    }
                }
            }
            for c1 in 0..cols {
                for c2 in 0..c1 {
                    ata[c1][c2] = ata[c2][c1];
                }
            }
            // Reweighted L1 penalty on the coefficients: the diagonal term
            // lambda/( |a_c| + eps ) shrinks small coefficients toward zero
            // while leaving large ones nearly untouched.
            for c in 0..cols {
                ata[c][c] += lambda * col_weights[c] / (coeffs[c].abs() + eps);
            }
            coeffs = solve_dense(&mut ata, &mut atb)?;
            let mut total = 0.0;
            for (i, row) in basis.iter().enumerate() {
                let fit: f64 = row.iter().zip(&coeffs).map(|(b, c)| b * c).sum();
                lawson[i] *= (fit - y[i]).abs();
                total += lawson[i];
            }
            if total <= 0.0 {
                lawson = vec![1.0; rows];
            } else {
                let mean = total / rows as f64;
                for l in &mut lawson {
                    *l /= mean;
                }
            }
        }
    }
    Ok(coeffs)
}

/// Step fit tuned for sampled probing: minimizes coefficient mass subject
/// to a residual cap.
///
/// Works in the monomial basis directly and scans a ladder of sparsity
/// penalties, keeping the smallest-`γ` fit whose masked-grid residual
/// stays under the cap. Grid endpoints 0 and 1 are always kept so the
/// shelves are anchored even when the threshold sits near an edge. The
/// estimator variance of a probe scales with `γ²`, which is why the
/// search cannot use the plain least-squares fit.
pub fn step_probe_fit(config: &ProbeFitConfig) -> Result<StepFit> {
    let ProbeFitConfig {
        beta,
        degree,
        steepness,
        mask_below,
        mask_above,
        residual_cap,
    } = *config;
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold must be inside (0, 1), got {beta}"
        )));
    }
    if degree < 4 {
        return Err(Error::InvalidArgument("probe fits need degree ≥ 4".into()));
    }
    let grid = unit_grid(1001);
    let mut kept: Vec<f64> = grid
        .iter()
        .copied()
        .filter(|&x| x <= beta - mask_below || x >= beta + mask_above)
        .collect();
    if !kept.contains(&0.0) {
        kept.insert(0, 0.0);
    }
    if !kept.contains(&1.0) {
        kept.push(1.0);
    }
    if kept.len() <= degree + 1 {
        return Err(Error::InvalidArgument(
            "masked zone swallows the whole grid".into(),
        ));
    }
    let basis: Vec<Vec<f64>> = kept
        .iter()
        .map(|&x| {
            let mut row = Vec::with_capacity(degree + 1);
            let mut p = 1.0;
            for _ in 0..=degree {
                row.push(p);
                p *= x;
            }
            row
        })
        .collect();
    let y: Vec<f64> = kept
        .iter()
        .map(|&x| logistic(x, beta, steepness))
        .collect();
    // The constant coefficient is free: it is added classically and costs
    // no sampling variance, so the sparsity penalty exempts it.
    let mut col_weights = vec![1.0; degree + 1];
    col_weights[0] = 0.0;

    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    let mut fallback: Option<(Vec<f64>, f64)> = None;
    let mut lambda = 2f64.powi(-14);
    for _ in 0..16 {
        let coeffs = probe_irls_fit(&basis, &y, lambda, &col_weights)?;
        let gamma: f64 = coeffs[1..].iter().map(|c| c.abs()).sum();
        let residual = kept
            .iter()
            .map(|&x| {
                let mut fit = 0.0;
                for c in coeffs.iter().rev() {
                    fit = fit * x + c;
                }
                (fit - logistic(x, beta, steepness)).abs()
            })
            .fold(0.0f64, f64::max);
        if fallback.is_none() {
            fallback = Some((coeffs.clone(), residual));
        }
        if residual <= residual_cap && best.as_ref().map_or(true, |(g, _, _)| gamma < *g) {
            best = Some((gamma, coeffs, residual));
        }
        lambda *= 2.0;
    }
    let (coeffs, residual) = match best {
        Some((_, c, r)) => (c, r),
        None => fallback.expect("ladder produced at least one fit"),
    };
    let spec = PolySpec::new(
        Mode::Standard,
        coeffs[0],
        coeffs[1..].iter().enumerate().map(|(i, &a)| (i + 1, a)),
    )?;
    Ok(StepFit { spec, residual })
}

/// Hoeffding shot budget for a mean-of-±1 estimator scaled by `γ`:
/// `N = ⌈2γ²·ln(2/δ)/ε²⌉` shots give `|estimate − truth| ≤ ε` with
/// probability at least `1 − δ`.
pub fn shots_for(epsilon: f64, delta: f64, gamma: f64) -> Result<u64> {
    if !(epsilon > 0.0) || !(gamma > 0.0) {
        return Err(Error::InvalidArgument(
            "precision and normalization must be positive".into(),
        ));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "failure probability must be in (0, 1), got {delta}"
        )));
    }
    Ok((2.0 * gamma * gamma * (2.0 / delta).ln() / (epsilon * epsilon)).ceil() as u64)
}
