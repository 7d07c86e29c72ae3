//! Dense complex linear algebra at simulation scale.
//!
//! Everything here works on row-major [`ComplexMatrix`] values in double
//! precision. The centerpiece is a cyclic Jacobi eigensolver for Hermitian
//! matrices; around it sit Kronecker products, PSD square roots, trace
//! powers, and the cycle-permutation index maps that make `tr(P_k ρ^⊗n)`
//! computable without ever materializing `P_k`.

use crate::error::{Error, Result};

pub type Complex64 = num_complex::Complex<f64>;

/// Hard cap on the dimension of any dense matrix this crate will build.
///
/// Covers a 1024-dimensional joint register with headroom; beyond this the
/// analytic sampler path must be used.
pub const DENSE_DIM_CAP: usize = 4096;

/// Off-diagonal Frobenius norm (relative to `max(1, ‖A‖_F)`) at which the
/// Jacobi sweep is considered converged.
const JACOBI_TOL: f64 = 1e-12;

/// Maximum number of full Jacobi sweeps before giving up.
const JACOBI_SWEEP_CAP: usize = 100;

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Complex64>,
}

impl ComplexMatrix {
    /// All-zero matrix of the given shape.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    /// Identity of dimension `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    /// Builds a matrix from a row-major entry vector.
    pub fn from_vec(rows: usize, cols: usize, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    /// Square matrix with the given real numbers on the diagonal.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in diag.iter().enumerate() {
            m.set(i, i, Complex64::new(v, 0.0));
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.entries[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.entries[r * self.cols + c] = v;
    }

    /// Raw row-major entries.
    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// Matrix product `self · other`.
    pub fn mul(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = ComplexMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out.get(i, j) + a * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        Ok(out)
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c).conj());
            }
        }
        out
    }

    /// Entrywise sum.
    pub fn add(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "cannot add {}x{} to {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a + b)
            .collect();
        Ok(ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            entries,
        })
    }

    /// Scalar multiple.
    pub fn scale(&self, factor: Complex64) -> ComplexMatrix {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|e| e * factor).collect(),
        }
    }

    /// Trace (sum of diagonal entries).
    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    /// Frobenius norm.
    pub fn frobenius_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Entrywise comparison with an explicit absolute tolerance.
    pub fn approx_eq(&self, other: &ComplexMatrix, tol: f64) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|(a, b)| (a - b).norm() <= tol)
    }

    /// Largest absolute deviation from the conjugate transpose.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.rows {
            for c in 0..self.cols {
                let d = (self.get(r, c) - self.get(c, r).conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square() && self.hermiticity_defect() <= tol
    }
}

/// Full spectrum of a Hermitian matrix.
///
/// Eigenvalues are ascending; column `i` of `eigenvectors` is the
/// (unit-norm) eigenvector for `eigenvalues[i]`.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEigen {
    /// Rebuilds `V·diag(λ)·V†`; used by the reconstruction checks.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self.eigenvalues.len();
        let v = &self.eigenvectors;
        let mut out = ComplexMatrix::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for (k, &lam) in self.eigenvalues.iter().enumerate() {
                    acc += v.get(r, k) * lam * v.get(c, k).conj();
                }
                out.set(r, c, acc);
            }
        }
        out
    }

    /// Applies a real function to the spectrum: `V·diag(f(λ))·V†`.
    pub fn map_eigenvalues(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let mapped = HermitianEigen {
            eigenvalues: self.eigenvalues.iter().map(|&l| f(l)).collect(),
            eigenvectors: self.eigenvectors.clone(),
        };
        mapped.reconstruct()
    }
}

/// Sum of squared magnitudes of the strictly off-diagonal entries.
fn off_diagonal_sq(a: &ComplexMatrix) -> f64 {
    let n = a.rows();
    let mut acc = 0.0;
    for r in 0..n {
        for c in 0..n {
            if r != c {
                acc += a.get(r, c).norm_sqr();
            }
        }
    }
    acc
}

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi sweeps.
///
/// Each sweep visits every upper-triangle pair `(p, q)` and applies the
/// complex rotation that zeroes `A[p][q]`. Sweeps repeat until the
/// off-diagonal Frobenius norm drops below `1e-12` relative to the input
/// scale, or the sweep cap trips.
pub fn hermitian_eig(m: &ComplexMatrix) -> Result<HermitianEigen> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if !m.is_hermitian(1e-10) {
        return Err(Error::Validation(format!(
            "matrix is not Hermitian (defect {:.3e})",
            m.hermiticity_defect()
        )));
    }
    let n = m.rows();
    let mut a = m.clone();
    // Symmetrize exactly so rounding in the input cannot leak through the
    // rotations.
    for r in 0..n {
        a.set(r, r, Complex64::new(a.get(r, r).re, 0.0));
        for c in (r + 1)..n {
            let avg = (a.get(r, c) + a.get(c, r).conj()) * 0.5;
            a.set(r, c, avg);
            a.set(c, r, avg.conj());
        }
    }
    let mut v = ComplexMatrix::identity(n);
    let threshold = JACOBI_TOL * m.frobenius_norm().max(1.0);

    let mut converged = n <= 1;
    for _sweep in 0..JACOBI_SWEEP_CAP {
        if off_diagonal_sq(&a).sqrt() <= threshold {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq.norm() <= threshold / (n as f64) {
                    continue;
                }
                // 2x2 Hermitian block rotation: phase out the off-diagonal
                // entry, then rotate like the real symmetric case.
                let phi = apq.arg();
                let abs_b = apq.norm();
                let tau = (a.get(p, p).re - a.get(q, q).re) / (2.0 * abs_b);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let e_pos = Complex64::from_polar(1.0, phi);
                let e_neg = e_pos.conj();

                // Column update (A ← A·R).
                for r in 0..n {
                    let arp = a.get(r, p);
                    let arq = a.get(r, q);
                    a.set(r, p, arp * c + arq * (s * e_neg));
                    a.set(r, q, arq * c - arp * (s * e_pos));
                }
                // Row update (A ← R†·A).
                for col in 0..n {
                    let apc = a.get(p, col);
                    let aqc = a.get(q, col);
                    a.set(p, col, apc * c + aqc * (s * e_pos));
                    a.set(q, col, aqc * c - apc * (s * e_neg));
                }
                // Accumulate the eigenvector basis (V ← V·R).
                for r in 0..n {
                    let vrp = v.get(r, p);
                    let vrq = v.get(r, q);
                    v.set(r, p, vrp * c + vrq * (s * e_neg));
                    v.set(r, q, vrq * c - vrp * (s * e_pos));
                }
            }
        }
    }
    if !converged && off_diagonal_sq(&a).sqrt() > threshold {
        return Err(Error::Numerical(format!(
            "Jacobi sweeps did not converge within {JACOBI_SWEEP_CAP} passes \
             (off-diagonal norm {:.3e})",
            off_diagonal_sq(&a).sqrt()
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a.get(i, i).re).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).unwrap());

    let eigenvalues: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let mut eigenvectors = ComplexMatrix::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..n {
            eigenvectors.set(r, new_col, v.get(r, old_col));
        }
    }
    Ok(HermitianEigen {
        eigenvalues,
        eigenvectors,
    })
}

/// Hermitian PSD square root via the spectrum.
///
/// Eigenvalues in `[−1e-10, 0)` are treated as rounding noise and clamped to
/// zero; anything more negative is a genuine PSD violation.
pub fn matrix_sqrt_psd(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(m)?;
    if let Some(&worst) = eig
        .eigenvalues
        .iter()
        .find(|&&l| l < -1e-10)
    {
        return Err(Error::Validation(format!(
            "matrix is not positive semidefinite (eigenvalue {worst:.3e})"
        )));
    }
    Ok(eig.map_eigenvalues(|l| l.max(0.0).sqrt()))
}

/// `tr(m^j)` by repeated multiplication.
pub fn matrix_power_trace(m: &ComplexMatrix, j: usize) -> Result<Complex64> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(
            "trace power needs a square matrix".into(),
        ));
    }
    if j == 0 {
        return Err(Error::InvalidArgument("power must be ≥ 1".into()));
    }
    let mut acc = m.clone();
    for _ in 1..j {
        acc = acc.mul(m)?;
    }
    Ok(acc.trace())
}

/// Kronecker product of the factors in list order.
///
/// The result dimension is the product of the factor dimensions and must
/// stay within [`DENSE_DIM_CAP`].
pub fn kron_list(factors: &[ComplexMatrix]) -> Result<ComplexMatrix> {
    if factors.is_empty() {
        return Err(Error::InvalidArgument(
            "kron_list needs at least one factor".into(),
        ));
    }
    for f in factors {
        if !f.is_square() {
            return Err(Error::DimensionMismatch(
                "kron_list factors must be square".into(),
            ));
        }
    }
    let mut total: usize = 1;
    for f in factors {
        total = total
            .checked_mul(f.rows())
            .filter(|&t| t <= DENSE_DIM_CAP)
            .ok_or(Error::CapacityExceeded {
                required: factors.iter().map(ComplexMatrix::rows).product(),
                cap: DENSE_DIM_CAP,
            })?;
    }
    let mut acc = factors[0].clone();
    for f in &factors[1..] {
        acc = kron_pair(&acc, f);
    }
    Ok(acc)
}

fn kron_pair(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (ar, ac) = (a.rows(), a.cols());
    let (br, bc) = (b.rows(), b.cols());
    let mut out = ComplexMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a.get(i, j);
            if aij.norm_sqr() == 0.0 {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out.set(i * br + k, j * bc + l, aij * b.get(k, l));
                }
            }
        }
    }
    out
}

/// Image of a basis index under the cycle permutation `P_k` on `n` factors
/// of local dimension `d`.
///
/// Indices decompose big-endian: the first tensor factor is the most
/// significant digit. `P_k` shifts the first `k` factors cyclically so that
/// factor `i` receives the content of factor `i+1` (the first factor's
/// content wraps to position `k−1`); factors `k..n` are untouched. Applying
/// the map `k` times is the identity.
pub fn cycle_permutation_apply(state_index: usize, k: usize, n: usize, d: usize) -> Result<usize> {
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "cycle length k={k} must satisfy 1 ≤ k ≤ n={n}"
        )));
    }
    let dim = d
        .checked_pow(n as u32)
        .ok_or_else(|| Error::InvalidArgument("d^n overflows".into()))?;
    if state_index >= dim {
        return Err(Error::InvalidArgument(format!(
            "index {state_index} out of range for dimension {dim}"
        )));
    }
    // Decompose into n base-d digits, most significant first.
    let mut digits = vec![0usize; n];
    let mut rem = state_index;
    for slot in (0..n).rev() {
        digits[slot] = rem % d;
        rem /= d;
    }
    let mut shifted = digits.clone();
    for i in 0..k {
        shifted[i] = digits[(i + 1) % k];
    }
    let mut out = 0usize;
    for &dig in &shifted {
        out = out * d + dig;
    }
    Ok(out)
}

/// Dense matrix form of the cycle permutation, for oracle-style checks.
///
/// Sparse index remapping is how the simulator applies permutations; this
/// dense form exists so tests can take literal traces against it.
pub fn cycle_permutation_matrix(k: usize, n: usize, d: usize) -> Result<ComplexMatrix> {
    let dim = d
        .checked_pow(n as u32)
        .filter(|&t| t <= DENSE_DIM_CAP)
        .ok_or(Error::CapacityExceeded {
            required: usize::MAX,
            cap: DENSE_DIM_CAP,
        })?;
    let mut m = ComplexMatrix::zeros(dim, dim);
    for idx in 0..dim {
        let target = cycle_permutation_apply(idx, k, n, d)?;
        m.set(target, idx, Complex64::new(1.0, 0.0));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(n, n);
        for r in 0..n {
            m.set(r, r, c(rng.gen::<f64>() - 0.5, 0.0));
            for col in (r + 1)..n {
                let v = c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
                m.set(r, col, v);
                m.set(col, r, v.conj());
            }
        }
        m
    }

    fn pauli_x() -> ComplexMatrix {
        ComplexMatrix::from_vec(2, 2, vec![c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]).unwrap()
    }

    fn pauli_z() -> ComplexMatrix {
        ComplexMatrix::from_diagonal(&[1.0, -1.0])
    }

    #[test]
    fn kron_identity_cases() {
        let i2 = ComplexMatrix::identity(2);
        assert!(kron_list(&[i2.clone()]).unwrap().approx_eq(&i2, 0.0));
        let i4 = ComplexMatrix::identity(4);
        assert!(kron_list(&[i2.clone(), i2]).unwrap().approx_eq(&i4, 0.0));
    }

    #[test]
    fn kron_against_index_formula() {
        // Oracle: (A ⊗ B)[i·rb + k][j·cb + l] = A[i][j]·B[k][l], built
        // entry by entry, independent of kron_pair's loop order.
        let a = pauli_x();
        let b = pauli_z();
        let got = kron_list(&[a.clone(), b.clone()]).unwrap();
        let mut want = ComplexMatrix::zeros(4, 4);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        want.set(i * 2 + k, j * 2 + l, a.get(i, j) * b.get(k, l));
                    }
                }
            }
        }
        assert!(got.approx_eq(&want, 0.0));
        // Basis action: (X ⊗ Z)|00⟩ = |10⟩, i.e. column 0 has its single
        // nonzero entry at row 2.
        for r in 0..4 {
            let expect = if r == 2 { 1.0 } else { 0.0 };
            assert_eq!(got.get(r, 0), c(expect, 0.0));
        }
    }

    #[test]
    fn kron_capacity_error() {
        let big = ComplexMatrix::identity(64);
        let err = kron_list(&[big.clone(), big.clone(), big]).unwrap_err();
        assert!(matches!(err, Error::CapacityExceeded { .. }));
    }

    #[test]
    fn eig_diagonal_and_pauli() {
        let eig = hermitian_eig(&ComplexMatrix::from_diagonal(&[0.75, 0.25])).unwrap();
        assert!((eig.eigenvalues[0] - 0.25).abs() < 1e-12);
        assert!((eig.eigenvalues[1] - 0.75).abs() < 1e-12);

        let eig = hermitian_eig(&pauli_x()).unwrap();
        assert!((eig.eigenvalues[0] + 1.0).abs() < 1e-12);
        assert!((eig.eigenvalues[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eig_2x2_matches_quadratic_formula() {
        // Closed-form oracle: eigenvalues of [[a, b], [b*, d]] are
        // (a+d)/2 ± sqrt(((a−d)/2)² + |b|²).
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let m = random_hermitian(2, &mut rng);
            let a = m.get(0, 0).re;
            let d = m.get(1, 1).re;
            let b = m.get(0, 1);
            let mid = 0.5 * (a + d);
            let rad = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
            let eig = hermitian_eig(&m).unwrap();
            assert!((eig.eigenvalues[0] - (mid - rad)).abs() < 1e-10);
            assert!((eig.eigenvalues[1] - (mid + rad)).abs() < 1e-10);
        }
    }

    #[test]
    fn eig_reconstruction_and_orthonormality() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &n in &[2usize, 3, 5, 8, 16] {
            let m = random_hermitian(n, &mut rng);
            let eig = hermitian_eig(&m).unwrap();
            assert!(
                eig.reconstruct().approx_eq(&m, 1e-9),
                "reconstruction failed at n={n}"
            );
            let gram = eig.eigenvectors.dagger().mul(&eig.eigenvectors).unwrap();
            assert!(
                gram.approx_eq(&ComplexMatrix::identity(n), 1e-10),
                "eigenvectors not orthonormal at n={n}"
            );
            for w in eig.eigenvalues.windows(2) {
                assert!(w[0] <= w[1] + 1e-12, "eigenvalues not ascending");
            }
        }
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = ComplexMatrix::from_vec(2, 2, vec![c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)])
            .unwrap();
        assert!(matches!(hermitian_eig(&m), Err(Error::Validation(_))));
    }

    #[test]
    fn sqrt_psd_cases() {
        let i2 = ComplexMatrix::identity(2);
        assert!(matrix_sqrt_psd(&i2).unwrap().approx_eq(&i2, 1e-12));

        let m = ComplexMatrix::from_diagonal(&[4.0, 9.0]);
        let want = ComplexMatrix::from_diagonal(&[2.0, 3.0]);
        assert!(matrix_sqrt_psd(&m).unwrap().approx_eq(&want, 1e-10));

        // Rank-1 projector: idempotent, so it is its own square root. The
        // tolerance allows for sqrt amplifying O(1e-16) noise eigenvalues
        // to O(1e-8).
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let raw = [
            c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5),
            c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5),
            c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5),
        ];
        let norm = raw.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let mut proj = ComplexMatrix::zeros(3, 3);
        for r in 0..3 {
            for col in 0..3 {
                proj.set(r, col, raw[r] / norm * (raw[col] / norm).conj());
            }
        }
        assert!(matrix_sqrt_psd(&proj).unwrap().approx_eq(&proj, 1e-7));
    }

    #[test]
    fn sqrt_psd_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let g = random_hermitian(4, &mut rng);
            let psd = g.mul(&g).unwrap();
            let root = matrix_sqrt_psd(&psd).unwrap();
            assert!(root.mul(&root).unwrap().approx_eq(&psd, 1e-8));
        }
    }

    #[test]
    fn sqrt_psd_rejects_negative() {
        let m = ComplexMatrix::from_diagonal(&[1.0, -0.5]);
        assert!(matrix_sqrt_psd(&m).is_err());
    }

    #[test]
    fn trace_powers() {
        let half = ComplexMatrix::from_diagonal(&[0.5, 0.5]);
        let t3 = matrix_power_trace(&half, 3).unwrap();
        assert!((t3.re - 0.25).abs() < 1e-14 && t3.im.abs() < 1e-14);

        // Eigenvalue oracle at j=2.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let m = random_hermitian(2, &mut rng);
        let eig = hermitian_eig(&m).unwrap();
        let want: f64 = eig.eigenvalues.iter().map(|l| l * l).sum();
        let got = matrix_power_trace(&m, 2).unwrap();
        assert!((got.re - want).abs() < 1e-10 && got.im.abs() < 1e-10);
    }

    #[test]
    fn cycle_permutation_small_cases() {
        // P_1 is the identity.
        for idx in 0..8 {
            assert_eq!(cycle_permutation_apply(idx, 1, 3, 2).unwrap(), idx);
        }
        // d=2, n=2, k=2: the SWAP. |01⟩ (index 1) ↦ |10⟩ (index 2).
        assert_eq!(cycle_permutation_apply(1, 2, 2, 2).unwrap(), 2);
        assert_eq!(cycle_permutation_apply(2, 2, 2, 2).unwrap(), 1);
        assert_eq!(cycle_permutation_apply(0, 2, 2, 2).unwrap(), 0);
        assert_eq!(cycle_permutation_apply(3, 2, 2, 2).unwrap(), 3);
    }

    #[test]
    fn cycle_permutation_order() {
        // Applying P_k k times returns every index to itself.
        for (d, n, k) in [(2usize, 3usize, 3usize), (3, 3, 2), (2, 4, 4)] {
            for idx in 0..d.pow(n as u32) {
                let mut cur = idx;
                for _ in 0..k {
                    cur = cycle_permutation_apply(cur, k, n, d).unwrap();
                }
                assert_eq!(cur, idx, "P_{k} has wrong order at d={d}, n={n}");
            }
        }
    }

    #[test]
    fn permutation_matrix_is_unitary() {
        let p = cycle_permutation_matrix(3, 3, 2).unwrap();
        let prod = p.mul(&p.dagger()).unwrap();
        assert!(prod.approx_eq(&ComplexMatrix::identity(8), 0.0));
    }

    #[test]
    fn permutation_traces_product_of_factors() {
        // tr(P_m · A_1 ⊗ … ⊗ A_m) = tr(A_1·A_2·…·A_m): the identity that
        // makes the whole framework tick, checked on random non-Hermitian
        // factors so the convention (not just the spectrum) is pinned.
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut factors = Vec::new();
        for _ in 0..3 {
            let mut f = ComplexMatrix::zeros(2, 2);
            for r in 0..2 {
                for col in 0..2 {
                    f.set(r, col, c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
                }
            }
            factors.push(f);
        }
        let p = cycle_permutation_matrix(3, 3, 2).unwrap();
        let prod_tensor = kron_list(&factors).unwrap();
        let got = p.mul(&prod_tensor).unwrap().trace();
        let want = factors[0]
            .mul(&factors[1])
            .unwrap()
            .mul(&factors[2])
            .unwrap()
            .trace();
        assert!((got - want).norm() < 1e-12);
    }
}
