//! Density-matrix simulation of the measurement circuit.
//!
//! The joint register is A′ ⊗ A ⊗ B: a signal qubit, an `n`-dimensional
//! control holding the coefficient amplitudes, and `b_copies` copies of the
//! input state. The circuit applies the preparation unitary to A, then per
//! branch `j` a Y-rotation on A′ conditioned on A = |j−1⟩ followed by the
//! cycle permutation `P_j` on B conditioned additionally on A′ = |1⟩.
//! Measuring X on A′ afterwards has expectation `Σ_j α_j tr(ρ^j)/γ`.
//!
//! Everything here is exact (up to rounding): the full output density
//! matrix is materialized, so dimensions are capped. Beyond the cap the
//! analytic [`joint_distribution`] carries the same statistics at any size.

use crate::coefficients::{Mode, PolySpec};
use crate::error::{Error, Result};
use crate::linalg::{cycle_permutation_apply, kron_list, Complex64, ComplexMatrix, DENSE_DIM_CAP};
use crate::stateprep::PrepCircuit;
use crate::states::{trace_power, DensityMatrix};

/// Shape of the joint register for one spec/state pairing.
///
/// The control dimension is the padded branch count `n`; the copy register
/// holds only as many copies as the highest power actually encoded, since
/// zero-coefficient branches never touch B.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterLayout {
    a_dim: usize,
    b_local_dim: usize,
    b_copies: usize,
    b_dim: usize,
    total_dim: usize,
}

impl RegisterLayout {
    pub fn for_spec(spec: &PolySpec, d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidArgument(format!(
                "local dimension {d} is not a valid state dimension"
            )));
        }
        let a_dim = spec.degree();
        debug_assert!(a_dim.is_power_of_two());
        let b_copies = spec.max_power();
        let over_cap = Error::CapacityExceeded {
            required: usize::MAX,
            cap: DENSE_DIM_CAP,
        };
        let b_dim = d.checked_pow(b_copies as u32).ok_or(over_cap)?;
        let total_dim = b_dim
            .checked_mul(a_dim)
            .and_then(|t| t.checked_mul(2))
            .ok_or(Error::CapacityExceeded {
                required: usize::MAX,
                cap: DENSE_DIM_CAP,
            })?;
        if total_dim > DENSE_DIM_CAP {
            return Err(Error::CapacityExceeded {
                required: total_dim,
                cap: DENSE_DIM_CAP,
            });
        }
        Ok(Self {
            a_dim,
            b_local_dim: d,
            b_copies,
            b_dim,
            total_dim,
        })
    }

    pub fn aprime_dim(&self) -> usize {
        2
    }

    /// Branch count `n` of the control register.
    pub fn a_dim(&self) -> usize {
        self.a_dim
    }

    pub fn b_local_dim(&self) -> usize {
        self.b_local_dim
    }

    pub fn b_copies(&self) -> usize {
        self.b_copies
    }

    /// Dimension `d^b_copies` of the copy register.
    pub fn b_dim(&self) -> usize {
        self.b_dim
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    /// Flat basis index with A′ most significant, then A, then B.
    pub fn index(&self, aprime: usize, a: usize, b: usize) -> usize {
        debug_assert!(aprime < 2 && a < self.a_dim && b < self.b_dim);
        (aprime * self.a_dim + a) * self.b_dim + b
    }
}

enum Gate {
    /// The preparation unitary on register A.
    Prep(ComplexMatrix),
    /// `Ry(θ)` on A′, conditioned on A = |branch−1⟩.
    BranchRotation { branch: usize, theta: f64 },
    /// Cycle permutation on B, conditioned on A′ = |1⟩ and A = |branch−1⟩.
    /// `map[b]` is the image index of `b`.
    BranchCycle { branch: usize, map: Vec<usize> },
}

fn gate_sequence(
    spec: &PolySpec,
    prep: &PrepCircuit,
    layout: &RegisterLayout,
) -> Result<Vec<Gate>> {
    if prep.unitary().rows() != layout.a_dim {
        return Err(Error::DimensionMismatch(format!(
            "preparation acts on dimension {}, control register has dimension {}",
            prep.unitary().rows(),
            layout.a_dim
        )));
    }
    let mut gates = vec![Gate::Prep(prep.unitary().clone())];
    for j in 1..=layout.a_dim {
        if spec.alpha(j) == 0.0 {
            continue;
        }
        gates.push(Gate::BranchRotation {
            branch: j,
            theta: spec.theta(j),
        });
        if j >= 2 {
            let map = (0..layout.b_dim)
                .map(|b| cycle_permutation_apply(b, j, layout.b_copies, layout.b_local_dim))
                .collect::<Result<Vec<_>>>()?;
            gates.push(Gate::BranchCycle { branch: j, map });
        }
    }
    Ok(gates)
}

/// Applies one gate to a statevector. With `conjugate` set, the complex
/// conjugate of the gate is applied instead; feeding each row of a density
/// matrix through the conjugated gate realizes right-multiplication by the
/// gate's adjoint.
fn apply_gate_vec(gate: &Gate, layout: &RegisterLayout, psi: &mut [Complex64], conjugate: bool) {
    match gate {
        Gate::Prep(v) => {
            let n = layout.a_dim;
            let b_dim = layout.b_dim;
            let mut x = vec![Complex64::new(0.0, 0.0); n];
            for aprime in 0..2 {
                for b in 0..b_dim {
                    let base = aprime * n * b_dim + b;
                    for (a, slot) in x.iter_mut().enumerate() {
                        *slot = psi[base + a * b_dim];
                    }
                    for r in 0..n {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for (a, &xa) in x.iter().enumerate() {
                            let g = v.get(r, a);
                            acc += if conjugate { g.conj() * xa } else { g * xa };
                        }
                        psi[base + r * b_dim] = acc;
                    }
                }
            }
        }
        Gate::BranchRotation { branch, theta } => {
            let (s, c) = (theta / 2.0).sin_cos();
            let b_dim = layout.b_dim;
            let half = layout.a_dim * b_dim;
            let base = (branch - 1) * b_dim;
            for b in 0..b_dim {
                let x0 = psi[base + b];
                let x1 = psi[half + base + b];
                psi[base + b] = x0 * c - x1 * s;
                psi[half + base + b] = x0 * s + x1 * c;
            }
        }
        Gate::BranchCycle { branch, map } => {
            let b_dim = layout.b_dim;
            let base = layout.a_dim * b_dim + (branch - 1) * b_dim;
            let mut scratch = vec![Complex64::new(0.0, 0.0); b_dim];
            for (b, &target) in map.iter().enumerate() {
                scratch[target] = psi[base + b];
            }
            psi[base..base + b_dim].copy_from_slice(&scratch);
        }
    }
}

fn apply_gate_matrix(gate: &Gate, layout: &RegisterLayout, m: &mut ComplexMatrix) {
    let dim = layout.total_dim;
    let mut buf = vec![Complex64::new(0.0, 0.0); dim];
    for c in 0..dim {
        for (r, slot) in buf.iter_mut().enumerate() {
            *slot = m.get(r, c);
        }
        apply_gate_vec(gate, layout, &mut buf, false);
        for (r, &v) in buf.iter().enumerate() {
            m.set(r, c, v);
        }
    }
    for r in 0..dim {
        for (c, slot) in buf.iter_mut().enumerate() {
            *slot = m.get(r, c);
        }
        apply_gate_vec(gate, layout, &mut buf, true);
        for (c, &v) in buf.iter().enumerate() {
            m.set(r, c, v);
        }
    }
}

/// The evolved joint density matrix together with its register layout.
#[derive(Debug, Clone)]
pub struct JointState {
    layout: RegisterLayout,
    matrix: ComplexMatrix,
}

impl JointState {
    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// Expectation of Pauli X on the signal qubit: `tr[(X ⊗ I)·state]`.
    /// Equals `Σ_j α_j tr(ρ^j)/γ` in standard mode.
    pub fn expectation_x(&self) -> f64 {
        let half = self.layout.total_dim / 2;
        let mut acc = 0.0;
        for i in 0..self.layout.total_dim {
            let flipped = if i < half { i + half } else { i - half };
            acc += self.matrix.get(flipped, i).re;
        }
        acc
    }

    /// Joint outcome table from projective measurement of X on A′ and the
    /// branch index on A, read directly off the evolved matrix.
    pub fn measure_joint(&self) -> Result<JointDistribution> {
        let n = self.layout.a_dim;
        let b_dim = self.layout.b_dim;
        let mut probs = vec![[0.0f64; 2]; n];
        for j in 1..=n {
            let mut plus = 0.0;
            let mut minus = 0.0;
            for b in 0..b_dim {
                let i0 = self.layout.index(0, j - 1, b);
                let i1 = self.layout.index(1, j - 1, b);
                let diag = self.matrix.get(i0, i0).re + self.matrix.get(i1, i1).re;
                let cross = 2.0 * self.matrix.get(i0, i1).re;
                plus += 0.5 * (diag + cross);
                minus += 0.5 * (diag - cross);
            }
            probs[j - 1] = [plus, minus];
        }
        JointDistribution::new(probs)
    }
}

/// Exact joint probability table over (branch outcome `j`, X outcome ±1).
#[derive(Debug, Clone)]
pub struct JointDistribution {
    probs: Vec<[f64; 2]>,
}

impl JointDistribution {
    /// Validates and clamps a raw table: entries may undershoot zero by at
    /// most 1e-12 (rounding), and the total mass must be 1 within 1e-10.
    pub fn new(mut probs: Vec<[f64; 2]>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidArgument("empty outcome table".into()));
        }
        let mut sum = 0.0;
        for row in probs.iter_mut() {
            for p in row.iter_mut() {
                if *p < -1e-12 {
                    return Err(Error::Validation(format!(
                        "negative probability {p} in joint table"
                    )));
                }
                if *p < 0.0 {
                    *p = 0.0;
                }
                sum += *p;
            }
        }
        if (sum - 1.0).abs() > 1e-10 {
            return Err(Error::Validation(format!(
                "joint table mass {sum} is not 1"
            )));
        }
        Ok(Self { probs })
    }

    /// Number of branches `n`.
    pub fn branches(&self) -> usize {
        self.probs.len()
    }

    /// `P(j, x)` for branch `j` in `1..=n` and `x = ±1`.
    pub fn prob(&self, j: usize, x: i8) -> f64 {
        let row = self.probs[j - 1];
        if x >= 0 {
            row[0]
        } else {
            row[1]
        }
    }

    /// Branch marginal `P(j)`.
    pub fn marginal(&self, j: usize) -> f64 {
        let row = self.probs[j - 1];
        row[0] + row[1]
    }

    /// Conditional `P(+1 | j)`; an unreachable branch reads as a fair coin.
    pub fn conditional_plus(&self, j: usize) -> f64 {
        let row = self.probs[j - 1];
        let mass = row[0] + row[1];
        if mass <= 0.0 {
            0.5
        } else {
            row[0] / mass
        }
    }

    /// `Σ_j [P(j,+1) − P(j,−1)]`, the X expectation implied by the table.
    pub fn expectation(&self) -> f64 {
        self.probs.iter().map(|row| row[0] - row[1]).sum()
    }

    /// Rows of the table in branch order, `[P(j,+1), P(j,−1)]`.
    pub fn rows(&self) -> &[[f64; 2]] {
        &self.probs
    }
}

/// Evolves `|0⟩⟨0|^⊗(m) ⊗ ρ^⊗b_copies` through the full circuit.
///
/// `prep` is expected to carry the spec's branch amplitudes (or the
/// Hadamard wall in variant mode); an imperfect preparation is accepted
/// and simply shifts the output statistics by its infidelity.
pub fn simulate_full(
    spec: &PolySpec,
    rho: &DensityMatrix,
    prep: &PrepCircuit,
) -> Result<JointState> {
    let layout = RegisterLayout::for_spec(spec, rho.dim())?;
    let gates = gate_sequence(spec, prep, &layout)?;
    let factors = vec![rho.matrix().clone(); layout.b_copies];
    let rho_copies = kron_list(&factors)?;
    let mut matrix = ComplexMatrix::zeros(layout.total_dim, layout.total_dim);
    for b in 0..layout.b_dim {
        for b2 in 0..layout.b_dim {
            matrix.set(
                layout.index(0, 0, b),
                layout.index(0, 0, b2),
                rho_copies.get(b, b2),
            );
        }
    }
    for gate in &gates {
        apply_gate_matrix(gate, &layout, &mut matrix);
    }
    Ok(JointState { layout, matrix })
}

/// The circuit's unitary assembled column by column, for direct
/// oracle-style checks against its defining product form.
pub fn assemble_unitary(
    spec: &PolySpec,
    d: usize,
    prep: &PrepCircuit,
) -> Result<ComplexMatrix> {
    let layout = RegisterLayout::for_spec(spec, d)?;
    let gates = gate_sequence(spec, prep, &layout)?;
    let dim = layout.total_dim;
    let mut u = ComplexMatrix::zeros(dim, dim);
    let mut psi = vec![Complex64::new(0.0, 0.0); dim];
    for col in 0..dim {
        psi.fill(Complex64::new(0.0, 0.0));
        psi[col] = Complex64::new(1.0, 0.0);
        for gate in &gates {
            apply_gate_vec(gate, &layout, &mut psi, false);
        }
        for (r, &v) in psi.iter().enumerate() {
            u.set(r, col, v);
        }
    }
    Ok(u)
}

/// Analytic joint table built from supplied per-power statistics, where
/// `atoms[j−1]` stands in for `tr(ρ^j)`. This is how fidelity estimation
/// reuses the machinery with `tr[(ρσ)^k]` atoms.
pub fn joint_distribution_from_powers(spec: &PolySpec, atoms: &[f64]) -> Result<JointDistribution> {
    let n = spec.degree();
    if atoms.len() < n {
        return Err(Error::InvalidArgument(format!(
            "need {n} per-power values, got {}",
            atoms.len()
        )));
    }
    let branch = spec.branch_distribution();
    let mut probs = vec![[0.0f64; 2]; n];
    for j in 1..=n {
        let t = atoms[j - 1];
        if t.abs() > 1.0 + 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "per-power value {t} for power {j} is outside [-1, 1]"
            )));
        }
        let t = t.clamp(-1.0, 1.0);
        let plus = 0.5 * (1.0 + spec.theta(j).sin() * t);
        probs[j - 1] = [branch[j - 1] * plus, branch[j - 1] * (1.0 - plus)];
    }
    JointDistribution::new(probs)
}

/// Analytic joint table for a state: branch `j` occurs with probability
/// `|α_j|/γ` (standard) or `1/n` (variant), and conditionally the X
/// outcome is `+1` with probability `(1 + sin θ_j · tr(ρ^j))/2`. Agrees
/// with [`JointState::measure_joint`] wherever the dense path fits.
pub fn joint_distribution(spec: &PolySpec, rho: &DensityMatrix) -> Result<JointDistribution> {
    let atoms = (1..=spec.degree())
        .map(|j| trace_power(rho, j))
        .collect::<Result<Vec<f64>>>()?;
    joint_distribution_from_powers(spec, &atoms)
}

/// X expectation of the variant circuit: `Σ_j sin(θ_j)·tr(ρ^j)/n`.
/// Multiplying by the variant scale `n·γ` recovers the encoded polynomial.
pub fn variant_expectation(spec: &PolySpec, rho: &DensityMatrix) -> Result<f64> {
    if spec.mode() != Mode::Variant {
        return Err(Error::InvalidArgument(
            "variant expectation requires a variant-mode spec".into(),
        ));
    }
    let n = spec.degree() as f64;
    let mut acc = 0.0;
    for j in 1..=spec.degree() {
        acc += spec.theta(j).sin() * trace_power(rho, j)? / n;
    }
    Ok(acc)
}
