//! Preparation of the control-register amplitude state.
//!
//! The circuit needs register A started in `Σ_j √(|α_j|/γ)|j−1⟩`. Three
//! ways to get there: an exact unitary completion of the target column, a
//! trained parameterized circuit (layers of Y-rotations plus a ring of
//! controlled-NOTs), or a plain Hadamard wall for the variant protocol
//! where the amplitudes are uniform by design.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::coefficients::PolySpec;
use crate::error::{Error, Result};
use crate::linalg::{Complex64, ComplexMatrix};

/// Which construction produced a [`PrepCircuit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrepKind {
    Exact,
    Pqc,
    Hadamard,
}

/// A realized preparation unitary on `log₂ n` qubits, with the infidelity
/// of its first column against the intended amplitudes.
#[derive(Debug, Clone)]
pub struct PrepCircuit {
    kind: PrepKind,
    qubits: usize,
    unitary: ComplexMatrix,
    infidelity: f64,
}

impl PrepCircuit {
    pub fn kind(&self) -> PrepKind {
        self.kind
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    /// The `n × n` unitary applied to register A.
    pub fn unitary(&self) -> &ComplexMatrix {
        &self.unitary
    }

    /// First column of the unitary: the state actually prepared.
    pub fn amplitudes(&self) -> Vec<Complex64> {
        (0..self.unitary.rows())
            .map(|r| self.unitary.get(r, 0))
            .collect()
    }

    /// `1 − |⟨target|prepared⟩|²` as measured at construction. Zero for
    /// exact and Hadamard preparations.
    pub fn infidelity(&self) -> f64 {
        self.infidelity
    }
}

fn check_power_of_two(len: usize) -> Result<usize> {
    if len == 0 || !len.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "amplitude vector length {len} is not a power of two"
        )));
    }
    Ok(len.trailing_zeros() as usize)
}

/// The amplitudes register A must carry for a spec: square roots of the
/// branch probabilities.
pub fn target_amplitudes(spec: &PolySpec) -> Vec<f64> {
    spec.branch_distribution()
        .iter()
        .map(|p| p.sqrt())
        .collect()
}

/// Exact preparation: a unitary whose first column is the target,
/// completed by a Householder reflection.
///
/// For a real unit vector `t`, the reflection through `t − e₀` is
/// orthogonal and maps `e₀` to `t`, so no Gram-Schmidt sweep or rank
/// bookkeeping is needed.
pub fn exact_prep(target: &[f64]) -> Result<PrepCircuit> {
    let qubits = check_power_of_two(target.len())?;
    if target.iter().any(|&a| a < 0.0) {
        return Err(Error::InvalidArgument(
            "amplitude targets must be nonnegative".into(),
        ));
    }
    let norm_sq: f64 = target.iter().map(|a| a * a).sum();
    if (norm_sq - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument(format!(
            "amplitude vector has squared norm {norm_sq}, expected 1 within 1e-10"
        )));
    }
    let n = target.len();
    let mut v: Vec<f64> = target.to_vec();
    v[0] -= 1.0;
    let v_sq: f64 = v.iter().map(|x| x * x).sum();
    let mut u = ComplexMatrix::identity(n);
    if v_sq > 1e-30 {
        for r in 0..n {
            for c in 0..n {
                let h = u.get(r, c).re - 2.0 * v[r] * v[c] / v_sq;
                u.set(r, c, Complex64::new(h, 0.0));
            }
        }
    }
    Ok(PrepCircuit {
        kind: PrepKind::Exact,
        qubits,
        unitary: u,
        infidelity: 0.0,
    })
}

/// Hadamard wall on `qubits` qubits: uniform amplitudes, used by the
/// variant protocol. Zero qubits is allowed and yields the trivial 1×1
/// unitary, matching a single-branch spec.
pub fn hadamard_prep(qubits: usize) -> Result<PrepCircuit> {
    let n = 1usize << qubits;
    let amp = 1.0 / (n as f64).sqrt();
    let mut u = ComplexMatrix::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            // Entry of H^⊗q: ±1/√n with sign (−1)^{popcount(r & c)}.
            let sign = if (r & c).count_ones() % 2 == 0 {
                1.0
            } else {
                -1.0
            };
            u.set(r, c, Complex64::new(sign * amp, 0.0));
        }
    }
    Ok(PrepCircuit {
        kind: PrepKind::Hadamard,
        qubits,
        unitary: u,
        infidelity: 0.0,
    })
}

/// Parameters of the layered ansatz: per layer, one Y-rotation angle per
/// qubit, then a ring of controlled-NOTs (control `i`, target `i+1`, the
/// last qubit wrapping to the first).
#[derive(Debug, Clone)]
pub struct PqcParams {
    qubits: usize,
    layers: usize,
    angles: Vec<f64>,
}

impl PqcParams {
    pub fn new(qubits: usize, layers: usize, angles: Vec<f64>) -> Result<Self> {
        if qubits == 0 || layers == 0 {
            return Err(Error::InvalidArgument(
                "ansatz needs at least one qubit and one layer".into(),
            ));
        }
        if angles.len() != qubits * layers {
            return Err(Error::InvalidArgument(format!(
                "expected {} angles ({} layers × {} qubits), got {}",
                qubits * layers,
                layers,
                qubits,
                angles.len()
            )));
        }
        Ok(Self {
            qubits,
            layers,
            angles,
        })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    fn angle(&self, layer: usize, qubit: usize) -> f64 {
        self.angles[layer * self.qubits + qubit]
    }
}

/// Applies `Ry(θ)` on one qubit of a real statevector. Qubit 0 is the most
/// significant index bit.
fn apply_ry(state: &mut [f64], qubits: usize, qubit: usize, theta: f64) {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let stride = 1usize << (qubits - 1 - qubit);
    let mut base = 0;
    while base < state.len() {
        for offset in base..base + stride {
            let lo = state[offset];
            let hi = state[offset + stride];
            state[offset] = c * lo - s * hi;
            state[offset + stride] = s * lo + c * hi;
        }
        base += 2 * stride;
    }
}

/// Applies a controlled-NOT between two qubits of a real statevector.
fn apply_cnot(state: &mut [f64], qubits: usize, control: usize, target: usize) {
    let cbit = 1usize << (qubits - 1 - control);
    let tbit = 1usize << (qubits - 1 - target);
    for idx in 0..state.len() {
        if idx & cbit != 0 && idx & tbit == 0 {
            state.swap(idx, idx | tbit);
        }
    }
}

/// Statevector produced by the ansatz from `|0…0⟩`: per layer, rotations
/// then the entangler ring. Single-qubit ansätze skip the ring.
pub fn pqc_state(params: &PqcParams) -> Vec<f64> {
    let n = 1usize << params.qubits;
    let mut state = vec![0.0; n];
    state[0] = 1.0;
    for layer in 0..params.layers {
        for q in 0..params.qubits {
            apply_ry(&mut state, params.qubits, q, params.angle(layer, q));
        }
        if params.qubits > 1 {
            for q in 0..params.qubits {
                apply_cnot(&mut state, params.qubits, q, (q + 1) % params.qubits);
            }
        }
    }
    state
}

/// The full unitary the ansatz realizes, column by column.
fn pqc_unitary(params: &PqcParams) -> ComplexMatrix {
    let n = 1usize << params.qubits;
    let mut u = ComplexMatrix::zeros(n, n);
    for col in 0..n {
        let mut state = vec![0.0; n];
        state[col] = 1.0;
        for layer in 0..params.layers {
            for q in 0..params.qubits {
                apply_ry(&mut state, params.qubits, q, params.angle(layer, q));
            }
            if params.qubits > 1 {
                for q in 0..params.qubits {
                    apply_cnot(&mut state, params.qubits, q, (q + 1) % params.qubits);
                }
            }
        }
        for (r, &v) in state.iter().enumerate() {
            u.set(r, col, Complex64::new(v, 0.0));
        }
    }
    u
}

fn infidelity_to(target: &[f64], state: &[f64]) -> f64 {
    let overlap: f64 = target.iter().zip(state).map(|(t, s)| t * s).sum();
    (1.0 - overlap * overlap).max(0.0)
}

/// Infidelity ceiling the trainer must reach.
pub const TRAIN_TARGET: f64 = 1e-3;

const TRAIN_ITERATIONS: usize = 2000;
const TRAIN_RESTARTS: usize = 5;
const TRAIN_LEARNING_RATE: f64 = 0.1;

/// Trains the ansatz to prepare `target` by gradient descent on
/// `1 − |⟨target|ψ(β)⟩|²`.
///
/// Gradients use the parameter-shift rule, which is exact for Y-rotation
/// generators: each partial derivative is half the cost difference at
/// `±π/2` shifts of that angle. The first attempt starts from all-zero
/// angles (already optimal when the target is `e₀`); later restarts draw
/// uniform random angles from the seeded stream. Training that cannot
/// reach [`TRAIN_TARGET`] after all restarts is an error; more layers
/// usually fix it.
pub fn train_pqc(target: &[f64], layers: usize, seed: u64) -> Result<(PqcParams, f64)> {
    let qubits = check_power_of_two(target.len())?;
    let norm_sq: f64 = target.iter().map(|a| a * a).sum();
    if (norm_sq - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument(format!(
            "training target has squared norm {norm_sq}, expected 1"
        )));
    }
    if layers == 0 {
        return Err(Error::InvalidArgument("need at least one layer".into()));
    }
    let count = qubits * layers;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cost = |angles: &[f64]| -> f64 {
        let params = PqcParams {
            qubits,
            layers,
            angles: angles.to_vec(),
        };
        infidelity_to(target, &pqc_state(&params))
    };

    let mut best: Option<(Vec<f64>, f64)> = None;
    for restart in 0..TRAIN_RESTARTS {
        let mut angles = if restart == 0 {
            vec![0.0; count]
        } else {
            (0..count)
                .map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
                .collect()
        };
        let mut current = cost(&angles);
        for _ in 0..TRAIN_ITERATIONS {
            if current <= 1e-12 {
                break;
            }
            let mut grad = vec![0.0; count];
            for i in 0..count {
                let saved = angles[i];
                angles[i] = saved + std::f64::consts::FRAC_PI_2;
                let plus = cost(&angles);
                angles[i] = saved - std::f64::consts::FRAC_PI_2;
                let minus = cost(&angles);
                angles[i] = saved;
                grad[i] = 0.5 * (plus - minus);
            }
            for (a, g) in angles.iter_mut().zip(&grad) {
                *a -= TRAIN_LEARNING_RATE * g;
            }
            current = cost(&angles);
        }
        if best.as_ref().map_or(true, |(_, b)| current < *b) {
            best = Some((angles, current));
        }
        if best.as_ref().unwrap().1 <= 1e-12 {
            break;
        }
    }
    let (angles, infidelity) = best.expect("at least one restart ran");
    if infidelity > TRAIN_TARGET {
        return Err(Error::Training {
            best: infidelity,
            target: TRAIN_TARGET,
        });
    }
    Ok((
        PqcParams {
            qubits,
            layers,
            angles,
        },
        infidelity,
    ))
}

/// Wraps trained parameters as a preparation circuit, recording the
/// realized infidelity against the target.
pub fn pqc_prep(params: &PqcParams, target: &[f64]) -> Result<PrepCircuit> {
    let qubits = check_power_of_two(target.len())?;
    if qubits != params.qubits {
        return Err(Error::DimensionMismatch(format!(
            "ansatz acts on {} qubits but the target needs {qubits}",
            params.qubits
        )));
    }
    let state = pqc_state(params);
    Ok(PrepCircuit {
        kind: PrepKind::Pqc,
        qubits,
        unitary: pqc_unitary(params),
        infidelity: infidelity_to(target, &state),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::entropy_taylor_spec;

    #[test]
    fn exact_prep_cases() {
        // Single-branch specs need the trivial zero-qubit register.
        let prep = exact_prep(&[1.0]).unwrap();
        assert_eq!(prep.qubits(), 0);
        assert_eq!(prep.amplitudes(), vec![Complex64::new(1.0, 0.0)]);

        let mut e0 = vec![0.0; 4];
        e0[0] = 1.0;
        let prep = exact_prep(&e0).unwrap();
        assert!(prep
            .unitary()
            .approx_eq(&ComplexMatrix::identity(4), 1e-12));

        let uniform = vec![0.5; 4];
        let prep = exact_prep(&uniform).unwrap();
        for a in prep.amplitudes() {
            assert!((a.re - 0.5).abs() < 1e-12 && a.im == 0.0);
        }

        let spec = entropy_taylor_spec(5).unwrap();
        let target = target_amplitudes(&spec);
        let prep = exact_prep(&target).unwrap();
        for (a, t) in prep.amplitudes().iter().zip(&target) {
            assert!((a.re - t).abs() < 1e-12);
        }
        assert_eq!(prep.infidelity(), 0.0);
    }

    #[test]
    fn exact_prep_is_unitary() {
        let spec = entropy_taylor_spec(5).unwrap();
        let prep = exact_prep(&target_amplitudes(&spec)).unwrap();
        let u = prep.unitary();
        let gram = u.dagger().mul(u).unwrap();
        assert!(gram.approx_eq(&ComplexMatrix::identity(8), 1e-12));
    }

    #[test]
    fn exact_prep_rejects_bad_targets() {
        assert!(exact_prep(&[0.5, 0.5]).is_err());
        assert!(exact_prep(&[1.0, 0.0, 0.0]).is_err());
        assert!(exact_prep(&[-0.6, 0.8]).is_err());
    }

    #[test]
    fn hadamard_prep_uniform() {
        let prep = hadamard_prep(3).unwrap();
        let amp = 1.0 / 8f64.sqrt();
        for a in prep.amplitudes() {
            assert!((a.re - amp).abs() < 1e-14);
        }
        let u = prep.unitary();
        let gram = u.dagger().mul(u).unwrap();
        assert!(gram.approx_eq(&ComplexMatrix::identity(8), 1e-12));
    }

    #[test]
    fn pqc_state_cases() {
        let zeroed = PqcParams::new(2, 3, vec![0.0; 6]).unwrap();
        let state = pqc_state(&zeroed);
        assert_eq!(state[0], 1.0);
        assert!(state[1..].iter().all(|&v| v == 0.0));

        // Single qubit, angle π: lands on |1⟩ exactly.
        let flip = PqcParams::new(1, 1, vec![std::f64::consts::PI]).unwrap();
        let state = pqc_state(&flip);
        assert!(state[0].abs() < 1e-15);
        assert!((state[1].abs() - 1.0).abs() < 1e-15);
        assert!(infidelity_to(&[0.0, 1.0], &state) < 1e-12);
    }

    #[test]
    fn pqc_state_unit_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let angles: Vec<f64> = (0..9)
                .map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
                .collect();
            let params = PqcParams::new(3, 3, angles).unwrap();
            let norm: f64 = pqc_state(&params).iter().map(|v| v * v).sum();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pqc_params_validation() {
        assert!(PqcParams::new(2, 2, vec![0.0; 3]).is_err());
        assert!(PqcParams::new(0, 2, vec![]).is_err());
        assert!(PqcParams::new(2, 0, vec![]).is_err());
    }

    #[test]
    fn training_trivial_target() {
        let mut e0 = vec![0.0; 4];
        e0[0] = 1.0;
        let (_, infidelity) = train_pqc(&e0, 2, 1).unwrap();
        assert!(infidelity <= 1e-10);
    }

    #[test]
    fn training_uniform_target() {
        let (params, infidelity) = train_pqc(&[0.5, 0.5, 0.5, 0.5], 2, 7).unwrap();
        assert!(infidelity <= 1e-3);
        let state = pqc_state(&params);
        let overlap: f64 = state.iter().map(|v| v * 0.5).sum();
        assert!(overlap.powi(2) >= 1.0 - 1e-3);
    }

    #[test]
    fn training_entropy_amplitudes() {
        let spec = entropy_taylor_spec(5).unwrap();
        let target = target_amplitudes(&spec);
        let (params, infidelity) = train_pqc(&target, 4, 11).unwrap();
        assert!(infidelity <= 1e-3, "infidelity {infidelity}");

        let prep = pqc_prep(&params, &target).unwrap();
        assert!((prep.infidelity() - infidelity).abs() < 1e-12);
        let u = prep.unitary();
        let gram = u.dagger().mul(u).unwrap();
        assert!(gram.approx_eq(&ComplexMatrix::identity(8), 1e-10));
    }

    #[test]
    fn training_phase_insensitive() {
        // A target reachable only up to sign still trains to fidelity 1,
        // because the cost squares the overlap.
        let target = [0.0, 1.0];
        let (params, infidelity) = train_pqc(&target, 1, 3).unwrap();
        assert!(infidelity <= 1e-6);
        let state = pqc_state(&params);
        assert!((state[1].abs() - 1.0).abs() < 1e-3);
    }
}
