//! Classical simulation laboratory for quantum state function (QSF)
//! circuits.
//!
//! The QSF construction turns a polynomial `f(x) = Σ_j α_j x^j` into a
//! measurement protocol: a control register selects a term `j` with
//! probability proportional to `|α_j|`, a cycle permutation entangles `j`
//! copies of the input state `ρ`, and a single-qubit readout lands heads
//! with a bias set by `tr(ρ^j)`. Averaging the readout recovers
//! `tr[f(ρ)·ρ]`-style functionals without tomography.
//!
//! This crate simulates that protocol end to end, classically:
//!
//! - [`linalg`]: dense complex matrices, a Jacobi eigensolver, Kronecker
//!   products, and cycle-permutation index maps.
//! - [`states`]: validated density matrices, random-state generation, and
//!   exact oracles (trace powers, entropy, fidelity) to test estimators
//!   against.
//! - [`coefficients`]: polynomial specifications, the Taylor constructions
//!   for entropy and fidelity, step-function fits for eigenvalue
//!   thresholding, and shot-budget rules.
//! - [`circuit`]: the register layout and the structured gate sequence,
//!   plus the joint readout distribution both from the full simulation and
//!   from the analytic shortcut.
//! - [`sampler`]: shot sampling against the joint distribution, estimator
//!   assembly, copy-consumption accounting, and the generalized-swap
//!   baseline it is compared with.
//! - [`stateprep`]: exact preparation unitaries and a small trainable
//!   circuit ansatz for the coefficient-loading step.
//! - [`applications`]: the three headline routines built on all of the
//!   above; entropy estimation, fidelity estimation, and largest-eigenvalue
//!   search.
//!
//! Everything is deterministic given a seed, including under parallel
//! sampling.

pub mod applications;
pub mod circuit;
pub mod coefficients;
pub mod error;
pub mod linalg;
pub mod sampler;
pub mod stateprep;
pub mod states;

pub use error::{Error, Result};
