//! Test shim for the guide book under `book/`.
//!
//! Each chapter of the book is included here as module documentation, so
//! `cargo test -p qsf-book` compiles and runs every Rust snippet the book
//! shows. A snippet that drifts from the library's actual behavior fails
//! the build instead of misleading a reader.
//!
//! The modules are empty on purpose; they exist to carry the docs.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/polynomials.md")]
pub mod polynomials {}

#[doc = include_str!("../../../book/src/circuit.md")]
pub mod circuit {}

#[doc = include_str!("../../../book/src/sampling.md")]
pub mod sampling {}

#[doc = include_str!("../../../book/src/entropy.md")]
pub mod entropy {}

#[doc = include_str!("../../../book/src/fidelity.md")]
pub mod fidelity {}

#[doc = include_str!("../../../book/src/eigenvalue-search.md")]
pub mod eigenvalue_search {}

#[doc = include_str!("../../../book/src/state-preparation.md")]
pub mod state_preparation {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
