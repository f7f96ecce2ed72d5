//! Statevector simulation and quantum-natural-gradient toolkit for the
//! critical transverse-field Ising chain with a tunable duality impurity.
//!
//! The crate is `no_std` + `alloc` when built without the default `std`
//! feature; all math goes through `num-traits`/`libm` in that case.
//!
//! Module map:
//! - [`pauli`]: Pauli strings and weighted sums (Hamiltonians, observables).
//! - [`state`]: dense statevector kernel (rotations, controlled ops, overlaps).
//! - [`model`]: impurity Hamiltonian and the exact-diagonalization oracle.
//! - [`ansatz`]: layered ZZ/X/Z rotation circuit and its parameter layout.
//! - [`qng`]: derivative states, Fubini-Study metric, natural-gradient optimizer.
//! - [`shots`]: ancilla interference circuits and finite-shot estimators.
//! - [`observables`]: two-point correlators and the braid loop operator.
//! - [`zne`]: trajectory noise, gate folding and polynomial extrapolation.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod ansatz;
mod error;
mod lanczos;
pub mod model;
pub mod observables;
pub mod pauli;
pub mod qng;
mod rng;
pub mod shots;
pub mod state;
pub mod zne;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use rng::stream_seed;
