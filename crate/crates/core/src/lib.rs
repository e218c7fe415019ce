//! Finite-time driving of an open Lipkin-Meshkov-Glick qubit system.
//!
//! The crate is `no_std` (it needs `alloc`) and contains the numerical core:
//! collective-spin operators and Hamiltonians, driving schedules along straight
//! paths in the `(lambda, chi)` control plane, the Drude-Lorentz bath with its
//! Matsubara expansion, and three propagators for the reduced dynamics:
//! the hierarchical equations of motion ([`heom`]), a time-dependent Lindblad
//! equation in the instantaneous eigenbasis ([`lindblad`]) and a closed-system
//! reference propagator ([`unitary`]).
//!
//! All energies are in units of the single-qubit splitting, with
//! `hbar = k_B = 1`.
#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bath;
pub mod driving;
pub mod error;
pub mod hamiltonian;
pub mod heom;
pub mod lindblad;
pub mod linalg;
pub mod observables;
pub mod ode;
pub mod quad;
pub mod special;
pub mod spin;
pub mod trajectory;
pub mod unitary;

mod prelude;

/// Crate version, recorded in sweep metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Dense complex matrix used for every operator in the `(N+1)`-dimensional space.
pub type CMatrix = nalgebra::DMatrix<Complex64>;
