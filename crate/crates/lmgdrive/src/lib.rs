//! Sweeps, analysis, persistence and the command-line interface for driven
//! open LMG qubit simulations.
//!
//! The numerics live in [`lmgdrive_core`]; this crate adds the declarative
//! sweep configuration ([`config`]), single-point runs ([`run`]), idempotent
//! record stores with a worker pool ([`sweep`]), optimal-temperature and
//! scaling analysis ([`analysis`]) and CSV writers ([`output`]).

pub mod analysis;
pub mod config;
pub mod error;
pub mod output;
pub mod run;
pub mod sweep;

pub use error::{AppError, Result};
