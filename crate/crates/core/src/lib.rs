//! Coherent control of a qubit by magnetic solitons travelling through a
//! classical Heisenberg spin chain.
//!
//! * [`chain`] integrates the lattice equations of motion of the spin-deviation field.
//! * [`solitons`] holds the envelope-equation coefficients and the bright/dark profiles.
//! * [`qubit`] turns a soliton into a two-level drive and integrates the qubit.
//! * [`closedform`] collects the analytic transition probabilities used as oracles.

pub mod chain;
pub mod closedform;
pub mod error;
pub mod output;
pub mod qubit;
pub mod solitons;

pub use error::{Error, Result};
pub use num_complex::Complex64;
