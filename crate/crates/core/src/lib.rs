//! Optimized annealing schedules for a frustrated Ising ring.
//!
//! The crate simulates the interpolation `H(A) = (1 - A) H_d + A H_p` from the
//! transverse-field driver to the frustrated ring Hamiltonian, either on the
//! full state vector or in the Lie algebra generated by the two terms, and
//! searches piecewise-linear schedules `A(t)` that reach a target energy in
//! the least annealing time.

pub mod error;
pub mod ring_model;
pub mod schedule;
pub mod statevector;
pub mod dla;
pub mod optimizer;
pub mod spectrum;
pub mod campaign;
pub mod cli;

pub use error::{Error, Result};
pub use ring_model::{RingModel, SpectrumConstants};
pub use schedule::Schedule;
pub use statevector::{ConvergedEnergy, StateVector, TrotterParams, TrotterSimulator};
