//! Energy evaluation in the dynamical Lie algebra of the anneal.

pub mod closure;
pub mod heisenberg;
pub mod pauli;

pub use closure::{default_cap, lie_closure, lie_closure_with, load_or_build, DlaBasis, Generator};
pub use heisenberg::{heisenberg_energy, DlaSimulator, HeisenbergOutcome};
pub use pauli::{pauli_commutator, DlaElement, PauliString};
