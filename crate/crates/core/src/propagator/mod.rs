//! Hierarchical equations of motion for the two-level donor/acceptor system.

mod dynamics;
mod hamiltonian;
mod hierarchy;

pub use dynamics::{
    generator_bound, propagate, propagate_observe, propagate_reduced, rhs, rhs_into,
    stable_substeps, thermal_donor_initial, tier0_derivative, AdoState,
};
pub use hamiltonian::{
    block_adjoint, block_mul, commutator, idx, pauli_x, pauli_z, Block, EtHamiltonian, A, D,
};
pub use hierarchy::{hierarchy_size, HierarchyIndex, HierarchySpace, TermInfo, DEFAULT_ENTRY_CAP};
