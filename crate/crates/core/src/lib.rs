//! Spin-1 lattice model with an exact su(2) scar tower, its quantum Fisher
//! information dynamics, and echo-based phase estimation.

pub mod boson;
pub mod dynamics;
pub mod error;
pub mod hamiltonian;
pub mod husimi;
pub mod metrology;
pub mod model;
pub mod oracle;
pub mod propagate;
pub mod qfi;
pub mod scars;
pub mod sparse;
pub mod spectrum;
pub mod state;
pub mod verification;

pub use error::{Error, Result};
pub use hamiltonian::{build_total, HamiltonianSpec, HamiltonianTerms};
pub use model::{CollectiveKind, LatticeSpec, SpinBasis};
pub use propagate::{Backend, Propagator};
pub use qfi::{qfi_mixed, qfi_pure, witness_bound, QfiResult};
pub use scars::ScarTower;
pub use sparse::{SparseOperator, C64};
pub use state::{Basis, StateVector};
