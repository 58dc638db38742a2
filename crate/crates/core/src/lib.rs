//! Quantum simulation of three-phonon scattering and lattice thermal
//! conductivity.

pub mod bosonic;
pub mod circuits;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod hamiltonian;
pub mod mitigation;
pub mod optimize;
pub mod pauli;
pub mod thermo;
pub mod vqe;

pub use error::{Error, Result};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
