//! Exact-diagonalization toolkit for spin-state transfer through anisotropic
//! exchange-coupled spin chains.
//!
//! A chain is a sender spin, a channel of strongly coupled spins and a
//! receiver spin. Every bond carries the exchange tensor `J·R(θ, n)`, a
//! rotation of isotropic Heisenberg exchange about a spin-orbit axis. The crate
//! builds the Hamiltonian, evolves the sender's state and reports the
//! probability that it arrives at the receiver.
//!
//! Units are MHz for energies and µs for times.

pub mod analytics;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod model;
pub mod noise;
pub mod sweep;

pub use dynamics::{fidelity_series, FidelitySeries, TransferEvaluator};
pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, PhaseConvention, QuantumState, C64};
pub use model::{ChainSpec, ExchangeTensor, InitKind, SpinOrbitAxis};
pub use noise::{NoiseKind, NoiseModel};
