//! Simulation of error correction applied in short steps during quantum gates.
//!
//! The crate is layered bottom-up:
//!
//! * [`operator`] dense complex algebra, Pauli strings, exponentials, partial trace;
//! * [`bath`] the system-environment Hamiltonian and a stochastic phase-flip channel;
//! * [`perturbation`] second-order perturbative objects and state prediction;
//! * [`code`] the three-qubit phase-flip code;
//! * [`gates`] rotation and CNOT Hamiltonians, physical and logical;
//! * [`synth`] group-commutator synthesis of multi-body exponentials;
//! * [`protocol`] the step-correct-repeat protocol and its Monte-Carlo estimators;
//! * [`seed`] per-trial random streams derived from one root seed;
//! * [`fit`] log-log slope fits used to read off scaling exponents.

pub mod bath;
pub mod code;
pub mod error;
pub mod fit;
pub mod gates;
pub mod operator;
pub mod perturbation;
pub mod protocol;
pub mod seed;
pub mod synth;

pub use error::{Error, Result};
