//! Quantum Wasserstein pseudometric on truncated Fock spaces.
//!
//! Modules follow the data flow: [`fock`] builds the basis, [`densop`] holds density
//! operators, [`quantize`] maps between phase-space measures and operators,
//! [`classical_ot`] and [`qot`] compute classical and quantum transport costs,
//! [`dynamics`] and [`meanfield`] evolve states and audit the propagation bounds.

pub mod classical_ot;
pub mod densop;
pub mod dynamics;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod meanfield;
pub mod qot;
pub mod quantize;
pub mod rng;

pub use error::{Error, Result};
