//! Numerical laboratory for quasi-classical limits of particle-field models:
//! truncated Fock spaces, effective potentials, Lorentz quasi-norms,
//! discretized Schrödinger and Pauli forms, and convergence sweeps.

pub mod error;
pub mod fft;
pub mod family;
pub mod fock;
pub mod grid;
pub mod harness;
pub mod lorentz;
pub mod operators;
pub mod potentials;
pub mod solvers;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
