//! Effective dispersion relations for a tracer particle coupled to a fast
//! scalar Bose field.
//!
//! The crate computes the self-consistent generator `g(p)` of the effective
//! tracer dynamics, its explicit and polynomial approximants, higher-order
//! generators `g_n(p)` for massive fields, and compares the effective
//! evolution against a brute-force truncated-Fock-space simulation of the
//! full Hamiltonian restricted to a total-momentum fiber.

pub mod cli;
pub mod effective_dynamics;
pub mod error;
pub mod fock_oracle;
pub mod generator;
pub mod higher_order;
pub mod interp;
pub mod model;
pub mod quadrature;

pub use error::{Error, Result};
pub use model::{Dispersion, FormFactor, ModelParams};
