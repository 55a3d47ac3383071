//! Numerical laboratory for super-adiabatic dressing of gapped lattice fermion
//! systems on finite lattices.
//!
//! The crate is organized bottom-up:
//!
//! - [`caralg`]: Fock space, CAR operators, tracial state, conditional
//!   expectations and localization norms.
//! - [`interaction`]: interactions, Lipschitz potentials, zero chains,
//!   Liouvillians and interaction norms.
//! - [`spectral`]: exact diagonalization, filter function, inverse
//!   Liouvillian and off-diagonal parts.
//! - [`expansion`]: the (ε, η) order collector and dressing generator.
//! - [`dynamics`]: schedules, propagators, dressed states and drift.
//!
//! [`expr`] parses operator builder expressions and [`io`] reads and writes
//! binary matrix dumps.

pub mod caralg;
pub mod dynamics;
pub mod error;
pub mod expansion;
pub mod expr;
pub mod interaction;
pub mod io;
pub mod linalg;
pub mod spectral;

pub use error::{NeassError, Result};
