//! Edge dislocations in a nonlinear triangular-lattice model.
//!
//! The crate builds finite portions of the regular triangular lattice,
//! evaluates a nonlinear two- and three-body energy on discrete strain
//! fields, extracts quantized Burgers measures from circulations, computes
//! the linear-elastic self-energy cell formulas (angular profiles, annulus
//! minimizations, integer relaxations), constructs near-optimal strains for
//! prescribed dislocations, minimizes the energy at fixed dislocation
//! content, and runs the scaling studies that compare lattice energies
//! against their continuum limit.

pub mod elasticity;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod io;
pub mod lattice;
pub mod linalg;
pub mod minimize;
pub mod recovery;
pub mod strain;
pub mod study;

pub use error::{Error, Result};
