//! Kinetically constrained spin chains embedded in engineered dissipative
//! dynamics, with exact-diagonalization and ensemble analysis tooling.
//!
//! The crate covers:
//! - blockade-constrained product bases and the operators acting on them
//!   ([`basis`], [`ops`], [`observables`]);
//! - exact diagonalization and per-eigenstate tables ([`spectra`]);
//! - deterministic master-equation integration and quantum-trajectory
//!   sampling for the engineered Liouvillians ([`dynamics`]);
//! - decay-rate and surface fits ([`analysis`]);
//! - canonical/grand-canonical ensembles, reduced density matrices, and
//!   Schatten distances ([`thermo`]).

pub mod analysis;
pub mod basis;
pub mod dynamics;
pub mod error;
pub mod model;
pub mod observables;
pub mod ops;
pub mod plot;
pub mod pxp;
pub mod sparse;
pub mod spectra;
pub mod spin;
pub mod thermo;

pub use basis::{enumerate_basis, ConstrainedBasis};
pub use error::{Error, Result};
pub use model::{BondModel, Boundary, Caps, Family, ModelSpec};
pub use ops::{ChannelRecipe, LiouvillianKind};
pub use spin::SpinJ;
