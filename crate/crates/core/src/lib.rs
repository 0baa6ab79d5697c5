//! Mean-field equation for excitatory leaky integrate-and-fire networks.
//!
//! The crate covers the whole chain from the microscopic model to the
//! macroscopic one:
//!
//! - [`model`]: parameters and the regime classification of `(h, v_r, σ₀, J)`.
//! - [`grid`]: cell-average densities on `[0, 1]`.
//! - [`pdmp`]: event-exact simulation of single neurons and finite networks.
//! - [`pde`]: finite-volume solver for the nonlinear transport equation.
//! - [`steady`]: invariant densities, the maps `F` and `G`, steady states.
//! - [`analysis`]: contraction constants and decay verification.

pub mod analysis;
pub mod csv;
pub mod grid;
pub mod model;
pub mod pde;
pub mod pdmp;
pub mod steady;

mod par;
mod rng;

pub use grid::{GridDensity, Mesh};
pub use model::{ModelParams, RegimeReport};
pub use rng::stream_rng;
