//! Local electrical impedance tomography via projections.
//!
//! The crate covers the finite element forward solver for the smoothened
//! complete electrode model on 2D disks, measurement Jacobians, orthogonal
//! projectors that suppress a region of non-interest, and a projected
//! total-variation reconstructor based on lagged diffusivity iteration.

pub mod error;
pub mod forward;
pub mod geometry;
pub mod inversion;
pub mod io;
pub mod jacobian;
pub mod pipeline;
pub mod projection;
pub mod sparse;

pub use error::{EitError, Result};
