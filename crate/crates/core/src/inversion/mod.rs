//! Projected linearized reconstruction with a smoothened TV prior.
//!
//! The MAP problem `min ½‖B(y − Jw)‖² + γΨ(w)` is solved by lagged
//! diffusivity: the TV functional is replaced by the quadratic form of
//! `Θ(w⁽ʲ⁾)` at the previous iterate and the resulting Gaussian problem is
//! solved in the data space, where the system is only `ML × ML`.

mod lagged;
mod prior;

pub use lagged::{lagged_diffusivity_step, make_whitener, objective, reconstruct, InversionProblem, Reconstruction};
pub use prior::{cutoff_weight, second_smallest_eigenvalue, tv_weight_matrix, Cutoff, TvOperator, TvPrior};
