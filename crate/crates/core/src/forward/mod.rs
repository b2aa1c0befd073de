//! Smoothened complete electrode model: assembly, solves, and simulated data.

mod contact;
mod noise;
mod patterns;
mod system;

pub use contact::{contact_integrals, contact_shape, ContactModel, EdgeIntegrals};
pub use noise::{add_noise, compute_noise_std, gaussian_samples, NoiseModel, NOISE_FRACTION};
pub use patterns::{build_current_patterns, CurrentPatternSet, PatternScheme, INJECTION_CURRENT};
pub use system::{
    assemble_system, simulate_measurements, solve_forward, solve_patterns, stack_measurements, ConductivityField,
    ForwardSolution, ForwardSystem, MeasurementVector,
};
