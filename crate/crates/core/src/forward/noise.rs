use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::system::MeasurementVector;
use crate::error::{EitError, Result};

/// Relative noise level: 0.5 % of the data range.
pub const NOISE_FRACTION: f64 = 0.005;

/// I.i.d. Gaussian measurement noise, `Γ_E = std² I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    std: f64,
}

impl NoiseModel {
    pub fn new(std: f64) -> Result<Self> {
        if !(std > 0.0) || !std.is_finite() {
            return Err(EitError::Input(format!("noise standard deviation must be positive, got {std}")));
        }
        Ok(Self { std })
    }

    pub fn std(&self) -> f64 {
        self.std
    }

    pub fn variance(&self) -> f64 {
        self.std * self.std
    }

    /// Diagonal of `Γ_E` for `len` measurements.
    pub fn covariance_diagonal(&self, len: usize) -> Vec<f64> {
        vec![self.variance(); len]
    }
}

/// Standard normal draws from a seeded ChaCha8 stream.
pub fn gaussian_samples(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Adds seeded i.i.d. noise with the model's standard deviation.
pub fn add_noise(m: &MeasurementVector, model: &NoiseModel, seed: u64) -> MeasurementVector {
    let eps = gaussian_samples(m.len(), seed);
    let entries = m.entries().iter().zip(&eps).map(|(v, e)| v + model.std() * e).collect();
    MeasurementVector::new(m.n_electrodes(), entries).expect("layout unchanged")
}

/// 0.5 % of the largest difference between two reference potentials.
pub fn compute_noise_std(reference: &MeasurementVector) -> Result<f64> {
    if reference.is_empty() {
        return Err(EitError::DegenerateNoise("reference measurement is empty".into()));
    }
    let (lo, hi) = reference
        .entries()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(hi > lo) {
        return Err(EitError::DegenerateNoise("reference measurement is constant".into()));
    }
    Ok(NOISE_FRACTION * (hi - lo))
}
