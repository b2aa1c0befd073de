use crate::error::{EitError, Result};
use crate::geometry::{ElectrodeSet, Mesh};

/// Smooth contact profile `exp(τ − τR^p / (R^p − r^p))` for `r < R`, zero otherwise.
///
/// Equals 1 at the electrode midpoint and vanishes with all derivatives at
/// the electrode edge.
pub fn contact_shape(r: f64, tau: f64, p: f64, radius: f64) -> f64 {
    let r = r.abs();
    if r >= radius {
        return 0.0;
    }
    let rp = radius.powf(p);
    let denom = rp - r.powf(p);
    if denom <= 0.0 {
        return 0.0;
    }
    (tau - tau * rp / denom).exp()
}

/// Per-electrode contact conductivity `ζ_m · ζ̂(r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactModel {
    /// Peak contact conductivities ζ_m (S/m²).
    pub peaks: Vec<f64>,
    pub tau: f64,
    pub p: f64,
    /// Profile radius R (m); the arc ends map to `r = R`.
    pub radius: f64,
}

impl ContactModel {
    /// Shape parameters τ = p = 6.
    pub const DEFAULT_TAU: f64 = 6.0;
    pub const DEFAULT_P: f64 = 6.0;

    pub fn new(peaks: Vec<f64>, tau: f64, p: f64, radius: f64) -> Result<Self> {
        let model = Self { peaks, tau, p, radius };
        model.validate()?;
        Ok(model)
    }

    /// Same peak on every electrode with the default shape.
    pub fn uniform(n_electrodes: usize, peak: f64, radius: f64) -> Result<Self> {
        Self::new(vec![peak; n_electrodes], Self::DEFAULT_TAU, Self::DEFAULT_P, radius)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((m, z)) = self.peaks.iter().enumerate().find(|(_, z)| !(**z > 0.0) || !z.is_finite()) {
            return Err(EitError::Input(format!("contact peak {m} must be positive, got {z}")));
        }
        if !(self.tau > 0.0) || !(self.p > 0.0) || !(self.radius > 0.0) {
            return Err(EitError::Input(format!(
                "contact shape parameters must be positive (tau = {}, p = {}, R = {})",
                self.tau, self.p, self.radius
            )));
        }
        Ok(())
    }

    pub fn shape(&self, r: f64) -> f64 {
        contact_shape(r, self.tau, self.p, self.radius)
    }
}

/// Five-point Gauss-Legendre rule on [0, 1].
const GAUSS_X: [f64; 5] = [
    0.046_910_077_030_668_004,
    0.230_765_344_947_158_45,
    0.5,
    0.769_234_655_052_841_5,
    0.953_089_922_969_332,
];
const GAUSS_W: [f64; 5] = [
    0.118_463_442_528_094_54,
    0.239_314_335_249_683_23,
    0.284_444_444_444_444_45,
    0.239_314_335_249_683_23,
    0.118_463_442_528_094_54,
];

/// Shape-weighted boundary integrals on one electrode edge `[a, b]`:
/// `mass[i][j] = ∫ ζ̂ φ_i φ_j`, `load[i] = ∫ ζ̂ φ_i`, `total = ∫ ζ̂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeIntegrals {
    pub nodes: [usize; 2],
    pub mass: [[f64; 2]; 2],
    pub load: [f64; 2],
    pub total: f64,
}

impl EdgeIntegrals {
    /// `∫ ζ̂ (u − U)(v − V)` over this edge for P1 traces `u`, `v`.
    pub fn coupling(&self, u: &[f64], big_u: f64, v: &[f64], big_v: f64) -> f64 {
        let ua = [u[self.nodes[0]], u[self.nodes[1]]];
        let va = [v[self.nodes[0]], v[self.nodes[1]]];
        let mut s = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                s += ua[i] * self.mass[i][j] * va[j];
            }
        }
        s - big_u * (self.load[0] * va[0] + self.load[1] * va[1])
            - big_v * (self.load[0] * ua[0] + self.load[1] * ua[1])
            + big_u * big_v * self.total
    }
}

/// Shape-weighted contact integrals for every electrode edge, independent of the peaks.
pub fn contact_integrals(mesh: &Mesh, electrodes: &ElectrodeSet, contact: &ContactModel) -> Vec<Vec<EdgeIntegrals>> {
    (0..electrodes.len())
        .map(|m| {
            electrodes
                .arc(m)
                .iter()
                .map(|edge| {
                    let len = mesh.edge_length(edge.nodes);
                    let mut ei = EdgeIntegrals { nodes: edge.nodes, mass: [[0.0; 2]; 2], load: [0.0; 2], total: 0.0 };
                    for (&x, &w) in GAUSS_X.iter().zip(&GAUSS_W) {
                        let s = edge.s_start + x * (edge.s_end - edge.s_start);
                        let r = electrodes.contact_coordinate(m, s, contact.radius);
                        let z = w * len * contact.shape(r);
                        let phi = [1.0 - x, x];
                        for i in 0..2 {
                            ei.load[i] += z * phi[i];
                            for j in 0..2 {
                                ei.mass[i][j] += z * phi[i] * phi[j];
                            }
                        }
                        ei.total += z;
                    }
                    ei
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_at_center_is_one() {
        assert_eq!(contact_shape(0.0, 6.0, 6.0, 0.005), 1.0);
    }

    #[test]
    fn shape_vanishes_at_and_beyond_edge() {
        assert_eq!(contact_shape(0.005, 6.0, 6.0, 0.005), 0.0);
        assert_eq!(contact_shape(0.01, 6.0, 6.0, 0.005), 0.0);
        let near = contact_shape(0.005 * (1.0 - 1e-9), 6.0, 6.0, 0.005);
        assert!(near < 1e-300);
    }

    #[test]
    fn shape_at_half_radius() {
        // exp(6 - 6 * 64 / 63)
        let v = contact_shape(0.0025, 6.0, 6.0, 0.005);
        assert!((v - 0.909_156_442_876_713_4).abs() < 1e-12, "{v}");
    }

    #[test]
    fn shape_is_monotone_and_bounded() {
        let mut prev = 1.0;
        for k in 1..100 {
            let v = contact_shape(k as f64 / 100.0, 6.0, 6.0, 1.0);
            assert!(v <= prev && (0.0..=1.0).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn gauss_rule_integrates_degree_nine() {
        for k in 0..10 {
            let q: f64 = GAUSS_X.iter().zip(&GAUSS_W).map(|(x, w)| w * x.powi(k)).sum();
            assert!((q - 1.0 / (k as f64 + 1.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn model_validation() {
        assert!(ContactModel::new(vec![1.0, 0.0], 6.0, 6.0, 0.1).is_err());
        assert!(ContactModel::new(vec![1.0, 2.0], 0.0, 6.0, 0.1).is_err());
        assert!(ContactModel::uniform(3, 500.0, 0.005).is_ok());
    }
}
