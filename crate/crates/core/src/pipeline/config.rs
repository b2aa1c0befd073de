use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{EitError, Result};
use crate::forward::PatternScheme;
use crate::geometry::Point;
use crate::inversion::Cutoff;
use crate::io::RoiPredicate;
use crate::projection::WeightingKind;

/// Disk tank and the two mesh resolutions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub radius: f64,
    pub n_electrodes: usize,
    pub electrode_half_width: f64,
    /// Target element size of the inversion mesh.
    pub h_inversion: f64,
    /// Target element size of the mesh used to simulate the measurements.
    pub h_truth: f64,
}

/// Disk-shaped inclusion with an additive conductivity change (S/m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inclusion {
    pub center: Point,
    pub radius: f64,
    pub contrast: f64,
}

impl Inclusion {
    pub fn contains(&self, p: Point) -> bool {
        (p[0] - self.center[0]).hypot(p[1] - self.center[1]) < self.radius
    }
}

/// How the reference (empty tank) data of the difference are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceMode {
    /// Noiseless empty-tank data from the inversion model.
    Simulated,
    /// Noisy empty-tank data from the same fine model as the measurements.
    MeasuredClean,
}

/// Nuisance parameters whose Jacobian range is projected out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ProjectorKind {
    None,
    Contact,
    Roni,
    ContactRoni,
}

impl FromStr for ProjectorKind {
    type Err = EitError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "none" => Ok(Self::None),
            "contact" => Ok(Self::Contact),
            "roni" => Ok(Self::Roni),
            "contact+roni" => Ok(Self::ContactRoni),
            _ => Err(EitError::Config(format!(
                "unknown projector '{s}', expected none, contact, roni or contact+roni"
            ))),
        }
    }
}

impl fmt::Display for ProjectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::Contact => "contact",
            Self::Roni => "roni",
            Self::ContactRoni => "contact+roni",
        })
    }
}

impl TryFrom<String> for ProjectorKind {
    type Error = EitError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ProjectorKind> for String {
    fn from(k: ProjectorKind) -> String {
        k.to_string()
    }
}

impl ProjectorKind {
    pub fn uses_roni(self) -> bool {
        matches!(self, Self::Roni | Self::ContactRoni)
    }

    pub fn uses_contact(self) -> bool {
        matches!(self, Self::Contact | Self::ContactRoni)
    }
}

/// Boundary cutoff `υ` parameters, see [`crate::inversion::cutoff_weight`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffConfig {
    pub c: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    pub gamma: f64,
    pub smoothing: f64,
    #[serde(default)]
    pub cutoff: Option<CutoffConfig>,
    pub iterations: usize,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self { gamma: 100.0, smoothing: 1e-6, cutoff: None, iterations: 10 }
    }
}

impl PriorConfig {
    pub fn cutoff(&self) -> Cutoff {
        match self.cutoff {
            None => Cutoff::Uniform,
            Some(CutoffConfig { c, b }) => Cutoff::BoundaryPenalizing { c, b },
        }
    }
}

/// One difference-imaging experiment on a disk tank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub geometry: GeometryConfig,
    pub roi: RoiPredicate,
    pub roi_inclusions: Vec<Inclusion>,
    pub roni_inclusions: Vec<Inclusion>,
    /// Background conductivity (S/m), also the linearization point.
    pub sigma_bg: f64,
    /// Peak contact conductivity ζ₀ (S/m²) on every electrode.
    pub contact_peak: f64,
    pub patterns: String,
    pub projector: ProjectorKind,
    pub weighting: WeightingKind,
    #[serde(rename = "K")]
    pub k: usize,
    /// Correlation length ℓ (m) of the covariance weighting.
    pub correlation_length: f64,
    /// Pointwise standard deviation ς (S/m) of the covariance weighting.
    pub prior_std: f64,
    pub prior: PriorConfig,
    pub seed: u64,
    pub reference: ReferenceMode,
}

pub const TANK_RADIUS: f64 = 0.115;
pub const TANK_ELECTRODES: usize = 32;
pub const TANK_HALF_WIDTH: f64 = 0.005;

impl ExperimentConfig {
    fn tank(name: &str, sigma_bg: f64, roi: &str, k: usize, reference: ReferenceMode) -> Self {
        Self {
            name: name.into(),
            geometry: GeometryConfig {
                radius: TANK_RADIUS,
                n_electrodes: TANK_ELECTRODES,
                electrode_half_width: TANK_HALF_WIDTH,
                h_inversion: TANK_RADIUS / 20.0,
                h_truth: TANK_RADIUS / 40.0,
            },
            roi: roi.parse().expect("valid predicate"),
            roi_inclusions: Vec::new(),
            roni_inclusions: Vec::new(),
            sigma_bg,
            contact_peak: 500.0,
            patterns: "odd-skip-15".into(),
            projector: ProjectorKind::Roni,
            weighting: WeightingKind::Covariance,
            k,
            correlation_length: 0.02,
            prior_std: 0.5,
            prior: PriorConfig::default(),
            seed: 2025,
            reference,
        }
    }

    /// Upper half as ROI, a small conductive inclusion in it and a larger
    /// one in the lower half; simulated reference data. Inclusions are ten
    /// times as conductive as the saline.
    pub fn experiment1() -> Self {
        let sigma = 0.0215;
        let mut c = Self::tank("experiment1", sigma, "y>0", 80, ReferenceMode::Simulated);
        c.roi_inclusions = vec![Inclusion { center: [-0.03, 0.055], radius: 0.015, contrast: 9.0 * sigma }];
        c.roni_inclusions = vec![Inclusion { center: [0.03, -0.045], radius: 0.025, contrast: 9.0 * sigma }];
        c
    }

    /// ROI `r < R − 1.5 cm`, one conductive ROI inclusion and three
    /// resistive perturbations in the boundary annulus; measured reference.
    pub fn experiment2() -> Self {
        let roi_radius = TANK_RADIUS - 0.015;
        let sigma = 0.1099;
        let mut c = Self::tank("experiment2", sigma, &format!("r<{roi_radius}"), 100, ReferenceMode::MeasuredClean);
        c.roi_inclusions = vec![Inclusion { center: [0.02, 0.035], radius: 0.02, contrast: 9.0 * sigma }];
        let rc = 0.5 * (roi_radius + TANK_RADIUS);
        c.roni_inclusions = [0.6f64, 2.4, 4.3]
            .iter()
            .map(|&t| Inclusion { center: [rc * t.cos(), rc * t.sin()], radius: 0.006, contrast: -0.08 })
            .collect();
        c
    }

    /// Experiment 1 geometry without any inclusion.
    pub fn null() -> Self {
        let mut c = Self::experiment1();
        c.name = "null".into();
        c.roi_inclusions.clear();
        c.roni_inclusions.clear();
        c
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "experiment1" => Ok(Self::experiment1()),
            "experiment2" => Ok(Self::experiment2()),
            "null" => Ok(Self::null()),
            _ => Err(EitError::Config(format!(
                "unknown preset '{name}', expected experiment1, experiment2 or null"
            ))),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s).map_err(|e| EitError::Config(format!("invalid experiment config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn pattern_scheme(&self) -> Result<PatternScheme> {
        self.patterns.parse()
    }

    pub fn inclusions(&self) -> impl Iterator<Item = &Inclusion> {
        self.roi_inclusions.iter().chain(&self.roni_inclusions)
    }

    /// Analytic conductivity of the phantom at `p`.
    pub fn conductivity_at(&self, p: Point) -> f64 {
        self.sigma_bg + self.contrast_at(p)
    }

    /// Analytic conductivity change at `p`.
    pub fn contrast_at(&self, p: Point) -> f64 {
        self.inclusions().filter(|i| i.contains(p)).map(|i| i.contrast).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        let positive = [
            ("radius", g.radius),
            ("electrode_half_width", g.electrode_half_width),
            ("h_inversion", g.h_inversion),
            ("h_truth", g.h_truth),
            ("sigma_bg", self.sigma_bg),
            ("contact_peak", self.contact_peak),
            ("correlation_length", self.correlation_length),
            ("prior_std", self.prior_std),
            ("prior.gamma", self.prior.gamma),
            ("prior.smoothing", self.prior.smoothing),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(*v > 0.0) || !v.is_finite()) {
            return Err(EitError::Config(format!("{name} must be positive, got {v}")));
        }
        if g.h_truth >= g.h_inversion {
            return Err(EitError::Config(format!(
                "truth mesh (h = {}) must be finer than the inversion mesh (h = {})",
                g.h_truth, g.h_inversion
            )));
        }
        if self.prior.iterations == 0 {
            return Err(EitError::Config("prior.iterations must be at least 1".into()));
        }
        if self.projector.uses_roni() && self.k == 0 {
            return Err(EitError::Config("K must be positive for a RONI projector".into()));
        }
        self.pattern_scheme()?;
        for (list, in_roi) in [(&self.roi_inclusions, true), (&self.roni_inclusions, false)] {
            for inc in list {
                if !(inc.radius > 0.0) || !inc.contrast.is_finite() {
                    return Err(EitError::Config(format!("inclusion {inc:?} needs a positive radius and finite contrast")));
                }
                if inc.center[0].hypot(inc.center[1]) + inc.radius >= g.radius {
                    return Err(EitError::Config(format!("inclusion {inc:?} does not lie inside the tank")));
                }
                if self.roi.eval(inc.center) != in_roi {
                    let side = if in_roi { "ROI" } else { "RONI" };
                    return Err(EitError::Config(format!("{side} inclusion centred at {:?} lies outside the {side}", inc.center)));
                }
            }
        }
        // lowest conductivity where an inclusion meets all inclusions that overlap it
        let worst = self
            .inclusions()
            .map(|a| {
                self.inclusions()
                    .filter(|b| {
                        (a.center[0] - b.center[0]).hypot(a.center[1] - b.center[1]) < a.radius + b.radius
                    })
                    .map(|b| b.contrast.min(0.0))
                    .sum::<f64>()
            })
            .fold(0.0, f64::min);
        if self.sigma_bg + worst <= 0.0 {
            return Err(EitError::Config(format!(
                "inclusion contrasts can drive the conductivity to {} S/m",
                self.sigma_bg + worst
            )));
        }
        Ok(())
    }
}
