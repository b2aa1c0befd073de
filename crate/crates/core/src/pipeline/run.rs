use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ProjectorKind, ReferenceMode};
use super::metrics::{roi_metrics, RoiMetrics};
use crate::error::{EitError, Result};
use crate::forward::{
    add_noise, compute_noise_std, simulate_measurements, ConductivityField, ContactModel, CurrentPatternSet,
    MeasurementVector, NoiseModel,
};
use crate::geometry::{generate_disk_mesh, region_mass_matrix, tag_regions, ElectrodeSet, Mesh, Point, RegionTags};
use crate::inversion::{reconstruct, InversionProblem, Reconstruction, TvOperator, TvPrior};
use crate::io::{
    config_hash, write_measurements, write_node_values, write_objective_trace, write_spectrum, write_vtk, RunManifest,
    StageTiming,
};
use crate::jacobian::JacobianSet;
use crate::projection::{
    concat_jacobians, full_projector, partial_projector, NuisanceSpectrum, NuisanceWeighting, Projector, WeightingKind,
};

/// Truth meshes must have at least this many times the inversion mesh nodes.
pub const INVERSE_CRIME_RATIO: f64 = 1.5;

/// Prior weighting of the RONI conductivity.
pub fn nuisance_weighting(
    kind: WeightingKind,
    mesh: &Mesh,
    tags: &RegionTags,
    correlation_length: f64,
    prior_std: f64,
) -> Result<NuisanceWeighting> {
    match kind {
        WeightingKind::Identity => Ok(NuisanceWeighting::identity(tags.n_roni())),
        WeightingKind::MassMatrix => NuisanceWeighting::mass_matrix(&region_mass_matrix(mesh, tags)?),
        WeightingKind::Covariance => {
            let coords: Vec<Point> = tags.roni().iter().map(|&i| mesh.node(i)).collect();
            NuisanceWeighting::covariance(&coords, correlation_length, prior_std)
        }
    }
}

/// Projector of the requested kind and, if the RONI is involved, the
/// spectrum of the weighted RONI Jacobian.
pub fn build_projector(
    kind: ProjectorKind,
    jacobians: &JacobianSet,
    weighting: Option<&NuisanceWeighting>,
    k: usize,
) -> Result<(Option<Projector>, Option<NuisanceSpectrum>)> {
    let spectrum = if kind.uses_roni() {
        let w = weighting.ok_or_else(|| EitError::Config("RONI projector needs a weighting".into()))?;
        Some(NuisanceSpectrum::compute(&jacobians.roni, w)?)
    } else {
        None
    };
    let projector = match kind {
        ProjectorKind::None => None,
        ProjectorKind::Contact => Some(full_projector(&jacobians.contact)?),
        ProjectorKind::Roni => Some(partial_projector(&spectrum.as_ref().expect("computed").basis(k)?)?),
        ProjectorKind::ContactRoni => {
            let v = spectrum.as_ref().expect("computed").basis(k)?;
            Some(full_projector(&concat_jacobians(&jacobians.contact, &v)?)?)
        }
    };
    Ok((projector, spectrum))
}

/// Everything up to the reconstructions: meshes, simulated difference data,
/// Jacobians, projector and prior.
#[derive(Debug, Clone)]
pub struct PreparedExperiment {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub truth_nodes: usize,
    pub mesh: Mesh,
    pub electrodes: ElectrodeSet,
    pub tags: RegionTags,
    pub patterns: CurrentPatternSet,
    pub jacobians: JacobianSet,
    /// Difference data `y`.
    pub data: MeasurementVector,
    /// Standard deviation of the noise added to each measured leg.
    pub noise_std: f64,
    /// Noise variance of each entry of `y`.
    pub data_variance: f64,
    pub projector: Option<Projector>,
    pub spectrum: Option<NuisanceSpectrum>,
    pub tv: TvOperator,
    pub prior: TvPrior,
    /// True conductivity change on the ROI nodes.
    pub truth_roi: Vec<f64>,
    pub timings: Vec<StageTiming>,
}

fn timed<T>(timings: &mut Vec<StageTiming>, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let t = Instant::now();
    let out = f()?;
    timings.push(StageTiming { stage: stage.into(), seconds: t.elapsed().as_secs_f64() });
    Ok(out)
}

/// Seed of the noise on the reference leg.
fn reference_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

impl PreparedExperiment {
    pub fn prepare(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let mut timings = Vec::new();
        let g = &config.geometry;
        let m = g.n_electrodes;

        let ((truth_mesh, truth_el), (mesh, electrodes)) = timed(&mut timings, "mesh", || {
            Ok((
                generate_disk_mesh(g.radius, m, g.electrode_half_width, g.h_truth)?,
                generate_disk_mesh(g.radius, m, g.electrode_half_width, g.h_inversion)?,
            ))
        })?;
        if (truth_mesh.n_nodes() as f64) < INVERSE_CRIME_RATIO * mesh.n_nodes() as f64 {
            return Err(EitError::Config(format!(
                "truth mesh has {} nodes, need at least {INVERSE_CRIME_RATIO}× the {} inversion nodes",
                truth_mesh.n_nodes(),
                mesh.n_nodes()
            )));
        }
        let tags = tag_regions(&mesh, |p| config.roi.eval(p))?;
        let patterns = config.pattern_scheme()?.build(m)?;
        let contact = ContactModel::uniform(m, config.contact_peak, g.electrode_half_width)?;

        let (data, noise_std, data_variance) = timed(&mut timings, "simulate", || {
            let truth_sigma =
                ConductivityField::new(truth_mesh.nodes().iter().map(|&p| config.conductivity_at(p)).collect())?;
            let measured = simulate_measurements(&truth_mesh, &truth_el, &truth_sigma, &contact, &patterns)?;
            let (ref_mesh, ref_el) = match config.reference {
                ReferenceMode::Simulated => (&mesh, &electrodes),
                ReferenceMode::MeasuredClean => (&truth_mesh, &truth_el),
            };
            let empty = ConductivityField::homogeneous(ref_mesh.n_nodes(), config.sigma_bg)?;
            let reference = simulate_measurements(ref_mesh, ref_el, &empty, &contact, &patterns)?;
            let std = compute_noise_std(&reference)?;
            let noise = NoiseModel::new(std)?;
            let measured = add_noise(&measured, &noise, config.seed);
            Ok(match config.reference {
                ReferenceMode::Simulated => (measured.difference(&reference)?, std, noise.variance()),
                ReferenceMode::MeasuredClean => {
                    let reference = add_noise(&reference, &noise, reference_seed(config.seed));
                    (measured.difference(&reference)?, std, 2.0 * noise.variance())
                }
            })
        })?;

        let sigma0 = ConductivityField::homogeneous(mesh.n_nodes(), config.sigma_bg)?;
        let jacobians = timed(&mut timings, "jacobian", || {
            JacobianSet::compute(&mesh, &electrodes, &sigma0, &contact, &patterns, &tags)
        })?;

        let (projector, spectrum) = timed(&mut timings, "projector", || {
            let weighting = if config.projector.uses_roni() {
                Some(nuisance_weighting(
                    config.weighting,
                    &mesh,
                    &tags,
                    config.correlation_length,
                    config.prior_std,
                )?)
            } else {
                None
            };
            build_projector(config.projector, &jacobians, weighting.as_ref(), config.k)
        })?;

        let (tv, prior) = timed(&mut timings, "prior", || {
            let cutoff = config.prior.cutoff();
            let tv = TvOperator::new(&mesh, &tags, cutoff)?;
            let prior = tv.finalize(&TvPrior::new(config.prior.gamma, config.prior.smoothing, cutoff)?)?;
            Ok((tv, prior))
        })?;

        let truth_roi = tags.roi().iter().map(|&i| config.contrast_at(mesh.node(i))).collect();
        Ok(Self {
            config: config.clone(),
            config_hash: config_hash(config)?,
            truth_nodes: truth_mesh.n_nodes(),
            mesh,
            electrodes,
            tags,
            patterns,
            jacobians,
            data,
            noise_std,
            data_variance,
            projector,
            spectrum,
            tv,
            prior,
            truth_roi,
            timings,
        })
    }

    /// Reconstructs `data` with or without the configured projector.
    pub fn reconstruct(&self, data: &MeasurementVector, projected: bool) -> Result<Reconstruction> {
        let projector = if projected {
            Some(self.projector.as_ref().ok_or_else(|| EitError::Config("experiment has no projector".into()))?)
        } else {
            None
        };
        let variance = vec![self.data_variance; data.len()];
        let problem = InversionProblem::new(self.jacobians.roi.clone(), data, &variance, projector)?;
        reconstruct(&problem, &self.prior, &self.tv, self.config.prior.iterations)
    }

    /// Pure noise with the variance of the difference data.
    pub fn noise_only_data(&self, seed: u64) -> Result<MeasurementVector> {
        let zero = MeasurementVector::new(self.data.n_electrodes(), vec![0.0; self.data.len()])?;
        Ok(add_noise(&zero, &NoiseModel::new(self.data_variance.sqrt())?, seed))
    }

    pub fn metrics(&self, w: &[f64]) -> Result<RoiMetrics> {
        roi_metrics(&self.mesh, &self.tags, w, &self.truth_roi)
    }

    /// Nodal field on the whole inversion mesh, zero on the RONI.
    pub fn full_field(&self, w: &[f64]) -> Vec<f64> {
        let mut f = vec![0.0; self.mesh.n_nodes()];
        for (&i, &v) in self.tags.roi().iter().zip(w) {
            f[i] = v;
        }
        f
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegReport {
    pub projector: ProjectorKind,
    /// ROI values in the order of the ROI node list.
    #[serde(skip)]
    pub w: Vec<f64>,
    pub objective_trace: Vec<f64>,
    pub metrics: RoiMetrics,
}

/// All deterministic outputs of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResults {
    pub name: String,
    pub config_hash: String,
    pub truth_nodes: usize,
    pub inversion_nodes: usize,
    pub roi_nodes: usize,
    pub roni_nodes: usize,
    pub measurements: usize,
    pub noise_std: f64,
    pub epsilon: f64,
    pub singular_values: Vec<f64>,
    pub retained_energy: Vec<f64>,
    pub unprojected: LegReport,
    pub projected: Option<LegReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub results: ExperimentResults,
    pub timings: Vec<StageTiming>,
}

fn leg(prepared: &PreparedExperiment, kind: ProjectorKind, rec: Reconstruction) -> Result<LegReport> {
    let metrics = prepared.metrics(&rec.w)?;
    Ok(LegReport { projector: kind, w: rec.w, objective_trace: rec.objective_trace, metrics })
}

/// Runs both reconstruction legs of a prepared experiment.
pub fn run_prepared(prepared: &PreparedExperiment) -> Result<ExperimentReport> {
    let mut timings = prepared.timings.clone();
    let has_projector = prepared.projector.is_some();
    let (plain, projected) = timed(&mut timings, "reconstruct", || {
        std::thread::scope(|s| {
            let h = s.spawn(|| prepared.reconstruct(&prepared.data, false));
            let projected = if has_projector { Some(prepared.reconstruct(&prepared.data, true)) } else { None };
            let plain = h.join().expect("reconstruction thread panicked");
            Ok((plain?, projected.transpose()?))
        })
    })?;
    let (sv, energy) = match &prepared.spectrum {
        Some(s) => (s.singular_values().to_vec(), s.retained_energy()),
        None => (Vec::new(), Vec::new()),
    };
    let results = ExperimentResults {
        name: prepared.config.name.clone(),
        config_hash: prepared.config_hash.clone(),
        truth_nodes: prepared.truth_nodes,
        inversion_nodes: prepared.mesh.n_nodes(),
        roi_nodes: prepared.tags.n_roi(),
        roni_nodes: prepared.tags.n_roni(),
        measurements: prepared.data.len(),
        noise_std: prepared.noise_std,
        epsilon: prepared.prior.epsilon,
        singular_values: sv,
        retained_energy: energy,
        unprojected: leg(prepared, ProjectorKind::None, plain)?,
        projected: projected.map(|r| leg(prepared, prepared.config.projector, r)).transpose()?,
    };
    Ok(ExperimentReport { results, timings })
}

/// Simulates, linearizes, projects and reconstructs with and without the projector.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    run_prepared(&PreparedExperiment::prepare(config)?)
}

/// Writes config, report, fields, traces, spectrum, data and a manifest
/// into `dir` and returns the written paths.
pub fn write_experiment_outputs(
    dir: &Path,
    prepared: &PreparedExperiment,
    report: &ExperimentReport,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    let mut push = |name: &str| {
        let p = dir.join(name);
        out.push(p.clone());
        p
    };
    std::fs::write(push("config.json"), serde_json::to_string_pretty(&prepared.config)? + "\n")?;
    write_measurements(&push("difference.csv"), &prepared.data)?;
    let r = &report.results;
    for leg in std::iter::once(&r.unprojected).chain(&r.projected) {
        let tag = if leg.projector == ProjectorKind::None { "unprojected" } else { "projected" };
        write_node_values(&push(&format!("w_{tag}.csv")), prepared.tags.roi(), &leg.w)?;
        write_vtk(&push(&format!("w_{tag}.vtk")), &prepared.mesh, "delta_sigma", &prepared.full_field(&leg.w))?;
        write_objective_trace(&push(&format!("objective_{tag}.csv")), &leg.objective_trace)?;
    }
    if !r.singular_values.is_empty() {
        write_spectrum(&push("spectrum.csv"), &r.singular_values, &r.retained_energy)?;
    }
    std::fs::write(push("report.json"), serde_json::to_string_pretty(report)? + "\n")?;

    let mut manifest = RunManifest::new(prepared.config_hash.clone());
    manifest.outputs = out.clone();
    manifest.timings = report.timings.clone();
    let path = dir.join("manifest.json");
    manifest.write(&path)?;
    out.push(path);
    Ok(out)
}
