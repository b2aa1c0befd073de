use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use eitloc::forward::{
    add_noise, compute_noise_std, simulate_measurements, ConductivityField, ContactModel, MeasurementVector,
    NoiseModel, PatternScheme,
};
use eitloc::geometry::{generate_disk_mesh, tag_regions, RegionTags};
use eitloc::inversion::{reconstruct, Cutoff, InversionProblem, TvOperator, TvPrior};
use eitloc::io::{
    config_hash, read_jacobian, read_measurements, read_mesh, run_dir_name, write_jacobian, write_measurements,
    write_mesh, write_node_values, write_objective_trace, write_spectrum, write_vtk, MeshBundle, RoiPredicate,
    RunManifest,
};
use eitloc::jacobian::JacobianSet;
use eitloc::pipeline::{
    build_projector, nuisance_weighting, run_prepared, write_experiment_outputs, ExperimentConfig,
    PreparedExperiment, ProjectorKind, ReferenceMode,
};
use eitloc::projection::{NuisanceSpectrum, WeightingKind};
use eitloc::{EitError, Result};

/// Environment variable naming the root directory for default outputs.
pub const OUTPUT_ROOT_VAR: &str = "EITLOC_OUTPUT_ROOT";

#[derive(Debug, Parser)]
#[command(name = "eitloc", version, about = "Local EIT reconstructions with projections")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a disk mesh with boundary electrodes and optional ROI tags.
    Mesh(MeshArgs),
    /// Simulate noiseless, noisy, reference and difference data.
    Simulate(SimulateArgs),
    /// Compute and dump the ROI, RONI and contact Jacobians.
    Jacobian(JacobianArgs),
    /// Write the singular value spectrum of the weighted RONI Jacobian.
    ProjectInfo(ProjectInfoArgs),
    /// Reconstruct the ROI conductivity change from difference data.
    Reconstruct(ReconstructArgs),
    /// Run a complete experiment with and without projection.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args, Serialize)]
struct MeshArgs {
    #[arg(long)]
    radius: f64,
    #[arg(long)]
    electrodes: usize,
    #[arg(long)]
    half_width: f64,
    /// Target element size; defaults to radius / 20.
    #[arg(long)]
    h: Option<f64>,
    /// ROI predicate such as "y>0" or "r<0.1".
    #[arg(long)]
    roi: Option<RoiPredicate>,
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

/// Linearization point shared by the commands that need Jacobians.
#[derive(Debug, Args, Serialize)]
struct ModelArgs {
    /// Background conductivity (S/m).
    #[arg(long, default_value_t = 0.0215)]
    sigma: f64,
    /// Peak contact conductivity (S/m²).
    #[arg(long, default_value_t = 500.0)]
    contact: f64,
    #[arg(long, default_value = "odd-skip-15")]
    patterns: String,
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    #[arg(long)]
    mesh: PathBuf,
    /// Experiment config providing the phantom, background, contacts,
    /// patterns, seed and reference mode.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    /// Overrides the seed of the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    #[serde(skip)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct JacobianArgs {
    #[arg(long)]
    mesh: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    /// Output stem; `.bin` and `.json` are appended.
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct WeightingArgs {
    #[arg(long, default_value = "covariance")]
    weighting: WeightingKind,
    /// Correlation length ℓ (m) of the covariance weighting.
    #[arg(long, default_value_t = 0.02)]
    ell: f64,
    /// Standard deviation ς (S/m) of the covariance weighting.
    #[arg(long, default_value_t = 0.5)]
    prior_std: f64,
}

#[derive(Debug, Args, Serialize)]
struct ProjectInfoArgs {
    #[arg(long)]
    mesh: PathBuf,
    /// Jacobian dump stem; computed from the mesh when absent.
    #[arg(long)]
    jacobian: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    weighting: WeightingArgs,
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct ReconstructArgs {
    #[arg(long)]
    mesh: PathBuf,
    /// Difference data CSV.
    #[arg(long)]
    data: PathBuf,
    /// `noise.json` written by `simulate`.
    #[arg(long, required_unless_present = "noise_std")]
    noise_file: Option<PathBuf>,
    /// Noise standard deviation of each difference datum.
    #[arg(long)]
    noise_std: Option<f64>,
    #[arg(long)]
    jacobian: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value = "none")]
    projector: ProjectorKind,
    #[arg(long = "K", default_value_t = 80)]
    k: usize,
    #[command(flatten)]
    weighting: WeightingArgs,
    #[arg(long, default_value_t = 100.0)]
    gamma: f64,
    #[arg(long = "T", default_value_t = 1e-6)]
    smoothing: f64,
    #[arg(long, default_value_t = 10)]
    iterations: usize,
    /// Experiment config whose phantom is used as truth in the metrics.
    #[arg(long)]
    truth_config: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct ExperimentArgs {
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// experiment1, experiment2 or null.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    #[serde(skip)]
    out_root: Option<PathBuf>,
}

fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_VAR).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."))
}

/// `dir` if given, otherwise a directory under the output root named by the hash of `args`.
fn out_dir<T: Serialize>(dir: &Option<PathBuf>, args: &T) -> Result<PathBuf> {
    let d = match dir {
        Some(d) => d.clone(),
        None => output_root().join(run_dir_name(&config_hash(args)?)),
    };
    std::fs::create_dir_all(&d)?;
    Ok(d)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn load_config(config: &Option<PathBuf>, preset: &Option<String>) -> Result<ExperimentConfig> {
    match (config, preset) {
        (Some(p), _) => {
            let s = std::fs::read_to_string(p)
                .map_err(|e| EitError::Input(format!("cannot read config {}: {e}", p.display())))?;
            ExperimentConfig::from_json(&s)
        }
        (None, Some(name)) => ExperimentConfig::preset(name),
        (None, None) => Err(EitError::Config("give --config or --preset".into())),
    }
}

fn require_tags(bundle: &MeshBundle) -> Result<&RegionTags> {
    bundle
        .tags
        .as_ref()
        .ok_or_else(|| EitError::Input("mesh file has no roi_nodes; regenerate it with `mesh --roi`".into()))
}

fn model_jacobian(bundle: &MeshBundle, model: &ModelArgs) -> Result<JacobianSet> {
    let tags = require_tags(bundle)?;
    let m = bundle.electrodes.len();
    let sigma = ConductivityField::homogeneous(bundle.mesh.n_nodes(), model.sigma)?;
    let contact = ContactModel::uniform(m, model.contact, bundle.electrodes.half_width())?;
    let patterns = model.patterns.parse::<PatternScheme>()?.build(m)?;
    JacobianSet::compute(&bundle.mesh, &bundle.electrodes, &sigma, &contact, &patterns, tags)
}

fn load_jacobian(bundle: &MeshBundle, stem: &Option<PathBuf>, model: &ModelArgs) -> Result<JacobianSet> {
    let jac = match stem {
        Some(s) => read_jacobian(s)?,
        None => model_jacobian(bundle, model)?,
    };
    let tags = require_tags(bundle)?;
    if jac.roi.ncols() != tags.n_roi() || jac.roni.ncols() != tags.n_roni() {
        return Err(EitError::Shape(format!(
            "Jacobian has {} ROI and {} RONI columns, mesh has {} and {} nodes",
            jac.roi.ncols(),
            jac.roni.ncols(),
            tags.n_roi(),
            tags.n_roni()
        )));
    }
    Ok(jac)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Mesh(a) => cmd_mesh(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Jacobian(a) => cmd_jacobian(a),
        Command::ProjectInfo(a) => cmd_project_info(a),
        Command::Reconstruct(a) => cmd_reconstruct(a),
        Command::Experiment(a) => cmd_experiment(a),
    }
}

fn cmd_mesh(a: MeshArgs) -> Result<()> {
    let h = a.h.unwrap_or(a.radius / 20.0);
    let (mesh, electrodes) = generate_disk_mesh(a.radius, a.electrodes, a.half_width, h)?;
    let tags = match &a.roi {
        Some(p) => Some(tag_regions(&mesh, |x| p.eval(x))?),
        None => None,
    };
    let out = match &a.out {
        Some(p) => p.clone(),
        None => out_dir(&None, &a)?.join("mesh.json"),
    };
    write_mesh(&out, &MeshBundle { mesh, electrodes, tags })?;
    println!("{}", out.display());
    Ok(())
}

#[derive(Serialize)]
struct NoiseInfo {
    /// 0.5 % of the range of the noiseless data.
    std: f64,
    /// Variance of each difference datum.
    data_variance: f64,
    seed: u64,
    reference: ReferenceMode,
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let mut config = load_config(&a.config, &a.preset)?;
    if let Some(s) = a.seed {
        config.seed = s;
    }
    let bundle = read_mesh(&a.mesh)?;
    let (mesh, el) = (&bundle.mesh, &bundle.electrodes);
    let m = el.len();
    if m != config.geometry.n_electrodes {
        return Err(EitError::Config(format!(
            "mesh has {m} electrodes, config expects {}",
            config.geometry.n_electrodes
        )));
    }
    let contact = ContactModel::uniform(m, config.contact_peak, el.half_width())?;
    let patterns = config.pattern_scheme()?.build(m)?;
    let truth = ConductivityField::new(mesh.nodes().iter().map(|&p| config.conductivity_at(p)).collect())?;
    let clean = simulate_measurements(mesh, el, &truth, &contact, &patterns)?;
    let empty = ConductivityField::homogeneous(mesh.n_nodes(), config.sigma_bg)?;
    let reference_clean = simulate_measurements(mesh, el, &empty, &contact, &patterns)?;

    let noise = NoiseModel::new(compute_noise_std(&clean)?)?;
    let noisy = add_noise(&clean, &noise, config.seed);
    let (reference, variance) = match config.reference {
        ReferenceMode::Simulated => (reference_clean, noise.variance()),
        ReferenceMode::MeasuredClean => {
            (add_noise(&reference_clean, &noise, config.seed ^ 0x9e37_79b9_7f4a_7c15), 2.0 * noise.variance())
        }
    };
    let difference = noisy.difference(&reference)?;

    let mut hashed = serde_json::to_value(&config)?;
    hashed["mesh"] = serde_json::Value::String(config_hash(&serde_json::to_value(bundle.to_json()?)?)?);
    let dir = out_dir(&a.out_dir, &hashed)?;
    let mut manifest = RunManifest::new(config_hash(&hashed)?);
    manifest.inputs.push(a.mesh.clone());
    for (name, data) in [
        ("clean.csv", &clean),
        ("noisy.csv", &noisy),
        ("reference.csv", &reference),
        ("difference.csv", &difference),
    ] {
        let p = dir.join(name);
        write_measurements(&p, data)?;
        manifest.outputs.push(p);
    }
    let info = NoiseInfo { std: noise.std(), data_variance: variance, seed: config.seed, reference: config.reference };
    let p = dir.join("noise.json");
    write_json(&p, &info)?;
    manifest.outputs.push(p);
    manifest.write(&dir.join("manifest.json"))?;
    println!("{}", dir.display());
    Ok(())
}

fn cmd_jacobian(a: JacobianArgs) -> Result<()> {
    let bundle = read_mesh(&a.mesh)?;
    let t = Instant::now();
    let jac = model_jacobian(&bundle, &a.model)?;
    let stem = match &a.out {
        Some(s) => s.clone(),
        None => out_dir(&None, &a)?.join("jacobian"),
    };
    let (bin, json) = write_jacobian(&stem, &jac)?;
    let mut manifest = RunManifest::new(config_hash(&a)?);
    manifest.inputs.push(a.mesh.clone());
    manifest.outputs = vec![bin.clone(), json];
    manifest.time("jacobian", t.elapsed().as_secs_f64());
    manifest.write(&stem.with_extension("manifest.json"))?;
    println!("{}", bin.display());
    Ok(())
}

fn spectrum(bundle: &MeshBundle, jac: &JacobianSet, w: &WeightingArgs) -> Result<NuisanceSpectrum> {
    let weighting = nuisance_weighting(w.weighting, &bundle.mesh, require_tags(bundle)?, w.ell, w.prior_std)?;
    NuisanceSpectrum::compute(&jac.roni, &weighting)
}

fn cmd_project_info(a: ProjectInfoArgs) -> Result<()> {
    let bundle = read_mesh(&a.mesh)?;
    let jac = load_jacobian(&bundle, &a.jacobian, &a.model)?;
    let s = spectrum(&bundle, &jac, &a.weighting)?;
    let out = match &a.out {
        Some(p) => p.clone(),
        None => out_dir(&None, &a)?.join("spectrum.csv"),
    };
    write_spectrum(&out, s.singular_values(), &s.retained_energy())?;
    println!("{}", out.display());
    Ok(())
}

#[derive(Serialize)]
struct ReconstructReport {
    projector: ProjectorKind,
    k: Option<usize>,
    weighting: Option<WeightingKind>,
    gamma: f64,
    smoothing: f64,
    epsilon: f64,
    iterations: usize,
    data_variance: f64,
    objective_trace: Vec<f64>,
    metrics: eitloc::pipeline::RoiMetrics,
    truth_config: Option<PathBuf>,
}

fn data_variance(a: &ReconstructArgs) -> Result<f64> {
    if let Some(s) = a.noise_std {
        if !(s > 0.0) {
            return Err(EitError::Input(format!("--noise-std must be positive, got {s}")));
        }
        return Ok(s * s);
    }
    let p = a.noise_file.as_ref().expect("clap requires one of the noise options");
    let text = std::fs::read_to_string(p)
        .map_err(|e| EitError::Input(format!("cannot read noise file {}: {e}", p.display())))?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    v["data_variance"]
        .as_f64()
        .ok_or_else(|| EitError::Format(format!("{} lacks a numeric data_variance", p.display())))
}

fn cmd_reconstruct(a: ReconstructArgs) -> Result<()> {
    let bundle = read_mesh(&a.mesh)?;
    let tags = require_tags(&bundle)?;
    let data: MeasurementVector = read_measurements(&a.data)?;
    let variance = data_variance(&a)?;
    let jac = load_jacobian(&bundle, &a.jacobian, &a.model)?;
    if data.len() != jac.n_rows() {
        return Err(EitError::Shape(format!(
            "data has {} entries, the Jacobian {} rows",
            data.len(),
            jac.n_rows()
        )));
    }
    let dir = out_dir(&a.out_dir, &a)?;
    let mut manifest = RunManifest::new(config_hash(&a)?);
    manifest.inputs = vec![a.mesh.clone(), a.data.clone()];
    manifest.inputs.extend(a.noise_file.clone());
    manifest.inputs.extend(a.truth_config.clone());

    let t = Instant::now();
    let spectrum_path = dir.join("spectrum.csv");
    let (projector, spectrum) = if a.projector.uses_roni() {
        let s = spectrum(&bundle, &jac, &a.weighting)?;
        write_spectrum(&spectrum_path, s.singular_values(), &s.retained_energy())?;
        manifest.outputs.push(spectrum_path.clone());
        let w = nuisance_weighting(a.weighting.weighting, &bundle.mesh, tags, a.weighting.ell, a.weighting.prior_std)?;
        let built = build_projector(a.projector, &jac, Some(&w), a.k).map_err(|e| match e {
            EitError::Rank { message, columns } => EitError::Rank {
                message: format!("{message}; singular value spectrum written to {}", spectrum_path.display()),
                columns,
            },
            e => e,
        })?;
        (built.0, Some(s))
    } else {
        build_projector(a.projector, &jac, None, a.k)?
    };
    drop(spectrum);
    manifest.time("projector", t.elapsed().as_secs_f64());

    let t = Instant::now();
    let tv = TvOperator::new(&bundle.mesh, tags, Cutoff::Uniform)?;
    let prior = tv.finalize(&TvPrior::new(a.gamma, a.smoothing, Cutoff::Uniform)?)?;
    let problem = InversionProblem::new(jac.roi.clone(), &data, &vec![variance; data.len()], projector.as_ref())?;
    let rec = reconstruct(&problem, &prior, &tv, a.iterations)?;
    manifest.time("reconstruct", t.elapsed().as_secs_f64());

    let truth: Vec<f64> = match &a.truth_config {
        Some(p) => {
            let c = load_config(&Some(p.clone()), &None)?;
            tags.roi().iter().map(|&i| c.contrast_at(bundle.mesh.node(i))).collect()
        }
        None => vec![0.0; tags.n_roi()],
    };
    let metrics = eitloc::pipeline::roi_metrics(&bundle.mesh, tags, &rec.w, &truth)?;

    let mut full = vec![0.0; bundle.mesh.n_nodes()];
    for (&i, &v) in tags.roi().iter().zip(&rec.w) {
        full[i] = v;
    }
    let paths = [dir.join("w.csv"), dir.join("w.vtk"), dir.join("objective.csv"), dir.join("report.json")];
    write_node_values(&paths[0], tags.roi(), &rec.w)?;
    write_vtk(&paths[1], &bundle.mesh, "delta_sigma", &full)?;
    write_objective_trace(&paths[2], &rec.objective_trace)?;
    let uses_roni = a.projector.uses_roni();
    let report = ReconstructReport {
        projector: a.projector,
        k: uses_roni.then_some(a.k),
        weighting: uses_roni.then_some(a.weighting.weighting),
        gamma: a.gamma,
        smoothing: a.smoothing,
        epsilon: prior.epsilon,
        iterations: a.iterations,
        data_variance: variance,
        objective_trace: rec.objective_trace.clone(),
        metrics,
        truth_config: a.truth_config.clone(),
    };
    write_json(&paths[3], &report)?;
    manifest.outputs.extend(paths);
    manifest.write(&dir.join("manifest.json"))?;
    println!("{}", dir.display());
    Ok(())
}

fn cmd_experiment(a: ExperimentArgs) -> Result<()> {
    let config = load_config(&a.config, &a.preset)?;
    let prepared = PreparedExperiment::prepare(&config)?;
    let report = run_prepared(&prepared)?;
    let root = a.out_root.clone().unwrap_or_else(output_root);
    let dir = root.join(run_dir_name(&prepared.config_hash));
    write_experiment_outputs(&dir, &prepared, &report)?;
    let r = &report.results;
    let summary = serde_json::json!({
        "output_dir": dir,
        "unprojected": r.unprojected.metrics,
        "projected": r.projected.as_ref().map(|l| &l.metrics),
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}
