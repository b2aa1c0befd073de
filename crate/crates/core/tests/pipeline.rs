use eitloc::geometry::{generate_disk_mesh, tag_regions, RegionTags};
use eitloc::pipeline::{
    roi_metrics, run_experiment, run_prepared, write_experiment_outputs, ExperimentConfig, PreparedExperiment,
    ProjectorKind, ReferenceMode, TANK_RADIUS,
};
use eitloc::projection::WeightingKind;
use eitloc::EitError;

/// Experiment 1 layout on coarse meshes.
fn small_config() -> ExperimentConfig {
    let mut c = ExperimentConfig::experiment1();
    c.geometry.h_inversion = TANK_RADIUS / 8.0;
    c.geometry.h_truth = TANK_RADIUS / 20.0;
    c.k = 20;
    c.prior.iterations = 3;
    c
}

fn disk_truth(tags: &RegionTags, mesh: &eitloc::geometry::Mesh, c: [f64; 2], r: f64) -> Vec<f64> {
    tags.roi()
        .iter()
        .map(|&i| {
            let p = mesh.node(i);
            if (p[0] - c[0]).hypot(p[1] - c[1]) < r {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

#[test]
fn metrics_vanish_for_exact_reconstruction() {
    let (mesh, _) = generate_disk_mesh(TANK_RADIUS, 32, 0.005, TANK_RADIUS / 15.0).unwrap();
    let tags = tag_regions(&mesh, |p| p[1] > 0.0).unwrap();
    let truth = disk_truth(&tags, &mesh, [-0.03, 0.05], 0.02);
    let m = roi_metrics(&mesh, &tags, &truth, &truth).unwrap();
    assert_eq!(m.relative_error, Some(0.0));
    assert_eq!(m.centroid_error, Some(0.0));
    assert_eq!(m.artifact_energy, 0.0);
    assert_eq!(m.peak, 1.0);
}

#[test]
fn constant_artifact_energy_is_area() {
    let (mesh, _) = generate_disk_mesh(TANK_RADIUS, 32, 0.005, TANK_RADIUS / 40.0).unwrap();
    let tags = tag_regions(&mesh, |p| p[1] > 0.0).unwrap();
    let (c0, r) = ([-0.03, 0.05], 0.02);
    let truth = disk_truth(&tags, &mesh, c0, r);
    let c = 0.3;
    let w: Vec<f64> = truth.iter().map(|&t| if t == 0.0 { c } else { t }).collect();
    let m = roi_metrics(&mesh, &tags, &w, &truth).unwrap();
    let area = 0.5 * std::f64::consts::PI * TANK_RADIUS * TANK_RADIUS - std::f64::consts::PI * r * r;
    let expected = c * c * area;
    // the P1 indicator differs from the exact one in a layer one element wide
    assert!((m.artifact_energy - expected).abs() <= 0.05 * expected, "{} vs {expected}", m.artifact_energy);
    assert!(m.artifact_energy < expected);
}

#[test]
fn metrics_are_invariant_under_renumbering() {
    let (mesh, _) = generate_disk_mesh(TANK_RADIUS, 32, 0.005, TANK_RADIUS / 12.0).unwrap();
    let tags = tag_regions(&mesh, |p| p[1] > 0.0).unwrap();
    let truth = disk_truth(&tags, &mesh, [-0.03, 0.05], 0.02);
    let w: Vec<f64> = tags
        .roi()
        .iter()
        .map(|&i| {
            let p = mesh.node(i);
            (-((p[0] + 0.02).powi(2) + (p[1] - 0.045).powi(2)) / 4e-4).exp() + 0.1 * (40.0 * p[0]).sin()
        })
        .collect();
    let a = roi_metrics(&mesh, &tags, &w, &truth).unwrap();

    // scramble the node numbering with a fixed stride permutation
    let n = mesh.n_nodes();
    let stride = (1..n).rev().find(|s| gcd(*s, n) == 1 && *s > n / 3).unwrap();
    let order: Vec<usize> = (0..n).map(|k| (k * stride + 7) % n).collect();
    let mesh2 = mesh.renumbered(&order).unwrap();
    let tags2 = tag_regions(&mesh2, |p| p[1] > 0.0).unwrap();
    let value = |vals: &[f64], node: usize| vals[tags.roi().binary_search(&node).unwrap()];
    let w2: Vec<f64> = tags2.roi().iter().map(|&k| value(&w, order[k])).collect();
    let t2: Vec<f64> = tags2.roi().iter().map(|&k| value(&truth, order[k])).collect();
    let b = roi_metrics(&mesh2, &tags2, &w2, &t2).unwrap();

    let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1e-300);
    assert!(close(a.relative_error.unwrap(), b.relative_error.unwrap()));
    assert!(close(a.artifact_energy, b.artifact_energy));
    assert!(close(a.norm, b.norm));
    assert_eq!(a.peak, b.peak);
    let (ca, cb) = (a.centroid.unwrap(), b.centroid.unwrap());
    assert!((ca[0] - cb[0]).abs() < 1e-14 && (ca[1] - cb[1]).abs() < 1e-14);
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[test]
fn zero_reconstruction_has_no_centroid() {
    let (mesh, _) = generate_disk_mesh(TANK_RADIUS, 32, 0.005, TANK_RADIUS / 8.0).unwrap();
    let tags = tag_regions(&mesh, |p| p[1] > 0.0).unwrap();
    let truth = disk_truth(&tags, &mesh, [-0.03, 0.05], 0.03);
    let m = roi_metrics(&mesh, &tags, &vec![0.0; tags.n_roi()], &truth).unwrap();
    assert_eq!(m.centroid, None);
    assert_eq!(m.centroid_error, None);
    assert_eq!(m.relative_error, Some(1.0));
    assert!(roi_metrics(&mesh, &tags, &[0.0], &truth).is_err());
}

#[test]
fn experiment_is_deterministic() {
    let c = small_config();
    let a = run_experiment(&c).unwrap();
    let b = run_experiment(&c).unwrap();
    assert_eq!(a.results, b.results);
    let r = &a.results;
    assert!(r.truth_nodes as f64 >= 1.5 * r.inversion_nodes as f64);
    assert_eq!(r.measurements, 512);
    let p = r.projected.as_ref().unwrap();
    assert_eq!(p.projector, ProjectorKind::Roni);
    assert_eq!(p.objective_trace.len(), 4);
    for leg in [&r.unprojected, p] {
        assert!(leg.metrics.artifact_energy.is_finite() && leg.metrics.norm.is_finite());
        assert_eq!(leg.w.len(), r.roi_nodes);
    }
    assert!(r.singular_values.windows(2).all(|s| s[0] >= s[1]));
}

#[test]
fn null_phantom_in_measured_mode_reconstructs_noise() {
    let mut c = small_config();
    c.roi_inclusions.clear();
    c.roni_inclusions.clear();
    c.reference = ReferenceMode::MeasuredClean;
    let prepared = PreparedExperiment::prepare(&c).unwrap();
    assert!((prepared.data_variance - 2.0 * prepared.noise_std.powi(2)).abs() <= 1e-15 * prepared.data_variance);
    let report = run_prepared(&prepared).unwrap();
    let noise = prepared.noise_only_data(99).unwrap();
    let floor = prepared.metrics(&prepared.reconstruct(&noise, false).unwrap().w).unwrap().norm;
    assert!(report.results.unprojected.metrics.norm < 10.0 * floor);
    assert_eq!(report.results.unprojected.metrics.relative_error, None);
}

#[test]
fn inverse_crime_guard() {
    let mut c = small_config();
    c.geometry.h_truth = 0.95 * c.geometry.h_inversion;
    match PreparedExperiment::prepare(&c) {
        Err(EitError::Config(msg)) => assert!(msg.contains("truth mesh"), "{msg}"),
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn projector_variants() {
    for (kind, weighting) in [
        (ProjectorKind::Contact, WeightingKind::Covariance),
        (ProjectorKind::ContactRoni, WeightingKind::MassMatrix),
        (ProjectorKind::None, WeightingKind::Identity),
    ] {
        let mut c = small_config();
        c.projector = kind;
        c.weighting = weighting;
        c.prior.iterations = 1;
        let p = PreparedExperiment::prepare(&c).unwrap();
        match kind {
            ProjectorKind::None => assert!(p.projector.is_none()),
            ProjectorKind::Contact => assert_eq!(p.projector.as_ref().unwrap().rank_removed(), 32),
            _ => assert_eq!(p.projector.as_ref().unwrap().rank_removed(), 32 + c.k),
        }
        let r = run_prepared(&p).unwrap();
        assert_eq!(r.results.projected.is_some(), kind != ProjectorKind::None);
    }
}

#[test]
fn too_large_k_is_a_rank_error() {
    let mut c = small_config();
    c.k = 600;
    assert!(matches!(PreparedExperiment::prepare(&c), Err(EitError::Rank { .. })));
}

#[test]
fn outputs_are_written() {
    let c = small_config();
    let prepared = PreparedExperiment::prepare(&c).unwrap();
    let report = run_prepared(&prepared).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = write_experiment_outputs(dir.path(), &prepared, &report).unwrap();
    for f in &files {
        assert!(f.is_file(), "{}", f.display());
    }
    let names: Vec<String> = files.iter().map(|f| f.file_name().unwrap().to_string_lossy().into()).collect();
    for n in ["report.json", "w_projected.vtk", "w_unprojected.csv", "spectrum.csv", "manifest.json"] {
        assert!(names.iter().any(|x| x == n), "{n} missing");
    }
    let vtk = std::fs::read_to_string(dir.path().join("w_projected.vtk")).unwrap();
    assert!(vtk.starts_with("# vtk DataFile Version 3.0"));
    assert!(vtk.contains("SCALARS delta_sigma double 1"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json["results"]["config_hash"].as_str().unwrap(), prepared.config_hash);
}
