use serde::{Deserialize, Serialize};

use crate::error::{EitError, Result};
use crate::geometry::{Mesh, Point, RegionTags};
use crate::sparse::SparseSym;

/// Error measures of an ROI reconstruction against the true change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiMetrics {
    /// `‖w − w*‖_M / ‖w*‖_M`; absent for a zero truth.
    pub relative_error: Option<f64>,
    /// Centroid of the nodes where `w ≥ max(w)/2`; absent if `max(w) ≤ 0`.
    pub centroid: Option<Point>,
    /// Distance between the centroids of `w` and of the truth.
    pub centroid_error: Option<f64>,
    /// `‖w‖²_M` over the ROI nodes outside the true inclusion support.
    pub artifact_energy: f64,
    pub peak: f64,
    /// `‖w‖_M`.
    pub norm: f64,
}

/// Mass matrix restricted to the ROI nodes and the lumped node weights.
fn roi_mass(mesh: &Mesh, tags: &RegionTags) -> (SparseSym, Vec<f64>) {
    let m = mesh.mass_matrix().submatrix(tags.roi());
    let lumped = (0..m.dim()).map(|i| m.row(i).map(|(_, v)| v).sum()).collect();
    (m, lumped)
}

/// Weighted centroid of the nodes at or above half the maximum of `w`.
fn half_max_centroid(coords: &[Point], lumped: &[f64], w: &[f64]) -> Option<Point> {
    let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return None;
    }
    let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
    for ((p, &m), &v) in coords.iter().zip(lumped).zip(w) {
        if v >= 0.5 * max {
            let wt = v * m;
            sx += wt * p[0];
            sy += wt * p[1];
            sw += wt;
        }
    }
    Some([sx / sw, sy / sw])
}

/// Compares `w` with the true change `truth`, both given on the ROI nodes
/// in the order of `tags.roi()`.
pub fn roi_metrics(mesh: &Mesh, tags: &RegionTags, w: &[f64], truth: &[f64]) -> Result<RoiMetrics> {
    if tags.n_nodes() != mesh.n_nodes() || w.len() != tags.n_roi() || truth.len() != tags.n_roi() {
        return Err(EitError::Shape(format!(
            "metrics need {} ROI values, got w = {} and truth = {}",
            tags.n_roi(),
            w.len(),
            truth.len()
        )));
    }
    if w.iter().chain(truth).any(|v| !v.is_finite()) {
        return Err(EitError::Input("reconstruction or truth contains non-finite values".into()));
    }
    let (m, lumped) = roi_mass(mesh, tags);
    let coords: Vec<Point> = tags.roi().iter().map(|&i| mesh.node(i)).collect();

    let diff: Vec<f64> = w.iter().zip(truth).map(|(a, b)| a - b).collect();
    let truth_sq = m.quad_form(truth);
    let relative_error = (truth_sq > 0.0).then(|| (m.quad_form(&diff) / truth_sq).sqrt());

    let centroid = half_max_centroid(&coords, &lumped, w);
    let centroid_error = match (centroid, half_max_centroid(&coords, &lumped, truth)) {
        (Some(a), Some(b)) => Some((a[0] - b[0]).hypot(a[1] - b[1])),
        _ => None,
    };

    let outside: Vec<f64> = w.iter().zip(truth).map(|(&v, &t)| if t == 0.0 { v } else { 0.0 }).collect();
    Ok(RoiMetrics {
        relative_error,
        centroid,
        centroid_error,
        artifact_energy: m.quad_form(&outside),
        peak: w.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        norm: m.quad_form(w).max(0.0).sqrt(),
    })
}
