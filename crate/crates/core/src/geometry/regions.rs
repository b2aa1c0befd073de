use super::mesh::{Mesh, Point};
use crate::error::{EitError, Result};
use crate::sparse::SparseSym;

/// Partition of the mesh nodes into region of interest (ROI) and region of
/// non-interest (RONI). Both index lists are sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionTags {
    roi: Vec<usize>,
    roni: Vec<usize>,
}

impl RegionTags {
    /// Builds tags from an explicit ROI node list; the complement becomes the RONI.
    pub fn from_roi(n_nodes: usize, roi_nodes: &[usize]) -> Result<Self> {
        let mut mask = vec![false; n_nodes];
        for &i in roi_nodes {
            if i >= n_nodes {
                return Err(EitError::Input(format!("ROI node {i} out of range (n = {n_nodes})")));
            }
            mask[i] = true;
        }
        Self::from_mask(&mask)
    }

    pub fn from_mask(roi_mask: &[bool]) -> Result<Self> {
        let roi: Vec<usize> = (0..roi_mask.len()).filter(|&i| roi_mask[i]).collect();
        let roni: Vec<usize> = (0..roi_mask.len()).filter(|&i| !roi_mask[i]).collect();
        if roi.is_empty() {
            return Err(EitError::Region("region of interest is empty".into()));
        }
        if roni.is_empty() {
            return Err(EitError::Region("region of non-interest is empty".into()));
        }
        Ok(Self { roi, roni })
    }

    pub fn roi(&self) -> &[usize] {
        &self.roi
    }

    pub fn roni(&self) -> &[usize] {
        &self.roni
    }

    pub fn n_roi(&self) -> usize {
        self.roi.len()
    }

    pub fn n_roni(&self) -> usize {
        self.roni.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.roi.len() + self.roni.len()
    }

    pub fn roi_mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.n_nodes()];
        for &i in &self.roi {
            m[i] = true;
        }
        m
    }
}

/// Tags nodes where `predicate` holds as ROI, the rest as RONI.
pub fn tag_regions(mesh: &Mesh, predicate: impl Fn(Point) -> bool) -> Result<RegionTags> {
    let mask: Vec<bool> = mesh.nodes().iter().map(|&p| predicate(p)).collect();
    RegionTags::from_mask(&mask)
}

/// Mass matrix `∫ φ_i φ_j` over the whole domain, restricted to RONI nodes.
pub fn region_mass_matrix(mesh: &Mesh, tags: &RegionTags) -> Result<SparseSym> {
    if tags.n_nodes() != mesh.n_nodes() {
        return Err(EitError::Shape(format!(
            "tags cover {} nodes but the mesh has {}",
            tags.n_nodes(),
            mesh.n_nodes()
        )));
    }
    if tags.roni().is_empty() {
        return Err(EitError::Region("region of non-interest is empty".into()));
    }
    Ok(mesh.mass_matrix().submatrix(tags.roni()))
}

/// Per-node Euclidean distance to the nearest boundary edge.
pub fn boundary_distance_field(mesh: &Mesh) -> Vec<f64> {
    let on_boundary = mesh.boundary_node_mask();
    let segs: Vec<(Point, Point)> = mesh
        .boundary_edges()
        .iter()
        .map(|&[a, b]| (mesh.node(a), mesh.node(b)))
        .collect();
    mesh.nodes()
        .iter()
        .zip(&on_boundary)
        .map(|(&p, &b)| {
            if b {
                0.0
            } else {
                segs.iter().map(|&(a, c)| point_segment_distance(p, a, c)).fold(f64::INFINITY, f64::min)
            }
        })
        .collect()
}

pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = [a[0] + t * d[0], a[1] + t * d[1]];
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}
