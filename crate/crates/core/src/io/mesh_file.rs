use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{EitError, Result};
use crate::geometry::{ElectrodeSet, Mesh, Point, RegionTags};

pub const MESH_FORMAT: &str = "eitmesh-v1";

#[derive(Debug, Serialize, Deserialize)]
struct MeshFileV1 {
    format: String,
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<[usize; 2]>,
    electrode_half_width: f64,
    electrodes: Vec<Vec<usize>>,
    roi_nodes: Vec<usize>,
}

/// Mesh, electrodes and optional ROI tags as stored in one file.
#[derive(Debug, Clone)]
pub struct MeshBundle {
    pub mesh: Mesh,
    pub electrodes: ElectrodeSet,
    pub tags: Option<RegionTags>,
}

impl MeshBundle {
    pub fn to_json(&self) -> Result<String> {
        let file = MeshFileV1 {
            format: MESH_FORMAT.into(),
            nodes: self.mesh.nodes().to_vec(),
            triangles: self.mesh.triangles().to_vec(),
            boundary_edges: self.mesh.boundary_edges().to_vec(),
            electrode_half_width: self.electrodes.half_width(),
            electrodes: (0..self.electrodes.len()).map(|m| self.electrodes.edge_indices(m)).collect(),
            roi_nodes: self.tags.as_ref().map(|t| t.roi().to_vec()).unwrap_or_default(),
        };
        let mut s = serde_json::to_string_pretty(&file)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: MeshFileV1 = serde_json::from_str(s)?;
        if file.format != MESH_FORMAT {
            return Err(EitError::Format(format!(
                "unsupported mesh format '{}', expected '{MESH_FORMAT}'",
                file.format
            )));
        }
        let mesh = Mesh::from_parts(file.nodes, file.triangles, file.boundary_edges)?;
        let electrodes = ElectrodeSet::new(&mesh, file.electrodes, file.electrode_half_width)?;
        let tags = if file.roi_nodes.is_empty() {
            None
        } else {
            Some(RegionTags::from_roi(mesh.n_nodes(), &file.roi_nodes)?)
        };
        Ok(Self { mesh, electrodes, tags })
    }
}

pub fn write_mesh(path: &Path, bundle: &MeshBundle) -> Result<()> {
    std::fs::write(path, bundle.to_json()?)?;
    Ok(())
}

pub fn read_mesh(path: &Path) -> Result<MeshBundle> {
    let s = std::fs::read_to_string(path)
        .map_err(|e| EitError::Input(format!("cannot read mesh file {}: {e}", path.display())))?;
    MeshBundle::from_json(&s)
}
