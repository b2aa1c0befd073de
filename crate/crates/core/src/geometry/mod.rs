//! Meshes, electrodes and region tags.

mod electrodes;
mod generate;
mod mesh;
mod regions;

pub use electrodes::{ArcEdge, ElectrodeSet};
pub use generate::{generate_disk_mesh, generate_disk_mesh_graded, BoundaryGrading, DiskSpec};
pub use mesh::{ElementGeometry, Mesh, Point};
pub use regions::{boundary_distance_field, point_segment_distance, region_mass_matrix, tag_regions, RegionTags};
