//! File formats: meshes, measurements, fields, Jacobian dumps and run manifests.

mod jacobian_dump;
mod manifest;
mod mesh_file;
mod predicate;
mod tables;

pub use jacobian_dump::{read_jacobian, write_jacobian, JACOBIAN_FORMAT};
pub use manifest::{config_hash, run_dir_name, RunManifest, StageTiming};
pub use mesh_file::{read_mesh, write_mesh, MeshBundle, MESH_FORMAT};
pub use predicate::RoiPredicate;
pub use tables::{
    measurements_from_csv, measurements_to_csv, read_measurements, read_node_values, vtk_string, write_measurements,
    write_node_values, write_objective_trace, write_spectrum, write_vtk, MEASUREMENT_HEADER,
};
