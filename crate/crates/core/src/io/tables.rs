//! Plain-text outputs: measurement and field CSVs, objective traces,
//! singular value spectra, and legacy VTK.
//!
//! Floats are written as `{:.16e}`, i.e. 17 significant digits.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{EitError, Result};
use crate::forward::MeasurementVector;
use crate::geometry::Mesh;

pub const MEASUREMENT_HEADER: &str = "pattern_index,electrode_index,voltage";

fn write_text(path: &Path, s: &str) -> Result<()> {
    std::fs::write(path, s)?;
    Ok(())
}

fn read_text(path: &Path, what: &str) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| EitError::Input(format!("cannot read {what} {}: {e}", path.display())))
}

pub fn measurements_to_csv(m: &MeasurementVector) -> String {
    let mut s = String::with_capacity(40 * m.len() + 64);
    s.push_str(MEASUREMENT_HEADER);
    s.push('\n');
    let ne = m.n_electrodes();
    for (i, v) in m.entries().iter().enumerate() {
        writeln!(s, "{},{},{:.16e}", i / ne, i % ne, v).unwrap();
    }
    s
}

/// Parses a measurement CSV. Rows must be complete and in
/// pattern-major, electrode-minor order.
pub fn measurements_from_csv(s: &str) -> Result<MeasurementVector> {
    let mut lines = s.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| EitError::Format("empty measurement file".into()))?;
    if header.trim() != MEASUREMENT_HEADER {
        return Err(EitError::Format(format!(
            "measurement header '{}' differs from '{MEASUREMENT_HEADER}'",
            header.trim()
        )));
    }
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let bad = || EitError::Format(format!("bad measurement row {}: '{line}'", k + 2));
        let mut it = line.split(',').map(str::trim);
        let l: usize = it.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        let m: usize = it.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        let v: f64 = it.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        if it.next().is_some() || !v.is_finite() {
            return Err(bad());
        }
        rows.push((l, m, v));
    }
    let ne = rows.iter().map(|r| r.1).max().map_or(0, |m| m + 1);
    if ne == 0 {
        return Err(EitError::Format("measurement file has no rows".into()));
    }
    for (i, &(l, m, _)) in rows.iter().enumerate() {
        if l != i / ne || m != i % ne {
            return Err(EitError::Format(format!(
                "measurement row {} is ({l}, {m}), expected ({}, {})",
                i + 2,
                i / ne,
                i % ne
            )));
        }
    }
    if rows.len() % ne != 0 {
        return Err(EitError::Format("last measurement block is incomplete".into()));
    }
    MeasurementVector::new(ne, rows.into_iter().map(|r| r.2).collect())
}

pub fn write_measurements(path: &Path, m: &MeasurementVector) -> Result<()> {
    write_text(path, &measurements_to_csv(m))
}

pub fn read_measurements(path: &Path) -> Result<MeasurementVector> {
    measurements_from_csv(&read_text(path, "measurement file")?)
}

/// `node_index,value` for the given node list.
pub fn write_node_values(path: &Path, nodes: &[usize], values: &[f64]) -> Result<()> {
    if nodes.len() != values.len() {
        return Err(EitError::Shape(format!("{} nodes but {} values", nodes.len(), values.len())));
    }
    let mut s = String::from("node_index,value\n");
    for (i, v) in nodes.iter().zip(values) {
        writeln!(s, "{i},{v:.16e}").unwrap();
    }
    write_text(path, &s)
}

pub fn read_node_values(path: &Path) -> Result<(Vec<usize>, Vec<f64>)> {
    let s = read_text(path, "node value file")?;
    let mut lines = s.lines();
    if lines.next().map(str::trim) != Some("node_index,value") {
        return Err(EitError::Format(format!("{} lacks the node_index,value header", path.display())));
    }
    let mut nodes = Vec::new();
    let mut values = Vec::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let bad = || EitError::Format(format!("bad node value row '{line}'"));
        let (a, b) = line.split_once(',').ok_or_else(bad)?;
        nodes.push(a.trim().parse().map_err(|_| bad())?);
        values.push(b.trim().parse().map_err(|_| bad())?);
    }
    Ok((nodes, values))
}

/// `iteration,objective`, iteration 0 being the starting point.
pub fn write_objective_trace(path: &Path, trace: &[f64]) -> Result<()> {
    let mut s = String::from("iteration,objective\n");
    for (i, f) in trace.iter().enumerate() {
        writeln!(s, "{i},{f:.16e}").unwrap();
    }
    write_text(path, &s)
}

/// `index,singular_value,retained_energy`; index is one-based so that row
/// `K` gives the energy kept by a rank-`K` basis.
pub fn write_spectrum(path: &Path, singular_values: &[f64], retained_energy: &[f64]) -> Result<()> {
    if singular_values.len() != retained_energy.len() {
        return Err(EitError::Shape("spectrum and energy lengths differ".into()));
    }
    let mut s = String::from("index,singular_value,retained_energy\n");
    for (k, (sv, e)) in singular_values.iter().zip(retained_energy).enumerate() {
        writeln!(s, "{},{sv:.16e},{e:.16e}", k + 1).unwrap();
    }
    write_text(path, &s)
}

/// Legacy ASCII VTK unstructured grid with one point scalar.
pub fn vtk_string(mesh: &Mesh, name: &str, values: &[f64]) -> Result<String> {
    if values.len() != mesh.n_nodes() {
        return Err(EitError::Shape(format!(
            "field has {} values, mesh has {} nodes",
            values.len(),
            mesh.n_nodes()
        )));
    }
    let n = mesh.n_nodes();
    let nt = mesh.triangles().len();
    let mut s = String::with_capacity(64 * n + 32 * nt);
    s.push_str("# vtk DataFile Version 3.0\neitloc field\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    writeln!(s, "POINTS {n} double").unwrap();
    for p in mesh.nodes() {
        writeln!(s, "{:.16e} {:.16e} 0", p[0], p[1]).unwrap();
    }
    writeln!(s, "CELLS {nt} {}", 4 * nt).unwrap();
    for t in mesh.triangles() {
        writeln!(s, "3 {} {} {}", t[0], t[1], t[2]).unwrap();
    }
    writeln!(s, "CELL_TYPES {nt}").unwrap();
    for _ in 0..nt {
        s.push_str("5\n");
    }
    writeln!(s, "POINT_DATA {n}\nSCALARS {name} double 1\nLOOKUP_TABLE default").unwrap();
    for v in values {
        writeln!(s, "{v:.16e}").unwrap();
    }
    Ok(s)
}

pub fn write_vtk(path: &Path, mesh: &Mesh, name: &str, values: &[f64]) -> Result<()> {
    write_text(path, &vtk_string(mesh, name, values)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measurement_csv_is_lossless() {
        let vals: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37).sin() / 3.0 + 1e-17 * i as f64).collect();
        let m = MeasurementVector::new(4, vals.clone()).unwrap();
        let csv = measurements_to_csv(&m);
        assert!(csv.starts_with("pattern_index,electrode_index,voltage\n0,0,"));
        let back = measurements_from_csv(&csv).unwrap();
        assert_eq!(back.n_electrodes(), 4);
        assert_eq!(back.entries(), &vals[..]);
        assert_eq!(measurements_to_csv(&back), csv);
    }

    #[test]
    fn measurement_csv_rejects_bad_layout() {
        assert!(measurements_from_csv("a,b,c\n0,0,1\n").is_err());
        assert!(measurements_from_csv("pattern_index,electrode_index,voltage\n0,1,1\n0,0,1\n").is_err());
        assert!(measurements_from_csv("pattern_index,electrode_index,voltage\n0,0,x\n").is_err());
        assert!(measurements_from_csv("pattern_index,electrode_index,voltage\n").is_err());
    }
}
