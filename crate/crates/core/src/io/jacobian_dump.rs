//! Binary dump of a [`JacobianSet`]: `<stem>.bin` holds the ROI, RONI and
//! contact blocks back to back, each row-major little-endian `f64`;
//! `<stem>.json` records the shapes and the linearization point.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{EitError, Result};
use crate::forward::{ConductivityField, ContactModel};
use crate::jacobian::JacobianSet;

pub const JACOBIAN_FORMAT: &str = "eitjac-v1";

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    format: String,
    layout: String,
    rows: usize,
    roi_columns: usize,
    roni_columns: usize,
    contact_columns: usize,
    sigma0: Vec<f64>,
    contact_peaks: Vec<f64>,
    contact_tau: f64,
    contact_p: f64,
    contact_radius: f64,
}

fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("bin"), stem.with_extension("json"))
}

/// Writes `<stem>.bin` and `<stem>.json` and returns both paths.
pub fn write_jacobian(stem: &Path, set: &JacobianSet) -> Result<(PathBuf, PathBuf)> {
    let (bin, json) = paths(stem);
    let mut bytes = Vec::with_capacity(8 * set.n_rows() * (set.roi.ncols() + set.roni.ncols() + set.contact.ncols()));
    for block in [&set.roi, &set.roni, &set.contact] {
        for r in 0..block.nrows() {
            for c in 0..block.ncols() {
                bytes.extend_from_slice(&block[(r, c)].to_le_bytes());
            }
        }
    }
    std::fs::write(&bin, bytes)?;
    let sidecar = Sidecar {
        format: JACOBIAN_FORMAT.into(),
        layout: "row-major f64 little-endian; blocks roi, roni, contact".into(),
        rows: set.n_rows(),
        roi_columns: set.roi.ncols(),
        roni_columns: set.roni.ncols(),
        contact_columns: set.contact.ncols(),
        sigma0: set.sigma0.values().to_vec(),
        contact_peaks: set.contact0.peaks.clone(),
        contact_tau: set.contact0.tau,
        contact_p: set.contact0.p,
        contact_radius: set.contact0.radius,
    };
    std::fs::write(&json, serde_json::to_string_pretty(&sidecar)? + "\n")?;
    Ok((bin, json))
}

pub fn read_jacobian(stem: &Path) -> Result<JacobianSet> {
    let (bin, json) = paths(stem);
    let text = std::fs::read_to_string(&json)
        .map_err(|e| EitError::Input(format!("cannot read Jacobian sidecar {}: {e}", json.display())))?;
    let side: Sidecar = serde_json::from_str(&text)?;
    if side.format != JACOBIAN_FORMAT {
        return Err(EitError::Format(format!("unsupported Jacobian format '{}'", side.format)));
    }
    let bytes =
        std::fs::read(&bin).map_err(|e| EitError::Input(format!("cannot read Jacobian {}: {e}", bin.display())))?;
    let cols = [side.roi_columns, side.roni_columns, side.contact_columns];
    let expected = 8 * side.rows * cols.iter().sum::<usize>();
    if bytes.len() != expected {
        return Err(EitError::Format(format!(
            "Jacobian file has {} bytes, sidecar implies {expected}",
            bytes.len()
        )));
    }
    let mut values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let mut blocks = cols.iter().map(|&nc| {
        let data: Vec<f64> = values.by_ref().take(side.rows * nc).collect();
        DMatrix::from_row_slice(side.rows, nc, &data)
    });
    let (roi, roni, contact) = (blocks.next().unwrap(), blocks.next().unwrap(), blocks.next().unwrap());
    Ok(JacobianSet {
        roi,
        roni,
        contact,
        sigma0: ConductivityField::new(side.sigma0)?,
        contact0: ContactModel::new(side.contact_peaks, side.contact_tau, side.contact_p, side.contact_radius)?,
    })
}
