//! Measurement Jacobians by the adjoint sampling formula.
//!
//! With `u` the potential for current pattern `I` and `ũ` the potential for a
//! measurement pattern `Ĩ`, the derivative of `Ĩ·U(I)` in direction `η` is
//! `−∫ η ∇u·∇ũ dx`. Measurement patterns `e_m − 1/M` give the derivatives of the
//! zero-mean electrode potentials directly. Rows are stacked as `l·M + m`.

use nalgebra::DMatrix;

use crate::error::{EitError, Result};
use crate::forward::{
    assemble_system, simulate_measurements, solve_patterns, ConductivityField, ContactModel, CurrentPatternSet,
    ForwardSolution, ForwardSystem,
};
use crate::geometry::{ElectrodeSet, ElementGeometry, Mesh, RegionTags};

/// Forward and adjoint solutions at a linearization point.
struct Sensitivity {
    system: ForwardSystem,
    forward: Vec<ForwardSolution>,
    adjoint: Vec<ForwardSolution>,
}

impl Sensitivity {
    fn new(
        mesh: &Mesh,
        electrodes: &ElectrodeSet,
        sigma: &ConductivityField,
        contact: &ContactModel,
        patterns: &CurrentPatternSet,
    ) -> Result<Self> {
        let system = assemble_system(mesh, electrodes, sigma, contact)?;
        let forward = solve_patterns(&system, patterns)?;
        let m = electrodes.len();
        let adjoint = (0..m)
            .map(|k| {
                let mut p = vec![-1.0 / m as f64; m];
                p[k] += 1.0;
                system.solve(&p)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { system, forward, adjoint })
    }

    fn n_rows(&self) -> usize {
        self.forward.len() * self.adjoint.len()
    }

    /// `−(area/3) ∇u^(l)·∇ũ^(m)` for every triangle, as `L·M` rows per triangle.
    fn element_products(&self, mesh: &Mesh) -> Vec<Vec<f64>> {
        let grad = |sol: &ForwardSolution, tri: [usize; 3], el: &ElementGeometry| {
            el.gradient([sol.u[tri[0]], sol.u[tri[1]], sol.u[tri[2]]])
        };
        mesh.elements()
            .map(|(tri, el)| {
                let gu: Vec<[f64; 2]> = self.forward.iter().map(|s| grad(s, tri, &el)).collect();
                let gv: Vec<[f64; 2]> = self.adjoint.iter().map(|s| grad(s, tri, &el)).collect();
                let w = -el.area / 3.0;
                let mut out = Vec::with_capacity(gu.len() * gv.len());
                for a in &gu {
                    for b in &gv {
                        out.push(w * (a[0] * b[0] + a[1] * b[1]));
                    }
                }
                out
            })
            .collect()
    }

    fn conductivity(&self, mesh: &Mesh, nodes: &[usize]) -> Result<DMatrix<f64>> {
        let n = mesh.n_nodes();
        let mut column = vec![usize::MAX; n];
        for (c, &j) in nodes.iter().enumerate() {
            if j >= n {
                return Err(EitError::Input(format!("node {j} out of range for a mesh with {n} nodes")));
            }
            if column[j] != usize::MAX {
                return Err(EitError::Input(format!("node {j} listed twice")));
            }
            column[j] = c;
        }
        let rows = self.n_rows();
        let mut jac = DMatrix::zeros(rows, nodes.len());
        let products = self.element_products(mesh);
        for (tri, prod) in mesh.triangles().iter().zip(&products) {
            for &v in tri {
                let c = column[v];
                if c == usize::MAX {
                    continue;
                }
                let mut col = jac.column_mut(c);
                for (r, p) in prod.iter().enumerate() {
                    col[r] += p;
                }
            }
        }
        Ok(jac)
    }

    fn contact(&self) -> DMatrix<f64> {
        let m_el = self.adjoint.len();
        let mut jac = DMatrix::zeros(self.n_rows(), m_el);
        for (m, edges) in self.system.contact_integrals().iter().enumerate() {
            for (l, f) in self.forward.iter().enumerate() {
                for (k, a) in self.adjoint.iter().enumerate() {
                    let big_u = f.electrode_potentials[m];
                    let big_v = a.electrode_potentials[m];
                    let s: f64 = edges.iter().map(|e| e.coupling(&f.u, big_u, &a.u, big_v)).sum();
                    jac[(l * m_el + k, m)] = -s;
                }
            }
        }
        jac
    }
}

/// Derivatives of the stacked data with respect to the nodal conductivities in `nodes`.
pub fn conductivity_jacobian(
    mesh: &Mesh,
    electrodes: &ElectrodeSet,
    sigma: &ConductivityField,
    contact: &ContactModel,
    patterns: &CurrentPatternSet,
    nodes: &[usize],
) -> Result<DMatrix<f64>> {
    Sensitivity::new(mesh, electrodes, sigma, contact, patterns)?.conductivity(mesh, nodes)
}

/// Derivatives of the stacked data with respect to the contact peaks `ζ_m`.
pub fn contact_jacobian(
    mesh: &Mesh,
    electrodes: &ElectrodeSet,
    sigma: &ConductivityField,
    contact: &ContactModel,
    patterns: &CurrentPatternSet,
) -> Result<DMatrix<f64>> {
    Ok(Sensitivity::new(mesh, electrodes, sigma, contact, patterns)?.contact())
}

/// Parameter perturbed by [`fd_jacobian`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parameter {
    /// Nodal conductivity at a node.
    Conductivity(usize),
    /// Contact peak of an electrode.
    Contact(usize),
}

/// Central difference `(F(x+δ) − F(x−δ)) / 2δ`.
pub fn central_difference(f: impl Fn(f64) -> Result<Vec<f64>>, x: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) {
        return Err(EitError::Parameter(format!("finite-difference step must be positive, got {step}")));
    }
    let plus = f(x + step)?;
    let minus = f(x - step)?;
    Ok(plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * step)).collect())
}

/// Finite-difference column of the data with respect to one parameter.
pub fn fd_jacobian(
    mesh: &Mesh,
    electrodes: &ElectrodeSet,
    sigma: &ConductivityField,
    contact: &ContactModel,
    patterns: &CurrentPatternSet,
    parameter: Parameter,
    step: f64,
) -> Result<Vec<f64>> {
    match parameter {
        Parameter::Conductivity(j) => {
            let base = *sigma
                .values()
                .get(j)
                .ok_or_else(|| EitError::Input(format!("node {j} out of range")))?;
            if base - step <= 0.0 {
                return Err(EitError::Input(format!(
                    "step {step} makes the conductivity at node {j} nonpositive"
                )));
            }
            central_difference(
                |x| {
                    let mut v = sigma.values().to_vec();
                    v[j] = x;
                    let s = ConductivityField::new(v)?;
                    Ok(simulate_measurements(mesh, electrodes, &s, contact, patterns)?.into_entries())
                },
                base,
                step,
            )
        }
        Parameter::Contact(m) => {
            let base = *contact
                .peaks
                .get(m)
                .ok_or_else(|| EitError::Input(format!("electrode {m} out of range")))?;
            if base - step <= 0.0 {
                return Err(EitError::Input(format!("step {step} makes contact peak {m} nonpositive")));
            }
            central_difference(
                |x| {
                    let mut c = contact.clone();
                    c.peaks[m] = x;
                    Ok(simulate_measurements(mesh, electrodes, sigma, &c, patterns)?.into_entries())
                },
                base,
                step,
            )
        }
    }
}

/// ROI, RONI and contact Jacobians at one linearization point.
#[derive(Debug, Clone)]
pub struct JacobianSet {
    pub roi: DMatrix<f64>,
    pub roni: DMatrix<f64>,
    pub contact: DMatrix<f64>,
    pub sigma0: ConductivityField,
    pub contact0: ContactModel,
}

impl JacobianSet {
    /// Computes all three blocks from one set of forward and adjoint solves.
    pub fn compute(
        mesh: &Mesh,
        electrodes: &ElectrodeSet,
        sigma: &ConductivityField,
        contact: &ContactModel,
        patterns: &CurrentPatternSet,
        tags: &RegionTags,
    ) -> Result<Self> {
        if tags.n_nodes() != mesh.n_nodes() {
            return Err(EitError::Shape(format!(
                "region tags cover {} nodes, mesh has {}",
                tags.n_nodes(),
                mesh.n_nodes()
            )));
        }
        let s = Sensitivity::new(mesh, electrodes, sigma, contact, patterns)?;
        Ok(Self {
            roi: s.conductivity(mesh, tags.roi())?,
            roni: s.conductivity(mesh, tags.roni())?,
            contact: s.contact(),
            sigma0: sigma.clone(),
            contact0: contact.clone(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.roi.nrows()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central_difference_is_exact_for_linear_maps() {
        for step in [1e-3, 0.5, 10.0] {
            let d = central_difference(|x| Ok(vec![3.0 * x - 1.0, -0.25 * x]), 2.0, step).unwrap();
            assert!((d[0] - 3.0).abs() < 1e-12 && (d[1] + 0.25).abs() < 1e-12);
        }
        assert!(central_difference(|x| Ok(vec![x]), 0.0, 0.0).is_err());
    }
}
