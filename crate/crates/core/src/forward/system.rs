//! Galerkin discretization of the smoothened complete electrode model.
//!
//! Unknowns are the nodal potentials `u` followed by coordinates `β` of the
//! electrode potentials in the zero-mean basis `q_k = e_0 − e_{k+1}`,
//! `k = 0..M−1`. In that basis the bilinear form
//!
//! `∫ σ ∇u·∇v + Σ_m ∫_{E_m} ζ (u − U_m)(v − V_m)`
//!
//! is symmetric positive definite, so no separate grounding is needed.

use super::contact::{contact_integrals, ContactModel, EdgeIntegrals};
use super::patterns::{check_zero_mean, CurrentPatternSet};
use crate::error::{EitError, Result};
use crate::geometry::{ElectrodeSet, Mesh};
use crate::sparse::{EnvelopeCholesky, SparseSym, TripletBuilder};

/// Nodal conductivity (S/m), piecewise linear on the mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct ConductivityField(Vec<f64>);

impl ConductivityField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0) || !v.is_finite()) {
            return Err(EitError::Input(format!("conductivity at node {i} must be positive, got {v}")));
        }
        Ok(Self(values))
    }

    pub fn homogeneous(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Triangle-wise mean, which is exact for `∫ σ ∇φ_i·∇φ_j` with P1 σ.
    pub fn element_mean(&self, tri: [usize; 3]) -> f64 {
        (self.0[tri[0]] + self.0[tri[1]] + self.0[tri[2]]) / 3.0
    }
}

/// Interior and electrode potentials for one current pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardSolution {
    /// Nodal interior potential (V).
    pub u: Vec<f64>,
    /// Electrode potentials (V), zero-mean.
    pub electrode_potentials: Vec<f64>,
}

/// Assembled and factorized SCEM system.
#[derive(Debug, Clone)]
pub struct ForwardSystem {
    n_nodes: usize,
    n_electrodes: usize,
    matrix: SparseSym,
    factor: EnvelopeCholesky,
    contact: Vec<Vec<EdgeIntegrals>>,
}

pub fn assemble_system(
    mesh: &Mesh,
    electrodes: &ElectrodeSet,
    sigma: &ConductivityField,
    contact: &ContactModel,
) -> Result<ForwardSystem> {
    let n = mesh.n_nodes();
    let m_el = electrodes.len();
    if sigma.len() != n {
        return Err(EitError::Shape(format!("conductivity has {} values for {n} nodes", sigma.len())));
    }
    if contact.peaks.len() != m_el {
        return Err(EitError::Shape(format!(
            "contact model has {} peaks for {m_el} electrodes",
            contact.peaks.len()
        )));
    }
    contact.validate()?;

    let integrals = contact_integrals(mesh, electrodes, contact);
    let matrix = assemble_matrix(mesh, sigma, contact, &integrals);
    let ordering = matrix.rcm_ordering(n);
    let factor = EnvelopeCholesky::factor_with_ordering(&matrix, ordering).map_err(|e| match e {
        EitError::Singular(msg) => EitError::Singular(format!("SCEM system could not be factorized: {msg}")),
        other => other,
    })?;
    Ok(ForwardSystem { n_nodes: n, n_electrodes: m_el, matrix, factor, contact: integrals })
}

fn assemble_matrix(
    mesh: &Mesh,
    sigma: &ConductivityField,
    contact: &ContactModel,
    integrals: &[Vec<EdgeIntegrals>],
) -> SparseSym {
    let n = mesh.n_nodes();
    let m_el = integrals.len();
    let mut b = TripletBuilder::with_capacity(n + m_el - 1, 9 * mesh.triangles().len());
    for (tri, el) in mesh.elements() {
        let s = sigma.element_mean(tri);
        let k = el.stiffness();
        for i in 0..3 {
            for j in 0..=i {
                b.push_sym(tri[i], tri[j], s * k[i][j]);
            }
        }
    }

    // Contact terms: C (node-node), D (node-electrode), E (electrode diagonal).
    let mut e_diag = vec![0.0; m_el];
    let mut d_cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m_el];
    for (m, edges) in integrals.iter().enumerate() {
        let z = contact.peaks[m];
        for ei in edges {
            let [a, c] = ei.nodes;
            b.push_sym(a, a, z * ei.mass[0][0]);
            b.push_sym(c, c, z * ei.mass[1][1]);
            b.push_sym(c, a, z * ei.mass[0][1]);
            d_cols[m].push((a, z * ei.load[0]));
            d_cols[m].push((c, z * ei.load[1]));
            e_diag[m] += z * ei.total;
        }
    }

    // −D Q and Qᵀ E Q with q_k = e_0 − e_{k+1}.
    for k in 0..m_el - 1 {
        let row = n + k;
        for &(i, v) in &d_cols[0] {
            b.push_sym(row, i, -v);
        }
        for &(i, v) in &d_cols[k + 1] {
            b.push_sym(row, i, v);
        }
        for l in 0..=k {
            let mut v = e_diag[0];
            if l == k {
                v += e_diag[k + 1];
            }
            b.push_sym(row, n + l, v);
        }
    }
    b.build()
}

impl ForwardSystem {
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_electrodes(&self) -> usize {
        self.n_electrodes
    }

    /// The assembled matrix over `[u; β]`.
    pub fn matrix(&self) -> &SparseSym {
        &self.matrix
    }

    /// Shape-weighted contact integrals per electrode edge.
    pub fn contact_integrals(&self) -> &[Vec<EdgeIntegrals>] {
        &self.contact
    }

    /// Maps electrode potentials `U` (zero-mean) to basis coordinates `β`.
    pub fn electrode_coordinates(&self, potentials: &[f64]) -> Vec<f64> {
        // U = Qβ with U_0 = Σβ and U_{k+1} = −β_k
        potentials[1..].iter().map(|x| -x).collect()
    }

    /// Maps basis coordinates `β` to electrode potentials `U = Qβ`.
    pub fn electrode_potentials(&self, beta: &[f64]) -> Vec<f64> {
        let mut u = Vec::with_capacity(self.n_electrodes);
        u.push(beta.iter().sum());
        u.extend(beta.iter().map(|x| -x));
        u
    }

    /// Right-hand side `[0; Qᵀ I]`.
    pub fn rhs(&self, pattern: &[f64]) -> Vec<f64> {
        let mut f = vec![0.0; self.n_nodes + self.n_electrodes - 1];
        for k in 0..self.n_electrodes - 1 {
            f[self.n_nodes + k] = pattern[0] - pattern[k + 1];
        }
        f
    }

    /// Solves for one zero-mean current pattern.
    pub fn solve(&self, pattern: &[f64]) -> Result<ForwardSolution> {
        if pattern.len() != self.n_electrodes {
            return Err(EitError::Shape(format!(
                "pattern has {} entries for {} electrodes",
                pattern.len(),
                self.n_electrodes
            )));
        }
        check_zero_mean(pattern)?;
        let x = self.factor.solve(&self.rhs(pattern));
        let mut potentials = self.electrode_potentials(&x[self.n_nodes..]);
        let mut u = x[..self.n_nodes].to_vec();
        // Remove the round-off mean of U together with the same shift of u.
        let mean = potentials.iter().sum::<f64>() / self.n_electrodes as f64;
        potentials.iter_mut().for_each(|v| *v -= mean);
        u.iter_mut().for_each(|v| *v -= mean);
        Ok(ForwardSolution { u, electrode_potentials: potentials })
    }

    /// Relative residual `‖A x − f‖ / ‖f‖` of a solution.
    pub fn relative_residual(&self, pattern: &[f64], sol: &ForwardSolution) -> f64 {
        let mut x = sol.u.clone();
        x.extend(self.electrode_coordinates(&sol.electrode_potentials));
        let f = self.rhs(pattern);
        let ax = self.matrix.mul_vec(&x);
        let r: f64 = ax.iter().zip(&f).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let nf: f64 = f.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nf == 0.0 {
            r
        } else {
            r / nf
        }
    }
}

/// Solves the forward problem for one pattern on an assembled system.
pub fn solve_forward(system: &ForwardSystem, pattern: &[f64]) -> Result<ForwardSolution> {
    system.solve(pattern)
}

/// Stacked electrode potentials `[U(I¹); …; U(Iᴸ)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementVector {
    n_electrodes: usize,
    entries: Vec<f64>,
}

impl MeasurementVector {
    pub fn new(n_electrodes: usize, entries: Vec<f64>) -> Result<Self> {
        if n_electrodes == 0 || entries.len() % n_electrodes != 0 {
            return Err(EitError::Shape(format!(
                "{} entries do not split into blocks of {n_electrodes}",
                entries.len()
            )));
        }
        Ok(Self { n_electrodes, entries })
    }

    pub fn n_electrodes(&self) -> usize {
        self.n_electrodes
    }

    pub fn n_patterns(&self) -> usize {
        self.entries.len() / self.n_electrodes
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<f64> {
        self.entries
    }

    pub fn block(&self, l: usize) -> &[f64] {
        &self.entries[l * self.n_electrodes..(l + 1) * self.n_electrodes]
    }

    /// Entry-wise `self − other`.
    pub fn difference(&self, other: &MeasurementVector) -> Result<MeasurementVector> {
        if self.n_electrodes != other.n_electrodes || self.len() != other.len() {
            return Err(EitError::Shape("measurement vectors have different layouts".into()));
        }
        Ok(MeasurementVector {
            n_electrodes: self.n_electrodes,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a - b).collect(),
        })
    }

    /// Subtracts the mean of every M-block.
    pub fn zero_mean_blocks(&self) -> MeasurementVector {
        let mut entries = self.entries.clone();
        for block in entries.chunks_mut(self.n_electrodes) {
            let mean = block.iter().sum::<f64>() / block.len() as f64;
            block.iter_mut().for_each(|v| *v -= mean);
        }
        MeasurementVector { n_electrodes: self.n_electrodes, entries }
    }
}

/// Forward solutions for every pattern of a set, sharing one factorization.
pub fn solve_patterns(system: &ForwardSystem, patterns: &CurrentPatternSet) -> Result<Vec<ForwardSolution>> {
    if patterns.n_electrodes() != system.n_electrodes() {
        return Err(EitError::Shape(format!(
            "patterns are for {} electrodes, system has {}",
            patterns.n_electrodes(),
            system.n_electrodes()
        )));
    }
    patterns.iter().map(|p| system.solve(p)).collect()
}

pub fn stack_measurements(n_electrodes: usize, solutions: &[ForwardSolution]) -> MeasurementVector {
    let entries = solutions.iter().flat_map(|s| s.electrode_potentials.iter().copied()).collect();
    MeasurementVector { n_electrodes, entries }
}

/// Assembles once and stacks the electrode potentials of all patterns.
pub fn simulate_measurements(
    mesh: &Mesh,
    electrodes: &ElectrodeSet,
    sigma: &ConductivityField,
    contact: &ContactModel,
    patterns: &CurrentPatternSet,
) -> Result<MeasurementVector> {
    let system = assemble_system(mesh, electrodes, sigma, contact)?;
    let sols = solve_patterns(&system, patterns)?;
    Ok(stack_measurements(electrodes.len(), &sols))
}
