use nalgebra::{DMatrix, DVector};

use crate::error::{EitError, Result};
use crate::geometry::{boundary_distance_field, ElementGeometry, Mesh, RegionTags};
use crate::sparse::{EnvelopeCholesky, SparseSym, TripletBuilder};

/// `υ = [½(1 + tanh(c(d − b)))]⁻¹`; equals 2 at `d = b` and tends to 1 inside.
pub fn cutoff_weight(distance: f64, c: f64, b: f64) -> f64 {
    2.0 / (1.0 + (c * (distance - b)).tanh())
}

/// Spatial weight `υ` of the TV functional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cutoff {
    Uniform,
    /// Large near the boundary, see [`cutoff_weight`].
    BoundaryPenalizing { c: f64, b: f64 },
}

/// Smoothened total variation prior `γ [∫ υ sqrt(|∇w|² + T²) + ε/2 |w|²]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvPrior {
    pub gamma: f64,
    pub smoothing: f64,
    pub epsilon: f64,
    pub cutoff: Cutoff,
}

impl TvPrior {
    /// `ε` starts at zero; see [`TvOperator::finalize`].
    pub fn new(gamma: f64, smoothing: f64, cutoff: Cutoff) -> Result<Self> {
        if !(gamma > 0.0) || !(smoothing > 0.0) {
            return Err(EitError::Parameter(format!(
                "prior strength and smoothing must be positive, got γ = {gamma}, T = {smoothing}"
            )));
        }
        if let Cutoff::BoundaryPenalizing { c, b } = cutoff {
            if !(c > 0.0) || !(b > 0.0) {
                return Err(EitError::Parameter(format!("cutoff parameters must be positive, got c = {c}, b = {b}")));
            }
        }
        Ok(Self { gamma, smoothing, epsilon: 0.0, cutoff })
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }
}

/// ROI triangles and their cutoff weights; `w` lives on the ROI nodes.
#[derive(Debug, Clone)]
pub struct TvOperator {
    n_roi: usize,
    elements: Vec<([usize; 3], ElementGeometry, f64)>,
}

impl TvOperator {
    /// Uses the triangles whose three vertices are all ROI nodes.
    pub fn new(mesh: &Mesh, tags: &RegionTags, cutoff: Cutoff) -> Result<Self> {
        if tags.n_nodes() != mesh.n_nodes() {
            return Err(EitError::Shape("region tags do not match the mesh".into()));
        }
        let mut local = vec![usize::MAX; mesh.n_nodes()];
        for (k, &i) in tags.roi().iter().enumerate() {
            local[i] = k;
        }
        let upsilon: Vec<f64> = match cutoff {
            Cutoff::Uniform => vec![1.0; mesh.n_nodes()],
            Cutoff::BoundaryPenalizing { c, b } => {
                boundary_distance_field(mesh).iter().map(|&d| cutoff_weight(d, c, b)).collect()
            }
        };
        let mut touched = vec![false; tags.n_roi()];
        let mut elements = Vec::new();
        for (tri, el) in mesh.elements() {
            let loc = tri.map(|i| local[i]);
            if loc.iter().any(|&i| i == usize::MAX) {
                continue;
            }
            loc.iter().for_each(|&i| touched[i] = true);
            let u = (upsilon[tri[0]] + upsilon[tri[1]] + upsilon[tri[2]]) / 3.0;
            elements.push((loc, el, u));
        }
        if let Some(k) = touched.iter().position(|t| !t) {
            return Err(EitError::Region(format!(
                "ROI node {} belongs to no triangle that lies entirely in the ROI",
                tags.roi()[k]
            )));
        }
        Ok(Self { n_roi: tags.n_roi(), elements })
    }

    pub fn n_roi(&self) -> usize {
        self.n_roi
    }

    fn gradient_norms(&self, w: &[f64], smoothing: f64) -> Vec<f64> {
        self.elements
            .iter()
            .map(|(tri, el, _)| {
                let g = el.gradient([w[tri[0]], w[tri[1]], w[tri[2]]]);
                (g[0] * g[0] + g[1] * g[1] + smoothing * smoothing).sqrt()
            })
            .collect()
    }

    fn check_len(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.n_roi {
            return Err(EitError::Shape(format!("w has {} entries for {} ROI nodes", w.len(), self.n_roi)));
        }
        Ok(())
    }

    /// `Θ_ij = ∫ υ ∇φ_i·∇φ_j / sqrt(|∇w|² + T²) + ε δ_ij`.
    pub fn theta(&self, w: &[f64], prior: &TvPrior) -> Result<SparseSym> {
        self.check_len(w)?;
        let norms = self.gradient_norms(w, prior.smoothing);
        let mut b = TripletBuilder::with_capacity(self.n_roi, 6 * self.elements.len() + self.n_roi);
        for ((tri, el, u), n) in self.elements.iter().zip(&norms) {
            let k = el.stiffness();
            let s = u / n;
            for i in 0..3 {
                for j in 0..=i {
                    b.push_sym(tri[i], tri[j], s * k[i][j]);
                }
            }
        }
        for i in 0..self.n_roi {
            b.push_sym(i, i, prior.epsilon);
        }
        Ok(b.build())
    }

    /// `∫ υ sqrt(|∇w|² + T²)` with the triangle rule used by [`TvOperator::theta`].
    pub fn functional(&self, w: &[f64], smoothing: f64) -> Result<f64> {
        self.check_len(w)?;
        let norms = self.gradient_norms(w, smoothing);
        Ok(self.elements.iter().zip(&norms).map(|((_, el, u), n)| el.area * u * n).sum())
    }

    /// `γ [∫ υ sqrt(|∇w|² + T²) + ε/2 |w|²]`.
    pub fn prior_term(&self, w: &[f64], prior: &TvPrior) -> Result<f64> {
        let sq: f64 = w.iter().map(|x| x * x).sum();
        Ok(prior.gamma * (self.functional(w, prior.smoothing)? + 0.5 * prior.epsilon * sq))
    }

    /// Sets `ε` to the second smallest eigenvalue of the ε-free `Θ(0)`.
    pub fn finalize(&self, prior: &TvPrior) -> Result<TvPrior> {
        let theta0 = self.theta(&vec![0.0; self.n_roi], &prior.with_epsilon(0.0))?;
        let eps = second_smallest_eigenvalue(&theta0)?;
        let scale = (0..theta0.dim()).map(|i| theta0.get(i, i)).fold(0.0, f64::max);
        if !(eps > 1e-10 * scale) {
            return Err(EitError::Conditioning {
                message: "second smallest eigenvalue of the TV weight matrix is not positive; \
                          the ROI triangles are probably disconnected"
                    .into(),
                epsilon: eps,
                smoothing: prior.smoothing,
            });
        }
        Ok(prior.with_epsilon(eps))
    }
}

/// Assembles `Θ(w)` for the ROI of a mesh.
pub fn tv_weight_matrix(mesh: &Mesh, tags: &RegionTags, w: &[f64], prior: &TvPrior) -> Result<SparseSym> {
    TvOperator::new(mesh, tags, prior.cutoff)?.theta(w, prior)
}

/// Second smallest eigenvalue of a symmetric positive semidefinite matrix
/// whose kernel is spanned by the constant vector.
///
/// Block inverse iteration on a slightly shifted matrix, with the constant
/// vector deflated and Rayleigh-Ritz extraction every step.
pub fn second_smallest_eigenvalue(a: &SparseSym) -> Result<f64> {
    let n = a.dim();
    if n < 2 {
        return Err(EitError::Shape("need at least two unknowns".into()));
    }
    if n <= 64 {
        let mut ev: Vec<f64> = a.to_dense().symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        return Ok(ev[1]);
    }
    let diag_mean = (0..n).map(|i| a.get(i, i)).sum::<f64>() / n as f64;
    let shift = 1e-8 * diag_mean;
    let mut shifted = TripletBuilder::with_capacity(n, a.nnz() + n);
    for i in 0..n {
        for (j, v) in a.row(i).filter(|&(j, _)| j <= i) {
            shifted.push_sym(i, j, v);
        }
        shifted.push_sym(i, i, shift);
    }
    let shifted = shifted.build();
    let order = shifted.rcm_ordering(n);
    let chol = EnvelopeCholesky::factor_with_ordering(&shifted, order)?;

    let p = 6.min(n - 1);
    let deflate = |v: &mut [f64]| {
        let mean = v.iter().sum::<f64>() / n as f64;
        v.iter_mut().for_each(|x| *x -= mean);
    };
    // deterministic start: low-frequency cosines of the node index
    let mut x = DMatrix::from_fn(n, p, |i, k| ((k + 1) as f64 * std::f64::consts::PI * (i as f64 + 0.5) / n as f64).cos());
    let mut last = f64::INFINITY;
    for _ in 0..1000 {
        for mut col in x.column_iter_mut() {
            deflate(col.as_mut_slice());
        }
        let q = x.clone().qr().q();
        // Rayleigh-Ritz on span(Q)
        let mut aq = DMatrix::zeros(n, p);
        for k in 0..p {
            let col: Vec<f64> = q.column(k).iter().copied().collect();
            aq.set_column(k, &DVector::from_vec(a.mul_vec(&col)));
        }
        let h = q.tr_mul(&aq);
        let h = 0.5 * (&h + h.transpose());
        let eig = h.symmetric_eigen();
        let lambda = eig.eigenvalues.min();
        if (lambda - last).abs() <= 1e-12 * lambda.abs() {
            return Ok(lambda);
        }
        last = lambda;
        let ritz = &q * &eig.eigenvectors;
        for k in 0..p {
            let col: Vec<f64> = ritz.column(k).iter().copied().collect();
            x.set_column(k, &DVector::from_vec(chol.solve(&col)));
        }
    }
    Err(EitError::Conditioning {
        message: "eigenvalue iteration for ε did not converge".into(),
        epsilon: last,
        smoothing: f64::NAN,
    })
}
