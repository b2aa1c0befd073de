//! Orthogonal projectors that annihilate nuisance directions in the data.
//!
//! A full projector removes the whole range of a low-dimensional Jacobian,
//! e.g. the contact peaks. A partial projector removes the `K` dominant left
//! singular directions of a weighted region Jacobian `J·B_w`, where the weight
//! factor encodes prior information on plausible perturbations.

use nalgebra::{DMatrix, DVector};

use crate::error::{EitError, Result};
use crate::geometry::Point;
use crate::sparse::{EnvelopeCholesky, SparseSym};

/// Columns with `|R_kk|` below this fraction of their norm are treated as dependent.
const RANK_TOL: f64 = 1e-10;
/// Singular values below this fraction of the largest are numerically zero.
const SINGULAR_TOL: f64 = 1e-12;
/// Relative diagonal jitter added to squared-exponential covariances.
const COVARIANCE_JITTER: f64 = 1e-10;

/// `P = I − V Vᵀ` for a matrix `V` with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    matrix: DMatrix<f64>,
    basis: DMatrix<f64>,
}

impl Projector {
    fn from_basis(basis: DMatrix<f64>) -> Self {
        let n = basis.nrows();
        let mut p = DMatrix::identity(n, n) - &basis * basis.transpose();
        // exact symmetry regardless of summation order
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (p[(i, j)] + p[(j, i)]);
                p[(i, j)] = v;
                p[(j, i)] = v;
            }
        }
        Self { matrix: p, basis }
    }

    /// Identity on `n`-vectors (empty nullspace).
    pub fn identity(n: usize) -> Self {
        Self::from_basis(DMatrix::zeros(n, 0))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Orthonormal basis `V` of the nullspace.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Ambient dimension `ML`.
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Nullspace dimension `K`.
    pub fn rank_removed(&self) -> usize {
        self.basis.ncols()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (&self.matrix * DVector::from_column_slice(x)).as_slice().to_vec()
    }

    pub fn apply_matrix(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        &self.matrix * a
    }

    /// `‖P² − P‖_F`.
    pub fn idempotence_error(&self) -> f64 {
        (&self.matrix * &self.matrix - &self.matrix).norm()
    }

    /// `‖P − Pᵀ‖_F`.
    pub fn symmetry_error(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).norm()
    }
}

/// Projector onto the orthogonal complement of `range(J)`.
///
/// Fails with a rank error if a column of `J` lies in the span of the
/// preceding ones.
pub fn full_projector(j: &DMatrix<f64>) -> Result<Projector> {
    let (n, k) = j.shape();
    if k > n {
        return Err(EitError::Rank {
            message: format!("{k} columns cannot be independent in dimension {n}"),
            columns: (n..k).collect(),
        });
    }
    if k == 0 {
        return Ok(Projector::identity(n));
    }
    let qr = j.clone().qr();
    let r = qr.r();
    let deficient: Vec<usize> = (0..k)
        .filter(|&c| {
            let norm = j.column(c).norm();
            norm == 0.0 || r[(c, c)].abs() <= RANK_TOL * norm
        })
        .collect();
    if !deficient.is_empty() {
        return Err(EitError::Rank {
            message: format!("nuisance Jacobian is rank deficient; dependent columns {deficient:?}"),
            columns: deficient,
        });
    }
    Ok(Projector::from_basis(qr.q()))
}

/// `[J_a J_b]`.
pub fn concat_jacobians(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() != b.nrows() && a.ncols() > 0 && b.ncols() > 0 {
        return Err(EitError::Shape(format!(
            "cannot concatenate Jacobians with {} and {} rows",
            a.nrows(),
            b.nrows()
        )));
    }
    if b.ncols() == 0 {
        return Ok(a.clone());
    }
    if a.ncols() == 0 {
        return Ok(b.clone());
    }
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    Ok(out)
}

/// `Γ_ij = ς² exp(−|x_i − x_j|² / 2ℓ²)` with `1e-10·ς²` added to the diagonal.
pub fn squared_exponential_covariance(coords: &[Point], ell: f64, std: f64) -> Result<DMatrix<f64>> {
    if !(ell > 0.0) || !(std > 0.0) {
        return Err(EitError::Parameter(format!(
            "correlation length and standard deviation must be positive, got {ell} and {std}"
        )));
    }
    let n = coords.len();
    let var = std * std;
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            let d2 = (coords[i][0] - coords[j][0]).powi(2) + (coords[i][1] - coords[j][1]).powi(2);
            let v = var * (-d2 / (2.0 * ell * ell)).exp();
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
        g[(i, i)] = var * (1.0 + COVARIANCE_JITTER);
    }
    Ok(g)
}

/// Kind of prior weighting on the nuisance parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightingKind {
    MassMatrix,
    Covariance,
    Identity,
}

impl std::str::FromStr for WeightingKind {
    type Err = EitError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mass-matrix" => Ok(WeightingKind::MassMatrix),
            "covariance" => Ok(WeightingKind::Covariance),
            "identity" => Ok(WeightingKind::Identity),
            _ => Err(EitError::Config(format!("unknown weighting '{s}'"))),
        }
    }
}

impl std::fmt::Display for WeightingKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            WeightingKind::MassMatrix => "mass-matrix",
            WeightingKind::Covariance => "covariance",
            WeightingKind::Identity => "identity",
        })
    }
}

#[derive(Debug, Clone)]
enum Factor {
    Identity,
    /// Lower Cholesky factor `L` of `Γ`, so `B_w = L`.
    Covariance { gamma: DMatrix<f64>, chol: DMatrix<f64> },
    /// Cholesky of the mass matrix `𝓜 = CᵀC`, so `B_w = C⁻¹`.
    Mass(EnvelopeCholesky),
}

/// Weight factor `B_w` with `A = B_w B_wᵀ`.
#[derive(Debug, Clone)]
pub struct NuisanceWeighting {
    dim: usize,
    factor: Factor,
}

impl NuisanceWeighting {
    pub fn identity(dim: usize) -> Self {
        Self { dim, factor: Factor::Identity }
    }

    /// Squared-exponential covariance over the given nuisance node coordinates.
    pub fn covariance(coords: &[Point], ell: f64, std: f64) -> Result<Self> {
        let gamma = squared_exponential_covariance(coords, ell, std)?;
        Self::from_covariance(gamma)
    }

    /// Arbitrary SPD covariance `Γ`.
    pub fn from_covariance(gamma: DMatrix<f64>) -> Result<Self> {
        if !gamma.is_square() {
            return Err(EitError::Shape("covariance must be square".into()));
        }
        let dim = gamma.nrows();
        let chol = gamma
            .clone()
            .cholesky()
            .ok_or_else(|| EitError::Singular("covariance is not positive definite".into()))?
            .l();
        Ok(Self { dim, factor: Factor::Covariance { gamma, chol } })
    }

    /// Mass matrix of the nuisance region; `A = 𝓜⁻¹`.
    pub fn mass_matrix(mass: &SparseSym) -> Result<Self> {
        let chol = EnvelopeCholesky::factor(mass)?;
        Ok(Self { dim: mass.dim(), factor: Factor::Mass(chol) })
    }

    pub fn kind(&self) -> WeightingKind {
        match self.factor {
            Factor::Identity => WeightingKind::Identity,
            Factor::Covariance { .. } => WeightingKind::Covariance,
            Factor::Mass(_) => WeightingKind::MassMatrix,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `Γ` for covariance weightings.
    pub fn covariance_matrix(&self) -> Option<&DMatrix<f64>> {
        match &self.factor {
            Factor::Covariance { gamma, .. } => Some(gamma),
            _ => None,
        }
    }

    /// `(J B_w)ᵀ = B_wᵀ Jᵀ`, the shape used by the basis computation.
    pub fn weigh_transposed(&self, j: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if j.ncols() != self.dim {
            return Err(EitError::Shape(format!(
                "Jacobian has {} columns, weighting is for {} parameters",
                j.ncols(),
                self.dim
            )));
        }
        Ok(match &self.factor {
            Factor::Identity => j.transpose(),
            Factor::Covariance { chol, .. } => chol.tr_mul(&j.transpose()),
            Factor::Mass(c) => {
                // B_wᵀ x = C⁻ᵀ x, which is the half solve of the envelope factor
                let mut out = DMatrix::zeros(self.dim, j.nrows());
                for (r, row) in j.row_iter().enumerate() {
                    let row: Vec<f64> = row.iter().copied().collect();
                    out.set_column(r, &DVector::from_vec(c.half_solve(&row)));
                }
                out
            }
        })
    }

    /// `J B_w`.
    pub fn weigh(&self, j: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(self.weigh_transposed(j)?.transpose())
    }

    /// Dense `A = B_w B_wᵀ`; for the mass weighting this inverts `𝓜` column by column.
    pub fn weight_matrix(&self) -> DMatrix<f64> {
        match &self.factor {
            Factor::Identity => DMatrix::identity(self.dim, self.dim),
            Factor::Covariance { chol, .. } => chol * chol.transpose(),
            Factor::Mass(c) => {
                let mut a = DMatrix::zeros(self.dim, self.dim);
                for k in 0..self.dim {
                    let mut e = vec![0.0; self.dim];
                    e[k] = 1.0;
                    a.set_column(k, &DVector::from_vec(c.solve(&e)));
                }
                a
            }
        }
    }
}

/// Left singular vectors and singular values of a weighted Jacobian.
#[derive(Debug, Clone)]
pub struct NuisanceSpectrum {
    left: DMatrix<f64>,
    singular_values: Vec<f64>,
}

impl NuisanceSpectrum {
    /// Thin SVD of `J B_w`, computed from a QR factorization of `(J B_w)ᵀ`
    /// followed by an SVD of the small triangular factor.
    pub fn compute(j: &DMatrix<f64>, weighting: &NuisanceWeighting) -> Result<Self> {
        let xt = weighting.weigh_transposed(j)?;
        let (left, sv) = if xt.nrows() >= xt.ncols() {
            // X = Rᵀ Qᵀ; left singular vectors of X are those of Rᵀ
            let r = xt.qr().r();
            let svd = r.transpose().svd(true, false);
            (svd.u.expect("requested"), svd.singular_values)
        } else {
            let svd = xt.transpose().svd(true, false);
            (svd.u.expect("requested"), svd.singular_values)
        };
        let mut left = left;
        fix_signs(&mut left);
        Ok(Self { left, singular_values: sv.as_slice().to_vec() })
    }

    /// Singular values in decreasing order.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// Number of singular values above `1e-12·σ_max`.
    pub fn numerical_rank(&self) -> usize {
        let max = self.singular_values.first().copied().unwrap_or(0.0);
        self.singular_values.iter().filter(|&&s| s > SINGULAR_TOL * max).count()
    }

    /// Cumulative fraction `Σ_{i≤k} σ_i² / Σ σ_i²` for every `k`.
    pub fn retained_energy(&self) -> Vec<f64> {
        let total: f64 = self.singular_values.iter().map(|s| s * s).sum();
        let mut acc = 0.0;
        self.singular_values
            .iter()
            .map(|s| {
                acc += s * s;
                if total > 0.0 {
                    acc / total
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// First `k` left singular vectors.
    pub fn basis(&self, k: usize) -> Result<DMatrix<f64>> {
        let rank = self.numerical_rank();
        if k == 0 || k > rank {
            return Err(EitError::Rank {
                message: format!("requested K = {k} but the weighted Jacobian has numerical rank {rank}"),
                columns: Vec::new(),
            });
        }
        Ok(self.left.columns(0, k).into_owned())
    }
}

/// First `K` left singular vectors of `J_roni B_w`.
pub fn weighted_nuisance_basis(j: &DMatrix<f64>, weighting: &NuisanceWeighting, k: usize) -> Result<DMatrix<f64>> {
    NuisanceSpectrum::compute(j, weighting)?.basis(k)
}

/// The same basis from the eigenvectors of `J A Jᵀ`.
///
/// Squares the condition number of `J B_w`; kept as an independent route for
/// cross-checks on small problems.
pub fn gram_nuisance_basis(j: &DMatrix<f64>, weighting: &NuisanceWeighting, k: usize) -> Result<DMatrix<f64>> {
    let x = weighting.weigh(j)?;
    let gram = &x * x.transpose();
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let max = eig.eigenvalues[order[0]].max(0.0);
    let rank = order.iter().filter(|&&i| eig.eigenvalues[i] > (SINGULAR_TOL * SINGULAR_TOL) * max).count();
    if k == 0 || k > rank {
        return Err(EitError::Rank {
            message: format!("requested K = {k} but J A Jᵀ has numerical rank {rank}"),
            columns: Vec::new(),
        });
    }
    let mut v = DMatrix::zeros(j.nrows(), k);
    for (c, &i) in order.iter().take(k).enumerate() {
        v.set_column(c, &eig.eigenvectors.column(i));
    }
    fix_signs(&mut v);
    Ok(v)
}

/// Flips each column so that its first nonzero entry is positive.
fn fix_signs(v: &mut DMatrix<f64>) {
    for mut col in v.column_iter_mut() {
        let scale = col.amax();
        if let Some(first) = col.iter().copied().find(|x| x.abs() > 1e-12 * scale) {
            if first < 0.0 {
                col.neg_mut();
            }
        }
    }
}

/// `P = I − V Vᵀ`; `V` must have orthonormal columns.
pub fn partial_projector(v: &DMatrix<f64>) -> Result<Projector> {
    let k = v.ncols();
    let err = (v.tr_mul(v) - DMatrix::<f64>::identity(k, k)).amax();
    if k > 0 && err > 1e-10 {
        return Err(EitError::Input(format!(
            "nuisance basis is not orthonormal (max |VᵀV − I| = {err:e})"
        )));
    }
    Ok(Projector::from_basis(v.clone()))
}
