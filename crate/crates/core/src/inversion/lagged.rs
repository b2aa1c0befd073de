use nalgebra::{DMatrix, DVector};

use super::prior::{TvOperator, TvPrior};
use crate::error::{EitError, Result};
use crate::forward::MeasurementVector;
use crate::projection::Projector;
use crate::sparse::EnvelopeCholesky;

/// `B = Γ_E^{−1/2}` or `B = Γ_E^{−1/2} P`, so that `BᵀB = Σ`.
pub fn make_whitener(noise_variance: &[f64], projector: Option<&Projector>) -> Result<DMatrix<f64>> {
    if let Some((i, v)) = noise_variance.iter().enumerate().find(|(_, v)| !(**v > 0.0) || !v.is_finite()) {
        return Err(EitError::Input(format!("noise variance {i} must be positive, got {v}")));
    }
    let inv_std = DVector::from_iterator(noise_variance.len(), noise_variance.iter().map(|v| 1.0 / v.sqrt()));
    match projector {
        None => Ok(DMatrix::from_diagonal(&inv_std)),
        Some(p) => {
            if p.dim() != noise_variance.len() {
                return Err(EitError::Shape(format!(
                    "projector acts on {} entries, noise model has {}",
                    p.dim(),
                    noise_variance.len()
                )));
            }
            let mut b = p.matrix().clone();
            for (mut row, s) in b.row_iter_mut().zip(inv_std.iter()) {
                row *= *s;
            }
            Ok(b)
        }
    }
}

/// Whitened linearized model `A = B J`, `b = B y`.
#[derive(Debug, Clone)]
pub struct InversionProblem {
    jacobian: DMatrix<f64>,
    data: DVector<f64>,
    whitener: DMatrix<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl InversionProblem {
    /// The data blocks are shifted to zero mean before whitening.
    pub fn new(
        jacobian: DMatrix<f64>,
        data: &MeasurementVector,
        noise_variance: &[f64],
        projector: Option<&Projector>,
    ) -> Result<Self> {
        if jacobian.nrows() != data.len() || noise_variance.len() != data.len() {
            return Err(EitError::Shape(format!(
                "Jacobian has {} rows, data has {} entries, noise model has {}",
                jacobian.nrows(),
                data.len(),
                noise_variance.len()
            )));
        }
        let whitener = make_whitener(noise_variance, projector)?;
        let y = DVector::from_vec(data.zero_mean_blocks().into_entries());
        let a = &whitener * &jacobian;
        let b = &whitener * &y;
        Ok(Self { jacobian, data: y, whitener, a, b })
    }

    pub fn jacobian(&self) -> &DMatrix<f64> {
        &self.jacobian
    }

    /// Zero-mean data `y`.
    pub fn data(&self) -> &DVector<f64> {
        &self.data
    }

    pub fn whitener(&self) -> &DMatrix<f64> {
        &self.whitener
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn n_unknowns(&self) -> usize {
        self.jacobian.ncols()
    }

    /// `½ ‖B(y − J w)‖²`.
    pub fn misfit(&self, w: &[f64]) -> f64 {
        let r = &self.b - &self.a * DVector::from_column_slice(w);
        0.5 * r.norm_squared()
    }
}

/// `½(y − Jw)ᵀΣ(y − Jw) + γ Ψ(w)`.
pub fn objective(w: &[f64], problem: &InversionProblem, prior: &TvPrior, tv: &TvOperator) -> Result<f64> {
    Ok(problem.misfit(w) + tv.prior_term(w, prior)?)
}

/// `w⁺ = Θ⁻¹Aᵀ(γI + AΘ⁻¹Aᵀ)⁻¹ b` with `Θ = Θ(w)`.
pub fn lagged_diffusivity_step(
    w: &[f64],
    problem: &InversionProblem,
    prior: &TvPrior,
    tv: &TvOperator,
) -> Result<Vec<f64>> {
    if w.len() != problem.n_unknowns() || tv.n_roi() != problem.n_unknowns() {
        return Err(EitError::Shape(format!(
            "iterate has {} entries, Jacobian {} columns, TV operator {} nodes",
            w.len(),
            problem.n_unknowns(),
            tv.n_roi()
        )));
    }
    let theta = tv.theta(w, prior)?;
    let order = theta.rcm_ordering(theta.dim());
    let conditioning = |message: String| EitError::Conditioning {
        message,
        epsilon: prior.epsilon,
        smoothing: prior.smoothing,
    };
    let chol = EnvelopeCholesky::factor_with_ordering(&theta, order)
        .map_err(|e| conditioning(format!("TV weight matrix is not positive definite: {e}")))?;

    let a = problem.a();
    let m = a.nrows();
    // Z = Θ⁻¹ Aᵀ
    let mut z = DMatrix::zeros(a.ncols(), m);
    for (r, row) in a.row_iter().enumerate() {
        let row: Vec<f64> = row.iter().copied().collect();
        z.set_column(r, &DVector::from_vec(chol.solve(&row)));
    }
    let mut s = a * &z;
    for i in 0..m {
        s[(i, i)] += prior.gamma;
    }
    let s = 0.5 * (&s + s.transpose());
    let c = s
        .cholesky()
        .ok_or_else(|| conditioning("γI + AΘ⁻¹Aᵀ is not positive definite".into()))?;
    let coeff = c.solve(problem.b());
    Ok((z * coeff).as_slice().to_vec())
}

/// Final iterate and the objective after every iteration, starting with `w⁽⁰⁾ = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub w: Vec<f64>,
    pub objective_trace: Vec<f64>,
}

/// Runs `n_iter` lagged diffusivity steps from zero.
pub fn reconstruct(problem: &InversionProblem, prior: &TvPrior, tv: &TvOperator, n_iter: usize) -> Result<Reconstruction> {
    if n_iter == 0 {
        return Err(EitError::Parameter("need at least one iteration".into()));
    }
    let mut w = vec![0.0; problem.n_unknowns()];
    let mut trace = vec![objective(&w, problem, prior, tv)?];
    for _ in 0..n_iter {
        w = lagged_diffusivity_step(&w, problem, prior, tv)?;
        let f = objective(&w, problem, prior, tv)?;
        if !f.is_finite() {
            return Err(EitError::Conditioning {
                message: "objective became non-finite".into(),
                epsilon: prior.epsilon,
                smoothing: prior.smoothing,
            });
        }
        trace.push(f);
    }
    Ok(Reconstruction { w, objective_trace: trace })
}
