//! Weighted ridge regression, the learner behind every cascade stage.
//!
//! A [`WeakRegressor`] maps a feature vector `f` to `A·f + e`. Training
//! minimizes `Σ_i w_i ‖A f_i + e − t_i‖² + λ‖A‖_F²`; the offset is not
//! penalized, so it absorbs the weighted means and `A` is fitted on weighted
//! centered data. The normal equations are solved in whichever of the primal
//! (`N_f × N_f`) or dual (`I × I`) forms is smaller; both yield the same
//! minimizer when `λ > 0`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct WeakRegressor {
    projection: DMatrix<f64>,
    offset: DVector<f64>,
}

impl WeakRegressor {
    pub fn new(projection: DMatrix<f64>, offset: DVector<f64>) -> Result<Self> {
        if projection.nrows() != offset.len() {
            return Err(Error::DimensionMismatch {
                context: "regressor offset",
                expected: projection.nrows(),
                actual: offset.len(),
            });
        }
        if projection.iter().chain(offset.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("regressor coefficients"));
        }
        Ok(WeakRegressor { projection, offset })
    }

    /// The matrix `A` (`output_dim × input_dim`).
    pub fn projection(&self) -> &DMatrix<f64> {
        &self.projection
    }

    /// The offset `e`.
    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }

    pub fn input_dim(&self) -> usize {
        self.projection.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.projection.nrows()
    }

    pub fn apply(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "regressor input",
                expected: self.input_dim(),
                actual: features.len(),
            });
        }
        let f = DVector::from_column_slice(features);
        Ok((&self.projection * f + &self.offset).as_slice().to_vec())
    }
}

#[derive(Debug, Clone)]
pub struct RidgeProblem {
    features: DMatrix<f64>,
    targets: DMatrix<f64>,
    weights: DVector<f64>,
    lambda: f64,
}

impl RidgeProblem {
    pub fn new(
        features: DMatrix<f64>,
        targets: DMatrix<f64>,
        weights: DVector<f64>,
        lambda: f64,
    ) -> Result<Self> {
        let n = features.nrows();
        if targets.nrows() != n {
            return Err(Error::DimensionMismatch {
                context: "ridge targets",
                expected: n,
                actual: targets.nrows(),
            });
        }
        if weights.len() != n {
            return Err(Error::DimensionMismatch {
                context: "ridge weights",
                expected: n,
                actual: weights.len(),
            });
        }
        if n == 0 {
            return Err(Error::InsufficientSamples {
                needed: 1,
                actual: 0,
            });
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("ridge features"));
        }
        if targets.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("ridge targets"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidInput(
                "ridge weights must be finite and non-negative".into(),
            ));
        }
        if !weights.iter().any(|&w| w > 0.0) {
            return Err(Error::InvalidInput(
                "at least one ridge weight must be positive".into(),
            ));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "lambda must be finite and >= 0, got {lambda}"
            )));
        }
        Ok(RidgeProblem {
            features,
            targets,
            weights,
            lambda,
        })
    }

    /// Builds a problem from per-sample feature and target rows.
    pub fn from_rows(
        features: &[Vec<f64>],
        targets: &[Vec<f64>],
        weights: Vec<f64>,
        lambda: f64,
    ) -> Result<Self> {
        let n = features.len();
        let nf = features.first().map_or(0, Vec::len);
        let nt = targets.first().map_or(0, Vec::len);
        if let Some(bad) = features.iter().find(|r| r.len() != nf) {
            return Err(Error::DimensionMismatch {
                context: "ridge feature row",
                expected: nf,
                actual: bad.len(),
            });
        }
        if let Some(bad) = targets.iter().find(|r| r.len() != nt) {
            return Err(Error::DimensionMismatch {
                context: "ridge target row",
                expected: nt,
                actual: bad.len(),
            });
        }
        let x = DMatrix::from_row_iterator(n, nf, features.iter().flatten().copied());
        let t = DMatrix::from_row_iterator(targets.len(), nt, targets.iter().flatten().copied());
        RidgeProblem::new(x, t, DVector::from_vec(weights), lambda)
    }

    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn targets(&self) -> &DMatrix<f64> {
        &self.targets
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    /// `Σ_i w_i ‖A f_i + e − t_i‖² + λ‖A‖_F²` for a candidate regressor.
    pub fn objective(&self, reg: &WeakRegressor) -> f64 {
        let pred = &self.features * reg.projection.transpose();
        let mut loss = 0.0;
        for i in 0..self.n_samples() {
            let mut r2 = 0.0;
            for j in 0..self.targets.ncols() {
                let r = pred[(i, j)] + reg.offset[j] - self.targets[(i, j)];
                r2 += r * r;
            }
            loss += self.weights[i] * r2;
        }
        loss + self.lambda * reg.projection.norm_squared()
    }
}

fn weighted_mean_rows(m: &DMatrix<f64>, w: &DVector<f64>, total: f64) -> DVector<f64> {
    (m.transpose() * w) / total
}

pub fn solve_weighted_ridge(problem: &RidgeProblem) -> Result<WeakRegressor> {
    let x = &problem.features;
    let t = &problem.targets;
    let w = &problem.weights;
    let (n, nf) = x.shape();
    let total: f64 = w.sum();

    let x_mean = weighted_mean_rows(x, w, total);
    let t_mean = weighted_mean_rows(t, w, total);

    // Rows scaled by sqrt(w_i) after centering.
    let mut z = x.clone();
    let mut y = t.clone();
    for i in 0..n {
        let s = w[i].sqrt();
        for j in 0..nf {
            z[(i, j)] = (z[(i, j)] - x_mean[j]) * s;
        }
        for j in 0..y.ncols() {
            y[(i, j)] = (y[(i, j)] - t_mean[j]) * s;
        }
    }

    let lambda = problem.lambda;
    let projection = if z.iter().all(|&v| v == 0.0) {
        // Centered features vanish: A = 0 is the minimum-norm minimizer.
        DMatrix::zeros(t.ncols(), nf)
    } else if lambda > 0.0 && n < nf {
        let gram = &z * z.transpose();
        let b = spd_solve(gram, lambda, &y)?;
        b.transpose() * &z
    } else {
        let gram = z.transpose() * &z;
        let rhs = z.transpose() * &y;
        spd_solve(gram, lambda, &rhs)?.transpose()
    };

    let offset = t_mean - &projection * x_mean;
    WeakRegressor::new(projection, offset)
}

/// Solves `(gram + λI) X = rhs`, retrying once with `λ` inflated by
/// `1e-8 · trace(gram)` if the factorization fails.
fn spd_solve(gram: DMatrix<f64>, lambda: f64, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let trace = gram.trace();
    for ridge in [lambda, lambda + 1e-8 * trace] {
        let mut g = gram.clone();
        for i in 0..g.nrows() {
            g[(i, i)] += ridge;
        }
        if let Some(chol) = g.cholesky() {
            let sol = chol.solve(rhs);
            if sol.iter().all(|v| v.is_finite()) {
                return Ok(sol);
            }
        }
        if trace == 0.0 {
            break;
        }
    }
    Err(Error::Singular)
}
