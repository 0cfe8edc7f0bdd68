//! The local expansion object and its analytic post-processing.
//!
//! A [`LocalPce`] couples an active basis, a coefficient vector and the box
//! the expansion was trained on. Moments, variance density and first-order
//! Sobol indices all come straight from the coefficients.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::polybasis::{design_matrix, Aabb, BasisError, BasisSet};
use crate::regression::{self, RegressionError};
use crate::Point;

#[derive(Debug, Error)]
pub enum SurrogateError {
    #[error(transparent)]
    Basis(#[from] BasisError),

    #[error(transparent)]
    Regression(#[from] RegressionError),

    #[error("training needs {needed} points, got {got}")]
    NotEnoughPoints { needed: usize, got: usize },

    #[error("points and responses differ in length: {points} vs {responses}")]
    LengthMismatch { points: usize, responses: usize },
}

/// First-order Sobol indices of a local expansion.
///
/// When the expansion carries no variance the indices are undefined; the
/// uniform vector is returned with `zero_variance` set so the caller can
/// fall back to a deterministic axis choice.
#[derive(Debug, Clone)]
pub struct SobolFirstOrder {
    pub values: Vec<f64>,
    pub zero_variance: bool,
}

/// A polynomial chaos expansion local to one axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalPce {
    bounds: Aabb,
    basis: BasisSet,
    coefficients: Vec<f64>,
    q2: f64,
    n_train: usize,
}

impl LocalPce {
    /// Fit on the given training data with hybrid least-angle selection at
    /// total degree `degree`. Only the active terms are stored.
    pub fn fit(
        points: &[Point],
        responses: &[f64],
        bounds: Aabb,
        degree: usize,
        basis_cap: usize,
    ) -> Result<Self, SurrogateError> {
        if points.len() != responses.len() {
            return Err(SurrogateError::LengthMismatch {
                points: points.len(),
                responses: responses.len(),
            });
        }
        if points.len() < 2 {
            return Err(SurrogateError::NotEnoughPoints {
                needed: 2,
                got: points.len(),
            });
        }
        let m = bounds.dimension();
        let full = BasisSet::total_degree_with_cap(m, degree, basis_cap)?;
        let design = design_matrix(points, &full, &bounds)?;
        let y = DVector::from_column_slice(responses);
        let max_terms = full.len().min(points.len() - 1);
        let fit = regression::lars_select(&design, &y, max_terms)?;

        let basis = full.subset(&fit.selected);
        let coefficients = fit.selected.iter().map(|&j| fit.coefficients[j]).collect();
        Ok(Self {
            bounds,
            basis,
            coefficients,
            q2: fit.q2,
            n_train: points.len(),
        })
    }

    /// Plain least squares on the full total-degree basis, no term selection.
    ///
    /// Used when hybrid selection degenerates to a constant on data that is
    /// not constant: a flat expansion has zero variance density everywhere,
    /// which would starve its sub-domain of refinement.
    pub fn fit_full_ols(
        points: &[Point],
        responses: &[f64],
        bounds: Aabb,
        degree: usize,
        basis_cap: usize,
    ) -> Result<Self, SurrogateError> {
        if points.len() != responses.len() {
            return Err(SurrogateError::LengthMismatch {
                points: points.len(),
                responses: responses.len(),
            });
        }
        let m = bounds.dimension();
        let full = BasisSet::total_degree_with_cap(m, degree, basis_cap)?;
        if points.len() < full.len() {
            return Err(SurrogateError::NotEnoughPoints {
                needed: full.len(),
                got: points.len(),
            });
        }
        let design = design_matrix(points, &full, &bounds)?;
        let y = DVector::from_column_slice(responses);
        let fit = regression::ols_fit(&design, &y)?;
        Ok(Self {
            bounds,
            basis: full,
            coefficients: fit.coefficients.iter().copied().collect(),
            q2: fit.q2,
            n_train: points.len(),
        })
    }

    /// Constant expansion, used for degenerate training sets.
    pub fn intercept_only(value: f64, bounds: Aabb, degree: usize, q2: f64) -> Self {
        let m = bounds.dimension();
        let basis =
            BasisSet::from_indices(vec![crate::polybasis::MultiIndex::new(vec![0; m])], degree);
        Self {
            bounds,
            basis,
            coefficients: vec![value],
            q2,
            n_train: 0,
        }
    }

    pub fn from_parts(
        bounds: Aabb,
        basis: BasisSet,
        coefficients: Vec<f64>,
        q2: f64,
        n_train: usize,
    ) -> Self {
        assert_eq!(basis.len(), coefficients.len());
        assert!(
            basis.indices()[0].is_intercept(),
            "intercept must be term 0"
        );
        Self {
            bounds,
            basis,
            coefficients,
            q2,
            n_train,
        }
    }

    pub fn bounds(&self) -> &Aabb {
        &self.bounds
    }

    pub fn basis(&self) -> &BasisSet {
        &self.basis
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn q2(&self) -> f64 {
        self.q2
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn dimension(&self) -> usize {
        self.bounds.dimension()
    }

    /// Surrogate value at `xi`, which must lie in the training box.
    pub fn predict(&self, xi: &[f64]) -> Result<f64, SurrogateError> {
        self.bounds.check_point(xi)?;
        Ok(self.predict_unchecked(xi))
    }

    pub(crate) fn predict_unchecked(&self, xi: &[f64]) -> f64 {
        let values = self.basis.eval_unchecked(xi, &self.bounds);
        values
            .iter()
            .zip(&self.coefficients)
            .map(|(psi, beta)| psi * beta)
            .sum()
    }

    /// Variance density at `xi`: the squared non-intercept part of the
    /// expansion times the input density at that point.
    pub fn variance_density(&self, xi: &[f64], density: f64) -> Result<f64, SurrogateError> {
        self.bounds.check_point(xi)?;
        Ok(self.variance_density_unchecked(xi, density))
    }

    /// Unchecked variant used by candidate scoring, where the nearest
    /// experimental-design point may fall slightly outside the training box
    /// and the polynomial is simply extrapolated.
    pub(crate) fn variance_density_unchecked(&self, xi: &[f64], density: f64) -> f64 {
        let values = self.basis.eval_unchecked(xi, &self.bounds);
        let fluct: f64 = values
            .iter()
            .zip(&self.coefficients)
            .zip(self.basis.indices())
            .filter(|(_, alpha)| !alpha.is_intercept())
            .map(|((psi, beta), _)| psi * beta)
            .sum();
        fluct * fluct * density
    }

    /// Mean and variance implied by the coefficients.
    pub fn local_moments(&self) -> (f64, f64) {
        (self.mean(), self.variance())
    }

    pub fn mean(&self) -> f64 {
        self.coefficients[0]
    }

    /// Sum of squared non-intercept coefficients.
    pub fn variance(&self) -> f64 {
        self.coefficients
            .iter()
            .zip(self.basis.indices())
            .filter(|(_, alpha)| !alpha.is_intercept())
            .map(|(beta, _)| beta * beta)
            .sum()
    }

    /// Partial variance attributable to each dimension alone, i.e. the sum of
    /// squared coefficients of terms univariate in that dimension.
    pub fn first_order_partial_variances(&self) -> Vec<f64> {
        let m = self.dimension();
        let mut partial = vec![0.0; m];
        for (beta, alpha) in self.coefficients.iter().zip(self.basis.indices()) {
            for (j, item) in partial.iter_mut().enumerate() {
                if alpha.is_univariate_in(j) {
                    *item += beta * beta;
                }
            }
        }
        partial
    }

    /// First-order Sobol indices; uniform fallback when variance is zero.
    pub fn local_sobol_first_order(&self) -> SobolFirstOrder {
        let m = self.dimension();
        let variance = self.variance();
        if variance <= 0.0 {
            return SobolFirstOrder {
                values: vec![1.0 / m as f64; m],
                zero_variance: true,
            };
        }
        let values = self
            .first_order_partial_variances()
            .iter()
            .map(|v| v / variance)
            .collect();
        SobolFirstOrder {
            values,
            zero_variance: false,
        }
    }
}
