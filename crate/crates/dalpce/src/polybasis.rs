//! Orthonormal Legendre polynomials, multi-indices, truncated basis sets and
//! design-matrix evaluation.
//!
//! All univariate polynomials are orthonormal with respect to the uniform
//! *probability* density on their interval, so `psi_n = sqrt(2n+1) * P_n` on
//! `[-1, 1]` and box-scaled variants stay orthonormal on arbitrary edges.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance for point-in-interval checks.
pub const COORD_TOL: f64 = 1e-12;

/// Refuse to enumerate total-degree sets larger than this by default.
pub const DEFAULT_BASIS_CAP: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum BasisError {
    #[error("argument {value} outside [{lo}, {hi}] beyond tolerance {COORD_TOL}")]
    OutOfDomain { value: f64, lo: f64, hi: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error(
        "total-degree basis for dimension {dimension}, degree {degree} has \
         {cardinality} terms, above the cap of {cap}"
    )]
    CardinalityOverflow {
        dimension: usize,
        degree: usize,
        cardinality: u128,
        cap: usize,
    },

    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("point coordinate {value} outside box edge [{lo}, {hi}] in dimension {dim}")]
    PointOutsideBox {
        dim: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
}

/// Orthonormal Legendre value without any domain checking.
///
/// Three-term recurrence on the classical polynomials, then the sqrt(2n+1)
/// normalization factor for the uniform density 1/2 on [-1, 1].
pub(crate) fn legendre_value(n: usize, x: f64) -> f64 {
    let p = match n {
        0 => 1.0,
        1 => x,
        _ => {
            let mut prev = 1.0;
            let mut cur = x;
            for k in 2..=n {
                let kf = k as f64;
                let next = ((2.0 * kf - 1.0) * x * cur - (kf - 1.0) * prev) / kf;
                prev = cur;
                cur = next;
            }
            cur
        }
    };
    (2.0 * n as f64 + 1.0).sqrt() * p
}

/// Orthonormal Legendre polynomial `psi_n(x)` on `[-1, 1]`.
pub fn legendre_orthonormal(n: usize, x: f64) -> Result<f64, BasisError> {
    if !(-1.0 - COORD_TOL..=1.0 + COORD_TOL).contains(&x) {
        return Err(BasisError::OutOfDomain {
            value: x,
            lo: -1.0,
            hi: 1.0,
        });
    }
    Ok(legendre_value(n, x))
}

/// Affine map from `[a, b]` onto the reference interval `[-1, 1]`.
#[inline]
pub(crate) fn to_reference(xi: f64, a: f64, b: f64) -> f64 {
    (2.0 * xi - a - b) / (b - a)
}

/// Orthonormal Legendre polynomial rescaled to the edge `[a, b]`.
///
/// Orthonormal with respect to the uniform probability density `1/(b-a)`.
pub fn scaled_legendre(n: usize, xi: f64, edge: (f64, f64)) -> Result<f64, BasisError> {
    let (a, b) = edge;
    if !a.is_finite() || !b.is_finite() || a >= b {
        return Err(BasisError::InvalidBox(format!(
            "edge bounds must satisfy a < b, got ({a}, {b})"
        )));
    }
    if xi < a - COORD_TOL || xi > b + COORD_TOL {
        return Err(BasisError::OutOfDomain {
            value: xi,
            lo: a,
            hi: b,
        });
    }
    Ok(legendre_value(n, to_reference(xi, a, b)))
}

/// Per-dimension polynomial degrees of one expansion term.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex {
    exponents: Vec<usize>,
}

impl MultiIndex {
    pub fn new(exponents: Vec<usize>) -> Self {
        assert!(!exponents.is_empty(), "multi-index needs dimension >= 1");
        Self { exponents }
    }

    pub fn exponents(&self) -> &[usize] {
        &self.exponents
    }

    pub fn dimension(&self) -> usize {
        self.exponents.len()
    }

    /// Total degree `|alpha|`.
    pub fn total_degree(&self) -> usize {
        self.exponents.iter().sum()
    }

    pub fn is_intercept(&self) -> bool {
        self.exponents.iter().all(|&e| e == 0)
    }

    /// True when only dimension `j` carries a positive exponent.
    pub fn is_univariate_in(&self, j: usize) -> bool {
        self.exponents[j] > 0
            && self
                .exponents
                .iter()
                .enumerate()
                .all(|(k, &e)| k == j || e == 0)
    }
}

/// Number of multi-indices with total degree at most `p` in `m` dimensions,
/// i.e. the binomial coefficient C(m + p, p).
pub fn total_degree_cardinality(m: usize, p: usize) -> u128 {
    let mut c: u128 = 1;
    for i in 1..=p as u128 {
        c = c.saturating_mul(m as u128 + i) / i;
    }
    c
}

/// An ordered, duplicate-free truncated set of multi-indices.
///
/// Index 0 is always the all-zeros intercept term. The full total-degree set
/// is ordered by total degree first, lexicographically second, so coefficient
/// vectors are comparable across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSet {
    indices: Vec<MultiIndex>,
    dimension: usize,
    max_degree: usize,
}

impl BasisSet {
    /// All multi-indices with total degree `<= p` in `m` dimensions.
    pub fn total_degree(m: usize, p: usize) -> Result<Self, BasisError> {
        Self::total_degree_with_cap(m, p, DEFAULT_BASIS_CAP)
    }

    pub fn total_degree_with_cap(m: usize, p: usize, cap: usize) -> Result<Self, BasisError> {
        assert!(m >= 1, "dimension must be >= 1");
        let cardinality = total_degree_cardinality(m, p);
        if cardinality > cap as u128 {
            return Err(BasisError::CardinalityOverflow {
                dimension: m,
                degree: p,
                cardinality,
                cap,
            });
        }
        let mut indices = Vec::with_capacity(cardinality as usize);
        let mut current = vec![0usize; m];
        for degree in 0..=p {
            enumerate_fixed_degree(0, degree, &mut current, &mut indices);
        }
        Ok(Self {
            indices,
            dimension: m,
            max_degree: p,
        })
    }

    /// Keep only the terms at the given positions (ascending), e.g. the active
    /// set chosen by model selection. The truncation degree is retained.
    pub fn subset(&self, positions: &[usize]) -> Self {
        let indices = positions.iter().map(|&i| self.indices[i].clone()).collect();
        Self {
            indices,
            dimension: self.dimension,
            max_degree: self.max_degree,
        }
    }

    pub fn from_indices(indices: Vec<MultiIndex>, max_degree: usize) -> Self {
        assert!(!indices.is_empty());
        let dimension = indices[0].dimension();
        assert!(indices.iter().all(|a| a.dimension() == dimension));
        Self {
            indices,
            dimension,
            max_degree,
        }
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Evaluate every basis term at `xi`, box-scaled, without membership
    /// checks. Univariate values are tabulated once per dimension.
    pub(crate) fn eval_unchecked(&self, xi: &[f64], bounds: &Aabb) -> Vec<f64> {
        // table[d][n] = psi_n at the mapped coordinate in dimension d
        let table: Vec<Vec<f64>> = xi
            .iter()
            .zip(bounds.lower.iter().zip(&bounds.upper))
            .map(|(&x, (&a, &b))| {
                let u = to_reference(x, a, b);
                (0..=self.max_degree)
                    .map(|n| legendre_value(n, u))
                    .collect()
            })
            .collect();
        self.indices
            .iter()
            .map(|alpha| {
                alpha
                    .exponents()
                    .iter()
                    .enumerate()
                    .map(|(d, &n)| table[d][n])
                    .product()
            })
            .collect()
    }
}

fn enumerate_fixed_degree(
    dim: usize,
    remaining: usize,
    current: &mut Vec<usize>,
    out: &mut Vec<MultiIndex>,
) {
    if dim + 1 == current.len() {
        current[dim] = remaining;
        out.push(MultiIndex::new(current.clone()));
        return;
    }
    for v in 0..=remaining {
        current[dim] = v;
        enumerate_fixed_degree(dim + 1, remaining - v, current, out);
    }
}

/// Axis-aligned box inside the unit hypercube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Aabb {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, BasisError> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(BasisError::InvalidBox(format!(
                "bound lengths {} and {} must match and be nonzero",
                lower.len(),
                upper.len()
            )));
        }
        for d in 0..lower.len() {
            if !lower[d].is_finite() || !upper[d].is_finite() || lower[d] >= upper[d] {
                return Err(BasisError::InvalidBox(format!(
                    "lower[{d}] = {} must be below upper[{d}] = {}",
                    lower[d], upper[d]
                )));
            }
            if lower[d] < -COORD_TOL || upper[d] > 1.0 + COORD_TOL {
                return Err(BasisError::InvalidBox(format!(
                    "dimension {d} edge [{}, {}] leaves the unit hypercube",
                    lower[d], upper[d]
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn unit(m: usize) -> Self {
        Self {
            lower: vec![0.0; m],
            upper: vec![1.0; m],
        }
    }

    pub fn dimension(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn edge(&self, d: usize) -> (f64, f64) {
        (self.lower[d], self.upper[d])
    }

    pub fn edge_length(&self, d: usize) -> f64 {
        self.upper[d] - self.lower[d]
    }

    pub fn volume(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| b - a)
            .product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    /// Closed-box membership with the shared coordinate tolerance; used to
    /// validate evaluation points.
    pub fn contains_closed(&self, xi: &[f64]) -> bool {
        xi.len() == self.dimension()
            && xi
                .iter()
                .enumerate()
                .all(|(d, &x)| x >= self.lower[d] - COORD_TOL && x <= self.upper[d] + COORD_TOL)
    }

    /// Half-open membership `[a, b)` per dimension, except that an upper face
    /// lying on the global hypercube boundary is closed. This makes every
    /// point of the hypercube belong to exactly one box of a partition.
    pub fn contains_half_open(&self, xi: &[f64]) -> bool {
        xi.len() == self.dimension()
            && xi.iter().enumerate().all(|(d, &x)| {
                x >= self.lower[d] && (x < self.upper[d] || (self.upper[d] == 1.0 && x <= 1.0))
            })
    }

    pub(crate) fn check_point(&self, xi: &[f64]) -> Result<(), BasisError> {
        if xi.len() != self.dimension() {
            return Err(BasisError::DimensionMismatch {
                expected: self.dimension(),
                got: xi.len(),
            });
        }
        for (d, &x) in xi.iter().enumerate() {
            if x < self.lower[d] - COORD_TOL || x > self.upper[d] + COORD_TOL {
                return Err(BasisError::PointOutsideBox {
                    dim: d,
                    value: x,
                    lo: self.lower[d],
                    hi: self.upper[d],
                });
            }
        }
        Ok(())
    }
}

/// Tensor-product basis term `Psi_alpha(xi)` with box-scaled univariate factors.
pub fn multivariate_eval(alpha: &MultiIndex, xi: &[f64], bounds: &Aabb) -> Result<f64, BasisError> {
    if alpha.dimension() != bounds.dimension() {
        return Err(BasisError::DimensionMismatch {
            expected: bounds.dimension(),
            got: alpha.dimension(),
        });
    }
    bounds.check_point(xi)?;
    let mut value = 1.0;
    for (d, &n) in alpha.exponents().iter().enumerate() {
        value *= legendre_value(n, to_reference(xi[d], bounds.lower[d], bounds.upper[d]));
    }
    Ok(value)
}

/// Data matrix with entry `(i, j) = Psi_{alpha_j}(xi_i)` for box-scaled terms.
pub fn design_matrix(
    points: &[crate::Point],
    basis: &BasisSet,
    bounds: &Aabb,
) -> Result<DMatrix<f64>, BasisError> {
    for p in points {
        bounds.check_point(p)?;
    }
    let mut matrix = DMatrix::zeros(points.len(), basis.len());
    for (i, p) in points.iter().enumerate() {
        let row = basis.eval_unchecked(p, bounds);
        for (j, v) in row.into_iter().enumerate() {
            matrix[(i, j)] = v;
        }
    }
    Ok(matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn degree_zero_is_one_everywhere() {
        assert_eq!(legendre_orthonormal(0, 0.3).unwrap(), 1.0);
        assert_eq!(scaled_legendre(0, 0.7, (0.5, 1.0)).unwrap(), 1.0);
    }

    #[test]
    fn low_degree_closed_forms() {
        // sqrt(3) * x and sqrt(5) * (3x^2 - 1) / 2
        assert_abs_diff_eq!(
            legendre_orthonormal(1, 1.0).unwrap(),
            3.0f64.sqrt(),
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            legendre_orthonormal(2, 0.0).unwrap(),
            -(5.0f64.sqrt()) / 2.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn out_of_domain_is_rejected() {
        assert!(legendre_orthonormal(3, 1.0 + 1e-9).is_err());
        assert!(legendre_orthonormal(3, 1.0 + 1e-13).is_ok());
        assert!(scaled_legendre(1, 0.4, (0.5, 1.0)).is_err());
    }

    #[test]
    fn scaled_midpoint_maps_to_zero() {
        assert_abs_diff_eq!(
            scaled_legendre(1, 0.75, (0.5, 1.0)).unwrap(),
            0.0,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            scaled_legendre(1, 1.0, (0.5, 1.0)).unwrap(),
            3.0f64.sqrt(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn scaling_consistency_on_reference_edge() {
        for n in 0..=8 {
            for k in 0..50 {
                let x = -1.0 + 2.0 * k as f64 / 49.0;
                let direct = legendre_orthonormal(n, x).unwrap();
                let scaled = scaled_legendre(n, x, (-1.0, 1.0)).unwrap();
                assert_abs_diff_eq!(direct, scaled, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn multivariate_products() {
        let unit = Aabb::unit(2);
        let intercept = MultiIndex::new(vec![0, 0]);
        assert_eq!(
            multivariate_eval(&intercept, &[0.42, 0.9], &unit).unwrap(),
            1.0
        );

        let a10 = MultiIndex::new(vec![1, 0]);
        assert_abs_diff_eq!(
            multivariate_eval(&a10, &[1.0, 0.5], &unit).unwrap(),
            3.0f64.sqrt(),
            epsilon = 1e-14
        );

        let a11 = MultiIndex::new(vec![1, 1]);
        assert_abs_diff_eq!(
            multivariate_eval(&a11, &[0.5, 0.5], &unit).unwrap(),
            0.0,
            epsilon = 1e-14
        );

        let wrong_dim = MultiIndex::new(vec![1]);
        assert!(multivariate_eval(&wrong_dim, &[0.5, 0.5], &unit).is_err());
    }

    #[test]
    fn total_degree_cardinalities() {
        assert_eq!(BasisSet::total_degree(2, 2).unwrap().len(), 6);
        assert_eq!(BasisSet::total_degree(3, 2).unwrap().len(), 10);
        let trivial = BasisSet::total_degree(1, 0).unwrap();
        assert_eq!(trivial.len(), 1);
        assert!(trivial.indices()[0].is_intercept());
    }

    #[test]
    fn basis_ordering_is_deterministic_and_degree_major() {
        let a = BasisSet::total_degree(3, 4).unwrap();
        let b = BasisSet::total_degree(3, 4).unwrap();
        assert_eq!(a, b);
        let degrees: Vec<usize> = a.indices().iter().map(|i| i.total_degree()).collect();
        assert!(degrees.windows(2).all(|w| w[0] <= w[1]));
        assert!(a.indices()[0].is_intercept());
        // no duplicates
        let unique: std::collections::HashSet<_> = a.indices().iter().collect();
        assert_eq!(unique.len(), a.len());
    }

    #[test]
    fn cardinality_cap_guard() {
        let err = BasisSet::total_degree_with_cap(10, 10, 1000).unwrap_err();
        assert!(matches!(err, BasisError::CardinalityOverflow { .. }));
    }

    #[test]
    fn design_matrix_basics() {
        let unit = Aabb::unit(1);
        let basis = BasisSet::total_degree(1, 0).unwrap();
        let m = design_matrix(&[vec![0.3]], &basis, &unit).unwrap();
        assert_eq!(m.nrows(), 1);
        assert_eq!(m[(0, 0)], 1.0);

        let basis2 = BasisSet::total_degree(1, 3).unwrap();
        let pts: Vec<Vec<f64>> = (0..7).map(|k| vec![k as f64 / 6.0]).collect();
        let m2 = design_matrix(&pts, &basis2, &unit).unwrap();
        for i in 0..7 {
            assert_eq!(m2[(i, 0)], 1.0);
        }

        let outside = design_matrix(&[vec![1.2]], &basis2, &unit);
        assert!(outside.is_err());
    }

    #[test]
    fn half_open_membership_rule() {
        let left = Aabb::new(vec![0.0, 0.0], vec![0.5, 1.0]).unwrap();
        let right = Aabb::new(vec![0.5, 0.0], vec![1.0, 1.0]).unwrap();
        let on_face = [0.5, 0.2];
        assert!(!left.contains_half_open(&on_face));
        assert!(right.contains_half_open(&on_face));
        // global upper corner stays covered
        assert!(right.contains_half_open(&[1.0, 1.0]));
    }

    #[test]
    fn aabb_validation() {
        assert!(Aabb::new(vec![0.2], vec![0.2]).is_err());
        assert!(Aabb::new(vec![-0.1], vec![0.5]).is_err());
        assert!(Aabb::new(vec![0.0], vec![1.1]).is_err());
        let b = Aabb::new(vec![0.25, 0.5], vec![0.5, 1.0]).unwrap();
        assert_abs_diff_eq!(b.volume(), 0.125, epsilon = 1e-16);
    }
}
