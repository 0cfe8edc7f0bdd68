//! Coefficient estimation and model selection for local expansions.
//!
//! Ordinary least squares is solved through an SVD with an explicit rank
//! check. Model selection runs least-angle regression to rank candidate
//! terms, refits every nested active set by OLS and keeps the set with the
//! lowest analytic leave-one-out error (hybrid LARS).

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Finite, orderable sentinel for an untrustworthy leave-one-out error.
pub const MAX_ERROR: f64 = 1e6;

/// Relative singular-value threshold below which a design is rank deficient.
pub const RANK_TOL: f64 = 1e-10;

/// Leverage values this close to one mean the fit interpolates the point.
const LEVERAGE_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum RegressionError {
    #[error("rank-deficient design: singular value ratio {ratio:e} below {RANK_TOL:e}")]
    RankDeficient { ratio: f64 },

    #[error("dimension mismatch: {rows} rows, {cols} columns, {responses} responses")]
    DimensionMismatch {
        rows: usize,
        cols: usize,
        responses: usize,
    },

    #[error("need at least {needed} rows, got {rows}")]
    NotEnoughRows { rows: usize, needed: usize },

    #[error("a leverage value reached one, the fit interpolates a training point")]
    LeverageOne,
}

/// Outcome of a (possibly sparse) least-squares fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    /// Coefficients over the *full* candidate basis; unselected terms are zero.
    pub coefficients: DVector<f64>,
    /// Active column indices, ascending. Always contains the intercept 0.
    pub selected: Vec<usize>,
    /// Analytic leave-one-out error, `MAX_ERROR` when untrustworthy.
    pub q2: f64,
    /// Leverage values of the training points under the active design.
    pub h_diag: DVector<f64>,
}

struct SvdFit {
    beta: DVector<f64>,
    h_diag: DVector<f64>,
}

/// SVD least squares on all columns, with the relative rank check.
fn svd_solve(design: &DMatrix<f64>, y: &DVector<f64>) -> Result<SvdFit, RegressionError> {
    let n = design.nrows();
    let p = design.ncols();
    let svd = design.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let sigma = &svd.singular_values;

    let largest = sigma.iter().cloned().fold(0.0f64, f64::max);
    let smallest = sigma.iter().cloned().fold(f64::INFINITY, f64::min);
    if largest <= 0.0 || smallest <= RANK_TOL * largest {
        return Err(RegressionError::RankDeficient {
            ratio: if largest > 0.0 {
                smallest / largest
            } else {
                0.0
            },
        });
    }

    // beta = V diag(1/sigma) U^T y
    let uty = u.transpose() * y;
    let scaled = DVector::from_iterator(
        sigma.len(),
        uty.iter().zip(sigma.iter()).map(|(c, s)| c / s),
    );
    let beta = v_t.transpose() * scaled;

    // H = U U^T for a full-rank thin factorization
    let mut h_diag = DVector::zeros(n);
    for i in 0..n {
        let mut hi = 0.0;
        for k in 0..p.min(n) {
            hi += u[(i, k)] * u[(i, k)];
        }
        h_diag[i] = hi;
    }
    Ok(SvdFit { beta, h_diag })
}

/// Unbiased sample variance of the responses.
fn response_variance(y: &DVector<f64>) -> f64 {
    let n = y.len();
    if n < 2 {
        return 0.0;
    }
    let mean = y.sum() / n as f64;
    y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0)
}

/// Leave-one-out error from residuals and leverages.
///
/// For a near-constant response the error is zero when the residuals vanish
/// and `MAX_ERROR` otherwise; a leverage at one raises `LeverageOne`.
fn loo_from_parts(
    residuals: &DVector<f64>,
    h_diag: &DVector<f64>,
    y: &DVector<f64>,
) -> Result<f64, RegressionError> {
    if h_diag.iter().any(|&h| h > 1.0 - LEVERAGE_TOL) {
        return Err(RegressionError::LeverageOne);
    }
    let sigma2 = response_variance(y);
    if sigma2 < 1e-14 {
        if residuals.iter().all(|r| r.abs() < 1e-12) {
            return Ok(0.0);
        }
        return Ok(MAX_ERROR);
    }
    let n = residuals.len() as f64;
    let sum: f64 = residuals
        .iter()
        .zip(h_diag.iter())
        .map(|(r, h)| {
            let adj = r / (1.0 - h);
            adj * adj
        })
        .sum();
    Ok((sum / n / sigma2).min(MAX_ERROR))
}

/// Analytic leave-one-out error of an already-fitted active design.
///
/// Returns the normalized error together with the leverage values. An
/// interpolating design (some `h_i -> 1`) is reported as `LeverageOne`.
pub fn loo_error(
    design: &DMatrix<f64>,
    y: &DVector<f64>,
    beta: &DVector<f64>,
) -> Result<(f64, DVector<f64>), RegressionError> {
    if design.nrows() != y.len() || design.ncols() != beta.len() {
        return Err(RegressionError::DimensionMismatch {
            rows: design.nrows(),
            cols: design.ncols(),
            responses: y.len(),
        });
    }
    let fitted = svd_solve(design, y)?;
    let residuals = y - design * beta;
    let q2 = loo_from_parts(&residuals, &fitted.h_diag, y)?;
    Ok((q2, fitted.h_diag))
}

/// Ordinary least squares over every column of the design.
pub fn ols_fit(design: &DMatrix<f64>, y: &DVector<f64>) -> Result<FitResult, RegressionError> {
    let n = design.nrows();
    let p = design.ncols();
    if n != y.len() {
        return Err(RegressionError::DimensionMismatch {
            rows: n,
            cols: p,
            responses: y.len(),
        });
    }
    if n < p {
        return Err(RegressionError::NotEnoughRows { rows: n, needed: p });
    }
    let fitted = svd_solve(design, y)?;
    let residuals = y - design * &fitted.beta;
    let q2 = match loo_from_parts(&residuals, &fitted.h_diag, y) {
        Ok(q2) => q2,
        Err(RegressionError::LeverageOne) => MAX_ERROR,
        Err(e) => return Err(e),
    };
    Ok(FitResult {
        coefficients: fitted.beta,
        selected: (0..p).collect(),
        q2,
        h_diag: fitted.h_diag,
    })
}

/// One candidate active set on the least-angle path with its refit error.
#[derive(Debug, Clone)]
pub struct PathCandidate {
    /// Active column indices in activation order, starting at the intercept.
    pub columns: Vec<usize>,
    pub q2: f64,
}

/// Least-angle activation order over the non-intercept columns.
///
/// Columns are centered and normalized for the path computation only. The
/// returned indices refer to the original design. Columns that are constant
/// on the data or become linearly dependent on the active set are skipped.
fn lars_activation_order(design: &DMatrix<f64>, y: &DVector<f64>, max_active: usize) -> Vec<usize> {
    let n = design.nrows();
    let p = design.ncols();
    if max_active == 0 || p <= 1 || n < 2 {
        return Vec::new();
    }

    let y_mean = y.sum() / n as f64;
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));

    // usable candidate columns, centered and unit-normalized
    let mut cols: Vec<DVector<f64>> = Vec::new();
    let mut col_ids: Vec<usize> = Vec::new();
    for j in 1..p {
        let col = design.column(j);
        let mean = col.sum() / n as f64;
        let centered = DVector::from_iterator(n, col.iter().map(|v| v - mean));
        let norm = centered.norm();
        if norm > 1e-12 {
            cols.push(centered / norm);
            col_ids.push(j);
        }
    }
    let m = cols.len();
    if m == 0 {
        return Vec::new();
    }

    let mut c: Vec<f64> = cols.iter().map(|x| x.dot(&yc)).collect();
    let mut status = vec![CandidateStatus::Inactive; m];
    let mut order: Vec<usize> = Vec::new();
    // Cholesky factor of the active Gram matrix, grown one column per step
    let mut chol: Vec<Vec<f64>> = Vec::new();
    let mut active: Vec<usize> = Vec::new();

    let limit = max_active.min(m).min(n.saturating_sub(1));
    while active.len() < limit {
        let mut best: Option<(f64, usize)> = None;
        for j in 0..m {
            if status[j] == CandidateStatus::Inactive {
                let a = c[j].abs();
                if best.is_none_or(|(b, _)| a > b) {
                    best = Some((a, j));
                }
            }
        }
        let Some((c_max, j_new)) = best else { break };
        if c_max < 1e-12 {
            break;
        }

        // extend the Cholesky factor with the new column's Gram entries
        let k = active.len();
        let mut gram_col = Vec::with_capacity(k + 1);
        for &ja in &active {
            gram_col.push(cols[ja].dot(&cols[j_new]));
        }
        gram_col.push(1.0);
        let mut row = vec![0.0; k + 1];
        for i in 0..k {
            let mut s = gram_col[i];
            for t in 0..i {
                s -= chol[i][t] * row[t];
            }
            row[i] = s / chol[i][i];
        }
        let d = gram_col[k] - row[..k].iter().map(|v| v * v).sum::<f64>();
        if d <= 1e-10 {
            // linearly dependent on the active set, never activate it
            status[j_new] = CandidateStatus::Dropped;
            continue;
        }
        row[k] = d.sqrt();
        chol.push(row);
        active.push(j_new);
        status[j_new] = CandidateStatus::Active;
        order.push(col_ids[j_new]);

        // equiangular direction: solve G_A g = s with the running Cholesky
        let k = active.len();
        let signs: Vec<f64> = active.iter().map(|&ja| c[ja].signum()).collect();
        let mut g = vec![0.0; k];
        for i in 0..k {
            let mut s = signs[i];
            for t in 0..i {
                s -= chol[i][t] * g[t];
            }
            g[i] = s / chol[i][i];
        }
        for i in (0..k).rev() {
            let mut s = g[i];
            for t in (i + 1)..k {
                s -= chol[t][i] * g[t];
            }
            g[i] = s / chol[i][i];
        }
        let s_dot_g: f64 = signs.iter().zip(&g).map(|(a, b)| a * b).sum();
        if s_dot_g <= 0.0 {
            break;
        }
        let a_a = 1.0 / s_dot_g.sqrt();

        // u = X_A w, a_j = x_j . u
        let mut u = DVector::zeros(n);
        for (i, &ja) in active.iter().enumerate() {
            u += &cols[ja] * (a_a * g[i]);
        }

        let mut gamma = c_max / a_a;
        if active.len() < limit {
            for j in 0..m {
                if status[j] != CandidateStatus::Inactive {
                    continue;
                }
                let aj = cols[j].dot(&u);
                for candidate in [(c_max - c[j]) / (a_a - aj), (c_max + c[j]) / (a_a + aj)] {
                    if candidate > 1e-14 && candidate < gamma {
                        gamma = candidate;
                    }
                }
            }
        }
        if !gamma.is_finite() || gamma <= 0.0 {
            break;
        }
        for j in 0..m {
            match status[j] {
                CandidateStatus::Inactive => c[j] -= gamma * cols[j].dot(&u),
                CandidateStatus::Active => c[j] -= gamma * c[j].signum() * a_a,
                CandidateStatus::Dropped => {}
            }
        }
    }
    order
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum CandidateStatus {
    Inactive,
    Active,
    Dropped,
}

/// Incremental thin QR used to refit the nested active sets cheaply. Only
/// the orthonormal columns and `Q^T y` are kept; errors and leverages of any
/// prefix follow from those.
struct GrowingQr {
    q: Vec<DVector<f64>>,
    qty: Vec<f64>,
    residual: DVector<f64>,
}

impl GrowingQr {
    fn new(y: &DVector<f64>) -> Self {
        Self {
            q: Vec::new(),
            qty: Vec::new(),
            residual: y.clone(),
        }
    }

    /// Orthogonalize `v` against the current Q; rejects dependent columns.
    fn push_column(&mut self, v: &DVector<f64>) -> Result<(), RegressionError> {
        let norm_in = v.norm();
        let mut w = v.clone();
        // two Gram-Schmidt passes keep Q orthonormal to working precision
        for _ in 0..2 {
            for qi in &self.q {
                let proj = qi.dot(&w);
                w -= qi * proj;
            }
        }
        let norm_out = w.norm();
        if norm_out <= RANK_TOL * norm_in.max(1.0) {
            return Err(RegressionError::RankDeficient {
                ratio: norm_out / norm_in.max(1.0),
            });
        }
        let qk = w / norm_out;
        let qk_y = qk.dot(&self.residual);
        self.residual -= &qk * qk_y;
        self.q.push(qk);
        self.qty.push(qk_y);
        Ok(())
    }

    fn len(&self) -> usize {
        self.q.len()
    }

    /// Residual and leverages of the prefix fit with `k` columns.
    fn prefix_parts(&self, k: usize, y: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let n = y.len();
        let mut residual = y.clone();
        let mut h = DVector::zeros(n);
        for j in 0..k {
            residual -= &self.q[j] * self.qty[j];
            for i in 0..n {
                h[i] += self.q[j][i] * self.q[j][i];
            }
        }
        (residual, h)
    }
}

/// Hybrid least-angle model selection.
///
/// Runs the least-angle path, refits each nested active set by OLS and
/// returns the set minimizing the analytic leave-one-out error. The
/// intercept column 0 is always active. `max_terms` bounds the active set
/// size including the intercept and is clamped to `min(n - 1, p)`.
pub fn lars_select(
    design: &DMatrix<f64>,
    y: &DVector<f64>,
    max_terms: usize,
) -> Result<FitResult, RegressionError> {
    let n = design.nrows();
    let p = design.ncols();
    if n != y.len() {
        return Err(RegressionError::DimensionMismatch {
            rows: n,
            cols: p,
            responses: y.len(),
        });
    }
    if n < 2 {
        return Err(RegressionError::NotEnoughRows { rows: n, needed: 2 });
    }
    let max_terms = max_terms.max(1).min(n - 1).min(p);

    let candidates = lars_path_candidates(design, y, max_terms);
    let min_q2 = candidates
        .iter()
        .map(|c| c.q2)
        .fold(f64::INFINITY, f64::min);
    // prefer the sparsest set among numerical ties of the minimum
    let tie_tol = min_q2 * 1e-9 + 1e-14;
    let best = candidates
        .iter()
        .find(|c| c.q2 <= min_q2 + tie_tol)
        .expect("path always contains the intercept-only fit");

    // final refit of the winner on the original columns
    let active_sorted = {
        let mut cols = best.columns.clone();
        cols.sort_unstable();
        cols
    };
    let sub = design.select_columns(&active_sorted);
    match svd_solve(&sub, y) {
        Ok(fitted) => {
            let mut coefficients = DVector::zeros(p);
            for (slot, &j) in active_sorted.iter().enumerate() {
                coefficients[j] = fitted.beta[slot];
            }
            Ok(FitResult {
                coefficients,
                selected: active_sorted,
                q2: best.q2,
                h_diag: fitted.h_diag,
            })
        }
        // the winner passed the path's rank filter but not the stricter
        // SVD check; the mean fit is always available
        Err(RegressionError::RankDeficient { .. }) => {
            let mean = y.sum() / n as f64;
            let mut coefficients = DVector::zeros(p);
            coefficients[0] = mean;
            let residuals = DVector::from_iterator(n, y.iter().map(|v| v - mean));
            let h_diag = DVector::from_element(n, 1.0 / n as f64);
            let q2 = loo_from_parts(&residuals, &h_diag, y).unwrap_or(MAX_ERROR);
            Ok(FitResult {
                coefficients,
                selected: vec![0],
                q2,
                h_diag,
            })
        }
        Err(e) => Err(e),
    }
}

/// Every nested active set visited by hybrid selection, with its refit
/// leave-one-out error. Exposed for diagnostics and path-property checks.
pub fn lars_path_candidates(
    design: &DMatrix<f64>,
    y: &DVector<f64>,
    max_terms: usize,
) -> Vec<PathCandidate> {
    let n = design.nrows();
    let max_terms = max_terms
        .max(1)
        .min(n.saturating_sub(1))
        .min(design.ncols());
    let mut out = Vec::new();

    let mut qr = GrowingQr::new(y);
    let intercept = DVector::from_column_slice(design.column(0).as_slice());
    let mut chain: Vec<usize> = Vec::new();
    if qr.push_column(&intercept).is_ok() {
        chain.push(0);
        let (residual, h) = qr.prefix_parts(1, y);
        let q2 = match loo_from_parts(&residual, &h, y) {
            Ok(q2) => q2,
            Err(_) => MAX_ERROR,
        };
        out.push(PathCandidate {
            columns: chain.clone(),
            q2,
        });
    } else {
        // degenerate all-zero intercept cannot happen for a polynomial basis;
        // report the mean fit as the only candidate
        out.push(PathCandidate {
            columns: vec![0],
            q2: MAX_ERROR,
        });
        return out;
    }

    let order = lars_activation_order(design, y, max_terms - 1);
    for j in order {
        if qr.len() >= max_terms {
            break;
        }
        let col = DVector::from_column_slice(design.column(j).as_slice());
        if qr.push_column(&col).is_err() {
            // dependent in the original (uncentered) geometry, skip the term
            continue;
        }
        chain.push(j);
        let k = qr.len();
        let (residual, h) = qr.prefix_parts(k, y);
        let q2 = match loo_from_parts(&residual, &h, y) {
            Ok(q2) => q2,
            Err(_) => MAX_ERROR,
        };
        out.push(PathCandidate {
            columns: chain.clone(),
            q2,
        });
    }
    out
}
