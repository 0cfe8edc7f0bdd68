//! Shared oracles for the integration tests. Everything here is independent
//! of the library's evaluation paths: quadrature nodes come from Newton
//! iteration on the classical recurrence and leave-one-out errors from
//! explicit refits.
#![allow(dead_code)] // each test binary uses a different subset

use nalgebra::{DMatrix, DVector};

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Tricomi-style initial guess, then Newton on P_n
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_and_derivative(n, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Classical (unnormalized) Legendre value and derivative.
fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Leave-one-out error by explicitly refitting the design N times.
///
/// Matches the analytic definition: mean squared deleted residual divided by
/// the unbiased sample variance of the responses.
pub fn brute_force_loo(design: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let n = design.nrows();
    assert!(n >= 2);
    let mean = y.sum() / n as f64;
    let sigma2 = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);

    let mut total = 0.0;
    for i in 0..n {
        let rows: Vec<usize> = (0..n).filter(|&r| r != i).collect();
        let sub = design.select_rows(&rows);
        let ysub = DVector::from_iterator(n - 1, rows.iter().map(|&r| y[r]));
        let beta = solve_normal_equations(&sub, &ysub);
        let pred: f64 = design
            .row(i)
            .iter()
            .zip(beta.iter())
            .map(|(a, b)| a * b)
            .sum();
        let resid = y[i] - pred;
        total += resid * resid;
    }
    total / n as f64 / sigma2
}

/// Plain normal-equations solve, a deliberately different route from the
/// library's SVD.
pub fn solve_normal_equations(design: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let gram = design.transpose() * design;
    let rhs = design.transpose() * y;
    gram.lu()
        .solve(&rhs)
        .expect("oracle designs are well conditioned")
}

/// Uniform sample inside a box using any iterator of unit draws.
pub fn scale_into_box(unit_draws: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    unit_draws
        .iter()
        .zip(lower.iter().zip(upper))
        .map(|(u, (a, b))| a + u * (b - a))
        .collect()
}
