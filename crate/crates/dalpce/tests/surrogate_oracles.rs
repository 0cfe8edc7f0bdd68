//! Monte Carlo and analytic ANOVA oracles for the local expansion.

mod support;

use dalpce::polybasis::Aabb;
use dalpce::sampling::RngStream;
use dalpce::surrogate::LocalPce;
use dalpce::Point;
use support::scale_into_box;

fn grid_2d(n: usize) -> Vec<Point> {
    let mut pts = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            pts.push(vec![i as f64 / (n - 1) as f64, j as f64 / (n - 1) as f64]);
        }
    }
    pts
}

fn mc_points(n: usize, bounds: &Aabb, seed: u64) -> Vec<Point> {
    let mut rng = RngStream::new(seed, 0);
    let m = bounds.dimension();
    (0..n)
        .map(|_| {
            let draws: Vec<f64> = (0..m).map(|_| rng.uniform()).collect();
            scale_into_box(&draws, bounds.lower(), bounds.upper())
        })
        .collect()
}

/// Coefficient variance equals Monte Carlo variance of the predictions.
#[test]
fn coefficient_variance_matches_monte_carlo() {
    let pts = grid_2d(7);
    let y: Vec<f64> = pts
        .iter()
        .map(|p| 0.3 + 2.0 * p[0] - p[1] + 1.5 * p[0] * p[1] - 0.7 * p[1] * p[1])
        .collect();
    let pce = LocalPce::fit(&pts, &y, Aabb::unit(2), 2, 1_000_000).unwrap();

    let samples = mc_points(100_000, pce.bounds(), 17);
    let preds: Vec<f64> = samples.iter().map(|p| pce.predict(p).unwrap()).collect();
    let mean: f64 = preds.iter().sum::<f64>() / preds.len() as f64;
    let var: f64 = preds.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / preds.len() as f64;

    let (cmean, cvar) = pce.local_moments();
    assert!((cmean - mean).abs() < 0.01 * mean.abs().max(1.0));
    assert!((cvar - var).abs() / var < 0.02, "coef {cvar} vs mc {var}");
}

/// The variance density integrates to the local variance over the box.
#[test]
fn variance_density_integral_identity() {
    let bounds = Aabb::new(vec![0.25, 0.125], vec![0.75, 0.5]).unwrap();
    let raw = mc_points(80, &bounds, 3);
    let y: Vec<f64> = raw
        .iter()
        .map(|p| (4.0 * p[0]).sin() + p[1] * p[1])
        .collect();
    let pce = LocalPce::fit(&raw, &y, bounds.clone(), 2, 1_000_000).unwrap();

    let density = 1.0 / bounds.volume();
    let samples = mc_points(100_000, &bounds, 29);
    // E over the box of density * volume = integral of the density
    let mean_density: f64 = samples
        .iter()
        .map(|p| pce.variance_density(p, density).unwrap())
        .sum::<f64>()
        / samples.len() as f64;
    let integral = mean_density * bounds.volume();
    let var = pce.variance();
    assert!(
        (integral - var).abs() / var < 0.02,
        "integral {integral} vs variance {var}"
    );
}

/// Fitting a polynomial of degree at most p reproduces it to round-off.
#[test]
fn predict_is_exact_on_polynomials() {
    let bounds = Aabb::new(vec![0.5, 0.0], vec![1.0, 0.5]).unwrap();
    let truth = |p: &[f64]| 1.0 - 2.0 * p[0] + 0.25 * p[1] + 3.0 * p[0] * p[1] + p[0] * p[0];
    let train = mc_points(24, &bounds, 11); // 2 P = 12 < 24 points
    let y: Vec<f64> = train.iter().map(|p| truth(p)).collect();
    let pce = LocalPce::fit(&train, &y, bounds.clone(), 2, 1_000_000).unwrap();

    let probes = mc_points(500, &bounds, 13);
    for p in &probes {
        assert!(
            (pce.predict(p).unwrap() - truth(p)).abs() < 1e-8,
            "mismatch at {p:?}"
        );
    }
}

/// Additive function: equal first-order indices.
#[test]
fn sobol_additive_function_splits_evenly() {
    let pts = grid_2d(6);
    let y: Vec<f64> = pts.iter().map(|p| p[0] + p[1]).collect();
    let pce = LocalPce::fit(&pts, &y, Aabb::unit(2), 2, 1_000_000).unwrap();
    let sobol = pce.local_sobol_first_order();
    assert!((sobol.values[0] - 0.5).abs() < 1e-8);
    assert!((sobol.values[1] - 0.5).abs() < 1e-8);
}

/// Pure product: analytic ANOVA gives 3/7 per factor, the rest interaction.
#[test]
fn sobol_product_function_analytic_indices() {
    let pts = grid_2d(8);
    let y: Vec<f64> = pts.iter().map(|p| p[0] * p[1]).collect();
    let pce = LocalPce::fit(&pts, &y, Aabb::unit(2), 2, 1_000_000).unwrap();
    let sobol = pce.local_sobol_first_order();
    let expected = 3.0 / 7.0;
    assert!((sobol.values[0] - expected).abs() < 1e-3);
    assert!((sobol.values[1] - expected).abs() < 1e-3);
    assert!(sobol.values[0] + sobol.values[1] < 1.0);
}
