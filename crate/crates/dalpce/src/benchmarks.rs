//! Built-in test functions, the relative mean-squared validation error and a
//! degree-adaptive global expansion used as a comparison baseline.

use thiserror::Error;

use crate::learner::FnModel;
use crate::parallel;
use crate::polybasis::{total_degree_cardinality, Aabb};
use crate::sampling::RngStream;
use crate::surrogate::{LocalPce, SurrogateError};
use crate::Point;

const STREAM_VALIDATION: u64 = 7;

#[derive(Debug, Error)]
pub enum BenchmarkError {
    #[error("the truth function has zero variance on the validation set")]
    ZeroVariance,

    #[error("unknown benchmark case {0:?}")]
    UnknownCase(String),

    #[error("no polynomial degree in the range fits the design size {0}")]
    NoUsableDegree(usize),

    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
}

/// Steep-peak one-dimensional function: a linear trend, a fast oscillation
/// and a narrow exponential bump near 0.65.
pub fn toy1d(x: f64) -> f64 {
    let bump = 50.0 * (x - 0.65);
    -x + 0.1 * (30.0 * x).sin() + (-(bump * bump)).exp()
}

/// Two mirrored quarter-circle arc singularities, blunted by `delta`.
pub fn singularity2d(x1: f64, x2: f64, delta: f64) -> f64 {
    let first = 1.0 / ((0.3 - x1 * x1 - x2 * x2).abs() + delta);
    let mirrored = 1.0 / ((0.3 - (1.0 - x1) * (1.0 - x1) - (1.0 - x2) * (1.0 - x2)).abs() + delta);
    first - mirrored
}

/// Discontinuous function in arbitrary dimension: a smooth sine patch below
/// the threshold in the first two coordinates, a linear sum elsewhere.
pub fn discontinuity_md(x: &[f64], threshold: f64) -> f64 {
    assert!(x.len() >= 2, "needs at least two dimensions");
    if x[0] <= threshold && x[1] <= threshold {
        (std::f64::consts::PI * x[0]).sin() * (std::f64::consts::PI * x[1]).sin()
    } else {
        x.iter().skip(2).sum()
    }
}

type CaseFn = Box<dyn Fn(&[f64]) -> f64 + Sync + Send>;

/// A named test function with whatever analytic facts are derivable.
pub struct BenchmarkCase {
    pub name: String,
    pub dimension: usize,
    pub known_mean: Option<f64>,
    pub default_budgets: Vec<usize>,
    function: CaseFn,
}

impl BenchmarkCase {
    pub fn toy1d() -> Self {
        Self {
            name: "toy1d".into(),
            dimension: 1,
            known_mean: None,
            default_budgets: vec![50, 100, 150, 200],
            function: Box::new(|x| toy1d(x[0])),
        }
    }

    pub fn singularity2d() -> Self {
        Self {
            name: "singularity2d".into(),
            dimension: 2,
            // antisymmetric about the center, so the mean vanishes
            known_mean: Some(0.0),
            default_budgets: vec![100, 200, 400, 800],
            function: Box::new(|x| singularity2d(x[0], x[1], 0.1)),
        }
    }

    pub fn discontinuity(dimension: usize, threshold: f64) -> Self {
        assert!(dimension >= 2);
        Self {
            name: format!("discontinuity{dimension}d"),
            dimension,
            known_mean: None,
            default_budgets: vec![150, 300, 600, 1200],
            function: Box::new(move |x| discontinuity_md(x, threshold)),
        }
    }

    /// Look a case up by its CLI name. The discontinuity family takes its
    /// dimension and threshold from the extra arguments.
    pub fn by_name(
        name: &str,
        dimension: Option<usize>,
        threshold: Option<f64>,
    ) -> Result<Self, BenchmarkError> {
        match name {
            "toy1d" => Ok(Self::toy1d()),
            "singularity2d" => Ok(Self::singularity2d()),
            "discontinuity" => Ok(Self::discontinuity(
                dimension.unwrap_or(2),
                threshold.unwrap_or(0.5),
            )),
            other => Err(BenchmarkError::UnknownCase(other.to_string())),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.function)(x)
    }

    pub fn model(&self) -> FnModel<impl Fn(&[f64]) -> f64 + Sync + '_> {
        FnModel::new(self.dimension, move |x: &[f64]| (self.function)(x))
    }
}

/// Pairwise (cascade) summation; keeps rounding error small and the result
/// independent of how the evaluation work was distributed.
pub(crate) fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

/// Relative mean-squared error of `surrogate` against `truth` over a seeded
/// crude Monte Carlo validation set; the variance in the denominator comes
/// from the same set.
pub fn epsilon_error<S, T>(
    surrogate: S,
    truth: T,
    dimension: usize,
    n_val: usize,
    seed: u64,
) -> Result<f64, BenchmarkError>
where
    S: Fn(&[f64]) -> f64 + Sync,
    T: Fn(&[f64]) -> f64 + Sync,
{
    assert!(n_val >= 2);
    let mut rng = RngStream::new(seed, STREAM_VALIDATION);
    let points: Vec<Point> = (0..n_val)
        .map(|_| (0..dimension).map(|_| rng.uniform()).collect())
        .collect();

    let truth_vals = parallel::map_ordered(&points, |p| truth(p));
    let surrogate_vals = parallel::map_ordered(&points, |p| surrogate(p));

    let n = n_val as f64;
    let mean_truth = pairwise_sum(&truth_vals) / n;
    let centered: Vec<f64> = truth_vals
        .iter()
        .map(|v| (v - mean_truth) * (v - mean_truth))
        .collect();
    let variance = pairwise_sum(&centered) / n;
    if variance <= 1e-300 {
        return Err(BenchmarkError::ZeroVariance);
    }
    let squared: Vec<f64> = truth_vals
        .iter()
        .zip(&surrogate_vals)
        .map(|(t, s)| (t - s) * (t - s))
        .collect();
    let mse = pairwise_sum(&squared) / n;
    Ok(mse / variance)
}

/// Single global expansion with the total degree chosen adaptively: every
/// degree in the range whose basis fits the design is fitted and the one
/// with the lowest leave-one-out error wins.
pub fn global_pce_baseline(
    points: &[Point],
    outputs: &[f64],
    p_range: (usize, usize),
    basis_cap: usize,
) -> Result<LocalPce, BenchmarkError> {
    assert!(!points.is_empty());
    let dimension = points[0].len();
    let unit = Aabb::unit(dimension);
    let n = points.len();

    let mut best: Option<LocalPce> = None;
    for p in p_range.0..=p_range.1 {
        let cardinality = total_degree_cardinality(dimension, p);
        if cardinality > n as u128 || cardinality > basis_cap as u128 {
            continue;
        }
        let pce = match LocalPce::fit(points, outputs, unit.clone(), p, basis_cap) {
            Ok(pce) => pce,
            Err(SurrogateError::Regression(_)) => continue,
            Err(e) => return Err(e.into()),
        };
        if best.as_ref().is_none_or(|b| pce.q2() < b.q2()) {
            best = Some(pce);
        }
    }
    best.ok_or(BenchmarkError::NoUsableDegree(n))
}
