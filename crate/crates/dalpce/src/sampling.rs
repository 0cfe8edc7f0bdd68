//! Seeded sample streams, Latin hypercube pools, nearest-neighbor distances
//! and the variance-based candidate and sub-domain scores.
//!
//! All scoring is deterministic for a fixed seed: candidate evaluation is a
//! pure map and every argmax breaks ties by the lowest index, so worker count
//! never changes the selected points.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::Decomposition;
use crate::parallel;
use crate::polybasis::Aabb;
use crate::surrogate::LocalPce;
use crate::Point;

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("candidate pool is empty")]
    EmptyPool,

    #[error("experimental design is empty")]
    EmptyDesign,
}

/// Density convention for the variance-density factor of the candidate score.
///
/// `Local` weighs by the owning sub-domain's uniform density `1 / volume`,
/// `Global` uses the unit-hypercube density 1. The choice only rescales
/// scores between sub-domains of different size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityConvention {
    #[default]
    Local,
    Global,
}

impl DensityConvention {
    pub(crate) fn density_for(&self, volume: f64) -> f64 {
        match self {
            DensityConvention::Local => 1.0 / volume,
            DensityConvention::Global => 1.0,
        }
    }
}

/// Counter-based random stream: a fixed seed reproduces the exact sample
/// sequence on every platform, and the stream state restores from a snapshot.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha12Rng,
}

/// Serializable position of an [`RngStream`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSnapshot {
    pub seed: u64,
    pub stream_id: u64,
    /// ChaCha word position, stored as a string because it exceeds u64.
    pub word_pos: String,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random()
    }

    pub fn snapshot(&self) -> RngSnapshot {
        RngSnapshot {
            seed: self.seed,
            stream_id: self.stream_id,
            word_pos: self.rng.get_word_pos().to_string(),
        }
    }

    pub fn restore(snapshot: &RngSnapshot) -> Result<Self, std::num::ParseIntError> {
        let mut stream = Self::new(snapshot.seed, snapshot.stream_id);
        let pos: u128 = snapshot.word_pos.parse()?;
        stream.rng.set_word_pos(pos);
        Ok(stream)
    }

    fn rng_mut(&mut self) -> &mut ChaCha12Rng {
        &mut self.rng
    }
}

/// The global archive of evaluated points and model outputs.
///
/// Points are deduplicated by exact coordinate equality so re-runs from
/// serialized state never evaluate the same input twice.
#[derive(Debug, Clone, Default)]
pub struct ExperimentalDesign {
    points: Vec<Point>,
    outputs: Vec<f64>,
    index: HashMap<Vec<u64>, usize>,
}

fn bit_key(point: &[f64]) -> Vec<u64> {
    point.iter().map(|x| x.to_bits()).collect()
}

impl ExperimentalDesign {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn point(&self, id: usize) -> &Point {
        &self.points[id]
    }

    pub fn output(&self, id: usize) -> f64 {
        self.outputs[id]
    }

    /// Id of an already-evaluated point with exactly these coordinates.
    pub fn find(&self, point: &[f64]) -> Option<usize> {
        self.index.get(&bit_key(point)).copied()
    }

    /// Append an evaluated point; returns its id, or the existing id if the
    /// coordinates were already present.
    pub fn push(&mut self, point: Point, output: f64) -> usize {
        if let Some(id) = self.find(&point) {
            return id;
        }
        let id = self.points.len();
        self.index.insert(bit_key(&point), id);
        self.points.push(point);
        self.outputs.push(output);
        id
    }

    /// Sample variance of the outputs (unbiased).
    pub fn output_variance(&self) -> f64 {
        let n = self.outputs.len();
        if n < 2 {
            return 0.0;
        }
        let mean: f64 = self.outputs.iter().sum::<f64>() / n as f64;
        self.outputs
            .iter()
            .map(|y| (y - mean) * (y - mean))
            .sum::<f64>()
            / (n as f64 - 1.0)
    }
}

/// What a pool of unevaluated candidate points is for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PoolKind {
    /// Global screening candidates used to rank sub-domains.
    ScreeningGlobal,
    /// Local candidates from which new design points are selected.
    Local,
}

/// A pool of candidate points; selected points are removed one by one.
#[derive(Debug, Clone)]
pub struct CandidatePool {
    pub points: Vec<Point>,
    pub kind: PoolKind,
    pub owner: Aabb,
}

impl CandidatePool {
    pub fn screening(points: Vec<Point>, dimension: usize) -> Self {
        Self {
            points,
            kind: PoolKind::ScreeningGlobal,
            owner: Aabb::unit(dimension),
        }
    }

    pub fn local(points: Vec<Point>, owner: Aabb) -> Self {
        Self {
            points,
            kind: PoolKind::Local,
            owner,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Latin hypercube sample of `n` points in `bounds`.
///
/// Each dimension places exactly one point per stratum of the edge, pairs
/// strata across dimensions with independent random permutations and draws
/// the within-stratum position uniformly.
pub fn lhs(n: usize, bounds: &Aabb, rng: &mut RngStream) -> Vec<Point> {
    assert!(n >= 1);
    let m = bounds.dimension();
    let mut samples = vec![vec![0.0; m]; n];
    for d in 0..m {
        let (a, b) = bounds.edge(d);
        let width = b - a;
        let mut values: Vec<f64> = (0..n)
            .map(|k| {
                let u: f64 = rng.uniform();
                (k as f64 + u) / n as f64
            })
            .collect();
        values.shuffle(rng.rng_mut());
        for (sample, v) in samples.iter_mut().zip(values) {
            sample[d] = a + v * width;
        }
    }
    samples
}

/// Euclidean distance from `candidate` to its nearest point, ties broken by
/// the lowest index. `None` on an empty set.
pub fn nearest_distance(candidate: &[f64], points: &[Point]) -> Option<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for (i, p) in points.iter().enumerate() {
        let d2: f64 = candidate
            .iter()
            .zip(p.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        if best.is_none_or(|(bd, _)| d2 < bd) {
            best = Some((d2, i));
        }
    }
    best.map(|(d2, i)| (d2.sqrt(), i))
}

/// Candidate score: geometric mean of the variance densities at the candidate
/// and at its nearest neighbor, times the distance raised to the dimension.
/// Both densities come from the expansion owning the candidate, which may
/// extrapolate slightly when the neighbor lies outside its box.
fn theta_score(
    candidate: &[f64],
    pce: &LocalPce,
    density: f64,
    scope: &[Point],
    dimension: usize,
) -> f64 {
    let Some((dist, nearest)) = nearest_distance(candidate, scope) else {
        return 0.0;
    };
    if dist == 0.0 {
        return 0.0;
    }
    let var_c = pce.variance_density_unchecked(candidate, density);
    let var_s = pce.variance_density_unchecked(&scope[nearest], density);
    (var_c * var_s).sqrt() * dist.powi(dimension as i32)
}

/// Candidate score against the composite surrogate, with the nearest
/// neighbor searched over the whole experimental design.
pub fn theta_c(
    candidate: &[f64],
    decomp: &Decomposition,
    ed: &ExperimentalDesign,
    convention: DensityConvention,
) -> Result<f64, SamplingError> {
    if ed.is_empty() {
        return Err(SamplingError::EmptyDesign);
    }
    let id = decomp
        .locate(candidate)
        .expect("candidates come from the unit hypercube");
    let sub = decomp.subdomain(id);
    let density = convention.density_for(sub.volume);
    Ok(theta_score(
        candidate,
        &sub.pce,
        density,
        ed.points(),
        decomp.dimension(),
    ))
}

/// Sub-domain score and its decisive screening candidate.
#[derive(Debug, Clone)]
pub struct SubdomainScore {
    pub theta: f64,
    /// Index into the screening pool of the best candidate, when any landed
    /// in this sub-domain.
    pub decisive: Option<usize>,
    /// Best raw candidate score inside the sub-domain.
    pub best_theta_c: f64,
}

/// Score every sub-domain as `volume * exp(min(q2, 1)) * max theta_c` over
/// the screening candidates it contains. Sub-domains without a candidate
/// get a zero score and no decisive candidate.
pub fn theta_subdomain(
    decomp: &Decomposition,
    screening: &CandidatePool,
    ed: &ExperimentalDesign,
    convention: DensityConvention,
) -> Result<Vec<SubdomainScore>, SamplingError> {
    if screening.is_empty() {
        return Err(SamplingError::EmptyPool);
    }
    if ed.is_empty() {
        return Err(SamplingError::EmptyDesign);
    }
    let dimension = decomp.dimension();
    let scored: Vec<(usize, f64)> = parallel::map_ordered(&screening.points, |candidate| {
        let id = decomp
            .locate(candidate)
            .expect("screening candidates cover the unit hypercube");
        let sub = decomp.subdomain(id);
        let density = convention.density_for(sub.volume);
        let theta = theta_score(candidate, &sub.pce, density, ed.points(), dimension);
        (id, theta)
    });

    let mut best: Vec<Option<(f64, usize)>> = vec![None; decomp.len()];
    for (cand_idx, (sub_id, theta)) in scored.into_iter().enumerate() {
        let slot = &mut best[sub_id];
        // strict comparison keeps the lowest candidate index on ties
        if slot.is_none_or(|(t, _)| theta > t) {
            *slot = Some((theta, cand_idx));
        }
    }

    Ok(decomp
        .subdomains()
        .iter()
        .zip(best)
        .map(|(sub, entry)| {
            let weight = sub.volume * sub.q2.clamp(0.0, 1.0).exp();
            match entry {
                Some((theta_c_best, idx)) => SubdomainScore {
                    theta: weight * theta_c_best,
                    decisive: Some(idx),
                    best_theta_c: theta_c_best,
                },
                None => SubdomainScore {
                    theta: 0.0,
                    decisive: None,
                    best_theta_c: 0.0,
                },
            }
        })
        .collect())
}

/// Pick the next design point from a local pool by the candidate score.
///
/// Densities come from `pce`; the neighbor scope is `scope` (design points of
/// the owning sub-domain plus points already queued, or the global design
/// when the sub-domain holds none). When every score is zero the farthest
/// candidate wins, which is pure space filling. The winner is removed from
/// the pool.
pub fn select_next_point(
    pool: &mut CandidatePool,
    pce: &LocalPce,
    density: f64,
    scope: &[Point],
    dimension: usize,
) -> Result<Point, SamplingError> {
    if pool.is_empty() {
        return Err(SamplingError::EmptyPool);
    }
    let scored: Vec<(f64, f64)> = parallel::map_ordered(&pool.points, |candidate| {
        let dist = nearest_distance(candidate, scope).map_or(f64::INFINITY, |(d, _)| d);
        let theta = theta_score(candidate, pce, density, scope, dimension);
        (theta, dist)
    });

    let any_positive = scored.iter().any(|(t, _)| *t > 0.0);
    let mut winner = 0usize;
    let mut winner_key = f64::NEG_INFINITY;
    for (i, (theta, dist)) in scored.iter().enumerate() {
        let key = if any_positive { *theta } else { *dist };
        if key > winner_key {
            winner_key = key;
            winner = i;
        }
    }
    Ok(pool.points.remove(winner))
}
