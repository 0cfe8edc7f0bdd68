//! The adaptive loop: initialization, per-iteration refinement decisions,
//! periodic restart checks and stopping criteria.
//!
//! Each iteration scores every sub-domain, then either splits the winner (it
//! holds enough points for a trustworthy local fit) or extends its sample,
//! and finally refits the working sub-domain. Every `n_r` iterations the
//! composite error is compared against a single global fit on the same data;
//! when the decomposition loses, it is discarded and the run starts over from
//! the accumulated experimental design.

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Decomposition, DomainError, SubDomain};
use crate::polybasis::{total_degree_cardinality, Aabb, BasisError, DEFAULT_BASIS_CAP};
use crate::regression::RegressionError;
use crate::sampling::{
    lhs, select_next_point, theta_subdomain, CandidatePool, DensityConvention, ExperimentalDesign,
    RngStream, SamplingError,
};
use crate::surrogate::{LocalPce, SurrogateError};
use crate::{parallel, Point};

const STREAM_SAMPLING: u64 = 0;
const STREAM_SCREENING: u64 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model evaluation failed at {point:?}: {message}")]
    Evaluation { point: Point, message: String },

    #[error("model returned a non-finite value at {point:?}")]
    NonFinite { point: Point },

    #[error("model returned {got} values for {expected} points")]
    BatchLength { expected: usize, got: usize },
}

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Model(#[from] ModelError),

    #[error(transparent)]
    Sampling(#[from] SamplingError),

    #[error(transparent)]
    Domain(#[from] DomainError),

    #[error(transparent)]
    Surrogate(#[from] SurrogateError),

    #[error(transparent)]
    Basis(#[from] BasisError),
}

/// A black-box function on the unit hypercube.
///
/// Points queued within one learner step arrive as a single batch, which is
/// the natural place to amortize process startup or parallelize evaluation.
pub trait Model {
    fn dimension(&self) -> usize;
    fn eval_batch(&mut self, points: &[Point]) -> Result<Vec<f64>, ModelError>;
}

/// Adapter for pure functions; batch evaluation runs on the worker pool.
pub struct FnModel<F> {
    dimension: usize,
    f: F,
}

impl<F> FnModel<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    pub fn new(dimension: usize, f: F) -> Self {
        Self { dimension, f }
    }
}

impl<F> Model for FnModel<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn eval_batch(&mut self, points: &[Point]) -> Result<Vec<f64>, ModelError> {
        let values = parallel::map_ordered(points, |p| (self.f)(p));
        for (p, v) in points.iter().zip(&values) {
            if !v.is_finite() {
                return Err(ModelError::NonFinite { point: p.clone() });
            }
        }
        Ok(values)
    }
}

/// Settings of one learner run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    /// Maximum total degree of every local expansion.
    pub p_local: usize,
    /// Training size per sub-domain as a multiple of the basis size, in [1, 2].
    pub n_sim_factor: f64,
    /// Global screening candidates; default `1000 * dimension`.
    pub n_cg: Option<usize>,
    /// Local candidates per extension; default `5 * basis size`.
    pub n_cl: Option<usize>,
    /// Iteration cap.
    pub n_iter: usize,
    /// Total model-evaluation budget.
    pub budget: usize,
    /// Restart check period in iterations.
    pub n_r: usize,
    /// Stop once the aggregated leave-one-out error falls to this level.
    pub q2_stop: Option<f64>,
    /// Sub-domain edges below this length are never split.
    pub min_edge: f64,
    pub seed: u64,
    pub density_convention: DensityConvention,
    /// Draw a fresh screening pool after each restart.
    pub regenerate_screening_on_restart: bool,
    /// Guard against enormous total-degree bases.
    pub basis_cap: usize,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            p_local: 2,
            n_sim_factor: 1.5,
            n_cg: None,
            n_cl: None,
            n_iter: usize::MAX,
            budget: 200,
            n_r: 20,
            q2_stop: None,
            min_edge: 1e-6,
            seed: 0,
            density_convention: DensityConvention::Local,
            regenerate_screening_on_restart: true,
            basis_cap: DEFAULT_BASIS_CAP,
        }
    }
}

/// Sizes implied by a configuration in a given dimension.
#[derive(Debug, Clone, Copy)]
pub struct DerivedSizes {
    pub dimension: usize,
    /// Full total-degree basis size P.
    pub basis_size: usize,
    /// Training points required before a sub-domain may be split.
    pub n_sim: usize,
    pub n_cg: usize,
    pub n_cl: usize,
}

impl LearnerConfig {
    pub fn derive(&self, dimension: usize) -> Result<DerivedSizes, LearnerError> {
        if dimension == 0 {
            return Err(LearnerError::Config("dimension must be at least 1".into()));
        }
        if !(1.0..=2.0).contains(&self.n_sim_factor) {
            return Err(LearnerError::Config(format!(
                "n_sim_factor {} outside [1, 2]",
                self.n_sim_factor
            )));
        }
        if self.min_edge <= 0.0 {
            return Err(LearnerError::Config("min_edge must be positive".into()));
        }
        let cardinality = total_degree_cardinality(dimension, self.p_local);
        if cardinality > self.basis_cap as u128 {
            return Err(LearnerError::Config(format!(
                "basis size {cardinality} exceeds cap {}",
                self.basis_cap
            )));
        }
        let basis_size = cardinality as usize;
        let n_sim = ((self.n_sim_factor * basis_size as f64).ceil() as usize).max(2);
        if self.budget < n_sim {
            return Err(LearnerError::Config(format!(
                "budget {} is below the initial design size {n_sim}",
                self.budget
            )));
        }
        Ok(DerivedSizes {
            dimension,
            basis_size,
            n_sim,
            n_cg: self.n_cg.unwrap_or(1000 * dimension).max(1),
            n_cl: self.n_cl.unwrap_or(5 * basis_size).max(1),
        })
    }
}

/// What an iteration did to its selected sub-domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Split,
    Extend,
    Restart,
    Freeze,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Action::Split => "split",
            Action::Extend => "extend",
            Action::Restart => "restart",
            Action::Freeze => "freeze",
        };
        f.write_str(s)
    }
}

/// One line of the append-only event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub iteration: usize,
    pub evaluations: usize,
    pub n_domains: usize,
    pub selected_domain_id: usize,
    pub action: Action,
    pub q2_local: f64,
    /// Only present on iterations where the restart check ran.
    pub q2_global: Option<f64>,
    pub wall_ms: u64,
}

/// Full state of a run: decomposition, experimental design, counters, the
/// random streams and the event log.
#[derive(Debug, Clone)]
pub struct DalPceState {
    pub decomposition: Decomposition,
    pub ed: ExperimentalDesign,
    pub screening: CandidatePool,
    pub iteration: usize,
    pub restarts: usize,
    /// Design size when the decomposition was last discarded; a new restart
    /// needs fresh data, otherwise it would repeat itself verbatim.
    pub evals_at_last_restart: usize,
    pub log: Vec<EventRecord>,
    pub(crate) sampling_rng: RngStream,
    pub(crate) screening_rng: RngStream,
}

impl DalPceState {
    /// Total model evaluations so far; identical to the design size.
    pub fn evaluations(&self) -> usize {
        self.ed.len()
    }

    pub fn n_domains(&self) -> usize {
        self.decomposition.len()
    }
}

fn eval_batch_checked<M: Model + ?Sized>(
    model: &mut M,
    points: &[Point],
) -> Result<Vec<f64>, ModelError> {
    let values = model.eval_batch(points)?;
    if values.len() != points.len() {
        return Err(ModelError::BatchLength {
            expected: points.len(),
            got: values.len(),
        });
    }
    Ok(values)
}

/// Fit a sub-domain expansion, falling back to a constant on degenerate data.
///
/// Hybrid selection is allowed to return a constant only when the responses
/// themselves are constant; otherwise a flat expansion would zero out the
/// sub-domain's candidate scores and permanently starve it of refinement, so
/// the full-basis least-squares fit is used instead.
fn fit_subdomain_pce(
    points: &[Point],
    responses: &[f64],
    bounds: Aabb,
    config: &LearnerConfig,
) -> Result<LocalPce, LearnerError> {
    match LocalPce::fit(
        points,
        responses,
        bounds.clone(),
        config.p_local,
        config.basis_cap,
    ) {
        Ok(pce) => {
            if pce.variance() == 0.0 && response_spread(responses) {
                if let Ok(full) = LocalPce::fit_full_ols(
                    points,
                    responses,
                    bounds,
                    config.p_local,
                    config.basis_cap,
                ) {
                    return Ok(full);
                }
            }
            Ok(pce)
        }
        Err(SurrogateError::Basis(e @ BasisError::CardinalityOverflow { .. })) => {
            Err(LearnerError::Basis(e))
        }
        Err(SurrogateError::NotEnoughPoints { .. })
        | Err(SurrogateError::Regression(RegressionError::RankDeficient { .. })) => {
            let mean = if responses.is_empty() {
                0.0
            } else {
                responses.iter().sum::<f64>() / responses.len() as f64
            };
            Ok(LocalPce::intercept_only(
                mean,
                bounds,
                config.p_local,
                crate::regression::MAX_ERROR,
            ))
        }
        Err(e) => Err(e.into()),
    }
}

fn response_spread(responses: &[f64]) -> bool {
    let min = responses.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = responses.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max - min > 1e-12 * max.abs().max(min.abs()).max(1.0)
}

/// Draw the initial design, evaluate it and fit the first global expansion.
pub fn initialize<M: Model + ?Sized>(
    model: &mut M,
    config: &LearnerConfig,
) -> Result<DalPceState, LearnerError> {
    let m = model.dimension();
    let sizes = config.derive(m)?;
    let unit = Aabb::unit(m);

    let mut sampling_rng = RngStream::new(config.seed, STREAM_SAMPLING);
    let mut screening_rng = RngStream::new(config.seed, STREAM_SCREENING);
    let screening = CandidatePool::screening(lhs(sizes.n_cg, &unit, &mut screening_rng), m);

    let init_points = lhs(sizes.n_sim, &unit, &mut sampling_rng);
    let outputs = eval_batch_checked(model, &init_points)?;
    let mut ed = ExperimentalDesign::new();
    for (p, y) in init_points.into_iter().zip(outputs) {
        ed.push(p, y);
    }

    let pce = fit_subdomain_pce(ed.points(), ed.outputs(), unit.clone(), config)?;
    let subdomain = SubDomain::new(unit, (0..ed.len()).collect(), pce, false);
    Ok(DalPceState {
        decomposition: Decomposition::single(subdomain),
        ed,
        screening,
        iteration: 0,
        restarts: 0,
        evals_at_last_restart: 0,
        log: Vec::new(),
        sampling_rng,
        screening_rng,
    })
}

/// Pick the sub-domain to work on. Positive scores win by value; when every
/// score is zero the order falls back to weighted volume, then volume, then
/// error, ties resolving to the lowest id. Frozen sub-domains never win.
fn select_subdomain(decomp: &Decomposition, scores: &[crate::sampling::SubdomainScore]) -> usize {
    let mut best: Option<(f64, usize)> = None;
    for (id, score) in scores.iter().enumerate() {
        if decomp.subdomain(id).frozen {
            continue;
        }
        if score.theta > 0.0 && best.is_none_or(|(t, _)| score.theta > t) {
            best = Some((score.theta, id));
        }
    }
    if let Some((_, id)) = best {
        return id;
    }
    let key = |id: usize| {
        let sub = decomp.subdomain(id);
        let weighted = sub.volume * sub.q2.clamp(0.0, 1.0).exp();
        (weighted, sub.volume, sub.q2)
    };
    let mut winner: Option<usize> = None;
    for id in 0..decomp.len() {
        if decomp.subdomain(id).frozen {
            continue;
        }
        match winner {
            None => winner = Some(id),
            Some(w) => {
                if key(id) > key(w) {
                    winner = Some(id);
                }
            }
        }
    }
    winner.expect("stopping rules guarantee an unfrozen sub-domain")
}

/// Direction order for a split: descending first-order Sobol index, ties
/// (and the zero-variance fallback) resolving to the lowest axis.
fn split_direction_ranking(pce: &LocalPce) -> Vec<usize> {
    let sobol = pce.local_sobol_first_order();
    let mut order: Vec<usize> = (0..sobol.values.len()).collect();
    order.sort_by(|&a, &b| {
        sobol.values[b]
            .partial_cmp(&sobol.values[a])
            .expect("sobol indices are finite")
            .then(a.cmp(&b))
    });
    order
}

/// One refinement iteration: select, split or extend, then refit.
pub fn iterate<M: Model + ?Sized>(
    state: &mut DalPceState,
    model: &mut M,
    config: &LearnerConfig,
) -> Result<(), LearnerError> {
    let started = Instant::now();
    let m = state.decomposition.dimension();
    let sizes = config.derive(m)?;

    let scores = theta_subdomain(
        &state.decomposition,
        &state.screening,
        &state.ed,
        config.density_convention,
    )?;
    let selected = select_subdomain(&state.decomposition, &scores);
    let decisive: Point = match scores[selected].decisive {
        Some(idx) => state.screening.points[idx].clone(),
        // no screening candidate landed here; the center is a neutral stand-in
        None => state.decomposition.subdomain(selected).bounds.center(),
    };

    let mut action = Action::Extend;
    let mut working = selected;
    if state.decomposition.subdomain(selected).n_members() >= sizes.n_sim {
        let ranking = split_direction_ranking(&state.decomposition.subdomain(selected).pce);
        let mut split_done = false;
        for direction in ranking {
            match state.decomposition.split(
                selected,
                direction,
                &decisive,
                config.min_edge,
                state.ed.points(),
            ) {
                Ok(outcome) => {
                    working = outcome.refinement;
                    action = Action::Split;
                    split_done = true;
                    break;
                }
                Err(DomainError::DegenerateEdge { .. }) => continue,
                Err(e) => return Err(e.into()),
            }
        }
        if !split_done {
            state.decomposition.subdomain_mut(selected).frozen = true;
            state.iteration += 1;
            state.log.push(EventRecord {
                iteration: state.iteration,
                evaluations: state.ed.len(),
                n_domains: state.decomposition.len(),
                selected_domain_id: selected,
                action: Action::Freeze,
                q2_local: state.decomposition.aggregate_q2(),
                q2_global: None,
                wall_ms: started.elapsed().as_millis() as u64,
            });
            return Ok(());
        }
    }

    // sequential extension: densities come from the current expansion, the
    // neighbor scope refreshes after every selection
    let bounds = state.decomposition.subdomain(working).bounds.clone();
    let pce = state.decomposition.subdomain(working).pce.clone();
    let density = config
        .density_convention
        .density_for(state.decomposition.subdomain(working).volume);
    let mut scope: Vec<Point> = state
        .decomposition
        .subdomain(working)
        .member_ids
        .iter()
        .map(|&id| state.ed.point(id).clone())
        .collect();
    let needed = sizes
        .n_sim
        .saturating_sub(state.decomposition.subdomain(working).n_members());
    let mut pending: Vec<Point> = Vec::with_capacity(needed);
    let mut pool = CandidatePool::local(
        lhs(sizes.n_cl, &bounds, &mut state.sampling_rng),
        bounds.clone(),
    );
    while pending.len() < needed {
        if pool.is_empty() {
            pool = CandidatePool::local(
                lhs(sizes.n_cl, &bounds, &mut state.sampling_rng),
                bounds.clone(),
            );
        }
        let scope_ref: &[Point] = if scope.is_empty() {
            state.ed.points()
        } else {
            &scope
        };
        let picked = select_next_point(&mut pool, &pce, density, scope_ref, m)?;
        scope.push(picked.clone());
        pending.push(picked);
    }

    // evaluate the queued batch, stopping cleanly at the budget
    let mut fresh: Vec<Point> = Vec::new();
    for point in pending {
        if let Some(id) = state.ed.find(&point) {
            let members = &mut state.decomposition.subdomain_mut(working).member_ids;
            if !members.contains(&id) {
                members.push(id);
            }
        } else if state.ed.len() + fresh.len() < config.budget {
            fresh.push(point);
        }
    }
    if !fresh.is_empty() {
        let outputs = eval_batch_checked(model, &fresh)?;
        for (point, output) in fresh.into_iter().zip(outputs) {
            let id = state.ed.push(point, output);
            state
                .decomposition
                .subdomain_mut(working)
                .member_ids
                .push(id);
        }
    }

    // refit whenever the working sub-domain has a full training set
    if state.decomposition.subdomain(working).n_members() >= sizes.n_sim {
        let (points, responses): (Vec<Point>, Vec<f64>) = {
            let sub = state.decomposition.subdomain(working);
            sub.member_ids
                .iter()
                .map(|&id| (state.ed.point(id).clone(), state.ed.output(id)))
                .unzip()
        };
        let refit = fit_subdomain_pce(&points, &responses, bounds, config)?;
        state.decomposition.subdomain_mut(working).set_fit(refit);
    }

    state.iteration += 1;
    state.log.push(EventRecord {
        iteration: state.iteration,
        evaluations: state.ed.len(),
        n_domains: state.decomposition.len(),
        selected_domain_id: selected,
        action,
        q2_local: state.decomposition.aggregate_q2(),
        q2_global: None,
        wall_ms: started.elapsed().as_millis() as u64,
    });
    Ok(())
}

/// Compare the composite error against a single global fit on the whole
/// design; discard the decomposition when it loses. Returns whether a
/// restart happened.
pub fn maybe_restart(
    state: &mut DalPceState,
    config: &LearnerConfig,
) -> Result<bool, LearnerError> {
    // without new data the check would reproduce the previous restart
    if state.restarts > 0 && state.ed.len() == state.evals_at_last_restart {
        return Ok(false);
    }
    let started = Instant::now();
    let m = state.decomposition.dimension();
    let sizes = config.derive(m)?;
    let unit = Aabb::unit(m);

    let global = match LocalPce::fit(
        state.ed.points(),
        state.ed.outputs(),
        unit.clone(),
        config.p_local,
        config.basis_cap,
    ) {
        Ok(pce) => pce,
        Err(SurrogateError::Regression(RegressionError::RankDeficient { .. })) => {
            // the check is skipped this period
            return Ok(false);
        }
        Err(e) => return Err(e.into()),
    };
    let q2_global = global.q2();
    let q2_local = state.decomposition.aggregate_q2();
    if let Some(last) = state.log.last_mut() {
        last.q2_global = Some(q2_global);
    }
    if q2_local <= q2_global {
        return Ok(false);
    }

    // the freshly fitted global expansion seeds the new single-domain run
    let members = (0..state.ed.len()).collect();
    state.decomposition =
        Decomposition::single(SubDomain::new(unit.clone(), members, global, false));
    if config.regenerate_screening_on_restart {
        state.screening =
            CandidatePool::screening(lhs(sizes.n_cg, &unit, &mut state.screening_rng), m);
    }
    state.restarts += 1;
    state.evals_at_last_restart = state.ed.len();
    state.log.push(EventRecord {
        iteration: state.iteration,
        evaluations: state.ed.len(),
        n_domains: 1,
        selected_domain_id: 0,
        action: Action::Restart,
        q2_local: state.decomposition.aggregate_q2(),
        q2_global: Some(q2_global),
        wall_ms: started.elapsed().as_millis() as u64,
    });
    Ok(true)
}

/// True when any stopping rule fires.
fn should_stop(state: &DalPceState, config: &LearnerConfig) -> bool {
    if state.ed.len() >= config.budget {
        return true;
    }
    if state.iteration >= config.n_iter {
        return true;
    }
    if let Some(q2_stop) = config.q2_stop {
        if state.decomposition.aggregate_q2() <= q2_stop {
            return true;
        }
    }
    state.decomposition.all_frozen()
}

/// Continue a run until a stopping rule fires. Usable on deserialized state.
pub fn continue_run<M: Model + ?Sized>(
    state: &mut DalPceState,
    model: &mut M,
    config: &LearnerConfig,
) -> Result<(), LearnerError> {
    while !should_stop(state, config) {
        iterate(state, model, config)?;
        if config.n_r > 0 && state.iteration.is_multiple_of(config.n_r) {
            maybe_restart(state, config)?;
        }
    }
    Ok(())
}

/// Initialize and run to completion.
pub fn run<M: Model + ?Sized>(
    model: &mut M,
    config: &LearnerConfig,
) -> Result<DalPceState, LearnerError> {
    let mut state = initialize(model, config)?;
    continue_run(&mut state, model, config)?;
    Ok(state)
}
