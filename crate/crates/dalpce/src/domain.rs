//! Sub-domain bookkeeping: splitting, point membership and weighted global
//! aggregation of moments, Sobol indices and leave-one-out errors.

use thiserror::Error;

use crate::polybasis::Aabb;
use crate::regression::MAX_ERROR;
use crate::surrogate::{LocalPce, SurrogateError};
use crate::Point;

#[derive(Debug, Error)]
pub enum DomainError {
    #[error("edge {edge} in dimension {dim} is below the minimum {min_edge}")]
    DegenerateEdge {
        dim: usize,
        edge: f64,
        min_edge: f64,
    },

    #[error("decisive point lies outside the parent box")]
    DecisiveOutsideParent,

    #[error("no sub-domain contains the point {0:?}")]
    Unlocatable(Point),

    #[error("sub-domain id {0} out of range")]
    BadSubdomainId(usize),

    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
}

/// One cell of the decomposition together with its local expansion.
///
/// An inherited expansion keeps the box it was trained on, which is a strict
/// superset of `bounds` until the sub-domain is refit.
#[derive(Debug, Clone)]
pub struct SubDomain {
    pub bounds: Aabb,
    pub volume: f64,
    /// Indices into the global experimental design, in insertion order.
    pub member_ids: Vec<usize>,
    pub pce: LocalPce,
    pub q2: f64,
    /// True until the sub-domain gets its own fit.
    pub inherited: bool,
    /// Frozen sub-domains are too small to split and are skipped by selection.
    pub frozen: bool,
}

impl SubDomain {
    pub fn new(bounds: Aabb, member_ids: Vec<usize>, pce: LocalPce, inherited: bool) -> Self {
        let volume = bounds.volume();
        let q2 = pce.q2();
        Self {
            bounds,
            volume,
            member_ids,
            pce,
            q2,
            inherited,
            frozen: false,
        }
    }

    pub fn n_members(&self) -> usize {
        self.member_ids.len()
    }

    /// Install a fresh fit for this sub-domain.
    pub fn set_fit(&mut self, pce: LocalPce) {
        self.q2 = pce.q2();
        self.pce = pce;
        self.inherited = false;
    }
}

/// Ids of the two children produced by a split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitOutcome {
    pub refinement: usize,
    pub inheriting: usize,
}

/// A partition of the unit hypercube into axis-aligned sub-domains.
#[derive(Debug, Clone)]
pub struct Decomposition {
    subdomains: Vec<SubDomain>,
    dimension: usize,
}

impl Decomposition {
    pub fn single(subdomain: SubDomain) -> Self {
        let dimension = subdomain.bounds.dimension();
        Self {
            subdomains: vec![subdomain],
            dimension,
        }
    }

    pub fn from_subdomains(subdomains: Vec<SubDomain>, dimension: usize) -> Self {
        assert!(!subdomains.is_empty());
        Self {
            subdomains,
            dimension,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.subdomains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subdomains.is_empty()
    }

    pub fn subdomains(&self) -> &[SubDomain] {
        &self.subdomains
    }

    pub fn subdomain(&self, id: usize) -> &SubDomain {
        &self.subdomains[id]
    }

    pub fn subdomain_mut(&mut self, id: usize) -> &mut SubDomain {
        &mut self.subdomains[id]
    }

    pub fn volumes_sum(&self) -> f64 {
        self.subdomains.iter().map(|s| s.volume).sum()
    }

    /// Id of the unique sub-domain whose half-open box contains `xi`.
    pub fn locate(&self, xi: &[f64]) -> Result<usize, DomainError> {
        self.subdomains
            .iter()
            .position(|s| s.bounds.contains_half_open(xi))
            .ok_or_else(|| DomainError::Unlocatable(xi.to_vec()))
    }

    /// Composite surrogate: locate, then evaluate the owning expansion.
    pub fn global_predict(&self, xi: &[f64]) -> Result<f64, DomainError> {
        let id = self.locate(xi)?;
        Ok(self.subdomains[id].pce.predict_unchecked(xi))
    }

    /// Split `parent` at the midpoint of its edge along `direction`.
    ///
    /// The child containing `decisive` becomes the refinement child and takes
    /// the parent's slot; the other child inherits the parent's expansion
    /// unchanged and is appended at the end. Members are repartitioned by the
    /// half-open membership rule.
    pub fn split(
        &mut self,
        parent_id: usize,
        direction: usize,
        decisive: &[f64],
        min_edge: f64,
        ed_points: &[Point],
    ) -> Result<SplitOutcome, DomainError> {
        if parent_id >= self.subdomains.len() {
            return Err(DomainError::BadSubdomainId(parent_id));
        }
        let parent = &self.subdomains[parent_id];
        let edge = parent.bounds.edge_length(direction);
        if edge < min_edge {
            return Err(DomainError::DegenerateEdge {
                dim: direction,
                edge,
                min_edge,
            });
        }
        if !parent.bounds.contains_closed(decisive) {
            return Err(DomainError::DecisiveOutsideParent);
        }

        let (a, b) = parent.bounds.edge(direction);
        let cut = 0.5 * (a + b);
        let mut lower_upper = parent.bounds.upper().to_vec();
        lower_upper[direction] = cut;
        let mut upper_lower = parent.bounds.lower().to_vec();
        upper_lower[direction] = cut;
        let lower_box = Aabb::new(parent.bounds.lower().to_vec(), lower_upper)
            .expect("halving a valid box stays valid");
        let upper_box = Aabb::new(upper_lower, parent.bounds.upper().to_vec())
            .expect("halving a valid box stays valid");

        let mut lower_members = Vec::new();
        let mut upper_members = Vec::new();
        for &id in &parent.member_ids {
            if lower_box.contains_half_open(&ed_points[id]) {
                lower_members.push(id);
            } else {
                upper_members.push(id);
            }
        }

        let pce = parent.pce.clone();
        let decisive_in_lower = decisive[direction] < cut;
        let (refine_box, refine_members, inherit_box, inherit_members) = if decisive_in_lower {
            (lower_box, lower_members, upper_box, upper_members)
        } else {
            (upper_box, upper_members, lower_box, lower_members)
        };

        let mut refinement = SubDomain::new(refine_box, refine_members, pce.clone(), true);
        refinement.q2 = self.subdomains[parent_id].q2;
        let mut inheriting = SubDomain::new(inherit_box, inherit_members, pce, true);
        inheriting.q2 = self.subdomains[parent_id].q2;

        self.subdomains[parent_id] = refinement;
        self.subdomains.push(inheriting);
        Ok(SplitOutcome {
            refinement: parent_id,
            inheriting: self.subdomains.len() - 1,
        })
    }

    /// Volume-weighted mean of the local means.
    pub fn aggregate_mean(&self) -> f64 {
        self.subdomains
            .iter()
            .map(|s| s.volume * s.pce.mean())
            .sum()
    }

    /// Volume-weighted sum of local variances. This omits the dispersion of
    /// the local means; see [`Decomposition::exact_variance`] for the version
    /// including it.
    pub fn aggregate_variance(&self) -> f64 {
        self.subdomains
            .iter()
            .map(|s| s.volume * s.pce.variance())
            .sum()
    }

    /// Law-of-total-variance aggregate: `sum W_i (var_i + mean_i^2) - mean^2`.
    pub fn exact_variance(&self) -> f64 {
        let mean = self.aggregate_mean();
        let second: f64 = self
            .subdomains
            .iter()
            .map(|s| {
                let (mu, var) = s.pce.local_moments();
                s.volume * (var + mu * mu)
            })
            .sum();
        second - mean * mean
    }

    /// Volume-weighted first-order Sobol indices, normalized by the
    /// volume-weighted variance. Zero vector when that variance vanishes.
    pub fn aggregate_sobol(&self) -> Vec<f64> {
        let m = self.dimension;
        let variance = self.aggregate_variance();
        if variance <= 0.0 {
            return vec![0.0; m];
        }
        let mut acc = vec![0.0; m];
        for s in &self.subdomains {
            let partial = s.pce.first_order_partial_variances();
            for (slot, p) in acc.iter_mut().zip(partial) {
                *slot += s.volume * p;
            }
        }
        acc.iter_mut().for_each(|v| *v /= variance);
        acc
    }

    /// Volume-weighted leave-one-out error, each local error clamped to
    /// `[0, MAX_ERROR]`.
    pub fn aggregate_q2(&self) -> f64 {
        self.subdomains
            .iter()
            .map(|s| s.volume * s.q2.clamp(0.0, MAX_ERROR))
            .sum()
    }

    pub fn all_frozen(&self) -> bool {
        self.subdomains.iter().all(|s| s.frozen)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn constant_domain(value: f64) -> SubDomain {
        let bounds = Aabb::unit(2);
        SubDomain::new(
            bounds.clone(),
            vec![],
            LocalPce::intercept_only(value, bounds, 2, 0.0),
            false,
        )
    }

    #[test]
    fn single_domain_locates_everything() {
        let decomp = Decomposition::single(constant_domain(1.0));
        assert_eq!(decomp.locate(&[0.0, 0.0]).unwrap(), 0);
        assert_eq!(decomp.locate(&[1.0, 1.0]).unwrap(), 0);
        assert_eq!(decomp.global_predict(&[0.4, 0.8]).unwrap(), 1.0);
    }

    #[test]
    fn split_respects_half_open_rule_and_decisive_side() {
        let mut decomp = Decomposition::single(constant_domain(2.0));
        let ed: Vec<Point> = vec![];
        let outcome = decomp.split(0, 0, &[0.2, 0.5], 1e-6, &ed).unwrap();
        assert_eq!(outcome.refinement, 0);
        assert_eq!(outcome.inheriting, 1);
        // refinement child holds the decisive point (left half)
        assert_eq!(decomp.subdomain(0).bounds.edge(0), (0.0, 0.5));
        assert_eq!(decomp.subdomain(1).bounds.edge(0), (0.5, 1.0));
        assert_abs_diff_eq!(decomp.subdomain(0).volume, 0.5, epsilon = 1e-16);
        assert_abs_diff_eq!(decomp.subdomain(1).volume, 0.5, epsilon = 1e-16);

        // face point belongs to the right child, global corner stays covered
        assert_eq!(decomp.locate(&[0.5, 0.2]).unwrap(), 1);
        assert_eq!(decomp.locate(&[1.0, 1.0]).unwrap(), 1);
    }

    #[test]
    fn split_repartitions_members_consistently_with_locate() {
        let ed: Vec<Point> = (0..9)
            .map(|k| vec![(k % 3) as f64 / 2.0, (k / 3) as f64 / 2.0])
            .collect();
        let bounds = Aabb::unit(2);
        let sub = SubDomain::new(
            bounds.clone(),
            (0..9).collect(),
            LocalPce::intercept_only(0.0, bounds, 2, 0.0),
            false,
        );
        let mut decomp = Decomposition::single(sub);
        decomp.split(0, 1, &[0.1, 0.9], 1e-6, &ed).unwrap();
        for (id, point) in ed.iter().enumerate() {
            let owner = decomp.locate(point).unwrap();
            assert!(
                decomp.subdomain(owner).member_ids.contains(&id),
                "point {id} not in its located sub-domain"
            );
            let other = 1 - owner;
            assert!(!decomp.subdomain(other).member_ids.contains(&id));
        }
    }

    #[test]
    fn degenerate_edge_is_rejected() {
        let bounds = Aabb::new(vec![0.0], vec![1e-7]).unwrap();
        let sub = SubDomain::new(
            bounds.clone(),
            vec![],
            LocalPce::intercept_only(0.0, bounds, 2, 0.0),
            false,
        );
        let mut decomp = Decomposition::single(sub);
        let err = decomp.split(0, 0, &[5e-8], 1e-6, &[]).unwrap_err();
        assert!(matches!(err, DomainError::DegenerateEdge { .. }));
    }

    #[test]
    fn aggregates_over_two_halves() {
        let left = Aabb::new(vec![0.0], vec![0.5]).unwrap();
        let right = Aabb::new(vec![0.5], vec![1.0]).unwrap();
        let mut a = SubDomain::new(
            left.clone(),
            vec![],
            LocalPce::intercept_only(1.0, left, 2, 0.2),
            false,
        );
        let mut b = SubDomain::new(
            right.clone(),
            vec![],
            LocalPce::intercept_only(3.0, right, 2, 0.4),
            false,
        );
        a.q2 = 0.2;
        b.q2 = 0.4;
        let decomp = Decomposition::from_subdomains(vec![a, b], 1);
        assert_abs_diff_eq!(decomp.aggregate_mean(), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(decomp.aggregate_q2(), 0.3, epsilon = 1e-15);
        // constants carry no local variance; the exact form sees the spread
        assert_abs_diff_eq!(decomp.aggregate_variance(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(decomp.exact_variance(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sobol_aggregation_single_domain_matches_local() {
        let pts: Vec<Point> = (0..25)
            .map(|k| vec![(k % 5) as f64 / 4.0, (k / 5) as f64 / 4.0])
            .collect();
        let y: Vec<f64> = pts.iter().map(|p| p[0] + p[1]).collect();
        let pce = LocalPce::fit(&pts, &y, Aabb::unit(2), 2, 1_000_000).unwrap();
        let local = pce.local_sobol_first_order().values;
        let decomp =
            Decomposition::single(SubDomain::new(Aabb::unit(2), (0..25).collect(), pce, false));
        let global = decomp.aggregate_sobol();
        for (a, b) in local.iter().zip(&global) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }
}
