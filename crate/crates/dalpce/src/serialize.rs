//! Versioned JSON documents for decompositions and full learner state.
//!
//! Every real number is stored as its shortest round-trip decimal string, so
//! documents survive any JSON tooling without losing a bit. Schema version 1.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Decomposition, SubDomain};
use crate::learner::{DalPceState, EventRecord};
use crate::polybasis::{Aabb, BasisError, BasisSet, MultiIndex};
use crate::sampling::{CandidatePool, ExperimentalDesign, RngSnapshot, RngStream};
use crate::surrogate::LocalPce;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SerializeError {
    #[error("unsupported schema version {0}, expected {SCHEMA_VERSION}")]
    UnsupportedVersion(u32),

    #[error("malformed real number {0:?}")]
    BadReal(String),

    #[error("malformed rng position: {0}")]
    BadRngPosition(#[from] std::num::ParseIntError),

    #[error(transparent)]
    BadBox(#[from] BasisError),

    #[error("document structure: {0}")]
    Structure(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn encode(x: f64) -> String {
    format!("{x}")
}

fn decode(s: &str) -> Result<f64, SerializeError> {
    s.parse::<f64>()
        .map_err(|_| SerializeError::BadReal(s.to_string()))
}

fn encode_vec(xs: &[f64]) -> Vec<String> {
    xs.iter().map(|&x| encode(x)).collect()
}

fn decode_vec(xs: &[String]) -> Result<Vec<f64>, SerializeError> {
    xs.iter().map(|s| decode(s)).collect()
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BoxDoc {
    pub lower: Vec<String>,
    pub upper: Vec<String>,
}

impl BoxDoc {
    fn from_aabb(aabb: &Aabb) -> Self {
        Self {
            lower: encode_vec(aabb.lower()),
            upper: encode_vec(aabb.upper()),
        }
    }

    fn to_aabb(&self) -> Result<Aabb, SerializeError> {
        Ok(Aabb::new(
            decode_vec(&self.lower)?,
            decode_vec(&self.upper)?,
        )?)
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PceDoc {
    /// Box the expansion was trained on; a superset of the sub-domain box
    /// for inherited expansions.
    pub r#box: BoxDoc,
    pub max_degree: usize,
    /// Active terms as exponent lists.
    pub basis: Vec<Vec<usize>>,
    pub coefficients: Vec<String>,
    pub q2: String,
    pub n_train: usize,
}

impl PceDoc {
    fn from_pce(pce: &LocalPce) -> Self {
        Self {
            r#box: BoxDoc::from_aabb(pce.bounds()),
            max_degree: pce.basis().max_degree(),
            basis: pce
                .basis()
                .indices()
                .iter()
                .map(|a| a.exponents().to_vec())
                .collect(),
            coefficients: encode_vec(pce.coefficients()),
            q2: encode(pce.q2()),
            n_train: pce.n_train(),
        }
    }

    fn to_pce(&self) -> Result<LocalPce, SerializeError> {
        if self.basis.is_empty() {
            return Err(SerializeError::Structure("empty basis".into()));
        }
        let indices: Vec<MultiIndex> = self
            .basis
            .iter()
            .map(|e| MultiIndex::new(e.clone()))
            .collect();
        let basis = BasisSet::from_indices(indices, self.max_degree);
        Ok(LocalPce::from_parts(
            self.r#box.to_aabb()?,
            basis,
            decode_vec(&self.coefficients)?,
            decode(&self.q2)?,
            self.n_train,
        ))
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SubDomainDoc {
    pub r#box: BoxDoc,
    pub volume: String,
    pub member_ids: Vec<usize>,
    pub q2: String,
    pub inherited: bool,
    pub frozen: bool,
    pub pce: PceDoc,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DecompositionDoc {
    pub schema_version: u32,
    pub dimension: usize,
    pub subdomains: Vec<SubDomainDoc>,
}

impl DecompositionDoc {
    pub fn from_decomposition(decomp: &Decomposition) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            dimension: decomp.dimension(),
            subdomains: decomp
                .subdomains()
                .iter()
                .map(|s| SubDomainDoc {
                    r#box: BoxDoc::from_aabb(&s.bounds),
                    volume: encode(s.volume),
                    member_ids: s.member_ids.clone(),
                    q2: encode(s.q2),
                    inherited: s.inherited,
                    frozen: s.frozen,
                    pce: PceDoc::from_pce(&s.pce),
                })
                .collect(),
        }
    }

    pub fn to_decomposition(&self) -> Result<Decomposition, SerializeError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(SerializeError::UnsupportedVersion(self.schema_version));
        }
        if self.subdomains.is_empty() {
            return Err(SerializeError::Structure("no sub-domains".into()));
        }
        let mut subdomains = Vec::with_capacity(self.subdomains.len());
        for doc in &self.subdomains {
            let mut sub = SubDomain::new(
                doc.r#box.to_aabb()?,
                doc.member_ids.clone(),
                doc.pce.to_pce()?,
                doc.inherited,
            );
            sub.volume = decode(&doc.volume)?;
            sub.q2 = decode(&doc.q2)?;
            sub.frozen = doc.frozen;
            subdomains.push(sub);
        }
        Ok(Decomposition::from_subdomains(subdomains, self.dimension))
    }
}

pub fn decomposition_to_json(decomp: &Decomposition) -> String {
    serde_json::to_string_pretty(&DecompositionDoc::from_decomposition(decomp))
        .expect("document serialization cannot fail")
}

pub fn decomposition_from_json(json: &str) -> Result<Decomposition, SerializeError> {
    let doc: DecompositionDoc = serde_json::from_str(json)?;
    doc.to_decomposition()
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EventDoc {
    pub iteration: usize,
    pub evaluations: usize,
    pub n_domains: usize,
    pub selected_domain_id: usize,
    pub action: crate::learner::Action,
    pub q2_local: String,
    pub q2_global: Option<String>,
    pub wall_ms: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StateDoc {
    pub schema_version: u32,
    pub decomposition: DecompositionDoc,
    pub ed_points: Vec<Vec<String>>,
    pub ed_outputs: Vec<String>,
    pub screening_points: Vec<Vec<String>>,
    pub iteration: usize,
    pub evaluations: usize,
    pub restarts: usize,
    pub evals_at_last_restart: usize,
    pub sampling_rng: RngSnapshot,
    pub screening_rng: RngSnapshot,
    pub log: Vec<EventDoc>,
}

impl StateDoc {
    pub fn from_state(state: &DalPceState) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            decomposition: DecompositionDoc::from_decomposition(&state.decomposition),
            ed_points: state.ed.points().iter().map(|p| encode_vec(p)).collect(),
            ed_outputs: encode_vec(state.ed.outputs()),
            screening_points: state
                .screening
                .points
                .iter()
                .map(|p| encode_vec(p))
                .collect(),
            iteration: state.iteration,
            evaluations: state.evaluations(),
            restarts: state.restarts,
            evals_at_last_restart: state.evals_at_last_restart,
            sampling_rng: state.sampling_rng.snapshot(),
            screening_rng: state.screening_rng.snapshot(),
            log: state
                .log
                .iter()
                .map(|r| EventDoc {
                    iteration: r.iteration,
                    evaluations: r.evaluations,
                    n_domains: r.n_domains,
                    selected_domain_id: r.selected_domain_id,
                    action: r.action,
                    q2_local: encode(r.q2_local),
                    q2_global: r.q2_global.map(encode),
                    wall_ms: r.wall_ms,
                })
                .collect(),
        }
    }

    pub fn to_state(&self) -> Result<DalPceState, SerializeError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(SerializeError::UnsupportedVersion(self.schema_version));
        }
        if self.ed_points.len() != self.ed_outputs.len() {
            return Err(SerializeError::Structure(
                "design points and outputs differ in length".into(),
            ));
        }
        let decomposition = self.decomposition.to_decomposition()?;
        let dimension = decomposition.dimension();
        let mut ed = ExperimentalDesign::new();
        for (p, y) in self.ed_points.iter().zip(&self.ed_outputs) {
            ed.push(decode_vec(p)?, decode(y)?);
        }
        let mut screening_points = Vec::with_capacity(self.screening_points.len());
        for p in &self.screening_points {
            screening_points.push(decode_vec(p)?);
        }
        let log = self
            .log
            .iter()
            .map(|d| {
                Ok(EventRecord {
                    iteration: d.iteration,
                    evaluations: d.evaluations,
                    n_domains: d.n_domains,
                    selected_domain_id: d.selected_domain_id,
                    action: d.action,
                    q2_local: decode(&d.q2_local)?,
                    q2_global: d.q2_global.as_deref().map(decode).transpose()?,
                    wall_ms: d.wall_ms,
                })
            })
            .collect::<Result<Vec<_>, SerializeError>>()?;
        Ok(DalPceState {
            decomposition,
            ed,
            screening: CandidatePool::screening(screening_points, dimension),
            iteration: self.iteration,
            restarts: self.restarts,
            evals_at_last_restart: self.evals_at_last_restart,
            log,
            sampling_rng: RngStream::restore(&self.sampling_rng)?,
            screening_rng: RngStream::restore(&self.screening_rng)?,
        })
    }
}

pub fn state_to_json(state: &DalPceState) -> String {
    serde_json::to_string_pretty(&StateDoc::from_state(state))
        .expect("document serialization cannot fail")
}

pub fn state_from_json(json: &str) -> Result<DalPceState, SerializeError> {
    let doc: StateDoc = serde_json::from_str(json)?;
    doc.to_state()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_encode_to_shortest_round_trip_strings() {
        for x in [0.1, 1.0, -3.5, 2.25e-17, f64::MAX, 1e6] {
            assert_eq!(decode(&encode(x)).unwrap().to_bits(), x.to_bits());
        }
        assert!(decode("not-a-number").is_err());
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let json = r#"{"schema_version": 2, "dimension": 1, "subdomains": []}"#;
        let doc: DecompositionDoc = serde_json::from_str(json).unwrap();
        assert!(matches!(
            doc.to_decomposition(),
            Err(SerializeError::UnsupportedVersion(2))
        ));
    }
}
