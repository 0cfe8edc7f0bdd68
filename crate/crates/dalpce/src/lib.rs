//! Surrogate modeling of expensive black-box functions on the unit hypercube.
//!
//! The engine decomposes the input space into axis-aligned sub-domains, fits a
//! low-order polynomial chaos expansion (PCE) on each, and drives both sample
//! placement and domain refinement with a variance-based score that balances
//! exploration of the space against exploitation of the current surrogate.
//!
//! Modules map onto the pipeline stages:
//!
//! - [`polybasis`]: orthonormal Legendre bases, multi-indices, design matrices
//! - [`regression`]: OLS, least-angle model selection, analytic leave-one-out error
//! - [`surrogate`]: the local expansion object and its analytic post-processing
//! - [`domain`]: the decomposition bookkeeping and weighted global aggregates
//! - [`sampling`]: seeded streams, Latin hypercube pools, candidate scoring
//! - [`learner`]: the adaptive loop (split / extend / restart / stop)
//! - [`benchmarks`]: built-in test functions and validation error measures
//! - [`serialize`]: lossless versioned JSON schema for decompositions and runs

pub mod benchmarks;
pub mod domain;
pub mod learner;
pub mod parallel;
pub mod polybasis;
pub mod regression;
pub mod sampling;
pub mod serialize;
pub mod surrogate;

/// A point in the input space, one coordinate per input dimension.
pub type Point = Vec<f64>;

pub use domain::{Decomposition, SubDomain};
pub use learner::{DalPceState, LearnerConfig, Model};
pub use polybasis::{Aabb, BasisSet, MultiIndex};
pub use regression::FitResult;
pub use sampling::ExperimentalDesign;
pub use surrogate::LocalPce;
