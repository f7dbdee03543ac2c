//! Feature attribution by maximally invariant data perturbation.
//!
//! Given a differentiable classifier and an input, [`explain::explain`]
//! finds the largest axis-aligned box of input perturbations under which the
//! linearized model keeps its prediction, by solving a small linear program
//! with the in-crate simplex solver ([`lp`]). Features whose allowed
//! perturbation is small score high.
//!
//! The crate also ships the usual gradient-based and occlusion baselines
//! ([`baselines`]) and a quantile-masking benchmark ([`eval`]) to compare
//! attribution methods on a dataset.

pub mod baselines;
pub mod data;
pub mod error;
pub mod eval;
pub mod explain;
pub mod lp;
pub mod method;
pub mod model;
pub mod partition;
pub mod scores;
pub mod seed;
pub mod synthetic;

pub use data::{Dataset, InputPoint, Shape};
pub use error::{Error, Result};
pub use eval::{EvalCurve, EvalRun, MaskSpec, RunOptions};
pub use explain::{
    explain, ExplainConfig, Explanation, LinearizedConstraint, PerturbationBox, PerturbationProblem, ScoreMap,
    SmoothingConfig, SmoothingForm,
};
pub use lp::{LinearProgram, LpSolution, Status};
pub use method::{Method, ScoreContext, ScoreProvider};
pub use model::{Activation, DenseLayer, Model, OutputLayer};
pub use partition::{FeaturePartition, PartitionSpec};
pub use scores::AttributionMap;
