//! Principal subspace classifier.
//!
//! A Bayesian nonparametric classifier in which the class label depends on
//! the features only through their projection onto an unknown affine
//! subspace. The subspace frame, origin, noise scales and a Dirichlet-process
//! mixture over (location, class-probability) atoms are sampled jointly by a
//! blocked Gibbs sampler; the subspace is summarized by a Bayes point
//! estimate and classification uses the posterior predictive.

pub mod baselines;
pub mod data;
pub mod error;
pub mod estimator;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod model;
pub mod priors;
pub mod sampler;
pub mod stats;

pub use data::{LabeledDataset, ScaleMode, SplitSpec, Standardization, SyntheticSpec};
pub use error::{PscError, Result};
pub use estimator::{estimate_subspace, feature_importance, posterior_means, FeatureImportance, SubspaceEstimate};
pub use eval::{evaluate, posterior_predict, select_k, EvalReport, PredictiveResult};
pub use geometry::{AffineSubspace, OrthonormalFrame};
pub use model::{Atom, MixingMeasure, ModelState, NoiseScales};
pub use priors::PriorConfig;
pub use sampler::{run_chain, PosteriorChain, SamplerConfig, TrainingData};
