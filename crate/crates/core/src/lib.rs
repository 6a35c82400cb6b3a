//! Bayesian binary classifiers over tensor-valued covariates.
//!
//! Coefficients are rank-R PARAFAC tensors under a multiway Dirichlet
//! generalized double Pareto prior; the hinge (BT-SVM) and logistic (BT-LR)
//! likelihoods are made conditionally Gaussian by data augmentation.

pub mod config;
pub mod data;
pub mod dists;
pub mod error;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod prior;
pub mod rng;
pub mod sampler;
pub mod simgen;
pub mod tensor;

pub use data::{Dataset, GroundTruth, LabelConvention, Loss, Split};
pub use error::{Error, Result};
pub use prior::{MdgdpHyper, MdgdpState};
pub use rng::RngState;
pub use sampler::{run_chain_lr, run_chain_svm, ChainOutput, FitConfig, InitStrategy, ModelKind, Prediction};
pub use simgen::{gen_scenario, simulate_dataset, ScenarioSpec, SimulationSpec};
pub use tensor::{DenseTensor, ParafacFactors};
