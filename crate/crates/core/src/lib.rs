//! Estimation of the coefficients of a periodic bandlimited signal from
//! samples corrupted by random timing jitter and additive noise.
//!
//! The observation model is `y = H(z) x + w` where the rows of `H(z)` sample a
//! periodic-sinc basis at jittered instants `n/M + z_n`, the jitter `z` and
//! noise `w` are white Gaussian, and the `K` coefficients `x` are the unknowns.
//! The crate provides:
//!
//! - [`signal_model`] — the basis, observation matrices and synthetic data;
//! - [`quadrature`] — Gauss-Hermite rules for one-dimensional Gaussian
//!   expectations;
//! - [`linear_estimators`] — the linear baselines (no-jitter efficient,
//!   linear unbiased, BLUE, and the linear least-squares pair);
//! - [`em_ml`] — the EM iteration for the maximum-likelihood estimate with
//!   the jitter as missing data;
//! - [`crb`] — a Monte Carlo approximation of the Cramér-Rao bound built on a
//!   quadrature Gaussian-mixture representation of the singleton likelihoods;
//! - [`mcmc_kernels`] — rejection sampling, truncated-normal sampling and
//!   slice sampling with shrinkage;
//! - [`bayes_gibbs`] — Gibbs samplers (rejection- and slice-based jitter
//!   updates) approximating the Bayes least squares estimate;
//! - [`harness`] — the Monte Carlo benchmark harness, MSE sweeps and the
//!   jitter-tolerance improvement factor.
//!
//! Every stochastic operation is deterministic given its seed; independent
//! streams are derived per trial/chain with [`rng::fold_seed`].

pub mod bayes_gibbs;
pub mod crb;
pub mod em_ml;
pub mod error;
pub mod harness;
pub mod linear_estimators;
mod linalg;
pub mod mcmc_kernels;
pub mod quadrature;
pub mod rng;
pub mod signal_model;
mod stats;

pub use bayes_gibbs::{gibbs_run, GibbsResult, GibbsSettings, ZSamplerKind};
pub use crb::{crb_trace, fisher_information, FisherEstimate};
pub use em_ml::{em_run, EmInit, EmSettings, EmTrace};
pub use error::{Error, Result};
pub use harness::{
    improvement_factor, power_savings, run_sweep, EstimatorId, ExperimentReport,
    ImprovementResult, ReportRow, SweepSpec,
};
pub use linear_estimators::{
    blue, efficient_no_jitter, linear_unbiased, lls_no_jitter, lls_random_jitter,
    mean_observation_matrices, MeanObservationMatrix, DEFAULT_PRIOR_VARIANCE,
};
pub use quadrature::{expect_gaussian, gauss_hermite_rule, QuadratureRule};
pub use signal_model::{
    build_observation_matrix, draw_prior_parameters, generate_samples, psinc, JitterVector,
    ModelConfig, ObservationMatrix, ParameterVector, SampleSet,
};
