//! Bayesian robust standard errors.
//!
//! Posterior sampling for four working models, the balanced inference loss
//! and its Bayes rules (posterior mean, correction matrix `Ω̂` and robust
//! covariance `Σ̂ = Var(θ | data) Ω̂`), a frequentist MLE/sandwich reference,
//! and the simulation harness used to study their coverage.

pub mod error;
pub mod freq;
pub mod linalg;
pub mod mcmc;
pub mod model;
pub mod prior;
pub mod robust;
pub mod seed;
pub mod sim;

pub use error::{Error, Result};
pub use freq::{fit_mle, sandwich, FitOptions, FreqFit};
pub use mcmc::{
    posterior_cov, posterior_mean, sample_posterior, sample_posterior_from, McmcConfig,
    PosteriorSample,
};
pub use model::{Dataset, Family, ModelSpec, Observation, ParamPoint};
pub use prior::{PriorSpec, Sigma2Prior};
pub use robust::{estimate, BrseResult, LossValue};
