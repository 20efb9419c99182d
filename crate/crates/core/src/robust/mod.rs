//! Inference losses, their Bayes rules and the Bayesian robust standard
//! error.

mod closed_form;
mod estimator;
mod loss;
mod normal;

pub use closed_form::{closed_form_normal_mean, closed_form_normal_mean_with_variance, NormalMeanRules};
pub use estimator::{
    a_matrix, brse_intervals, estimate, omega_hat, quantile_credible_intervals, quasi_omega,
    quasi_sigma_hat, sigma_hat, sigma_hat_from_cov, z_value, BrseResult, Interval, IntervalPair,
    SigmaHat,
};
pub use loss::{
    balanced_inference_loss, glm_lack_of_fit, inference_loss, posterior_risk_bi, posterior_risk_i,
    LossValue,
};
pub use normal::normal_quantile;
