//! Working-model families, their per-observation log-likelihood, score and
//! (scaled) empirical Fisher information.
//!
//! All four families use a canonical parameterisation, so the score of one
//! observation is `x · r / α` with residual `r` and dispersion `α`, and the
//! empirical Fisher information is `(1/n) Σ x xᵀ V / α`:
//!
//! | family             | residual `r`         | variance role `V` | `α`            |
//! |--------------------|----------------------|-------------------|----------------|
//! | normal mean        | `y − θ`              | 1                 | assumed var.   |
//! | linear regression  | `y − xᵀβ`            | 1                 | `σ²` (sampled) |
//! | Poisson            | `y − exp(xᵀβ)`       | `exp(xᵀβ)`        | 1              |
//! | exponential PH     | `Δ − T̃ exp(xᵀβ)`     | `T̃ exp(xᵀβ)`      | 1              |

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::linalg::{add_outer_lower, dot, mirror_lower};

/// Linear predictors beyond this magnitude are reported as overflow.
pub const MAX_LINEAR_PREDICTOR: f64 = 700.0;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    NormalMeanKnownVar,
    LinearRegression,
    PoissonRegression,
    ExponentialPh,
}

impl Family {
    pub fn is_survival(self) -> bool {
        matches!(self, Family::ExponentialPh)
    }

    pub fn is_glm(self) -> bool {
        matches!(self, Family::LinearRegression | Family::PoissonRegression)
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::NormalMeanKnownVar => "normal-mean",
            Family::LinearRegression => "linear",
            Family::PoissonRegression => "poisson",
            Family::ExponentialPh => "exp-ph",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "normal-mean" | "normal_mean" | "normal" => Ok(Family::NormalMeanKnownVar),
            "linear" | "lm" | "gaussian" => Ok(Family::LinearRegression),
            "poisson" => Ok(Family::PoissonRegression),
            "exp-ph" | "expph" | "exponential" | "exponential-ph" => Ok(Family::ExponentialPh),
            other => Err(Error::Config(format!("unknown model family '{other}'"))),
        }
    }
}

/// How the dispersion `α` enters the likelihood.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Dispersion {
    /// Fixed, possibly wrong, variance (normal-mean model).
    Known(f64),
    /// `σ²` is a nuisance parameter sampled alongside `β`.
    SampledNuisance,
    /// `α = 1`.
    Unit,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    family: Family,
    assumed_variance: f64,
}

impl ModelSpec {
    /// `Y ~ N(θ, assumed_variance)` with a single intercept-only coefficient.
    pub fn normal_mean(assumed_variance: f64) -> Result<Self> {
        if !(assumed_variance > 0.0 && assumed_variance.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "assumed variance must be positive, got {assumed_variance}"
            )));
        }
        Ok(Self {
            family: Family::NormalMeanKnownVar,
            assumed_variance,
        })
    }

    pub fn linear() -> Self {
        Self::of(Family::LinearRegression)
    }

    pub fn poisson() -> Self {
        Self::of(Family::PoissonRegression)
    }

    pub fn exponential_ph() -> Self {
        Self::of(Family::ExponentialPh)
    }

    /// Model of the given family with default settings (unit assumed
    /// variance for the normal-mean model).
    pub fn of(family: Family) -> Self {
        Self {
            family,
            assumed_variance: 1.0,
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn assumed_variance(&self) -> f64 {
        self.assumed_variance
    }

    pub fn dispersion_handling(&self) -> Dispersion {
        match self.family {
            Family::NormalMeanKnownVar => Dispersion::Known(self.assumed_variance),
            Family::LinearRegression => Dispersion::SampledNuisance,
            Family::PoissonRegression | Family::ExponentialPh => Dispersion::Unit,
        }
    }

    pub fn has_sigma2(&self) -> bool {
        self.family == Family::LinearRegression
    }

    /// Dispersion `α` at `theta`.
    #[inline]
    pub fn dispersion(&self, theta: &ParamPoint) -> f64 {
        match self.family {
            Family::NormalMeanKnownVar => self.assumed_variance,
            Family::LinearRegression => theta.sigma2.unwrap_or(1.0),
            _ => 1.0,
        }
    }

    pub fn validate_theta(&self, theta: &ParamPoint, p: usize) -> Result<()> {
        if theta.beta.len() != p {
            return Err(Error::Dimension(format!(
                "parameter has length {}, data has p = {p}",
                theta.beta.len()
            )));
        }
        if theta.beta.iter().any(|b| b.is_nan()) {
            return Err(Error::NonFinite("parameter vector".into()));
        }
        match (self.has_sigma2(), theta.sigma2) {
            (true, None) => Err(Error::InvalidParameter(
                "linear regression requires sigma2".into(),
            )),
            (false, Some(_)) => Err(Error::InvalidParameter(format!(
                "sigma2 is only defined for linear regression, not {}",
                self.family
            ))),
            (true, Some(s2)) if s2.is_nan() => Err(Error::NonFinite("sigma2".into())),
            (true, Some(s2)) if s2 <= 0.0 || s2.is_infinite() => Err(Error::InvalidParameter(
                format!("sigma2 must be positive and finite, got {s2}"),
            )),
            _ => Ok(()),
        }
    }

    /// Checks that every observation carries exactly the fields this family
    /// needs.
    pub fn validate_data(&self, data: &Dataset) -> Result<()> {
        if data.n() == 0 {
            return Err(Error::EmptyData);
        }
        if self.family.is_survival() != data.is_survival() {
            return Err(Error::FamilyMismatch(if self.family.is_survival() {
                "exponential PH model needs event and time columns".into()
            } else {
                format!("{} model does not take survival data", self.family)
            }));
        }
        match self.family {
            Family::NormalMeanKnownVar => {
                if data.p() != 1 || data.x_flat().iter().any(|&v| v != 1.0) {
                    return Err(Error::FamilyMismatch(
                        "normal-mean model requires an intercept-only design".into(),
                    ));
                }
            }
            Family::PoissonRegression => {
                if let Some(i) = data
                    .y()
                    .iter()
                    .position(|&y| y < 0.0 || y.fract() != 0.0)
                {
                    return Err(Error::InvalidData(format!(
                        "Poisson outcome at row {i} is not a non-negative integer"
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn check_obs(&self, obs: &Observation<'_>) -> Result<()> {
        let survival = obs.event.is_some() && obs.time.is_some();
        let partial = obs.event.is_some() != obs.time.is_some();
        if partial || survival != self.family.is_survival() {
            return Err(Error::FamilyMismatch(format!(
                "observation fields do not match the {} family",
                self.family
            )));
        }
        if self.family == Family::NormalMeanKnownVar && (obs.x.len() != 1 || obs.x[0] != 1.0) {
            return Err(Error::FamilyMismatch(
                "normal-mean observation must have x = (1)".into(),
            ));
        }
        if obs.y.is_nan() || obs.x.iter().any(|v| v.is_nan()) {
            return Err(Error::NonFinite("observation".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn linear_predictor(beta: &DVector<f64>, x: &[f64]) -> Result<f64> {
        let eta = dot(beta.as_slice(), x);
        if eta.is_nan() {
            return Err(Error::NonFinite("linear predictor".into()));
        }
        if eta.abs() > MAX_LINEAR_PREDICTOR {
            return Err(Error::Overflow {
                value: eta,
                bound: MAX_LINEAR_PREDICTOR,
            });
        }
        Ok(eta)
    }

    /// Mean and variance-function value of one observation; for the
    /// exponential PH model these are the cumulative-hazard analogues
    /// `(T̃ e^η, T̃ e^η)` whose residual is taken against `Δ`.
    pub fn mean_and_variance_fn(
        &self,
        theta: &ParamPoint,
        obs: &Observation<'_>,
    ) -> Result<(f64, f64)> {
        self.validate_theta(theta, obs.x.len())?;
        self.check_obs(obs)?;
        self.mean_var_unchecked(theta, obs)
    }

    #[inline]
    fn mean_var_unchecked(&self, theta: &ParamPoint, obs: &Observation<'_>) -> Result<(f64, f64)> {
        let eta = Self::linear_predictor(&theta.beta, obs.x)?;
        Ok(match self.family {
            Family::NormalMeanKnownVar | Family::LinearRegression => (eta, 1.0),
            Family::PoissonRegression => {
                let mu = eta.exp();
                (mu, mu)
            }
            Family::ExponentialPh => {
                let mu = obs.time.unwrap_or(0.0) * eta.exp();
                (mu, mu)
            }
        })
    }

    /// Response minus its modelled mean; `Δ − T̃ e^η` for survival data.
    #[inline]
    pub(crate) fn residual_unchecked(&self, theta: &ParamPoint, obs: &Observation<'_>) -> Result<(f64, f64)> {
        let (mu, v) = self.mean_var_unchecked(theta, obs)?;
        let target = match self.family {
            Family::ExponentialPh => f64::from(u8::from(obs.event.unwrap_or(false))),
            _ => obs.y,
        };
        Ok((target - mu, v))
    }

    /// `(residual, V)` for one observation after validation.
    pub fn residual(&self, theta: &ParamPoint, obs: &Observation<'_>) -> Result<(f64, f64)> {
        self.validate_theta(theta, obs.x.len())?;
        self.check_obs(obs)?;
        self.residual_unchecked(theta, obs)
    }

    fn obs_loglik_unchecked(&self, theta: &ParamPoint, obs: &Observation<'_>) -> Result<f64> {
        let eta = Self::linear_predictor(&theta.beta, obs.x)?;
        Ok(match self.family {
            Family::NormalMeanKnownVar | Family::LinearRegression => {
                let var = self.dispersion(theta);
                let r = obs.y - eta;
                -0.5 * (LN_2PI + var.ln()) - 0.5 * r * r / var
            }
            Family::PoissonRegression => obs.y * eta - eta.exp() - ln_gamma(obs.y + 1.0),
            Family::ExponentialPh => {
                let delta = f64::from(u8::from(obs.event.unwrap_or(false)));
                delta * eta - eta.exp() * obs.time.unwrap_or(0.0)
            }
        })
    }

    /// `log p_θ(z)` for a single observation.
    pub fn obs_log_likelihood(&self, theta: &ParamPoint, obs: &Observation<'_>) -> Result<f64> {
        self.validate_theta(theta, obs.x.len())?;
        self.check_obs(obs)?;
        self.obs_loglik_unchecked(theta, obs)
    }

    /// `Σᵢ log p_θ(zᵢ)`.
    pub fn log_likelihood(&self, theta: &ParamPoint, data: &Dataset) -> Result<f64> {
        self.validate_data(data)?;
        self.validate_theta(theta, data.p())?;
        let mut total = 0.0;
        for obs in data.iter() {
            total += self.obs_loglik_unchecked(theta, &obs)?;
        }
        if total.is_nan() {
            return Err(Error::NonFinite("log-likelihood".into()));
        }
        Ok(total)
    }

    /// Log-likelihood up to terms that do not depend on `theta`. Samplers use
    /// this after validating the data once.
    pub(crate) fn log_kernel(&self, theta: &ParamPoint, data: &Dataset) -> Result<f64> {
        let beta = &theta.beta;
        let mut total = 0.0;
        match self.family {
            Family::NormalMeanKnownVar | Family::LinearRegression => {
                let var = self.dispersion(theta);
                let mut rss = 0.0;
                for obs in data.iter() {
                    let r = obs.y - Self::linear_predictor(beta, obs.x)?;
                    rss += r * r;
                }
                total -= 0.5 * data.n() as f64 * var.ln() + 0.5 * rss / var;
            }
            Family::PoissonRegression => {
                for obs in data.iter() {
                    let eta = Self::linear_predictor(beta, obs.x)?;
                    total += obs.y * eta - eta.exp();
                }
            }
            Family::ExponentialPh => {
                for obs in data.iter() {
                    let eta = Self::linear_predictor(beta, obs.x)?;
                    let delta = f64::from(u8::from(obs.event.unwrap_or(false)));
                    total += delta * eta - eta.exp() * obs.time.unwrap_or(0.0);
                }
            }
        }
        Ok(total)
    }

    /// Gradient of `log p_θ(z)` with respect to `β` (σ² held fixed for the
    /// linear model).
    pub fn score(&self, theta: &ParamPoint, obs: &Observation<'_>) -> Result<DVector<f64>> {
        self.validate_theta(theta, obs.x.len())?;
        self.check_obs(obs)?;
        let (r, _) = self.residual_unchecked(theta, obs)?;
        let scale = r / self.dispersion(theta);
        Ok(DVector::from_iterator(
            obs.x.len(),
            obs.x.iter().map(|&xj| xj * scale),
        ))
    }

    /// `Iₙ(θ) = (1/n) Σ x xᵀ V / α`, exactly symmetric.
    pub fn empirical_fisher(&self, theta: &ParamPoint, data: &Dataset) -> Result<DMatrix<f64>> {
        self.validate_data(data)?;
        self.validate_theta(theta, data.p())?;
        Ok(self.fisher_and_meat(theta, data)?.fisher)
    }

    /// Single pass over the data producing both `Iₙ(θ)` and the score
    /// outer-product mean `(1/n) Σ l̇ᵢ l̇ᵢᵀ`. Assumes validated inputs.
    pub fn fisher_and_meat(&self, theta: &ParamPoint, data: &Dataset) -> Result<FisherMeat> {
        let p = data.p();
        let alpha = self.dispersion(theta);
        let mut fisher = DMatrix::zeros(p, p);
        let mut meat = DMatrix::zeros(p, p);
        for obs in data.iter() {
            let (r, v) = self.residual_unchecked(theta, &obs)?;
            add_outer_lower(&mut fisher, obs.x, v);
            add_outer_lower(&mut meat, obs.x, r * r);
        }
        let n = data.n() as f64;
        fisher /= n * alpha;
        meat /= n * alpha * alpha;
        mirror_lower(&mut fisher);
        mirror_lower(&mut meat);
        Ok(FisherMeat { fisher, meat })
    }
}

/// `Iₙ(θ)` together with `(1/n) Σ l̇ᵢ(θ) l̇ᵢ(θ)ᵀ`.
#[derive(Clone, Debug)]
pub struct FisherMeat {
    pub fisher: DMatrix<f64>,
    pub meat: DMatrix<f64>,
}

/// Regression coefficients plus the residual variance of the linear model.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamPoint {
    pub beta: DVector<f64>,
    pub sigma2: Option<f64>,
}

impl ParamPoint {
    pub fn new(beta: impl Into<Vec<f64>>) -> Self {
        Self {
            beta: DVector::from_vec(beta.into()),
            sigma2: None,
        }
    }

    pub fn with_sigma2(beta: impl Into<Vec<f64>>, sigma2: f64) -> Self {
        Self {
            beta: DVector::from_vec(beta.into()),
            sigma2: Some(sigma2),
        }
    }

    pub fn from_vector(beta: DVector<f64>, sigma2: Option<f64>) -> Self {
        Self { beta, sigma2 }
    }

    pub fn p(&self) -> usize {
        self.beta.len()
    }
}

/// One row of a [`Dataset`]. For survival data `y` repeats the observed time.
#[derive(Clone, Copy, Debug)]
pub struct Observation<'a> {
    pub y: f64,
    pub x: &'a [f64],
    pub event: Option<bool>,
    pub time: Option<f64>,
}

/// Outcomes and a row-major design matrix, with optional survival columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    y: Vec<f64>,
    x: Vec<f64>,
    p: usize,
    event: Option<Vec<bool>>,
    time: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(y: Vec<f64>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let p = rows.first().map(Vec::len).ok_or(Error::EmptyData)?;
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::Dimension(
                "all covariate rows must have the same length".into(),
            ));
        }
        Self::from_flat(y, rows.concat(), p)
    }

    pub fn from_flat(y: Vec<f64>, x: Vec<f64>, p: usize) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::EmptyData);
        }
        if p == 0 || x.len() != y.len() * p {
            return Err(Error::Dimension(format!(
                "design has {} entries, expected {} x {p}",
                x.len(),
                y.len()
            )));
        }
        if y.iter().chain(&x).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset".into()));
        }
        Ok(Self {
            y,
            x,
            p,
            event: None,
            time: None,
        })
    }

    /// Intercept-only data (`x ≡ 1`).
    pub fn intercept_only(y: Vec<f64>) -> Result<Self> {
        let n = y.len();
        Self::from_flat(y, vec![1.0; n], 1)
    }

    /// Right-censored survival data: observed times, event indicators and
    /// covariate rows.
    pub fn survival(time: Vec<f64>, event: Vec<bool>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let p = rows.first().map(Vec::len).ok_or(Error::EmptyData)?;
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::Dimension(
                "all covariate rows must have the same length".into(),
            ));
        }
        Self::survival_flat(time, event, rows.concat(), p)
    }

    pub fn survival_flat(time: Vec<f64>, event: Vec<bool>, x: Vec<f64>, p: usize) -> Result<Self> {
        if time.len() != event.len() {
            return Err(Error::Dimension("time and event lengths differ".into()));
        }
        if let Some(i) = time.iter().position(|&t| !(t >= 0.0)) {
            return Err(Error::InvalidData(format!(
                "survival time at row {i} must be non-negative"
            )));
        }
        let mut data = Self::from_flat(time.clone(), x, p)?;
        data.event = Some(event);
        data.time = Some(time);
        Ok(data)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x_flat(&self) -> &[f64] {
        &self.x
    }

    pub fn x_row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn events(&self) -> Option<&[bool]> {
        self.event.as_deref()
    }

    pub fn times(&self) -> Option<&[f64]> {
        self.time.as_deref()
    }

    pub fn is_survival(&self) -> bool {
        self.event.is_some()
    }

    pub fn event_count(&self) -> Option<usize> {
        self.event.as_ref().map(|e| e.iter().filter(|&&d| d).count())
    }

    pub fn obs(&self, i: usize) -> Observation<'_> {
        Observation {
            y: self.y[i],
            x: self.x_row(i),
            event: self.event.as_ref().map(|e| e[i]),
            time: self.time.as_ref().map(|t| t[i]),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Observation<'_>> + '_ {
        (0..self.n()).map(move |i| self.obs(i))
    }

    pub fn design(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n(), self.p, &self.x)
    }

    /// `XᵀX`, exactly symmetric.
    pub fn gram(&self) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.p, self.p);
        for i in 0..self.n() {
            add_outer_lower(&mut g, self.x_row(i), 1.0);
        }
        mirror_lower(&mut g);
        g
    }

    /// `Xᵀy`.
    pub fn xty(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.p);
        for i in 0..self.n() {
            for (j, &xj) in self.x_row(i).iter().enumerate() {
                v[j] += xj * self.y[i];
            }
        }
        v
    }

    /// Checks that `XᵀX` is well conditioned; estimation needs `n > p` and a
    /// full-rank design.
    pub fn check_full_rank(&self) -> Result<()> {
        if self.n() <= self.p {
            return Err(Error::InvalidData(format!(
                "need n > p for estimation (n = {}, p = {})",
                self.n(),
                self.p
            )));
        }
        match crate::linalg::spd_condition(&self.gram(), "design") {
            Ok(c) if c <= crate::linalg::MAX_CONDITION => Ok(()),
            _ => Err(Error::RankDeficient),
        }
    }
}
