use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use super::normal::normal_quantile;
use crate::error::{Error, Result};
use crate::linalg::{symmetrize, MAX_CONDITION};
use crate::mcmc::PosteriorSample;
use crate::model::{Dataset, Family, ModelSpec, ParamPoint};

/// Draws are reduced in chunks of this size; the chunk sums are then added
/// in index order so the result does not depend on the thread count.
const CHUNK: usize = 256;

/// Scratch buffers for one evaluation of `Aₙ(θ)`. Row-major `p × p`.
struct Workspace {
    p: usize,
    fisher: Vec<f64>,
    meat: Vec<f64>,
    chol: Vec<f64>,
    col: Vec<f64>,
    inv_col_sums: Vec<f64>,
}

impl Workspace {
    fn new(p: usize) -> Self {
        Self {
            p,
            fisher: vec![0.0; p * p],
            meat: vec![0.0; p * p],
            chol: vec![0.0; p * p],
            col: vec![0.0; p],
            inv_col_sums: vec![0.0; p],
        }
    }

    /// Cholesky factor of `fisher` into `chol` (lower triangle).
    fn factor(&mut self) -> Result<()> {
        let p = self.p;
        for i in 0..p {
            for j in 0..=i {
                let mut s = self.fisher[i * p + j];
                for k in 0..j {
                    s -= self.chol[i * p + k] * self.chol[j * p + k];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(Error::NotPositiveDefinite(
                            "empirical Fisher information".into(),
                        ));
                    }
                    self.chol[i * p + i] = s.sqrt();
                } else {
                    self.chol[i * p + j] = s / self.chol[j * p + j];
                }
            }
        }
        Ok(())
    }

    /// Solves `fisher · z = col` in place.
    fn solve_col(&mut self) {
        let p = self.p;
        for i in 0..p {
            let mut s = self.col[i];
            for k in 0..i {
                s -= self.chol[i * p + k] * self.col[k];
            }
            self.col[i] = s / self.chol[i * p + i];
        }
        for i in (0..p).rev() {
            let mut s = self.col[i];
            for k in i + 1..p {
                s -= self.chol[k * p + i] * self.col[k];
            }
            self.col[i] = s / self.chol[i * p + i];
        }
    }

    /// Fills the lower triangles of `fisher` and `meat` by a pass over the
    /// data.
    fn fill_direct(&mut self, model: &ModelSpec, theta: &ParamPoint, data: &Dataset) -> Result<()> {
        let p = self.p;
        self.fisher.fill(0.0);
        self.meat.fill(0.0);
        for obs in data.iter() {
            let (r, v) = model.residual_unchecked(theta, &obs)?;
            let r2 = r * r;
            for i in 0..p {
                let xi = obs.x[i];
                for j in 0..=i {
                    let xij = xi * obs.x[j];
                    self.fisher[i * p + j] += xij * v;
                    self.meat[i * p + j] += xij * r2;
                }
            }
        }
        Ok(())
    }

    /// Same as [`Self::fill_direct`] for unit variance function, from
    /// precomputed moments.
    fn fill_from_moments(&mut self, m: &LinearMoments, beta: &[f64]) {
        let p = self.p;
        for i in 0..p {
            for j in 0..=i {
                let ij = i * p + j;
                let mut v = m.xxyy[ij];
                for k in 0..p {
                    v -= 2.0 * beta[k] * m.xxxy[ij * p + k];
                    for l in 0..p {
                        v += beta[k] * beta[l] * m.xxxx[(ij * p + k) * p + l];
                    }
                }
                self.fisher[ij] = m.xx[ij];
                // rounding can push a tiny diagonal below zero
                self.meat[ij] = if i == j { v.max(0.0) } else { v };
            }
        }
    }

    /// Scales and mirrors the filled matrices, then adds `meat · I⁻¹` to
    /// `acc` (row-major).
    fn finish(&mut self, alpha: f64, n: f64, acc: &mut [f64]) -> Result<()> {
        let p = self.p;
        let (fs, ms) = (1.0 / (n * alpha), 1.0 / (n * alpha * alpha));
        for i in 0..p {
            for j in 0..=i {
                self.fisher[i * p + j] *= fs;
                self.meat[i * p + j] *= ms;
                self.fisher[j * p + i] = self.fisher[i * p + j];
                self.meat[j * p + i] = self.meat[i * p + j];
            }
        }
        if self.fisher.iter().any(|v| !v.is_finite()) || self.meat.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("empirical Fisher information".into()));
        }
        self.factor()?;

        // 1-norm condition number, with ‖I⁻¹‖₁ from p unit solves
        let norm = (0..p)
            .map(|j| (0..p).map(|i| self.fisher[i * p + j].abs()).sum::<f64>())
            .fold(0.0, f64::max);
        for j in 0..p {
            self.col.fill(0.0);
            self.col[j] = 1.0;
            self.solve_col();
            self.inv_col_sums[j] = self.col.iter().map(|v| v.abs()).sum();
        }
        let cond = norm * self.inv_col_sums.iter().copied().fold(0.0, f64::max);
        if !(cond <= MAX_CONDITION) {
            return Err(Error::IllConditioned {
                condition: cond,
                context: "empirical Fisher information".into(),
            });
        }

        // column j of I⁻¹·meat is row j of meat·I⁻¹
        for j in 0..p {
            for i in 0..p {
                self.col[i] = self.meat[i * p + j];
            }
            self.solve_col();
            for i in 0..p {
                acc[j * p + i] += self.col[i];
            }
        }
        Ok(())
    }
}

/// Data moments that make `Σ xxᵀ (y − xᵀβ)²` a quadratic in `β`:
/// `Σ xxᵀy² − 2 Σₖ βₖ Σ xxᵀxₖy + Σₖₗ βₖβₗ Σ xxᵀxₖxₗ`.
struct LinearMoments {
    xx: Vec<f64>,
    xxyy: Vec<f64>,
    xxxy: Vec<f64>,
    xxxx: Vec<f64>,
}

impl LinearMoments {
    fn new(data: &Dataset) -> Self {
        let p = data.p();
        let mut m = Self {
            xx: vec![0.0; p * p],
            xxyy: vec![0.0; p * p],
            xxxy: vec![0.0; p * p * p],
            xxxx: vec![0.0; p * p * p * p],
        };
        for obs in data.iter() {
            let (x, y) = (obs.x, obs.y);
            for i in 0..p {
                for j in 0..=i {
                    let ij = i * p + j;
                    let xij = x[i] * x[j];
                    m.xx[ij] += xij;
                    m.xxyy[ij] += xij * y * y;
                    for k in 0..p {
                        let xijk = xij * x[k];
                        m.xxxy[ij * p + k] += xijk * y;
                        for l in 0..p {
                            m.xxxx[(ij * p + k) * p + l] += xijk * x[l];
                        }
                    }
                }
            }
        }
        m
    }

    /// The moment expansion pays off when it is cheaper than a data pass.
    fn worthwhile(model: &ModelSpec, data: &Dataset) -> bool {
        let p = data.p();
        matches!(
            model.family(),
            Family::LinearRegression | Family::NormalMeanKnownVar
        ) && p * p < data.n()
    }
}

/// `Aₙ(θ) = (1/n) Σ l̇ᵢ l̇ᵢᵀ · Iₙ(θ)⁻¹` at one parameter value.
pub fn a_matrix(model: &ModelSpec, theta: &ParamPoint, data: &Dataset) -> Result<DMatrix<f64>> {
    model.validate_data(data)?;
    model.validate_theta(theta, data.p())?;
    let p = data.p();
    let mut acc = vec![0.0; p * p];
    let mut work = Workspace::new(p);
    work.fill_direct(model, theta, data)?;
    work.finish(model.dispersion(theta), data.n() as f64, &mut acc)?;
    Ok(DMatrix::from_row_slice(p, p, &acc))
}

/// Posterior mean of `Aₙ(ϑ)` over every retained draw, equally weighted.
pub fn omega_hat(model: &ModelSpec, sample: &PosteriorSample, data: &Dataset) -> Result<DMatrix<f64>> {
    model.validate_data(data)?;
    let p = data.p();
    if sample.p() != p {
        return Err(Error::Dimension(format!(
            "sample has p = {}, data has p = {p}",
            sample.p()
        )));
    }
    if model.has_sigma2() && sample.sigma2_draws().is_none() {
        return Err(Error::InvalidParameter(
            "linear regression needs sigma2 draws".into(),
        ));
    }
    let s = sample.n_draws();
    let n = data.n() as f64;
    let moments = LinearMoments::worthwhile(model, data).then(|| LinearMoments::new(data));
    let n_chunks = s.div_ceil(CHUNK);
    let partial: Vec<Vec<f64>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; p * p];
            let mut work = Workspace::new(p);
            for draw in c * CHUNK..((c + 1) * CHUNK).min(s) {
                let theta = sample.point(draw);
                let step = |work: &mut Workspace, acc: &mut [f64]| -> Result<()> {
                    match &moments {
                        Some(m) => work.fill_from_moments(m, theta.beta.as_slice()),
                        None => work.fill_direct(model, &theta, data)?,
                    }
                    work.finish(model.dispersion(&theta), n, acc)
                };
                step(&mut work, &mut acc).map_err(|e| Error::SingularAtDraw {
                    draw,
                    source: Box::new(e),
                })?;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = vec![0.0; p * p];
    for part in partial {
        for (t, v) in total.iter_mut().zip(part) {
            *t += v;
        }
    }
    Ok(DMatrix::from_row_slice(p, p, &total) / s as f64)
}

/// `Σ̂ = Var(ϑ | data) · Ω̂` together with its symmetric part.
#[derive(Clone, Debug, PartialEq)]
pub struct SigmaHat {
    pub raw: DMatrix<f64>,
    pub symmetrized: DMatrix<f64>,
    /// Coefficients whose diagonal entry of `raw` is not positive.
    pub nonpositive_diagonal: Vec<usize>,
}

pub fn sigma_hat(sample: &PosteriorSample, omega: &DMatrix<f64>) -> Result<SigmaHat> {
    let cov = sample.covariance()?;
    sigma_hat_from_cov(&cov, omega)
}

pub fn sigma_hat_from_cov(cov: &DMatrix<f64>, omega: &DMatrix<f64>) -> Result<SigmaHat> {
    if cov.shape() != omega.shape() {
        return Err(Error::Dimension(
            "posterior covariance and Omega shapes differ".into(),
        ));
    }
    let raw = cov * omega;
    let nonpositive_diagonal = raw
        .diagonal()
        .iter()
        .enumerate()
        .filter(|(_, v)| !(**v > 0.0))
        .map(|(j, _)| j)
        .collect();
    Ok(SigmaHat {
        symmetrized: symmetrize(&raw),
        raw,
        nonpositive_diagonal,
    })
}

/// A symmetric interval around a point estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn centred(mid: f64, half_width: f64) -> Self {
        Self {
            lo: mid - half_width,
            hi: mid + half_width,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Credible and Bayesian-robust interval for one coefficient.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IntervalPair {
    pub credible: Interval,
    pub robust: Interval,
}

/// `d̂ⱼ ± z·PostSDⱼ` and `d̂ⱼ ± z·BRSEⱼ`.
pub fn brse_intervals(
    d_hat: &DVector<f64>,
    post_sd: &[f64],
    brse: &[f64],
    level: f64,
) -> Result<Vec<IntervalPair>> {
    let z = z_value(level)?;
    if post_sd.len() != d_hat.len() || brse.len() != d_hat.len() {
        return Err(Error::Dimension("interval inputs differ in length".into()));
    }
    if let Some(j) = brse.iter().position(|b| !(*b > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "robust interval needs a positive diagonal of Sigma-hat (coefficient {j})"
        )));
    }
    Ok(d_hat
        .iter()
        .zip(post_sd.iter().zip(brse))
        .map(|(&d, (&sd, &b))| IntervalPair {
            credible: Interval::centred(d, z * sd),
            robust: Interval::centred(d, z * b),
        })
        .collect())
}

/// Two-sided normal critical value for `level`.
pub fn z_value(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "interval level must lie in (0, 1), got {level}"
        )));
    }
    Ok(normal_quantile(0.5 + 0.5 * level))
}

/// Equal-tailed posterior quantile intervals, an alternative to the
/// normal-approximation credible interval.
pub fn quantile_credible_intervals(sample: &PosteriorSample, level: f64) -> Result<Vec<Interval>> {
    z_value(level)?;
    let tail = 0.5 * (1.0 - level);
    let draws = sample.draws();
    Ok((0..sample.p())
        .map(|j| {
            let mut col: Vec<f64> = draws.column(j).iter().copied().collect();
            col.sort_by(f64::total_cmp);
            Interval {
                lo: empirical_quantile(&col, tail),
                hi: empirical_quantile(&col, 1.0 - tail),
            }
        })
        .collect())
}

/// Linear interpolation between order statistics (type 7).
fn empirical_quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Posterior summaries and the Bayesian robust covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct BrseResult {
    pub d_hat: DVector<f64>,
    pub posterior_cov: DMatrix<f64>,
    pub omega_hat: DMatrix<f64>,
    /// `posterior_cov · omega_hat`, not symmetrized.
    pub sigma_hat: DMatrix<f64>,
    pub symmetrized_sigma: DMatrix<f64>,
    pub post_sd: Vec<f64>,
    /// `√diag(Σ̂)`; NaN where the diagonal is not positive.
    pub brse: Vec<f64>,
    pub level: f64,
    /// Empty when some diagonal entry of `Σ̂` is not positive.
    pub intervals: Vec<IntervalPair>,
    pub nonpositive_diagonal: Vec<usize>,
}

impl BrseResult {
    pub fn is_valid(&self) -> bool {
        self.nonpositive_diagonal.is_empty()
    }

    /// Turns the carried error state into an error.
    pub fn check(&self) -> Result<()> {
        match self.nonpositive_diagonal.first() {
            None => Ok(()),
            Some(j) => Err(Error::NotPositiveDefinite(format!(
                "diagonal entry {j} of Sigma-hat is {:.3e}",
                self.sigma_hat[(*j, *j)]
            ))),
        }
    }
}

/// Runs the full estimator on a posterior sample.
pub fn estimate(
    model: &ModelSpec,
    sample: &PosteriorSample,
    data: &Dataset,
    level: f64,
) -> Result<BrseResult> {
    z_value(level)?;
    let omega = omega_hat(model, sample, data)?;
    let d_hat = sample.mean();
    let posterior_cov = sample.covariance()?;
    let sh = sigma_hat_from_cov(&posterior_cov, &omega)?;
    let post_sd: Vec<f64> = posterior_cov.diagonal().iter().map(|v| v.sqrt()).collect();
    let brse: Vec<f64> = sh
        .raw
        .diagonal()
        .iter()
        .map(|&v| if v > 0.0 { v.sqrt() } else { f64::NAN })
        .collect();
    let intervals = if sh.nonpositive_diagonal.is_empty() {
        brse_intervals(&d_hat, &post_sd, &brse, level)?
    } else {
        Vec::new()
    };
    Ok(BrseResult {
        d_hat,
        posterior_cov,
        omega_hat: omega,
        sigma_hat: sh.raw,
        symmetrized_sigma: sh.symmetrized,
        post_sd,
        brse,
        level,
        intervals,
        nonpositive_diagonal: sh.nonpositive_diagonal,
    })
}

/// Scalar over-dispersion estimate `E{(1/n) Σ (Yᵢ − μᵢ)² / (α Vᵢ) | data}`.
/// For the linear model `α` is the per-draw `σ²`, so the value is a ratio
/// near one under correct specification.
pub fn quasi_omega(model: &ModelSpec, sample: &PosteriorSample, data: &Dataset) -> Result<f64> {
    if !matches!(
        model.family(),
        Family::LinearRegression | Family::PoissonRegression
    ) {
        return Err(Error::Unsupported(format!(
            "quasi-likelihood dispersion needs a linear or Poisson model, got {}",
            model.family()
        )));
    }
    model.validate_data(data)?;
    if sample.p() != data.p() {
        return Err(Error::Dimension("sample and data differ in p".into()));
    }
    let n = data.n() as f64;
    let mut total = 0.0;
    for s in 0..sample.n_draws() {
        let theta = sample.point(s);
        let alpha = model.dispersion(&theta);
        let mut acc = 0.0;
        for obs in data.iter() {
            let (r, v) = model.residual(&theta, &obs)?;
            acc += r * r / (alpha * v);
        }
        total += acc / n;
    }
    Ok(total / sample.n_draws() as f64)
}

/// `ω̂ · Var(ϑ | data)`.
pub fn quasi_sigma_hat(sample: &PosteriorSample, omega: f64) -> Result<DMatrix<f64>> {
    Ok(sample.covariance()? * omega)
}
