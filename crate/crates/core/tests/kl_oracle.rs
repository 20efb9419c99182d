//! Quadrature cross-checks of the Monte Carlo minimal-KL points.

use brse_core::sim::{kl_point, kl_point_with, CovariateLaw, DgpSpec};
use brse_core::ModelSpec;
use nalgebra::{Matrix2, Vector2};

/// Composite Simpson rule on `[a, b]` with `m` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for k in 1..m {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

/// Solves `∫ (D(u) − e^η M(u)) (1, u) w(u) du = 0` for `η = β₀ + β₁u`:
/// damped Newton on the convex objective `∫ (e^η M − D η) w du`.
fn solve_ee(
    d: impl Fn(f64) -> f64,
    m: impl Fn(f64) -> f64,
    w: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
) -> Vector2<f64> {
    const PANELS: usize = 4000;
    let h = (hi - lo) / PANELS as f64;
    // tabulate the integrands once on the Simpson nodes
    let nodes: Vec<(f64, f64, f64, f64)> = (0..=PANELS)
        .map(|k| {
            let u = lo + k as f64 * h;
            let sw = if k == 0 || k == PANELS {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            (u, d(u), m(u), sw * w(u) * h / 3.0)
        })
        .collect();
    let objective = |b: &Vector2<f64>| {
        nodes
            .iter()
            .map(|&(u, du, mu, wt)| {
                let eta = b[0] + b[1] * u;
                (eta.exp() * mu - du * eta) * wt
            })
            .sum::<f64>()
    };
    let mut beta = Vector2::new(0.0, 0.0);
    for _ in 0..200 {
        let mut g = Vector2::zeros();
        let mut j = Matrix2::zeros();
        for &(u, du, mu, wt) in &nodes {
            let x = Vector2::new(1.0, u);
            let fitted = (beta[0] + beta[1] * u).exp() * mu;
            g += x * ((du - fitted) * wt);
            j += x * x.transpose() * (fitted * wt);
        }
        let step = j.try_inverse().unwrap() * g;
        let f0 = objective(&beta);
        let mut t = 1.0;
        while objective(&(beta + step * t)) > f0 && t > 1e-8 {
            t *= 0.5;
        }
        beta += step * t;
        if (step * t).amax() < 1e-13 {
            break;
        }
    }
    beta
}

fn poisson_quadrature(a: f64) -> Vector2<f64> {
    solve_ee(|u| (u + a * u * u).exp(), |_| 1.0, |_| 1.0 / 6.0, -3.0, 3.0)
}

fn weibull_quadrature(kappa: f64, beta1: f64, censor: f64) -> Vector2<f64> {
    let phi = |u: f64| (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let lambda = move |u: f64| (beta1 * u).exp();
    // E[Δ | u] and E[T̃ | u]; the time integral uses t = s² to remove the
    // t^(κ−1) singularity at zero
    let d = move |u: f64| 1.0 - (-lambda(u) * censor.powf(kappa)).exp();
    let m = move |u: f64| {
        simpson(
            |s| 2.0 * s * (-lambda(u) * s.powf(2.0 * kappa)).exp(),
            0.0,
            censor.sqrt(),
            400,
        )
    };
    solve_ee(d, m, phi, -8.0, 8.0)
}

#[test]
fn simpson_is_accurate() {
    let v = simpson(|x| x.exp(), 0.0, 1.0, 100);
    assert!((v - (std::f64::consts::E - 1.0)).abs() < 1e-9);
}

#[test]
fn poisson_mc_oracle_matches_quadrature() {
    for a in [-0.5, 0.25] {
        let dgp = DgpSpec::poisson_quadratic(a, 100);
        let kl = kl_point_with(&dgp, &ModelSpec::poisson(), 2_000_000, 7).unwrap();
        let exact = poisson_quadrature(a);
        let se = kl.mc_se.as_ref().unwrap();
        for j in 0..2 {
            assert!(
                (kl.theta[j] - exact[j]).abs() < 4.0 * se[j],
                "a={a}: theta_{j} {} vs {} (se {})",
                kl.theta[j],
                exact[j],
                se[j]
            );
        }
    }
}

#[test]
fn production_poisson_oracle_is_tight() {
    let dgp = DgpSpec::poisson_quadratic(0.5, 50);
    let kl = kl_point(&dgp, &ModelSpec::poisson()).unwrap();
    let exact = poisson_quadrature(0.5);
    assert!((kl.slope() - exact[1]).abs() < 5e-3, "{} vs {}", kl.slope(), exact[1]);
}

#[test]
fn weibull_mc_oracle_matches_quadrature() {
    for (kappa, beta1) in [(0.8, -0.5), (1.5, -0.25)] {
        let dgp = DgpSpec::weibull_ph(kappa, beta1, 100).with_covariates(CovariateLaw::StandardNormal);
        let kl = kl_point_with(&dgp, &ModelSpec::exponential_ph(), 1_000_000, 8).unwrap();
        let exact = weibull_quadrature(kappa, beta1, dgp.censor_time);
        let se = kl.mc_se.as_ref().unwrap();
        for j in 0..2 {
            assert!(
                (kl.theta[j] - exact[j]).abs() < 4.0 * se[j],
                "kappa={kappa}: theta_{j} {} vs {} (se {})",
                kl.theta[j],
                exact[j],
                se[j]
            );
        }
    }
}

#[test]
fn exponential_truth_is_its_own_kl_point() {
    let exact = weibull_quadrature(1.0, -0.5, 10.0);
    assert!(exact[0].abs() < 1e-9 && (exact[1] + 0.5).abs() < 1e-9, "{exact}");
}
