//! Split-chain potential scale reduction and effective sample size.

use serde::Serialize;

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Splits every chain in half, dropping the middle draw of odd-length chains,
/// after trimming all chains to the shortest length.
fn split(chains: &[&[f64]]) -> Vec<Vec<f64>> {
    let len = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    let half = len / 2;
    let mut out = Vec::with_capacity(2 * chains.len());
    for c in chains {
        out.push(c[..half].to_vec());
        out.push(c[len - half..len].to_vec());
    }
    out
}

/// Split-chain R̂. Returns NaN when there are fewer than 4 draws per chain.
pub fn split_rhat(chains: &[&[f64]]) -> f64 {
    let halves = split(chains);
    if halves.is_empty() || halves[0].len() < 2 {
        return f64::NAN;
    }
    let len = halves[0].len() as f64;
    let means: Vec<f64> = halves.iter().map(|c| mean(c)).collect();
    let within = halves.iter().map(|c| var(c)).sum::<f64>() / halves.len() as f64;
    let between = len * var(&means);
    if within == 0.0 {
        return if between == 0.0 { 1.0 } else { f64::INFINITY };
    }
    let var_plus = (len - 1.0) / len * within + between / len;
    (var_plus / within).sqrt()
}

fn autocov(x: &[f64], m: f64, lag: usize) -> f64 {
    let n = x.len();
    let mut s = 0.0;
    for i in 0..n - lag {
        s += (x[i] - m) * (x[i + lag] - m);
    }
    s / n as f64
}

/// Multi-chain effective sample size with Geyer's initial positive sequence
/// truncation, computed on split chains.
///
/// Autocovariances are evaluated lag by lag and the loop stops at the first
/// non-positive pair sum, so well-mixing chains cost O(draws · short lag).
pub fn ess(chains: &[&[f64]]) -> f64 {
    let halves = split(chains);
    let m = halves.len();
    if m == 0 || halves[0].len() < 4 {
        return f64::NAN;
    }
    let n = halves[0].len();
    let nf = n as f64;
    let means: Vec<f64> = halves.iter().map(|c| mean(c)).collect();
    let vars: Vec<f64> = halves.iter().map(|c| var(c)).collect();
    let within = vars.iter().sum::<f64>() / m as f64;
    let between = if m > 1 { nf * var(&means) } else { 0.0 };
    let var_plus = (nf - 1.0) / nf * within + between / nf;
    if !(var_plus > 0.0) {
        return f64::NAN;
    }

    let rho = |lag: usize| -> f64 {
        let acov_mean = halves
            .iter()
            .zip(&means)
            .map(|(c, &mu)| autocov(c, mu, lag))
            .sum::<f64>()
            / m as f64;
        1.0 - (within - acov_mean) / var_plus
    };

    let mut tau = -1.0;
    let mut prev_pair = f64::INFINITY;
    let mut lag = 0;
    while lag + 1 < n {
        let mut pair = rho(lag) + rho(lag + 1);
        if pair <= 0.0 {
            break;
        }
        // enforce a monotone sequence
        if pair > prev_pair {
            pair = prev_pair;
        }
        tau += 2.0 * pair;
        prev_pair = pair;
        lag += 2;
    }
    let total = (m * n) as f64;
    let tau = tau.max(1.0 / total.log10().max(1.0));
    total / tau
}

/// Monte Carlo standard error of a posterior mean.
pub fn mcse(values: &[f64], ess: f64) -> f64 {
    (var(values) / ess).sqrt()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    /// Split R̂ per coefficient, followed by `σ²` when sampled.
    pub rhat: Vec<f64>,
    /// Effective sample size, same layout as `rhat`.
    pub ess: Vec<f64>,
    /// Post-burn-in Metropolis acceptance rate per chain.
    pub acceptance_rate: Option<Vec<f64>>,
    pub warnings: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn white_noise(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn rhat_near_one_for_iid() {
        let a = white_noise(1, 2000);
        let b = white_noise(2, 2000);
        let r = split_rhat(&[&a, &b]);
        assert!((r - 1.0).abs() < 0.01, "rhat {r}");
    }

    #[test]
    fn rhat_flags_shifted_chains() {
        let a = white_noise(1, 1000);
        let b: Vec<f64> = white_noise(2, 1000).iter().map(|v| v + 3.0).collect();
        assert!(split_rhat(&[&a, &b]) > 1.1);
    }

    #[test]
    fn ess_of_iid_is_close_to_n() {
        let a = white_noise(3, 4000);
        let e = ess(&[&a]);
        assert!(e > 3000.0 && e < 5500.0, "ess {e}");
    }

    #[test]
    fn ess_of_ar1_is_reduced() {
        // AR(1) with phi = 0.9 has ESS ≈ n (1 - phi) / (1 + phi)
        let noise = white_noise(4, 20000);
        let mut x = vec![0.0; noise.len()];
        for i in 1..x.len() {
            x[i] = 0.9 * x[i - 1] + noise[i];
        }
        let e = ess(&[&x]);
        let expected = 20000.0 * 0.1 / 1.9;
        assert!((e / expected - 1.0).abs() < 0.3, "ess {e} vs {expected}");
    }

    #[test]
    fn constant_chains() {
        let a = vec![1.0; 10];
        assert_eq!(split_rhat(&[&a, &a]), 1.0);
        assert!(ess(&[&a]).is_nan());
    }
}
