//! MCMC convergence diagnostics: rank-normalized split R-hat and
//! autocorrelation-based effective sample size with Geyer's initial
//! monotone truncation.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Split every chain in half, doubling the chain count.
fn split_chains(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let half = c.len() / 2;
        out.push(c[..half].to_vec());
        out.push(c[c.len() - half..].to_vec());
    }
    out
}

/// Replace values by normal scores of their pooled fractional ranks,
/// z = Phi^-1((rank - 3/8) / (S + 1/4)), averaging ranks over ties.
fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let total: usize = chains.iter().map(|c| c.len()).sum();
    let mut indexed: Vec<(f64, usize)> = Vec::with_capacity(total);
    let mut offsets = Vec::with_capacity(chains.len());
    let mut off = 0;
    for c in chains {
        offsets.push(off);
        for (i, &v) in c.iter().enumerate() {
            indexed.push((v, off + i));
        }
        off += c.len();
    }
    indexed.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("non-finite draw"));

    let mut ranks = vec![0.0; total];
    let mut i = 0;
    while i < total {
        let mut j = i;
        while j + 1 < total && indexed[j + 1].0 == indexed[i].0 {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for item in &indexed[i..=j] {
            ranks[item.1] = avg;
        }
        i = j + 1;
    }

    let norm = Normal::new(0.0, 1.0).unwrap();
    let s = total as f64;
    let z: Vec<f64> = ranks
        .iter()
        .map(|r| norm.inverse_cdf((r - 0.375) / (s + 0.25)))
        .collect();

    chains
        .iter()
        .zip(&offsets)
        .map(|(c, &o)| z[o..o + c.len()].to_vec())
        .collect()
}

fn chain_mean_var(c: &[f64]) -> (f64, f64) {
    let n = c.len() as f64;
    let mean = c.iter().sum::<f64>() / n;
    let var = c.iter().map(|&x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Classic potential scale reduction on already-prepared chains.
fn rhat_raw(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len() as f64;
    let n = chains[0].len() as f64;
    let stats: Vec<(f64, f64)> = chains.iter().map(|c| chain_mean_var(c)).collect();
    let grand = stats.iter().map(|s| s.0).sum::<f64>() / m;
    let b = stats.iter().map(|s| (s.0 - grand).powi(2)).sum::<f64>() * n / (m - 1.0);
    let w = stats.iter().map(|s| s.1).sum::<f64>() / m;
    if w < 1e-300 {
        return f64::NAN;
    }
    let var_plus = (n - 1.0) / n * w + b / n;
    (var_plus / w).sqrt()
}

fn check_shape(chains: &[Vec<f64>]) -> Result<()> {
    if chains.len() < 2 {
        return Err(Error::InsufficientDraws {
            needed: 2,
            available: chains.len(),
        });
    }
    let min_len = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    if min_len < 4 {
        return Err(Error::InsufficientDraws {
            needed: 4,
            available: min_len,
        });
    }
    Ok(())
}

/// Rank-normalized split R-hat for one parameter.
///
/// Returns NaN for degenerate (zero within-chain variance) inputs.
pub fn rhat(chains: &[Vec<f64>]) -> Result<f64> {
    check_shape(chains)?;
    let split = split_chains(chains);
    if split.iter().all(|c| c.iter().all(|&v| v == c[0])) {
        return Ok(f64::NAN);
    }
    Ok(rhat_raw(&rank_normalize(&split)))
}

/// Lag-t autocovariances (biased, divided by n) up to max_lag.
fn autocovariances(c: &[f64], max_lag: usize) -> Vec<f64> {
    let n = c.len();
    let (mean, _) = chain_mean_var(c);
    let mut out = Vec::with_capacity(max_lag + 1);
    for t in 0..=max_lag {
        let mut acc = 0.0;
        for i in 0..(n - t) {
            acc += (c[i] - mean) * (c[i + t] - mean);
        }
        out.push(acc / n as f64);
    }
    out
}

/// Effective sample size across chains.
///
/// Chains are split in half; combined lag correlations follow the
/// multi-chain estimator rho_t = 1 - (W - mean_m c_{t,m}) / var_plus, summed
/// in Geyer pairs until the first negative pair with a monotone cap.
/// Returns NaN for a constant chain set.
pub fn ess(chains: &[Vec<f64>]) -> Result<f64> {
    check_shape(chains)?;
    let split = split_chains(chains);
    if split.iter().all(|c| c.iter().all(|&v| v == c[0])) {
        return Ok(f64::NAN);
    }
    let m = split.len() as f64;
    let n = split[0].len();
    let max_lag = n - 1;

    let stats: Vec<(f64, f64)> = split.iter().map(|c| chain_mean_var(c)).collect();
    let grand = stats.iter().map(|s| s.0).sum::<f64>() / m;
    let b = stats.iter().map(|s| (s.0 - grand).powi(2)).sum::<f64>() * n as f64 / (m - 1.0);
    let w = stats.iter().map(|s| s.1).sum::<f64>() / m;
    if w < 1e-300 {
        return Ok(f64::NAN);
    }
    let var_plus = (n as f64 - 1.0) / n as f64 * w + b / n as f64;

    let covs: Vec<Vec<f64>> = split.iter().map(|c| autocovariances(c, max_lag)).collect();
    let mean_cov = |t: usize| covs.iter().map(|c| c[t]).sum::<f64>() / m;

    let rho = |t: usize| 1.0 - (w - mean_cov(t)) / var_plus;

    let mut tau = 0.0;
    let mut prev_pair = f64::INFINITY;
    let mut t = 0;
    while t + 1 < max_lag {
        let pair = if t == 0 {
            1.0 + rho(1)
        } else {
            rho(t) + rho(t + 1)
        };
        if pair <= 0.0 {
            break;
        }
        let capped = pair.min(prev_pair);
        tau += capped;
        prev_pair = capped;
        t += 2;
    }
    let tau = (2.0 * tau - 1.0).max(1.0 / (m * n as f64));
    Ok((m * n as f64 / tau).min(m * n as f64 * (10.0_f64).ln()))
}
