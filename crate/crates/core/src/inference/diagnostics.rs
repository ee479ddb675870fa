//! Convergence and summary diagnostics: split-R̂, effective sample size
//! (initial monotone sequence estimator), and shortest-interval HDI.

use crate::error::{Error, Result};
use crate::math::{mean, variance};

/// Probability mass of reported highest-density intervals.
pub const HDI_MASS: f64 = 0.90;

/// Split-R̂ outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhatResult {
    /// The potential scale reduction factor (∞ when degenerate).
    pub value: f64,
    /// Set when within-sequence variance vanishes (constant chains), in
    /// which case `value` is not informative.
    pub degenerate: bool,
}

/// Split each chain in half, dropping the middle draw of odd-length
/// chains.
fn split(chains: &[Vec<f64>]) -> Vec<&[f64]> {
    let mut sequences = Vec::with_capacity(chains.len() * 2);
    for chain in chains {
        let half = chain.len() / 2;
        sequences.push(&chain[..half]);
        sequences.push(&chain[chain.len() - half..]);
    }
    sequences
}

fn check_chains(chains: &[Vec<f64>]) -> Result<()> {
    if chains.len() < 2 {
        return Err(Error::invalid("rhat needs at least 2 chains"));
    }
    let len = chains[0].len();
    if len < 4 {
        return Err(Error::invalid("rhat needs at least 4 draws per chain"));
    }
    if chains.iter().any(|c| c.len() != len) {
        return Err(Error::invalid("chains must share a length"));
    }
    Ok(())
}

/// Split-R̂ (potential scale reduction) over per-chain draw sequences.
///
/// Values near 1 indicate the chains agree; zero within-sequence variance
/// is reported as degenerate rather than a number.
pub fn rhat(chains: &[Vec<f64>]) -> Result<RhatResult> {
    check_chains(chains)?;
    let sequences = split(chains);
    let n = sequences[0].len() as f64;
    let within: Vec<f64> = sequences.iter().map(|s| variance(s)).collect();
    let w = mean(&within);
    let means: Vec<f64> = sequences.iter().map(|s| mean(s)).collect();
    let b_over_n = variance(&means);
    if w <= 0.0 {
        return Ok(RhatResult { value: f64::INFINITY, degenerate: true });
    }
    let var_plus = (n - 1.0) / n * w + b_over_n;
    Ok(RhatResult { value: (var_plus / w).sqrt(), degenerate: false })
}

/// Effective sample size across chains using Geyer's initial monotone
/// sequence estimator on split chains. Returns 0 for degenerate
/// (zero-variance) draws.
pub fn effective_sample_size(chains: &[Vec<f64>]) -> Result<f64> {
    check_chains(chains)?;
    let sequences = split(chains);
    let n = sequences[0].len();
    let m = sequences.len();
    let within: Vec<f64> = sequences.iter().map(|s| variance(s)).collect();
    let w = mean(&within);
    if w <= 0.0 {
        return Ok(0.0);
    }
    let means: Vec<f64> = sequences.iter().map(|s| mean(s)).collect();
    let var_plus = (n as f64 - 1.0) / n as f64 * w + variance(&means);

    // Mean autocovariance across sequences at a given lag (biased, /n).
    let seq_means: Vec<f64> = means;
    let acov = |lag: usize| -> f64 {
        let mut total = 0.0;
        for (s, seq) in sequences.iter().enumerate() {
            let mu = seq_means[s];
            let mut c = 0.0;
            for i in 0..(n - lag) {
                c += (seq[i] - mu) * (seq[i + lag] - mu);
            }
            total += c / n as f64;
        }
        total / m as f64
    };

    let rho = |lag: usize| -> f64 { 1.0 - (w - acov(lag)) / var_plus };

    // Geyer pairs Γ_k = ρ_{2k} + ρ_{2k+1} (ρ_0 := 1), truncated at the
    // first non-positive pair and forced monotone non-increasing.
    let mut tau = -1.0;
    let mut prev_pair = f64::INFINITY;
    let mut k = 0usize;
    loop {
        let lag0 = 2 * k;
        let lag1 = 2 * k + 1;
        if lag1 >= n {
            break;
        }
        let pair = if k == 0 { 1.0 + rho(1) } else { rho(lag0) + rho(lag1) };
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev_pair);
        tau += 2.0 * pair;
        prev_pair = pair;
        k += 1;
    }
    let tau = tau.max(1.0 / (m * n) as f64);
    Ok((m * n) as f64 / tau)
}

/// Shortest interval containing `mass` of the draws (highest-density
/// interval for unimodal distributions). Returns `(lower, upper)`.
pub fn hdi(draws: &[f64], mass: f64) -> Result<(f64, f64)> {
    if draws.is_empty() {
        return Err(Error::invalid("hdi needs at least one draw"));
    }
    if !(mass > 0.0 && mass <= 1.0) {
        return Err(Error::invalid(format!("hdi mass must lie in (0, 1], got {mass}")));
    }
    let mut sorted = draws.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("draws must not contain NaN"));
    let n = sorted.len();
    let window = ((mass * n as f64).ceil() as usize).clamp(1, n);
    let mut best = (sorted[0], sorted[window - 1]);
    let mut best_width = best.1 - best.0;
    for i in 1..=(n - window) {
        let width = sorted[i + window - 1] - sorted[i];
        if width < best_width {
            best_width = width;
            best = (sorted[i], sorted[i + window - 1]);
        }
    }
    Ok(best)
}
