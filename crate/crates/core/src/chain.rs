//! Markov-chain analysis of endorsement counts.
//!
//! When every agent in a wave of `n` sees how many of the previous wave's
//! `n` agents endorsed green, the green count follows a Markov chain on
//! `{0, ..., n}`:
//!
//! ```text
//! k_t ~ Binomial(n, green_probability(alpha, gamma, beta, k = k_{t-1}, n))
//! ```
//!
//! The stationary distribution of this chain describes the long-run mix of
//! opinions, and comparing its mean against a lone agent's endorsement
//! probability `sigmoid(gamma + beta)` quantifies how much the transmission
//! structure amplifies individual bias.

use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::judgment::{green_probability, ModelParams, SocialSignal};
use crate::math::binomial_pmf;
use serde::Serialize;

/// Row-stochastic transition matrix over green counts `0..=n`.
///
/// Row `r` is the `Binomial(n, green_probability(params, k=r, n))` pmf: the
/// distribution of the next wave's count given the previous count was `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    n: u32,
    /// `(n+1) x (n+1)` entries, row-major.
    entries: Vec<f64>,
}

impl TransitionMatrix {
    /// Group size `n` (the state space is `0..=n`).
    pub fn n(&self) -> u32 {
        self.n
    }

    /// Number of states, `n + 1`.
    pub fn states(&self) -> usize {
        self.n as usize + 1
    }

    /// Entry at (row, col): probability of moving from count `row` to `col`.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.states() + col]
    }

    /// One row as a slice.
    pub fn row(&self, row: usize) -> &[f64] {
        let s = self.states();
        &self.entries[row * s..(row + 1) * s]
    }
}

/// Probability vector over green counts `0..=n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryDistribution {
    probs: Vec<f64>,
}

impl StationaryDistribution {
    /// Probability of state `k`.
    pub fn prob(&self, k: usize) -> f64 {
        self.probs[k]
    }

    /// All state probabilities in order `k = 0..=n`.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Mean green *proportion*, `sum_k (k/n) pi_k`.
    pub fn mean_proportion(&self) -> f64 {
        let n = (self.probs.len() - 1) as f64;
        if n == 0.0 {
            return 0.0;
        }
        self.probs.iter().enumerate().map(|(k, p)| k as f64 / n * p).sum()
    }
}

/// Build the endorsement-count transition matrix for group size `n >= 1`.
pub fn transition_matrix(params: &ModelParams, n: u32) -> Result<TransitionMatrix> {
    if n < 1 {
        return Err(Error::invalid(format!("transition_matrix needs n >= 1, got {n}")));
    }
    ModelParams::new(params.alpha, params.gamma, params.beta)?;
    let states = n as usize + 1;
    let mut entries = Vec::with_capacity(states * states);
    for r in 0..=n {
        let p = green_probability(params, Some(SocialSignal::new(r, n)?));
        for c in 0..=n {
            entries.push(binomial_pmf(n, c, p));
        }
    }
    Ok(TransitionMatrix { n, entries })
}

/// Default tolerance for [`stationary_distribution`].
pub const STATIONARY_TOL: f64 = 1e-12;
/// Default iteration cap for [`stationary_distribution`].
pub const STATIONARY_MAX_ITER: usize = 100_000;

/// Compute the stationary distribution `pi` with `pi P = pi` by power
/// iteration from the uniform vector.
///
/// The chain is irreducible and aperiodic whenever all row probabilities
/// are strictly interior (guaranteed by finite params), so the fixed point
/// is unique. Errors with the final residual if `max_iter` is exhausted
/// before the infinity-norm residual drops below `tol`.
pub fn stationary_distribution(
    matrix: &TransitionMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<StationaryDistribution> {
    let states = matrix.states();
    let mut pi = vec![1.0 / states as f64; states];
    let mut next = vec![0.0; states];
    let mut residual = f64::INFINITY;
    for iter in 0..max_iter {
        next.iter_mut().for_each(|x| *x = 0.0);
        for (r, &mass) in pi.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for (c, &p) in matrix.row(r).iter().enumerate() {
                next[c] += mass * p;
            }
        }
        // Renormalize to damp floating-point drift in long runs.
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        residual = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        std::mem::swap(&mut pi, &mut next);
        if residual <= tol {
            let _ = iter;
            return Ok(StationaryDistribution { probs: pi });
        }
    }
    Err(Error::Convergence {
        routine: "stationary_distribution",
        iterations: max_iter,
        residual,
    })
}

/// One row of an amplification curve: the stationary mean green proportion
/// for `(alpha, beta)` against the lone-agent proportion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmplificationPoint {
    /// Social weight.
    pub alpha: f64,
    /// Prior log-odds toward green.
    pub beta: f64,
    /// Stimulus log-likelihood ratio (shared across the sweep).
    pub gamma: f64,
    /// Group size.
    pub n: u32,
    /// `sum_k (k/n) pi_k` under the stationary distribution.
    pub mean_green: f64,
    /// `sigmoid(gamma + beta)`: a lone agent's endorsement probability.
    pub individual_green: f64,
}

/// Default alpha sweep: off, weak, moderate, strong social weighting.
pub const DEFAULT_ALPHAS: [f64; 4] = [0.0, 0.25, 0.5, 1.0];

/// Default beta grid: `[-3, 3]` in steps of 0.1 (61 points, built from
/// integer steps so grid values are reproducible).
pub fn default_beta_grid() -> Vec<f64> {
    (-30..=30).map(|i| i as f64 / 10.0).collect()
}

/// Sweep the stationary mean green proportion over an `(alpha, beta)` grid.
///
/// Grid points are independent and are evaluated through `mode`; rows come
/// back ordered by (alpha index, beta index) regardless of scheduling.
pub fn amplification_curve(
    alphas: &[f64],
    beta_grid: &[f64],
    gamma: f64,
    n: u32,
    mode: ExecMode,
) -> Result<Vec<AmplificationPoint>> {
    if alphas.is_empty() || beta_grid.is_empty() {
        return Err(Error::invalid("amplification_curve needs non-empty alpha and beta grids"));
    }
    let points: Vec<(f64, f64)> = alphas
        .iter()
        .flat_map(|&a| beta_grid.iter().map(move |&b| (a, b)))
        .collect();
    exec::try_map_indexed(mode, points.len(), |i| {
        let (alpha, beta) = points[i];
        let params = ModelParams::new(alpha, gamma, beta)?;
        let matrix = transition_matrix(&params, n)?;
        let pi = stationary_distribution(&matrix, STATIONARY_TOL, STATIONARY_MAX_ITER)?;
        Ok(AmplificationPoint {
            alpha,
            beta,
            gamma,
            n,
            mean_green: pi.mean_proportion(),
            individual_green: green_probability(&params, None),
        })
    })
}

/// Long-form stationary sweep row: `pi_k` for one `(alpha, beta, k)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarySweepRow {
    /// Social weight.
    pub alpha: f64,
    /// Prior log-odds toward green.
    pub beta: f64,
    /// Stimulus log-likelihood ratio.
    pub gamma: f64,
    /// Group size.
    pub n: u32,
    /// State (green count).
    pub k: u32,
    /// Stationary probability of the state.
    pub pi_k: f64,
}

/// Full stationary distributions over the grid, one row per state.
pub fn stationary_sweep(
    alphas: &[f64],
    beta_grid: &[f64],
    gamma: f64,
    n: u32,
    mode: ExecMode,
) -> Result<Vec<StationarySweepRow>> {
    if alphas.is_empty() || beta_grid.is_empty() {
        return Err(Error::invalid("stationary_sweep needs non-empty alpha and beta grids"));
    }
    let points: Vec<(f64, f64)> = alphas
        .iter()
        .flat_map(|&a| beta_grid.iter().map(move |&b| (a, b)))
        .collect();
    let per_point = exec::try_map_indexed(mode, points.len(), |i| {
        let (alpha, beta) = points[i];
        let params = ModelParams::new(alpha, gamma, beta)?;
        let matrix = transition_matrix(&params, n)?;
        let pi = stationary_distribution(&matrix, STATIONARY_TOL, STATIONARY_MAX_ITER)?;
        Ok((alpha, beta, pi))
    })?;
    Ok(per_point
        .into_iter()
        .flat_map(|(alpha, beta, pi)| {
            (0..=n).map(move |k| StationarySweepRow {
                alpha,
                beta,
                gamma,
                n,
                k,
                pi_k: pi.prob(k as usize),
            })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::sigmoid;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params(alpha: f64, gamma: f64, beta: f64) -> ModelParams {
        ModelParams::new(alpha, gamma, beta).unwrap()
    }

    fn solve(alpha: f64, gamma: f64, beta: f64, n: u32) -> StationaryDistribution {
        let m = transition_matrix(&params(alpha, gamma, beta), n).unwrap();
        stationary_distribution(&m, STATIONARY_TOL, STATIONARY_MAX_ITER).unwrap()
    }

    #[test]
    fn transition_matrix_frozen_examples() {
        // [TRIVIAL] alpha=0 makes all rows identical: Binomial(2, 0.5).
        let m = transition_matrix(&params(0.0, 0.0, 0.0), 2).unwrap();
        for r in 0..3 {
            assert_relative_eq!(m.get(r, 0), 0.25, max_relative = 1e-14);
            assert_relative_eq!(m.get(r, 1), 0.5, max_relative = 1e-14);
            assert_relative_eq!(m.get(r, 2), 0.25, max_relative = 1e-14);
        }
        // [DERIVED] p = sigmoid(ln 3) = 0.75 Bernoulli rows.
        let m = transition_matrix(&params(0.0, 0.0, 3f64.ln()), 1).unwrap();
        for r in 0..2 {
            assert_relative_eq!(m.get(r, 0), 0.25, max_relative = 1e-12);
            assert_relative_eq!(m.get(r, 1), 0.75, max_relative = 1e-12);
        }
    }

    #[test]
    fn transition_matrix_rejects_empty_chain() {
        assert!(transition_matrix(&params(1.0, 0.0, 0.0), 0).is_err());
    }

    #[test]
    fn stationary_matches_binomial_when_alpha_zero() {
        // [DERIVED] i.i.d. rows make the one-step distribution stationary.
        for &(gamma, beta) in &[(0.0, 0.0), (0.3, 0.7), (-1.2, 0.4), (0.0, -2.5)] {
            let pi = solve(0.0, gamma, beta, 8);
            let p = sigmoid(gamma + beta);
            for k in 0..=8u32 {
                assert!(
                    (pi.prob(k as usize) - binomial_pmf(8, k, p)).abs() < 1e-12,
                    "alpha=0 stationary != binomial at k={k}, gamma={gamma}, beta={beta}"
                );
            }
        }
    }

    #[test]
    fn stationary_of_symmetric_two_state_chain() {
        // [TRIVIAL] doubly stochastic symmetric matrix: uniform fixed point.
        let m = TransitionMatrix { n: 1, entries: vec![0.5, 0.5, 0.5, 0.5] };
        let pi = stationary_distribution(&m, 1e-14, 100).unwrap();
        assert_relative_eq!(pi.prob(0), 0.5, max_relative = 1e-12);
        assert_relative_eq!(pi.prob(1), 0.5, max_relative = 1e-12);
    }

    #[test]
    fn stationary_symmetric_when_unbiased() {
        // [TRIVIAL] color-exchange symmetry of the chain at gamma=beta=0.
        let pi = solve(1.0, 0.0, 0.0, 8);
        for k in 0..=8usize {
            assert!((pi.prob(k) - pi.prob(8 - k)).abs() < 1e-10);
        }
        assert_relative_eq!(pi.mean_proportion(), 0.5, epsilon = 1e-10);
    }

    #[test]
    fn stationary_residual_is_a_fixed_point() {
        let pi = solve(0.7, 0.2, -0.4, 8);
        let m = transition_matrix(&params(0.7, 0.2, -0.4), 8).unwrap();
        // pi P = pi within solver tolerance (a few ULPs beyond tol).
        for c in 0..9 {
            let projected: f64 = (0..9).map(|r| pi.prob(r) * m.get(r, c)).sum();
            assert!((projected - pi.prob(c)).abs() < 1e-11);
        }
        let total: f64 = pi.probs().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn convergence_failure_reports_residual() {
        let m = transition_matrix(&params(1.0, 0.0, 0.1), 8).unwrap();
        let err = stationary_distribution(&m, 1e-12, 3).unwrap_err();
        match err {
            Error::Convergence { routine, iterations, residual } => {
                assert_eq!(routine, "stationary_distribution");
                assert_eq!(iterations, 3);
                assert!(residual > 1e-12);
            }
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn amplification_curve_frozen_examples() {
        let curve =
            amplification_curve(&[0.0, 0.5], &[-0.5, 0.0, 0.26, 0.5], 0.0, 8, ExecMode::Sequential)
                .unwrap();
        let at = |alpha: f64, beta: f64| {
            curve
                .iter()
                .find(|p| p.alpha == alpha && p.beta == beta)
                .unwrap_or_else(|| panic!("missing point ({alpha}, {beta})"))
        };
        // [TRIVIAL] symmetric chain.
        assert_relative_eq!(at(0.5, 0.0).mean_green, 0.5, epsilon = 1e-10);
        // [DERIVED] alpha=0: mean = sigmoid(beta), no amplification.
        assert_relative_eq!(at(0.0, 0.26).mean_green, sigmoid(0.26), epsilon = 1e-12);
        assert_relative_eq!(at(0.0, -0.5).mean_green, sigmoid(-0.5), epsilon = 1e-12);
        // [PAPER] the network amplifies individual bias: mean > sigmoid(0.26).
        assert!(at(0.5, 0.26).mean_green > sigmoid(0.26));
        assert_relative_eq!(at(0.5, 0.26).individual_green, sigmoid(0.26), epsilon = 1e-15);
    }

    #[test]
    fn gamma_beta_equivalence() {
        // Curves with (gamma=c, beta=0) and (gamma=0, beta=c) are identical.
        for &c in &[0.3, 1.1, -0.7] {
            let via_gamma = amplification_curve(&DEFAULT_ALPHAS, &[0.0], c, 8, ExecMode::Sequential).unwrap();
            let via_beta = amplification_curve(&DEFAULT_ALPHAS, &[c], 0.0, 8, ExecMode::Sequential).unwrap();
            for (g, b) in via_gamma.iter().zip(&via_beta) {
                assert_eq!(g.mean_green, b.mean_green, "mean mismatch at alpha={}", g.alpha);
                assert_eq!(g.individual_green, b.individual_green);
            }
        }
    }

    #[test]
    fn sweep_and_curve_agree_across_exec_modes() {
        let betas = default_beta_grid();
        let seq = amplification_curve(&DEFAULT_ALPHAS, &betas, 0.0, 8, ExecMode::Sequential).unwrap();
        let par = amplification_curve(&DEFAULT_ALPHAS, &betas, 0.0, 8, ExecMode::Parallel).unwrap();
        assert_eq!(seq, par);
        let rows = stationary_sweep(&[0.5], &[0.2], 0.0, 8, ExecMode::Sequential).unwrap();
        assert_eq!(rows.len(), 9);
        let total: f64 = rows.iter().map(|r| r.pi_k).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        // Every row of a transition matrix is a probability vector.
        #[test]
        fn rows_are_stochastic(
            alpha in 0.0..2.0f64,
            gamma in -3.0..3.0f64,
            beta in -3.0..3.0f64,
        ) {
            let m = transition_matrix(&params(alpha, gamma, beta), 8).unwrap();
            for r in 0..9 {
                let sum: f64 = m.row(r).iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-12);
                prop_assert!(m.row(r).iter().all(|&p| p >= 0.0));
            }
        }

        // Mirror symmetry: pi(beta) reversed equals pi(-beta) at gamma=0.
        // Alpha stays within the documented sweep range [0, 1]; beyond it
        // the chain turns bistable and power iteration's stopping rule can
        // leave mirrored runs more than 1e-10 apart.
        #[test]
        fn mirror_symmetry(alpha in 0.0..=1.0f64, beta in -2.5..2.5f64) {
            let fwd = solve(alpha, 0.0, beta, 8);
            let rev = solve(alpha, 0.0, -beta, 8);
            for k in 0..=8usize {
                prop_assert!((fwd.prob(k) - rev.prob(8 - k)).abs() < 1e-10);
            }
        }
    }
}
