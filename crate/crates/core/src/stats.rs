//! Fixed-effects logistic regression, likelihood-ratio tests, and
//! condition summary tables.
//!
//! The regression machinery is deliberately small: maximum likelihood via
//! Newton/IRLS with step-halving (so deviance decreases monotonically),
//! an in-house Cholesky solve with a rank check, and chi-square tail
//! probabilities from [`crate::math`]. Random intercepts used in some
//! analyses elsewhere are replaced throughout by fixed effects (the
//! closest estimable analogue here; a per-network fixed-effect option
//! stands in for per-replication intercepts).

use crate::error::{Error, Result};
use crate::judgment::Color;
use crate::math::{chi_square_sf, log_sigmoid, sigmoid};
use crate::trace::{Condition, ExperimentTrace, TraceRow};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};

// ---------------------------------------------------------------------------
// Design matrices
// ---------------------------------------------------------------------------

/// Row-major design matrix for logistic regression.
#[derive(Debug, Clone)]
pub struct Design {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl Design {
    /// Build from explicit rows; all rows must share a length ≥ 1 and all
    /// entries must be finite.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if cols == 0 {
            return Err(Error::invalid("design matrix needs at least one column"));
        }
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::invalid(format!(
                    "design row {i} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            for &v in row {
                if !v.is_finite() {
                    return Err(Error::invalid(format!("design row {i} contains non-finite entry {v}")));
                }
                data.push(v);
            }
        }
        Ok(Design { data, rows: rows.len(), cols })
    }

    /// Number of observations.
    pub fn n_rows(&self) -> usize {
        self.rows
    }

    /// Number of predictors (including any intercept column).
    pub fn n_cols(&self) -> usize {
        self.cols
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

// ---------------------------------------------------------------------------
// Logistic regression (IRLS)
// ---------------------------------------------------------------------------

/// Gradient-norm convergence tolerance for [`fit_logistic`].
pub const IRLS_TOL: f64 = 1e-10;
/// Iteration cap for [`fit_logistic`].
pub const IRLS_MAX_ITER: usize = 100;
/// Coefficient magnitude beyond which non-convergence is attributed to
/// (quasi-)complete separation.
const SEPARATION_COEF: f64 = 12.0;

/// Result of a maximum-likelihood logistic fit.
#[derive(Debug, Clone, Serialize)]
pub struct RegressionFit {
    /// ML coefficient estimates, one per design column.
    pub coefficients: Vec<f64>,
    /// Log-likelihood at the estimates.
    pub log_likelihood: f64,
    /// Whether the gradient norm dropped below [`IRLS_TOL`].
    pub converged: bool,
    /// Newton iterations performed.
    pub iterations: usize,
    /// Deviance (−2·loglik) after each iteration, starting at β = 0;
    /// non-increasing by construction (step-halving), up to
    /// floating-point noise in the likelihood evaluation.
    pub deviance_path: Vec<f64>,
    /// Set when the fit looks completely separated (coefficients
    /// diverging; the gradient alone cannot tell, because it also
    /// vanishes as fitted probabilities saturate).
    pub separation_suspected: bool,
}

fn log_likelihood(design: &Design, outcomes: &[bool], beta: &[f64]) -> f64 {
    let mut ll = 0.0;
    for (i, &y) in outcomes.iter().enumerate() {
        let eta: f64 = design.row(i).iter().zip(beta).map(|(x, b)| x * b).sum();
        ll += if y { log_sigmoid(eta) } else { log_sigmoid(-eta) };
    }
    ll
}

/// In-place lower Cholesky factorization with a relative pivot tolerance.
/// Returns the index of the first dependent column on failure.
fn cholesky(h: &mut [f64], p: usize) -> std::result::Result<(), usize> {
    let max_diag = (0..p).map(|j| h[j * p + j]).fold(0.0f64, f64::max);
    let tol = 1e-12 * max_diag.max(1e-300);
    for j in 0..p {
        let mut d = h[j * p + j];
        for k in 0..j {
            d -= h[j * p + k] * h[j * p + k];
        }
        if !(d > tol) {
            return Err(j);
        }
        let l = d.sqrt();
        h[j * p + j] = l;
        for i in (j + 1)..p {
            let mut v = h[i * p + j];
            for k in 0..j {
                v -= h[i * p + k] * h[j * p + k];
            }
            h[i * p + j] = v / l;
        }
    }
    Ok(())
}

/// Solve `L L^T x = g` given the factorization from [`cholesky`].
fn cholesky_solve(l: &[f64], g: &[f64], p: usize) -> Vec<f64> {
    let mut y = vec![0.0; p];
    for i in 0..p {
        let mut v = g[i];
        for k in 0..i {
            v -= l[i * p + k] * y[k];
        }
        y[i] = v / l[i * p + i];
    }
    let mut x = vec![0.0; p];
    for i in (0..p).rev() {
        let mut v = y[i];
        for k in (i + 1)..p {
            v -= l[k * p + i] * x[k];
        }
        x[i] = v / l[i * p + i];
    }
    x
}

/// Fit a logistic regression by maximum likelihood (Newton/IRLS).
///
/// Convergence means the infinity norm of the score vector fell below
/// [`IRLS_TOL`]. Rank-deficient designs are rejected up front (the first
/// Newton step factors `X^T W X` with `W = I/4`, a pure rank check on the
/// columns). Deviance decreases monotonically across iterations thanks to
/// step-halving; under complete separation the fit stops at the iteration
/// cap with `converged = false` and `separation_suspected = true`.
pub fn fit_logistic(design: &Design, outcomes: &[bool]) -> Result<RegressionFit> {
    if design.n_rows() != outcomes.len() {
        return Err(Error::invalid(format!(
            "design has {} rows but {} outcomes",
            design.n_rows(),
            outcomes.len()
        )));
    }
    if design.n_rows() == 0 {
        return Err(Error::invalid("cannot fit a logistic regression to zero rows"));
    }
    let p = design.n_cols();
    let n = design.n_rows();
    let mut beta = vec![0.0; p];
    let mut ll = log_likelihood(design, outcomes, &beta);
    let mut deviance_path = vec![-2.0 * ll];
    let mut iterations = 0;
    let mut converged = false;

    for iter in 0..IRLS_MAX_ITER {
        // Score vector g = X^T (y - p) and Hessian H = X^T W X.
        let mut grad = vec![0.0; p];
        let mut hess = vec![0.0; p * p];
        for i in 0..n {
            let xi = design.row(i);
            let eta: f64 = xi.iter().zip(&beta).map(|(x, b)| x * b).sum();
            let mu = sigmoid(eta);
            let resid = (outcomes[i] as u8 as f64) - mu;
            let w = mu * (1.0 - mu);
            for a in 0..p {
                grad[a] += xi[a] * resid;
                for b in a..p {
                    hess[a * p + b] += w * xi[a] * xi[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                hess[a * p + b] = hess[b * p + a];
            }
        }
        let grad_norm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if grad_norm <= IRLS_TOL {
            converged = true;
            break;
        }

        match cholesky(&mut hess, p) {
            Ok(()) => {}
            Err(col) if iter == 0 => return Err(Error::RankDeficient { column: col }),
            // A Hessian collapsing after successful steps is a separation
            // symptom (weights vanishing as fitted probabilities saturate),
            // not a design defect.
            Err(_) => break,
        }
        let delta = cholesky_solve(&hess, &grad, p);

        // Step-halving keeps the deviance monotone up to floating-point
        // noise (the tolerance lets full Newton steps through once the
        // likelihood improvement drops below machine resolution, which is
        // what carries the gradient the last stretch below IRLS_TOL).
        let noise = 1e-12 * (1.0 + ll.abs());
        let mut step = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let candidate: Vec<f64> =
                beta.iter().zip(&delta).map(|(b, d)| b + step * d).collect();
            let cand_ll = log_likelihood(design, outcomes, &candidate);
            if cand_ll >= ll - noise {
                beta = candidate;
                ll = cand_ll;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        iterations = iter + 1;
        if !improved {
            // No ascent direction left at floating-point resolution.
            break;
        }
        let dev = -2.0 * ll;
        // The acceptance rule tolerates a `noise`-sized dip in log
        // likelihood, so the deviance may rise by up to twice that.
        debug_assert!(
            dev <= deviance_path.last().copied().unwrap_or(f64::INFINITY) + 2.0 * noise + 1e-9,
            "deviance must not increase"
        );
        deviance_path.push(dev);
    }

    if !converged {
        // One more score evaluation: the loop may have exited right after
        // a step that reached the optimum.
        let mut grad_norm = 0.0f64;
        let mut grad = vec![0.0; p];
        for i in 0..n {
            let xi = design.row(i);
            let eta: f64 = xi.iter().zip(&beta).map(|(x, b)| x * b).sum();
            let resid = (outcomes[i] as u8 as f64) - sigmoid(eta);
            for a in 0..p {
                grad[a] += xi[a] * resid;
            }
        }
        for g in &grad {
            grad_norm = grad_norm.max(g.abs());
        }
        converged = grad_norm <= IRLS_TOL;
    }

    // Under complete separation the score vector vanishes as fitted
    // probabilities saturate, so the gradient criterion can read as
    // "converged"; diverging coefficients are the reliable symptom.
    let separation_suspected = beta.iter().any(|b| b.abs() > SEPARATION_COEF);
    Ok(RegressionFit {
        coefficients: beta,
        log_likelihood: ll,
        converged,
        iterations,
        deviance_path,
        separation_suspected,
    })
}

// ---------------------------------------------------------------------------
// Likelihood-ratio tests
// ---------------------------------------------------------------------------

/// Result of a likelihood-ratio comparison between nested fits.
#[derive(Debug, Clone, Serialize)]
pub struct LrTestResult {
    /// `2·(loglik_unrestricted − loglik_restricted)`, clipped at 0.
    pub chi_square: f64,
    /// Degrees of freedom (parameter-count difference).
    pub df: u32,
    /// Upper-tail chi-square probability.
    pub p_value: f64,
}

/// Numerical slack allowed before a better-fitting restricted model is
/// treated as a nesting violation.
const NESTING_SLACK: f64 = 1e-8;

/// Likelihood-ratio test of `restricted` against `unrestricted` with the
/// given degrees of freedom.
pub fn likelihood_ratio_test(
    restricted: &RegressionFit,
    unrestricted: &RegressionFit,
    df: u32,
) -> Result<LrTestResult> {
    if df < 1 {
        return Err(Error::invalid("likelihood_ratio_test needs df >= 1"));
    }
    let (llr, llu) = (restricted.log_likelihood, unrestricted.log_likelihood);
    if llu < llr - NESTING_SLACK {
        return Err(Error::NotNested { restricted: llr, unrestricted: llu });
    }
    let chi_square = (2.0 * (llu - llr)).max(0.0);
    Ok(LrTestResult { chi_square, df, p_value: chi_square_sf(chi_square, df) })
}

/// Significance stars at the 0.05 / 0.01 / 0.001 thresholds.
pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

// ---------------------------------------------------------------------------
// Condition summaries
// ---------------------------------------------------------------------------

/// Row subsets the summary and test machinery can operate on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TracePartition {
    /// Every row.
    All,
    /// Rows where the stimulus's true majority equals the agent's
    /// motivated color.
    MatchedOnly,
    /// Rows where it does not.
    NonmatchedOnly,
    /// Social rows whose observed set split evenly (k = N/2).
    TieTrialsOnly,
}

impl TracePartition {
    /// Name used in CLI flags and file names.
    pub fn as_str(self) -> &'static str {
        match self {
            TracePartition::All => "all",
            TracePartition::MatchedOnly => "matched_only",
            TracePartition::NonmatchedOnly => "nonmatched_only",
            TracePartition::TieTrialsOnly => "tie_trials_only",
        }
    }
}

impl std::str::FromStr for TracePartition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(TracePartition::All),
            "matched_only" | "matched" => Ok(TracePartition::MatchedOnly),
            "nonmatched_only" | "nonmatched" => Ok(TracePartition::NonmatchedOnly),
            "tie_trials_only" | "ties" => Ok(TracePartition::TieTrialsOnly),
            other => Err(Error::invalid(format!("unknown partition `{other}`"))),
        }
    }
}

/// Whether the true answer matched the agent's motivated color
/// (equivalently: being correct and being biased coincide on this row).
fn is_matched(row: &TraceRow) -> bool {
    row.chose_motivated == row.chose_correct
}

/// Distinct agents per (simulation, condition, network, wave) — the
/// judgment-set size N. Errors if the trace mixes set sizes.
fn infer_set_size(trace: &ExperimentTrace) -> Result<Option<u32>> {
    let mut groups: BTreeMap<(u32, Condition, u32, u32), BTreeSet<&str>> = BTreeMap::new();
    for row in &trace.rows {
        groups
            .entry((row.simulation_id, row.condition, row.network, row.wave))
            .or_default()
            .insert(&row.agent_id);
    }
    let sizes: BTreeSet<usize> = groups.values().map(BTreeSet::len).collect();
    match sizes.len() {
        0 => Ok(None),
        1 => Ok(Some(*sizes.iter().next().unwrap() as u32)),
        _ => Err(Error::InvalidData(format!(
            "trace mixes wave sizes {sizes:?}; tie detection needs a single set size"
        ))),
    }
}

fn partition_rows<'a>(
    trace: &'a ExperimentTrace,
    partition: TracePartition,
) -> Result<Vec<&'a TraceRow>> {
    let set_size = match partition {
        TracePartition::TieTrialsOnly => infer_set_size(trace)?,
        _ => None,
    };
    Ok(trace
        .rows
        .iter()
        .filter(|row| match partition {
            TracePartition::All => true,
            TracePartition::MatchedOnly => is_matched(row),
            TracePartition::NonmatchedOnly => !is_matched(row),
            TracePartition::TieTrialsOnly => match (row.observed_k, set_size) {
                (Some(k), Some(n)) => n % 2 == 0 && 2 * k == n,
                _ => false,
            },
        })
        .collect())
}

/// Bias/accuracy proportions for one condition (pooled or per wave).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionSummary {
    /// Condition summarized.
    pub condition: Condition,
    /// Wave, or `None` for the pooled row.
    pub wave: Option<u32>,
    /// Rows aggregated.
    pub n: u64,
    /// Proportion choosing the motivated (marked) color.
    pub bias_proportion: f64,
    /// Binomial standard error of the bias proportion.
    pub bias_se: f64,
    /// Proportion choosing the true majority color.
    pub accuracy_proportion: f64,
    /// Binomial standard error of the accuracy proportion.
    pub accuracy_se: f64,
}

/// Output of [`condition_summaries`].
#[derive(Debug, Clone, Serialize)]
pub struct SummaryTable {
    /// Partition the table was computed over.
    pub partition: TracePartition,
    /// True when the partition selected no rows (explicit empty marker).
    pub empty: bool,
    /// One row per condition, pooled over waves.
    pub pooled: Vec<ConditionSummary>,
    /// One row per (condition, wave).
    pub by_wave: Vec<ConditionSummary>,
}

fn proportion_se(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

fn summarize_group(
    condition: Condition,
    wave: Option<u32>,
    rows: &[&TraceRow],
) -> ConditionSummary {
    let n = rows.len() as u64;
    let bias = rows.iter().filter(|r| r.chose_motivated).count() as f64 / n as f64;
    let acc = rows.iter().filter(|r| r.chose_correct).count() as f64 / n as f64;
    ConditionSummary {
        condition,
        wave,
        n,
        bias_proportion: bias,
        bias_se: proportion_se(bias, n),
        accuracy_proportion: acc,
        accuracy_se: proportion_se(acc, n),
    }
}

/// Per-condition (pooled and per-wave) bias and accuracy proportions with
/// binomial standard errors, over the requested partition.
pub fn condition_summaries(
    trace: &ExperimentTrace,
    partition: TracePartition,
) -> Result<SummaryTable> {
    let rows = partition_rows(trace, partition)?;
    if rows.is_empty() {
        return Ok(SummaryTable { partition, empty: true, pooled: Vec::new(), by_wave: Vec::new() });
    }
    let mut by_condition: BTreeMap<Condition, Vec<&TraceRow>> = BTreeMap::new();
    let mut by_wave_groups: BTreeMap<(Condition, u32), Vec<&TraceRow>> = BTreeMap::new();
    for row in rows {
        by_condition.entry(row.condition).or_default().push(row);
        by_wave_groups.entry((row.condition, row.wave)).or_default().push(row);
    }
    let pooled = by_condition
        .iter()
        .map(|(&c, rows)| summarize_group(c, None, rows))
        .collect();
    let by_wave = by_wave_groups
        .iter()
        .map(|(&(c, w), rows)| summarize_group(c, Some(w), rows))
        .collect();
    Ok(SummaryTable { partition, empty: false, pooled, by_wave })
}

// ---------------------------------------------------------------------------
// Condition comparisons (the Table S1/S2-style cells)
// ---------------------------------------------------------------------------

/// Outcome column a comparison tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `chose_motivated`.
    Bias,
    /// `chose_correct`.
    Accuracy,
}

impl Metric {
    /// Column name used in output files.
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Bias => "bias",
            Metric::Accuracy => "accuracy",
        }
    }

    fn outcome(self, row: &TraceRow) -> bool {
        match self {
            Metric::Bias => row.chose_motivated,
            Metric::Accuracy => row.chose_correct,
        }
    }
}

/// One condition-pair likelihood-ratio comparison.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionTest {
    /// Baseline condition.
    pub condition_a: Condition,
    /// Comparison condition (its indicator enters the unrestricted model).
    pub condition_b: Condition,
    /// Outcome tested.
    pub metric: Metric,
    /// Observed proportion in `condition_a`.
    pub prop_a: f64,
    /// Observed proportion in `condition_b`.
    pub prop_b: f64,
    /// LR statistic.
    pub chi_square: f64,
    /// Degrees of freedom.
    pub df: u32,
    /// Upper-tail p-value.
    pub p_value: f64,
    /// Stars at 0.05/0.01/0.001.
    pub stars: String,
}

/// Compare two conditions on a metric with a likelihood-ratio test.
///
/// The unrestricted model regresses the outcome on an intercept, a
/// condition-b indicator, and a motivated-green indicator; the restricted
/// model drops the condition indicator (df = 1). With `per_network_effects`
/// a sum-to-zero effect per network within each condition stands in for the
/// random replication intercepts used in mixed-model formulations (the
/// sum-to-zero coding keeps the nested network terms from absorbing the
/// condition contrast in the restricted model).
pub fn compare_conditions(
    trace: &ExperimentTrace,
    condition_a: Condition,
    condition_b: Condition,
    metric: Metric,
    per_network_effects: bool,
) -> Result<ConditionTest> {
    if condition_a == condition_b {
        return Err(Error::invalid("compare_conditions needs two distinct conditions"));
    }
    let rows: Vec<&TraceRow> = trace
        .rows
        .iter()
        .filter(|r| r.condition == condition_a || r.condition == condition_b)
        .collect();
    if rows.is_empty() {
        return Err(Error::InvalidData(format!(
            "trace has no rows for {condition_a} or {condition_b}"
        )));
    }
    for c in [condition_a, condition_b] {
        if !rows.iter().any(|r| r.condition == c) {
            return Err(Error::InvalidData(format!("trace has no rows for {c}")));
        }
    }

    // Network effects are coded sum-to-zero *within* each condition
    // (networks are nested in conditions, so reference-coded dummies would
    // let the restricted model absorb part of the condition contrast).
    // Each condition's networks beyond the first contribute one column:
    // +1 on that network, −1 on the condition's first network, 0 elsewhere.
    let mut networks: BTreeSet<(Condition, u32)> = BTreeSet::new();
    for r in &rows {
        networks.insert((r.condition, r.network));
    }
    let mut effect_columns: Vec<(Condition, u32, u32)> = Vec::new();
    for &c in &[condition_a, condition_b] {
        let of_c: Vec<u32> =
            networks.iter().filter(|(nc, _)| *nc == c).map(|&(_, n)| n).collect();
        let reference = of_c[0];
        for &net in &of_c[1..] {
            effect_columns.push((c, net, reference));
        }
    }

    let mut unrestricted_rows = Vec::with_capacity(rows.len());
    let mut restricted_rows = Vec::with_capacity(rows.len());
    let mut outcomes = Vec::with_capacity(rows.len());
    for r in &rows {
        let is_b = (r.condition == condition_b) as u8 as f64;
        let motivated_green = (r.motivated_color == Color::Green) as u8 as f64;
        let mut base = vec![1.0, motivated_green];
        if per_network_effects {
            for &(c, net, reference) in &effect_columns {
                base.push(if r.condition != c {
                    0.0
                } else if r.network == net {
                    1.0
                } else if r.network == reference {
                    -1.0
                } else {
                    0.0
                });
            }
        }
        restricted_rows.push(base.clone());
        let mut full = base;
        full.insert(1, is_b);
        unrestricted_rows.push(full);
        outcomes.push(metric.outcome(r));
    }

    let unrestricted = fit_logistic(&Design::from_rows(&unrestricted_rows)?, &outcomes)?;
    let restricted = fit_logistic(&Design::from_rows(&restricted_rows)?, &outcomes)?;
    let lr = likelihood_ratio_test(&restricted, &unrestricted, 1)?;

    let prop = |c: Condition| {
        let sub: Vec<&&TraceRow> = rows.iter().filter(|r| r.condition == c).collect();
        sub.iter().filter(|r| metric.outcome(r)).count() as f64 / sub.len() as f64
    };
    Ok(ConditionTest {
        condition_a,
        condition_b,
        metric,
        prop_a: prop(condition_a),
        prop_b: prop(condition_b),
        chi_square: lr.chi_square,
        df: lr.df,
        p_value: lr.p_value,
        stars: significance_stars(lr.p_value).to_string(),
    })
}

// ---------------------------------------------------------------------------
// Tie-trial priming analysis
// ---------------------------------------------------------------------------

/// One tie-trial judgment with the covariates of the priming regression.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TieTrialRow {
    /// Condition of the judging agent.
    pub condition: Condition,
    /// Whether the agent chose green.
    pub chose_green: bool,
    /// Whether the agent's motivated color is green.
    pub bias_green: bool,
    /// Whether the coin-broken presented majority was green
    /// (pure randomization on tie trials).
    pub majority_green: bool,
    /// Green-dot count of the stimulus.
    pub stimulus_level: u32,
}

/// Extract tie-trial rows (observed set split evenly) with the randomized
/// presented color exposed as the `majority_green` covariate.
pub fn tie_trial_rows(trace: &ExperimentTrace) -> Result<Vec<TieTrialRow>> {
    let rows = partition_rows(trace, TracePartition::TieTrialsOnly)?;
    rows.into_iter()
        .map(|r| {
            let presented = r.presented_color.ok_or_else(|| {
                Error::InvalidData("tie trial row lacks a presented color".into())
            })?;
            Ok(TieTrialRow {
                condition: r.condition,
                chose_green: r.chose_green,
                bias_green: r.motivated_color == Color::Green,
                majority_green: presented == Color::Green,
                stimulus_level: r.stimulus_level,
            })
        })
        .collect()
}

/// Likelihood-ratio test for the presented-majority-color effect on tie
/// trials: `chose_green ~ 1 + bias_green [+ majority_green]`, df = 1.
pub fn priming_test(rows: &[TieTrialRow]) -> Result<LrTestResult> {
    if rows.is_empty() {
        return Err(Error::InvalidData("priming_test needs at least one tie-trial row".into()));
    }
    let mut full = Vec::with_capacity(rows.len());
    let mut reduced = Vec::with_capacity(rows.len());
    let mut outcomes = Vec::with_capacity(rows.len());
    for r in rows {
        let bias = r.bias_green as u8 as f64;
        let majority = r.majority_green as u8 as f64;
        full.push(vec![1.0, bias, majority]);
        reduced.push(vec![1.0, bias]);
        outcomes.push(r.chose_green);
    }
    let unrestricted = fit_logistic(&Design::from_rows(&full)?, &outcomes)?;
    let restricted = fit_logistic(&Design::from_rows(&reduced)?, &outcomes)?;
    likelihood_ratio_test(&restricted, &unrestricted, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;

    fn intercept_design(n: usize) -> Design {
        Design::from_rows(&vec![vec![1.0]; n]).unwrap()
    }

    #[test]
    fn intercept_only_even_split() {
        // [TRIVIAL] 50 of 100 successes: coefficient 0, loglik 100 ln 0.5.
        let outcomes: Vec<bool> = (0..100).map(|i| i % 2 == 0).collect();
        let fit = fit_logistic(&intercept_design(100), &outcomes).unwrap();
        assert!(fit.converged);
        assert!(fit.coefficients[0].abs() < 1e-10);
        assert_relative_eq!(fit.log_likelihood, 100.0 * 0.5f64.ln(), max_relative = 1e-12);
    }

    #[test]
    fn intercept_only_three_quarters() {
        // [DERIVED] closed-form logit of the sample proportion: ln 3.
        let outcomes: Vec<bool> = (0..100).map(|i| i % 4 != 3).collect();
        let fit = fit_logistic(&intercept_design(100), &outcomes).unwrap();
        assert!(fit.converged);
        assert_relative_eq!(fit.coefficients[0], 3f64.ln(), max_relative = 1e-8);
    }

    #[test]
    fn loglik_matches_grid_maximization() {
        // [DERIVED] direct two-stage grid maximization oracle.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..40).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let outcomes: Vec<bool> =
            xs.iter().map(|&x| rng.gen::<f64>() < sigmoid(0.3 + 0.8 * x)).collect();
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![1.0, x]).collect();
        let design = Design::from_rows(&rows).unwrap();
        let fit = fit_logistic(&design, &outcomes).unwrap();
        assert!(fit.converged);

        let ll_at = |b0: f64, b1: f64| log_likelihood(&design, &outcomes, &[b0, b1]);
        let mut best = f64::NEG_INFINITY;
        // Coarse pass over a wide box, then a fine pass around the winner.
        let mut center = (0.0, 0.0);
        for i in -60..=60 {
            for j in -60..=60 {
                let ll = ll_at(i as f64 * 0.05, j as f64 * 0.05);
                if ll > best {
                    best = ll;
                    center = (i as f64 * 0.05, j as f64 * 0.05);
                }
            }
        }
        for i in -50..=50 {
            for j in -50..=50 {
                let ll = ll_at(center.0 + i as f64 * 0.001, center.1 + j as f64 * 0.001);
                if ll > best {
                    best = ll;
                }
            }
        }
        assert!(
            (fit.log_likelihood - best).abs() < 1e-6,
            "IRLS loglik {} vs grid {}",
            fit.log_likelihood,
            best
        );
        assert!(fit.log_likelihood >= best - 1e-12, "grid must not beat the ML fit");
    }

    #[test]
    fn deviance_decreases_monotonically() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> =
            (0..200).map(|_| vec![1.0, rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
        let outcomes: Vec<bool> = rows
            .iter()
            .map(|r| rng.gen::<f64>() < sigmoid(-0.5 + 1.5 * r[1] - 2.0 * r[2]))
            .collect();
        let fit = fit_logistic(&Design::from_rows(&rows).unwrap(), &outcomes).unwrap();
        for pair in fit.deviance_path.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-9, "deviance rose: {:?}", pair);
        }
        assert!(fit.converged);
    }

    #[test]
    fn rank_deficiency_is_rejected() {
        // Duplicate column (zero variance after centering out the first).
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|i| {
                let x = (i as f64) / 10.0;
                vec![1.0, x, x]
            })
            .collect();
        let outcomes: Vec<bool> = (0..50).map(|i| i % 3 == 0).collect();
        let err = fit_logistic(&Design::from_rows(&rows).unwrap(), &outcomes).unwrap_err();
        match err {
            Error::RankDeficient { column } => assert_eq!(column, 2),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
        // A constant zero column is likewise rejected.
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![1.0, i as f64, 0.0]).collect();
        assert!(matches!(
            fit_logistic(&Design::from_rows(&rows).unwrap(), &outcomes),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn complete_separation_is_flagged() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![1.0, i as f64 - 19.5]).collect();
        let outcomes: Vec<bool> = (0..40).map(|i| i >= 20).collect();
        let fit = fit_logistic(&Design::from_rows(&rows).unwrap(), &outcomes).unwrap();
        // The gradient criterion may or may not trip (the score vector also
        // vanishes under separation); the coefficient flag must.
        assert!(fit.separation_suspected);
        assert!(fit.coefficients[1] > SEPARATION_COEF);
    }

    #[test]
    fn lr_test_frozen_examples() {
        // [TRIVIAL] identical models: statistic 0, p = 1.
        let fit = RegressionFit {
            coefficients: vec![0.0],
            log_likelihood: -34.5,
            converged: true,
            iterations: 3,
            deviance_path: vec![69.0],
            separation_suspected: false,
        };
        let r = likelihood_ratio_test(&fit, &fit.clone(), 1).unwrap();
        assert_eq!(r.chi_square, 0.0);
        assert_eq!(r.p_value, 1.0);

        // [DERIVED] chi-square quantile oracle: 3.841/df 1 → p ≈ 0.05.
        let better = RegressionFit { log_likelihood: -34.5 + 3.841 / 2.0, ..fit.clone() };
        let r = likelihood_ratio_test(&fit, &better, 1).unwrap();
        assert_relative_eq!(r.chi_square, 3.841, max_relative = 1e-12);
        assert_relative_eq!(r.p_value, 0.050_013_683_763_956_71, max_relative = 1e-9);
    }

    #[test]
    fn lr_test_rejects_nesting_violation() {
        let base = RegressionFit {
            coefficients: vec![0.0],
            log_likelihood: -10.0,
            converged: true,
            iterations: 1,
            deviance_path: vec![20.0],
            separation_suspected: false,
        };
        let worse = RegressionFit { log_likelihood: -10.5, ..base.clone() };
        assert!(matches!(
            likelihood_ratio_test(&base, &worse, 1),
            Err(Error::NotNested { .. })
        ));
        // Tiny numerical deficits are clipped to zero instead.
        let jitter = RegressionFit { log_likelihood: -10.0 - 1e-10, ..base.clone() };
        let r = likelihood_ratio_test(&base, &jitter, 1).unwrap();
        assert_eq!(r.chi_square, 0.0);
    }

    #[test]
    fn lr_statistic_invariant_to_affine_column_rescale() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let xs: Vec<f64> = (0..150).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let zs: Vec<f64> = (0..150).map(|_| rng.gen_range(0.0..1.0)).collect();
        let outcomes: Vec<bool> = xs
            .iter()
            .zip(&zs)
            .map(|(&x, &z)| rng.gen::<f64>() < sigmoid(0.2 + 0.9 * x - 0.4 * z))
            .collect();

        let build = |scale: f64, shift: f64| {
            let full: Vec<Vec<f64>> =
                xs.iter().zip(&zs).map(|(&x, &z)| vec![1.0, scale * x + shift, z]).collect();
            let reduced: Vec<Vec<f64>> = zs.iter().map(|&z| vec![1.0, z]).collect();
            let fu = fit_logistic(&Design::from_rows(&full).unwrap(), &outcomes).unwrap();
            let fr = fit_logistic(&Design::from_rows(&reduced).unwrap(), &outcomes).unwrap();
            likelihood_ratio_test(&fr, &fu, 1).unwrap()
        };
        let base = build(1.0, 0.0);
        let scaled = build(37.0, -4.2);
        assert!((base.chi_square - scaled.chi_square).abs() < 1e-8);
        assert!((base.p_value - scaled.p_value).abs() < 1e-8);
    }

    #[test]
    fn null_lr_calibration() {
        // [DERIVED] Monte Carlo calibration: with no true condition effect,
        // rejection at p < 0.05 should occur for ~5% of replicates.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let replicates = 1000;
        let n = 200;
        let mut rejections = 0;
        for _ in 0..replicates {
            let rows: Vec<Vec<f64>> =
                (0..n).map(|i| vec![1.0, (i % 2) as f64]).collect();
            let outcomes: Vec<bool> = (0..n).map(|_| rng.gen::<f64>() < 0.5).collect();
            let full = fit_logistic(&Design::from_rows(&rows).unwrap(), &outcomes).unwrap();
            let reduced_rows: Vec<Vec<f64>> = (0..n).map(|_| vec![1.0]).collect();
            let reduced =
                fit_logistic(&Design::from_rows(&reduced_rows).unwrap(), &outcomes).unwrap();
            let lr = likelihood_ratio_test(&reduced, &full, 1).unwrap();
            if lr.p_value < 0.05 {
                rejections += 1;
            }
        }
        let rate = rejections as f64 / replicates as f64;
        assert!((rate - 0.05).abs() <= 0.02, "null rejection rate {rate}");
    }

    #[test]
    fn stars_thresholds() {
        assert_eq!(significance_stars(0.5), "");
        assert_eq!(significance_stars(0.049), "*");
        assert_eq!(significance_stars(0.009), "**");
        assert_eq!(significance_stars(0.0009), "***");
        assert_eq!(significance_stars(0.05), "");
    }

    // -- trace-backed summaries and tests ----------------------------------

    /// Consistent trace row: `chose_correct`/`chose_motivated` are derived
    /// from the level (majority green iff level > 50) and motivated color.
    fn fixture_row(
        condition: Condition,
        network: u32,
        wave: u32,
        trial: u32,
        agent: u32,
        motivated: Color,
        level: u32,
        chose_green: bool,
        observed: Option<(u32, Color, u32)>,
    ) -> TraceRow {
        TraceRow {
            simulation_id: 0,
            condition,
            network,
            wave,
            trial,
            stimulus_level: level,
            agent_id: format!("a{agent:02}"),
            motivated_color: motivated,
            observed_k: observed.map(|o| o.0),
            presented_color: observed.map(|o| o.1),
            presented_count: observed.map(|o| o.2),
            chose_green,
            chose_motivated: chose_green == (motivated == Color::Green),
            chose_correct: chose_green == (level > 50),
            resampled: false,
        }
    }

    #[test]
    fn summaries_match_hand_counts() {
        use Condition::AsocialMotivated as AM;
        // Wave 1: 3 of 4 choose green on a green-majority stimulus (level 52)
        // with green motivation; wave 2: 1 of 4.
        let mut rows = Vec::new();
        for (wave, greens) in [(1u32, 3usize), (2, 1)] {
            for a in 0..4u32 {
                rows.push(fixture_row(AM, 0, wave, 0, a, Color::Green, 52, (a as usize) < greens, None));
            }
        }
        let trace = ExperimentTrace::new(rows).unwrap();
        let table = condition_summaries(&trace, TracePartition::All).unwrap();
        assert!(!table.empty);
        assert_eq!(table.pooled.len(), 1);
        let pooled = &table.pooled[0];
        assert_eq!(pooled.n, 8);
        assert_relative_eq!(pooled.bias_proportion, 0.5);
        assert_relative_eq!(pooled.bias_se, (0.25f64 / 8.0).sqrt());
        // Motivated color green and majority green coincide here.
        assert_relative_eq!(pooled.accuracy_proportion, 0.5);
        let wave1 = table.by_wave.iter().find(|s| s.wave == Some(1)).unwrap();
        assert_eq!(wave1.n, 4);
        assert_relative_eq!(wave1.bias_proportion, 0.75);
        assert_relative_eq!(wave1.bias_se, (0.75f64 * 0.25 / 4.0).sqrt());
    }

    #[test]
    fn matched_and_nonmatched_partition_the_trace() {
        use Condition::AsocialControl as AC;
        let mut rows = Vec::new();
        // Green-motivated agents: level 52 rows are matched, 48 nonmatched.
        for (trial, level) in [(0u32, 52u32), (1, 48), (2, 52), (3, 48)] {
            for a in 0..2u32 {
                rows.push(fixture_row(AC, 0, 1, trial, a, Color::Green, level, a == 0, None));
            }
        }
        let trace = ExperimentTrace::new(rows).unwrap();
        let all = condition_summaries(&trace, TracePartition::All).unwrap();
        let matched = condition_summaries(&trace, TracePartition::MatchedOnly).unwrap();
        let nonmatched = condition_summaries(&trace, TracePartition::NonmatchedOnly).unwrap();
        assert_eq!(all.pooled[0].n, 8);
        assert_eq!(matched.pooled[0].n, 4);
        assert_eq!(nonmatched.pooled[0].n, 4);
        // On matched rows bias and accuracy agree; on nonmatched they are
        // complementary.
        assert_relative_eq!(
            matched.pooled[0].bias_proportion,
            matched.pooled[0].accuracy_proportion
        );
        assert_relative_eq!(
            nonmatched.pooled[0].bias_proportion,
            1.0 - nonmatched.pooled[0].accuracy_proportion
        );
    }

    #[test]
    fn empty_partition_yields_marker() {
        let rows = vec![fixture_row(
            Condition::AsocialMotivated,
            0,
            1,
            0,
            0,
            Color::Green,
            52,
            true,
            None,
        )];
        let trace = ExperimentTrace::new(rows).unwrap();
        let table = condition_summaries(&trace, TracePartition::TieTrialsOnly).unwrap();
        assert!(table.empty);
        assert!(table.pooled.is_empty());
        assert!(table.by_wave.is_empty());
    }

    #[test]
    fn tie_trials_detected_from_inferred_set_size() {
        use Condition::SocialMotivated as SM;
        let mut rows = Vec::new();
        // Two agents per wave, so the judgment sets have size 2 and a tie
        // means one green judgment observed.
        for (trial, k) in [(0u32, 1u32), (1, 2), (2, 0), (3, 1)] {
            let presented = if k >= 1 { Color::Green } else { Color::Blue };
            let count = k.max(2 - k);
            for a in 0..2u32 {
                rows.push(fixture_row(
                    SM,
                    0,
                    2,
                    trial,
                    a,
                    if a == 0 { Color::Green } else { Color::Blue },
                    52,
                    true,
                    Some((k, presented, count)),
                ));
            }
        }
        let trace = ExperimentTrace::new(rows).unwrap();
        let ties = tie_trial_rows(&trace).unwrap();
        assert_eq!(ties.len(), 4); // trials 0 and 3, two agents each
        assert!(ties.iter().all(|t| t.majority_green));
        assert_eq!(ties.iter().filter(|t| t.bias_green).count(), 2);
        let table = condition_summaries(&trace, TracePartition::TieTrialsOnly).unwrap();
        assert_eq!(table.pooled[0].n, 4);
    }

    #[test]
    fn compare_conditions_detects_a_large_gap() {
        use Condition::{AsocialMotivated as AM, SocialMotivated as SM};
        let mut rows = Vec::new();
        // 160 rows per condition, color-balanced, bias 0.25 vs 0.75.
        for (cond, bias_rate) in [(AM, 0.25f64), (SM, 0.75f64)] {
            for i in 0..160u32 {
                let motivated = if i % 2 == 0 { Color::Green } else { Color::Blue };
                let biased = (i as f64 / 160.0) < bias_rate;
                let chose_green = biased == (motivated == Color::Green);
                let network = (i / 2) % 2;
                let observed = if cond == SM { Some((4, Color::Green, 4)) } else { None };
                rows.push(fixture_row(cond, network, 1, i / 4, i % 4, motivated, 52, chose_green, observed));
            }
        }
        let trace = ExperimentTrace::new(rows).unwrap();
        let test = compare_conditions(&trace, AM, SM, Metric::Bias, false).unwrap();
        assert_relative_eq!(test.prop_a, 0.25);
        assert_relative_eq!(test.prop_b, 0.75);
        assert!(test.p_value < 1e-6);
        assert_eq!(test.stars, "***");
        // The per-network fixed-effect variant reaches the same conclusion
        // (networks are balanced, so the statistic barely moves).
        let fe = compare_conditions(&trace, AM, SM, Metric::Bias, true).unwrap();
        assert!(fe.p_value < 1e-6);
        assert!((fe.chi_square - test.chi_square).abs() < 1.0);
    }

    #[test]
    fn priming_null_calibration() {
        // [DERIVED] with the presented color assigned by an independent
        // coin and choices driven by motivation alone, the priming test
        // should reject at ~5%. 200 replicates; 3-SE tolerance.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let replicates = 200;
        let mut rejections = 0;
        for _ in 0..replicates {
            let rows: Vec<TieTrialRow> = (0..400)
                .map(|i| {
                    let bias_green = i % 2 == 0;
                    let p = if bias_green { 0.65 } else { 0.35 };
                    TieTrialRow {
                        condition: Condition::SocialMotivated,
                        chose_green: rng.gen::<f64>() < p,
                        bias_green,
                        majority_green: rng.gen::<bool>(),
                        stimulus_level: 50,
                    }
                })
                .collect();
            if priming_test(&rows).unwrap().p_value < 0.05 {
                rejections += 1;
            }
        }
        let rate = rejections as f64 / replicates as f64;
        let se = (0.05f64 * 0.95 / replicates as f64).sqrt();
        assert!((rate - 0.05).abs() <= 3.0 * se, "null priming rejection rate {rate}");
    }

    #[test]
    fn priming_detects_a_real_presented_color_effect() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let rows: Vec<TieTrialRow> = (0..600)
            .map(|i| {
                let bias_green = i % 2 == 0;
                let majority_green = rng.gen::<bool>();
                let eta = if bias_green { 0.4 } else { -0.4 }
                    + if majority_green { 0.8 } else { -0.8 };
                TieTrialRow {
                    condition: Condition::SocialControl,
                    chose_green: rng.gen::<f64>() < sigmoid(eta),
                    bias_green,
                    majority_green,
                    stimulus_level: 50,
                }
            })
            .collect();
        let result = priming_test(&rows).unwrap();
        assert!(result.p_value < 0.001, "p = {}", result.p_value);
    }
}
