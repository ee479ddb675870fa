//! Replicated-experiment power analysis.
//!
//! Runs a configured experiment many times under independent master
//! seeds and scores a set of directional hypotheses on every run. A
//! hypothesis is *confirmed* in a run when the observed condition rates
//! order the predicted way; the likelihood-ratio statistic and p-value
//! of the corresponding two-condition comparison are recorded alongside
//! for reporting, but confirmation itself is purely directional. Per-run
//! failures (a diverged fit, a degenerate comparison) are recorded as
//! unconfirmed rows with an error message rather than aborting the
//! whole analysis.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::seed::{self, tag};
use crate::stats::{compare_conditions, Metric};
use crate::trace::Condition;

use super::config::ExperimentConfig;
use super::plan::build_experiment;
use super::run::{run_experiment, RunOptions, RunOutput};

/// Predicted ordering of the favored condition relative to baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Favored strictly above baseline.
    Greater,
    /// Favored strictly below baseline.
    Less,
    /// Favored at least at baseline (a preservation claim).
    GreaterOrEqual,
}

/// One directional hypothesis about two conditions on one metric.
#[derive(Debug, Clone, Serialize)]
pub struct HypothesisSpec {
    /// Stable identifier used in report rows.
    pub id: String,
    /// Outcome compared.
    pub metric: Metric,
    /// Condition the hypothesis favors.
    pub favored: Condition,
    /// Reference condition.
    pub baseline: Condition,
    /// Predicted ordering of favored versus baseline.
    pub direction: Direction,
}

/// The toolkit's standard hypothesis suite: social observation amplifies
/// motivated choice, display resampling removes the amplification, and
/// resampling does not cost accuracy relative to asocial judgment.
pub fn default_hypotheses() -> Vec<HypothesisSpec> {
    vec![
        HypothesisSpec {
            id: "social_amplification".to_string(),
            metric: Metric::Bias,
            favored: Condition::SocialMotivated,
            baseline: Condition::AsocialMotivated,
            direction: Direction::Greater,
        },
        HypothesisSpec {
            id: "resampling_debiases".to_string(),
            metric: Metric::Bias,
            favored: Condition::SocialResampling,
            baseline: Condition::SocialMotivated,
            direction: Direction::Less,
        },
        HypothesisSpec {
            id: "accuracy_preserved".to_string(),
            metric: Metric::Accuracy,
            favored: Condition::SocialResampling,
            baseline: Condition::AsocialMotivated,
            direction: Direction::GreaterOrEqual,
        },
    ]
}

/// Outcome of one hypothesis in one simulated run.
#[derive(Debug, Clone, Serialize)]
pub struct PowerRow {
    /// Which replicated run.
    pub simulation_id: u32,
    /// Which hypothesis.
    pub hypothesis_id: String,
    /// LR statistic of the two-condition comparison, when it ran.
    pub statistic: Option<f64>,
    /// Upper-tail p-value of that comparison, when it ran.
    pub p_value: Option<f64>,
    /// Whether the rates ordered the predicted way.
    pub confirmed: bool,
    /// Failure description when the run or comparison errored.
    pub error: Option<String>,
}

/// Aggregated power-analysis results.
#[derive(Debug, Clone, Serialize)]
pub struct PowerReport {
    /// One row per (simulation, hypothesis).
    pub rows: Vec<PowerRow>,
    /// Number of replicated runs.
    pub n_simulations: u32,
    /// Confirmed fraction per hypothesis (errors count as unconfirmed).
    pub confirmed_fraction: BTreeMap<String, f64>,
    /// Fraction of runs confirming every hypothesis at once; `None` when
    /// no runs were requested.
    pub all_confirmed_fraction: Option<f64>,
}

/// Run the experiment `n_simulations` times and score `hypotheses` on
/// each run. Every run derives its own master seed from the config seed,
/// so the replicate set is reproducible and insensitive to execution
/// order.
pub fn run_power_analysis(
    config: &ExperimentConfig,
    n_simulations: u32,
    hypotheses: &[HypothesisSpec],
    mode: ExecMode,
) -> Result<PowerReport> {
    if hypotheses.is_empty() {
        return Err(Error::invalid("power analysis needs at least one hypothesis"));
    }
    let plan = build_experiment(config.clone())?;
    let config = plan.config();
    for hypothesis in hypotheses {
        for condition in [hypothesis.favored, hypothesis.baseline] {
            if !config.networks.contains_key(&condition) {
                return Err(Error::invalid(format!(
                    "hypothesis {} needs condition {condition} in the design",
                    hypothesis.id
                )));
            }
        }
    }

    let outcomes: Vec<std::result::Result<RunOutput, String>> =
        exec::map_indexed(mode, n_simulations as usize, |i| {
            let master = seed::derive(config.seed, &[tag::POWER_SIM, i as u64]);
            let options = RunOptions {
                exec: mode,
                simulation_id: i as u32,
                master_seed: Some(master),
                mirror: false,
            };
            run_experiment(&plan, &options).map_err(|e| e.to_string())
        });

    let mut rows = Vec::with_capacity(outcomes.len() * hypotheses.len());
    let mut confirmed_count: BTreeMap<&str, u32> = BTreeMap::new();
    let mut all_confirmed = 0u32;
    for (i, outcome) in outcomes.iter().enumerate() {
        let simulation_id = i as u32;
        let mut run_all_confirmed = true;
        for hypothesis in hypotheses {
            let row = match outcome {
                Err(message) => PowerRow {
                    simulation_id,
                    hypothesis_id: hypothesis.id.clone(),
                    statistic: None,
                    p_value: None,
                    confirmed: false,
                    error: Some(format!("run failed: {message}")),
                },
                Ok(output) => score_hypothesis(output, simulation_id, hypothesis),
            };
            if row.confirmed {
                *confirmed_count.entry(hypothesis.id.as_str()).or_insert(0) += 1;
            } else {
                run_all_confirmed = false;
            }
            rows.push(row);
        }
        if run_all_confirmed {
            all_confirmed += 1;
        }
    }

    let denominator = f64::from(n_simulations);
    let confirmed_fraction = hypotheses
        .iter()
        .map(|h| {
            let count = confirmed_count.get(h.id.as_str()).copied().unwrap_or(0);
            (h.id.clone(), if n_simulations == 0 { 0.0 } else { f64::from(count) / denominator })
        })
        .collect();
    let all_confirmed_fraction =
        (n_simulations > 0).then(|| f64::from(all_confirmed) / denominator);
    Ok(PowerReport { rows, n_simulations, confirmed_fraction, all_confirmed_fraction })
}

/// Score one hypothesis on one finished run: directional confirmation
/// from the observed rates, statistic and p-value from the two-condition
/// likelihood-ratio comparison.
fn score_hypothesis(
    output: &RunOutput,
    simulation_id: u32,
    hypothesis: &HypothesisSpec,
) -> PowerRow {
    match compare_conditions(
        &output.trace,
        hypothesis.baseline,
        hypothesis.favored,
        hypothesis.metric,
        false,
    ) {
        Ok(test) => {
            let confirmed = match hypothesis.direction {
                Direction::Greater => test.prop_b > test.prop_a,
                Direction::Less => test.prop_b < test.prop_a,
                Direction::GreaterOrEqual => test.prop_b >= test.prop_a,
            };
            PowerRow {
                simulation_id,
                hypothesis_id: hypothesis.id.clone(),
                statistic: Some(test.chi_square),
                p_value: Some(test.p_value),
                confirmed,
                error: None,
            }
        }
        Err(error) => PowerRow {
            simulation_id,
            hypothesis_id: hypothesis.id.clone(),
            statistic: None,
            p_value: None,
            confirmed: false,
            error: Some(format!("comparison failed: {error}")),
        },
    }
}
