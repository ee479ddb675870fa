//! Wave-structured experiment simulator.
//!
//! Runs a planned experiment wave by wave. Each wave's agents judge every
//! trial; under social conditions they first observe the previous wave's
//! judgment set for the same network index (the yoked asocial wave seeds
//! wave 2, the condition's own previous wave everything after). In the
//! self-resampling condition each recipient's display is rebuilt by
//! importance resampling, with the bias model refit on the accumulated
//! trace after every wave to supply the weights.
//!
//! Randomness is organized as addressed substreams of one master seed:
//! every bias draw, choice, tie coin, and resample stream is keyed by
//! (kind, condition, network, wave, trial, agent). Results are therefore
//! reproducible bit for bit and independent of execution order, so
//! sequential and parallel runs produce identical traces.
//!
//! A mirror mode exchanges the roles of the two colors as an exactness
//! diagnostic: marked colors flip, physical stimulus levels complement,
//! the oracle's constant and level effects negate (with level effects
//! swapped to their complementary slots), and choice and tie decisions
//! use the antithetic functional `¬(u < σ(−η))` in place of
//! `u < σ(η)`. Both functionals draw from the same Bernoulli law, and
//! because every term of the linear predictor negates exactly under the
//! exchange (negation is exact and IEEE rounding is sign-symmetric), the
//! mirrored outcome is the exact complement of the base outcome for
//! every uniform. A mirrored run must therefore reproduce the base run
//! with colors exchanged, row for row. Bias and resample streams are
//! color-frame-free and are never transformed; mirror mode requires a
//! complement-closed stimulus grid and no self-resampling condition
//! (in-loop refits are not color-antisymmetric).

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::inference::{
    fit_posterior, InferenceDataset, InferenceRow, McmcConfig, ModelSpec, ModelVariant,
    NutsOptions,
};
use crate::judgment::{recode_bias, Color, SocialSignal};
use crate::math::sigmoid;
use crate::resample::{
    normalize_weights, presented_signal_with_uniform, resample_for_recipient, JudgmentRecord,
    JudgmentSet, PresentedSignal, WeightVector,
};
use crate::seed::{self, tag};
use crate::trace::{Condition, ExperimentTrace, TraceRow, ALL_CONDITIONS};

use super::config::{ExperimentConfig, OracleParams};
use super::plan::{agent_id_for, assigned_color, AgentProfile, ExperimentPlan};

/// Options controlling one simulated experiment run.
#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Execution mode for per-network work and in-loop fits.
    pub exec: ExecMode,
    /// Identifier stamped on every trace row.
    pub simulation_id: u32,
    /// Overrides the config's master seed when set (used by replicated
    /// power runs, which derive one master seed per simulation).
    pub master_seed: Option<u64>,
    /// Run the color-exchanged mirror of the experiment.
    pub mirror: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { exec: ExecMode::default(), simulation_id: 0, master_seed: None, mirror: false }
    }
}

/// Audit counters accumulated over resampling displays and in-loop fits.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ResampleAudit {
    /// Judgment sets whose weights needed the denominator floor.
    pub floored_sets: u64,
    /// Judgment sets whose weights degenerated to the uniform fallback.
    pub uniform_fallback_sets: u64,
    /// Convergence warnings from in-loop fits, tagged with their wave.
    pub fit_warnings: Vec<String>,
}

impl ResampleAudit {
    fn merge(&mut self, other: ResampleAudit) {
        self.floored_sets += other.floored_sets;
        self.uniform_fallback_sets += other.uniform_fallback_sets;
        self.fit_warnings.extend(other.fit_warnings);
    }
}

/// Posterior-mean point estimates extracted from an in-loop fit, keyed
/// for display reweighting.
#[derive(Debug, Clone, Default)]
pub struct FitEstimates {
    /// Population-mean bias, the fallback for unseen judges.
    pub mu_b: f64,
    /// Per-judge bias estimates by agent identifier.
    pub b_by_id: HashMap<String, f64>,
    /// Level effects by stimulus level.
    pub gamma_by_level: BTreeMap<u32, f64>,
}

/// One agent's judgment as carried forward to the next wave's displays.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetJudgment {
    /// Judging agent.
    pub agent_id: String,
    /// Whether the judge's marked color is green.
    pub marked_green: bool,
    /// The judgment itself.
    pub chose_green: bool,
}

/// Judgments of one wave of one network for one trial, in agent order.
pub type TrialSet = Vec<SetJudgment>;

/// Trial sets produced by a wave, keyed by (condition, network).
pub type WaveSets = BTreeMap<(Condition, u32), Vec<TrialSet>>;

/// Everything one simulated wave yields.
#[derive(Debug, Clone)]
pub struct WaveYield {
    /// Trace rows for every fresh agent simulated in the wave.
    pub rows: Vec<TraceRow>,
    /// The wave's judgment sets, consumed by the next wave.
    pub sets: WaveSets,
    /// Resampling audit counters for the wave.
    pub audit: ResampleAudit,
}

/// A full experiment run: the canonical trace plus audit counters.
#[derive(Debug, Clone)]
pub struct RunOutput {
    /// All rows, canonically sorted.
    pub trace: ExperimentTrace,
    /// Resampling and in-loop fit audit.
    pub audit: ResampleAudit,
}

/// Stable stream code for a condition: its position in the canonical
/// condition order.
fn cond_code(condition: Condition) -> u64 {
    ALL_CONDITIONS
        .iter()
        .position(|&c| c == condition)
        .expect("every condition appears in the canonical order") as u64
}

/// Linear predictor η for one judgment: constant + level effect +
/// marked-color-recoded bias + optionally the weighted centered social
/// signal. Errors when the level index is out of range or a signal is
/// supplied to an oracle without a vote weight.
pub fn linear_predictor(
    oracle: &OracleParams,
    level_index: usize,
    bias: f64,
    marked_color: Color,
    signal: Option<SocialSignal>,
) -> Result<f64> {
    let gamma = *oracle.gamma_levels.get(level_index).ok_or_else(|| {
        Error::invalid(format!(
            "level index {level_index} out of range for an oracle with {} level effects",
            oracle.gamma_levels.len()
        ))
    })?;
    let mut eta = oracle.constant_c + gamma + recode_bias(bias, marked_color);
    if let Some(signal) = signal {
        let v = oracle.vote_weight_v.ok_or_else(|| {
            Error::invalid("a social signal was supplied but the oracle has no vote weight")
        })?;
        eta += v * signal.centered();
    }
    Ok(eta)
}

/// Probability of a green judgment under oracle parameters.
pub fn choice_probability(
    oracle: &OracleParams,
    level_index: usize,
    bias: f64,
    marked_color: Color,
    signal: Option<SocialSignal>,
) -> Result<f64> {
    linear_predictor(oracle, level_index, bias, marked_color, signal).map(sigmoid)
}

/// Shared per-run state: the plan, the resolved master seed, and the
/// (possibly color-exchanged) per-condition oracles.
struct World<'p> {
    plan: &'p ExperimentPlan,
    seed: u64,
    simulation_id: u32,
    mirror: bool,
    oracles: BTreeMap<Condition, OracleParams>,
}

impl<'p> World<'p> {
    fn new(plan: &'p ExperimentPlan, options: &RunOptions) -> Result<Self> {
        let config = plan.config();
        if options.mirror {
            if config.networks.keys().any(|c| c.is_resampling()) {
                return Err(Error::invalid(
                    "mirror mode is undefined for self-resampling conditions: in-loop refits \
                     are not color-antisymmetric",
                ));
            }
            for &level in &config.stimulus_levels {
                if config.level_index(100 - level).is_none() {
                    return Err(Error::invalid(format!(
                        "mirror mode needs a complement-closed stimulus grid; level {level} \
                         has no partner {}",
                        100 - level
                    )));
                }
            }
        }
        let mut oracles = BTreeMap::new();
        for &condition in config.networks.keys() {
            let base = &config.oracles[&condition];
            let oracle =
                if options.mirror { mirrored_oracle(config, base) } else { base.clone() };
            oracles.insert(condition, oracle);
        }
        Ok(World {
            plan,
            seed: options.master_seed.unwrap_or(config.seed),
            simulation_id: options.simulation_id,
            mirror: options.mirror,
            oracles,
        })
    }

    fn marked(&self, color: Color) -> Color {
        if self.mirror {
            color.other()
        } else {
            color
        }
    }

    fn physical_level(&self, level: u32) -> u32 {
        if self.mirror {
            100 - level
        } else {
            level
        }
    }

    /// Bernoulli(σ(η)) from a unit uniform. The mirrored functional
    /// draws from the same law and complements the base outcome exactly
    /// whenever the mirrored η is the exact negation of the base η.
    fn bernoulli_logit(&self, u: f64, eta: f64) -> bool {
        if self.mirror {
            !(u < sigmoid(-eta))
        } else {
            u < sigmoid(eta)
        }
    }

    /// Fair green/blue coin from a unit uniform, antithetic under
    /// mirroring.
    fn coin_green(&self, u: f64) -> bool {
        if self.mirror {
            u >= 0.5
        } else {
            u < 0.5
        }
    }
}

/// Color-exchanged oracle: the constant negates and each level effect
/// negates and moves to its complementary level's slot. Bias parameters
/// are expressed in the marked-color frame and carry over unchanged.
fn mirrored_oracle(config: &ExperimentConfig, oracle: &OracleParams) -> OracleParams {
    let gamma_levels = config
        .stimulus_levels
        .iter()
        .map(|&level| {
            let source = config
                .level_index(100 - level)
                .expect("mirror validation guarantees complement closure");
            -oracle.gamma_levels[source]
        })
        .collect();
    OracleParams {
        mu_b: oracle.mu_b,
        sigma_b: oracle.sigma_b,
        constant_c: -oracle.constant_c,
        gamma_levels,
        vote_weight_v: oracle.vote_weight_v,
    }
}

/// Resolved tie coin encoded as a degenerate uniform for the display
/// builder, which breaks ties on `u < 0.5`.
fn coin_as_uniform(green: bool) -> f64 {
    if green {
        0.0
    } else {
        1.0
    }
}

/// What a wave's agents observe on one trial.
enum Observation {
    /// Asocial: nothing.
    None,
    /// One shared display built from the upstream set.
    Shared { k: u32, signal: PresentedSignal },
    /// Per-recipient importance-resampled displays.
    Resampled { set: JudgmentSet, weights: WeightVector },
}

/// Build the importance-weighted judgment set a resampling display draws
/// from, using fitted point estimates for the judges' biases and the
/// trial's level effect.
fn weighted_set(
    judged: &[SetJudgment],
    trial: u32,
    level: u32,
    estimates: &FitEstimates,
) -> Result<(JudgmentSet, WeightVector)> {
    let gamma = estimates.gamma_by_level.get(&level).copied().ok_or_else(|| {
        Error::invalid(format!("in-loop fit carries no level effect for stimulus level {level}"))
    })?;
    let mut records = Vec::with_capacity(judged.len());
    for judgment in judged {
        let bias =
            estimates.b_by_id.get(&judgment.agent_id).copied().unwrap_or(estimates.mu_b);
        let marked = if judgment.marked_green { Color::Green } else { Color::Blue };
        let q_green = sigmoid(gamma + recode_bias(bias, marked));
        let p_green = sigmoid(gamma);
        records.push(JudgmentRecord::new(
            judgment.agent_id.clone(),
            trial,
            judgment.chose_green,
            q_green,
            p_green,
        )?);
    }
    let set = JudgmentSet::new(records)?;
    let weights = normalize_weights(&set);
    Ok((set, weights))
}

/// Simulate one (condition, network) unit for one wave.
fn simulate_unit(
    world: &World<'_>,
    condition: Condition,
    network: u32,
    wave: u32,
    upstream: Option<&[TrialSet]>,
    estimates: Option<&FitEstimates>,
) -> Result<(Vec<TraceRow>, Vec<TrialSet>, ResampleAudit)> {
    let config = world.plan.config();
    let oracle = &world.oracles[&condition];
    let code = cond_code(condition);
    let net = u64::from(network);
    let w = u64::from(wave);
    let social = condition.is_social() && wave >= 2;
    let resampling = condition.is_resampling() && wave >= 2;
    let n_agents = config.agents_per_wave;
    let mut audit = ResampleAudit::default();

    // Draw the wave's agents. Bias streams are keyed without the trial
    // and are never mirrored: the bias is expressed in the marked-color
    // frame, so the same draw serves both orientations.
    let mut profiles = Vec::with_capacity(n_agents as usize);
    for index in 0..n_agents {
        let marked = world.marked(assigned_color(config, network, index));
        let mut rng =
            seed::rng_for(world.seed, &[tag::BIAS, code, net, w, u64::from(index)]);
        let z: f64 = rng.sample(StandardNormal);
        profiles.push(AgentProfile {
            id: agent_id_for(condition, network, wave, index),
            motivated_color: marked,
            marked_color: marked,
            bias_b: oracle.mu_b + oracle.sigma_b * z,
            wave,
            network,
            condition,
        });
    }

    let mut rows = Vec::with_capacity((config.trials * n_agents) as usize);
    let mut sets = Vec::with_capacity(config.trials as usize);
    for trial in 0..config.trials {
        let t = u64::from(trial);
        let level = world.physical_level(world.plan.trial_level(trial));
        let level_index = config.level_index(level).ok_or_else(|| {
            Error::invalid(format!("stimulus level {level} is not on the configured grid"))
        })?;

        let observation = if !social {
            Observation::None
        } else {
            let source = upstream.ok_or_else(|| {
                Error::invalid(format!(
                    "social condition {condition} at wave {wave} has no upstream judgment \
                     sets; simulate waves in order"
                ))
            })?;
            let judged = source.get(trial as usize).ok_or_else(|| {
                Error::invalid(format!(
                    "upstream wave holds {} trials but trial {trial} was requested",
                    source.len()
                ))
            })?;
            if resampling {
                let estimates = estimates.ok_or_else(|| {
                    Error::invalid(format!(
                        "resampling displays at wave {wave} need in-loop estimates fitted \
                         after wave {}",
                        wave - 1
                    ))
                })?;
                let (set, weights) = weighted_set(judged, trial, level, estimates)?;
                audit.floored_sets += u64::from(weights.floored);
                audit.uniform_fallback_sets += u64::from(weights.uniform_fallback);
                Observation::Resampled { set, weights }
            } else {
                // One shared display per trial: everyone in the wave sees
                // the same upstream set, tie broken by one shared coin.
                let judgments: Vec<bool> = judged.iter().map(|j| j.chose_green).collect();
                let k = judgments.iter().filter(|&&green| green).count() as u32;
                let mut rng = seed::rng_for(world.seed, &[tag::TIE, code, net, w, t]);
                let coin = world.coin_green(rng.gen::<f64>());
                let signal =
                    presented_signal_with_uniform(&judgments, Color::Green, coin_as_uniform(coin))?;
                Observation::Shared { k, signal }
            }
        };

        let mut trial_set = Vec::with_capacity(n_agents as usize);
        for (index, profile) in profiles.iter().enumerate() {
            let agent = index as u64;
            let (observed_k, presented) = match &observation {
                Observation::None => (None, None),
                Observation::Shared { k, signal } => (Some(*k), Some(signal.clone())),
                Observation::Resampled { set, weights } => {
                    let mut rng = seed::rng_for(
                        world.seed,
                        &[tag::RESAMPLE, code, net, w, t, agent],
                    );
                    let drawn = resample_for_recipient(set, weights, &mut rng)?;
                    let judgments: Vec<bool> =
                        drawn.judgments(set).map(|r| r.chose_green).collect();
                    let k = drawn.green_count(set);
                    let mut tie_rng =
                        seed::rng_for(world.seed, &[tag::TIE, code, net, w, t, agent]);
                    let coin = world.coin_green(tie_rng.gen::<f64>());
                    let signal = presented_signal_with_uniform(
                        &judgments,
                        profile.marked_color,
                        coin_as_uniform(coin),
                    )?;
                    (Some(k), Some(signal))
                }
            };
            let signal_term =
                observed_k.map(|k| SocialSignal::new(k, n_agents)).transpose()?;
            let eta = linear_predictor(
                oracle,
                level_index,
                profile.bias_b,
                profile.marked_color,
                signal_term,
            )?;
            let mut rng =
                seed::rng_for(world.seed, &[tag::CHOICE, code, net, w, t, agent]);
            let chose_green = world.bernoulli_logit(rng.gen::<f64>(), eta);
            let marked_green = profile.marked_color == Color::Green;
            rows.push(TraceRow {
                simulation_id: world.simulation_id,
                condition,
                network,
                wave,
                trial,
                stimulus_level: level,
                agent_id: profile.id.clone(),
                motivated_color: profile.motivated_color,
                observed_k,
                presented_color: presented.as_ref().map(|p| p.color),
                presented_count: presented.as_ref().map(|p| p.count),
                chose_green,
                chose_motivated: chose_green == marked_green,
                chose_correct: chose_green == (level > 50),
                resampled: resampling,
            });
            trial_set.push(SetJudgment {
                agent_id: profile.id.clone(),
                marked_green,
                chose_green,
            });
        }
        sets.push(trial_set);
    }
    Ok((rows, sets, audit))
}

/// Simulate one wave across every unit (condition × network) with fresh
/// agents at that wave. `upstream` must hold the previous wave's trial
/// sets for each social unit's source network, and `estimates` the
/// latest in-loop fit whenever a resampling condition is present at
/// `wave ≥ 2`.
pub fn simulate_wave(
    plan: &ExperimentPlan,
    wave: u32,
    upstream: &WaveSets,
    estimates: Option<&FitEstimates>,
    options: &RunOptions,
) -> Result<WaveYield> {
    let config = plan.config();
    if wave == 0 || wave > config.waves {
        return Err(Error::invalid(format!(
            "wave {wave} outside the configured range 1..={}",
            config.waves
        )));
    }
    let world = World::new(plan, options)?;
    let units: Vec<(Condition, u32)> = config
        .networks
        .iter()
        .flat_map(|(&condition, &count)| (0..count).map(move |network| (condition, network)))
        .filter(|&(condition, _)| !(condition.is_social() && wave == 1))
        .collect();
    let yields = exec::try_map_indexed(options.exec, units.len(), |i| {
        let (condition, network) = units[i];
        let source = match plan.upstream(condition, wave) {
            None => None,
            Some((source_condition, _)) => Some(
                upstream
                    .get(&(source_condition, network))
                    .map(Vec::as_slice)
                    .ok_or_else(|| {
                        Error::invalid(format!(
                            "no upstream judgment sets for {source_condition} network \
                             {network}; simulate waves in order"
                        ))
                    })?,
            ),
        };
        simulate_unit(&world, condition, network, wave, source, estimates)
    })?;
    let mut rows = Vec::new();
    let mut sets = WaveSets::new();
    let mut audit = ResampleAudit::default();
    for ((condition, network), (unit_rows, unit_sets, unit_audit)) in
        units.into_iter().zip(yields)
    {
        rows.extend(unit_rows);
        sets.insert((condition, network), unit_sets);
        audit.merge(unit_audit);
    }
    Ok(WaveYield { rows, sets, audit })
}

/// Refit the bias model on the trace accumulated so far: after wave 1 on
/// every asocial wave-1 row, after wave w ≥ 2 on every social-condition
/// row of wave w (the participants whose judgments the next wave's
/// displays resample). Returns posterior-mean point estimates.
fn in_loop_fit(
    plan: &ExperimentPlan,
    rows: &[TraceRow],
    wave: u32,
    master_seed: u64,
    mode: ExecMode,
) -> Result<(FitEstimates, Vec<String>)> {
    let config = plan.config();
    let selected: Vec<InferenceRow> = rows
        .iter()
        .filter(|r| {
            if wave == 1 {
                r.wave == 1 && !r.condition.is_social()
            } else {
                r.wave == wave && r.condition.is_social()
            }
        })
        .map(|r| InferenceRow {
            participant_id: r.agent_id.clone(),
            stimulus_level: r.stimulus_level,
            chose_green: r.chose_green,
            motivated_color: r.motivated_color,
            social_k: None,
        })
        .collect();
    let context = |e: Error| Error::invalid(format!("in-loop fit after wave {wave}: {e}"));
    let data = InferenceDataset::new(selected, None).map_err(context)?;
    let spec = ModelSpec::new(ModelVariant::Resampling);
    let mcmc = McmcConfig {
        chains: config.resampling_inference.chains,
        iterations: config.resampling_inference.iterations,
        warmup: config.resampling_inference.warmup,
        seed: seed::derive(master_seed, &[tag::FIT, u64::from(wave)]),
        options: NutsOptions::default(),
    };
    let fit = fit_posterior(&spec, &data, &mcmc, mode).map_err(context)?;
    let mut estimates = FitEstimates::default();
    for summary in &fit.summaries {
        if summary.name == "mu_b" {
            estimates.mu_b = summary.mean;
        } else if let Some(id) =
            summary.name.strip_prefix("b[").and_then(|s| s.strip_suffix(']'))
        {
            estimates.b_by_id.insert(id.to_string(), summary.mean);
        } else if let Some(level) =
            summary.name.strip_prefix("gamma[").and_then(|s| s.strip_suffix(']'))
        {
            let level: u32 = level.parse().map_err(|_| {
                Error::invalid(format!("unparseable level in posterior name {}", summary.name))
            })?;
            estimates.gamma_by_level.insert(level, summary.mean);
        }
    }
    let warnings = fit
        .warnings
        .iter()
        .map(|warning| format!("in-loop fit after wave {wave}: {warning}"))
        .collect();
    Ok((estimates, warnings))
}

/// Run a full planned experiment: the wave loop, in-loop refits when a
/// resampling condition is present, and canonical trace assembly.
pub fn run_experiment(plan: &ExperimentPlan, options: &RunOptions) -> Result<RunOutput> {
    let config = plan.config();
    let has_resampling = config.networks.keys().any(|c| c.is_resampling());
    let master_seed = options.master_seed.unwrap_or(config.seed);
    let mut previous = WaveSets::new();
    let mut rows: Vec<TraceRow> = Vec::new();
    let mut audit = ResampleAudit::default();
    let mut estimates: Option<FitEstimates> = None;
    for wave in 1..=config.waves {
        let yielded = simulate_wave(plan, wave, &previous, estimates.as_ref(), options)?;
        rows.extend(yielded.rows);
        previous = yielded.sets;
        audit.merge(yielded.audit);
        if has_resampling && wave < config.waves {
            let (fit, warnings) = in_loop_fit(plan, &rows, wave, master_seed, options.exec)?;
            audit.fit_warnings.extend(warnings);
            estimates = Some(fit);
        }
    }
    let mut trace = ExperimentTrace::new(rows)?;
    trace.sort_canonical();
    Ok(RunOutput { trace, audit })
}
