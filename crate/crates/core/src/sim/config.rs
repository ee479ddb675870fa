//! Experiment configuration: schema, validation, defaults, and presets.
//!
//! Configs are JSON with a closed schema (unknown keys rejected) and
//! field-path error messages. [`ExperimentConfig::resolve`] fills every
//! omitted map entry from the published defaults so a resolved config is
//! fully explicit: serializing it and loading the result is the identity.

use crate::error::{Error, Result};
use crate::trace::Condition;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Generative model for one condition's agents: a per-agent bias drawn
/// from Normal(`mu_b`, `sigma_b`), a choice intercept, one stimulus
/// coefficient per level, and (for social conditions) a weight on the
/// centered count of observed green judgments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleParams {
    /// Population mean of the motivated bias.
    pub mu_b: f64,
    /// Population standard deviation of the bias (> 0).
    pub sigma_b: f64,
    /// Choice intercept, in the green frame.
    #[serde(default)]
    pub constant_c: f64,
    /// Stimulus coefficients, aligned with the config's stimulus levels.
    pub gamma_levels: Vec<f64>,
    /// Weight on (observed green count − n/2); social conditions only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vote_weight_v: Option<f64>,
}

impl OracleParams {
    /// Fitted asocial-oracle parameters from the source experiment
    /// (bias mean 0.26, bias SD 0.075, four stimulus coefficients), with
    /// a zero intercept since none is reported.
    pub fn fitted_asocial() -> Self {
        OracleParams {
            mu_b: 0.26,
            sigma_b: 0.075,
            constant_c: 0.0,
            gamma_levels: vec![-0.447, -0.229, 0.401, 0.703],
            vote_weight_v: None,
        }
    }

    /// Fitted social-oracle parameters (bias mean 0.371, bias SD 0.465,
    /// vote weight 0.232), zero intercept.
    pub fn fitted_social() -> Self {
        OracleParams {
            mu_b: 0.371,
            sigma_b: 0.465,
            constant_c: 0.0,
            gamma_levels: vec![-0.482, -0.14, 0.518, 0.613],
            vote_weight_v: Some(0.232),
        }
    }

    /// This oracle with the population bias removed (control conditions:
    /// same stimulus response, no motivated pull).
    pub fn unbiased(mut self) -> Self {
        self.mu_b = 0.0;
        self
    }

    fn validate(&self, path: &str, condition: Condition, n_levels: usize) -> Result<()> {
        let field = |f: &str| format!("{path}.{f}");
        if !self.mu_b.is_finite() {
            return Err(Error::config(field("mu_b"), "must be finite"));
        }
        if !(self.sigma_b.is_finite() && self.sigma_b > 0.0) {
            return Err(Error::config(
                field("sigma_b"),
                format!("must be a positive real, got {}", self.sigma_b),
            ));
        }
        if !self.constant_c.is_finite() {
            return Err(Error::config(field("constant_c"), "must be finite"));
        }
        if self.gamma_levels.len() != n_levels {
            return Err(Error::config(
                field("gamma_levels"),
                format!(
                    "needs one coefficient per stimulus level ({} levels, got {})",
                    n_levels,
                    self.gamma_levels.len()
                ),
            ));
        }
        if let Some(bad) = self.gamma_levels.iter().find(|g| !g.is_finite()) {
            return Err(Error::config(field("gamma_levels"), format!("non-finite entry {bad}")));
        }
        match (condition.is_social(), self.vote_weight_v) {
            (true, None) => {
                return Err(Error::config(
                    field("vote_weight_v"),
                    "required for social conditions (weight on observed green count)",
                ))
            }
            (false, Some(_)) => {
                return Err(Error::config(
                    field("vote_weight_v"),
                    "asocial conditions observe no judgments; remove the vote weight",
                ))
            }
            (_, Some(v)) if !v.is_finite() => {
                return Err(Error::config(field("vote_weight_v"), "must be finite"))
            }
            _ => {}
        }
        Ok(())
    }
}

/// How marked colors are assigned within a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkComposition {
    /// Every agent in a network shares one marked color; a condition's
    /// networks alternate colors so the split is as even as possible.
    #[default]
    Homogeneous,
    /// Each wave is split evenly between green- and blue-marked agents
    /// (requires an even wave size).
    MixedMarkedColors,
}

/// Sampler settings for the in-loop bias fits of the resampling pipeline
/// (reduced relative to the reported-fit defaults; recorded in the run
/// manifest via the resolved config echo).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InLoopInference {
    /// Chains per in-loop fit.
    #[serde(default = "default_inloop_chains")]
    pub chains: u32,
    /// Total iterations per chain.
    #[serde(default = "default_inloop_iterations")]
    pub iterations: u32,
    /// Warmup iterations discarded per chain.
    #[serde(default = "default_inloop_warmup")]
    pub warmup: u32,
}

fn default_inloop_chains() -> u32 {
    4
}
fn default_inloop_iterations() -> u32 {
    1000
}
fn default_inloop_warmup() -> u32 {
    500
}

impl Default for InLoopInference {
    fn default() -> Self {
        InLoopInference {
            chains: default_inloop_chains(),
            iterations: default_inloop_iterations(),
            warmup: default_inloop_warmup(),
        }
    }
}

impl InLoopInference {
    fn validate(&self) -> Result<()> {
        if self.chains < 2 {
            return Err(Error::config(
                "resampling_inference.chains",
                "needs at least 2 chains for convergence diagnostics",
            ));
        }
        if self.warmup >= self.iterations {
            return Err(Error::config(
                "resampling_inference.warmup",
                format!("warmup {} must be below iterations {}", self.warmup, self.iterations),
            ));
        }
        Ok(())
    }
}

fn default_waves() -> u32 {
    8
}
fn default_agents() -> u32 {
    8
}
fn default_trials() -> u32 {
    8
}
fn default_levels() -> Vec<u32> {
    vec![48, 49, 51, 52]
}

/// Complete description of a simulated experiment.
///
/// Only `networks` is mandatory; every other field has a published
/// default, and the per-condition maps (`yoking`, `oracles`) are filled
/// by [`resolve`](Self::resolve) where a default exists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; every random stream derives from it.
    #[serde(default)]
    pub seed: u64,
    /// Waves per network (default 8).
    #[serde(default = "default_waves")]
    pub waves: u32,
    /// Agents per wave — also the judgment-set size N (default 8).
    #[serde(default = "default_agents")]
    pub agents_per_wave: u32,
    /// Judged stimuli per agent (default 8; must cover the levels evenly).
    #[serde(default = "default_trials")]
    pub trials: u32,
    /// Green-dot counts of the stimuli, strictly increasing, never 50
    /// (default {48, 49, 51, 52} of 100 dots).
    #[serde(default = "default_levels")]
    pub stimulus_levels: Vec<u32>,
    /// Marked-color assignment scheme (default homogeneous networks).
    #[serde(default)]
    pub network_color_composition: NetworkComposition,
    /// Independent networks per condition.
    pub networks: BTreeMap<Condition, u32>,
    /// Which asocial condition seeds each social condition's first wave.
    #[serde(default)]
    pub yoking: BTreeMap<Condition, Condition>,
    /// Generative agent model per condition.
    #[serde(default)]
    pub oracles: BTreeMap<Condition, OracleParams>,
    /// In-loop sampler settings for resampling runs.
    #[serde(default)]
    pub resampling_inference: InLoopInference,
}

impl ExperimentConfig {
    /// The first experiment's shape: four conditions of ten mixed-color
    /// networks, eight trials. Control oracles reuse the motivated fits
    /// with the population bias zeroed (the source reports none).
    pub fn exp1() -> Self {
        let networks: BTreeMap<_, _> = [
            (Condition::AsocialMotivated, 10),
            (Condition::AsocialControl, 10),
            (Condition::SocialMotivated, 10),
            (Condition::SocialControl, 10),
        ]
        .into();
        let oracles: BTreeMap<_, _> = [
            (Condition::AsocialMotivated, OracleParams::fitted_asocial()),
            (Condition::AsocialControl, OracleParams::fitted_asocial().unbiased()),
            (Condition::SocialMotivated, OracleParams::fitted_social()),
            (Condition::SocialControl, OracleParams::fitted_social().unbiased()),
        ]
        .into();
        let config = ExperimentConfig {
            seed: 0,
            waves: 8,
            agents_per_wave: 8,
            trials: 8,
            stimulus_levels: default_levels(),
            network_color_composition: NetworkComposition::MixedMarkedColors,
            networks,
            yoking: BTreeMap::new(),
            oracles,
            resampling_inference: InLoopInference::default(),
        };
        config.resolve().expect("exp1 preset is valid")
    }

    /// The proposed second experiment: asocial, social, and resampling
    /// conditions with fourteen homogeneous networks each and sixteen
    /// trials (four per stimulus level).
    pub fn exp2() -> Self {
        let networks: BTreeMap<_, _> = [
            (Condition::AsocialMotivated, 14),
            (Condition::SocialMotivated, 14),
            (Condition::SocialResampling, 14),
        ]
        .into();
        let config = ExperimentConfig {
            seed: 0,
            waves: 8,
            agents_per_wave: 8,
            trials: 16,
            stimulus_levels: default_levels(),
            network_color_composition: NetworkComposition::Homogeneous,
            networks,
            yoking: BTreeMap::new(),
            oracles: BTreeMap::new(),
            resampling_inference: InLoopInference::default(),
        };
        config.resolve().expect("exp2 preset is valid")
    }

    /// The second experiment reduced to desk scale: four networks per
    /// condition and a lighter in-loop sampler.
    pub fn desk() -> Self {
        let mut config = ExperimentConfig::exp2();
        for count in config.networks.values_mut() {
            *count = 4;
        }
        config.resampling_inference = InLoopInference { chains: 2, iterations: 300, warmup: 150 };
        config.resolve().expect("desk preset is valid")
    }

    /// Fill every omitted per-condition map entry that has a published
    /// default: yoking edges toward the matching asocial condition, and
    /// fitted oracle parameters for the motivated conditions. Control
    /// conditions get no default oracle — the source reports none — so
    /// they must be supplied explicitly. Idempotent; validates the result.
    pub fn resolve(mut self) -> Result<Self> {
        for &condition in self.networks.keys() {
            if condition.is_social() && !self.yoking.contains_key(&condition) {
                let source = match condition {
                    Condition::SocialControl => Condition::AsocialControl,
                    _ => Condition::AsocialMotivated,
                };
                if self.networks.contains_key(&source) {
                    self.yoking.insert(condition, source);
                }
            }
            if !self.oracles.contains_key(&condition) {
                let default = match condition {
                    Condition::AsocialMotivated => Some(OracleParams::fitted_asocial()),
                    Condition::SocialMotivated | Condition::SocialResampling => {
                        Some(OracleParams::fitted_social())
                    }
                    Condition::AsocialControl | Condition::SocialControl => None,
                };
                if let Some(params) = default {
                    self.oracles.insert(condition, params);
                }
            }
        }
        self.validate()?;
        Ok(self)
    }

    /// Check every schema constraint, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        if self.waves < 1 {
            return Err(Error::config("waves", "must be at least 1"));
        }
        if self.agents_per_wave < 1 {
            return Err(Error::config("agents_per_wave", "must be at least 1"));
        }
        if self.network_color_composition == NetworkComposition::MixedMarkedColors
            && self.agents_per_wave % 2 != 0
        {
            return Err(Error::config(
                "agents_per_wave",
                format!(
                    "mixed marked colors split each wave evenly, so the wave size must be even (got {})",
                    self.agents_per_wave
                ),
            ));
        }
        if self.stimulus_levels.is_empty() {
            return Err(Error::config("stimulus_levels", "must not be empty"));
        }
        if !self.stimulus_levels.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::config("stimulus_levels", "must be strictly increasing"));
        }
        if let Some(bad) =
            self.stimulus_levels.iter().find(|&&l| l == 0 || l == 50 || l >= 100)
        {
            return Err(Error::config(
                "stimulus_levels",
                format!("level {bad} has no strict majority among 100 dots (need 1–99, not 50)"),
            ));
        }
        if self.trials < 1 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        if self.trials as usize % self.stimulus_levels.len() != 0 {
            return Err(Error::config(
                "trials",
                format!(
                    "must be a multiple of the {} stimulus levels for balanced coverage (got {})",
                    self.stimulus_levels.len(),
                    self.trials
                ),
            ));
        }
        if self.networks.is_empty() {
            return Err(Error::config("networks", "at least one condition is required"));
        }
        for (&condition, &count) in &self.networks {
            if count < 1 {
                return Err(Error::config(
                    format!("networks.{condition}"),
                    "needs at least 1 network",
                ));
            }
        }
        if self.networks.contains_key(&Condition::SocialResampling)
            && self.network_color_composition == NetworkComposition::MixedMarkedColors
        {
            return Err(Error::config(
                "network_color_composition",
                "the resampling pipeline expects homogeneous networks; \
                 mixed marked colors are not supported with social_resampling",
            ));
        }
        for (&social, &source) in &self.yoking {
            let path = format!("yoking.{social}");
            if !social.is_social() {
                return Err(Error::config(path, "only social conditions are yoked"));
            }
            if source.is_social() {
                return Err(Error::config(
                    path,
                    format!("yoke source must be an asocial condition, got {source}"),
                ));
            }
            let Some(&targets) = self.networks.get(&social) else {
                return Err(Error::config(path, "condition has no networks"));
            };
            match self.networks.get(&source) {
                None => {
                    return Err(Error::config(
                        path,
                        format!("yoke source {source} has no networks in this config"),
                    ))
                }
                Some(&sources) if sources < targets => {
                    return Err(Error::config(
                        path,
                        format!(
                            "{social} has {targets} networks but yoke source {source} only {sources}; \
                             each network is yoked by index"
                        ),
                    ))
                }
                Some(_) => {}
            }
        }
        for &condition in self.networks.keys() {
            if condition.is_social() && !self.yoking.contains_key(&condition) {
                return Err(Error::config(
                    format!("yoking.{condition}"),
                    "social conditions need a yoke source for their first wave",
                ));
            }
            match self.oracles.get(&condition) {
                None => {
                    let hint = if condition.is_motivated() {
                        "no oracle parameters"
                    } else {
                        "control conditions have no published fit; supply oracle parameters"
                    };
                    return Err(Error::config(format!("oracles.{condition}"), hint));
                }
                Some(params) => params.validate(
                    &format!("oracles.{condition}"),
                    condition,
                    self.stimulus_levels.len(),
                )?,
            }
        }
        for condition in self.oracles.keys().chain(self.yoking.keys()) {
            if !self.networks.contains_key(condition) {
                return Err(Error::config(
                    format!("oracles.{condition}"),
                    "refers to a condition with no networks",
                ));
            }
        }
        self.resampling_inference.validate()?;
        Ok(())
    }

    /// Parse a config from JSON, resolve defaults, and validate. Parse
    /// failures carry the dotted path to the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let parsed: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(
                if path == "." { "<root>".to_string() } else { path },
                e.inner().to_string(),
            )
        })?;
        parsed.resolve()
    }

    /// Canonical JSON form of a resolved config: pretty-printed with
    /// sorted condition maps, ending in a newline. Loading this text
    /// reproduces the config exactly.
    pub fn to_canonical_json(&self) -> String {
        let mut text =
            serde_json::to_string_pretty(self).expect("config serialization cannot fail");
        text.push('\n');
        text
    }

    /// Index of a stimulus level within the config's level list.
    pub fn level_index(&self, level: u32) -> Option<usize> {
        self.stimulus_levels.iter().position(|&l| l == level)
    }

    /// Conditions in canonical order.
    pub fn conditions(&self) -> impl Iterator<Item = Condition> + '_ {
        self.networks.keys().copied()
    }
}
