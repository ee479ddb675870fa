//! Model specifications, datasets, parameter layout, and the log
//! posterior (with analytic gradient) of the hierarchical psychometric
//! models.

use crate::error::{Error, Result};
use crate::judgment::Color;
use crate::math::{ln_normal_pdf, log_sigmoid, sigmoid};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Prior scale (standard deviation) of μ_b.
pub const PRIOR_MU_B_SCALE: f64 = 3.0;
/// Prior scale of log σ_b (σ_b is lognormal(0, 2)).
pub const PRIOR_LOG_SIGMA_B_SCALE: f64 = 2.0;
/// Prior scale of the stimulus coefficients γ for the first experiment's
/// variants.
pub const PRIOR_GAMMA_SCALE_EXP1: f64 = 20.0;
/// Prior scale of γ for the resampling variant.
pub const PRIOR_GAMMA_SCALE_RESAMPLING: f64 = 3.0;
/// Prior scale of the social weight α.
pub const PRIOR_ALPHA_SCALE: f64 = 20.0;

/// Which psychometric model is being fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelVariant {
    /// First experiment, asocial conditions: no social covariate.
    Exp1Asocial,
    /// First experiment, social conditions: adds the weight α on the
    /// centered observed green count.
    Exp1Social,
    /// Resampling-pipeline variant: α omitted, tighter γ prior.
    Resampling,
}

impl ModelVariant {
    /// Whether the model includes the social covariate α·(k − n/2).
    pub fn include_social(self) -> bool {
        matches!(self, ModelVariant::Exp1Social)
    }

    /// Prior scale of the γ coefficients.
    pub fn gamma_scale(self) -> f64 {
        match self {
            ModelVariant::Exp1Asocial | ModelVariant::Exp1Social => PRIOR_GAMMA_SCALE_EXP1,
            ModelVariant::Resampling => PRIOR_GAMMA_SCALE_RESAMPLING,
        }
    }
}

/// How participant biases are pooled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// Full hierarchy: b_j ~ Normal(μ_b, σ_b) per participant.
    #[default]
    Hierarchical,
    /// Every participant shares the single bias μ_b (drops b_j and σ_b;
    /// used to produce low-dimensional instances the quadrature oracle
    /// can check).
    Complete,
}

/// Full specification of a psychometric model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    /// Model variant (covariates and γ prior scale).
    pub variant: ModelVariant,
    /// Bias pooling.
    pub pooling: Pooling,
    /// Hold log σ_b fixed at this value instead of sampling it
    /// (hierarchical pooling only; another oracle-sized reduction).
    pub fixed_log_sigma_b: Option<f64>,
}

impl ModelSpec {
    /// The standard hierarchical model for a variant.
    pub fn new(variant: ModelVariant) -> Self {
        ModelSpec { variant, pooling: Pooling::Hierarchical, fixed_log_sigma_b: None }
    }

    /// Complete-pooling reduction (single shared bias).
    pub fn with_complete_pooling(mut self) -> Self {
        self.pooling = Pooling::Complete;
        self
    }

    /// Fix log σ_b (hierarchical pooling only).
    pub fn with_fixed_log_sigma_b(mut self, log_sigma_b: f64) -> Self {
        self.fixed_log_sigma_b = Some(log_sigma_b);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.pooling == Pooling::Complete && self.fixed_log_sigma_b.is_some() {
            return Err(Error::invalid(
                "complete pooling has no sigma_b to fix; drop fixed_log_sigma_b",
            ));
        }
        if let Some(s) = self.fixed_log_sigma_b {
            if !s.is_finite() {
                return Err(Error::invalid("fixed_log_sigma_b must be finite"));
            }
        }
        Ok(())
    }
}

/// One judgment for inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceRow {
    /// Participant who judged.
    pub participant_id: String,
    /// Green-dot count of the stimulus.
    pub stimulus_level: u32,
    /// Whether they chose green.
    pub chose_green: bool,
    /// Their motivated color.
    pub motivated_color: Color,
    /// Observed green judgments in their social set, if any.
    pub social_k: Option<u32>,
}

/// A validated inference dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceDataset {
    rows: Vec<InferenceRow>,
    participants: Vec<String>,
    levels: Vec<u32>,
    social_set_size: Option<u32>,
    // Precomputed row indices into `participants` / `levels`.
    participant_idx: Vec<usize>,
    level_idx: Vec<usize>,
}

impl InferenceDataset {
    /// Validate and index a dataset.
    ///
    /// `social_set_size` is the judgment-set size n behind `social_k`
    /// (the covariate is centered as k − n/2); it must be present exactly
    /// when rows carry `social_k`, which must be all-or-none. A zero-row
    /// dataset is legal (fits then reproduce the prior).
    pub fn new(rows: Vec<InferenceRow>, social_set_size: Option<u32>) -> Result<Self> {
        let with_k = rows.iter().filter(|r| r.social_k.is_some()).count();
        if with_k != 0 && with_k != rows.len() {
            return Err(Error::InvalidData(format!(
                "social_k must be present on every row or none; found {with_k} of {}",
                rows.len()
            )));
        }
        match (with_k > 0, social_set_size) {
            (true, None) => {
                return Err(Error::InvalidData(
                    "rows carry social_k but no social_set_size was given".into(),
                ))
            }
            (false, Some(_)) if !rows.is_empty() => {
                return Err(Error::InvalidData(
                    "social_set_size given but rows carry no social_k".into(),
                ))
            }
            _ => {}
        }
        if let Some(n) = social_set_size {
            if n == 0 {
                return Err(Error::InvalidData("social_set_size must be at least 1".into()));
            }
            for r in &rows {
                if let Some(k) = r.social_k {
                    if k > n {
                        return Err(Error::InvalidData(format!(
                            "social_k {k} exceeds set size {n} for participant {}",
                            r.participant_id
                        )));
                    }
                }
            }
        }
        let mut participant_map: BTreeMap<&str, usize> = BTreeMap::new();
        let mut level_map: BTreeMap<u32, usize> = BTreeMap::new();
        for r in &rows {
            let next = participant_map.len();
            participant_map.entry(&r.participant_id).or_insert(next);
            let next = level_map.len();
            level_map.entry(r.stimulus_level).or_insert(next);
        }
        // Canonical order: sorted participants and levels.
        let participants: Vec<String> =
            participant_map.keys().map(|s| s.to_string()).collect();
        let levels: Vec<u32> = level_map.keys().copied().collect();
        let participant_pos: BTreeMap<&str, usize> = participants
            .iter()
            .enumerate()
            .map(|(i, p)| (p.as_str(), i))
            .collect();
        let level_pos: BTreeMap<u32, usize> =
            levels.iter().enumerate().map(|(i, &l)| (l, i)).collect();
        let participant_idx =
            rows.iter().map(|r| participant_pos[r.participant_id.as_str()]).collect();
        let level_idx = rows.iter().map(|r| level_pos[&r.stimulus_level]).collect();
        Ok(InferenceDataset {
            rows,
            participants,
            levels,
            social_set_size,
            participant_idx,
            level_idx,
        })
    }

    /// The rows, in input order.
    pub fn rows(&self) -> &[InferenceRow] {
        &self.rows
    }

    /// Sorted distinct participant ids.
    pub fn participants(&self) -> &[String] {
        &self.participants
    }

    /// Sorted distinct stimulus levels.
    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    /// Judgment-set size behind `social_k`, if social.
    pub fn social_set_size(&self) -> Option<u32> {
        self.social_set_size
    }

    /// Whether rows carry the social covariate.
    pub fn is_social(&self) -> bool {
        self.social_set_size.is_some() && !self.rows.is_empty()
    }
}

/// Index map from model parameters to positions in the θ vector.
///
/// Order: μ_b; log σ_b (hierarchical, unless fixed); b_j per participant
/// (hierarchical); γ per stimulus level (sorted); α (social variant).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    spec: ModelSpec,
    n_participants: usize,
    levels: Vec<u32>,
    log_sigma_b: Option<usize>,
    b_start: Option<usize>,
    gamma_start: usize,
    alpha: Option<usize>,
    dim: usize,
}

impl ParamLayout {
    /// Build the layout for a spec/dataset pair, validating consistency.
    pub fn new(spec: &ModelSpec, data: &InferenceDataset) -> Result<Self> {
        spec.validate()?;
        if spec.variant.include_social() != data.is_social() {
            return Err(Error::InvalidData(format!(
                "model variant {:?} and dataset disagree on the social covariate",
                spec.variant
            )));
        }
        let hierarchical = spec.pooling == Pooling::Hierarchical;
        let j = data.participants().len();
        let mut next = 1; // mu_b at 0
        let log_sigma_b = (hierarchical && spec.fixed_log_sigma_b.is_none()).then(|| {
            let i = next;
            next += 1;
            i
        });
        let b_start = hierarchical.then(|| {
            let i = next;
            next += j;
            i
        });
        let gamma_start = next;
        next += data.levels().len();
        let alpha = spec.variant.include_social().then(|| {
            let i = next;
            next += 1;
            i
        });
        Ok(ParamLayout {
            spec: *spec,
            n_participants: j,
            levels: data.levels().to_vec(),
            log_sigma_b,
            b_start,
            gamma_start,
            alpha,
            dim: next,
        })
    }

    /// Total parameter count.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The model spec the layout was built for.
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// Index of μ_b.
    pub fn mu_b(&self) -> usize {
        0
    }

    /// Index of log σ_b, when sampled.
    pub fn log_sigma_b(&self) -> Option<usize> {
        self.log_sigma_b
    }

    /// Index of participant `j`'s bias, when individual biases exist.
    pub fn b(&self, j: usize) -> Option<usize> {
        self.b_start.map(|s| s + j)
    }

    /// Index of the γ for the `d`-th sorted stimulus level.
    pub fn gamma(&self, d: usize) -> usize {
        self.gamma_start + d
    }

    /// Index of α, for the social variant.
    pub fn alpha(&self) -> Option<usize> {
        self.alpha
    }

    /// Number of participants with individual biases.
    pub fn n_participants(&self) -> usize {
        self.n_participants
    }

    /// Stimulus levels, sorted, aligned with the γ block.
    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    /// Human-readable names aligned with θ indices.
    pub fn names(&self, participants: &[String]) -> Vec<String> {
        let mut names = vec!["mu_b".to_string()];
        if self.log_sigma_b.is_some() {
            names.push("log_sigma_b".to_string());
        }
        if self.b_start.is_some() {
            for p in participants {
                names.push(format!("b[{p}]"));
            }
        }
        for l in &self.levels {
            names.push(format!("gamma[{l}]"));
        }
        if self.alpha.is_some() {
            names.push("alpha".to_string());
        }
        names
    }
}

/// Precomputed evaluator for the log posterior and its gradient.
///
/// `theta` follows [`ParamLayout`] with the bias block holding the
/// participant biases directly (centered form). The sampler works in a
/// non-centered reparameterization handled by [`super::nuts`]'s target
/// wrapper, which maps to and from this form.
pub struct PosteriorEvaluator<'a> {
    data: &'a InferenceDataset,
    layout: ParamLayout,
    // Per row: sign of the bias recode (+1 green-motivated, −1 blue).
    signs: Vec<f64>,
    // Per row: centered social covariate k − n/2 (0 when asocial).
    centered_k: Vec<f64>,
}

impl<'a> PosteriorEvaluator<'a> {
    /// Build an evaluator, validating spec/data consistency.
    pub fn new(spec: &ModelSpec, data: &'a InferenceDataset) -> Result<Self> {
        let layout = ParamLayout::new(spec, data)?;
        let signs = data
            .rows()
            .iter()
            .map(|r| if r.motivated_color == Color::Green { 1.0 } else { -1.0 })
            .collect();
        let half_n = data.social_set_size().map_or(0.0, |n| n as f64 / 2.0);
        let centered_k = data
            .rows()
            .iter()
            .map(|r| r.social_k.map_or(0.0, |k| k as f64 - half_n))
            .collect();
        Ok(PosteriorEvaluator { data, layout, signs, centered_k })
    }

    /// The parameter layout.
    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    fn check_dim(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.layout.dim {
            return Err(Error::invalid(format!(
                "theta has {} entries, layout needs {}",
                theta.len(),
                self.layout.dim
            )));
        }
        Ok(())
    }

    /// Participant bias under `theta` (μ_b itself under complete pooling).
    fn bias(&self, theta: &[f64], j: usize) -> f64 {
        match self.layout.b(j) {
            Some(i) => theta[i],
            None => theta[self.layout.mu_b()],
        }
    }

    fn sigma_b(&self, theta: &[f64]) -> Option<f64> {
        match (self.layout.log_sigma_b, self.layout.spec.fixed_log_sigma_b) {
            (Some(i), _) => Some(theta[i].exp()),
            (None, Some(s)) => Some(s.exp()),
            (None, None) => None,
        }
    }

    /// Log posterior (log prior + log likelihood) at centered `theta`.
    pub fn log_posterior(&self, theta: &[f64]) -> Result<f64> {
        Ok(self.log_posterior_gradient(theta)?.0)
    }

    /// Log posterior and its analytic gradient at centered `theta`.
    pub fn log_posterior_gradient(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_dim(theta)?;
        let layout = &self.layout;
        let mut lp = 0.0;
        let mut grad = vec![0.0; layout.dim];

        // Priors.
        let mu_b = theta[layout.mu_b()];
        lp += ln_normal_pdf(mu_b, 0.0, PRIOR_MU_B_SCALE);
        grad[layout.mu_b()] -= mu_b / (PRIOR_MU_B_SCALE * PRIOR_MU_B_SCALE);
        if let Some(i) = layout.log_sigma_b {
            lp += ln_normal_pdf(theta[i], 0.0, PRIOR_LOG_SIGMA_B_SCALE);
            grad[i] -= theta[i] / (PRIOR_LOG_SIGMA_B_SCALE * PRIOR_LOG_SIGMA_B_SCALE);
        }
        if let Some(b_start) = layout.b_start {
            let sigma = self
                .sigma_b(theta)
                .expect("hierarchical layout always has a sigma_b");
            let var = sigma * sigma;
            for j in 0..layout.n_participants {
                let dev = theta[b_start + j] - mu_b;
                lp += ln_normal_pdf(theta[b_start + j], mu_b, sigma);
                grad[b_start + j] -= dev / var;
                grad[layout.mu_b()] += dev / var;
                if let Some(i) = layout.log_sigma_b {
                    // d/d(log σ) of [−dev²/(2σ²) − log σ] = dev²/σ² − 1.
                    grad[i] += dev * dev / var - 1.0;
                }
            }
        }
        let gamma_scale = layout.spec.variant.gamma_scale();
        for d in 0..layout.levels.len() {
            let g = theta[layout.gamma(d)];
            lp += ln_normal_pdf(g, 0.0, gamma_scale);
            grad[layout.gamma(d)] -= g / (gamma_scale * gamma_scale);
        }
        if let Some(i) = layout.alpha {
            lp += ln_normal_pdf(theta[i], 0.0, PRIOR_ALPHA_SCALE);
            grad[i] -= theta[i] / (PRIOR_ALPHA_SCALE * PRIOR_ALPHA_SCALE);
        }

        // Likelihood.
        let alpha = layout.alpha.map_or(0.0, |i| theta[i]);
        for (row_i, row) in self.data.rows().iter().enumerate() {
            let j = self.data.participant_idx[row_i];
            let d = self.data.level_idx[row_i];
            let beta = self.signs[row_i] * self.bias(theta, j);
            let eta = alpha * self.centered_k[row_i] + theta[layout.gamma(d)] + beta;
            lp += if row.chose_green { log_sigmoid(eta) } else { log_sigmoid(-eta) };
            let resid = (row.chose_green as u8 as f64) - sigmoid(eta);
            grad[layout.gamma(d)] += resid;
            let d_bias = self.signs[row_i] * resid;
            match layout.b(j) {
                Some(i) => grad[i] += d_bias,
                None => grad[layout.mu_b()] += d_bias,
            }
            if let Some(i) = layout.alpha {
                grad[i] += self.centered_k[row_i] * resid;
            }
        }
        Ok((lp, grad))
    }
}

/// Log posterior of a psychometric model at centered `theta`
/// (see [`ParamLayout`] for the ordering; σ_b enters on the log scale).
pub fn log_posterior(spec: &ModelSpec, data: &InferenceDataset, theta: &[f64]) -> Result<f64> {
    PosteriorEvaluator::new(spec, data)?.log_posterior(theta)
}

/// Log posterior and analytic gradient at centered `theta`.
pub fn log_posterior_gradient(
    spec: &ModelSpec,
    data: &InferenceDataset,
    theta: &[f64],
) -> Result<(f64, Vec<f64>)> {
    PosteriorEvaluator::new(spec, data)?.log_posterior_gradient(theta)
}
