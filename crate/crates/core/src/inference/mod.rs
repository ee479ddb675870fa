//! Hierarchical Bayesian estimation of the psychometric models.
//!
//! Participant biases b_j get a shared Normal(μ_b, σ_b) population with
//! weakly informative hyperpriors, stimulus levels get coefficients γ_d,
//! and the social variant adds a weight α on the centered observed green
//! count. Posteriors are drawn with a No-U-Turn Hamiltonian sampler over
//! a non-centered reparameterization (b_j = μ_b + σ_b·z_j), then reported
//! on the natural scale alongside split-R̂, effective sample sizes, and
//! 90% highest-density intervals. A grid quadrature oracle validates the
//! sampler on reduced low-dimensional instances.

pub mod diagnostics;
pub mod model;
pub mod nuts;
pub mod oracle;

pub use diagnostics::{effective_sample_size, hdi, rhat, RhatResult, HDI_MASS};
pub use model::{
    log_posterior, log_posterior_gradient, InferenceDataset, InferenceRow, ModelSpec,
    ModelVariant, ParamLayout, Pooling, PosteriorEvaluator,
};
pub use nuts::{LogDensity, NutsOptions};
pub use oracle::{grid_density_core, grid_posterior_oracle, GridPosterior, ParamGrid, ORACLE_MAX_PARAMS};

use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::math::{mean, variance};
use crate::seed;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// R̂ above which a parameter is flagged in the fit warnings.
pub const RHAT_WARN_THRESHOLD: f64 = 1.05;

/// MCMC run configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McmcConfig {
    /// Independent chains (≥ 2, for split-R̂).
    pub chains: u32,
    /// Total iterations per chain, warmup included.
    pub iterations: u32,
    /// Warmup (adaptation) iterations discarded from each chain.
    pub warmup: u32,
    /// Master seed; chains derive sub-streams from it.
    pub seed: u64,
    /// Sampler options (depth cap, target acceptance, divergence bound).
    #[serde(default)]
    pub options: NutsOptions,
}

impl McmcConfig {
    /// The defaults used for the reported fits: 8 chains of 2,500
    /// iterations, first 1,250 discarded.
    pub fn new(seed: u64) -> Self {
        McmcConfig {
            chains: 8,
            iterations: 2500,
            warmup: 1250,
            seed,
            options: NutsOptions::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.chains < 2 {
            return Err(Error::invalid("MCMC needs at least 2 chains for split-rhat"));
        }
        if self.warmup >= self.iterations {
            return Err(Error::invalid(format!(
                "warmup {} must be smaller than iterations {}",
                self.warmup, self.iterations
            )));
        }
        Ok(())
    }
}

/// One parameter's posterior summary (the reported-table shape).
#[derive(Debug, Clone, Serialize)]
pub struct ParameterSummary {
    /// Parameter name (`mu_b`, `sigma_b`, `b[...]`, `gamma[...]`, `alpha`).
    pub name: String,
    /// Posterior mean.
    pub mean: f64,
    /// Posterior standard deviation.
    pub sd: f64,
    /// Lower bound of the 90% HDI.
    pub hdi_lower: f64,
    /// Upper bound of the 90% HDI.
    pub hdi_upper: f64,
    /// Split-R̂ (∞ when degenerate).
    pub rhat: f64,
    /// Effective sample size.
    pub ess: f64,
    /// Whether the draws were degenerate (zero variance).
    pub degenerate: bool,
}

/// Posterior draws and diagnostics from [`fit_posterior`].
#[derive(Debug, Clone)]
pub struct PosteriorDraws {
    /// Reported parameter names, aligned with `draws`.
    pub names: Vec<String>,
    /// Draws on the reported scale, indexed `[parameter][chain][draw]`
    /// (σ_b exponentiated, biases centered).
    pub draws: Vec<Vec<Vec<f64>>>,
    /// Per-parameter summaries in `names` order.
    pub summaries: Vec<ParameterSummary>,
    /// Post-warmup divergent transitions per chain.
    pub divergences: Vec<u64>,
    /// Adapted step size per chain.
    pub step_sizes: Vec<f64>,
    /// Non-fatal diagnostic warnings (high R̂, divergences).
    pub warnings: Vec<String>,
}

impl PosteriorDraws {
    /// Index of a reported parameter.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// All chains' draws of one parameter, pooled.
    pub fn pooled(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.index_of(name)?;
        Some(self.draws[i].iter().flatten().copied().collect())
    }

    /// Summary of one parameter.
    pub fn summary(&self, name: &str) -> Option<&ParameterSummary> {
        Some(&self.summaries[self.index_of(name)?])
    }

    /// Posterior means keyed by reported name, in layout order.
    pub fn means(&self) -> Vec<(String, f64)> {
        self.summaries.iter().map(|s| (s.name.clone(), s.mean)).collect()
    }
}

/// Non-centered sampling target: the bias block holds standardized
/// offsets z_j with b_j = μ_b + σ_b·z_j, which keeps the funnel between
/// σ_b and the biases out of the sampler's way. Includes the Jacobian
/// term J·log σ_b relating the two parameterizations.
struct NonCenteredTarget<'a> {
    evaluator: &'a PosteriorEvaluator<'a>,
}

impl<'a> NonCenteredTarget<'a> {
    /// Map a sampled point to the centered θ of [`model::log_posterior`].
    fn to_centered(&self, z: &[f64]) -> Vec<f64> {
        let layout = self.evaluator.layout();
        let mut theta = z.to_vec();
        if layout.b(0).is_some() {
            let mu = z[layout.mu_b()];
            let log_sigma = layout
                .log_sigma_b()
                .map(|i| z[i])
                .or(layout.spec().fixed_log_sigma_b)
                .expect("a bias block always comes with a sigma_b");
            let sigma = log_sigma.exp();
            for j in 0..layout.n_participants() {
                let i = layout.b(j).expect("bias index exists");
                theta[i] = mu + sigma * z[i];
            }
        }
        theta
    }
}

impl<'a> LogDensity for NonCenteredTarget<'a> {
    fn dim(&self) -> usize {
        self.evaluator.layout().dim()
    }

    fn log_density_gradient(&self, z: &[f64]) -> (f64, Vec<f64>) {
        let layout = self.evaluator.layout();
        let dim = layout.dim();
        let theta = self.to_centered(z);
        let (lp_c, grad_c) = match self.evaluator.log_posterior_gradient(&theta) {
            Ok(v) => v,
            Err(_) => return (f64::NEG_INFINITY, vec![0.0; dim]),
        };
        if layout.b(0).is_none() {
            // Complete pooling: the parameterizations coincide.
            if !lp_c.is_finite() {
                return (f64::NEG_INFINITY, vec![0.0; dim]);
            }
            return (lp_c, grad_c);
        }
        let log_sigma = layout
            .log_sigma_b()
            .map(|i| z[i])
            .or(layout.spec().fixed_log_sigma_b)
            .expect("a bias block always comes with a sigma_b");
        let sigma = log_sigma.exp();
        let j_count = layout.n_participants() as f64;
        let lp = lp_c + j_count * log_sigma;
        if !lp.is_finite() {
            return (f64::NEG_INFINITY, vec![0.0; dim]);
        }
        let mut grad = grad_c.clone();
        let mut bias_grad_sum = 0.0;
        let mut bias_grad_dot_z = 0.0;
        for j in 0..layout.n_participants() {
            let i = layout.b(j).expect("bias index exists");
            bias_grad_sum += grad_c[i];
            bias_grad_dot_z += grad_c[i] * z[i];
            grad[i] = sigma * grad_c[i];
        }
        grad[layout.mu_b()] = grad_c[layout.mu_b()] + bias_grad_sum;
        if let Some(i) = layout.log_sigma_b() {
            grad[i] = grad_c[i] + sigma * bias_grad_dot_z + j_count;
        }
        (lp, grad)
    }
}

/// Fit a psychometric model by NUTS.
///
/// Chains run independently on sub-streams of `config.seed` (optionally
/// in parallel) and merge in chain order, so results are bit-identical
/// across schedules and runs. Draws are reported on the natural scale
/// (σ_b positive, biases centered); high split-R̂ and post-warmup
/// divergences are attached as warnings rather than errors.
pub fn fit_posterior(
    spec: &ModelSpec,
    data: &InferenceDataset,
    config: &McmcConfig,
    mode: ExecMode,
) -> Result<PosteriorDraws> {
    config.validate()?;
    let evaluator = PosteriorEvaluator::new(spec, data)?;
    let layout = evaluator.layout();
    let dim = layout.dim();
    if dim == 0 {
        return Err(Error::invalid("model has no parameters to fit"));
    }
    let target = NonCenteredTarget { evaluator: &evaluator };
    let keep = (config.iterations - config.warmup) as usize;

    let runs = exec::try_map_indexed(mode, config.chains as usize, |chain| {
        let mut rng = seed::rng_for(config.seed, &[seed::tag::MCMC, chain as u64]);
        let init: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
        nuts::sample_chain(&target, &init, config.warmup as usize, keep, &config.options, &mut rng)
    })?;

    // Reported names: σ_b on the natural scale.
    let names: Vec<String> = layout
        .names(data.participants())
        .into_iter()
        .map(|n| if n == "log_sigma_b" { "sigma_b".to_string() } else { n })
        .collect();
    let log_sigma_index = layout.log_sigma_b();

    // Transform each draw to the reported scale, parameter-major.
    let mut draws: Vec<Vec<Vec<f64>>> =
        vec![vec![Vec::with_capacity(keep); runs.len()]; dim];
    for (c, run) in runs.iter().enumerate() {
        for z in &run.draws {
            let mut theta = target.to_centered(z);
            if let Some(i) = log_sigma_index {
                theta[i] = theta[i].exp();
            }
            for (p, value) in theta.into_iter().enumerate() {
                draws[p][c].push(value);
            }
        }
    }

    let mut summaries = Vec::with_capacity(dim);
    let mut warnings = Vec::new();
    for (p, name) in names.iter().enumerate() {
        let pooled: Vec<f64> = draws[p].iter().flatten().copied().collect();
        let r = rhat(&draws[p])?;
        let ess = effective_sample_size(&draws[p])?;
        let (hdi_lower, hdi_upper) = hdi(&pooled, HDI_MASS)?;
        let summary = ParameterSummary {
            name: name.clone(),
            mean: mean(&pooled),
            sd: variance(&pooled).sqrt(),
            hdi_lower,
            hdi_upper,
            rhat: r.value,
            ess,
            degenerate: r.degenerate,
        };
        if r.degenerate {
            warnings.push(format!("parameter {name} has degenerate (constant) draws"));
        } else if r.value > RHAT_WARN_THRESHOLD {
            warnings.push(format!(
                "parameter {name} has rhat {:.3} > {RHAT_WARN_THRESHOLD}",
                r.value
            ));
        }
        summaries.push(summary);
    }
    let divergences: Vec<u64> = runs.iter().map(|r| r.divergences).collect();
    let total_divergent: u64 = divergences.iter().sum();
    if total_divergent > 0 {
        warnings.push(format!(
            "{total_divergent} divergent transitions after warmup (per chain: {divergences:?})"
        ));
    }
    Ok(PosteriorDraws {
        names,
        draws,
        summaries,
        divergences,
        step_sizes: runs.iter().map(|r| r.step_size).collect(),
        warnings,
    })
}
