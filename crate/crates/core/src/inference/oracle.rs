//! Deterministic quadrature oracle for low-dimensional posteriors.
//!
//! Normalizes `exp(log_posterior)` over a tensor-product grid and reports
//! posterior means and per-parameter marginals by direct summation. Cost
//! is exponential in dimension, so instances above
//! [`ORACLE_MAX_PARAMS`] parameters are refused; the point of the oracle
//! is to validate the Monte Carlo sampler on reduced model instances
//! (complete pooling, fixed σ_b), not to replace it.

use super::model::{InferenceDataset, ModelSpec, PosteriorEvaluator};
use crate::error::{Error, Result};

/// Largest parameter count the grid oracle accepts.
pub const ORACLE_MAX_PARAMS: usize = 4;

/// One parameter's evaluation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrid {
    values: Vec<f64>,
}

impl ParamGrid {
    /// Build from explicit, strictly increasing, finite values.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("parameter grid must not be empty"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("parameter grid contains a non-finite value"));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("parameter grid must be strictly increasing"));
        }
        Ok(ParamGrid { values })
    }

    /// `n` evenly spaced points across `[lo, hi]`.
    pub fn linspace(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 || !(lo < hi) {
            return Err(Error::invalid("linspace needs n >= 2 and lo < hi"));
        }
        let step = (hi - lo) / (n - 1) as f64;
        ParamGrid::new((0..n).map(|i| lo + step * i as f64).collect())
    }

    /// The grid points.
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Posterior means and marginals from grid quadrature.
#[derive(Debug, Clone)]
pub struct GridPosterior {
    /// Parameter names aligned with the layout order.
    pub names: Vec<String>,
    /// Posterior mean per parameter.
    pub means: Vec<f64>,
    /// Per-parameter marginal mass over its grid points (sums to 1).
    pub marginals: Vec<Vec<f64>>,
}

/// Normalize an arbitrary log density over a tensor grid and return
/// `(means, marginals)` by direct summation. The density need only be
/// finite up to an additive constant.
pub fn grid_density_core(
    log_density: impl Fn(&[f64]) -> Result<f64>,
    grids: &[ParamGrid],
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if grids.is_empty() {
        return Err(Error::invalid("grid oracle needs at least one parameter grid"));
    }
    let dims: Vec<usize> = grids.iter().map(|g| g.values.len()).collect();
    let cells: usize = dims.iter().product();

    // Two passes: find the maximum log density for stable exponentiation,
    // then accumulate weights.
    let mut point = vec![0usize; grids.len()];
    let mut theta = vec![0.0f64; grids.len()];
    let mut log_values = Vec::with_capacity(cells);
    let mut max_log = f64::NEG_INFINITY;
    for _ in 0..cells {
        for (d, &i) in point.iter().enumerate() {
            theta[d] = grids[d].values[i];
        }
        let ld = log_density(&theta)?;
        if ld.is_nan() {
            return Err(Error::invalid(format!("log density is NaN at {theta:?}")));
        }
        max_log = max_log.max(ld);
        log_values.push(ld);
        advance(&mut point, &dims);
    }
    if !max_log.is_finite() {
        return Err(Error::invalid("log density is -infinity over the whole grid"));
    }

    let mut total = 0.0;
    let mut first_moment = vec![0.0; grids.len()];
    let mut marginals: Vec<Vec<f64>> = dims.iter().map(|&n| vec![0.0; n]).collect();
    point.iter_mut().for_each(|i| *i = 0);
    for ld in &log_values {
        let w = (ld - max_log).exp();
        total += w;
        for (d, &i) in point.iter().enumerate() {
            first_moment[d] += w * grids[d].values[i];
            marginals[d][i] += w;
        }
        advance(&mut point, &dims);
    }
    let means = first_moment.iter().map(|m| m / total).collect();
    for marginal in &mut marginals {
        for v in marginal.iter_mut() {
            *v /= total;
        }
    }
    Ok((means, marginals))
}

fn advance(point: &mut [usize], dims: &[usize]) {
    for d in (0..point.len()).rev() {
        point[d] += 1;
        if point[d] < dims[d] {
            return;
        }
        point[d] = 0;
    }
}

/// Quadrature oracle for a psychometric model posterior.
///
/// `grids` align with the model's [`super::model::ParamLayout`] order and
/// must cover every parameter. Refuses instances with more than
/// [`ORACLE_MAX_PARAMS`] parameters.
pub fn grid_posterior_oracle(
    spec: &ModelSpec,
    data: &InferenceDataset,
    grids: &[ParamGrid],
) -> Result<GridPosterior> {
    let evaluator = PosteriorEvaluator::new(spec, data)?;
    let dim = evaluator.layout().dim();
    if dim > ORACLE_MAX_PARAMS {
        return Err(Error::OracleTooLarge { max: ORACLE_MAX_PARAMS, requested: dim });
    }
    if grids.len() != dim {
        return Err(Error::invalid(format!(
            "{} grids supplied for a {dim}-parameter model",
            grids.len()
        )));
    }
    let (means, marginals) =
        grid_density_core(|theta| evaluator.log_posterior(theta), grids)?;
    Ok(GridPosterior { names: evaluator.layout().names(data.participants()), means, marginals })
}
