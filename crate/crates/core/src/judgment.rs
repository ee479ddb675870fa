//! The core judgment model: the probability that an agent endorses green.
//!
//! An agent weighing stimulus evidence, an observed social signal, and a
//! motivated prior chooses green with probability
//!
//! ```text
//! p(green) = inverse-logit( alpha * (k - n/2) + gamma + beta )
//! ```
//!
//! * `alpha` — log-odds weight per net social endorsement; derived from an
//!   imitator error rate via [`alpha_from_epsilon`] (`alpha = 2 ln((1-e)/e)`).
//! * `gamma` — stimulus log-likelihood ratio `ln p(d|green)/p(d|blue)`,
//!   stored per stimulus level (green-dot count), not per trial.
//! * `beta` — prior log-odds toward green; motivated agents get
//!   `beta = +b` (green-motivated) or `-b` (blue-motivated).
//!
//! Asocial judgments are modeled by an *absent* signal rather than
//! `alpha = 0`, so fitted social and asocial specifications stay
//! structurally distinct.

use crate::error::{Error, Result};
use crate::math::sigmoid;
use serde::{Deserialize, Serialize};

/// One of the two judgment options.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    /// The green response option.
    Green,
    /// The blue response option.
    Blue,
}

impl Color {
    /// The opposite color.
    pub fn other(self) -> Color {
        match self {
            Color::Green => Color::Blue,
            Color::Blue => Color::Green,
        }
    }

    /// Lower-case name used in CSV columns.
    pub fn as_str(self) -> &'static str {
        match self {
            Color::Green => "green",
            Color::Blue => "blue",
        }
    }
}

impl std::fmt::Display for Color {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Color {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "green" => Ok(Color::Green),
            "blue" => Ok(Color::Blue),
            other => Err(Error::invalid(format!("unknown color `{other}` (expected `green` or `blue`)"))),
        }
    }
}

/// The `(alpha, gamma, beta)` triple governing one judgment probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Log-odds weight per net social endorsement (`k - n/2`).
    pub alpha: f64,
    /// Stimulus log-likelihood ratio toward green.
    pub gamma: f64,
    /// Prior log-odds toward green.
    pub beta: f64,
}

impl ModelParams {
    /// Construct, rejecting non-finite fields.
    pub fn new(alpha: f64, gamma: f64, beta: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("gamma", gamma), ("beta", beta)] {
            if !v.is_finite() {
                return Err(Error::invalid(format!("ModelParams.{name} must be finite, got {v}")));
            }
        }
        Ok(ModelParams { alpha, gamma, beta })
    }
}

/// An observed social signal: `k` of `n` prior judgments endorsed green.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SocialSignal {
    k: u32,
    n: u32,
}

impl SocialSignal {
    /// Construct, requiring `0 <= k <= n` and `n >= 1`.
    pub fn new(k: u32, n: u32) -> Result<Self> {
        if n < 1 {
            return Err(Error::invalid(format!("SocialSignal needs n >= 1, got n={n}")));
        }
        if k > n {
            return Err(Error::invalid(format!("SocialSignal needs k <= n, got k={k}, n={n}")));
        }
        Ok(SocialSignal { k, n })
    }

    /// Green endorsement count.
    pub fn k(self) -> u32 {
        self.k
    }

    /// Total endorsements observed.
    pub fn n(self) -> u32 {
        self.n
    }

    /// The centered covariate `k - n/2` entering the log-odds.
    pub fn centered(self) -> f64 {
        self.k as f64 - self.n as f64 / 2.0
    }
}

/// A dot-grid stimulus, described by how many of its dots are green.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stimulus {
    /// Identifier (e.g. a trial label).
    pub id: String,
    /// Number of green dots; strictly between 0 and `total_dots`.
    pub green_dots: u32,
    /// Total dots in the grid (default experiments use 100).
    pub total_dots: u32,
}

impl Stimulus {
    /// Construct, requiring `0 < green_dots < total_dots`.
    pub fn new(id: impl Into<String>, green_dots: u32, total_dots: u32) -> Result<Self> {
        if green_dots == 0 || green_dots >= total_dots {
            return Err(Error::invalid(format!(
                "Stimulus needs 0 < green_dots < total_dots, got {green_dots}/{total_dots}"
            )));
        }
        Ok(Stimulus { id: id.into(), green_dots, total_dots })
    }

    /// The objectively correct answer: the color covering more dots, or
    /// `None` for an exact 50/50 grid.
    pub fn majority_color(&self) -> Option<Color> {
        match (2 * self.green_dots).cmp(&self.total_dots) {
            std::cmp::Ordering::Greater => Some(Color::Green),
            std::cmp::Ordering::Less => Some(Color::Blue),
            std::cmp::Ordering::Equal => None,
        }
    }
}

/// Log-odds of endorsing green: `alpha * (k - n/2) + gamma + beta`.
///
/// With `signal` absent (asocial case) the social term is exactly 0.
pub fn log_odds(params: &ModelParams, signal: Option<SocialSignal>) -> f64 {
    let social = signal.map_or(0.0, |s| params.alpha * s.centered());
    social + params.gamma + params.beta
}

/// Probability of endorsing green: the inverse logit of [`log_odds`].
pub fn green_probability(params: &ModelParams, signal: Option<SocialSignal>) -> f64 {
    sigmoid(log_odds(params, signal))
}

/// Convert an imitator error rate to a social weight: `2 ln((1-e)/e)`.
///
/// An observer who believes each prior endorsement matches the true color
/// with probability `1 - epsilon` should weigh each net endorsement by
/// this amount. Strictly decreasing in `epsilon`, antisymmetric about
/// `epsilon = 0.5`, and positive for `epsilon < 0.5`.
pub fn alpha_from_epsilon(epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    Ok(2.0 * ((1.0 - epsilon) / epsilon).ln())
}

/// Map a motivated bias magnitude onto the green axis: `+b` for a
/// green-motivated agent, `-b` for a blue-motivated one.
pub fn recode_bias(b: f64, motivated_color: Color) -> f64 {
    match motivated_color {
        Color::Green => b,
        Color::Blue => -b,
    }
}
