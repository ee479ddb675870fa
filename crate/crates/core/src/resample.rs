//! Debiasing content selection: importance weights over judgment sets,
//! normalization, and per-recipient resampling with replacement.
//!
//! Each judgment carries two model-implied probabilities: `q_green`, the
//! fitted probability that *this* participant chooses green (their bias
//! included), and `p_green`, the target-distribution probability for the
//! same stimulus (bias set to the target, zero by default). A judgment's
//! weight is the likelihood ratio of what was actually chosen,
//! `p(x)/q(x)`, so judgments that biased participants under-produce are
//! up-weighted. Weights are normalized within a judgment set and the set
//! is resampled with replacement, independently per recipient.

use crate::error::{Error, Result};
use crate::judgment::Color;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Default judgment-set size.
pub const DEFAULT_SET_SIZE: usize = 8;

/// Floor applied to the observed judgment's model probability before
/// dividing, preventing unbounded weights from extreme fitted biases.
pub const WEIGHT_FLOOR: f64 = 1e-9;

/// One judgment with its fitted behavioral and target probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgmentRecord {
    /// Identifier of the judging participant.
    pub participant_id: String,
    /// Identifier of the judged stimulus (trial).
    pub stimulus_id: u32,
    /// Whether the participant chose green.
    pub chose_green: bool,
    /// Model-implied probability this participant chooses green
    /// (their own bias included). Strictly interior.
    pub q_green: f64,
    /// Target-distribution probability of green for this stimulus
    /// (bias set to the target). Strictly interior.
    pub p_green: f64,
}

impl JudgmentRecord {
    /// Validate a record; both probabilities must lie strictly in (0, 1).
    pub fn new(
        participant_id: impl Into<String>,
        stimulus_id: u32,
        chose_green: bool,
        q_green: f64,
        p_green: f64,
    ) -> Result<Self> {
        for (name, v) in [("q_green", q_green), ("p_green", p_green)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::invalid(format!(
                    "{name} must be strictly inside (0, 1), got {v}"
                )));
            }
        }
        Ok(JudgmentRecord {
            participant_id: participant_id.into(),
            stimulus_id,
            chose_green,
            q_green,
            p_green,
        })
    }
}

/// A wave's judgments of one stimulus, the unit of weight normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgmentSet {
    records: Vec<JudgmentRecord>,
}

impl JudgmentSet {
    /// Build a set; records must be non-empty and share a stimulus.
    pub fn new(records: Vec<JudgmentRecord>) -> Result<Self> {
        let first = records
            .first()
            .ok_or_else(|| Error::invalid("judgment set must not be empty"))?;
        if let Some(stray) = records.iter().find(|r| r.stimulus_id != first.stimulus_id) {
            return Err(Error::invalid(format!(
                "judgment set mixes stimuli {} and {}",
                first.stimulus_id, stray.stimulus_id
            )));
        }
        Ok(JudgmentSet { records })
    }

    /// The judgments, in construction order.
    pub fn records(&self) -> &[JudgmentRecord] {
        &self.records
    }

    /// Number of judgments (N).
    pub fn len(&self) -> usize {
        self.records.len()
    }

    /// Whether the set is empty (never true for a validated set).
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Shared stimulus id.
    pub fn stimulus_id(&self) -> u32 {
        self.records[0].stimulus_id
    }
}

/// Importance weights for one judgment set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightVector {
    /// Raw likelihood ratios w̃ᵢ (after any denominator flooring).
    pub unnormalized: Vec<f64>,
    /// w̃ᵢ / Σ w̃; sums to 1 within 1e−12.
    pub normalized: Vec<f64>,
    /// Audit flag: some observed-judgment probability hit [`WEIGHT_FLOOR`].
    pub floored: bool,
    /// Audit flag: the weight sum degenerated and a uniform vector was
    /// substituted.
    pub uniform_fallback: bool,
}

/// Likelihood-ratio weight of one judgment: `p(x)/q(x)` for the judgment
/// `x` actually made. Returns the weight and whether the denominator was
/// floored at [`WEIGHT_FLOOR`].
pub fn judgment_weight(record: &JudgmentRecord) -> (f64, bool) {
    let (p_x, q_x) = if record.chose_green {
        (record.p_green, record.q_green)
    } else {
        (1.0 - record.p_green, 1.0 - record.q_green)
    };
    let floored = q_x < WEIGHT_FLOOR;
    (p_x / q_x.max(WEIGHT_FLOOR), floored)
}

/// Compute and normalize the weights of a judgment set.
///
/// If the weight sum degenerates (all numerators underflow), a uniform
/// vector is substituted and flagged.
pub fn normalize_weights(set: &JudgmentSet) -> WeightVector {
    let n = set.len();
    let mut unnormalized = Vec::with_capacity(n);
    let mut floored = false;
    for record in set.records() {
        let (w, f) = judgment_weight(record);
        unnormalized.push(w);
        floored |= f;
    }
    let sum: f64 = unnormalized.iter().sum();
    let degenerate = !(sum.is_finite() && sum > f64::MIN_POSITIVE);
    let normalized = if degenerate {
        vec![1.0 / n as f64; n]
    } else {
        unnormalized.iter().map(|w| w / sum).collect()
    };
    WeightVector { unnormalized, normalized, floored, uniform_fallback: degenerate }
}

/// A recipient's resample of a judgment set: indices into the set, drawn
/// i.i.d. with replacement from the normalized weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResampledSet {
    /// One source index per slot of the presented set.
    pub indices: Vec<usize>,
}

impl ResampledSet {
    /// The resampled judgments, in draw order.
    pub fn judgments<'a>(
        &'a self,
        set: &'a JudgmentSet,
    ) -> impl Iterator<Item = &'a JudgmentRecord> + 'a {
        self.indices.iter().map(move |&i| &set.records()[i])
    }

    /// Number of green judgments in the resample.
    pub fn green_count(&self, set: &JudgmentSet) -> u32 {
        self.judgments(set).filter(|r| r.chose_green).count() as u32
    }
}

/// Draw one index from a cumulative normalized weight vector by inversion.
fn draw_index(normalized: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, w) in normalized.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    normalized.len() - 1
}

/// Resample a judgment set for one recipient: `set.len()` i.i.d. draws
/// with replacement from the normalized weights, using the recipient's
/// own random stream.
pub fn resample_for_recipient<R: Rng>(
    set: &JudgmentSet,
    weights: &WeightVector,
    rng: &mut R,
) -> Result<ResampledSet> {
    if weights.normalized.len() != set.len() {
        return Err(Error::invalid(format!(
            "weight vector length {} does not match set size {}",
            weights.normalized.len(),
            set.len()
        )));
    }
    let indices = (0..set.len())
        .map(|_| draw_index(&weights.normalized, rng.gen::<f64>()))
        .collect();
    Ok(ResampledSet { indices })
}

/// The social signal shown to a viewer: the majority color of a judgment
/// set and how many of its members chose it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PresentedSignal {
    /// Majority color (coin-chosen on exact ties).
    pub color: Color,
    /// Judgments for that color: `max(k, N−k)`, or `N/2` on a tie.
    pub count: u32,
    /// Whether an exact tie was broken by the coin.
    pub tie_broken: bool,
}

/// Deterministic core of [`presented_signal`]: `tie_uniform` decides exact
/// ties (green iff `tie_uniform < 0.5`), and is otherwise unused.
///
/// The experiments present each wave's actual chosen colors, so the
/// majority statement ("k of N chose green") reads the same for every
/// viewer; the marked-color recoding of the display is the identity on
/// these physical counts. The viewer's marked color is accepted for
/// signature fidelity and bookkeeping but does not alter the result.
pub fn presented_signal_with_uniform(
    judgments: &[bool],
    _viewer_marked: Color,
    tie_uniform: f64,
) -> Result<PresentedSignal> {
    if judgments.is_empty() {
        return Err(Error::invalid("presented_signal needs at least one judgment"));
    }
    let n = judgments.len() as u32;
    let greens = judgments.iter().filter(|&&g| g).count() as u32;
    let blues = n - greens;
    Ok(if greens > blues {
        PresentedSignal { color: Color::Green, count: greens, tie_broken: false }
    } else if blues > greens {
        PresentedSignal { color: Color::Blue, count: blues, tie_broken: false }
    } else {
        let color = if tie_uniform < 0.5 { Color::Green } else { Color::Blue };
        PresentedSignal { color, count: greens, tie_broken: true }
    })
}

/// Majority color and count of a judgment list, exact ties broken by a
/// fair coin from `rng`.
pub fn presented_signal<R: Rng>(
    judgments: &[bool],
    viewer_marked: Color,
    rng: &mut R,
) -> Result<PresentedSignal> {
    let u = if judgments.len() % 2 == 0 { rng.gen::<f64>() } else { 0.0 };
    presented_signal_with_uniform(judgments, viewer_marked, u)
}
