//! Full-experiment simulation: configuration, planning, wave-structured
//! execution, and replicated power analysis.
//!
//! A [`config::ExperimentConfig`] describes the design — conditions with
//! their network counts, waves, judgment-set size, trial schedule,
//! per-condition generative oracles, and the yoking that seeds each
//! social condition's first observed wave from an asocial run.
//! [`plan::build_experiment`] materializes the validated slot grid,
//! [`run::run_experiment`] simulates it into a canonical judgment trace
//! (with in-loop model refits when a self-resampling condition is
//! present), and [`power::run_power_analysis`] replicates the whole
//! pipeline under independent seeds to score directional hypotheses.

pub mod config;
pub mod plan;
pub mod power;
pub mod run;

pub use config::{ExperimentConfig, InLoopInference, NetworkComposition, OracleParams};
pub use plan::{build_experiment, AgentProfile, AgentSlot, ExperimentPlan, SlotKind};
pub use power::{
    default_hypotheses, run_power_analysis, Direction, HypothesisSpec, PowerReport, PowerRow,
};
pub use run::{
    choice_probability, linear_predictor, run_experiment, simulate_wave, FitEstimates,
    ResampleAudit, RunOptions, RunOutput, SetJudgment, TrialSet, WaveSets, WaveYield,
};
