//! Materialized experiment structure: agent slots, wave schedule,
//! marked-color composition, and yoking edges.
//!
//! A plan is pure structure — no randomness. Social conditions share
//! their first wave with a yoked asocial condition, so their wave-1
//! slots are aliases of the source agents rather than fresh agents:
//! aliased slots are counted in the plan but neither simulated nor
//! recorded separately in the trace.

use super::config::{ExperimentConfig, NetworkComposition};
use crate::error::{Error, Result};
use crate::judgment::Color;
use crate::trace::Condition;

/// How a slot is filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotKind {
    /// A new agent is simulated in this slot.
    Fresh,
    /// The slot is occupied by the same-index agent of the yoked source
    /// condition's wave (social conditions, wave 1).
    YokedAlias {
        /// Asocial condition whose agent fills the slot.
        source: Condition,
    },
}

/// One agent position in the experiment grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentSlot {
    /// Condition the slot belongs to.
    pub condition: Condition,
    /// Network index within the condition.
    pub network: u32,
    /// Wave, 1-based.
    pub wave: u32,
    /// Position within the wave.
    pub index_in_wave: u32,
    /// Marked (and motivated) color of the occupying agent.
    pub marked_color: Color,
    /// Fresh agent or yoked alias.
    pub kind: SlotKind,
}

impl AgentSlot {
    /// Canonical agent identifier for the occupant of this slot; for an
    /// aliased slot this is the source agent's identifier.
    pub fn agent_id(&self) -> String {
        let condition = match self.kind {
            SlotKind::Fresh => self.condition,
            SlotKind::YokedAlias { source } => source,
        };
        agent_id_for(condition, self.network, self.wave, self.index_in_wave)
    }
}

/// A simulated agent: a slot occupant with its drawn bias.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentProfile {
    /// Stable identifier (also the trace and inference participant id).
    pub id: String,
    /// Color the agent is rewarded toward.
    pub motivated_color: Color,
    /// Recoding frame; equals the motivated color in every condition
    /// (control conditions differ only through oracle parameters).
    pub marked_color: Color,
    /// Bias drawn from the condition oracle's population (finite).
    pub bias_b: f64,
    /// Wave, 1-based.
    pub wave: u32,
    /// Network index within the condition.
    pub network: u32,
    /// Condition of the slot the agent occupies.
    pub condition: Condition,
}

/// A validated experiment structure, ready to run.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    config: ExperimentConfig,
    slots: Vec<AgentSlot>,
}

/// Materialize the full slot grid for a config.
///
/// The config is resolved and validated first, so a plan always reflects
/// a fully explicit configuration. Slots are ordered canonically:
/// condition, network, wave, position.
pub fn build_experiment(config: ExperimentConfig) -> Result<ExperimentPlan> {
    let config = config.resolve()?;
    let mut slots = Vec::new();
    for (&condition, &networks) in &config.networks {
        for network in 0..networks {
            for wave in 1..=config.waves {
                let kind = if condition.is_social() && wave == 1 {
                    SlotKind::YokedAlias { source: config.yoking[&condition] }
                } else {
                    SlotKind::Fresh
                };
                for index_in_wave in 0..config.agents_per_wave {
                    slots.push(AgentSlot {
                        condition,
                        network,
                        wave,
                        index_in_wave,
                        marked_color: assigned_color(&config, network, index_in_wave),
                        kind,
                    });
                }
            }
        }
    }
    Ok(ExperimentPlan { config, slots })
}

/// Canonical agent identifier from its fresh-slot coordinates.
pub(super) fn agent_id_for(condition: Condition, network: u32, wave: u32, index_in_wave: u32) -> String {
    format!("{condition}-n{network:02}-w{wave}-a{index_in_wave}")
}

/// Marked color for a slot under the config's composition scheme.
/// Deterministic in (network, position) only, so yoked networks and
/// their sources assign identical colors to shared wave-1 agents.
pub(super) fn assigned_color(config: &ExperimentConfig, network: u32, index_in_wave: u32) -> Color {
    let even_green = |i: u32| if i % 2 == 0 { Color::Green } else { Color::Blue };
    match config.network_color_composition {
        NetworkComposition::Homogeneous => even_green(network),
        NetworkComposition::MixedMarkedColors => even_green(index_in_wave),
    }
}

impl ExperimentPlan {
    /// The resolved configuration the plan was built from.
    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    /// Every agent slot in canonical order, aliases included.
    pub fn slots(&self) -> &[AgentSlot] {
        &self.slots
    }

    /// The slots of one (condition, network, wave) cell.
    pub fn wave_slots(
        &self,
        condition: Condition,
        network: u32,
        wave: u32,
    ) -> impl Iterator<Item = &AgentSlot> {
        self.slots.iter().filter(move |s| {
            s.condition == condition && s.network == network && s.wave == wave
        })
    }

    /// Where the agents of `(condition, wave)` read their social
    /// information from: the yoked asocial condition's wave 1 for wave 2,
    /// the same condition's previous wave later, nothing for asocial
    /// conditions or the first wave. Network indices map one-to-one.
    pub fn upstream(&self, condition: Condition, wave: u32) -> Option<(Condition, u32)> {
        if !condition.is_social() || wave < 2 {
            return None;
        }
        if wave == 2 {
            Some((self.config.yoking[&condition], 1))
        } else {
            Some((condition, wave - 1))
        }
    }

    /// Stimulus level judged on a trial (identical across conditions and
    /// networks: stimulus schedules are yoked by construction).
    pub fn trial_level(&self, trial: u32) -> u32 {
        let levels = &self.config.stimulus_levels;
        levels[trial as usize % levels.len()]
    }

    /// Networks of a condition.
    pub fn network_count(&self, condition: Condition) -> u32 {
        self.config.networks.get(&condition).copied().unwrap_or(0)
    }

    /// Check that a social wave's upstream cell exists in the plan
    /// (sequencing guard used by the wave simulator).
    pub fn require_upstream(&self, condition: Condition, wave: u32) -> Result<(Condition, u32)> {
        self.upstream(condition, wave).ok_or_else(|| {
            Error::invalid(format!(
                "{condition} wave {wave} has no upstream judgments to observe"
            ))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;
    use std::collections::BTreeSet;

    #[test]
    fn exp2_plan_matches_published_structure() {
        // [PAPER] 3 conditions × 14 networks × 8 waves × 8 agents, and
        // 7 green / 7 blue homogeneous networks per condition.
        let plan = build_experiment(ExperimentConfig::exp2()).unwrap();
        assert_eq!(plan.slots().len(), 3 * 14 * 8 * 8);
        for condition in plan.config().conditions() {
            let mut greens = 0;
            for network in 0..14 {
                let colors: BTreeSet<Color> = plan
                    .wave_slots(condition, network, 1)
                    .map(|s| s.marked_color)
                    .collect();
                assert_eq!(colors.len(), 1, "homogeneous network has one color");
                if colors.contains(&Color::Green) {
                    greens += 1;
                }
            }
            assert_eq!(greens, 7, "{condition}: 7 of 14 networks toward green");
        }
    }

    #[test]
    fn exp1_plan_mixes_colors_within_waves() {
        // [PAPER] 4 conditions × 10 networks; 4 agents of each color per
        // wave of 8.
        let plan = build_experiment(ExperimentConfig::exp1()).unwrap();
        assert_eq!(plan.slots().len(), 4 * 10 * 8 * 8);
        let greens = plan
            .wave_slots(Condition::SocialControl, 3, 5)
            .filter(|s| s.marked_color == Color::Green)
            .count();
        assert_eq!(greens, 4);
    }

    #[test]
    fn minimal_plan_has_no_yoking() {
        // [TRIVIAL] 1 condition, 1 network, 1 wave → 8 asocial slots.
        let config = ExperimentConfig::from_json(
            r#"{ "networks": { "asocial_motivated": 1 }, "waves": 1 }"#,
        )
        .unwrap();
        let plan = build_experiment(config).unwrap();
        assert_eq!(plan.slots().len(), 8);
        assert!(plan.slots().iter().all(|s| s.kind == SlotKind::Fresh));
        assert_eq!(plan.upstream(Condition::AsocialMotivated, 1), None);
    }

    #[test]
    fn social_wave_one_aliases_the_yoke_source() {
        let plan = build_experiment(ExperimentConfig::exp2()).unwrap();
        for slot in plan.slots() {
            let expect_alias = slot.condition.is_social() && slot.wave == 1;
            match slot.kind {
                SlotKind::YokedAlias { source } => {
                    assert!(expect_alias);
                    assert_eq!(source, Condition::AsocialMotivated);
                    // The alias resolves to the source agent's identity.
                    assert!(slot.agent_id().starts_with("asocial_motivated"));
                }
                SlotKind::Fresh => assert!(!expect_alias),
            }
        }
    }

    #[test]
    fn upstream_chain_walks_back_to_the_source() {
        let plan = build_experiment(ExperimentConfig::exp2()).unwrap();
        let sm = Condition::SocialMotivated;
        assert_eq!(plan.upstream(sm, 2), Some((Condition::AsocialMotivated, 1)));
        assert_eq!(plan.upstream(sm, 3), Some((sm, 2)));
        assert_eq!(plan.upstream(sm, 8), Some((sm, 7)));
        assert_eq!(plan.upstream(sm, 1), None);
        assert_eq!(plan.upstream(Condition::AsocialMotivated, 5), None);
        assert!(plan.require_upstream(Condition::AsocialMotivated, 5).is_err());
    }

    #[test]
    fn trial_levels_cycle_evenly() {
        let plan = build_experiment(ExperimentConfig::exp2()).unwrap();
        let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
        for t in 0..plan.config().trials {
            *counts.entry(plan.trial_level(t)).or_default() += 1;
        }
        // Four test trials for every green-dot count.
        assert_eq!(counts.len(), 4);
        assert!(counts.values().all(|&c| c == 4));
    }

    #[test]
    fn yoked_wave_one_colors_match_the_source() {
        let plan = build_experiment(ExperimentConfig::exp2()).unwrap();
        for network in 0..14 {
            let source: Vec<Color> = plan
                .wave_slots(Condition::AsocialMotivated, network, 1)
                .map(|s| s.marked_color)
                .collect();
            let aliased: Vec<Color> = plan
                .wave_slots(Condition::SocialResampling, network, 1)
                .map(|s| s.marked_color)
                .collect();
            assert_eq!(source, aliased);
        }
    }
}
