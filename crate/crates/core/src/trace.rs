//! Trial-level experiment traces and their CSV serialization.
//!
//! Every simulated judgment becomes one [`TraceRow`]: who chose, under
//! which condition/network/wave, what stimulus and social signal they saw,
//! and how the choice scores on the bias (`chose_motivated`) and accuracy
//! (`chose_correct`) axes. Colors and stimulus levels are recorded in the
//! *physical* green/blue frame; per-agent marked-color views are derivable
//! because the row carries the agent's motivated color.
//!
//! The CSV layout is fixed (see [`TRACE_HEADER`]) so traces written by one
//! version keep loading in the next. Serialization is lossless and
//! byte-stable: writing the same trace twice produces identical bytes.

use crate::error::{Error, Result};
use crate::judgment::Color;
use serde::{Deserialize, Serialize};
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

/// Experimental condition an agent belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// No social information; per-dot reward for the marked color.
    AsocialMotivated,
    /// No social information; flat reward (bias enters only via oracle).
    AsocialControl,
    /// Sees the previous wave's judgments unaltered; motivated reward.
    SocialMotivated,
    /// Sees the previous wave's judgments unaltered; flat reward.
    SocialControl,
    /// Sees importance-resampled judgments; motivated reward.
    SocialResampling,
}

/// All conditions in canonical (trace-sorting) order.
pub const ALL_CONDITIONS: [Condition; 5] = [
    Condition::AsocialMotivated,
    Condition::AsocialControl,
    Condition::SocialMotivated,
    Condition::SocialControl,
    Condition::SocialResampling,
];

impl Condition {
    /// Snake-case name used in CSV columns and config files.
    pub fn as_str(self) -> &'static str {
        match self {
            Condition::AsocialMotivated => "asocial_motivated",
            Condition::AsocialControl => "asocial_control",
            Condition::SocialMotivated => "social_motivated",
            Condition::SocialControl => "social_control",
            Condition::SocialResampling => "social_resampling",
        }
    }

    /// Whether agents in waves ≥ 2 observe the previous wave.
    pub fn is_social(self) -> bool {
        matches!(
            self,
            Condition::SocialMotivated | Condition::SocialControl | Condition::SocialResampling
        )
    }

    /// Whether observed judgment sets are importance-resampled.
    pub fn is_resampling(self) -> bool {
        self == Condition::SocialResampling
    }

    /// Whether the condition pays per-dot reward for the marked color.
    pub fn is_motivated(self) -> bool {
        matches!(
            self,
            Condition::AsocialMotivated | Condition::SocialMotivated | Condition::SocialResampling
        )
    }
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ALL_CONDITIONS
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown condition `{s}`")))
    }
}

/// One simulated judgment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRow {
    /// Simulation index (0 outside power analyses).
    pub simulation_id: u32,
    /// Condition of the judging agent.
    pub condition: Condition,
    /// Network (replication) index within the condition.
    pub network: u32,
    /// Wave index, 1-based.
    pub wave: u32,
    /// Trial index within the wave, 0-based.
    pub trial: u32,
    /// Green-dot count of the stimulus (physical frame).
    pub stimulus_level: u32,
    /// Unique agent identifier.
    pub agent_id: String,
    /// Color the agent is motivated toward (its marked color).
    pub motivated_color: Color,
    /// True green count of the observed judgment set; absent for asocial rows.
    pub observed_k: Option<u32>,
    /// Majority color shown to the agent (ties coin-broken); absent for asocial rows.
    pub presented_color: Option<Color>,
    /// Count shown with the majority color; absent for asocial rows.
    pub presented_count: Option<u32>,
    /// Whether the agent chose green.
    pub chose_green: bool,
    /// Whether the agent chose its motivated (marked) color.
    pub chose_motivated: bool,
    /// Whether the agent chose the stimulus's true majority color.
    pub chose_correct: bool,
    /// Whether the observed set was importance-resampled.
    pub resampled: bool,
}

impl TraceRow {
    /// Check internal consistency of the derived flag columns and the
    /// presence pattern of the social columns.
    pub fn validate(&self) -> Result<()> {
        let expect_motivated = self.chose_green == (self.motivated_color == Color::Green);
        if self.chose_motivated != expect_motivated {
            return Err(Error::InvalidData(format!(
                "row for agent {}: chose_motivated={} inconsistent with chose_green={} and motivated_color={}",
                self.agent_id, self.chose_motivated, self.chose_green, self.motivated_color
            )));
        }
        let social = [
            self.observed_k.is_some(),
            self.presented_color.is_some(),
            self.presented_count.is_some(),
        ];
        if social.iter().any(|&p| p != social[0]) {
            return Err(Error::InvalidData(format!(
                "row for agent {}: social columns must be all present or all absent",
                self.agent_id
            )));
        }
        if self.resampled && self.observed_k.is_none() {
            return Err(Error::InvalidData(format!(
                "row for agent {}: resampled flag requires an observed set",
                self.agent_id
            )));
        }
        Ok(())
    }
}

/// A full simulated experiment record.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExperimentTrace {
    /// Judgment rows in canonical order
    /// (simulation, condition, network, wave, trial, agent).
    pub rows: Vec<TraceRow>,
}

impl ExperimentTrace {
    /// Wrap rows, validating each.
    pub fn new(rows: Vec<TraceRow>) -> Result<Self> {
        for row in &rows {
            row.validate()?;
        }
        Ok(ExperimentTrace { rows })
    }

    /// Number of judgment rows.
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    /// Whether the trace holds no rows.
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Sort rows into the canonical order used by the CSV files.
    pub fn sort_canonical(&mut self) {
        self.rows.sort_by(|a, b| {
            (a.simulation_id, a.condition, a.network, a.wave, a.trial, &a.agent_id).cmp(&(
                b.simulation_id,
                b.condition,
                b.network,
                b.wave,
                b.trial,
                &b.agent_id,
            ))
        });
    }
}

/// Exact column order of the trace CSV.
pub const TRACE_HEADER: [&str; 15] = [
    "simulation_id",
    "condition",
    "network",
    "wave",
    "trial",
    "stimulus_level",
    "agent_id",
    "motivated_color",
    "observed_k",
    "presented_color",
    "presented_count",
    "chose_green",
    "chose_motivated",
    "chose_correct",
    "resampled",
];

fn opt_u32(v: Option<u32>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn opt_color(v: Option<Color>) -> String {
    v.map(|c| c.as_str().to_string()).unwrap_or_default()
}

/// Write a trace to CSV at `path` (header always present).
pub fn persist_trace(trace: &ExperimentTrace, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(TRACE_HEADER).map_err(|e| csv_io_error(path, e))?;
        for row in &trace.rows {
            w.write_record([
                row.simulation_id.to_string(),
                row.condition.to_string(),
                row.network.to_string(),
                row.wave.to_string(),
                row.trial.to_string(),
                row.stimulus_level.to_string(),
                row.agent_id.clone(),
                row.motivated_color.to_string(),
                opt_u32(row.observed_k),
                opt_color(row.presented_color),
                opt_u32(row.presented_count),
                row.chose_green.to_string(),
                row.chose_motivated.to_string(),
                row.chose_correct.to_string(),
                row.resampled.to_string(),
            ])
            .map_err(|e| csv_io_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    write_atomic(path, &buf)
}

/// Write bytes to `path` via a sibling temp file + rename so a crashed run
/// never leaves a half-written artifact.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp~");
    {
        let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(tmp.display().to_string(), e))?;
        f.write_all(bytes).map_err(|e| Error::io(tmp.display().to_string(), e))?;
    }
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn csv_io_error(path: &Path, e: csv::Error) -> Error {
    Error::Parse {
        source_name: path.display().to_string(),
        line: 0,
        message: e.to_string(),
    }
}

fn parse_field<T: FromStr>(
    record: &csv::StringRecord,
    idx: usize,
    name: &str,
    path: &Path,
    line: u64,
) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = record.get(idx).ok_or_else(|| Error::Parse {
        source_name: path.display().to_string(),
        line,
        message: format!("missing column `{name}`"),
    })?;
    raw.parse().map_err(|e| Error::Parse {
        source_name: path.display().to_string(),
        line,
        message: format!("column `{name}`: cannot parse `{raw}`: {e}"),
    })
}

fn parse_opt_field<T: FromStr>(
    record: &csv::StringRecord,
    idx: usize,
    name: &str,
    path: &Path,
    line: u64,
) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match record.get(idx) {
        None | Some("") => Ok(None),
        Some(_) => parse_field(record, idx, name, path, line).map(Some),
    }
}

/// Load a trace CSV written by [`persist_trace`]. Malformed rows produce
/// line-numbered parse errors; every row is validated.
pub fn load_trace(path: &Path) -> Result<ExperimentTrace> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path.display().to_string(), io),
            other => Error::Parse {
                source_name: path.display().to_string(),
                line: 0,
                message: format!("{other:?}"),
            },
        })?;
    {
        let headers = reader.headers().map_err(|e| csv_io_error(path, e))?;
        let got: Vec<&str> = headers.iter().collect();
        if got != TRACE_HEADER {
            return Err(Error::Parse {
                source_name: path.display().to_string(),
                line: 1,
                message: format!("unexpected header {got:?}"),
            });
        }
    }
    let mut rows = Vec::new();
    for result in reader.records() {
        let record = result.map_err(|e| csv_io_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let row = TraceRow {
            simulation_id: parse_field(&record, 0, "simulation_id", path, line)?,
            condition: parse_field(&record, 1, "condition", path, line)?,
            network: parse_field(&record, 2, "network", path, line)?,
            wave: parse_field(&record, 3, "wave", path, line)?,
            trial: parse_field(&record, 4, "trial", path, line)?,
            stimulus_level: parse_field(&record, 5, "stimulus_level", path, line)?,
            agent_id: record.get(6).unwrap_or_default().to_string(),
            motivated_color: parse_field(&record, 7, "motivated_color", path, line)?,
            observed_k: parse_opt_field(&record, 8, "observed_k", path, line)?,
            presented_color: parse_opt_field(&record, 9, "presented_color", path, line)?,
            presented_count: parse_opt_field(&record, 10, "presented_count", path, line)?,
            chose_green: parse_field(&record, 11, "chose_green", path, line)?,
            chose_motivated: parse_field(&record, 12, "chose_motivated", path, line)?,
            chose_correct: parse_field(&record, 13, "chose_correct", path, line)?,
            resampled: parse_field(&record, 14, "resampled", path, line)?,
        };
        row.validate().map_err(|e| Error::Parse {
            source_name: path.display().to_string(),
            line,
            message: e.to_string(),
        })?;
        rows.push(row);
    }
    Ok(ExperimentTrace { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_row() -> TraceRow {
        TraceRow {
            simulation_id: 0,
            condition: Condition::SocialMotivated,
            network: 2,
            wave: 3,
            trial: 1,
            stimulus_level: 52,
            agent_id: "s0_sm2_w3_p4".into(),
            motivated_color: Color::Blue,
            observed_k: Some(5),
            presented_color: Some(Color::Green),
            presented_count: Some(5),
            chose_green: false,
            chose_motivated: true,
            chose_correct: false,
            resampled: false,
        }
    }

    fn asocial_row() -> TraceRow {
        TraceRow {
            simulation_id: 0,
            condition: Condition::AsocialMotivated,
            network: 0,
            wave: 1,
            trial: 0,
            stimulus_level: 48,
            agent_id: "s0_am0_w1_p0".into(),
            motivated_color: Color::Green,
            observed_k: None,
            presented_color: None,
            presented_count: None,
            chose_green: true,
            chose_motivated: true,
            chose_correct: false,
            resampled: false,
        }
    }

    #[test]
    fn condition_names_round_trip() {
        for c in ALL_CONDITIONS {
            assert_eq!(c.as_str().parse::<Condition>().unwrap(), c);
        }
        assert!("social".parse::<Condition>().is_err());
        assert!(Condition::SocialResampling.is_social());
        assert!(Condition::SocialResampling.is_resampling());
        assert!(!Condition::SocialControl.is_motivated());
        assert!(Condition::AsocialMotivated.is_motivated());
        assert!(!Condition::AsocialControl.is_social());
    }

    #[test]
    fn row_validation_catches_inconsistency() {
        let mut row = sample_row();
        assert!(row.validate().is_ok());
        row.chose_motivated = false;
        assert!(row.validate().is_err());
        let mut row = sample_row();
        row.presented_color = None;
        assert!(row.validate().is_err());
        let mut row = asocial_row();
        row.resampled = true;
        assert!(row.validate().is_err());
    }

    #[test]
    fn empty_trace_round_trips_as_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        persist_trace(&ExperimentTrace::default(), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert_eq!(text.lines().next().unwrap(), TRACE_HEADER.join(","));
        let loaded = load_trace(&path).unwrap();
        assert!(loaded.is_empty());
    }

    #[test]
    fn single_row_trace_is_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let trace = ExperimentTrace::new(vec![sample_row()]).unwrap();
        let p1 = dir.path().join("a.csv");
        let p2 = dir.path().join("b.csv");
        persist_trace(&trace, &p1).unwrap();
        persist_trace(&trace, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        assert_eq!(load_trace(&p1).unwrap(), trace);
    }

    #[test]
    fn mixed_rows_round_trip_losslessly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        let trace = ExperimentTrace::new(vec![asocial_row(), sample_row()]).unwrap();
        persist_trace(&trace, &path).unwrap();
        assert_eq!(load_trace(&path).unwrap(), trace);
    }

    #[test]
    fn malformed_rows_are_reported_with_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        let mut text = TRACE_HEADER.join(",") + "\n";
        text += "0,asocial_motivated,0,1,0,48,a0,green,,,,true,true,false,false\n";
        text += "0,asocial_motivated,0,1,0,48,a1,chartreuse,,,,true,true,false,false\n";
        std::fs::write(&path, text).unwrap();
        let err = load_trace(&path).unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 3, "error should carry the offending line");
                assert!(message.contains("motivated_color"), "message was: {message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn header_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("wrong.csv");
        std::fs::write(&path, "a,b,c\n1,2,3\n").unwrap();
        assert!(load_trace(&path).is_err());
    }

    #[test]
    fn canonical_sort_orders_rows() {
        let mut a = asocial_row();
        a.wave = 2;
        let b = asocial_row();
        let mut trace = ExperimentTrace::new(vec![a, b]).unwrap();
        trace.sort_canonical();
        assert_eq!(trace.rows[0].wave, 1);
        assert_eq!(trace.rows[1].wave, 2);
    }
}
