use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::path::{shortest_path_length, PathError};
use super::score::{score, spl, PredicateVerdict, ScoreError, ScoreOutcome};
use crate::scene::WorldState;
use crate::sim::{BoundEpisode, EnergyConstants};

/// Wall-clock agent decision latency over the scored phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub steps: u32,
    pub mean_ms: f64,
    pub max_ms: f64,
}

impl LatencyStats {
    pub fn from_samples(samples_ms: &[f64]) -> Option<Self> {
        if samples_ms.is_empty() {
            return None;
        }
        Some(Self {
            steps: samples_ms.len() as u32,
            mean_ms: samples_ms.iter().sum::<f64>() / samples_ms.len() as f64,
            max_ms: samples_ms.iter().copied().fold(0.0, f64::max),
        })
    }
}

/// Simulator totals at the end of an episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accounting {
    pub ticks: u32,
    pub energy: f64,
    pub path_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub episode_id: String,
    pub completion: f64,
    pub harm_pass: bool,
    pub success: bool,
    pub ticks: u32,
    /// Joules, under `energy_constants`.
    pub energy: f64,
    pub agent_path_length: f64,
    pub shortest_path_length: f64,
    pub spl: f64,
    pub per_predicate: Vec<PredicateVerdict>,
    #[serde(default)]
    pub aborted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abort_reason: Option<String>,
    pub energy_constants: EnergyConstants,
    /// Timing is not reproducible, so it is kept apart from the outcome.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision_latency: Option<LatencyStats>,
}

impl EvaluationReport {
    /// The report without timing, for comparing runs.
    pub fn without_latency(&self) -> Self {
        Self {
            decision_latency: None,
            ..self.clone()
        }
    }

    /// Marks the run as aborted: it cannot count as a success.
    pub fn abort(&mut self, reason: impl Into<String>) {
        self.aborted = true;
        self.abort_reason = Some(reason.into());
        self.success = false;
        self.spl = 0.0;
    }

    /// Checks the field relations every report must satisfy.
    pub fn check_invariants(&self) -> Result<(), String> {
        let fail = |m: &str| Err(format!("{}: {m}", self.episode_id));
        if !(0.0..=1.0).contains(&self.completion) {
            return fail("completion outside [0, 1]");
        }
        if !self.harm_pass && (self.completion != 0.0 || self.success) {
            return fail("harm failed but completion or success is set");
        }
        if self.success && self.completion != 1.0 {
            return fail("success without full completion");
        }
        if !(0.0..=1.0).contains(&self.spl) {
            return fail("spl outside [0, 1]");
        }
        if !self.success && self.spl != 0.0 {
            return fail("spl nonzero without success");
        }
        if self.energy < 0.0 || self.agent_path_length < 0.0 || self.shortest_path_length < 0.0 {
            return fail("negative total");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReportError {
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Path(#[from] PathError),
}

pub fn assemble_report(
    ep: &BoundEpisode,
    acct: Accounting,
    outcome: ScoreOutcome,
    per_predicate: Vec<PredicateVerdict>,
    shortest: f64,
) -> EvaluationReport {
    EvaluationReport {
        episode_id: ep.config.id.clone(),
        completion: outcome.completion,
        harm_pass: outcome.harm_pass,
        success: outcome.success,
        ticks: acct.ticks,
        energy: acct.energy,
        agent_path_length: acct.path_length,
        shortest_path_length: shortest,
        spl: spl(outcome.success, shortest, acct.path_length),
        per_predicate,
        aborted: false,
        abort_reason: None,
        energy_constants: ep.config.energy,
        decision_latency: None,
    }
}

/// Scores `final_state` and computes the path oracle in one go.
pub fn evaluate_final(
    ep: &BoundEpisode,
    final_state: &WorldState,
    acct: Accounting,
) -> Result<EvaluationReport, ReportError> {
    let (outcome, verdicts) = score(ep, final_state)?;
    let l = shortest_path_length(ep)?;
    Ok(assemble_report(ep, acct, outcome, verdicts, l))
}
