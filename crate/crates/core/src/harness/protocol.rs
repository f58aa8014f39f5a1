//! Newline-delimited JSON messages between the harness and an agent.
//!
//! The harness opens with `hello`; the agent answers with its own `hello`
//! carrying only `version`. After that the harness sends one `observation`
//! per tick and the agent answers each with one `action`. The run ends with
//! `done`, or with `error` when either side gives up. Unknown fields are
//! ignored.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::eval::EvaluationReport;
use crate::goals::{GeometricTarget, GoalSpec, ToleranceSpec};
use crate::sim::{Action, BoundEpisode, Embodiment, Observation};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Free exploration of the goal world before an experience-goal episode.
    Exploration,
    Scored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    VersionMismatch,
    Malformed,
    InvalidAction,
    UnexpectedMessage,
    Timeout,
    Internal,
}

/// What the agent is told about the episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub id: String,
    pub max_ticks: u32,
    pub embodiment: Embodiment,
    #[serde(default)]
    pub task_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exploration_budget: Option<u32>,
}

/// The goal as shown to the agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GoalView {
    Geometric {
        targets: BTreeMap<String, GeometricTarget>,
        tolerances: BTreeMap<String, ToleranceSpec>,
    },
    /// Program text; thresholds read `_` when the episode hides them.
    Predicate { program: String },
    /// The goal is conveyed by the exploration phase.
    Experience { exploration_budget: u32 },
}

impl GoalView {
    pub fn of(ep: &BoundEpisode) -> Self {
        match &ep.goal {
            GoalSpec::Geometric {
                targets,
                tolerances,
            } => GoalView::Geometric {
                targets: targets.clone(),
                tolerances: tolerances.clone(),
            },
            GoalSpec::Predicate { program } => GoalView::Predicate {
                program: if ep.config.hidden_params {
                    program.redacted()
                } else {
                    program.to_string()
                },
            },
            GoalSpec::Experience {
                exploration_budget, ..
            } => GoalView::Experience {
                exploration_budget: *exploration_budget,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ProtocolMessage {
    Hello {
        version: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        episode: Option<EpisodeSummary>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        goal: Option<GoalView>,
    },
    Observation {
        phase: Phase,
        observation: Observation,
    },
    Action {
        action: Action,
    },
    Done {
        report: EvaluationReport,
    },
    Error {
        code: ErrorCode,
        text: String,
    },
}

impl ProtocolMessage {
    pub fn hello_for(ep: &BoundEpisode) -> Self {
        let budget = match &ep.goal {
            GoalSpec::Experience {
                exploration_budget, ..
            } => Some(*exploration_budget),
            _ => None,
        };
        ProtocolMessage::Hello {
            version: PROTOCOL_VERSION,
            episode: Some(EpisodeSummary {
                id: ep.config.id.clone(),
                max_ticks: ep.config.max_ticks,
                embodiment: ep.config.embodiment,
                task_ids: ep.task_ids.clone(),
                exploration_budget: budget,
            }),
            goal: Some(GoalView::of(ep)),
        }
    }

    pub fn client_hello() -> Self {
        ProtocolMessage::Hello {
            version: PROTOCOL_VERSION,
            episode: None,
            goal: None,
        }
    }

    pub fn error(code: ErrorCode, text: impl Into<String>) -> Self {
        ProtocolMessage::Error {
            code,
            text: text.into(),
        }
    }

    /// One line of the wire format, without the trailing newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("protocol messages serialise")
    }

    pub fn from_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line.trim_end())
    }
}
