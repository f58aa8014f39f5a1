//! Deterministic rearrangement simulation and evaluation.
//!
//! A world of boxes moves from an initial state towards a goal under the
//! actions of an agent; the evaluation side scores the final state against
//! geometric, predicate or experience goals.

pub mod eval;
pub mod gen;
pub mod geom;
pub mod goals;
pub mod harness;
pub mod pdl;
pub mod scene;
pub mod sim;

pub use eval::EvaluationReport;
pub use geom::{OrientedBox, Pose};
pub use goals::{GoalDoc, GoalSpec, ToleranceSpec};
pub use pdl::PredicateProgram;
pub use scene::{Scene, WorldState};
pub use sim::{Action, Env, EpisodeConfig, Observation};
