//! Metrics: gated completion, success, SPL with a shortest-path oracle,
//! and report assembly.

pub mod nav;
pub mod path;
mod report;
mod score;
pub mod tour;

pub use path::{
    plan_tour, shortest_path_length, tour_problem, PathError, Site, TourPlan, TourProblem,
};
pub use report::{
    assemble_report, evaluate_final, Accounting, EvaluationReport, LatencyStats, ReportError,
};
pub use score::{
    score, score_verdicts, spl, PredicateVerdict, ScoreError, ScoreOutcome, ScoredTest, ScoringPlan,
};
