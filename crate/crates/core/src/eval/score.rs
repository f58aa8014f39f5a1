use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::goals::{
    default_harm_clause, geometric_verdict, target_from_state, GeometricTarget, GoalSpec,
    ToleranceSpec,
};
use crate::pdl::{eval_expr, EvalContext, EvalError, PredExpr};
use crate::scene::{SceneError, WorldState};
use crate::sim::BoundEpisode;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoreError {
    #[error("no scored tests")]
    Empty,
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreOutcome {
    pub completion: f64,
    pub harm_pass: bool,
    pub success: bool,
}

/// Completion is the passing fraction, forced to zero when the harm test
/// fails; success needs every test and the harm test.
pub fn score_verdicts(verdicts: &[bool], harm_pass: bool) -> Result<ScoreOutcome, ScoreError> {
    if verdicts.is_empty() {
        return Err(ScoreError::Empty);
    }
    let passed = verdicts.iter().filter(|v| **v).count();
    let all = passed == verdicts.len();
    Ok(ScoreOutcome {
        completion: if harm_pass {
            passed as f64 / verdicts.len() as f64
        } else {
            0.0
        },
        harm_pass,
        success: harm_pass && all,
    })
}

/// Success weighted by path length: `S · l / max(l_a, l)`.
///
/// A successful episode with `l = l_a = 0` scores 1.
pub fn spl(success: bool, l: f64, l_a: f64) -> f64 {
    if !success {
        return 0.0;
    }
    let denom = l_a.max(l);
    if denom == 0.0 {
        return 1.0;
    }
    l / denom
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScoredTest {
    Target {
        id: String,
        target: GeometricTarget,
        tol: ToleranceSpec,
    },
    Expr(PredExpr),
}

impl ScoredTest {
    pub fn source(&self) -> String {
        match self {
            ScoredTest::Target { id, .. } => format!("(target {id})"),
            ScoredTest::Expr(e) => e.to_string(),
        }
    }

    pub fn verdict(&self, ctx: &EvalContext<'_>) -> Result<bool, ScoreError> {
        Ok(match self {
            ScoredTest::Target { id, target, tol } => geometric_verdict(id, target, tol, ctx.s)?,
            ScoredTest::Expr(e) => eval_expr(e, ctx)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredicateVerdict {
    pub source: String,
    pub verdict: bool,
}

/// The scored tests and harm clause an episode is judged by.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoringPlan {
    pub scored: Vec<ScoredTest>,
    pub harm: Option<PredExpr>,
}

impl ScoringPlan {
    pub fn from_episode(ep: &BoundEpisode) -> Result<Self, ScoreError> {
        let plan = match &ep.goal {
            GoalSpec::Geometric {
                targets,
                tolerances,
            } => ScoringPlan {
                scored: targets
                    .iter()
                    .map(|(id, t)| ScoredTest::Target {
                        id: id.clone(),
                        target: *t,
                        tol: tolerances[id],
                    })
                    .collect(),
                harm: default_harm_clause(&ep.scene, &ep.task_ids),
            },
            GoalSpec::Experience { goal_state, .. } => ScoringPlan {
                scored: ep
                    .task_ids
                    .iter()
                    .map(|id| {
                        Ok(ScoredTest::Target {
                            id: id.clone(),
                            target: target_from_state(id, goal_state)?,
                            tol: ep.config.tolerance,
                        })
                    })
                    .collect::<Result<_, SceneError>>()?,
                harm: default_harm_clause(&ep.scene, &ep.task_ids),
            },
            GoalSpec::Predicate { program } => ScoringPlan {
                scored: program
                    .scored
                    .iter()
                    .cloned()
                    .map(ScoredTest::Expr)
                    .collect(),
                harm: program.harm.clone(),
            },
        };
        if plan.scored.is_empty() {
            return Err(ScoreError::Empty);
        }
        Ok(plan)
    }

    pub fn evaluate(
        &self,
        ctx: &EvalContext<'_>,
    ) -> Result<(Vec<PredicateVerdict>, bool), ScoreError> {
        let verdicts = self
            .scored
            .iter()
            .map(|t| {
                Ok(PredicateVerdict {
                    source: t.source(),
                    verdict: t.verdict(ctx)?,
                })
            })
            .collect::<Result<Vec<_>, ScoreError>>()?;
        let harm = match &self.harm {
            Some(h) => eval_expr(h, ctx)?,
            None => true,
        };
        Ok((verdicts, harm))
    }
}

/// Scores a final state of a bound episode.
pub fn score(
    ep: &BoundEpisode,
    final_state: &WorldState,
) -> Result<(ScoreOutcome, Vec<PredicateVerdict>), ScoreError> {
    let plan = ScoringPlan::from_episode(ep)?;
    let ctx = EvalContext {
        s0: &ep.initial,
        s: final_state,
        s_star: ep.goal_state.as_ref(),
        harm_tol: ep.config.harm_tolerance,
        contact_eps: ep.config.contact_eps,
    };
    let (verdicts, harm) = plan.evaluate(&ctx)?;
    let flags: Vec<bool> = verdicts.iter().map(|v| v.verdict).collect();
    Ok((score_verdicts(&flags, harm)?, verdicts))
}
