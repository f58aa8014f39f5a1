//! Goal specifications and the function that derives them from an initial
//! state and a goal state.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{
    box_iou, exceeds, rotation_angle, translation_distance, within, OrientedBox, Pose,
};
use crate::pdl::{BoxLit, PredExpr, PredicateProgram};
use crate::scene::{open_fraction, state_diff, Scene, SceneError, StateDoc, WorldState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GoalError {
    #[error("task set is empty")]
    EmptyTaskSet,
    #[error("unknown task object `{0}`")]
    UnknownTask(String),
    #[error("object `{0}` is neither movable nor articulated")]
    NotManipulable(String),
    #[error("unsupported goal kind `{0}`")]
    Unsupported(String),
    #[error("invalid tolerance: {0}")]
    InvalidTolerance(String),
    #[error("exploration budget must be positive")]
    ZeroBudget,
    #[error("target of `{0}` cannot be expressed as a predicate: {1}")]
    NotExpressible(String, &'static str),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

/// Per-object thresholds. Distances and angles pass when `<=` the threshold;
/// IoU passes when strictly greater than `min_iou`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceSpec {
    /// metres
    pub translation: f64,
    /// radians; π disables the rotation test
    pub rotation: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_iou: Option<f64>,
    /// open-fraction window half width
    pub open: f64,
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        Self {
            translation: 1.0,
            rotation: PI,
            min_iou: Some(0.5),
            open: 0.2,
        }
    }
}

impl ToleranceSpec {
    /// Thresholds used by `unmoved` checks when an episode does not set them.
    pub fn harm_default() -> Self {
        Self {
            translation: 0.05,
            rotation: 0.1,
            min_iou: None,
            open: 0.05,
        }
    }

    pub fn validate(&self) -> Result<(), GoalError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.translation) || !positive(self.rotation) || !positive(self.open) {
            return Err(GoalError::InvalidTolerance(format!("{self:?}")));
        }
        if let Some(t) = self.min_iou {
            if !(t > 0.0 && t <= 1.0) {
                return Err(GoalError::InvalidTolerance(format!("min_iou {t}")));
            }
        }
        Ok(())
    }
}

/// Acceptance window `[lo, hi]` for an open fraction around a target.
pub fn open_window(target: f64, tol: f64) -> (f64, f64) {
    ((target - tol).max(0.0), (target + tol).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricTarget {
    pub pose: Pose,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub open_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GoalSpec {
    Geometric {
        targets: BTreeMap<String, GeometricTarget>,
        tolerances: BTreeMap<String, ToleranceSpec>,
    },
    Predicate {
        program: PredicateProgram,
    },
    Experience {
        goal_state: WorldState,
        exploration_budget: u32,
    },
}

impl GoalSpec {
    pub fn kind(&self) -> GoalKind {
        match self {
            GoalSpec::Geometric { .. } => GoalKind::Geometric,
            GoalSpec::Predicate { .. } => GoalKind::Predicate,
            GoalSpec::Experience {
                exploration_budget, ..
            } => GoalKind::Experience {
                budget: *exploration_budget,
            },
        }
    }

    pub fn to_doc(&self) -> GoalDoc {
        match self {
            GoalSpec::Geometric {
                targets,
                tolerances,
            } => GoalDoc::Geometric {
                targets: targets.clone(),
                tolerances: tolerances.clone(),
            },
            GoalSpec::Predicate { program } => GoalDoc::Predicate {
                program: program.to_string(),
            },
            GoalSpec::Experience {
                goal_state,
                exploration_budget,
            } => GoalDoc::Experience {
                goal_state: goal_state.to_doc(),
                exploration_budget: *exploration_budget,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GoalKind {
    Geometric,
    Predicate,
    Experience { budget: u32 },
}

/// File form of a goal. Image and language goals parse but are rejected
/// when bound to a scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GoalDoc {
    Geometric {
        targets: BTreeMap<String, GeometricTarget>,
        #[serde(default)]
        tolerances: BTreeMap<String, ToleranceSpec>,
    },
    Predicate {
        program: String,
    },
    Experience {
        goal_state: StateDoc,
        exploration_budget: u32,
    },
    Image {
        #[serde(default)]
        uri: String,
    },
    Language {
        #[serde(default)]
        text: String,
    },
}

impl GoalDoc {
    /// Resolves the document against a scene, checking every referenced id.
    /// Geometric targets without an explicit tolerance get `default_tol`.
    pub fn bind(
        &self,
        scene: &Arc<Scene>,
        default_tol: &ToleranceSpec,
    ) -> Result<GoalSpec, BindError> {
        match self {
            GoalDoc::Geometric {
                targets,
                tolerances,
            } => {
                for id in targets.keys() {
                    check_manipulable(scene, id)?;
                    let spec = scene.spec(id)?;
                    if targets[id].open_fraction.is_some() && spec.articulation.is_none() {
                        return Err(SceneError::NotArticulated(id.clone()).into());
                    }
                }
                if let Some(id) = tolerances.keys().find(|id| !targets.contains_key(*id)) {
                    return Err(GoalError::UnknownTask(id.clone()).into());
                }
                let tolerances = targets
                    .keys()
                    .map(|id| {
                        let tol = tolerances.get(id).copied().unwrap_or(*default_tol);
                        tol.validate().map(|_| (id.clone(), tol))
                    })
                    .collect::<Result<_, _>>()?;
                Ok(GoalSpec::Geometric {
                    targets: targets.clone(),
                    tolerances,
                })
            }
            GoalDoc::Predicate { program } => {
                let program: PredicateProgram = program.parse()?;
                program.bind(scene)?;
                Ok(GoalSpec::Predicate { program })
            }
            GoalDoc::Experience {
                goal_state,
                exploration_budget,
            } => {
                if *exploration_budget == 0 {
                    return Err(GoalError::ZeroBudget.into());
                }
                let goal_state = WorldState::from_doc(scene.clone(), goal_state.clone())?;
                Ok(GoalSpec::Experience {
                    goal_state,
                    exploration_budget: *exploration_budget,
                })
            }
            GoalDoc::Image { .. } => Err(GoalError::Unsupported("image".into()).into()),
            GoalDoc::Language { .. } => Err(GoalError::Unsupported("language".into()).into()),
        }
    }
}

/// Failure to bind a goal document to a scene.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum BindError {
    #[error(transparent)]
    Goal(#[from] GoalError),
    #[error(transparent)]
    Parse(#[from] crate::pdl::ParseError),
    #[error(transparent)]
    Pdl(#[from] crate::pdl::EvalError),
}

impl From<SceneError> for BindError {
    fn from(e: SceneError) -> Self {
        BindError::Goal(GoalError::Scene(e))
    }
}

fn check_manipulable(scene: &Scene, id: &str) -> Result<(), GoalError> {
    let spec = scene
        .spec(id)
        .map_err(|_| GoalError::UnknownTask(id.to_string()))?;
    if !spec.movable && spec.articulation.is_none() {
        return Err(GoalError::NotManipulable(id.to_string()));
    }
    Ok(())
}

/// Ids whose state differs between the two states beyond `tol`.
pub fn derive_task_set(
    s0: &WorldState,
    goal_state: &WorldState,
    tol: &ToleranceSpec,
) -> Result<Vec<String>, SceneError> {
    Ok(state_diff(s0, goal_state, tol)?
        .into_iter()
        .filter(|d| d.moved)
        .map(|d| d.id)
        .collect())
}

/// Reads a target for `id` out of a goal state.
pub fn target_from_state(id: &str, goal_state: &WorldState) -> Result<GeometricTarget, SceneError> {
    let st = goal_state.object(id)?;
    let open = match goal_state.scene().spec(id)?.articulation {
        Some(_) => Some(open_fraction(id, goal_state)?),
        None => None,
    };
    Ok(GeometricTarget {
        pose: st.pose,
        open_fraction: open,
    })
}

/// Produces the goal specification for `(s0, goal_state)` in the requested
/// form.
pub fn compile_goal(
    kind: GoalKind,
    s0: &WorldState,
    goal_state: &WorldState,
    task_ids: &[String],
    tol: &ToleranceSpec,
) -> Result<GoalSpec, GoalError> {
    if task_ids.is_empty() {
        return Err(GoalError::EmptyTaskSet);
    }
    tol.validate()?;
    crate::scene::check_same_ids(s0, goal_state)?;
    let scene = s0.scene();
    for id in task_ids {
        check_manipulable(scene, id)?;
    }
    match kind {
        GoalKind::Geometric => {
            let mut targets = BTreeMap::new();
            let mut tolerances = BTreeMap::new();
            for id in task_ids {
                targets.insert(id.clone(), target_from_state(id, goal_state)?);
                tolerances.insert(id.clone(), *tol);
            }
            Ok(GoalSpec::Geometric {
                targets,
                tolerances,
            })
        }
        GoalKind::Predicate => {
            let scored = task_ids
                .iter()
                .map(|id| {
                    let target = target_from_state(id, goal_state)?;
                    let half = scene.spec(id)?.half_extents_vec();
                    target_predicate(id, &target, half, tol)
                })
                .collect::<Result<Vec<_>, GoalError>>()?;
            Ok(GoalSpec::Predicate {
                program: PredicateProgram {
                    scored,
                    harm: default_harm_clause(scene, task_ids),
                },
            })
        }
        GoalKind::Experience { budget } => {
            if budget == 0 {
                return Err(GoalError::ZeroBudget);
            }
            Ok(GoalSpec::Experience {
                goal_state: goal_state.clone(),
                exploration_budget: budget,
            })
        }
    }
}

/// Predicate form of a single geometric target test.
///
/// Rotation tests have no predicate atom, so the tolerance must disable them,
/// and IoU targets must be axis-aligned to fit a box literal.
pub fn target_predicate(
    id: &str,
    target: &GeometricTarget,
    half_extents: crate::geom::Vec3,
    tol: &ToleranceSpec,
) -> Result<PredExpr, GoalError> {
    if tol.rotation < PI {
        return Err(GoalError::NotExpressible(
            id.into(),
            "rotation tolerance below π",
        ));
    }
    let center = target.pose.translation();
    let mut atoms = vec![PredExpr::WithinM {
        id: id.into(),
        point: center.into(),
        radius: tol.translation,
    }];
    if let Some(t) = tol.min_iou {
        let target_box = OrientedBox::new(target.pose, half_extents).map_err(SceneError::from)?;
        let half = target_box
            .aligned_half_extents()
            .ok_or(GoalError::NotExpressible(
                id.into(),
                "target box is not axis-aligned",
            ))?;
        atoms.push(PredExpr::IouGt {
            id: id.into(),
            target: BoxLit {
                center: center.into(),
                half_extents: half.into(),
            },
            threshold: t,
        });
    }
    if let Some(f) = target.open_fraction {
        let (lo, hi) = open_window(f, tol.open);
        atoms.push(PredExpr::OpenBetween {
            id: id.into(),
            lo,
            hi,
        });
    }
    Ok(if atoms.len() == 1 {
        atoms.pop().unwrap()
    } else {
        PredExpr::All(atoms)
    })
}

/// `unmoved` over every manipulable object outside the task set, or `None`
/// when there is nothing to protect.
pub fn default_harm_clause(scene: &Scene, task_ids: &[String]) -> Option<PredExpr> {
    let tasks: BTreeSet<&str> = task_ids.iter().map(String::as_str).collect();
    let atoms: Vec<PredExpr> = scene
        .specs()
        .filter(|s| (s.movable || s.articulation.is_some()) && !tasks.contains(s.id.as_str()))
        .map(|s| PredExpr::Unmoved { id: s.id.clone() })
        .collect();
    (!atoms.is_empty()).then_some(PredExpr::All(atoms))
}

/// Pass/fail of one geometric target against a state.
pub fn geometric_verdict(
    id: &str,
    target: &GeometricTarget,
    tol: &ToleranceSpec,
    state: &WorldState,
) -> Result<bool, SceneError> {
    let pose = state.object(id)?.pose;
    if exceeds(translation_distance(&pose, &target.pose), tol.translation) {
        return Ok(false);
    }
    if exceeds(rotation_angle(&pose, &target.pose), tol.rotation) {
        return Ok(false);
    }
    if let Some(t) = tol.min_iou {
        let current = state.object_box(id)?;
        let goal = current.with_pose(target.pose);
        if !exceeds(box_iou(&current, &goal), t) {
            return Ok(false);
        }
    }
    if let Some(f) = target.open_fraction {
        let (lo, hi) = open_window(f, tol.open);
        let now = open_fraction(id, state)?;
        if !(within(lo, now) && within(now, hi)) {
            return Ok(false);
        }
    }
    Ok(true)
}
