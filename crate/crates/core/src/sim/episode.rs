use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::goals::{derive_task_set, BindError, GoalDoc, GoalSpec, ToleranceSpec};
use crate::scene::{Scene, SceneError, StateDoc, WorldState, DEFAULT_CONTACT_EPS};

/// Body, sensor and actuator parameters of the agent. Angles in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Embodiment {
    pub radius: f64,
    pub height: f64,
    pub eye_height: f64,
    pub step: f64,
    pub turn: f64,
    pub look: f64,
    pub pitch_limit: f64,
    /// Maximum magic-pointer reach along the pick ray.
    pub pick_range: f64,
    pub fov: f64,
    /// Pitch of the crosshair relative to the view axis.
    pub crosshair_pitch: f64,
    pub sensing_range: f64,
    pub carry_height: f64,
    pub release_distance: f64,
    pub capacity: usize,
}

impl Default for Embodiment {
    fn default() -> Self {
        Self {
            radius: 0.2,
            height: 1.8,
            eye_height: 1.5,
            step: 0.25,
            turn: 10f64.to_radians(),
            look: 10f64.to_radians(),
            pitch_limit: 60f64.to_radians(),
            pick_range: 1.5,
            fov: PI / 2.0,
            crosshair_pitch: -10f64.to_radians(),
            sensing_range: 10.0,
            carry_height: 1.0,
            release_distance: 0.5,
            capacity: 0,
        }
    }
}

/// Observation noise. All zero gives exact observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Std-dev of observed object positions and open fractions, per tick.
    pub pose_sigma: f64,
    /// Std-dev of odometry position drift per metre travelled.
    pub odom_drift_per_m: f64,
    /// Std-dev of odometry heading drift per turn.
    pub odom_heading_drift: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            pose_sigma: 0.02,
            odom_drift_per_m: 0.01,
            odom_heading_drift: 0.01,
        }
    }
}

impl NoiseConfig {
    pub fn off() -> Self {
        Self {
            pose_sigma: 0.0,
            odom_drift_per_m: 0.0,
            odom_heading_drift: 0.0,
        }
    }

    pub fn is_off(&self) -> bool {
        *self == Self::off()
    }
}

/// Declared constants of the virtual-work energy model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnergyConstants {
    /// kg
    pub agent_mass: f64,
    /// J/(kg·m)
    pub c_move: f64,
    /// J per turn or look
    pub c_turn: f64,
    /// J per unit of open fraction changed
    pub c_joint: f64,
    /// m, height objects are lifted to when grabbed
    pub lift_height: f64,
    pub gravity: f64,
}

impl Default for EnergyConstants {
    fn default() -> Self {
        Self {
            agent_mass: 20.0,
            c_move: 2.0,
            c_turn: 1.0,
            c_joint: 5.0,
            lift_height: 1.0,
            gravity: 9.81,
        }
    }
}

fn default_harm_tol() -> ToleranceSpec {
    ToleranceSpec::harm_default()
}

fn default_contact_eps() -> f64 {
    DEFAULT_CONTACT_EPS
}

/// One episode document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub id: String,
    pub seed: u64,
    pub scene: Scene,
    /// `s0`: initial object states and agent spawn.
    pub initial: StateDoc,
    pub goal: GoalDoc,
    #[serde(default)]
    pub task_ids: Vec<String>,
    /// Default tolerance for goal targets without their own.
    #[serde(default)]
    pub tolerance: ToleranceSpec,
    #[serde(default = "default_harm_tol")]
    pub harm_tolerance: ToleranceSpec,
    #[serde(default = "default_contact_eps")]
    pub contact_eps: f64,
    pub max_ticks: u32,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub embodiment: Embodiment,
    #[serde(default)]
    pub energy: EnergyConstants,
    /// Redact predicate thresholds from what agents are told.
    #[serde(default)]
    pub hidden_params: bool,
    /// Reference goal state for goals that do not carry one (predicates);
    /// used for the shortest-path oracle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal_state: Option<StateDoc>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EpisodeError {
    #[error("initial state: {0}")]
    Initial(SceneError),
    #[error("goal: {0}")]
    Goal(#[from] BindError),
    #[error("task id `{0}` does not name a scene object")]
    UnknownTask(String),
    #[error("task ids {task_ids:?} do not match goal targets {targets:?}")]
    TaskMismatch {
        task_ids: Vec<String>,
        targets: Vec<String>,
    },
    #[error("max_ticks must be positive")]
    ZeroTicks,
    #[error("reference goal state: {0}")]
    GoalState(SceneError),
}

/// An episode resolved against its scene, ready to run or score.
#[derive(Debug, Clone)]
pub struct BoundEpisode {
    pub config: EpisodeConfig,
    pub scene: Arc<Scene>,
    pub initial: WorldState,
    pub goal: GoalSpec,
    /// Task objects: explicit, goal targets, or derived from an experience goal.
    pub task_ids: Vec<String>,
    pub goal_state: Option<WorldState>,
}

impl EpisodeConfig {
    pub fn bind(&self) -> Result<BoundEpisode, EpisodeError> {
        if self.max_ticks == 0 {
            return Err(EpisodeError::ZeroTicks);
        }
        let scene = Arc::new(self.scene.clone());
        let mut doc = self.initial.clone();
        doc.agent.radius = self.embodiment.radius;
        doc.agent.height = self.embodiment.height;
        doc.agent.capacity = self.embodiment.capacity;
        let initial = WorldState::from_doc(scene.clone(), doc).map_err(EpisodeError::Initial)?;
        for id in &self.task_ids {
            if !scene.has_object(id) {
                return Err(EpisodeError::UnknownTask(id.clone()));
            }
        }
        let goal = self.goal.bind(&scene, &self.tolerance)?;
        let mut goal_state = match &self.goal_state {
            Some(d) => Some(
                WorldState::from_doc(scene.clone(), d.clone()).map_err(EpisodeError::GoalState)?,
            ),
            None => None,
        };
        let task_ids = match &goal {
            GoalSpec::Geometric { targets, .. } => {
                let keys: Vec<String> = targets.keys().cloned().collect();
                let mut given = self.task_ids.clone();
                given.sort();
                if !given.is_empty() && given != keys {
                    return Err(EpisodeError::TaskMismatch {
                        task_ids: self.task_ids.clone(),
                        targets: keys,
                    });
                }
                keys
            }
            GoalSpec::Predicate { .. } => self.task_ids.clone(),
            GoalSpec::Experience { goal_state: g, .. } => {
                goal_state = Some(g.clone());
                if self.task_ids.is_empty() {
                    derive_task_set(&initial, g, &self.tolerance)
                        .map_err(EpisodeError::GoalState)?
                } else {
                    self.task_ids.clone()
                }
            }
        };
        Ok(BoundEpisode {
            config: self.clone(),
            scene,
            initial,
            goal,
            task_ids,
            goal_state,
        })
    }
}
