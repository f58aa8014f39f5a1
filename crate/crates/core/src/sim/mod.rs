//! Kinematic environment: a holonomic disc agent with a magic-pointer arm,
//! observation synthesis with noise, and tick/energy accounting.

mod env;
mod episode;

use serde::{Deserialize, Serialize};

use crate::geom::Pose;

pub(crate) use env::{blocking_boxes, disc_collides, eye, pick_ray, release_pose_at, stride_clear};
pub use env::{energy_of, visibility, Env, SimError};
pub use episode::{
    BoundEpisode, Embodiment, EnergyConstants, EpisodeConfig, EpisodeError, NoiseConfig,
};

fn default_height() -> f64 {
    1.8
}

fn default_radius() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    /// Base position on the floor plane.
    #[serde(default)]
    pub position: [f64; 2],
    /// Radians, counter-clockwise from +x.
    #[serde(default)]
    pub heading: f64,
    /// Radians, positive looks up.
    #[serde(default)]
    pub pitch: f64,
    #[serde(default = "default_height")]
    pub height: f64,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub held: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub backpack: Vec<String>,
    #[serde(default)]
    pub capacity: usize,
}

impl Default for AgentState {
    fn default() -> Self {
        Self {
            position: [0.0, 0.0],
            heading: 0.0,
            pitch: 0.0,
            height: default_height(),
            radius: default_radius(),
            held: None,
            backpack: Vec::new(),
            capacity: 0,
        }
    }
}

impl AgentState {
    pub fn at(x: f64, y: f64, heading: f64) -> Self {
        Self {
            position: [x, y],
            heading,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Action {
    MoveForward,
    TurnLeft,
    TurnRight,
    LookUp,
    LookDown,
    Grab,
    Release,
    Stow,
    Unstow { id: String },
    SetJoint { id: String, fraction: f64 },
    Stop,
}

impl Action {
    /// One value of every variant, for exhaustive tests.
    pub fn examples() -> Vec<Action> {
        vec![
            Action::MoveForward,
            Action::TurnLeft,
            Action::TurnRight,
            Action::LookUp,
            Action::LookDown,
            Action::Grab,
            Action::Release,
            Action::Stow,
            Action::Unstow { id: "obj".into() },
            Action::SetJoint {
                id: "obj".into(),
                fraction: 0.5,
            },
            Action::Stop,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Odometry {
    pub position: [f64; 2],
    pub heading: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibleObject {
    pub id: String,
    pub category: String,
    pub pose: Pose,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub open_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub tick: u32,
    pub odometry: Odometry,
    /// Exact head pitch; the agent commands it directly.
    pub pitch: f64,
    pub visible: Vec<VisibleObject>,
    #[serde(default)]
    pub held: Option<String>,
    #[serde(default)]
    pub backpack: Vec<String>,
    /// The last grab, release or joint action touched something.
    pub haptic: bool,
    pub last_action_ok: bool,
    /// No further actions are accepted.
    #[serde(default)]
    pub done: bool,
}
