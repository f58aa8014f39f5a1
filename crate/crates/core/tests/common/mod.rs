#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use rearrange_core::geom::{OrientedBox, Pose, Vec3};
use rearrange_core::goals::{GeometricTarget, GoalDoc, ToleranceSpec};
use rearrange_core::scene::{
    JointKind, JointSpec, ObjectSpec, ObjectState, Scene, StateDoc, StaticBox,
};
use rearrange_core::sim::{
    AgentState, BoundEpisode, Embodiment, EnergyConstants, EpisodeConfig, NoiseConfig,
};

/// Hand-built single-room world.
pub struct World {
    pub statics: Vec<StaticBox>,
    pub specs: Vec<ObjectSpec>,
    pub states: BTreeMap<String, ObjectState>,
    pub agent: AgentState,
}

/// Walled room covering `[0, w] x [0, d]`.
pub fn room(w: f64, d: f64) -> World {
    let wall = |id: &str, min: [f64; 3], max: [f64; 3]| StaticBox {
        id: id.into(),
        shape: OrientedBox::from_min_max(Vec3::from(min), Vec3::from(max)).unwrap(),
    };
    World {
        statics: vec![
            wall("wall_s", [-0.1, -0.1, 0.0], [w + 0.1, 0.0, 2.5]),
            wall("wall_n", [-0.1, d, 0.0], [w + 0.1, d + 0.1, 2.5]),
            wall("wall_w", [-0.1, 0.0, 0.0], [0.0, d, 2.5]),
            wall("wall_e", [w, 0.0, 0.0], [w + 0.1, d, 2.5]),
        ],
        specs: Vec::new(),
        states: BTreeMap::new(),
        agent: AgentState::at(1.0, 1.0, 0.0),
    }
}

impl World {
    pub fn agent(mut self, x: f64, y: f64, heading: f64) -> Self {
        self.agent = AgentState::at(x, y, heading);
        self
    }

    pub fn pitch(mut self, pitch: f64) -> Self {
        self.agent.pitch = pitch;
        self
    }

    pub fn block(mut self, id: &str, min: [f64; 3], max: [f64; 3]) -> Self {
        self.statics.push(StaticBox {
            id: id.into(),
            shape: OrientedBox::from_min_max(Vec3::from(min), Vec3::from(max)).unwrap(),
        });
        self
    }

    /// Movable box resting with its centre at `(x, y, z)`.
    pub fn object(mut self, id: &str, half: [f64; 3], at: [f64; 3]) -> Self {
        self.specs.push(ObjectSpec {
            id: id.into(),
            category: id.split('_').next().unwrap().into(),
            half_extents: half,
            mass: 1.0,
            movable: true,
            articulation: None,
        });
        self.states.insert(
            id.into(),
            ObjectState::at(Pose::from_translation(Vec3::from(at))),
        );
        self
    }

    /// Fixed fridge-like fixture with a revolute door at `fraction` open.
    pub fn fixture(mut self, id: &str, at: [f64; 2], fraction: f64) -> Self {
        let joint = JointSpec {
            kind: JointKind::Revolute,
            limits: [0.0, 1.5],
        };
        self.specs.push(ObjectSpec {
            id: id.into(),
            category: "fridge".into(),
            half_extents: [0.35, 0.35, 0.9],
            mass: 40.0,
            movable: false,
            articulation: Some(joint),
        });
        self.states.insert(
            id.into(),
            ObjectState {
                pose: Pose::from_translation(Vec3::new(at[0], at[1], 0.9)),
                joint_position: Some(joint.position_at(fraction)),
            },
        );
        self
    }

    pub fn initial(&self) -> StateDoc {
        StateDoc {
            objects: self.states.clone(),
            agent: self.agent.clone(),
        }
    }

    pub fn episode(&self, id: &str, goal: GoalDoc) -> EpisodeConfig {
        EpisodeConfig {
            id: id.into(),
            seed: 7,
            scene: Scene::new(self.statics.clone(), self.specs.clone()).unwrap(),
            initial: self.initial(),
            goal,
            task_ids: Vec::new(),
            tolerance: ToleranceSpec::default(),
            harm_tolerance: ToleranceSpec::harm_default(),
            contact_eps: 0.02,
            max_ticks: 500,
            noise: NoiseConfig::off(),
            embodiment: Embodiment::default(),
            energy: EnergyConstants::default(),
            hidden_params: false,
            goal_state: None,
        }
    }
}

pub fn target(at: [f64; 3]) -> GeometricTarget {
    GeometricTarget {
        pose: Pose::from_translation(Vec3::from(at)),
        open_fraction: None,
    }
}

pub fn geometric(targets: &[(&str, GeometricTarget)]) -> GoalDoc {
    GoalDoc::Geometric {
        targets: targets.iter().map(|(id, t)| (id.to_string(), *t)).collect(),
        tolerances: BTreeMap::new(),
    }
}

pub fn bind(ep: &EpisodeConfig) -> Arc<BoundEpisode> {
    Arc::new(ep.bind().unwrap())
}

/// A 6 x 5 room with two tables, a cup on the first and a goal on the
/// second.
pub fn one_object() -> EpisodeConfig {
    let w = room(6.0, 5.0)
        .agent(1.0, 1.0, 0.0)
        .block("table_a", [1.5, 3.0, 0.0], [2.5, 3.8, 0.75])
        .block("table_b", [3.8, 1.0, 0.0], [4.8, 1.8, 0.75])
        .object("cup_0", [0.05, 0.05, 0.06], [2.0, 3.4, 0.81]);
    w.episode(
        "one-object",
        geometric(&[("cup_0", target([4.3, 1.2, 0.81]))]),
    )
}
