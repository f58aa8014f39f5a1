use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use super::episode::{
    BoundEpisode, Embodiment, EnergyConstants, EpisodeConfig, EpisodeError, NoiseConfig,
};
use super::{Action, AgentState, Observation, Odometry, VisibleObject};
use crate::geom::{
    planar_distance_to_footprint, ray_cast, wrap_angle, OrientedBox, Pose, Ray, Vec3,
};
use crate::scene::{open_fraction, settle_height, WorldState};

/// Sub-steps used to sweep the agent disc along a forward move.
const SWEEP_SAMPLES: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("no episode has been reset")]
    NoEpisode,
    #[error("episode is over (stopped or out of ticks)")]
    EpisodeOver,
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error(transparent)]
    Episode(#[from] EpisodeError),
}

#[derive(Debug, Clone)]
struct Running {
    episode: Arc<BoundEpisode>,
    state: WorldState,
    max_ticks: u32,
    tick: u32,
    energy: f64,
    path_length: f64,
    rng: ChaCha8Rng,
    odom: Odometry,
    log: Vec<crate::sim::Action>,
    stopped: bool,
    last_ok: bool,
    haptic: bool,
}

/// One environment instance. Not shared between threads while running;
/// run several instances for concurrency.
#[derive(Debug, Clone, Default)]
pub struct Env {
    run: Option<Running>,
}

fn gauss(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    sigma * z
}

pub(crate) fn eye(agent: &AgentState, emb: &Embodiment) -> Vec3 {
    Vec3::new(agent.position[0], agent.position[1], emb.eye_height)
}

fn view_direction(heading: f64, pitch: f64) -> Vec3 {
    Vec3::new(
        pitch.cos() * heading.cos(),
        pitch.cos() * heading.sin(),
        pitch.sin(),
    )
}

/// Ray from the eye through the crosshair, limited to the pick range.
pub(crate) fn pick_ray(agent: &AgentState, emb: &Embodiment) -> Ray {
    Ray::new(
        eye(agent, emb),
        view_direction(agent.heading, agent.pitch + emb.crosshair_pitch),
        emb.pick_range,
    )
    .expect("pick ray is well formed")
}

/// Boxes the agent disc may not overlap: every static or placed object
/// whose vertical extent meets the agent's body.
pub(crate) fn blocking_boxes(state: &WorldState, height: f64) -> Vec<OrientedBox> {
    state
        .solid_boxes()
        .into_iter()
        .map(|(_, b)| b)
        .filter(|b| b.top_z() > 1e-6 && b.bottom_z() < height)
        .collect()
}

pub(crate) fn disc_collides(p: [f64; 2], radius: f64, blockers: &[OrientedBox]) -> bool {
    blockers
        .iter()
        .any(|b| planar_distance_to_footprint(p, b) < radius)
}

/// Whether a forward step from the current pose is collision-free.
pub(crate) fn forward_clear(state: &WorldState, emb: &Embodiment) -> bool {
    let a = &state.agent;
    stride_clear(
        &blocking_boxes(state, a.height),
        a.position,
        a.heading,
        a.radius,
        emb.step,
    )
}

/// Whether a disc can stride from `p` along `heading`: it is checked at
/// evenly spaced points along the stride.
pub(crate) fn stride_clear(
    blockers: &[OrientedBox],
    p: [f64; 2],
    heading: f64,
    radius: f64,
    step: f64,
) -> bool {
    let dir = [heading.cos(), heading.sin()];
    !(1..=SWEEP_SAMPLES).any(|k| {
        let f = step * k as f64 / SWEEP_SAMPLES as f64;
        disc_collides([p[0] + f * dir[0], p[1] + f * dir[1]], radius, blockers)
    })
}

/// Where the held object would come to rest if released now, or `None`
/// when nothing is held or a wall or tall fixture is in the way.
pub(crate) fn release_pose(state: &WorldState, emb: &Embodiment) -> Option<Pose> {
    release_pose_at(state, emb, state.agent.position, state.agent.heading)
}

/// `release_pose` for the agent standing at `position` facing `heading`.
pub(crate) fn release_pose_at(
    state: &WorldState,
    emb: &Embodiment,
    position: [f64; 2],
    heading: f64,
) -> Option<Pose> {
    let id = state.agent.held.as_deref()?;
    let x = position[0] + emb.release_distance * heading.cos();
    let y = position[1] + emb.release_distance * heading.sin();
    let current = state.object_box(id).ok()?;
    let probe = current.with_pose(current.pose().with_translation(Vec3::new(
        x,
        y,
        emb.carry_height,
    )));
    let (pmin, pmax) = probe.world_aabb();
    // Nothing goes through walls or tall fixtures.
    let walled = state.solid_boxes().iter().any(|(_, b)| {
        let (bmin, bmax) = b.world_aabb();
        b.top_z() > emb.carry_height
            && pmin.x < bmax.x
            && bmin.x < pmax.x
            && pmin.y < bmax.y
            && bmin.y < pmax.y
    });
    if walled {
        return None;
    }
    let z = settle_height(&probe, state) + probe.world_half_extents().z;
    Some(current.pose().with_translation(Vec3::new(x, y, z)))
}

/// Ids of placed objects whose centre is inside the view frustum, within
/// sensing range, and not hidden behind static layout.
pub fn visibility(state: &WorldState, agent: &AgentState, emb: &Embodiment) -> Vec<String> {
    let e = eye(agent, emb);
    let forward = view_direction(agent.heading, agent.pitch);
    let right = Vec3::new(agent.heading.sin(), -agent.heading.cos(), 0.0);
    let up = right.cross(&forward);
    let half_tan = (emb.fov / 2.0).tan();
    let statics = state.scene().statics();
    state
        .placed_ids()
        .filter(|id| {
            let Ok(b) = state.object_box(id) else {
                return false;
            };
            let c = b.center();
            let d = c - e;
            let dist = d.norm();
            if dist > emb.sensing_range {
                return false;
            }
            let z = d.dot(&forward);
            if z <= 0.0 || d.dot(&right).abs() > half_tan * z || d.dot(&up).abs() > half_tan * z {
                return false;
            }
            if dist < 1e-9 {
                return true;
            }
            let Ok(ray) = Ray::new(e, d, dist) else {
                return true;
            };
            !statics
                .iter()
                .filter(|s| !s.shape.contains_point(&c))
                .any(|s| ray.intersect(&s.shape).is_some_and(|t| t < dist - 1e-9))
        })
        .map(str::to_string)
        .collect()
}

fn carried_mass(state: &WorldState) -> f64 {
    state
        .agent
        .held
        .iter()
        .chain(&state.agent.backpack)
        .filter_map(|id| state.scene().spec(id).ok())
        .map(|s| s.mass)
        .sum()
}

/// Virtual work of one action, from the states before and after it.
/// Failed actions are charged for the attempt: a blocked move still costs
/// its full stride, a failed grab lifts nothing.
pub fn energy_of(
    action: &Action,
    before: &WorldState,
    after: &WorldState,
    emb: &Embodiment,
    k: &EnergyConstants,
) -> f64 {
    match action {
        Action::MoveForward => (k.agent_mass + carried_mass(before)) * k.c_move * emb.step,
        Action::TurnLeft | Action::TurnRight | Action::LookUp | Action::LookDown => k.c_turn,
        Action::Grab => match (&before.agent.held, &after.agent.held) {
            (None, Some(id)) => {
                after.scene().spec(id).map(|s| s.mass).unwrap_or(0.0) * k.gravity * k.lift_height
            }
            _ => 0.0,
        },
        Action::SetJoint { id, .. } => {
            let a = open_fraction(id, before).unwrap_or(0.0);
            let b = open_fraction(id, after).unwrap_or(0.0);
            k.c_joint * (a - b).abs()
        }
        Action::Release | Action::Stow | Action::Unstow { .. } | Action::Stop => 0.0,
    }
}

impl Env {
    pub fn new() -> Self {
        Self::default()
    }

    /// Binds the episode and resets to its initial state.
    pub fn reset(&mut self, episode: &EpisodeConfig) -> Result<Observation, SimError> {
        let bound = Arc::new(episode.bind()?);
        Ok(self.reset_bound(bound))
    }

    pub fn reset_bound(&mut self, episode: Arc<BoundEpisode>) -> Observation {
        let state = episode.initial.clone();
        let max_ticks = episode.config.max_ticks;
        self.reset_to_state(episode, state, max_ticks)
    }

    /// Resets into an arbitrary state of the episode's scene, e.g. the goal
    /// world explored before an experience-goal episode.
    pub fn reset_to_state(
        &mut self,
        episode: Arc<BoundEpisode>,
        mut state: WorldState,
        max_ticks: u32,
    ) -> Observation {
        let emb = episode.config.embodiment;
        state.agent.radius = emb.radius;
        state.agent.height = emb.height;
        state.agent.capacity = emb.capacity;
        let odom = Odometry {
            position: state.agent.position,
            heading: state.agent.heading,
        };
        let rng = ChaCha8Rng::seed_from_u64(episode.config.seed);
        self.run = Some(Running {
            episode,
            state,
            max_ticks,
            tick: 0,
            energy: 0.0,
            path_length: 0.0,
            rng,
            odom,
            log: Vec::new(),
            stopped: false,
            last_ok: true,
            haptic: false,
        });
        self.observe()
    }

    fn running(&self) -> Result<&Running, SimError> {
        self.run.as_ref().ok_or(SimError::NoEpisode)
    }

    pub fn is_active(&self) -> bool {
        self.run
            .as_ref()
            .is_some_and(|r| !r.stopped && r.tick < r.max_ticks)
    }

    pub fn episode(&self) -> Option<&Arc<BoundEpisode>> {
        self.run.as_ref().map(|r| &r.episode)
    }

    pub fn state(&self) -> Result<&WorldState, SimError> {
        Ok(&self.running()?.state)
    }

    pub fn tick(&self) -> u32 {
        self.run.as_ref().map_or(0, |r| r.tick)
    }

    pub fn energy(&self) -> f64 {
        self.run.as_ref().map_or(0.0, |r| r.energy)
    }

    /// Metres translated by the base since reset.
    pub fn path_length(&self) -> f64 {
        self.run.as_ref().map_or(0.0, |r| r.path_length)
    }

    pub fn stopped(&self) -> bool {
        self.run.as_ref().is_some_and(|r| r.stopped)
    }

    /// Actions applied since the last reset, in order.
    pub fn action_log(&self) -> &[Action] {
        self.run.as_ref().map_or(&[], |r| &r.log)
    }

    pub fn step(&mut self, action: Action) -> Result<Observation, SimError> {
        let run = self.run.as_mut().ok_or(SimError::NoEpisode)?;
        if run.stopped || run.tick >= run.max_ticks {
            return Err(SimError::EpisodeOver);
        }
        if let Action::SetJoint { fraction, .. } = &action {
            if !(0.0..=1.0).contains(fraction) {
                return Err(SimError::InvalidAction(format!(
                    "joint fraction {fraction} outside [0, 1]"
                )));
            }
        }
        let emb = run.episode.config.embodiment;
        let noise = run.episode.config.noise;
        let before = run.state.clone();
        let (ok, haptic) = run.apply(&action, &emb, &noise);
        run.follow_carried(&emb);
        run.energy += energy_of(
            &action,
            &before,
            &run.state,
            &emb,
            &run.episode.config.energy,
        );
        run.tick += 1;
        run.last_ok = ok;
        run.haptic = haptic;
        run.log.push(action);
        Ok(self.observe())
    }

    fn observe(&mut self) -> Observation {
        let run = self.run.as_mut().expect("observe after reset");
        let emb = run.episode.config.embodiment;
        let sigma = run.episode.config.noise.pose_sigma;
        let ids = visibility(&run.state, &run.state.agent, &emb);
        let mut visible = Vec::with_capacity(ids.len());
        for id in ids {
            let st = &run.state.objects[&id];
            let spec = run.state.scene().spec(&id).expect("bound id");
            let jitter = Vec3::new(
                gauss(&mut run.rng, sigma),
                gauss(&mut run.rng, sigma),
                gauss(&mut run.rng, sigma),
            );
            let open_jitter = gauss(&mut run.rng, sigma);
            let open = open_fraction(&id, &run.state).ok().map(|f| {
                if sigma > 0.0 {
                    (f + open_jitter).clamp(0.0, 1.0)
                } else {
                    f
                }
            });
            let pose = if sigma > 0.0 {
                st.pose.with_translation(st.pose.translation() + jitter)
            } else {
                st.pose
            };
            visible.push(VisibleObject {
                id: id.clone(),
                category: spec.category.clone(),
                pose,
                open_fraction: open,
            });
        }
        Observation {
            tick: run.tick,
            odometry: run.odom.clone(),
            pitch: run.state.agent.pitch,
            visible,
            held: run.state.agent.held.clone(),
            backpack: run.state.agent.backpack.clone(),
            haptic: run.haptic,
            last_action_ok: run.last_ok,
            done: run.stopped || run.tick >= run.max_ticks,
        }
    }

    /// Resets and applies `actions` in order, stopping early if the episode
    /// ends.
    pub fn replay(episode: Arc<BoundEpisode>, actions: &[Action]) -> Result<Env, SimError> {
        let mut env = Env::new();
        env.reset_bound(episode);
        for a in actions {
            env.step(a.clone())?;
        }
        Ok(env)
    }
}

impl Running {
    fn apply(&mut self, action: &Action, emb: &Embodiment, noise: &NoiseConfig) -> (bool, bool) {
        match action {
            Action::MoveForward => (self.move_forward(emb, noise), false),
            Action::TurnLeft | Action::TurnRight => {
                let sign = if matches!(action, Action::TurnLeft) {
                    1.0
                } else {
                    -1.0
                };
                let a = &mut self.state.agent;
                a.heading = wrap_angle(a.heading + sign * emb.turn);
                let drift = gauss(&mut self.rng, noise.odom_heading_drift);
                self.odom.heading = wrap_angle(self.odom.heading + sign * emb.turn + drift);
                (true, false)
            }
            Action::LookUp | Action::LookDown => {
                let sign = if matches!(action, Action::LookUp) {
                    1.0
                } else {
                    -1.0
                };
                let a = &mut self.state.agent;
                let next = (a.pitch + sign * emb.look).clamp(-emb.pitch_limit, emb.pitch_limit);
                let changed = (next - a.pitch).abs() > 1e-12;
                a.pitch = next;
                (changed, false)
            }
            Action::Grab => self.grab(emb),
            Action::Release => self.release(emb),
            Action::Stow => {
                let a = &mut self.state.agent;
                match a.held.take() {
                    Some(id) if a.backpack.len() < a.capacity => {
                        a.backpack.push(id);
                        (true, false)
                    }
                    other => {
                        a.held = other;
                        (false, false)
                    }
                }
            }
            Action::Unstow { id } => {
                let a = &mut self.state.agent;
                match a.backpack.iter().position(|b| b == id) {
                    Some(i) if a.held.is_none() => {
                        a.held = Some(a.backpack.remove(i));
                        (true, false)
                    }
                    _ => (false, false),
                }
            }
            Action::SetJoint { id, fraction } => {
                let articulated = self
                    .state
                    .scene()
                    .spec(id)
                    .is_ok_and(|s| s.articulation.is_some());
                if !articulated || self.state.is_carried(id) {
                    return (false, false);
                }
                let in_view = visibility(&self.state, &self.state.agent, emb)
                    .iter()
                    .any(|v| v == id);
                let reach = self
                    .state
                    .object_box(id)
                    .map(|b| b.distance_to_point(&eye(&self.state.agent, emb)))
                    .unwrap_or(f64::INFINITY);
                if !in_view || reach > emb.pick_range {
                    return (false, false);
                }
                let ok = self.state.set_open_fraction(id, *fraction).is_ok();
                (ok, ok)
            }
            Action::Stop => {
                self.stopped = true;
                (true, false)
            }
        }
    }

    fn move_forward(&mut self, emb: &Embodiment, noise: &NoiseConfig) -> bool {
        if !forward_clear(&self.state, emb) {
            return false;
        }
        let a = &self.state.agent;
        let start = a.position;
        self.state.agent.position = [
            start[0] + emb.step * a.heading.cos(),
            start[1] + emb.step * a.heading.sin(),
        ];
        self.path_length += emb.step;
        let sigma = noise.odom_drift_per_m * emb.step;
        let (dx, dy) = (gauss(&mut self.rng, sigma), gauss(&mut self.rng, sigma));
        let h = self.odom.heading;
        self.odom.position[0] += emb.step * h.cos() + dx;
        self.odom.position[1] += emb.step * h.sin() + dy;
        true
    }

    fn grab(&mut self, emb: &Embodiment) -> (bool, bool) {
        if self.state.agent.held.is_some() {
            return (false, false);
        }
        let ray = pick_ray(&self.state.agent, emb);
        let solids = self.state.solid_boxes();
        let Some((hit, _)) = ray_cast(&ray, solids.iter().map(|(id, b)| (*id, b))) else {
            return (false, false);
        };
        let movable = self.state.scene().spec(hit).is_ok_and(|s| s.movable);
        if !movable {
            return (false, true);
        }
        self.state.agent.held = Some(hit.to_string());
        (true, true)
    }

    fn release(&mut self, emb: &Embodiment) -> (bool, bool) {
        let Some(id) = self.state.agent.held.clone() else {
            return (false, false);
        };
        let Some(pose) = release_pose(&self.state, emb) else {
            return (false, true);
        };
        self.state.agent.held = None;
        self.state
            .objects
            .get_mut(&id)
            .expect("held object exists")
            .pose = pose;
        (true, true)
    }

    /// Carried objects ride with the agent at carry height.
    fn follow_carried(&mut self, emb: &Embodiment) {
        let a = &self.state.agent;
        let p = Vec3::new(a.position[0], a.position[1], emb.carry_height);
        let ids: Vec<String> = a.held.iter().chain(&a.backpack).cloned().collect();
        for id in ids {
            if let Some(st) = self.state.objects.get_mut(&id) {
                st.pose = st.pose.with_translation(p);
            }
        }
    }
}
