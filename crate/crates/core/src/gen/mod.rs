//! Procedural episodes: rooms of walls and furniture, objects on furniture
//! tops, and goals that move task objects to other surfaces.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::ops::Range;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::nav::Cell;
use crate::eval::path::{floor_grid, spawn_cell, stand_cell, task_sites, task_targets, Site};
use crate::eval::{score, PathError};
use crate::geom::{boxes_overlap, OrientedBox, Pose, Vec3};
use crate::goals::{compile_goal, GoalKind, ToleranceSpec};
use crate::scene::{
    JointKind, JointSpec, ObjectSpec, ObjectState, Scene, StateDoc, StaticBox, WorldState,
};
use crate::sim::{AgentState, EpisodeConfig, NoiseConfig};

pub const MAX_TASK_OBJECTS: usize = 5;
const WALL_THICKNESS: f64 = 0.1;
const WALL_HEIGHT: f64 = 2.5;
pub const DOOR_WIDTH: f64 = 1.4;
/// Clear floor kept between furniture pieces and walls.
const CLEARANCE: f64 = 0.7;
/// Objects occupy square slots of this half size on furniture tops.
const SLOT_HALF: f64 = 0.16;
/// Minimum planar distance between an object's start and goal.
const MIN_GOAL_DISTANCE: f64 = 1.5;
const EXPLORATION_BUDGET: u32 = 1000;
const MAX_ATTEMPTS: u32 = 64;

const SEEN_CATEGORIES: &[&str] = &[
    "cup", "bowl", "book", "can", "plate", "toy", "bottle", "box",
];
const NOVEL_CATEGORIES: &[&str] = &["vase", "shoe", "jar", "remote", "candle", "mug"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RoomLayout {
    Single,
    Multi { rooms: usize },
}

impl RoomLayout {
    pub fn rooms(self) -> usize {
        match self {
            RoomLayout::Single => 1,
            RoomLayout::Multi { rooms } => rooms,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoisePreset {
    Off,
    Low,
    Default,
    High,
}

impl NoisePreset {
    pub fn config(self) -> NoiseConfig {
        let scale = match self {
            NoisePreset::Off => return NoiseConfig::off(),
            NoisePreset::Low => 0.5,
            NoisePreset::Default => 1.0,
            NoisePreset::High => 2.5,
        };
        let d = NoiseConfig::default();
        NoiseConfig {
            pose_sigma: d.pose_sigma * scale,
            odom_drift_per_m: d.odom_drift_per_m * scale,
            odom_heading_drift: d.odom_heading_drift * scale,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenGoalKind {
    Geometric,
    Predicate,
    Experience,
}

/// Object categories drawn from; the novel pool is reserved for the test
/// split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoryPool {
    Seen,
    Novel,
}

impl CategoryPool {
    pub fn categories(self) -> &'static [&'static str] {
        match self {
            CategoryPool::Seen => SEEN_CATEGORIES,
            CategoryPool::Novel => NOVEL_CATEGORIES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DifficultyParams {
    pub n_task_objects: usize,
    pub n_distractors: usize,
    /// Articulated fixtures. When present, one of them is a task (its open
    /// state must change) and counts towards `n_task_objects`.
    pub n_articulated: usize,
    pub room: RoomLayout,
    /// Extra furniture, in `[0, 1)`.
    pub clutter_density: f64,
    /// Each task's goal is the start of the next one, so the later object
    /// has to be cleared first.
    pub require_ordering: bool,
    pub carry_capacity: usize,
    pub noise: NoisePreset,
    pub goal_kind: GenGoalKind,
    pub pool: CategoryPool,
    pub hidden_params: bool,
}

impl Default for DifficultyParams {
    fn default() -> Self {
        Self {
            n_task_objects: 2,
            n_distractors: 2,
            n_articulated: 0,
            room: RoomLayout::Single,
            clutter_density: 0.3,
            require_ordering: false,
            carry_capacity: 0,
            noise: NoisePreset::Off,
            goal_kind: GenGoalKind::Geometric,
            pool: CategoryPool::Seen,
            hidden_params: false,
        }
    }
}

impl DifficultyParams {
    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: &str| Err(GenError::InvalidParams(m.to_string()));
        if self.n_task_objects == 0 || self.n_task_objects > MAX_TASK_OBJECTS {
            return bad("n_task_objects must be in 1..=5");
        }
        if !(0.0..1.0).contains(&self.clutter_density) {
            return bad("clutter_density must be in [0, 1)");
        }
        if !(1..=4).contains(&self.room.rooms()) {
            return bad("room count must be in 1..=4");
        }
        if self.n_articulated > 3 || self.n_distractors > 12 {
            return bad("too many fixtures or distractors");
        }
        if matches!(self.room, RoomLayout::Multi { .. }) && self.room.rooms() < 2 {
            return bad("a multi-room layout needs at least 2 rooms");
        }
        Ok(())
    }

    /// Whether one task is an articulated fixture. A multi-room episode
    /// keeps at least one carried task so it can cross rooms.
    fn fixture_task(&self) -> bool {
        self.n_articulated > 0 && (self.n_task_objects >= 2 || self.room == RoomLayout::Single)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("invalid difficulty parameters: {0}")]
    InvalidParams(String),
    #[error("seed {seed}: could not place a valid episode after {attempts} attempts")]
    Placement { seed: u64, attempts: u32 },
}

/// Dataset splits over disjoint seed ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn seed_range(self) -> Range<u64> {
        match self {
            Split::Train => 0..1_000_000,
            Split::Val => 1_000_000..1_100_000,
            Split::Test => 2_000_000..2_100_000,
        }
    }

    pub fn pool(self) -> CategoryPool {
        match self {
            Split::Test => CategoryPool::Novel,
            _ => CategoryPool::Seen,
        }
    }

    pub fn of_seed(seed: u64) -> Option<Split> {
        [Split::Train, Split::Val, Split::Test]
            .into_iter()
            .find(|s| s.seed_range().contains(&seed))
    }
}

/// Episodes `0..count` of a split, with the split's category pool.
pub fn generate_split(
    split: Split,
    count: u64,
    params: &DifficultyParams,
) -> Result<Vec<EpisodeConfig>, GenError> {
    let range = split.seed_range();
    let params = DifficultyParams {
        pool: split.pool(),
        ..params.clone()
    };
    (range.start..range.start + count.min(range.end - range.start))
        .map(|seed| generate(seed, &params))
        .collect()
}

/// Tolerances used by generated episodes: centre within 1 m, open state
/// within 0.2, rotation and overlap ignored.
pub fn generated_tolerance() -> ToleranceSpec {
    ToleranceSpec {
        min_iou: None,
        ..ToleranceSpec::default()
    }
}

#[derive(Debug, Clone, Copy)]
struct Rect {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Rect {
    fn gap(&self, o: &Rect) -> f64 {
        let dx = (o.x0 - self.x1).max(self.x0 - o.x1).max(0.0);
        let dy = (o.y0 - self.y1).max(self.y0 - o.y1).max(0.0);
        dx.hypot(dy)
    }
}

#[derive(Debug, Clone)]
struct Surface {
    room: usize,
    top: f64,
    /// Area available for slot centres.
    area: Rect,
}

#[derive(Debug, Clone, Copy)]
struct Slot {
    surface: usize,
    x: f64,
    y: f64,
    yaw: f64,
}

impl Slot {
    fn rect(&self) -> Rect {
        Rect {
            x0: self.x - SLOT_HALF,
            x1: self.x + SLOT_HALF,
            y0: self.y - SLOT_HALF,
            y1: self.y + SLOT_HALF,
        }
    }

    fn dist(&self, o: &Slot) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }
}

fn aligned_box(cx: f64, cy: f64, hx: f64, hy: f64, z0: f64, z1: f64) -> OrientedBox {
    OrientedBox::from_min_max(
        Vec3::new(cx - hx, cy - hy, z0),
        Vec3::new(cx + hx, cy + hy, z1),
    )
    .expect("positive extents")
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

struct Builder<'a> {
    rng: ChaCha8Rng,
    params: &'a DifficultyParams,
    rooms: Vec<Rect>,
    doors: Vec<[f64; 2]>,
    statics: Vec<StaticBox>,
    footprints: Vec<Rect>,
    surfaces: Vec<Surface>,
    specs: Vec<ObjectSpec>,
    initial: BTreeMap<String, ObjectState>,
    goal: BTreeMap<String, ObjectState>,
    slots: Vec<Slot>,
}

impl<'a> Builder<'a> {
    fn new(seed: u64, attempt: u32, params: &'a DifficultyParams) -> Self {
        let mixed = seed ^ (u64::from(attempt)).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        Self {
            rng: ChaCha8Rng::seed_from_u64(mixed),
            params,
            rooms: Vec::new(),
            doors: Vec::new(),
            statics: Vec::new(),
            footprints: Vec::new(),
            surfaces: Vec::new(),
            specs: Vec::new(),
            initial: BTreeMap::new(),
            goal: BTreeMap::new(),
            slots: Vec::new(),
        }
    }

    fn wall(&mut self, x0: f64, y0: f64, x1: f64, y1: f64) {
        if x1 - x0 < 0.05 || y1 - y0 < 0.05 {
            return;
        }
        let id = format!("wall_{}", self.statics.len());
        let shape = aligned_box(
            (x0 + x1) / 2.0,
            (y0 + y1) / 2.0,
            (x1 - x0) / 2.0,
            (y1 - y0) / 2.0,
            0.0,
            WALL_HEIGHT,
        );
        self.statics.push(StaticBox { id, shape });
    }

    fn layout_rooms(&mut self) {
        let k = self.params.room.rooms();
        let depth = round2(self.rng.random_range(5.0..7.0));
        let mut x = 0.0;
        for _ in 0..k {
            let w = round2(
                self.rng
                    .random_range(if k == 1 { 6.0..9.0 } else { 5.0..7.0 }),
            );
            self.rooms.push(Rect {
                x0: x,
                x1: x + w,
                y0: 0.0,
                y1: depth,
            });
            x += w;
        }
        let t = WALL_THICKNESS;
        self.wall(-t, -t, x + t, 0.0);
        self.wall(-t, depth, x + t, depth + t);
        self.wall(-t, 0.0, 0.0, depth);
        self.wall(x, 0.0, x + t, depth);
        for r in 1..k {
            let xb = self.rooms[r].x0;
            let dy = round2(self.rng.random_range(0.8..depth - 0.8 - DOOR_WIDTH));
            self.wall(xb - t / 2.0, 0.0, xb + t / 2.0, dy);
            self.wall(xb - t / 2.0, dy + DOOR_WIDTH, xb + t / 2.0, depth);
            self.doors.push([xb, dy + DOOR_WIDTH / 2.0]);
        }
    }

    /// Finds a spot for an axis-aligned footprint in `room`, clear of walls,
    /// doors and other furniture.
    fn place_footprint(&mut self, room: usize, hx: f64, hy: f64) -> Option<(f64, f64, f64, f64)> {
        let r = self.rooms[room];
        for _ in 0..40 {
            let (hx, hy) = if self.rng.random_bool(0.5) {
                (hx, hy)
            } else {
                (hy, hx)
            };
            let lo_x = r.x0 + hx + CLEARANCE;
            let hi_x = r.x1 - hx - CLEARANCE;
            let lo_y = r.y0 + hy + CLEARANCE;
            let hi_y = r.y1 - hy - CLEARANCE;
            if lo_x >= hi_x || lo_y >= hi_y {
                return None;
            }
            let cx = round2(self.rng.random_range(lo_x..hi_x));
            let cy = round2(self.rng.random_range(lo_y..hi_y));
            let rect = Rect {
                x0: cx - hx,
                x1: cx + hx,
                y0: cy - hy,
                y1: cy + hy,
            };
            let near_door = self.doors.iter().any(|d| {
                let door = Rect {
                    x0: d[0],
                    x1: d[0],
                    y0: d[1],
                    y1: d[1],
                };
                rect.gap(&door) < 1.2
            });
            if near_door || self.footprints.iter().any(|f| f.gap(&rect) < 1.0) {
                continue;
            }
            self.footprints.push(rect);
            return Some((cx, cy, hx, hy));
        }
        None
    }

    fn furnish(&mut self) {
        let objects = self.params.n_task_objects * 2 + self.params.n_distractors;
        let per_room = 2
            + (self.params.clutter_density * 3.0).round() as usize
            + objects / (4 * self.rooms.len());
        for room in 0..self.rooms.len() {
            for _ in 0..per_room {
                let table = self.rng.random_bool(0.65);
                let (hx, hy, top) = if table {
                    (
                        round2(self.rng.random_range(0.5..0.7)),
                        round2(self.rng.random_range(0.35..0.45)),
                        0.75,
                    )
                } else {
                    (
                        round2(self.rng.random_range(0.4..0.6)),
                        round2(self.rng.random_range(0.3..0.35)),
                        0.95,
                    )
                };
                let Some((cx, cy, hx, hy)) = self.place_footprint(room, hx, hy) else {
                    continue;
                };
                let kind = if table { "table" } else { "shelf" };
                let id = format!("{kind}_{}", self.surfaces.len());
                self.statics.push(StaticBox {
                    id,
                    shape: aligned_box(cx, cy, hx, hy, 0.0, top),
                });
                let inset = SLOT_HALF + 0.04;
                if hx > inset && hy > inset {
                    self.surfaces.push(Surface {
                        room,
                        top,
                        area: Rect {
                            x0: cx - hx + inset,
                            x1: cx + hx - inset,
                            y0: cy - hy + inset,
                            y1: cy + hy - inset,
                        },
                    });
                }
            }
        }
    }

    /// Free slot on one of `surfaces`, optionally at least `min_dist` from
    /// `away`.
    fn find_slot(&mut self, surfaces: &[usize], away: Option<(&Slot, f64)>) -> Option<Slot> {
        if surfaces.is_empty() {
            return None;
        }
        for _ in 0..60 {
            let s = *surfaces.choose(&mut self.rng).expect("nonempty");
            let a = self.surfaces[s].area;
            let x = round2(if a.x1 > a.x0 {
                self.rng.random_range(a.x0..=a.x1)
            } else {
                a.x0
            });
            let y = round2(if a.y1 > a.y0 {
                self.rng.random_range(a.y0..=a.y1)
            } else {
                a.y0
            });
            let yaw = FRAC_PI_2 * f64::from(self.rng.random_range(0..4u8));
            let slot = Slot {
                surface: s,
                x,
                y,
                yaw,
            };
            if self.slots.iter().any(|o| o.rect().gap(&slot.rect()) < 0.02) {
                continue;
            }
            if away.is_some_and(|(o, d)| slot.dist(o) < d) {
                continue;
            }
            self.slots.push(slot);
            return Some(slot);
        }
        None
    }

    fn slot_pose(&self, slot: &Slot, half_z: f64) -> Pose {
        Pose::from_xyz_yaw(
            slot.x,
            slot.y,
            self.surfaces[slot.surface].top + half_z,
            slot.yaw,
        )
    }

    fn movable(&mut self, idx: usize) -> ObjectSpec {
        let pool = self.params.pool.categories();
        let category = pool.choose(&mut self.rng).expect("pool").to_string();
        ObjectSpec {
            id: format!("{category}_{idx}"),
            category,
            half_extents: [
                round2(self.rng.random_range(0.05..0.12)),
                round2(self.rng.random_range(0.05..0.12)),
                round2(self.rng.random_range(0.04..0.12)),
            ],
            mass: round2(self.rng.random_range(0.2..2.0)),
            movable: true,
            articulation: None,
        }
    }

    fn fixture(&mut self, idx: usize) -> Option<(ObjectSpec, Pose)> {
        let (category, kind, hi) = *[
            ("fridge", JointKind::Revolute, 1.6),
            ("cabinet", JointKind::Revolute, 1.57),
            ("drawer", JointKind::Prismatic, 0.45),
        ]
        .choose(&mut self.rng)
        .expect("kinds");
        let room = self.rng.random_range(0..self.rooms.len());
        let hx = round2(self.rng.random_range(0.3..0.4));
        let hy = round2(self.rng.random_range(0.3..0.35));
        let hz = round2(self.rng.random_range(0.5..0.9));
        let (cx, cy, hx, hy) = self.place_footprint(room, hx, hy)?;
        Some((
            ObjectSpec {
                id: format!("{category}_{idx}"),
                category: category.to_string(),
                half_extents: [hx, hy, hz],
                mass: 40.0,
                movable: false,
                articulation: Some(JointSpec {
                    kind,
                    limits: [0.0, hi],
                }),
            },
            Pose::from_xyz_yaw(cx, cy, hz, 0.0),
        ))
    }

    fn spawn(&mut self) -> Option<AgentState> {
        let r = self.rooms[0];
        for _ in 0..100 {
            let x = round2(self.rng.random_range(r.x0 + 0.5..r.x1 - 0.5));
            let y = round2(self.rng.random_range(r.y0 + 0.5..r.y1 - 0.5));
            let p = Rect {
                x0: x,
                x1: x,
                y0: y,
                y1: y,
            };
            if self.footprints.iter().all(|f| f.gap(&p) > 0.5) {
                let heading = (10 * self.rng.random_range(0..36)) as f64;
                let mut a = AgentState::at(x, y, crate::geom::wrap_angle(heading.to_radians()));
                a.capacity = self.params.carry_capacity;
                return Some(a);
            }
        }
        None
    }

    fn room_of(&self, slot: &Slot) -> usize {
        self.surfaces[slot.surface].room
    }

    fn surfaces_where(&self, f: impl Fn(usize, &Surface) -> bool) -> Vec<usize> {
        self.surfaces
            .iter()
            .enumerate()
            .filter(|(i, s)| f(*i, s))
            .map(|(i, _)| i)
            .collect()
    }

    /// Start and goal slots of the carried tasks.
    fn task_slots(&mut self, n: usize) -> Option<Vec<(Slot, Slot)>> {
        let multi = self.rooms.len() > 1;
        let all = self.surfaces_where(|_, _| true);
        if self.params.require_ordering {
            // Chain: goal of task i is the start of task i + 1.
            let mut starts: Vec<Slot> = vec![self.find_slot(&all, None)?];
            for i in 1..=n {
                let prev = starts[i - 1];
                let cands = self.surfaces_where(|j, s| {
                    j != prev.surface && (!(multi && i == 1) || s.room != self.room_of(&prev))
                });
                starts.push(self.find_slot(&cands, Some((&prev, MIN_GOAL_DISTANCE)))?);
            }
            // The extra slot is only a goal; free it from the start list.
            return Some((0..n).map(|i| (starts[i], starts[i + 1])).collect());
        }
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let start = self.find_slot(&all, None)?;
            let room = self.room_of(&start);
            let cands = self.surfaces_where(|j, s| {
                j != start.surface && (!(multi && i == 0) || s.room != room)
            });
            let goal = self.find_slot(&cands, Some((&start, MIN_GOAL_DISTANCE)))?;
            out.push((start, goal));
        }
        Some(out)
    }

    fn build(mut self, seed: u64) -> Option<EpisodeConfig> {
        let p = self.params;
        self.layout_rooms();
        let fixture_task = p.fixture_task();
        // Fixtures first: they need floor space next to the furniture.
        let mut fixtures = Vec::new();
        for i in 0..p.n_articulated {
            fixtures.push(self.fixture(i)?);
        }
        self.furnish();
        if self.surfaces.len() < 2
            || (self.rooms.len() > 1
                && (0..self.rooms.len()).any(|r| !self.surfaces.iter().any(|s| s.room == r)))
        {
            return None;
        }
        let mut task_ids = Vec::new();
        for (i, (spec, pose)) in fixtures.into_iter().enumerate() {
            let joint = spec.articulation.expect("fixture joint");
            let f0 = round2(self.rng.random_range(0.0..=1.0));
            let mut st = ObjectState {
                pose,
                joint_position: Some(joint.position_at(f0)),
            };
            self.initial.insert(spec.id.clone(), st.clone());
            if fixture_task && i == 0 {
                let delta = round2(self.rng.random_range(0.5..=1.0f64).min(if f0 <= 0.5 {
                    1.0 - f0
                } else {
                    f0
                }));
                let f1 = if f0 <= 0.5 { f0 + delta } else { f0 - delta };
                st.joint_position = Some(joint.position_at(f1));
                task_ids.push(spec.id.clone());
            }
            self.goal.insert(spec.id.clone(), st);
            self.specs.push(spec);
        }
        let n_carried = p.n_task_objects - usize::from(fixture_task);
        let pairs = self.task_slots(n_carried)?;
        let mut idx = 0;
        for (start, goal) in pairs {
            let spec = self.movable(idx);
            idx += 1;
            let hz = spec.half_extents[2];
            self.initial
                .insert(spec.id.clone(), ObjectState::at(self.slot_pose(&start, hz)));
            self.goal
                .insert(spec.id.clone(), ObjectState::at(self.slot_pose(&goal, hz)));
            task_ids.push(spec.id.clone());
            self.specs.push(spec);
        }
        let all = self.surfaces_where(|_, _| true);
        for _ in 0..p.n_distractors {
            let slot = self.find_slot(&all, None)?;
            let spec = self.movable(idx);
            idx += 1;
            let st = ObjectState::at(self.slot_pose(&slot, spec.half_extents[2]));
            self.initial.insert(spec.id.clone(), st.clone());
            self.goal.insert(spec.id.clone(), st);
            self.specs.push(spec);
        }
        let agent = self.spawn()?;
        task_ids.sort();

        let scene = Scene::new(self.statics, self.specs).ok()?;
        let shared = std::sync::Arc::new(scene.clone());
        let s0 = WorldState::new(shared.clone(), self.initial.clone(), agent.clone()).ok()?;
        let sg = WorldState::new(shared, self.goal.clone(), agent.clone()).ok()?;
        let tol = generated_tolerance();
        let kind = match p.goal_kind {
            GenGoalKind::Geometric => GoalKind::Geometric,
            GenGoalKind::Predicate => GoalKind::Predicate,
            GenGoalKind::Experience => GoalKind::Experience {
                budget: EXPLORATION_BUDGET,
            },
        };
        let goal = compile_goal(kind, &s0, &sg, &task_ids, &tol).ok()?;
        let goal_state = (p.goal_kind == GenGoalKind::Predicate).then(|| sg.to_doc());
        let embodiment = crate::sim::Embodiment {
            capacity: p.carry_capacity,
            ..Default::default()
        };
        Some(EpisodeConfig {
            id: format!("ep-{seed:07}"),
            seed,
            scene,
            initial: StateDoc {
                objects: self.initial,
                agent,
            },
            goal: goal.to_doc(),
            task_ids,
            tolerance: tol,
            harm_tolerance: ToleranceSpec::harm_default(),
            contact_eps: crate::scene::DEFAULT_CONTACT_EPS,
            max_ticks: 1000 + 400 * p.n_task_objects as u32 * p.room.rooms() as u32,
            noise: p.noise.config(),
            embodiment,
            energy: Default::default(),
            hidden_params: p.hidden_params,
            goal_state,
        })
    }
}

/// Generates one episode. Deterministic in `(seed, params)`; every episode
/// returned passes [`validate_solvable`] and starts with zero completion.
pub fn generate(seed: u64, params: &DifficultyParams) -> Result<EpisodeConfig, GenError> {
    params.validate()?;
    for attempt in 0..MAX_ATTEMPTS {
        let Some(ep) = Builder::new(seed, attempt, params).build(seed) else {
            continue;
        };
        if !validate_solvable(&ep).solvable {
            continue;
        }
        let Ok(bound) = ep.bind() else { continue };
        match score(&bound, &bound.initial) {
            Ok((outcome, _)) if outcome.completion == 0.0 => return Ok(ep),
            _ => continue,
        }
    }
    Err(GenError::Placement {
        seed,
        attempts: MAX_ATTEMPTS,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Solvability {
    pub solvable: bool,
    pub problems: Vec<String>,
}

/// Checks that every pick and place location can be reached from the spawn
/// and that no goal footprint intersects the static layout.
pub fn validate_solvable(ep: &EpisodeConfig) -> Solvability {
    let mut problems = Vec::new();
    match ep.bind() {
        Err(e) => problems.push(format!("episode does not load: {e}")),
        Ok(bound) => {
            if let Some(targets) = task_targets(&bound) {
                for (id, t) in &targets {
                    let Ok(b) = bound.initial.object_box(id) else {
                        continue;
                    };
                    let goal = b.with_pose(t.pose);
                    for s in bound.scene.statics() {
                        if boxes_overlap(&goal, &s.shape, 0.0) {
                            problems.push(format!("goal pose of `{id}` intersects `{}`", s.id));
                        }
                    }
                }
            }
            match reachability(&bound) {
                Ok(()) => {}
                Err(e) => problems.push(e.to_string()),
            }
        }
    }
    Solvability {
        solvable: problems.is_empty(),
        problems,
    }
}

fn reachability(ep: &crate::sim::BoundEpisode) -> Result<(), PathError> {
    let sites = task_sites(ep)?;
    let s0 = &ep.initial;
    let extra: Vec<[f64; 2]> = sites.iter().flat_map(|s| [s.pick, s.place]).collect();
    let grid = floor_grid(s0, &ep.task_ids, s0.agent.radius, &extra);
    let spawn = spawn_cell(&grid, s0.agent.position).ok_or(PathError::SpawnBlocked)?;
    let field = grid.distances_from(spawn);
    let check = |id: &str, p: [f64; 2], site: Site| -> Result<Cell, PathError> {
        stand_cell(&grid, &field, p).ok_or_else(|| PathError::Unreachable {
            id: id.to_string(),
            site,
        })
    };
    for s in &sites {
        check(&s.id, s.pick, Site::Pick)?;
        check(&s.id, s.place, Site::Place)?;
    }
    Ok(())
}
