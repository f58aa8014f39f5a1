//! Privileged oracle agent.
//!
//! The oracle keeps a mirror environment that it steps with its own
//! actions. Noise only touches observations, so the mirror holds the exact
//! world state. Tasks are visited in the order chosen by the path oracle;
//! the agent follows A* waypoints to a stand point near each pick or place
//! site, then searches a few nearby poses for one where the crosshair,
//! release point or joint reach does the job.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::sync::Arc;

use super::link::Policy;
use super::protocol::Phase;
use crate::eval::nav::{Cell, OccupancyGrid};
use crate::eval::path::{floor_grid, spawn_cell, task_targets, STAND_RADIUS};
use crate::eval::plan_tour;
use crate::geom::{ray_cast, translation_distance, within, wrap_angle, OrientedBox, Pose};
use crate::goals::{geometric_verdict, GeometricTarget, GoalSpec, ToleranceSpec};
use crate::scene::WorldState;
use crate::sim::{
    blocking_boxes, eye, pick_ray, release_pose_at, stride_clear, visibility, Action, AgentState,
    BoundEpisode, Embodiment, Env, Observation,
};

/// Distance at which a stand point counts as reached.
const ARRIVE: f64 = 0.2;
/// How far along the path the agent aims.
const LOOKAHEAD: f64 = 1.5;
/// Extra clearance kept from obstacles when planning.
const PLAN_MARGIN: f64 = 0.05;
/// Within this planar distance of a site, try to act before walking on.
const NEAR: f64 = 1.6;
/// Stand points tried per task stage before giving up on the task.
const MAX_APPROACHES: usize = 6;
/// Moves allowed towards one stand point.
const MAX_LEG_MOVES: usize = 400;
/// A released object must land this close to the target height.
const LANDING_Z: f64 = 0.02;

#[derive(Debug, Clone)]
struct Job {
    id: String,
    target: GeometricTarget,
    tol: ToleranceSpec,
    /// Joint-only task: the object stays put.
    joint: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Grasp,
    Place,
    Joint,
}

#[derive(Debug, Clone)]
struct Approach {
    stage: Stage,
    goal: Option<[f64; 2]>,
    tried: Vec<[f64; 2]>,
    moves: usize,
}

impl Approach {
    fn new(stage: Stage) -> Self {
        Self {
            stage,
            goal: None,
            tried: Vec::new(),
            moves: 0,
        }
    }
}

enum Nav {
    Move(Vec<Action>),
    Arrived,
}

pub struct OraclePolicy {
    episode: Arc<BoundEpisode>,
    mirror: Env,
    queue: VecDeque<Action>,
    pending: VecDeque<Job>,
    job: Option<Job>,
    approach: Option<Approach>,
    failures: Vec<String>,
}

fn planar(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn xy(p: &Pose) -> [f64; 2] {
    let t = p.translation();
    [t.x, t.y]
}

/// Turn offsets ordered by cost: 0, +1, -1, +2, -2, ...
fn turn_offsets(emb: &Embodiment) -> Vec<i32> {
    let n = ((2.0 * std::f64::consts::PI / emb.turn).round() as i32).max(1);
    let mut ks = vec![0];
    let mut k = 1;
    while ks.len() < n as usize {
        ks.push(k);
        if ks.len() < n as usize {
            ks.push(-k);
        }
        k += 1;
    }
    ks
}

/// Heading after `k` turns, computed exactly as the simulator does.
fn turned(mut h: f64, k: i32, emb: &Embodiment) -> f64 {
    let sign = if k >= 0 { 1.0 } else { -1.0 };
    for _ in 0..k.unsigned_abs() {
        h = wrap_angle(h + sign * emb.turn);
    }
    h
}

fn turn_actions(k: i32) -> impl Iterator<Item = Action> {
    let a = if k >= 0 {
        Action::TurnLeft
    } else {
        Action::TurnRight
    };
    std::iter::repeat_n(a, k.unsigned_abs() as usize)
}

fn stepped(p: [f64; 2], h: f64, emb: &Embodiment) -> [f64; 2] {
    [p[0] + emb.step * h.cos(), p[1] + emb.step * h.sin()]
}

/// Pitches reachable by repeated looks, with the actions that reach them,
/// nearest first.
fn pitch_options(p0: f64, emb: &Embodiment) -> Vec<(f64, Vec<Action>)> {
    let mut out = vec![(p0, Vec::new())];
    for (dir, action) in [(1.0, Action::LookUp), (-1.0, Action::LookDown)] {
        let mut p = p0;
        let mut acts = Vec::new();
        loop {
            let next = (p + dir * emb.look).clamp(-emb.pitch_limit, emb.pitch_limit);
            if (next - p).abs() <= 1e-12 {
                break;
            }
            p = next;
            acts.push(action.clone());
            out.push((p, acts.clone()));
        }
    }
    out.sort_by_key(|(_, a)| a.len());
    out
}

fn tolerance_for(ep: &BoundEpisode, id: &str) -> ToleranceSpec {
    match &ep.goal {
        GoalSpec::Geometric { tolerances, .. } => {
            tolerances.get(id).copied().unwrap_or(ep.config.tolerance)
        }
        _ => ep.config.tolerance,
    }
}

impl OraclePolicy {
    pub fn new(episode: Arc<BoundEpisode>) -> Self {
        let mut p = Self {
            episode,
            mirror: Env::new(),
            queue: VecDeque::new(),
            pending: VecDeque::new(),
            job: None,
            approach: None,
            failures: Vec::new(),
        };
        p.reset();
        p
    }

    /// Tasks the oracle gave up on, with the reason.
    pub fn failures(&self) -> &[String] {
        &self.failures
    }

    fn reset(&mut self) {
        let ep = self.episode.clone();
        self.mirror.reset_bound(ep.clone());
        self.queue.clear();
        self.job = None;
        self.approach = None;
        self.failures.clear();
        let targets: BTreeMap<String, GeometricTarget> = task_targets(&ep).unwrap_or_default();
        let order = plan_tour(&ep)
            .map(|t| t.order)
            .unwrap_or_else(|_| targets.keys().cloned().collect());
        self.pending = order
            .into_iter()
            .filter_map(|id| {
                let target = *targets.get(&id)?;
                let spec = ep.scene.spec(&id).ok()?;
                Some(Job {
                    tol: tolerance_for(&ep, &id),
                    joint: !spec.movable && target.open_fraction.is_some(),
                    id,
                    target,
                })
            })
            .collect();
    }

    fn emb(&self) -> Embodiment {
        self.episode.config.embodiment
    }

    fn state(&self) -> &WorldState {
        self.mirror.state().expect("mirror is reset")
    }

    fn satisfied(&self, job: &Job) -> bool {
        geometric_verdict(&job.id, &job.target, &job.tol, self.state()).unwrap_or(false)
    }

    /// Next job whose target is not occupied by another unfinished task
    /// object; falls back to plain order.
    fn next_job(&mut self) -> Option<Job> {
        let state = self.state();
        let footprint = |id: &str| state.object_box(id).ok();
        let blocked = |job: &Job, others: &VecDeque<Job>| {
            if job.joint {
                return false;
            }
            let Some(b) = footprint(&job.id) else {
                return false;
            };
            let goal = b.with_pose(job.target.pose);
            others
                .iter()
                .filter(|o| o.id != job.id && !o.joint)
                .filter_map(|o| footprint(&o.id))
                .any(|ob| footprints_touch(&goal, &ob))
        };
        let i = (0..self.pending.len())
            .find(|&i| !blocked(&self.pending[i], &self.pending))
            .unwrap_or(0);
        self.pending.remove(i)
    }

    fn abandon(&mut self, job: &Job, stage: Stage) {
        self.failures
            .push(format!("replan exhausted for `{}` at {stage:?}", job.id));
        self.job = None;
        self.approach = None;
    }

    /// Fills the action queue; `false` once nothing is left to do.
    fn plan(&mut self) -> bool {
        for _ in 0..64 {
            let job = match &self.job {
                Some(j) => j.clone(),
                None => match self.next_job() {
                    Some(j) => {
                        self.job = Some(j);
                        self.approach = None;
                        continue;
                    }
                    None => return false,
                },
            };
            let held = self.state().agent.held.clone();
            let stage = if job.joint {
                Stage::Joint
            } else if held.as_deref() == Some(job.id.as_str()) {
                Stage::Place
            } else {
                Stage::Grasp
            };
            if stage != Stage::Place && self.satisfied(&job) {
                self.job = None;
                continue;
            }
            if stage == Stage::Grasp && held.is_some() {
                // Carrying something else; the one-at-a-time plan broke down.
                self.abandon(&job, stage);
                continue;
            }
            if self.approach.as_ref().is_none_or(|a| a.stage != stage) {
                self.approach = Some(Approach::new(stage));
            }
            let site = match stage {
                Stage::Grasp | Stage::Joint => match self.state().object(&job.id) {
                    Ok(o) => xy(&o.pose),
                    Err(_) => {
                        self.abandon(&job, stage);
                        continue;
                    }
                },
                Stage::Place => xy(&job.target.pose),
            };
            let agent_xy = self.state().agent.position;
            if planar(agent_xy, site) <= NEAR {
                if let Some(seq) = self.local(stage, &job, 1, true) {
                    self.queue.extend(seq);
                    return true;
                }
            }
            match self.navigate(site) {
                Nav::Move(seq) => {
                    self.queue.extend(seq);
                    return true;
                }
                Nav::Arrived => {
                    let found = self
                        .local(stage, &job, 2, true)
                        .or_else(|| self.refine(stage, &job))
                        .or_else(|| {
                            if stage == Stage::Place {
                                self.local(stage, &job, 1, false)
                            } else {
                                None
                            }
                        });
                    if let Some(seq) = found {
                        self.queue.extend(seq);
                        return true;
                    }
                    let ap = self.approach.as_mut().expect("approach set");
                    if let Some(g) = ap.goal.take() {
                        ap.tried.push(g);
                    } else {
                        ap.tried.push(agent_xy);
                    }
                    ap.moves = 0;
                    if ap.tried.len() >= MAX_APPROACHES {
                        self.abandon(&job, stage);
                    }
                }
            }
        }
        false
    }

    fn grid(&self, site: [f64; 2]) -> OccupancyGrid {
        let st = self.state();
        floor_grid(st, &[], st.agent.radius + PLAN_MARGIN, &[site])
    }

    fn navigate(&mut self, site: [f64; 2]) -> Nav {
        let emb = self.emb();
        let grid = self.grid(site);
        let st = self.state();
        let pos = st.agent.position;
        let heading = st.agent.heading;
        let radius = st.agent.radius;
        let Some(start) = spawn_cell(&grid, pos) else {
            return Nav::Arrived;
        };
        let ap = self.approach.clone().expect("approach set");
        let goal = match ap.goal {
            Some(g) => g,
            None => {
                let field = grid.distances_from(start);
                let cell = grid.nearest_free(site, STAND_RADIUS, |c: Cell| {
                    let q = grid.center(c);
                    field.reachable(c) && ap.tried.iter().all(|t| planar(*t, q) > 0.5)
                });
                let Some(cell) = cell else {
                    return Nav::Arrived;
                };
                let g = grid.center(cell);
                self.approach.as_mut().expect("approach set").goal = Some(g);
                g
            }
        };
        if planar(pos, goal) <= ARRIVE || ap.moves >= MAX_LEG_MOVES {
            return Nav::Arrived;
        }
        let Some(goal_cell) = grid.cell_of(goal) else {
            return Nav::Arrived;
        };
        let Some((_, path)) = grid.astar(start, goal_cell) else {
            return Nav::Arrived;
        };
        let st = self.state();
        let blockers = blocking_boxes(st, st.agent.height);
        let clear = |q: [f64; 2]| segment_clear(&blockers, pos, q, radius);
        let centers: Vec<[f64; 2]> = path.iter().map(|c| grid.center(*c)).collect();
        // Aim at the farthest visible path point; else at the first one at
        // least a stride away, so that a stride towards it makes progress.
        let waypoint = centers
            .iter()
            .rev()
            .find(|q| planar(pos, **q) <= LOOKAHEAD && clear(**q))
            .or_else(|| centers.iter().find(|q| planar(pos, **q) >= emb.step))
            .copied()
            .unwrap_or(goal);
        let d0 = planar(pos, waypoint);
        let desired = (waypoint[1] - pos[1]).atan2(waypoint[0] - pos[0]);
        let k0 = (wrap_angle(desired - heading) / emb.turn).round() as i32;
        let mut choice = [0, 1, -1, 2, -2].into_iter().map(|dk| k0 + dk).find(|&k| {
            let h = turned(heading, k, &emb);
            stride_clear(&blockers, pos, h, radius, emb.step)
                && planar(stepped(pos, h, &emb), waypoint) < d0 - 0.02
        });
        if choice.is_none() {
            // Pinned against something: take the clear stride that most
            // shortens the remaining geodesic.
            let field = grid.distances_from(goal_cell);
            let remaining = |p: [f64; 2]| {
                grid.nearest_free(p, 0.3, |c| field.reachable(c))
                    .map_or(f64::INFINITY, |c| field.get(c) + planar(p, grid.center(c)))
            };
            let here = remaining(pos);
            choice = turn_offsets(&emb)
                .into_iter()
                .filter_map(|k| {
                    let h = turned(heading, k, &emb);
                    if !stride_clear(&blockers, pos, h, radius, emb.step) {
                        return None;
                    }
                    let r = remaining(stepped(pos, h, &emb));
                    (r < here - 0.05).then_some((r, k))
                })
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .map(|(_, k)| k);
        }
        match choice {
            Some(k) => {
                self.approach.as_mut().expect("approach set").moves += 1;
                let mut seq: Vec<Action> = turn_actions(k).collect();
                seq.push(Action::MoveForward);
                Nav::Move(seq)
            }
            None => Nav::Arrived,
        }
    }

    /// Searches poses up to `depth` strides away for one where the stage's
    /// final action succeeds; returns the cheapest action sequence.
    fn local(&self, stage: Stage, job: &Job, depth: usize, strict: bool) -> Option<Vec<Action>> {
        let emb = self.emb();
        let st = self.state();
        let a = &st.agent;
        let blockers = blocking_boxes(st, a.height);
        let ks = turn_offsets(&emb);
        let pitches = pitch_options(a.pitch, &emb);
        let mut frontier = vec![(a.position, a.heading, Vec::<Action>::new())];
        for d in 0..=depth {
            let mut best: Option<Vec<Action>> = None;
            for (pos, h, prefix) in &frontier {
                if !self.worth_checking(stage, job, *pos) {
                    continue;
                }
                for &k in &ks {
                    let h2 = turned(*h, k, &emb);
                    let cost = prefix.len() + k.unsigned_abs() as usize;
                    if best.as_ref().is_some_and(|b| b.len() <= cost) {
                        continue;
                    }
                    if let Some(tail) = self.finish(stage, job, *pos, h2, &pitches, strict) {
                        let mut seq = prefix.clone();
                        seq.extend(turn_actions(k));
                        seq.extend(tail);
                        if best.as_ref().is_none_or(|b| seq.len() < b.len()) {
                            best = Some(seq);
                        }
                    }
                }
            }
            if best.is_some() || d == depth {
                return best;
            }
            let mut seen = HashSet::new();
            let mut next = Vec::new();
            for (pos, h, prefix) in &frontier {
                for &k in &ks {
                    let h2 = turned(*h, k, &emb);
                    if !stride_clear(&blockers, *pos, h2, a.radius, emb.step) {
                        continue;
                    }
                    let p2 = stepped(*pos, h2, &emb);
                    if !seen.insert(((p2[0] / 0.05).round() as i64, (p2[1] / 0.05).round() as i64))
                    {
                        continue;
                    }
                    let mut seq = prefix.clone();
                    seq.extend(turn_actions(k));
                    seq.push(Action::MoveForward);
                    next.push((p2, h2, seq));
                }
            }
            next.sort_by_key(|(_, _, s)| s.len());
            frontier = next;
        }
        None
    }

    /// Beam search over short stride sequences that steer towards a pose
    /// where the stage can finish; for placements that need centimetre
    /// precision.
    fn refine(&self, stage: Stage, job: &Job) -> Option<Vec<Action>> {
        const BEAM: usize = 150;
        const DEPTH: usize = 10;
        let emb = self.emb();
        let st = self.state();
        let a = &st.agent;
        let blockers = blocking_boxes(st, a.height);
        let ks = turn_offsets(&emb);
        let pitches = pitch_options(a.pitch, &emb);
        let site = match stage {
            Stage::Place => xy(&job.target.pose),
            _ => xy(&st.object(&job.id).ok()?.pose),
        };
        let headings: Vec<f64> = ks.iter().map(|&k| turned(a.heading, k, &emb)).collect();
        let score = |p: [f64; 2]| match stage {
            Stage::Place => headings
                .iter()
                .map(|h| {
                    let r = [
                        p[0] + emb.release_distance * h.cos(),
                        p[1] + emb.release_distance * h.sin(),
                    ];
                    planar(r, site)
                })
                .fold(f64::INFINITY, f64::min),
            _ => planar(p, site),
        };
        let mut beam = vec![(a.position, a.heading, Vec::<Action>::new())];
        for _ in 0..DEPTH {
            let mut seen = HashSet::new();
            let mut next = Vec::new();
            for (pos, h, prefix) in &beam {
                for &k in &ks {
                    let h2 = turned(*h, k, &emb);
                    if !stride_clear(&blockers, *pos, h2, a.radius, emb.step) {
                        continue;
                    }
                    let p2 = stepped(*pos, h2, &emb);
                    if !seen.insert(((p2[0] / 0.01).round() as i64, (p2[1] / 0.01).round() as i64))
                    {
                        continue;
                    }
                    let mut seq = prefix.clone();
                    seq.extend(turn_actions(k));
                    seq.push(Action::MoveForward);
                    next.push((score(p2), p2, h2, seq));
                }
            }
            next.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.3.len().cmp(&y.3.len())));
            next.truncate(BEAM);
            for (_, pos, h, prefix) in next.iter().take(16) {
                if !self.worth_checking(stage, job, *pos) {
                    continue;
                }
                for &k in &ks {
                    let h2 = turned(*h, k, &emb);
                    if let Some(tail) = self.finish(stage, job, *pos, h2, &pitches, true) {
                        let mut seq = prefix.clone();
                        seq.extend(turn_actions(k));
                        seq.extend(tail);
                        return Some(seq);
                    }
                }
            }
            beam = next.into_iter().map(|(_, p, h, s)| (p, h, s)).collect();
        }
        None
    }

    fn worth_checking(&self, stage: Stage, job: &Job, pos: [f64; 2]) -> bool {
        let emb = self.emb();
        let st = self.state();
        match stage {
            Stage::Grasp | Stage::Joint => st.object_box(&job.id).is_ok_and(|b| {
                b.distance_to_point(&eye(&AgentState::at(pos[0], pos[1], 0.0), &emb))
                    <= emb.pick_range
            }),
            Stage::Place => {
                planar(pos, xy(&job.target.pose))
                    <= emb.release_distance + job.tol.translation + 0.05
            }
        }
    }

    /// Actions completing the stage from `pos` facing `h`, if any.
    fn finish(
        &self,
        stage: Stage,
        job: &Job,
        pos: [f64; 2],
        h: f64,
        pitches: &[(f64, Vec<Action>)],
        strict: bool,
    ) -> Option<Vec<Action>> {
        let emb = self.emb();
        let st = self.state();
        let mut agent = st.agent.clone();
        agent.position = pos;
        agent.heading = h;
        match stage {
            Stage::Grasp => {
                let solids = st.solid_boxes();
                pitches.iter().find_map(|(p, looks)| {
                    agent.pitch = *p;
                    let ray = pick_ray(&agent, &emb);
                    let (hit, _) = ray_cast(&ray, solids.iter().map(|(id, b)| (*id, b)))?;
                    (hit == job.id).then(|| {
                        let mut seq = looks.clone();
                        seq.push(Action::Grab);
                        seq
                    })
                })
            }
            Stage::Joint => {
                let fraction = job.target.open_fraction?;
                pitches.iter().find_map(|(p, looks)| {
                    agent.pitch = *p;
                    visibility(st, &agent, &emb).contains(&job.id).then(|| {
                        let mut seq = looks.clone();
                        seq.push(Action::SetJoint {
                            id: job.id.clone(),
                            fraction,
                        });
                        seq
                    })
                })
            }
            Stage::Place => {
                let pose = release_pose_at(st, &emb, pos, h)?;
                if !within(
                    translation_distance(&pose, &job.target.pose),
                    job.tol.translation,
                ) {
                    return None;
                }
                if strict
                    && (pose.translation().z - job.target.pose.translation().z).abs() > LANDING_Z
                {
                    return None;
                }
                let mut after = st.clone();
                after.agent.held = None;
                after.objects.get_mut(&job.id)?.pose = pose;
                geometric_verdict(&job.id, &job.target, &job.tol, &after)
                    .unwrap_or(false)
                    .then(|| vec![Action::Release])
            }
        }
    }

    fn next_action(&mut self) -> Action {
        if !self.mirror.is_active() {
            return Action::Stop;
        }
        if self.queue.is_empty() && !self.plan() {
            return Action::Stop;
        }
        self.queue.pop_front().unwrap_or(Action::Stop)
    }
}

fn footprints_touch(a: &OrientedBox, b: &OrientedBox) -> bool {
    let (amin, amax) = a.world_aabb();
    let (bmin, bmax) = b.world_aabb();
    let m = 0.05;
    amin.x < bmax.x + m && bmin.x < amax.x + m && amin.y < bmax.y + m && bmin.y < amax.y + m
}

fn segment_clear(blockers: &[OrientedBox], a: [f64; 2], b: [f64; 2], radius: f64) -> bool {
    let len = planar(a, b);
    let n = (len / 0.05).ceil().max(1.0) as usize;
    (1..=n).all(|i| {
        let t = i as f64 / n as f64;
        let p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
        !crate::sim::disc_collides(p, radius, blockers)
    })
}

impl Policy for OraclePolicy {
    fn act(&mut self, phase: Phase, obs: &Observation) -> Action {
        if phase == Phase::Exploration {
            return Action::Stop;
        }
        if obs.tick == 0 && self.mirror.tick() != 0 {
            self.reset();
        }
        let action = self.next_action();
        if self.mirror.step(action.clone()).is_err() {
            return Action::Stop;
        }
        action
    }
}
