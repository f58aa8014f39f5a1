//! Shortest-path oracle: grid geodesics between stand points, ordered by
//! the pair-tour solver.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::nav::{Cell, DistanceField, OccupancyGrid, GRID_RESOLUTION};
use super::tour::PairTour;
use crate::goals::{target_from_state, GeometricTarget, GoalSpec};
use crate::scene::WorldState;
use crate::sim::BoundEpisode;

/// How far from an object centre a stand point may be.
pub const STAND_RADIUS: f64 = 1.5;
/// Margin added around the layout when sizing the grid.
const GRID_MARGIN: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Site {
    Pick,
    Place,
}

impl std::fmt::Display for Site {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Site::Pick => "pick",
            Site::Place => "place",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PathError {
    #[error("agent spawn is not on free floor")]
    SpawnBlocked,
    #[error("{site} location of `{id}` is unreachable from the spawn")]
    Unreachable { id: String, site: Site },
    #[error("object `{0}` has no state")]
    Missing(String),
}

/// Where a task object is picked up and where it must end up.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSite {
    pub id: String,
    pub pick: [f64; 2],
    pub place: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct TourPlan {
    pub length: f64,
    /// Task ids in visiting order.
    pub order: Vec<String>,
    /// Pick and place stand cells, in visiting order.
    pub stands: Vec<(Cell, Cell)>,
}

/// Target of every task object, when the episode determines one.
pub fn task_targets(ep: &BoundEpisode) -> Option<BTreeMap<String, GeometricTarget>> {
    match &ep.goal {
        GoalSpec::Geometric { targets, .. } => Some(targets.clone()),
        _ => {
            let gs = ep.goal_state.as_ref()?;
            ep.task_ids
                .iter()
                .map(|id| target_from_state(id, gs).ok().map(|t| (id.clone(), t)))
                .collect()
        }
    }
}

pub fn task_sites(ep: &BoundEpisode) -> Result<Vec<TaskSite>, PathError> {
    let Some(targets) = task_targets(ep) else {
        return Ok(Vec::new());
    };
    targets
        .iter()
        .map(|(id, t)| {
            let p = ep
                .initial
                .object(id)
                .map_err(|_| PathError::Missing(id.clone()))?
                .pose
                .translation();
            let q = t.pose.translation();
            Ok(TaskSite {
                id: id.clone(),
                pick: [p.x, p.y],
                place: [q.x, q.y],
            })
        })
        .collect()
}

/// Occupancy grid of `state` for a disc of `radius`, ignoring carried
/// objects and those in `exclude`. Only boxes reaching into the body
/// height block.
pub fn floor_grid(
    state: &WorldState,
    exclude: &[String],
    radius: f64,
    extra: &[[f64; 2]],
) -> OccupancyGrid {
    let height = state.agent.height;
    let solids = state.solid_boxes();
    let mut lo = [state.agent.position[0], state.agent.position[1]];
    let mut hi = lo;
    let mut grow = |x: f64, y: f64| {
        lo[0] = lo[0].min(x);
        lo[1] = lo[1].min(y);
        hi[0] = hi[0].max(x);
        hi[1] = hi[1].max(y);
    };
    for (_, b) in &solids {
        let (mn, mx) = b.world_aabb();
        grow(mn.x, mn.y);
        grow(mx.x, mx.y);
    }
    for p in extra {
        grow(p[0], p[1]);
    }
    let blockers: Vec<_> = solids
        .into_iter()
        .filter(|(id, b)| {
            !exclude.iter().any(|e| e == id) && b.top_z() > 1e-6 && b.bottom_z() < height
        })
        .map(|(_, b)| b)
        .collect();
    OccupancyGrid::new(
        [lo[0] - GRID_MARGIN, lo[1] - GRID_MARGIN],
        [hi[0] + GRID_MARGIN, hi[1] + GRID_MARGIN],
        GRID_RESOLUTION,
        &blockers,
        radius,
    )
}

/// Free cell nearest `p` that `field` can reach.
pub fn stand_cell(grid: &OccupancyGrid, field: &DistanceField, p: [f64; 2]) -> Option<Cell> {
    grid.nearest_free(p, STAND_RADIUS, |c| field.reachable(c))
}

/// Spawn cell: the agent's own cell when free, else the nearest free one.
pub fn spawn_cell(grid: &OccupancyGrid, p: [f64; 2]) -> Option<Cell> {
    grid.cell_of(p)
        .filter(|c| grid.is_free(*c))
        .or_else(|| grid.nearest_free(p, 2.0 * GRID_RESOLUTION, |_| true))
}

/// Task sites, their stand cells and the distances between them.
#[derive(Debug, Clone)]
pub struct TourProblem {
    pub sites: Vec<TaskSite>,
    pub stands: Vec<(Cell, Cell)>,
    pub tour: PairTour,
}

/// Geodesic distances between the spawn and every task's stand cells.
pub fn tour_problem(ep: &BoundEpisode) -> Result<TourProblem, PathError> {
    let sites = task_sites(ep)?;
    let s0 = &ep.initial;
    let extra: Vec<[f64; 2]> = sites.iter().flat_map(|s| [s.pick, s.place]).collect();
    let grid = floor_grid(s0, &ep.task_ids, s0.agent.radius, &extra);
    let spawn = spawn_cell(&grid, s0.agent.position).ok_or(PathError::SpawnBlocked)?;
    let from_spawn = grid.distances_from(spawn);
    let mut stands = Vec::with_capacity(sites.len());
    for s in &sites {
        let pick =
            stand_cell(&grid, &from_spawn, s.pick).ok_or_else(|| PathError::Unreachable {
                id: s.id.clone(),
                site: Site::Pick,
            })?;
        let place =
            stand_cell(&grid, &from_spawn, s.place).ok_or_else(|| PathError::Unreachable {
                id: s.id.clone(),
                site: Site::Place,
            })?;
        stands.push((pick, place));
    }
    let from_pick: Vec<DistanceField> = stands
        .iter()
        .map(|(p, _)| grid.distances_from(*p))
        .collect();
    let tour = PairTour {
        start: stands.iter().map(|(p, _)| from_spawn.get(*p)).collect(),
        legs: stands
            .iter()
            .zip(&from_pick)
            .map(|((_, q), f)| f.get(*q))
            .collect(),
        // Geodesics are symmetric, so place j -> pick i reads from pick i's field.
        trans: stands
            .iter()
            .map(|(_, q)| from_pick.iter().map(|f| f.get(*q)).collect())
            .collect(),
    };
    Ok(TourProblem {
        sites,
        stands,
        tour,
    })
}

/// Plans the shortest one-at-a-time tour over every task object.
pub fn plan_tour(ep: &BoundEpisode) -> Result<TourPlan, PathError> {
    let TourProblem {
        sites,
        stands,
        tour,
    } = tour_problem(ep)?;
    let (order, length) = tour.solve();
    Ok(TourPlan {
        length,
        order: order.iter().map(|i| sites[*i].id.clone()).collect(),
        stands: order.iter().map(|i| stands[*i]).collect(),
    })
}

/// `l` in SPL: length of the optimal tour, 0 without task targets.
pub fn shortest_path_length(ep: &BoundEpisode) -> Result<f64, PathError> {
    Ok(plan_tour(ep)?.length)
}
