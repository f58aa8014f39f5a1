//! Occupancy grid over the floor plane and grid geodesics (A*, Dijkstra).

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;

use crate::geom::{planar_distance_to_footprint, OrientedBox};

/// Grid resolution, metres per cell.
pub const GRID_RESOLUTION: f64 = 0.1;

pub type Cell = (usize, usize);

const NEIGHBOURS: [(isize, isize); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
];

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    cost: f64,
    idx: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on cost, then index for determinism.
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Boolean occupancy over an axis-aligned floor region. A cell is blocked
/// when a disc of the inflation radius at its centre would overlap a
/// blocker's footprint.
#[derive(Debug, Clone)]
pub struct OccupancyGrid {
    origin: [f64; 2],
    resolution: f64,
    nx: usize,
    ny: usize,
    blocked: Vec<bool>,
}

impl OccupancyGrid {
    pub fn new(
        min: [f64; 2],
        max: [f64; 2],
        resolution: f64,
        blockers: &[OrientedBox],
        inflate: f64,
    ) -> Self {
        let nx = (((max[0] - min[0]) / resolution).ceil() as usize).max(1);
        let ny = (((max[1] - min[1]) / resolution).ceil() as usize).max(1);
        let mut grid = Self {
            origin: min,
            resolution,
            nx,
            ny,
            blocked: vec![false; nx * ny],
        };
        for b in blockers {
            let (bmin, bmax) = b.world_aabb();
            let lo = grid.clamped_cell([bmin.x - inflate, bmin.y - inflate]);
            let hi = grid.clamped_cell([bmax.x + inflate, bmax.y + inflate]);
            for i in lo.0..=hi.0 {
                for j in lo.1..=hi.1 {
                    let c = grid.center((i, j));
                    if planar_distance_to_footprint(c, b) < inflate {
                        grid.blocked[j * nx + i] = true;
                    }
                }
            }
        }
        grid
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    fn idx(&self, c: Cell) -> usize {
        c.1 * self.nx + c.0
    }

    fn cell_at(&self, idx: usize) -> Cell {
        (idx % self.nx, idx / self.nx)
    }

    fn clamped_cell(&self, p: [f64; 2]) -> Cell {
        let i = ((p[0] - self.origin[0]) / self.resolution).floor();
        let j = ((p[1] - self.origin[1]) / self.resolution).floor();
        (
            (i.max(0.0) as usize).min(self.nx - 1),
            (j.max(0.0) as usize).min(self.ny - 1),
        )
    }

    /// Cell containing `p`, if inside the grid.
    pub fn cell_of(&self, p: [f64; 2]) -> Option<Cell> {
        let i = ((p[0] - self.origin[0]) / self.resolution).floor();
        let j = ((p[1] - self.origin[1]) / self.resolution).floor();
        (i >= 0.0 && j >= 0.0 && (i as usize) < self.nx && (j as usize) < self.ny)
            .then_some((i as usize, j as usize))
    }

    pub fn center(&self, c: Cell) -> [f64; 2] {
        [
            self.origin[0] + (c.0 as f64 + 0.5) * self.resolution,
            self.origin[1] + (c.1 as f64 + 0.5) * self.resolution,
        ]
    }

    pub fn is_free(&self, c: Cell) -> bool {
        c.0 < self.nx && c.1 < self.ny && !self.blocked[self.idx(c)]
    }

    fn neighbours(&self, c: Cell) -> impl Iterator<Item = (Cell, f64)> + '_ {
        NEIGHBOURS.iter().filter_map(move |&(dx, dy)| {
            let x = c.0 as isize + dx;
            let y = c.1 as isize + dy;
            if x < 0 || y < 0 || x as usize >= self.nx || y as usize >= self.ny {
                return None;
            }
            let n = (x as usize, y as usize);
            if !self.is_free(n) {
                return None;
            }
            if dx != 0 && dy != 0 {
                // No corner cutting.
                let a = ((c.0 as isize + dx) as usize, c.1);
                let b = (c.0, (c.1 as isize + dy) as usize);
                if !self.is_free(a) || !self.is_free(b) {
                    return None;
                }
                return Some((n, SQRT_2 * self.resolution));
            }
            Some((n, self.resolution))
        })
    }

    fn octile(&self, a: Cell, b: Cell) -> f64 {
        let dx = a.0.abs_diff(b.0) as f64;
        let dy = a.1.abs_diff(b.1) as f64;
        (dx.max(dy) - dx.min(dy) + SQRT_2 * dx.min(dy)) * self.resolution
    }

    /// Shortest 8-connected path between two free cells.
    pub fn astar(&self, from: Cell, to: Cell) -> Option<(f64, Vec<Cell>)> {
        if !self.is_free(from) || !self.is_free(to) {
            return None;
        }
        let n = self.nx * self.ny;
        let mut g = vec![f64::INFINITY; n];
        let mut parent = vec![usize::MAX; n];
        let mut closed = vec![false; n];
        let mut heap = BinaryHeap::new();
        g[self.idx(from)] = 0.0;
        heap.push(Entry {
            cost: self.octile(from, to),
            idx: self.idx(from),
        });
        let goal = self.idx(to);
        while let Some(Entry { idx, .. }) = heap.pop() {
            if closed[idx] {
                continue;
            }
            closed[idx] = true;
            if idx == goal {
                let mut path = vec![self.cell_at(idx)];
                let mut cur = idx;
                while parent[cur] != usize::MAX {
                    cur = parent[cur];
                    path.push(self.cell_at(cur));
                }
                path.reverse();
                return Some((g[goal], path));
            }
            let c = self.cell_at(idx);
            for (nb, w) in self.neighbours(c) {
                let ni = self.idx(nb);
                let cand = g[idx] + w;
                if cand < g[ni] {
                    g[ni] = cand;
                    parent[ni] = idx;
                    heap.push(Entry {
                        cost: cand + self.octile(nb, to),
                        idx: ni,
                    });
                }
            }
        }
        None
    }

    /// Geodesic distance from `from` to every cell (infinite if unreachable).
    pub fn distances_from(&self, from: Cell) -> DistanceField {
        let n = self.nx * self.ny;
        let mut d = vec![f64::INFINITY; n];
        if self.is_free(from) {
            let mut heap = BinaryHeap::new();
            d[self.idx(from)] = 0.0;
            heap.push(Entry {
                cost: 0.0,
                idx: self.idx(from),
            });
            while let Some(Entry { cost, idx }) = heap.pop() {
                if cost > d[idx] {
                    continue;
                }
                for (nb, w) in self.neighbours(self.cell_at(idx)) {
                    let ni = self.idx(nb);
                    if cost + w < d[ni] {
                        d[ni] = cost + w;
                        heap.push(Entry {
                            cost: cost + w,
                            idx: ni,
                        });
                    }
                }
            }
        }
        DistanceField { nx: self.nx, d }
    }

    /// Free cell closest (Euclidean, centre to point) to `p` within
    /// `max_dist`, optionally restricted to cells accepted by `keep`.
    pub fn nearest_free(
        &self,
        p: [f64; 2],
        max_dist: f64,
        keep: impl Fn(Cell) -> bool,
    ) -> Option<Cell> {
        let lo = self.clamped_cell([p[0] - max_dist, p[1] - max_dist]);
        let hi = self.clamped_cell([p[0] + max_dist, p[1] + max_dist]);
        let mut best: Option<(f64, Cell)> = None;
        for j in lo.1..=hi.1 {
            for i in lo.0..=hi.0 {
                let c = (i, j);
                if !self.is_free(c) || !keep(c) {
                    continue;
                }
                let q = self.center(c);
                let d = (q[0] - p[0]).hypot(q[1] - p[1]);
                if d <= max_dist && best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, c));
                }
            }
        }
        best.map(|(_, c)| c)
    }
}

#[derive(Debug, Clone)]
pub struct DistanceField {
    nx: usize,
    d: Vec<f64>,
}

impl DistanceField {
    pub fn get(&self, c: Cell) -> f64 {
        self.d[c.1 * self.nx + c.0]
    }

    pub fn reachable(&self, c: Cell) -> bool {
        self.get(c).is_finite()
    }
}
