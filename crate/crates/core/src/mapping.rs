//! The agent's world model: belief occupancy, frontiers and the value map.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::grid::{Cell, Grid};
use crate::sensing::{AgentPose, Observation, SensorConfig};
use crate::world::CellTruth;

/// Window radius (cells) used to read a frontier waypoint's value.
pub const WAYPOINT_VALUE_RADIUS: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Knowledge {
    Unknown,
    Free,
    Obstacle,
}

impl From<CellTruth> for Knowledge {
    fn from(t: CellTruth) -> Self {
        match t {
            CellTruth::Free => Knowledge::Free,
            CellTruth::Obstacle => Knowledge::Obstacle,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeliefMap {
    grid: Grid<Knowledge>,
}

impl BeliefMap {
    pub fn unknown(width: usize, height: usize) -> Self {
        BeliefMap {
            grid: Grid::filled(width, height, Knowledge::Unknown),
        }
    }

    pub fn from_grid(grid: Grid<Knowledge>) -> Self {
        BeliefMap { grid }
    }

    pub fn width(&self) -> usize {
        self.grid.width()
    }

    pub fn height(&self) -> usize {
        self.grid.height()
    }

    pub fn grid(&self) -> &Grid<Knowledge> {
        &self.grid
    }

    /// Out-of-bounds cells read as obstacles.
    pub fn get(&self, c: Cell) -> Knowledge {
        self.grid.get(c).copied().unwrap_or(Knowledge::Obstacle)
    }

    pub fn set(&mut self, c: Cell, k: Knowledge) {
        self.grid.set(c, k);
    }

    pub fn known_count(&self) -> usize {
        self.grid
            .as_slice()
            .iter()
            .filter(|k| **k != Knowledge::Unknown)
            .count()
    }

    /// Writes every visible cell's true state. Cells outside the map are
    /// ignored.
    pub fn integrate_observation(&mut self, obs: &Observation) {
        for (&c, &t) in &obs.visible {
            if let Some(slot) = self.grid.get_mut(c) {
                *slot = t.into();
            }
        }
    }

    /// Known-free cells with at least one unknown 4-neighbor.
    pub fn extract_frontiers(&self) -> BTreeSet<Cell> {
        self.grid
            .iter()
            .filter(|(c, k)| {
                **k == Knowledge::Free
                    && c.neighbors4()
                        .iter()
                        .any(|n| self.grid.get(*n) == Some(&Knowledge::Unknown))
            })
            .map(|(c, _)| c)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ValueCell {
    pub value: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueMap {
    grid: Grid<ValueCell>,
}

/// Confidence of an observation at `offset_deg` off the optical axis:
/// `cos^2(offset / (fov/2) * pi/2)`, 1 on the axis and 0 at the edge of view.
pub fn angular_confidence(offset_deg: f64, fov_deg: f64) -> f64 {
    let half = fov_deg / 2.0;
    let ratio = (offset_deg.abs() / half).min(1.0);
    let c = (ratio * std::f64::consts::FRAC_PI_2).cos();
    (c * c).clamp(0.0, 1.0)
}

/// Confidence-weighted fusion of a new reading into a cell. A cell whose
/// combined confidence is zero is returned unchanged.
pub fn fuse(old: ValueCell, score: f64, c_new: f64) -> ValueCell {
    let c_old = old.confidence;
    let total = c_new + c_old;
    if total <= 0.0 {
        return old;
    }
    ValueCell {
        value: ((c_new * score + c_old * old.value) / total).clamp(0.0, 1.0),
        confidence: ((c_new * c_new + c_old * c_old) / total).clamp(0.0, 1.0),
    }
}

impl ValueMap {
    pub fn new(width: usize, height: usize) -> Self {
        ValueMap {
            grid: Grid::filled(width, height, ValueCell::default()),
        }
    }

    pub fn get(&self, c: Cell) -> ValueCell {
        self.grid.get(c).copied().unwrap_or_default()
    }

    pub fn grid(&self) -> &Grid<ValueCell> {
        &self.grid
    }

    /// Fuses `score` into every visible free cell, weighted by each cell's
    /// angular offset from the optical axis.
    pub fn update(&mut self, obs: &Observation, score: f64, pose: AgentPose, cfg: &SensorConfig) {
        debug_assert!((0.0..=1.0).contains(&score));
        for c in obs.visible_free() {
            let Some(slot) = self.grid.get_mut(c) else {
                continue;
            };
            let c_new = angular_confidence(pose.angular_offset(c), cfg.fov);
            *slot = fuse(*slot, score, c_new);
        }
    }

    /// Maximum value within Euclidean `radius` of `center`.
    pub fn window_max(&self, center: Cell, radius: i32) -> f64 {
        let r2 = (radius * radius) as i64;
        let mut best = 0.0f64;
        for y in center.y - radius..=center.y + radius {
            for x in center.x - radius..=center.x + radius {
                let c = Cell::new(x, y);
                if c.dist2(center) <= r2 {
                    if let Some(v) = self.grid.get(c) {
                        best = best.max(v.value);
                    }
                }
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierWaypoint {
    pub cell: Cell,
    pub cluster_size: usize,
    pub value: f64,
}

/// Waypoints sorted by value (descending), then by `(y, x)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrontierSet {
    pub waypoints: Vec<FrontierWaypoint>,
}

impl FrontierSet {
    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn best(&self) -> Option<&FrontierWaypoint> {
        self.waypoints.first()
    }

    pub fn sort(&mut self) {
        self.waypoints
            .sort_by(|a, b| b.value.total_cmp(&a.value).then(a.cell.cmp(&b.cell)));
    }
}

/// Groups frontier cells into 8-connected clusters. Each cluster is
/// represented by its member closest to the cluster centroid.
pub fn cluster_frontiers(cells: &BTreeSet<Cell>, vmap: &ValueMap) -> FrontierSet {
    let mut seen: BTreeSet<Cell> = BTreeSet::new();
    let mut set = FrontierSet::default();
    for &start in cells {
        if !seen.insert(start) {
            continue;
        }
        let mut members = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(c) = queue.pop_front() {
            for n in c.neighbors8() {
                if cells.contains(&n) && seen.insert(n) {
                    members.push(n);
                    queue.push_back(n);
                }
            }
        }
        let k = members.len() as f64;
        let cx = members.iter().map(|c| c.x as f64).sum::<f64>() / k;
        let cy = members.iter().map(|c| c.y as f64).sum::<f64>() / k;
        let cell = *members
            .iter()
            .min_by(|a, b| {
                let da = (a.x as f64 - cx).powi(2) + (a.y as f64 - cy).powi(2);
                let db = (b.x as f64 - cx).powi(2) + (b.y as f64 - cy).powi(2);
                da.total_cmp(&db).then(a.cmp(b))
            })
            .expect("cluster is non-empty");
        set.waypoints.push(FrontierWaypoint {
            cell,
            cluster_size: members.len(),
            value: vmap.window_max(cell, WAYPOINT_VALUE_RADIUS),
        });
    }
    set.sort();
    set
}
