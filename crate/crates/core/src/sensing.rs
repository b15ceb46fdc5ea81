//! Egocentric sensing: occlusion-aware field of view over the ground-truth
//! grid, plus per-ray depth.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Cell;
use crate::world::{CellTruth, Scene};

/// Heading in degrees, a multiple of 45 in `[0, 360)`. 0 faces +x, 90 faces
/// -y (up on screen); turning left increases the angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u16", into = "u16")]
pub struct Heading(u16);

impl Heading {
    pub const EAST: Heading = Heading(0);
    pub const NORTH: Heading = Heading(90);
    pub const WEST: Heading = Heading(180);
    pub const SOUTH: Heading = Heading(270);

    pub fn new(degrees: u16) -> Result<Self> {
        if degrees % 45 != 0 || degrees >= 360 {
            return Err(Error::InvalidParams(format!(
                "heading {degrees} is not a multiple of 45 in [0, 360)"
            )));
        }
        Ok(Heading(degrees))
    }

    pub fn from_index(k: u16) -> Self {
        Heading((k % 8) * 45)
    }

    pub fn degrees(self) -> u16 {
        self.0
    }

    pub fn index(self) -> u16 {
        self.0 / 45
    }

    pub fn left(self) -> Self {
        Heading::from_index(self.index() + 1)
    }

    pub fn right(self) -> Self {
        Heading::from_index(self.index() + 7)
    }

    /// Unit grid step for this heading (diagonals step both axes).
    pub fn step(self) -> (i32, i32) {
        const STEPS: [(i32, i32); 8] = [
            (1, 0),
            (1, -1),
            (0, -1),
            (-1, -1),
            (-1, 0),
            (-1, 1),
            (0, 1),
            (1, 1),
        ];
        STEPS[self.index() as usize]
    }

    pub fn is_cardinal(self) -> bool {
        self.index() % 2 == 0
    }

    /// The cardinal heading that moves from `from` to the 4-neighbor `to`.
    pub fn towards(from: Cell, to: Cell) -> Option<Heading> {
        match (to.x - from.x, to.y - from.y) {
            (1, 0) => Some(Heading::EAST),
            (0, -1) => Some(Heading::NORTH),
            (-1, 0) => Some(Heading::WEST),
            (0, 1) => Some(Heading::SOUTH),
            _ => None,
        }
    }
}

impl TryFrom<u16> for Heading {
    type Error = Error;

    fn try_from(value: u16) -> Result<Self> {
        Heading::new(value)
    }
}

impl From<Heading> for u16 {
    fn from(h: Heading) -> u16 {
        h.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AgentPose {
    pub cell: Cell,
    pub heading: Heading,
}

impl AgentPose {
    pub fn new(cell: Cell, heading: Heading) -> Self {
        AgentPose { cell, heading }
    }

    pub fn facing_cell(&self) -> Cell {
        let (dx, dy) = self.heading.step();
        Cell::new(self.cell.x + dx, self.cell.y + dy)
    }

    /// Signed angle in degrees, `(-180, 180]`, between the optical axis and
    /// the direction to `target`. Zero for the agent's own cell.
    pub fn angular_offset(&self, target: Cell) -> f64 {
        let vx = (target.x - self.cell.x) as f64;
        let vy = -(target.y - self.cell.y) as f64;
        if vx == 0.0 && vy == 0.0 {
            return 0.0;
        }
        wrap_degrees(vy.atan2(vx).to_degrees() - self.heading.degrees() as f64)
    }
}

fn wrap_degrees(mut a: f64) -> f64 {
    while a > 180.0 {
        a -= 360.0;
    }
    while a <= -180.0 {
        a += 360.0;
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorConfig {
    /// Horizontal field of view, degrees.
    pub fov: f64,
    /// Cells.
    pub range: f64,
    pub rays: u32,
}

impl Default for SensorConfig {
    fn default() -> Self {
        SensorConfig {
            fov: 90.0,
            range: 12.0,
            rays: 64,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fov > 0.0 && self.fov <= 360.0) {
            return Err(Error::InvalidParams(format!("fov {} not in (0, 360]", self.fov)));
        }
        if !(self.range >= 0.0) {
            return Err(Error::InvalidParams(format!("range {} is negative", self.range)));
        }
        if self.rays == 0 {
            return Err(Error::InvalidParams("rays must be at least 1".into()));
        }
        Ok(())
    }

    fn in_fov(&self, offset_deg: f64) -> bool {
        self.fov >= 360.0 || offset_deg.abs() <= self.fov / 2.0 + 1e-9
    }

    /// Ray angles (degrees, absolute) at uniform spacing across the field of
    /// view. A full circle spaces rays evenly without duplicating the seam.
    pub fn ray_angles(&self, heading: Heading) -> Vec<f64> {
        let h = heading.degrees() as f64;
        let n = self.rays as usize;
        if n == 1 {
            return vec![h];
        }
        let spacing = if self.fov >= 360.0 {
            self.fov / n as f64
        } else {
            self.fov / (n - 1) as f64
        };
        (0..n).map(|i| h - self.fov / 2.0 + i as f64 * spacing).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectHit {
    pub object_id: u32,
    pub category: String,
    pub visible_cells: BTreeSet<Cell>,
    /// Euclidean distance in cells from the agent to the closest visible cell.
    pub nearest_distance: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub visible: BTreeMap<Cell, CellTruth>,
    /// Per-ray distance to the first obstacle, `range` when nothing is hit.
    pub depth: Vec<f64>,
    pub object_hits: Vec<ObjectHit>,
}

impl Observation {
    pub fn visible_free(&self) -> impl Iterator<Item = Cell> + '_ {
        self.visible
            .iter()
            .filter(|(_, t)| **t == CellTruth::Free)
            .map(|(c, _)| *c)
    }
}

/// Cells touched by the segment between the centers of `a` and `b`, in
/// traversal order. A segment passing exactly through a lattice corner
/// touches all four cells around it, so diagonal gaps between two obstacles
/// do not leak visibility.
pub fn supercover(a: Cell, b: Cell) -> Vec<Cell> {
    let nx = a.x.abs_diff(b.x) as i64;
    let ny = a.y.abs_diff(b.y) as i64;
    let sx = (b.x - a.x).signum();
    let sy = (b.y - a.y).signum();
    let mut out = Vec::with_capacity((nx + ny + 1) as usize);
    let (mut x, mut y) = (a.x, a.y);
    out.push(a);
    let (mut ix, mut iy) = (0i64, 0i64);
    while ix < nx || iy < ny {
        let decision = (1 + 2 * ix) * ny - (1 + 2 * iy) * nx;
        if decision == 0 {
            out.push(Cell::new(x + sx, y));
            out.push(Cell::new(x, y + sy));
            x += sx;
            y += sy;
            ix += 1;
            iy += 1;
        } else if decision < 0 {
            x += sx;
            ix += 1;
        } else {
            y += sy;
            iy += 1;
        }
        out.push(Cell::new(x, y));
    }
    out
}

/// True iff no cell strictly between `a` and `b` on their supercover is an
/// obstacle (out-of-bounds counts as obstacle).
pub fn line_of_sight(scene: &Scene, a: Cell, b: Cell) -> bool {
    supercover(a, b)
        .into_iter()
        .filter(|&c| c != a && c != b)
        .all(|c| scene.is_free(c))
}

/// Casts the field of view from `pose`.
///
/// A cell is visible when its center lies within `range` of the agent, its
/// direction lies inside the field of view, and the line of sight to it is
/// clear; the agent's own cell is always visible. Obstacles bounding the free
/// space are visible themselves. Depth is measured along `cfg.rays` rays.
///
/// `rng` is reserved for sensor noise and is not drawn from.
pub fn sense<R: Rng + ?Sized>(scene: &Scene, pose: AgentPose, cfg: &SensorConfig, _rng: &mut R) -> Observation {
    let a = pose.cell;
    let r = cfg.range.max(0.0);
    let reach = r.floor() as i32;
    let r2 = r * r + 1e-9;

    let mut visible = BTreeMap::new();
    visible.insert(a, scene.truth_at(a));
    for y in a.y - reach..=a.y + reach {
        for x in a.x - reach..=a.x + reach {
            let c = Cell::new(x, y);
            if c == a || !scene.in_bounds(c) || (c.dist2(a) as f64) > r2 {
                continue;
            }
            if cfg.in_fov(pose.angular_offset(c)) && line_of_sight(scene, a, c) {
                visible.insert(c, scene.truth_at(c));
            }
        }
    }

    let depth = cfg
        .ray_angles(pose.heading)
        .into_iter()
        .map(|angle| ray_depth(scene, a, angle, r))
        .collect();

    let object_hits = scene
        .objects
        .iter()
        .filter_map(|o| {
            let cells: BTreeSet<Cell> = o
                .cells
                .iter()
                .copied()
                .filter(|c| visible.contains_key(c))
                .collect();
            let nearest = cells.iter().map(|c| c.dist(a)).fold(f64::INFINITY, f64::min);
            (!cells.is_empty()).then(|| ObjectHit {
                object_id: o.id,
                category: o.category.clone(),
                visible_cells: cells,
                nearest_distance: nearest,
            })
        })
        .collect();

    Observation {
        visible,
        depth,
        object_hits,
    }
}

/// Grid DDA from the center of `origin`; returns the distance at which the
/// ray enters the first obstacle, capped at `range`.
fn ray_depth(scene: &Scene, origin: Cell, angle_deg: f64, range: f64) -> f64 {
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    let (dx, dy) = (cos, -sin);
    let step_x = if dx > 0.0 { 1 } else { -1 };
    let step_y = if dy > 0.0 { 1 } else { -1 };
    let delta_x = if dx.abs() < 1e-12 { f64::INFINITY } else { 1.0 / dx.abs() };
    let delta_y = if dy.abs() < 1e-12 { f64::INFINITY } else { 1.0 / dy.abs() };
    let (mut t_x, mut t_y) = (0.5 * delta_x, 0.5 * delta_y);
    let (mut x, mut y) = (origin.x, origin.y);
    loop {
        let t = if t_x < t_y {
            x += step_x;
            let t = t_x;
            t_x += delta_x;
            t
        } else {
            y += step_y;
            let t = t_y;
            t_y += delta_y;
            t
        };
        if t >= range {
            return range;
        }
        if !scene.is_free(Cell::new(x, y)) {
            return t;
        }
    }
}
