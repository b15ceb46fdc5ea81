//! Independent oracles and fixtures shared by the integration tests. None of
//! these call into the code they check.

#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};

use fronsim::grid::Grid;
use fronsim::mapping::{BeliefMap, Knowledge};
use fronsim::perception::{
    builtin_profiles, Accuracy, ModuleProfile, PipelineConfig, SegmenterAccuracy, VerifierAccuracy,
    DEFAULT_VRAM_BUDGET_MIB,
};
use fronsim::sensing::AgentPose;
use fronsim::world::{generate_scene, make_episodes, CellTruth, EpisodeParams, EpisodeSet, Scene, SceneParams, SceneSet};
use fronsim::Cell;
use rand::Rng;

pub const DIRS4: [(i32, i32); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

/// Random grid with an obstacle border and interior obstacles at `p`.
pub fn random_scene<R: Rng>(rng: &mut R, w: usize, h: usize, p: f64) -> Scene {
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let border = x == 0 || y == 0 || x == w - 1 || y == h - 1;
            data.push(if border || rng.random_bool(p) {
                CellTruth::Obstacle
            } else {
                CellTruth::Free
            });
        }
    }
    Scene {
        id: "random".into(),
        truth: Grid::from_vec(w, h, data),
        objects: Vec::new(),
        scale: 0.25,
    }
}

pub fn random_belief<R: Rng>(rng: &mut R, w: usize, h: usize) -> BeliefMap {
    let data = (0..w * h)
        .map(|_| match rng.random_range(0..10) {
            0..=3 => Knowledge::Unknown,
            4..=7 => Knowledge::Free,
            _ => Knowledge::Obstacle,
        })
        .collect();
    BeliefMap::from_grid(Grid::from_vec(w, h, data))
}

fn free(scene: &Scene, x: i32, y: i32) -> bool {
    x >= 0
        && y >= 0
        && (x as usize) < scene.truth.width()
        && (y as usize) < scene.truth.height()
        && scene.truth.as_slice()[y as usize * scene.truth.width() + x as usize] == CellTruth::Free
}

/// Plain BFS over free cells; distances from `from` keyed by (x, y).
pub fn bfs(scene: &Scene, from: (i32, i32)) -> BTreeMap<(i32, i32), u32> {
    let mut dist = BTreeMap::new();
    if !free(scene, from.0, from.1) {
        return dist;
    }
    dist.insert(from, 0);
    let mut q = VecDeque::from([from]);
    while let Some((x, y)) = q.pop_front() {
        let d = dist[&(x, y)];
        for (dx, dy) in DIRS4 {
            let n = (x + dx, y + dy);
            if free(scene, n.0, n.1) && !dist.contains_key(&n) {
                dist.insert(n, d + 1);
                q.push_back(n);
            }
        }
    }
    dist
}

/// Exact rational `num/den` with `den > 0`.
#[derive(Clone, Copy)]
struct Frac(i64, i64);

impl Frac {
    fn new(n: i64, d: i64) -> Self {
        if d < 0 {
            Frac(-n, -d)
        } else {
            Frac(n, d)
        }
    }
    fn le(self, o: Frac) -> bool {
        self.0 * o.1 <= o.0 * self.1
    }
}

/// Does the segment between the centers of `a` and `b` meet the closed unit
/// square of cell `c`? Liang-Barsky in doubled integer coordinates.
pub fn segment_touches(a: Cell, b: Cell, c: Cell) -> bool {
    let p0 = [2 * a.x as i64, 2 * a.y as i64];
    let d = [2 * (b.x - a.x) as i64, 2 * (b.y - a.y) as i64];
    let lo = [2 * c.x as i64 - 1, 2 * c.y as i64 - 1];
    let hi = [2 * c.x as i64 + 1, 2 * c.y as i64 + 1];
    let mut tmin = Frac(0, 1);
    let mut tmax = Frac(1, 1);
    for k in 0..2 {
        if d[k] == 0 {
            if p0[k] < lo[k] || p0[k] > hi[k] {
                return false;
            }
            continue;
        }
        let mut t1 = Frac::new(lo[k] - p0[k], d[k]);
        let mut t2 = Frac::new(hi[k] - p0[k], d[k]);
        if !t1.le(t2) {
            std::mem::swap(&mut t1, &mut t2);
        }
        if tmin.le(t1) {
            tmin = t1;
        }
        if t2.le(tmax) {
            tmax = t2;
        }
    }
    tmin.le(tmax)
}

/// Every cell other than the endpoints that the segment touches is free.
pub fn los_oracle(scene: &Scene, a: Cell, b: Cell) -> bool {
    for y in a.y.min(b.y) - 1..=a.y.max(b.y) + 1 {
        for x in a.x.min(b.x) - 1..=a.x.max(b.x) + 1 {
            let c = Cell::new(x, y);
            if c != a && c != b && segment_touches(a, b, c) && !free(scene, x, y) {
                return false;
            }
        }
    }
    true
}

/// Inside a 90 degree field of view, decided in integers: the angle between
/// `v` and the heading's unit step `u` is at most 45 degrees iff
/// `v.u >= 0` and `2 (v.u)^2 >= |v|^2 |u|^2`.
pub fn in_fov90(pose: AgentPose, c: Cell) -> bool {
    let deg = pose.heading.degrees() as f64;
    let ux = deg.to_radians().cos().round() as i64;
    let uy = -(deg.to_radians().sin().round() as i64);
    let vx = (c.x - pose.cell.x) as i64;
    let vy = (c.y - pose.cell.y) as i64;
    let dot = vx * ux + vy * uy;
    dot >= 0 && 2 * dot * dot >= (vx * vx + vy * vy) * (ux * ux + uy * uy)
}

/// Visible set for a 90 degree sensor of integer range, by brute force.
pub fn sense_oracle(scene: &Scene, pose: AgentPose, range: i64) -> BTreeSet<Cell> {
    let mut out = BTreeSet::from([pose.cell]);
    for y in 0..scene.truth.height() as i32 {
        for x in 0..scene.truth.width() as i32 {
            let c = Cell::new(x, y);
            let dx = (x - pose.cell.x) as i64;
            let dy = (y - pose.cell.y) as i64;
            if dx * dx + dy * dy <= range * range && in_fov90(pose, c) && los_oracle(scene, pose.cell, c) {
                out.insert(c);
            }
        }
    }
    out
}

/// Free cells with an unknown 4-neighbor, by a full scan.
pub fn frontier_scan(belief: &BeliefMap) -> BTreeSet<Cell> {
    let (w, h) = (belief.width() as i32, belief.height() as i32);
    let at = |x: i32, y: i32| belief.grid().as_slice()[(y * w + x) as usize];
    let mut out = BTreeSet::new();
    for y in 0..h {
        for x in 0..w {
            if at(x, y) != Knowledge::Free {
                continue;
            }
            let unknown_nb = DIRS4.iter().any(|&(dx, dy)| {
                let (nx, ny) = (x + dx, y + dy);
                nx >= 0 && ny >= 0 && nx < w && ny < h && at(nx, ny) == Knowledge::Unknown
            });
            if unknown_nb {
                out.insert(Cell::new(x, y));
            }
        }
    }
    out
}

/// Dijkstra over non-obstacle cells (unknown included), unit edge weights.
pub fn dijkstra(belief: &BeliefMap, from: Cell, to: Cell) -> Option<u32> {
    let (w, h) = (belief.width() as i32, belief.height() as i32);
    let ok = |x: i32, y: i32| {
        x >= 0 && y >= 0 && x < w && y < h && belief.grid().as_slice()[(y * w + x) as usize] != Knowledge::Obstacle
    };
    if !ok(from.x, from.y) || !ok(to.x, to.y) {
        return None;
    }
    let mut dist = BTreeMap::new();
    let mut heap = BinaryHeap::from([Reverse((0u32, from.x, from.y))]);
    dist.insert((from.x, from.y), 0u32);
    while let Some(Reverse((d, x, y))) = heap.pop() {
        if (x, y) == (to.x, to.y) {
            return Some(d);
        }
        if dist.get(&(x, y)).is_some_and(|&best| d > best) {
            continue;
        }
        for (dx, dy) in DIRS4 {
            let (nx, ny) = (x + dx, y + dy);
            if ok(nx, ny) && dist.get(&(nx, ny)).is_none_or(|&best| d + 1 < best) {
                dist.insert((nx, ny), d + 1);
                heap.push(Reverse((d + 1, nx, ny)));
            }
        }
    }
    None
}

/// Scenes and a combined episode set: `n_scenes` scenes from consecutive
/// seeds, `per_scene` episodes each.
pub fn scene_suite(first_seed: u64, n_scenes: usize, per_scene: usize, params: &SceneParams) -> (SceneSet, EpisodeSet) {
    let mut scenes = SceneSet::new();
    let mut sets = Vec::new();
    for k in 0..n_scenes as u64 {
        let scene = generate_scene(first_seed + k, params).unwrap();
        sets.push(make_episodes(&scene, per_scene, first_seed + k, &EpisodeParams::default()).unwrap());
        scenes.insert(scene.id.clone(), scene);
    }
    (scenes, EpisodeSet::concat(sets))
}

pub fn profile(name: &str) -> ModuleProfile {
    builtin_profiles().get(name).unwrap().clone()
}

pub fn pipeline(scorer: ModuleProfile, detector: ModuleProfile, verifier: Option<ModuleProfile>) -> PipelineConfig {
    PipelineConfig::new(scorer, detector, profile("MobileSAM"), verifier, DEFAULT_VRAM_BUDGET_MIB).unwrap()
}

/// Noise-free scorer, always-right detector, exact segmenter, accept-all
/// verifier.
pub fn perfect_pipeline() -> PipelineConfig {
    let mut seg = profile("MobileSAM");
    seg.accuracy = Accuracy::Segmenter(SegmenterAccuracy { point_error_cells: 0 });
    let mut ver = profile("nanoLLaVA");
    ver.accuracy = Accuracy::Verifier(VerifierAccuracy {
        p_accept_true: 1.0,
        p_reject_false: 1.0,
    });
    PipelineConfig::new(
        profile("CLIP-ViT-B32").with_noise(0.0),
        profile("YOLOv7-W6").with_detector(1.0, 0.0),
        seg,
        Some(ver),
        DEFAULT_VRAM_BUDGET_MIB,
    )
    .unwrap()
}
