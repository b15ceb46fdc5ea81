//! Scenes, object instances and episodes.
//!
//! A scene is a ground-truth occupancy grid with objects placed on free
//! cells. Generated scenes are rooms carved by recursive splitting, with one
//! door per dividing wall, so every free cell is 4-connected to every other.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cell, Grid};
use crate::rng::{self, SimRng, Stream};
use crate::sensing::{AgentPose, Heading};

pub const DEFAULT_SCALE: f64 = 0.25;
pub const DEFAULT_MAX_STEPS: u32 = 500;
/// 1.0 m at the default scale.
pub const DEFAULT_SUCCESS_RADIUS: u32 = 4;

const MIN_ROOM_SPAN: i32 = 3;
const GENERATION_ATTEMPTS: usize = 16;
const OBJECT_PLACEMENT_TRIES: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellTruth {
    Free,
    Obstacle,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub id: u32,
    pub category: String,
    pub cells: BTreeSet<Cell>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub id: String,
    pub truth: Grid<CellTruth>,
    pub objects: Vec<ObjectInstance>,
    /// Meters per cell.
    pub scale: f64,
}

impl Scene {
    pub fn width(&self) -> usize {
        self.truth.width()
    }

    pub fn height(&self) -> usize {
        self.truth.height()
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        self.truth.in_bounds(c)
    }

    /// Out-of-bounds cells count as obstacles.
    pub fn is_free(&self, c: Cell) -> bool {
        self.truth.get(c) == Some(&CellTruth::Free)
    }

    pub fn truth_at(&self, c: Cell) -> CellTruth {
        self.truth.get(c).copied().unwrap_or(CellTruth::Obstacle)
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.truth
            .iter()
            .filter(|(_, t)| **t == CellTruth::Free)
            .map(|(c, _)| c)
    }

    pub fn free_count(&self) -> usize {
        self.free_cells().count()
    }

    /// Sorted, deduplicated list of categories present.
    pub fn categories(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.objects.iter().map(|o| o.category.as_str()).collect();
        set.into_iter().map(str::to_owned).collect()
    }

    pub fn objects_of<'a>(&'a self, category: &'a str) -> impl Iterator<Item = &'a ObjectInstance> {
        self.objects.iter().filter(move |o| o.category == category)
    }

    pub fn object_at(&self, c: Cell) -> Option<&ObjectInstance> {
        self.objects.iter().find(|o| o.cells.contains(&c))
    }

    /// Free cells within `radius` geodesic steps of any instance of `category`.
    pub fn success_cells(&self, category: &str, radius: u32) -> Result<BTreeSet<Cell>> {
        let sources: Vec<Cell> = self
            .objects_of(category)
            .flat_map(|o| o.cells.iter().copied())
            .collect();
        if sources.is_empty() {
            return Err(Error::MissingGoal(category.to_owned()));
        }
        let field = distance_field(self, &sources);
        Ok(field
            .iter()
            .filter(|(_, d)| matches!(d, Some(d) if *d <= radius))
            .map(|(c, _)| c)
            .collect())
    }

    /// Checks every scene invariant; generated and loaded scenes both pass this.
    pub fn validate(&self) -> Result<()> {
        let (w, h) = (self.width() as i32, self.height() as i32);
        for c in self.truth.cells() {
            let border = c.x == 0 || c.y == 0 || c.x == w - 1 || c.y == h - 1;
            if border && self.is_free(c) {
                return Err(Error::InvalidParams(format!("border cell {c} is free")));
            }
        }
        let Some(first) = self.free_cells().next() else {
            return Err(Error::InvalidParams("scene has no free cell".into()));
        };
        let reach = distance_field(self, &[first]);
        if self.free_cells().any(|c| reach[c].is_none()) {
            return Err(Error::InvalidParams("free cells are not 4-connected".into()));
        }
        let mut seen = BTreeSet::new();
        for o in &self.objects {
            if o.cells.is_empty() {
                return Err(Error::InvalidParams(format!("object {} has no cells", o.id)));
            }
            if o.category.is_empty() || o.category.contains(char::is_whitespace) {
                return Err(Error::InvalidParams(format!("bad category `{}`", o.category)));
            }
            if !seen.insert(o.id) {
                return Err(Error::InvalidParams(format!("duplicate object id {}", o.id)));
            }
            if let Some(c) = o.cells.iter().find(|c| !self.is_free(**c)) {
                return Err(Error::InvalidParams(format!(
                    "object {} occupies non-free cell {c}",
                    o.id
                )));
            }
            if !is_4_connected(&o.cells) {
                return Err(Error::InvalidParams(format!("object {} is not 4-connected", o.id)));
            }
        }
        Ok(())
    }
}

fn is_4_connected(cells: &BTreeSet<Cell>) -> bool {
    let Some(&start) = cells.iter().next() else {
        return false;
    };
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(c) = queue.pop_front() {
        for n in c.neighbors4() {
            if cells.contains(&n) && seen.insert(n) {
                queue.push_back(n);
            }
        }
    }
    seen.len() == cells.len()
}

/// Multi-source BFS over free cells. Sources that are not free are ignored.
pub fn distance_field(scene: &Scene, sources: &[Cell]) -> Grid<Option<u32>> {
    let mut dist = Grid::filled(scene.width(), scene.height(), None);
    let mut queue = VecDeque::new();
    for &s in sources {
        if scene.is_free(s) && dist[s].is_none() {
            dist.set(s, Some(0));
            queue.push_back(s);
        }
    }
    while let Some(c) = queue.pop_front() {
        let d = dist[c].expect("queued cells have a distance");
        for n in c.neighbors4() {
            if scene.is_free(n) && dist[n].is_none() {
                dist.set(n, Some(d + 1));
                queue.push_back(n);
            }
        }
    }
    dist
}

/// Length of the shortest 4-connected free path from `from` to any cell of
/// `to`, or `None` when no target is reachable.
pub fn geodesic_distance(scene: &Scene, from: Cell, to: &BTreeSet<Cell>) -> Option<u32> {
    if !scene.is_free(from) {
        return None;
    }
    if to.contains(&from) {
        return Some(0);
    }
    let mut dist = Grid::filled(scene.width(), scene.height(), u32::MAX);
    dist.set(from, 0);
    let mut queue = VecDeque::from([from]);
    while let Some(c) = queue.pop_front() {
        let d = dist[c];
        for n in c.neighbors4() {
            if scene.is_free(n) && dist[n] == u32::MAX {
                if to.contains(&n) {
                    return Some(d + 1);
                }
                dist.set(n, d + 1);
                queue.push_back(n);
            }
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneParams {
    pub width: usize,
    pub height: usize,
    pub room_count: usize,
    /// Fraction of free cells covered by objects.
    pub object_density: f64,
    pub vocabulary: Vec<String>,
    pub scale: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        SceneParams {
            width: 32,
            height: 32,
            room_count: 4,
            object_density: 0.03,
            vocabulary: default_vocabulary(),
            scale: DEFAULT_SCALE,
        }
    }
}

/// The six standard object-goal categories.
pub fn default_vocabulary() -> Vec<String> {
    ["chair", "bed", "plant", "toilet", "tv_monitor", "sofa"]
        .into_iter()
        .map(String::from)
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct Rect {
    x0: i32,
    y0: i32,
    x1: i32,
    y1: i32,
}

impl Rect {
    fn area(&self) -> i32 {
        (self.x1 - self.x0 + 1) * (self.y1 - self.y0 + 1)
    }
}

pub fn generate_scene(seed: u64, params: &SceneParams) -> Result<Scene> {
    if params.width < 8 || params.height < 8 {
        return Err(Error::InvalidParams("width and height must be at least 8".into()));
    }
    if params.room_count == 0 {
        return Err(Error::InvalidParams("room_count must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&params.object_density) {
        return Err(Error::InvalidParams("object_density must be in [0, 1)".into()));
    }
    if params.object_density > 0.0 && params.vocabulary.is_empty() {
        return Err(Error::InvalidParams("vocabulary is empty".into()));
    }
    if let Some(bad) = params
        .vocabulary
        .iter()
        .find(|v| v.is_empty() || v.contains(char::is_whitespace))
    {
        return Err(Error::InvalidParams(format!("bad category `{bad}`")));
    }
    if !(params.scale > 0.0) {
        return Err(Error::InvalidParams("scale must be positive".into()));
    }

    let mut rng = rng::stream(seed, Stream::World);
    let mut last_err = None;
    for _ in 0..GENERATION_ATTEMPTS {
        match try_generate(&mut rng, seed, params) {
            Ok(scene) => return Ok(scene),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::GenerationFailure("no attempt made".into())))
}

fn try_generate(rng: &mut SimRng, seed: u64, params: &SceneParams) -> Result<Scene> {
    let (w, h) = (params.width as i32, params.height as i32);
    let mut truth = Grid::filled(params.width, params.height, CellTruth::Obstacle);
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            truth.set(Cell::new(x, y), CellTruth::Free);
        }
    }

    let mut rooms = vec![Rect {
        x0: 1,
        y0: 1,
        x1: w - 2,
        y1: h - 2,
    }];
    let mut doors: BTreeSet<Cell> = BTreeSet::new();
    while rooms.len() < params.room_count {
        let mut order: Vec<usize> = (0..rooms.len()).collect();
        order.sort_by_key(|&i| (std::cmp::Reverse(rooms[i].area()), i));
        let split = order
            .into_iter()
            .find_map(|i| split_room(rng, rooms[i], &doors).map(|s| (i, s)));
        let Some((i, (a, b, wall, door))) = split else {
            return Err(Error::GenerationFailure(format!(
                "cannot fit {} rooms in {}x{}",
                params.room_count, params.width, params.height
            )));
        };
        for c in wall {
            truth.set(c, CellTruth::Obstacle);
        }
        truth.set(door, CellTruth::Free);
        doors.insert(door);
        rooms[i] = a;
        rooms.push(b);
    }

    let mut scene = Scene {
        id: format!("scene_{seed}"),
        truth,
        objects: Vec::new(),
        scale: params.scale,
    };
    place_objects(rng, &mut scene, params, &doors)?;
    scene
        .validate()
        .map_err(|e| Error::GenerationFailure(e.to_string()))?;
    Ok(scene)
}

type Split = (Rect, Rect, Vec<Cell>, Cell);

/// Splits `room` with a one-cell wall and a single door. Wall positions whose
/// ends would seal an existing door are excluded.
fn split_room(rng: &mut SimRng, room: Rect, doors: &BTreeSet<Cell>) -> Option<Split> {
    let span_x = room.x1 - room.x0 + 1;
    let span_y = room.y1 - room.y0 + 1;
    let vertical_first = match span_x.cmp(&span_y) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => rng.random_bool(0.5),
    };
    for vertical in [vertical_first, !vertical_first] {
        let candidates: Vec<i32> = if vertical {
            (room.x0 + MIN_ROOM_SPAN..=room.x1 - MIN_ROOM_SPAN)
                .filter(|&s| {
                    !doors.contains(&Cell::new(s, room.y0 - 1))
                        && !doors.contains(&Cell::new(s, room.y1 + 1))
                })
                .collect()
        } else {
            (room.y0 + MIN_ROOM_SPAN..=room.y1 - MIN_ROOM_SPAN)
                .filter(|&s| {
                    !doors.contains(&Cell::new(room.x0 - 1, s))
                        && !doors.contains(&Cell::new(room.x1 + 1, s))
                })
                .collect()
        };
        let Some(&s) = candidates.choose(rng) else {
            continue;
        };
        return Some(if vertical {
            let wall: Vec<Cell> = (room.y0..=room.y1).map(|y| Cell::new(s, y)).collect();
            let door = Cell::new(s, rng.random_range(room.y0..=room.y1));
            (
                Rect { x1: s - 1, ..room },
                Rect { x0: s + 1, ..room },
                wall,
                door,
            )
        } else {
            let wall: Vec<Cell> = (room.x0..=room.x1).map(|x| Cell::new(x, s)).collect();
            let door = Cell::new(rng.random_range(room.x0..=room.x1), s);
            (
                Rect { y1: s - 1, ..room },
                Rect { y0: s + 1, ..room },
                wall,
                door,
            )
        });
    }
    None
}

/// Places 1-3 cell objects on free non-door cells. Objects never touch each
/// other (4-adjacency), which is what makes very high densities infeasible.
fn place_objects(
    rng: &mut SimRng,
    scene: &mut Scene,
    params: &SceneParams,
    doors: &BTreeSet<Cell>,
) -> Result<()> {
    if params.object_density <= 0.0 {
        return Ok(());
    }
    let candidates: Vec<Cell> = scene.free_cells().filter(|c| !doors.contains(c)).collect();
    let target = ((params.object_density * scene.free_count() as f64).round() as usize).max(1);
    let mut taken: BTreeSet<Cell> = BTreeSet::new();
    let blocked = |taken: &BTreeSet<Cell>, c: Cell| {
        taken.contains(&c) || c.neighbors4().iter().any(|n| taken.contains(n))
    };
    let mut placed = 0usize;
    let mut tries = 0usize;
    while placed < target {
        tries += 1;
        if tries > OBJECT_PLACEMENT_TRIES {
            return Err(Error::GenerationFailure(format!(
                "placed {placed} of {target} object cells; density {} too high",
                params.object_density
            )));
        }
        let &anchor = candidates.choose(rng).expect("scene has free cells");
        if blocked(&taken, anchor) {
            continue;
        }
        let size = rng.random_range(1..=3usize).min(target - placed);
        let mut cells = BTreeSet::from([anchor]);
        while cells.len() < size {
            let mut frontier: Vec<Cell> = cells
                .iter()
                .flat_map(|c| c.neighbors4())
                .filter(|n| {
                    !cells.contains(n)
                        && scene.is_free(*n)
                        && !doors.contains(n)
                        && !blocked(&taken, *n)
                })
                .collect();
            frontier.sort();
            frontier.dedup();
            match frontier.choose(rng) {
                Some(&n) => {
                    cells.insert(n);
                }
                None => break,
            }
        }
        let category = params
            .vocabulary
            .choose(rng)
            .expect("vocabulary checked non-empty")
            .clone();
        placed += cells.len();
        taken.extend(cells.iter().copied());
        scene.objects.push(ObjectInstance {
            id: scene.objects.len() as u32,
            category,
            cells,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub scene_id: String,
    pub start: AgentPose,
    pub goal_category: String,
    pub shortest_path_len: u32,
    pub max_steps: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSet {
    pub episodes: Vec<Episode>,
    pub seed: u64,
}

impl EpisodeSet {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Concatenates sets in order; the seed of the first set is kept.
    pub fn concat(sets: impl IntoIterator<Item = EpisodeSet>) -> EpisodeSet {
        let mut out = EpisodeSet::default();
        for (i, s) in sets.into_iter().enumerate() {
            if i == 0 {
                out.seed = s.seed;
            }
            out.episodes.extend(s.episodes);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeParams {
    pub d_min: u32,
    pub d_max: u32,
    pub max_steps: u32,
    pub success_radius: u32,
}

impl Default for EpisodeParams {
    fn default() -> Self {
        EpisodeParams {
            d_min: 8,
            d_max: 64,
            max_steps: DEFAULT_MAX_STEPS,
            success_radius: DEFAULT_SUCCESS_RADIUS,
        }
    }
}

/// Samples `n` distinct (start cell, goal) pairs whose geodesic distance to
/// the goal's success region lies in `[d_min, d_max]`.
pub fn make_episodes(scene: &Scene, n: usize, seed: u64, params: &EpisodeParams) -> Result<EpisodeSet> {
    if params.d_min < 1 || params.d_max < params.d_min {
        return Err(Error::InvalidParams("need 1 <= d_min <= d_max".into()));
    }
    if n == 0 {
        return Ok(EpisodeSet {
            episodes: Vec::new(),
            seed,
        });
    }
    let categories = scene.categories();
    if categories.is_empty() {
        return Err(Error::InvalidParams("scene has no objects".into()));
    }

    let mut candidates: Vec<(Cell, usize, u32)> = Vec::new();
    for (k, category) in categories.iter().enumerate() {
        let goal: Vec<Cell> = scene.success_cells(category, params.success_radius)?.into_iter().collect();
        let field = distance_field(scene, &goal);
        for (c, d) in field.iter() {
            if let Some(d) = *d {
                if (params.d_min..=params.d_max).contains(&d) {
                    candidates.push((c, k, d));
                }
            }
        }
    }
    if candidates.len() < n {
        return Err(Error::SamplingFailure {
            requested: n,
            available: candidates.len(),
        });
    }

    let mut rng = rng::stream(seed, Stream::World);
    candidates.shuffle(&mut rng);
    let episodes = candidates
        .into_iter()
        .take(n)
        .map(|(cell, k, d)| Episode {
            scene_id: scene.id.clone(),
            start: AgentPose::new(cell, Heading::from_index(rng.random_range(0..8))),
            goal_category: categories[k].clone(),
            shortest_path_len: d,
            max_steps: params.max_steps,
        })
        .collect();
    Ok(EpisodeSet { episodes, seed })
}

// Scene text format:
//   SCENE v1 <width> <height> <scale>
//   <height rows of '#' / '.'>
//   <id> <category> <x0,y0> <x1,y1> ...

pub fn format_scene(scene: &Scene) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "SCENE v1 {} {} {}", scene.width(), scene.height(), scene.scale);
    for y in 0..scene.height() as i32 {
        for x in 0..scene.width() as i32 {
            out.push(match scene.truth_at(Cell::new(x, y)) {
                CellTruth::Free => '.',
                CellTruth::Obstacle => '#',
            });
        }
        out.push('\n');
    }
    for o in &scene.objects {
        let _ = write!(out, "{} {}", o.id, o.category);
        for c in &o.cells {
            let _ = write!(out, " {c}");
        }
        out.push('\n');
    }
    out
}

pub fn parse_scene(id: &str, text: &str) -> Result<Scene> {
    let err = |msg: String| Error::parse("scene file", msg);
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| err("empty file".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let [magic, version, w, h, scale] = fields.as_slice() else {
        return Err(err(format!("bad header `{header}`")));
    };
    if *magic != "SCENE" || *version != "v1" {
        return Err(err(format!("bad header `{header}`")));
    }
    let width: usize = w.parse().map_err(|_| err(format!("bad width `{w}`")))?;
    let height: usize = h.parse().map_err(|_| err(format!("bad height `{h}`")))?;
    let scale: f64 = scale.parse().map_err(|_| err(format!("bad scale `{scale}`")))?;

    let mut data = Vec::with_capacity(width * height);
    for row in 0..height {
        let line = lines.next().ok_or_else(|| err(format!("missing grid row {row}")))?;
        if line.chars().count() != width {
            return Err(err(format!("row {row} has {} cells, expected {width}", line.chars().count())));
        }
        for ch in line.chars() {
            data.push(match ch {
                '.' => CellTruth::Free,
                '#' => CellTruth::Obstacle,
                other => return Err(err(format!("unexpected cell character `{other}`"))),
            });
        }
    }

    let mut objects = Vec::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let mut parts = line.split_whitespace();
        let id = parts
            .next()
            .and_then(|s| s.parse::<u32>().ok())
            .ok_or_else(|| err(format!("bad object line `{line}`")))?;
        let category = parts
            .next()
            .ok_or_else(|| err(format!("object {id} has no category")))?
            .to_owned();
        let cells = parts
            .map(|p| {
                let (x, y) = p.split_once(',').ok_or_else(|| err(format!("bad cell `{p}`")))?;
                let x = x.parse().map_err(|_| err(format!("bad cell `{p}`")))?;
                let y = y.parse().map_err(|_| err(format!("bad cell `{p}`")))?;
                Ok(Cell::new(x, y))
            })
            .collect::<Result<BTreeSet<Cell>>>()?;
        objects.push(ObjectInstance { id, category, cells });
    }

    let scene = Scene {
        id: id.to_owned(),
        truth: Grid::from_vec(width, height, data),
        objects,
        scale,
    };
    scene.validate().map_err(|e| err(e.to_string()))?;
    Ok(scene)
}

/// Loads a scene file; the scene id is the file stem.
pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("scene");
    parse_scene(id, &text)
}

pub fn save_scene(scene: &Scene, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_scene(scene)).map_err(|e| Error::io(path, e))
}

/// Scenes keyed by id.
pub type SceneSet = BTreeMap<String, Scene>;

/// Loads `<dir>/<scene_id>.scene` for every scene referenced by `set`.
pub fn load_scenes_for(set: &EpisodeSet, dir: impl AsRef<Path>) -> Result<SceneSet> {
    let dir = dir.as_ref();
    let mut scenes = SceneSet::new();
    for ep in &set.episodes {
        if !scenes.contains_key(&ep.scene_id) {
            let scene = load_scene(dir.join(format!("{}.scene", ep.scene_id)))?;
            scenes.insert(ep.scene_id.clone(), scene);
        }
    }
    Ok(scenes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(w: usize, h: usize, rooms: usize, density: f64) -> SceneParams {
        SceneParams {
            width: w,
            height: h,
            room_count: rooms,
            object_density: density,
            ..SceneParams::default()
        }
    }

    fn corridor() -> Scene {
        // 3 rows: wall, corridor (x = 1..=8), wall
        let text = "SCENE v1 10 3 0.25\n##########\n#........#\n##########\n0 chair 8,1\n";
        parse_scene("corridor", text).unwrap()
    }

    #[test]
    fn degenerate_single_room() {
        let scene = generate_scene(7, &params(8, 8, 1, 0.0)).unwrap();
        assert_eq!(scene.free_count(), 36);
        assert!(scene.objects.is_empty());
        for x in 0..8 {
            assert!(!scene.is_free(Cell::new(x, 0)));
            assert!(!scene.is_free(Cell::new(x, 7)));
            assert!(!scene.is_free(Cell::new(0, x)));
            assert!(!scene.is_free(Cell::new(7, x)));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let p = params(32, 32, 4, 0.05);
        let a = generate_scene(11, &p).unwrap();
        let b = generate_scene(11, &p).unwrap();
        assert_eq!(format_scene(&a), format_scene(&b));
        assert_eq!(a, b);
    }

    #[test]
    fn generated_rooms_are_connected() {
        let scene = generate_scene(7, &params(32, 32, 4, 0.05)).unwrap();
        // independent flood fill with an explicit stack
        let free: BTreeSet<Cell> = scene.free_cells().collect();
        let start = *free.iter().next().unwrap();
        let mut seen = BTreeSet::from([start]);
        let mut stack = vec![start];
        while let Some(c) = stack.pop() {
            for n in c.neighbors4() {
                if free.contains(&n) && seen.insert(n) {
                    stack.push(n);
                }
            }
        }
        assert_eq!(seen, free);
        assert!(!scene.objects.is_empty());
    }

    #[test]
    fn rejects_bad_params() {
        assert!(matches!(
            generate_scene(1, &params(7, 8, 1, 0.0)),
            Err(Error::InvalidParams(_))
        ));
        assert!(matches!(
            generate_scene(1, &params(8, 8, 0, 0.0)),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn too_many_rooms_or_objects_fail() {
        assert!(matches!(
            generate_scene(1, &params(8, 8, 6, 0.0)),
            Err(Error::GenerationFailure(_))
        ));
        assert!(matches!(
            generate_scene(1, &params(16, 16, 1, 0.9)),
            Err(Error::GenerationFailure(_))
        ));
    }

    #[test]
    fn geodesic_basics() {
        let s = corridor();
        let from = Cell::new(1, 1);
        assert_eq!(geodesic_distance(&s, from, &BTreeSet::from([Cell::new(5, 1)])), Some(4));
        assert_eq!(geodesic_distance(&s, from, &BTreeSet::from([from])), Some(0));
        assert_eq!(geodesic_distance(&s, from, &BTreeSet::from([Cell::new(5, 0)])), None);
        assert_eq!(geodesic_distance(&s, from, &BTreeSet::new()), None);
    }

    #[test]
    fn success_cells_use_geodesic_radius() {
        let s = corridor();
        let cells = s.success_cells("chair", 4).unwrap();
        let xs: Vec<i32> = cells.iter().map(|c| c.x).collect();
        assert_eq!(xs, vec![4, 5, 6, 7, 8]);
        assert!(matches!(s.success_cells("bed", 4), Err(Error::MissingGoal(_))));
    }

    #[test]
    fn episodes_respect_distance_band() {
        let scene = generate_scene(3, &params(32, 32, 4, 0.03)).unwrap();
        let p = EpisodeParams::default();
        let set = make_episodes(&scene, 30, 9, &p).unwrap();
        assert_eq!(set.episodes.len(), 30);
        for ep in &set.episodes {
            let goal = scene.success_cells(&ep.goal_category, p.success_radius).unwrap();
            let d = geodesic_distance(&scene, ep.start.cell, &goal).unwrap();
            assert_eq!(d, ep.shortest_path_len);
            assert!((p.d_min..=p.d_max).contains(&d));
        }
        assert_eq!(set, make_episodes(&scene, 30, 9, &p).unwrap());
    }

    #[test]
    fn zero_episodes_is_empty() {
        let scene = corridor();
        let set = make_episodes(&scene, 0, 1, &EpisodeParams::default()).unwrap();
        assert!(set.episodes.is_empty());
    }

    #[test]
    fn sampling_failure_when_too_few_starts() {
        let scene = corridor();
        let p = EpisodeParams {
            d_min: 1,
            d_max: 3,
            ..EpisodeParams::default()
        };
        // cells x = 1..=3 are at distance 3..=1 from the success region
        assert!(matches!(
            make_episodes(&scene, 4, 1, &p),
            Err(Error::SamplingFailure { requested: 4, available: 3 })
        ));
        assert_eq!(make_episodes(&scene, 3, 1, &p).unwrap().episodes.len(), 3);
    }

    #[test]
    fn scene_file_roundtrip_and_errors() {
        let scene = generate_scene(5, &params(20, 16, 3, 0.04)).unwrap();
        let text = format_scene(&scene);
        assert!(text.starts_with("SCENE v1 20 16 0.25\n"));
        let back = parse_scene(&scene.id, &text).unwrap();
        assert_eq!(back, scene);

        assert!(parse_scene("x", "SCENE v2 8 8 0.25\n").is_err());
        assert!(parse_scene("x", "SCENE v1 3 3 0.25\n###\n#.#\n").is_err());
        assert!(parse_scene("x", "SCENE v1 3 3 0.25\n###\n#x#\n###\n").is_err());
        // object on an obstacle
        assert!(parse_scene("x", "SCENE v1 3 3 0.25\n###\n#.#\n###\n0 chair 0,0\n").is_err());
    }
}
