//! The per-step decision loop.
//!
//! Every step runs the full pipeline: sense, update the belief and value
//! maps, rank frontiers, run detection (and segmentation plus verification
//! when something is detected), pick a waypoint and emit one motion action
//! toward it. A shortest-path planner over the belief map stands in for a
//! learned point-goal controller.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{Cell, Grid};
use crate::mapping::{cluster_frontiers, BeliefMap, FrontierSet, Knowledge, ValueMap};
use crate::metrics::{EpisodeResult, ModuleCalls};
use crate::perception::{
    compute_semantic_field, detect, score_semantic, segment_nearest_point, verify, PipelineConfig,
    SemanticField, DEFAULT_LAMBDA,
};
use crate::rng::{self, SimRng, Stream};
use crate::sensing::{sense, AgentPose, Heading, SensorConfig};
use crate::world::{distance_field, Episode, Scene, DEFAULT_SUCCESS_RADIUS};

pub const SPIN_STEPS: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Spin,
    Explore,
    GoToObject,
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Forward,
    TurnLeft45,
    TurnRight45,
    Stop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub pose: AgentPose,
    pub phase: Phase,
    pub spin_remaining: u32,
    pub goal_waypoint: Option<Cell>,
    pub locked_object_waypoint: Option<Cell>,
}

impl AgentState {
    pub fn new(pose: AgentPose) -> Self {
        AgentState {
            pose,
            phase: Phase::Spin,
            spin_remaining: SPIN_STEPS,
            goal_waypoint: None,
            locked_object_waypoint: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub step_index: u32,
    pub action: Action,
    pub module_calls: ModuleCalls,
    pub detection_event: bool,
    pub verified: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub sensor: SensorConfig,
    /// Decay length of the latent semantic field, cells.
    pub lambda: f64,
    pub success_radius: u32,
    /// Stop once the belief-map path to the object waypoint is at most this
    /// long. `None` derives it from the segmenter: a point off by `e` cells
    /// per axis can be `2e` steps further from the object, so the default is
    /// `success_radius - 2e`.
    pub stop_radius: Option<u32>,
    /// Modeled per-step cost outside the four modules.
    pub step_overhead_ms: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            sensor: SensorConfig::default(),
            lambda: DEFAULT_LAMBDA,
            success_radius: DEFAULT_SUCCESS_RADIUS,
            stop_radius: None,
            step_overhead_ms: 0.0,
        }
    }
}

impl RunConfig {
    pub fn stop_radius_for(&self, pipeline: &PipelineConfig) -> u32 {
        self.stop_radius.unwrap_or_else(|| {
            let e = pipeline.segmenter().segmenter().point_error_cells;
            self.success_radius.saturating_sub(2 * e)
        })
    }
}

/// No detection and no frontier left to visit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("exploration exhausted")]
pub struct ExplorationExhausted;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Waypoint {
    Object(Cell),
    Frontier(Cell),
}

impl Waypoint {
    pub fn cell(self) -> Cell {
        match self {
            Waypoint::Object(c) | Waypoint::Frontier(c) => c,
        }
    }
}

/// The spin-initialization action sequence: a full revolution.
pub fn spin_init(state: &AgentState) -> Vec<Action> {
    debug_assert_eq!(state.phase, Phase::Spin);
    vec![Action::TurnLeft45; SPIN_STEPS as usize]
}

/// Picks the object waypoint when one is verified now or locked from an
/// earlier step, else the highest-valued frontier. A fresh detection only
/// replaces the lock when it is nearer the agent.
pub fn choose_waypoint(
    state: &mut AgentState,
    frontiers: &FrontierSet,
    detection: Option<Cell>,
) -> Result<Waypoint, ExplorationExhausted> {
    if let Some(d) = detection {
        let here = state.pose.cell;
        let nearer = state
            .locked_object_waypoint
            .is_none_or(|old| (d.dist2(here), d.yx()) < (old.dist2(here), old.yx()));
        if nearer {
            state.locked_object_waypoint = Some(d);
        }
    }
    let choice = match (state.locked_object_waypoint, frontiers.best()) {
        (Some(locked), _) => {
            state.phase = Phase::GoToObject;
            Waypoint::Object(locked)
        }
        (None, Some(best)) => Waypoint::Frontier(best.cell),
        (None, None) => return Err(ExplorationExhausted),
    };
    state.goal_waypoint = Some(choice.cell());
    Ok(choice)
}

fn traversable(belief: &BeliefMap, c: Cell) -> bool {
    belief.grid().in_bounds(c) && belief.get(c) != Knowledge::Obstacle
}

/// Shortest 4-connected path over cells not known to be obstacles; unknown
/// cells are traversable at unit cost. A* with a Manhattan heuristic; ties
/// on `f` expand the smaller `(y, x)` first. The path includes both ends.
pub fn plan_path(belief: &BeliefMap, from: Cell, to: Cell) -> Option<Vec<Cell>> {
    if !traversable(belief, from) || !traversable(belief, to) {
        return None;
    }
    let (w, h) = (belief.width(), belief.height());
    let mut g = Grid::filled(w, h, u32::MAX);
    let mut parent: Grid<Option<Cell>> = Grid::filled(w, h, None);
    let mut closed = Grid::filled(w, h, false);
    let mut open = BinaryHeap::new();
    g.set(from, 0);
    open.push(Reverse((from.manhattan(to), from.y, from.x)));
    while let Some(Reverse((_, y, x))) = open.pop() {
        let c = Cell::new(x, y);
        if closed[c] {
            continue;
        }
        if c == to {
            let mut path = vec![to];
            let mut cur = to;
            while let Some(p) = parent[cur] {
                path.push(p);
                cur = p;
            }
            path.reverse();
            return Some(path);
        }
        closed.set(c, true);
        let gc = g[c];
        for n in c.neighbors4() {
            if !traversable(belief, n) || closed[n] {
                continue;
            }
            let gn = gc + 1;
            if gn < g[n] {
                g.set(n, gn);
                parent.set(n, Some(c));
                open.push(Reverse((gn + n.manhattan(to), n.y, n.x)));
            }
        }
    }
    None
}

/// Path cost in cells, if a path exists.
pub fn path_cost(belief: &BeliefMap, from: Cell, to: Cell) -> Option<u32> {
    plan_path(belief, from, to).map(|p| p.len() as u32 - 1)
}

/// Next cell toward `to`. Keeps going straight whenever the cell ahead lies
/// on some shortest path, so paths bend as rarely as the planner allows.
fn next_cell(belief: &BeliefMap, pose: AgentPose, to: Cell) -> Option<Option<Cell>> {
    let path = plan_path(belief, pose.cell, to)?;
    if path.len() == 1 {
        return Some(None);
    }
    if pose.heading.is_cardinal() {
        let ahead = pose.facing_cell();
        if ahead == path[1] {
            return Some(Some(ahead));
        }
        if traversable(belief, ahead) {
            if let Some(rest) = path_cost(belief, ahead, to) {
                if rest as usize == path.len() - 2 {
                    return Some(Some(ahead));
                }
            }
        }
    }
    Some(Some(path[1]))
}

/// Turn or move toward the 4-neighbor `next`.
pub fn action_toward(pose: AgentPose, next: Cell) -> Action {
    let want = Heading::towards(pose.cell, next).expect("next cell is a 4-neighbor");
    if want == pose.heading {
        return Action::Forward;
    }
    let diff = (want.index() + 8 - pose.heading.index()) % 8;
    if diff <= 4 {
        Action::TurnLeft45
    } else {
        Action::TurnRight45
    }
}

/// Motion decision once a waypoint is chosen. Returns `None` when the
/// waypoint cannot be reached through non-obstacle cells.
pub fn motion_action(
    belief: &BeliefMap,
    pose: AgentPose,
    waypoint: Waypoint,
    stop_radius: u32,
) -> Option<Action> {
    if let Waypoint::Object(target) = waypoint {
        if path_cost(belief, pose.cell, target)? <= stop_radius {
            return Some(Action::Stop);
        }
    }
    match next_cell(belief, pose, waypoint.cell())? {
        Some(next) => Some(action_toward(pose, next)),
        // standing on a frontier waypoint: look around
        None => Some(Action::TurnLeft45),
    }
}

/// Waypoint choice plus motion, with fallbacks: an unreachable object lock
/// is dropped, and unreachable frontiers are skipped in rank order.
pub fn decide(
    state: &mut AgentState,
    belief: &BeliefMap,
    frontiers: &FrontierSet,
    detection: Option<Cell>,
    stop_radius: u32,
) -> Result<Action, ExplorationExhausted> {
    let first = choose_waypoint(state, frontiers, detection)?;
    if let Some(a) = motion_action(belief, state.pose, first, stop_radius) {
        return Ok(a);
    }
    if matches!(first, Waypoint::Object(_)) {
        state.locked_object_waypoint = None;
        state.phase = Phase::Explore;
    }
    for wp in &frontiers.waypoints {
        if matches!(first, Waypoint::Frontier(c) if c == wp.cell) {
            continue;
        }
        if let Some(a) = motion_action(belief, state.pose, Waypoint::Frontier(wp.cell), stop_radius) {
            state.goal_waypoint = Some(wp.cell);
            return Ok(a);
        }
    }
    Err(ExplorationExhausted)
}

/// Applies `action` against ground truth. Forward into an obstacle is a
/// no-op.
pub fn apply_action(scene: &Scene, pose: AgentPose, action: Action) -> AgentPose {
    match action {
        Action::TurnLeft45 => AgentPose::new(pose.cell, pose.heading.left()),
        Action::TurnRight45 => AgentPose::new(pose.cell, pose.heading.right()),
        Action::Forward => {
            let ahead = pose.facing_cell();
            if scene.is_free(ahead) {
                AgentPose::new(ahead, pose.heading)
            } else {
                pose
            }
        }
        Action::Stop => pose,
    }
}

struct Streams {
    sensor: SimRng,
    scorer: SimRng,
    detector: SimRng,
    segmenter: SimRng,
    verifier: SimRng,
}

impl Streams {
    fn new(seed: u64) -> Self {
        Streams {
            sensor: rng::stream(seed, Stream::Sensor),
            scorer: rng::stream(seed, Stream::Scorer),
            detector: rng::stream(seed, Stream::Detector),
            segmenter: rng::stream(seed, Stream::Segmenter),
            verifier: rng::stream(seed, Stream::Verifier),
        }
    }
}

/// Owns all per-episode state and advances it one step at a time.
pub struct EpisodeRunner<'a> {
    scene: &'a Scene,
    episode: &'a Episode,
    pipeline: &'a PipelineConfig,
    cfg: RunConfig,
    field: SemanticField,
    /// Ground-truth distance to the goal's success region, for the reward.
    goal_distance: Grid<Option<u32>>,
    success_cells: BTreeSet<Cell>,
    streams: Streams,
    pub state: AgentState,
    pub belief: BeliefMap,
    pub vmap: ValueMap,
    pub frontiers: FrontierSet,
    pub steps: u32,
    pub calls: ModuleCalls,
    pub path: Vec<Cell>,
    pub path_length: u32,
    pub reward: f64,
    pub exhausted: bool,
}

impl<'a> EpisodeRunner<'a> {
    pub fn new(
        scene: &'a Scene,
        episode: &'a Episode,
        pipeline: &'a PipelineConfig,
        cfg: &RunConfig,
        seed: u64,
    ) -> Result<Self> {
        cfg.sensor.validate()?;
        let field = compute_semantic_field(scene, &episode.goal_category, cfg.lambda, cfg.success_radius)?;
        let success_cells = scene.success_cells(&episode.goal_category, cfg.success_radius)?;
        let targets: Vec<Cell> = success_cells.iter().copied().collect();
        Ok(EpisodeRunner {
            scene,
            episode,
            pipeline,
            cfg: *cfg,
            field,
            goal_distance: distance_field(scene, &targets),
            success_cells,
            streams: Streams::new(seed),
            state: AgentState::new(episode.start),
            belief: BeliefMap::unknown(scene.width(), scene.height()),
            vmap: ValueMap::new(scene.width(), scene.height()),
            frontiers: FrontierSet::default(),
            steps: 0,
            calls: ModuleCalls::default(),
            path: vec![episode.start.cell],
            path_length: 0,
            reward: 0.0,
            exhausted: false,
        })
    }

    pub fn is_done(&self) -> bool {
        self.state.phase == Phase::Done || self.exhausted || self.steps >= self.episode.max_steps
    }

    pub fn at_success(&self) -> bool {
        self.success_cells.contains(&self.state.pose.cell)
    }

    fn meters_to_goal(&self, c: Cell) -> Option<f64> {
        self.goal_distance[c].map(|d| d as f64 * self.scene.scale)
    }

    /// One full pipeline pass and one action. On exhaustion the step still
    /// counts (its module calls were made) and the episode ends.
    pub fn step(&mut self) -> Result<(Action, StepTrace), ExplorationExhausted> {
        let pose = self.state.pose;
        let mut calls = ModuleCalls::default();

        let obs = sense(self.scene, pose, &self.cfg.sensor, &mut self.streams.sensor);
        self.belief.integrate_observation(&obs);

        let score = score_semantic(self.pipeline.scorer(), &obs, &self.field, &mut self.streams.scorer);
        calls.scorer += 1;
        self.vmap.update(&obs, score, pose, &self.cfg.sensor);
        self.frontiers = cluster_frontiers(&self.belief.extract_frontiers(), &self.vmap);

        let detection = detect(
            self.pipeline.detector(),
            &obs,
            &self.episode.goal_category,
            &mut self.streams.detector,
        );
        calls.detector += 1;
        let mut verified_waypoint = None;
        let mut verified = false;
        if let Some(det) = &detection {
            let point = segment_nearest_point(self.pipeline.segmenter(), det, &obs, pose, &mut self.streams.segmenter);
            calls.segmenter += 1;
            verified = match self.pipeline.verifier() {
                Some(v) => {
                    calls.verifier += 1;
                    verify(v, det, &mut self.streams.verifier)
                }
                None => true,
            };
            if verified {
                verified_waypoint = Some(point);
            }
        }

        let step_index = self.steps;
        self.steps += 1;
        self.calls += calls;

        let action = if self.state.phase == Phase::Spin {
            // keep the nearest verified detection seen during the spin
            if let Some(w) = verified_waypoint {
                let here = self.state.pose.cell;
                let closer = self
                    .state
                    .locked_object_waypoint
                    .is_none_or(|old| (w.dist2(here), w.yx()) < (old.dist2(here), old.yx()));
                if closer {
                    self.state.locked_object_waypoint = Some(w);
                }
            }
            self.state.spin_remaining -= 1;
            if self.state.spin_remaining == 0 {
                self.state.phase = if self.state.locked_object_waypoint.is_some() {
                    Phase::GoToObject
                } else {
                    Phase::Explore
                };
            }
            Action::TurnLeft45
        } else {
            match decide(
                &mut self.state,
                &self.belief,
                &self.frontiers,
                verified_waypoint,
                self.cfg.stop_radius_for(self.pipeline),
            ) {
                Ok(a) => a,
                Err(e) => {
                    self.exhausted = true;
                    self.reward -= 0.01;
                    return Err(e);
                }
            }
        };

        let before = self.meters_to_goal(pose.cell);
        let next = apply_action(self.scene, pose, action);
        if next.cell != pose.cell {
            self.path.push(next.cell);
            self.path_length += 1;
        }
        self.state.pose = next;
        if action == Action::Stop {
            self.state.phase = Phase::Done;
        }
        let progress = match (before, self.meters_to_goal(next.cell)) {
            (Some(a), Some(b)) => a - b,
            _ => 0.0,
        };
        self.reward += progress - 0.01;

        Ok((
            action,
            StepTrace {
                step_index,
                action,
                module_calls: calls,
                detection_event: detection.is_some(),
                verified: detection.is_some() && verified,
            },
        ))
    }

    pub fn finish(mut self) -> EpisodeResult {
        let stopped = self.state.phase == Phase::Done;
        let success = stopped && self.at_success();
        if success {
            self.reward += 2.5;
        }
        let modeled_time_ms = self.calls.modeled_ms(self.pipeline) + self.steps as f64 * self.cfg.step_overhead_ms;
        EpisodeResult {
            success,
            path_length: self.path_length,
            shortest_path_len: self.episode.shortest_path_len,
            steps: self.steps,
            module_calls: self.calls,
            modeled_time_ms,
            reward: self.reward,
            path: self.path,
        }
    }
}

/// Runs one episode to Stop, exhaustion or the step budget.
pub fn run_episode(
    scene: &Scene,
    episode: &Episode,
    pipeline: &PipelineConfig,
    cfg: &RunConfig,
    seed: u64,
) -> Result<EpisodeResult> {
    run_episode_observed(scene, episode, pipeline, cfg, seed, |_, _| {})
}

/// Like [`run_episode`], calling `observe` after every completed step.
pub fn run_episode_observed(
    scene: &Scene,
    episode: &Episode,
    pipeline: &PipelineConfig,
    cfg: &RunConfig,
    seed: u64,
    mut observe: impl FnMut(&EpisodeRunner<'_>, &StepTrace),
) -> Result<EpisodeResult> {
    let mut runner = EpisodeRunner::new(scene, episode, pipeline, cfg, seed)?;
    while !runner.is_done() {
        match runner.step() {
            Ok((_, trace)) => observe(&runner, &trace),
            Err(ExplorationExhausted) => break,
        }
    }
    Ok(runner.finish())
}
