//! Behavioral stand-ins for the neural modules.
//!
//! Each module is described by a [`ModuleProfile`]: its measured cost
//! (parameters, VRAM, per-call latency) and a small set of accuracy knobs
//! that drive a stochastic model of its output. The knobs of the built-in
//! profiles are modeling inputs, not measurements; they are flagged with
//! `synthetic_accuracy`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cell, Grid};
use crate::sensing::{AgentPose, Observation};
use crate::world::{distance_field, CellTruth, Scene};

pub const DEFAULT_VRAM_BUDGET_MIB: u64 = 12288;
pub const DEFAULT_LAMBDA: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModuleKind {
    Scorer,
    Detector,
    Segmenter,
    Verifier,
}

impl ModuleKind {
    pub const ALL: [ModuleKind; 4] = [
        ModuleKind::Scorer,
        ModuleKind::Detector,
        ModuleKind::Segmenter,
        ModuleKind::Verifier,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModuleKind::Scorer => "Scorer",
            ModuleKind::Detector => "Detector",
            ModuleKind::Segmenter => "Segmenter",
            ModuleKind::Verifier => "Verifier",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScorerAccuracy {
    pub noise_sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorAccuracy {
    pub p_tp: f64,
    pub p_fp: f64,
    /// Cells.
    pub detect_range: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmenterAccuracy {
    pub point_error_cells: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifierAccuracy {
    pub p_accept_true: f64,
    pub p_reject_false: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Accuracy {
    Scorer(ScorerAccuracy),
    Detector(DetectorAccuracy),
    Segmenter(SegmenterAccuracy),
    Verifier(VerifierAccuracy),
}

impl Accuracy {
    pub fn kind(&self) -> ModuleKind {
        match self {
            Accuracy::Scorer(_) => ModuleKind::Scorer,
            Accuracy::Detector(_) => ModuleKind::Detector,
            Accuracy::Segmenter(_) => ModuleKind::Segmenter,
            Accuracy::Verifier(_) => ModuleKind::Verifier,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleProfile {
    pub name: String,
    pub kind: ModuleKind,
    /// `None` when unknown.
    pub params_millions: Option<f64>,
    /// `None` when unknown; counts as 0 in VRAM sums.
    pub vram_mib: Option<u64>,
    pub latency_ms: f64,
    pub accuracy: Accuracy,
    #[serde(default)]
    pub synthetic_accuracy: bool,
}

impl ModuleProfile {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(format!("profile `{}`: {msg}", self.name)));
        if self.accuracy.kind() != self.kind {
            return Err(Error::KindMismatch {
                name: self.name.clone(),
                expected: self.kind.as_str(),
                actual: self.accuracy.kind().as_str(),
            });
        }
        if !(self.latency_ms >= 0.0 && self.latency_ms.is_finite()) {
            return bad(format!("latency_ms {} must be finite and >= 0", self.latency_ms));
        }
        if let Some(p) = self.params_millions {
            if !(p >= 0.0) {
                return bad(format!("params_millions {p} must be >= 0"));
            }
        }
        let unit = |p: f64| (0.0..=1.0).contains(&p);
        let ok = match self.accuracy {
            Accuracy::Scorer(a) => unit(a.noise_sigma),
            Accuracy::Detector(a) => unit(a.p_tp) && unit(a.p_fp) && a.detect_range >= 0.0,
            Accuracy::Segmenter(_) => true,
            Accuracy::Verifier(a) => unit(a.p_accept_true) && unit(a.p_reject_false),
        };
        if !ok {
            return bad("accuracy knob out of range".into());
        }
        Ok(())
    }

    pub fn vram(&self) -> u64 {
        self.vram_mib.unwrap_or(0)
    }

    fn expect_kind(&self, kind: ModuleKind) {
        assert_eq!(self.kind, kind, "profile `{}` used as {}", self.name, kind.as_str());
    }

    pub fn scorer(&self) -> ScorerAccuracy {
        match self.accuracy {
            Accuracy::Scorer(a) => a,
            _ => panic!("profile `{}` is not a scorer", self.name),
        }
    }

    pub fn detector(&self) -> DetectorAccuracy {
        match self.accuracy {
            Accuracy::Detector(a) => a,
            _ => panic!("profile `{}` is not a detector", self.name),
        }
    }

    pub fn segmenter(&self) -> SegmenterAccuracy {
        match self.accuracy {
            Accuracy::Segmenter(a) => a,
            _ => panic!("profile `{}` is not a segmenter", self.name),
        }
    }

    pub fn verifier(&self) -> VerifierAccuracy {
        match self.accuracy {
            Accuracy::Verifier(a) => a,
            _ => panic!("profile `{}` is not a verifier", self.name),
        }
    }

    /// Returns a copy with the scorer noise replaced.
    pub fn with_noise(mut self, noise_sigma: f64) -> Self {
        self.accuracy = Accuracy::Scorer(ScorerAccuracy { noise_sigma });
        self
    }

    /// Returns a copy with detector knobs replaced.
    pub fn with_detector(mut self, p_tp: f64, p_fp: f64) -> Self {
        let range = self.detector().detect_range;
        self.accuracy = Accuracy::Detector(DetectorAccuracy {
            p_tp,
            p_fp,
            detect_range: range,
        });
        self
    }
}

/// Sum of VRAM over any set of profiles.
pub fn vram_sum<'a>(profiles: impl IntoIterator<Item = &'a ModuleProfile>) -> u64 {
    profiles.into_iter().map(ModuleProfile::vram).sum()
}

/// A scorer, detector and segmenter plus an optional verifier that together
/// fit within a VRAM budget. The budget is checked at construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    scorer: ModuleProfile,
    detector: ModuleProfile,
    segmenter: ModuleProfile,
    verifier: Option<ModuleProfile>,
    vram_budget_mib: u64,
}

impl PipelineConfig {
    pub fn new(
        scorer: ModuleProfile,
        detector: ModuleProfile,
        segmenter: ModuleProfile,
        verifier: Option<ModuleProfile>,
        vram_budget_mib: u64,
    ) -> Result<Self> {
        let slots = [
            (Some(&scorer), ModuleKind::Scorer),
            (Some(&detector), ModuleKind::Detector),
            (Some(&segmenter), ModuleKind::Segmenter),
            (verifier.as_ref(), ModuleKind::Verifier),
        ];
        for (profile, kind) in slots {
            let Some(p) = profile else { continue };
            p.validate()?;
            if p.kind != kind {
                return Err(Error::KindMismatch {
                    name: p.name.clone(),
                    expected: kind.as_str(),
                    actual: p.kind.as_str(),
                });
            }
        }
        let total = vram_sum([&scorer, &detector, &segmenter].into_iter().chain(verifier.as_ref()));
        if total > vram_budget_mib {
            return Err(Error::BudgetExceeded {
                total_mib: total,
                budget_mib: vram_budget_mib,
            });
        }
        Ok(PipelineConfig {
            scorer,
            detector,
            segmenter,
            verifier,
            vram_budget_mib,
        })
    }

    pub fn scorer(&self) -> &ModuleProfile {
        &self.scorer
    }

    pub fn detector(&self) -> &ModuleProfile {
        &self.detector
    }

    pub fn segmenter(&self) -> &ModuleProfile {
        &self.segmenter
    }

    pub fn verifier(&self) -> Option<&ModuleProfile> {
        self.verifier.as_ref()
    }

    pub fn vram_budget_mib(&self) -> u64 {
        self.vram_budget_mib
    }

    pub fn profile(&self, kind: ModuleKind) -> Option<&ModuleProfile> {
        match kind {
            ModuleKind::Scorer => Some(&self.scorer),
            ModuleKind::Detector => Some(&self.detector),
            ModuleKind::Segmenter => Some(&self.segmenter),
            ModuleKind::Verifier => self.verifier.as_ref(),
        }
    }

    pub fn latency_ms(&self, kind: ModuleKind) -> f64 {
        self.profile(kind).map_or(0.0, |p| p.latency_ms)
    }

    pub fn modules(&self) -> impl Iterator<Item = &ModuleProfile> {
        [&self.scorer, &self.detector, &self.segmenter]
            .into_iter()
            .chain(self.verifier.as_ref())
    }
}

/// Total VRAM of a pipeline, MiB.
pub fn vram_total(cfg: &PipelineConfig) -> u64 {
    vram_sum(cfg.modules())
}

/// Latent semantic relevance of each cell to the goal category:
/// `exp(-d / lambda)` with `d` the geodesic distance to the goal's success
/// region, and 0 on cells that cannot reach it.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticField {
    pub values: Grid<f64>,
    pub lambda: f64,
}

impl SemanticField {
    pub fn value(&self, c: Cell) -> f64 {
        self.values.get(c).copied().unwrap_or(0.0)
    }
}

pub fn compute_semantic_field(scene: &Scene, goal: &str, lambda: f64, success_radius: u32) -> Result<SemanticField> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParams(format!("lambda {lambda} must be positive")));
    }
    let targets: Vec<Cell> = scene.success_cells(goal, success_radius)?.into_iter().collect();
    let dist = distance_field(scene, &targets);
    let values = Grid::from_vec(
        scene.width(),
        scene.height(),
        dist.as_slice()
            .iter()
            .map(|d| d.map_or(0.0, |d| (-(d as f64) / lambda).exp()))
            .collect(),
    );
    Ok(SemanticField { values, lambda })
}

/// Noisy maximum of the field over visible free cells, clamped to `[0, 1]`.
/// Always draws exactly one standard normal from `rng`.
pub fn score_semantic<R: Rng + ?Sized>(
    profile: &ModuleProfile,
    obs: &Observation,
    field: &SemanticField,
    rng: &mut R,
) -> f64 {
    profile.expect_kind(ModuleKind::Scorer);
    let sigma = profile.scorer().noise_sigma;
    let z: f64 = rng.sample(StandardNormal);
    let best = obs.visible_free().map(|c| field.value(c)).reduce(f64::max);
    match best {
        Some(m) => (m + sigma * z).clamp(0.0, 1.0),
        None => 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    /// `None` for a false positive.
    pub object_id: Option<u32>,
    pub category: String,
    pub observed_cells: BTreeSet<Cell>,
    /// Ground truth; the policy never looks at this.
    pub is_true_positive: bool,
}

/// Goal detection with a per-call true-positive rate. When no goal instance
/// is in range, each other visible object (in id order) may be mistaken for
/// the goal with probability `p_fp`.
pub fn detect<R: Rng + ?Sized>(
    profile: &ModuleProfile,
    obs: &Observation,
    goal: &str,
    rng: &mut R,
) -> Option<DetectionResult> {
    profile.expect_kind(ModuleKind::Detector);
    let acc = profile.detector();
    let in_range = |d: f64| d <= acc.detect_range;

    let goal_hit = obs
        .object_hits
        .iter()
        .filter(|h| h.category == goal && in_range(h.nearest_distance))
        .min_by(|a, b| {
            a.nearest_distance
                .total_cmp(&b.nearest_distance)
                .then(a.object_id.cmp(&b.object_id))
        });
    if let Some(hit) = goal_hit {
        let u: f64 = rng.random();
        return (u < acc.p_tp).then(|| DetectionResult {
            object_id: Some(hit.object_id),
            category: goal.to_owned(),
            observed_cells: hit.visible_cells.clone(),
            is_true_positive: true,
        });
    }

    let mut others: Vec<_> = obs
        .object_hits
        .iter()
        .filter(|h| h.category != goal && in_range(h.nearest_distance))
        .collect();
    others.sort_by_key(|h| h.object_id);
    for hit in others {
        let u: f64 = rng.random();
        if u < acc.p_fp {
            return Some(DetectionResult {
                object_id: None,
                category: goal.to_owned(),
                observed_cells: hit.visible_cells.clone(),
                is_true_positive: false,
            });
        }
    }
    None
}

/// Nearest observed cell of the detection to the agent, displaced by up to
/// `point_error_cells` on each axis. A displaced point that is not a visible
/// free cell falls back to the exact nearest cell.
pub fn segment_nearest_point<R: Rng + ?Sized>(
    profile: &ModuleProfile,
    det: &DetectionResult,
    obs: &Observation,
    pose: AgentPose,
    rng: &mut R,
) -> Cell {
    profile.expect_kind(ModuleKind::Segmenter);
    let nearest = *det
        .observed_cells
        .iter()
        .min_by_key(|c| (c.dist2(pose.cell), c.yx()))
        .expect("detection has observed cells");
    let e = profile.segmenter().point_error_cells as i32;
    if e == 0 {
        return nearest;
    }
    let dx = rng.random_range(-e..=e);
    let dy = rng.random_range(-e..=e);
    let moved = Cell::new(nearest.x + dx, nearest.y + dy);
    match obs.visible.get(&moved) {
        Some(CellTruth::Free) => moved,
        _ => nearest,
    }
}

/// Confusion-matrix gate over a detection.
pub fn verify<R: Rng + ?Sized>(profile: &ModuleProfile, det: &DetectionResult, rng: &mut R) -> bool {
    profile.expect_kind(ModuleKind::Verifier);
    let acc = profile.verifier();
    let u: f64 = rng.random();
    if det.is_true_positive {
        u < acc.p_accept_true
    } else {
        u >= acc.p_reject_false
    }
}

/// Named module profiles.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Registry {
    profiles: BTreeMap<String, ModuleProfile>,
}

impl Registry {
    pub fn get(&self, name: &str) -> Result<&ModuleProfile> {
        self.profiles
            .get(name)
            .ok_or_else(|| Error::ProfileNotFound(name.to_owned()))
    }

    pub fn insert(&mut self, profile: ModuleProfile) -> Result<()> {
        profile.validate()?;
        self.profiles.insert(profile.name.clone(), profile);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = &ModuleProfile> {
        self.profiles.values()
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    /// Overrides (or adds) profiles from a JSON array of profile objects.
    pub fn merge_json(&mut self, text: &str) -> Result<()> {
        let list: Vec<ModuleProfile> = serde_json::from_str(text)?;
        list.into_iter().try_for_each(|p| self.insert(p))
    }

    pub fn merge_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.merge_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        let list: Vec<&ModuleProfile> = self.profiles.values().collect();
        Ok(serde_json::to_string_pretty(&list)?)
    }
}

/// Costs from the published measurements; accuracy knobs are synthetic.
/// MobileSAM and nanoLLaVA per-call latencies are knobs as well.
pub fn builtin_profiles() -> Registry {
    fn p(name: &str, kind: ModuleKind, params: Option<f64>, vram: Option<u64>, latency: f64, accuracy: Accuracy) -> ModuleProfile {
        ModuleProfile {
            name: name.to_owned(),
            kind,
            params_millions: params,
            vram_mib: vram,
            latency_ms: latency,
            accuracy,
            synthetic_accuracy: true,
        }
    }
    let scorer = |noise_sigma| Accuracy::Scorer(ScorerAccuracy { noise_sigma });
    let detector = |p_tp, p_fp| {
        Accuracy::Detector(DetectorAccuracy {
            p_tp,
            p_fp,
            detect_range: 10.0,
        })
    };
    use ModuleKind::*;
    let list = [
        p("BLIP-2", Scorer, Some(1400.0), Some(2976), 123.6, scorer(0.05)),
        p("CLIP-ViT-B32", Scorer, Some(151.3), Some(806), 75.0, scorer(0.10)),
        p("YOLOv7-E6E", Detector, Some(151.7), Some(3032), 206.2, detector(0.95, 0.002)),
        p("YOLOv7-W6", Detector, Some(70.4), Some(1482), 167.6, detector(0.85, 0.004)),
        p("YOLOv7", Detector, None, None, 168.2, detector(0.75, 0.006)),
        p(
            "MobileSAM",
            Segmenter,
            Some(9.8),
            Some(486),
            12.0,
            Accuracy::Segmenter(SegmenterAccuracy { point_error_cells: 1 }),
        ),
        p(
            "nanoLLaVA",
            Verifier,
            Some(1100.0),
            Some(6002),
            180.0,
            Accuracy::Verifier(VerifierAccuracy {
                p_accept_true: 0.95,
                p_reject_false: 0.9,
            }),
        ),
    ];
    let mut reg = Registry::default();
    for profile in list {
        reg.insert(profile).expect("built-in profiles are valid");
    }
    reg
}
