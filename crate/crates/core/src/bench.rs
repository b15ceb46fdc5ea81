//! Batch experiments over pipeline configurations.
//!
//! Every configuration runs the same (episode, seed) pairs, so per-episode
//! differences between two configurations isolate the configuration effect.
//! Those differences feed a seeded paired bootstrap.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{self, aggregate, AggregateReport, EpisodeResult, PipelineSummary};
use crate::perception::{builtin_profiles, ModuleProfile, PipelineConfig, Registry, DEFAULT_VRAM_BUDGET_MIB};
use crate::policy::{run_episode, RunConfig};
use crate::rng::{self, Stream};
use crate::world::{load_scenes_for, EpisodeSet, SceneSet};

pub const DEFAULT_RESAMPLES: usize = 10_000;

/// Names accepted wherever a preset configuration is expected.
pub const PRESETS: [&str; 6] = [
    "baseline",
    "baseline-vqa",
    "final",
    "final-vqa",
    "clip-e6e-vqa",
    "clip-yolov7-vqa",
];

/// Resolves a preset configuration against `registry`.
pub fn preset(registry: &Registry, name: &str) -> Result<PipelineConfig> {
    let (scorer, detector, verifier) = match name {
        "baseline" => ("BLIP-2", "YOLOv7-E6E", None),
        "baseline-vqa" => ("BLIP-2", "YOLOv7-E6E", Some("nanoLLaVA")),
        "final" => ("CLIP-ViT-B32", "YOLOv7-W6", None),
        "final-vqa" => ("CLIP-ViT-B32", "YOLOv7-W6", Some("nanoLLaVA")),
        "clip-e6e-vqa" => ("CLIP-ViT-B32", "YOLOv7-E6E", Some("nanoLLaVA")),
        "clip-yolov7-vqa" => ("CLIP-ViT-B32", "YOLOv7", Some("nanoLLaVA")),
        other => return Err(Error::UnknownConfig(other.to_owned())),
    };
    PipelineConfig::new(
        registry.get(scorer)?.clone(),
        registry.get(detector)?.clone(),
        registry.get("MobileSAM")?.clone(),
        verifier.map(|v| registry.get(v).cloned()).transpose()?,
        DEFAULT_VRAM_BUDGET_MIB,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileRef {
    Name(String),
    Inline(ModuleProfile),
}

impl ProfileRef {
    fn resolve(&self, registry: &Registry) -> Result<ModuleProfile> {
        match self {
            ProfileRef::Name(n) => registry.get(n).cloned(),
            ProfileRef::Inline(p) => Ok(p.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineConfig {
    pub name: String,
    pub scorer: ProfileRef,
    pub detector: ProfileRef,
    pub segmenter: ProfileRef,
    #[serde(default)]
    pub verifier: Option<ProfileRef>,
    #[serde(default)]
    pub vram_budget_mib: Option<u64>,
}

/// Either a preset name or an inline composition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConfigEntry {
    Preset(String),
    Inline(InlineConfig),
}

impl ConfigEntry {
    pub fn name(&self) -> &str {
        match self {
            ConfigEntry::Preset(n) => n,
            ConfigEntry::Inline(c) => &c.name,
        }
    }

    pub fn resolve(&self, registry: &Registry) -> Result<PipelineConfig> {
        match self {
            ConfigEntry::Preset(n) => preset(registry, n),
            ConfigEntry::Inline(c) => PipelineConfig::new(
                c.scorer.resolve(registry)?,
                c.detector.resolve(registry)?,
                c.segmenter.resolve(registry)?,
                c.verifier.as_ref().map(|v| v.resolve(registry)).transpose()?,
                c.vram_budget_mib.unwrap_or(DEFAULT_VRAM_BUDGET_MIB),
            ),
        }
    }
}

fn default_resamples() -> usize {
    DEFAULT_RESAMPLES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSpec {
    pub episode_set_path: PathBuf,
    pub configs: Vec<ConfigEntry>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// Directory holding `<scene_id>.scene`; defaults to the episode set's
    /// directory.
    #[serde(default)]
    pub scene_dir: Option<PathBuf>,
    /// Profile overrides, merged over the built-ins by name.
    #[serde(default)]
    pub profiles_path: Option<PathBuf>,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default = "default_resamples")]
    pub n_resamples: usize,
    #[serde(default)]
    pub bootstrap_seed: u64,
}

impl BenchmarkSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: BenchmarkSpec =
            serde_json::from_str(&text).map_err(|e| Error::parse("benchmark spec", e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.configs.is_empty() {
            return Err(Error::parse("benchmark spec", "no configs"));
        }
        if self.seeds.is_empty() {
            return Err(Error::parse("benchmark spec", "no seeds"));
        }
        let mut names = BTreeSet::new();
        for c in &self.configs {
            if !names.insert(c.name()) {
                return Err(Error::parse("benchmark spec", format!("duplicate config `{}`", c.name())));
            }
        }
        Ok(())
    }

    pub fn registry(&self) -> Result<Registry> {
        let mut reg = builtin_profiles();
        if let Some(p) = &self.profiles_path {
            reg.merge_file(p)?;
        }
        Ok(reg)
    }
}

/// One executed (config, episode, seed) triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub config: String,
    pub episode_index: usize,
    pub seed: u64,
    pub scene_id: String,
    pub goal_category: String,
    #[serde(flatten)]
    pub result: EpisodeResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigRun {
    pub name: String,
    pub pipeline: PipelineConfig,
    pub report: AggregateReport,
    pub records: Vec<EpisodeRecord>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchmarkOutcome {
    /// Sorted by config name.
    pub runs: Vec<ConfigRun>,
    /// Configurations that failed their VRAM budget, with the reason.
    pub skipped: Vec<(String, String)>,
}

impl BenchmarkOutcome {
    pub fn reports(&self) -> Vec<AggregateReport> {
        self.runs.iter().map(|r| r.report.clone()).collect()
    }

    pub fn run(&self, name: &str) -> Result<&ConfigRun> {
        self.runs
            .iter()
            .find(|r| r.name == name)
            .ok_or_else(|| Error::UnknownConfig(name.to_owned()))
    }
}

/// Runs every episode of `set` under `seeds` for one pipeline. Episodes run
/// in parallel; the record order is (seed, episode) regardless.
pub fn run_config(
    name: &str,
    pipeline: &PipelineConfig,
    scenes: &SceneSet,
    set: &EpisodeSet,
    seeds: &[u64],
    cfg: &RunConfig,
) -> Result<ConfigRun> {
    let jobs: Vec<(usize, u64)> = seeds
        .iter()
        .flat_map(|&s| (0..set.episodes.len()).map(move |i| (i, s)))
        .collect();
    let records = jobs
        .par_iter()
        .map(|&(i, seed)| {
            let ep = &set.episodes[i];
            let scene = scenes
                .get(&ep.scene_id)
                .ok_or_else(|| Error::InvalidParams(format!("scene `{}` not loaded", ep.scene_id)))?;
            let result = run_episode(scene, ep, pipeline, cfg, rng::mix(seed, i as u64))?;
            Ok(EpisodeRecord {
                config: name.to_owned(),
                episode_index: i,
                seed,
                scene_id: ep.scene_id.clone(),
                goal_category: ep.goal_category.clone(),
                result,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let results: Vec<EpisodeResult> = records.iter().map(|r| r.result.clone()).collect();
    let report = aggregate(&results, pipeline, name)?;
    Ok(ConfigRun {
        name: name.to_owned(),
        pipeline: pipeline.clone(),
        report,
        records,
    })
}

/// In-memory benchmark over already-resolved configurations.
pub fn run_pipelines(
    configs: &[(String, PipelineConfig)],
    scenes: &SceneSet,
    set: &EpisodeSet,
    seeds: &[u64],
    cfg: &RunConfig,
) -> Result<BenchmarkOutcome> {
    let mut runs = configs
        .iter()
        .map(|(name, p)| run_config(name, p, scenes, set, seeds, cfg))
        .collect::<Result<Vec<_>>>()?;
    runs.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(BenchmarkOutcome {
        runs,
        skipped: Vec::new(),
    })
}

/// Loads the spec's inputs, runs every configuration that fits its budget
/// and writes all outputs to `output_dir`.
pub fn run_benchmark(spec: &BenchmarkSpec) -> Result<BenchmarkOutcome> {
    spec.validate()?;
    let registry = spec.registry()?;
    let set = EpisodeSet::load(&spec.episode_set_path)?;
    let scene_dir = spec.scene_dir.clone().unwrap_or_else(|| {
        spec.episode_set_path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default()
    });
    let scenes = load_scenes_for(&set, scene_dir)?;

    let mut resolved = Vec::new();
    let mut skipped = Vec::new();
    for entry in &spec.configs {
        match entry.resolve(&registry) {
            Ok(p) => resolved.push((entry.name().to_owned(), p)),
            Err(e @ Error::BudgetExceeded { .. }) => skipped.push((entry.name().to_owned(), e.to_string())),
            Err(e) => return Err(e),
        }
    }
    let mut outcome = if resolved.is_empty() || set.episodes.is_empty() {
        BenchmarkOutcome::default()
    } else {
        run_pipelines(&resolved, &scenes, &set, &spec.seeds, &spec.run)?
    };
    outcome.skipped = skipped;
    write_outputs(&outcome, spec, &spec.output_dir)?;
    Ok(outcome)
}

pub fn write_outputs(outcome: &BenchmarkOutcome, spec: &BenchmarkSpec, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, contents: &[u8]| {
        let path = dir.join(name);
        std::fs::write(&path, contents).map_err(|e| Error::io(path, e))
    };
    let reports = outcome.reports();
    write("metrics.csv", metrics::to_csv(&reports)?.as_bytes())?;
    write("metrics.json", metrics::to_json(&reports)?.as_bytes())?;

    let mut lines = String::new();
    for run in &outcome.runs {
        for rec in &run.records {
            lines.push_str(&serde_json::to_string(rec)?);
            lines.push('\n');
        }
    }
    write("episodes.jsonl", lines.as_bytes())?;

    let summaries: BTreeMap<&str, PipelineSummary> = outcome
        .runs
        .iter()
        .map(|r| (r.name.as_str(), PipelineSummary::from(&r.pipeline)))
        .collect();
    let mut pipelines = serde_json::to_string_pretty(&summaries)?;
    pipelines.push('\n');
    write("pipelines.json", pipelines.as_bytes())?;

    write(
        "comparison.txt",
        comparison_text(outcome, spec.n_resamples, spec.bootstrap_seed)?.as_bytes(),
    )
}

fn comparison_text(outcome: &BenchmarkOutcome, n_resamples: usize, seed: u64) -> Result<String> {
    let mut out = String::new();
    for (name, reason) in &outcome.skipped {
        let _ = writeln!(out, "skipped {name}: {reason}");
    }
    if outcome.runs.len() < 2 {
        let _ = writeln!(out, "no pairs to compare");
        return Ok(out);
    }
    for (i, a) in outcome.runs.iter().enumerate() {
        for b in &outcome.runs[i + 1..] {
            let c = compare_runs(a, b, n_resamples, seed)?;
            let _ = writeln!(out, "{}", c.summary_line());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub config_a: String,
    pub config_b: String,
    /// All deltas are `b - a`.
    pub delta_sr: f64,
    pub delta_spl: f64,
    pub delta_avg_steps: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_resamples: usize,
}

impl ComparisonResult {
    pub fn ci_excludes_zero(&self) -> bool {
        self.ci_low > 0.0 || self.ci_high < 0.0
    }

    pub fn summary_line(&self) -> String {
        format!(
            "{} -> {}: delta_sr={:+.2} delta_spl={:+.2} delta_avg_steps={:+.3} ci95=[{:.3}, {:.3}] resamples={}",
            self.config_a,
            self.config_b,
            self.delta_sr,
            self.delta_spl,
            self.delta_avg_steps,
            self.ci_low,
            self.ci_high,
            self.n_resamples
        )
    }
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Percentile bootstrap interval for the mean of `diffs`. The interval is
/// widened if needed so it always contains the sample mean.
pub fn paired_bootstrap_ci(diffs: &[f64], n_resamples: usize, seed: u64, level: f64) -> Result<(f64, f64)> {
    if diffs.is_empty() {
        return Err(Error::EmptyInput);
    }
    if n_resamples == 0 {
        return Err(Error::InvalidParams("n_resamples must be at least 1".into()));
    }
    let n = diffs.len();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let mut rng = rng::stream(seed, Stream::Bootstrap);
    let mut means: Vec<f64> = (0..n_resamples)
        .map(|_| (0..n).map(|_| diffs[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    let lo = quantile(&means, alpha).min(mean);
    let hi = quantile(&means, 1.0 - alpha).max(mean);
    Ok((lo, hi))
}

pub fn compare_records(
    name_a: &str,
    a: &[EpisodeRecord],
    name_b: &str,
    b: &[EpisodeRecord],
    n_resamples: usize,
    seed: u64,
) -> Result<ComparisonResult> {
    if a.len() != b.len() {
        return Err(Error::MismatchedEpisodes(format!(
            "{name_a} has {} episodes, {name_b} has {}",
            a.len(),
            b.len()
        )));
    }
    for (x, y) in a.iter().zip(b) {
        if (x.episode_index, x.seed, &x.scene_id, &x.goal_category)
            != (y.episode_index, y.seed, &y.scene_id, &y.goal_category)
        {
            return Err(Error::MismatchedEpisodes(format!(
                "episode {} (seed {}) vs episode {} (seed {})",
                x.episode_index, x.seed, y.episode_index, y.seed
            )));
        }
    }
    let ra: Vec<EpisodeResult> = a.iter().map(|r| r.result.clone()).collect();
    let rb: Vec<EpisodeResult> = b.iter().map(|r| r.result.clone()).collect();
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| y.result.steps as f64 - x.result.steps as f64)
        .collect();
    let delta_avg_steps = diffs.iter().sum::<f64>() / diffs.len().max(1) as f64;
    let (ci_low, ci_high) = paired_bootstrap_ci(&diffs, n_resamples, seed, 0.95)?;
    Ok(ComparisonResult {
        config_a: name_a.to_owned(),
        config_b: name_b.to_owned(),
        delta_sr: metrics::success_rate(&rb)? - metrics::success_rate(&ra)?,
        delta_spl: metrics::spl(&rb)? - metrics::spl(&ra)?,
        delta_avg_steps,
        ci_low,
        ci_high,
        n_resamples,
    })
}

pub fn compare_runs(a: &ConfigRun, b: &ConfigRun, n_resamples: usize, seed: u64) -> Result<ComparisonResult> {
    compare_records(&a.name, &a.records, &b.name, &b.records, n_resamples, seed)
}

/// Paired comparison of two configurations of a finished benchmark.
pub fn compare(outcome: &BenchmarkOutcome, a: &str, b: &str, n_resamples: usize, seed: u64) -> Result<ComparisonResult> {
    compare_runs(outcome.run(a)?, outcome.run(b)?, n_resamples, seed)
}

/// Modeled component total, seconds: steps × episodes × latency.
pub fn accounting_check(avg_steps: f64, episodes: f64, latency_ms: f64) -> f64 {
    avg_steps * episodes * latency_ms / 1000.0
}

pub fn relative_error(value: f64, reference: f64) -> f64 {
    (value - reference).abs() / reference.abs()
}
