//! The `fronsim` command line.
//!
//! Exit codes: 0 on success, 1 on usage errors (bad flags, malformed specs or
//! config files, unknown names), 2 on runtime failures such as a pipeline
//! over its VRAM budget or a scene that cannot be generated.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::bench::{self, BenchmarkSpec, InlineConfig};
use crate::error::{Error, Result};
use crate::metrics::{self, aggregate, AggregateReport, PipelineSummary};
use crate::perception::{builtin_profiles, vram_total, PipelineConfig, Registry};
use crate::policy::{run_episode_observed, EpisodeRunner, RunConfig, StepTrace};
use crate::render::{render_maps, render_scene};
use crate::rng;
use crate::sensing::AgentPose;
use crate::world::{
    generate_scene, load_scene, load_scenes_for, make_episodes, save_scene, EpisodeParams, EpisodeSet, SceneParams,
    SceneSet,
};

pub const SEED_ENV: &str = "FRONSIM_SEED";

#[derive(Debug, Parser)]
#[command(name = "fronsim", version, about = "2D object-goal navigation simulator and benchmark harness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate scenes and an episode set.
    Gen(GenArgs),
    /// Run episodes sequentially with one pipeline.
    Run(RunArgs),
    /// Run a benchmark spec.
    Bench(BenchArgs),
    /// Render a scene, or the agent's maps after some steps.
    Render(RenderArgs),
    /// Format benchmark metrics.
    Report(ReportArgs),
}

#[derive(Debug, clap::Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 32)]
    pub width: usize,
    #[arg(long, default_value_t = 32)]
    pub height: usize,
    #[arg(long, default_value_t = 4)]
    pub rooms: usize,
    /// Fraction of free cells covered by objects.
    #[arg(long, default_value_t = 0.03)]
    pub objects: f64,
    /// Total episodes, split evenly across scenes.
    #[arg(long, default_value_t = 10)]
    pub episodes: usize,
    #[arg(long, default_value_t = 1)]
    pub scenes: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    /// A scene file, or a directory of scene files.
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub episodes: PathBuf,
    /// Preset name or a JSON config file.
    #[arg(long, default_value = "final")]
    pub config: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write per-step traces as JSON lines.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Snapshot the maps every N steps; 0 disables.
    #[arg(long, default_value_t = 0)]
    pub render_every: u32,
    #[arg(long, default_value = ".")]
    pub render_dir: PathBuf,
    /// Profile overrides merged over the built-ins.
    #[arg(long)]
    pub profiles: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub spec: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub scene: PathBuf,
    /// With --episodes, render the agent's maps instead of ground truth.
    #[arg(long)]
    pub episodes: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub episode_index: usize,
    #[arg(long, default_value_t = 0)]
    pub steps: u32,
    #[arg(long, default_value = "final")]
    pub config: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Table,
}

#[derive(Debug, clap::Args)]
pub struct ReportArgs {
    /// metrics.csv or metrics.json
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

/// Exit code for a failed command.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. }
        | Error::UnknownConfig(_)
        | Error::ProfileNotFound(_)
        | Error::KindMismatch { .. }
        | Error::InvalidParams(_)
        | Error::Json(_) => 1,
        _ => 2,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{rendered}")
            } else {
                write!(err, "{rendered}")
            };
            return code;
        }
    };
    let seed_override = match std::env::var(SEED_ENV) {
        Ok(v) => match v.trim().parse::<u64>() {
            Ok(s) => Some(s),
            Err(_) => {
                let _ = writeln!(err, "error: {SEED_ENV}={v:?} is not an unsigned integer");
                return 1;
            }
        },
        Err(_) => None,
    };
    match execute(cli.command, seed_override, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cmd: Command, seed_override: Option<u64>, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Gen(mut a) => {
            a.seed = seed_override.unwrap_or(a.seed);
            gen(&a, out)
        }
        Command::Run(mut a) => {
            a.seed = seed_override.unwrap_or(a.seed);
            run(&a, out, err)
        }
        Command::Bench(a) => bench_cmd(&a, out, err),
        Command::Render(mut a) => {
            a.seed = seed_override.unwrap_or(a.seed);
            render(&a)
        }
        Command::Report(a) => report(&a, out),
    }
}

fn stdout_io(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn gen(a: &GenArgs, out: &mut dyn Write) -> Result<i32> {
    if a.scenes == 0 {
        return Err(Error::InvalidParams("--scenes must be at least 1".into()));
    }
    let params = SceneParams {
        width: a.width,
        height: a.height,
        room_count: a.rooms,
        object_density: a.objects,
        ..SceneParams::default()
    };
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let mut sets = Vec::new();
    for k in 0..a.scenes {
        let scene_seed = a.seed.wrapping_add(k as u64);
        let scene = generate_scene(scene_seed, &params)?;
        let n = a.episodes / a.scenes + usize::from(k < a.episodes % a.scenes);
        let set = make_episodes(&scene, n, rng::mix(scene_seed, 0xE915), &EpisodeParams::default())?;
        save_scene(&scene, a.out.join(format!("{}.scene", scene.id)))?;
        writeln!(
            out,
            "scene {}: {} free cells, {} objects, {} episodes",
            scene.id,
            scene.free_count(),
            scene.objects.len(),
            set.episodes.len()
        )
        .map_err(stdout_io)?;
        sets.push(set);
    }
    let mut all = EpisodeSet::concat(sets);
    all.seed = a.seed;
    all.save(a.out.join("episodes.json"))?;
    Ok(0)
}

/// Resolves `--config`: a preset name, or a path to an inline config JSON.
pub fn resolve_config(registry: &Registry, config: &str) -> Result<(String, PipelineConfig)> {
    let path = Path::new(config);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let inline: InlineConfig =
            serde_json::from_str(&text).map_err(|e| Error::parse("pipeline config", e.to_string()))?;
        let entry = bench::ConfigEntry::Inline(inline);
        let pipeline = entry.resolve(registry)?;
        Ok((entry.name().to_owned(), pipeline))
    } else {
        Ok((config.to_owned(), bench::preset(registry, config)?))
    }
}

fn load_inputs(scene: &Path, episodes: &Path) -> Result<(SceneSet, EpisodeSet)> {
    let mut set = EpisodeSet::load(episodes)?;
    if scene.is_dir() {
        let scenes = load_scenes_for(&set, scene)?;
        return Ok((scenes, set));
    }
    let s = load_scene(scene)?;
    set.episodes.retain(|e| e.scene_id == s.id);
    let mut scenes = SceneSet::new();
    scenes.insert(s.id.clone(), s);
    Ok((scenes, set))
}

#[derive(serde::Serialize)]
struct TraceLine<'a> {
    episode: usize,
    #[serde(flatten)]
    trace: &'a StepTrace,
    pose: AgentPose,
}

fn run(a: &RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let mut registry = builtin_profiles();
    if let Some(p) = &a.profiles {
        registry.merge_file(p)?;
    }
    let (name, pipeline) = resolve_config(&registry, &a.config)?;
    let _ = writeln!(err, "config {name}: {} MiB", vram_total(&pipeline));
    let (scenes, set) = load_inputs(&a.scene, &a.episodes)?;
    let mut trace = match &a.trace {
        Some(p) => Some(BufWriter::new(File::create(p).map_err(|e| Error::io(p, e))?)),
        None => None,
    };
    if a.render_every > 0 {
        std::fs::create_dir_all(&a.render_dir).map_err(|e| Error::io(&a.render_dir, e))?;
    }
    let cfg = RunConfig::default();
    let mut results = Vec::new();
    for (i, ep) in set.episodes.iter().enumerate() {
        let scene = &scenes[&ep.scene_id];
        let mut io_error = None;
        let observe = |runner: &EpisodeRunner<'_>, t: &StepTrace| {
            if io_error.is_some() {
                return;
            }
            if let Some(w) = trace.as_mut() {
                let line = TraceLine {
                    episode: i,
                    trace: t,
                    pose: runner.state.pose,
                };
                let r = serde_json::to_writer(&mut *w, &line)
                    .map_err(Error::from)
                    .and_then(|_| writeln!(w).map_err(|e| Error::io(a.trace.as_ref().unwrap(), e)));
                if let Err(e) = r {
                    io_error = Some(e);
                    return;
                }
            }
            let n = t.step_index + 1;
            if a.render_every > 0 && n % a.render_every == 0 {
                let path = a.render_dir.join(format!("ep{i:03}_step{n:04}.ppm"));
                if let Err(e) = render_maps(&runner.belief, &runner.vmap, &runner.frontiers).save(path) {
                    io_error = Some(e);
                }
            }
        };
        let r = run_episode_observed(scene, ep, &pipeline, &cfg, rng::mix(a.seed, i as u64), observe)?;
        if let Some(e) = io_error {
            return Err(e);
        }
        writeln!(
            out,
            "episode {i} {} {}: success={} steps={} path={} shortest={} reward={:.3} time_s={:.3}",
            ep.scene_id,
            ep.goal_category,
            r.success,
            r.steps,
            r.path_length,
            r.shortest_path_len,
            r.reward,
            r.modeled_time_ms / 1000.0
        )
        .map_err(stdout_io)?;
        results.push(r);
    }
    if let Some(mut w) = trace {
        w.flush().map_err(|e| Error::io(a.trace.as_ref().unwrap(), e))?;
    }
    if results.is_empty() {
        let _ = writeln!(err, "no episodes to run");
        return Ok(0);
    }
    let report = aggregate(&results, &pipeline, &name)?;
    write!(out, "{}", metrics::format_table(&[report])).map_err(stdout_io)?;
    Ok(0)
}

fn bench_cmd(a: &BenchArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let spec = BenchmarkSpec::load(&a.spec)?;
    let outcome = bench::run_benchmark(&spec)?;
    for (name, reason) in &outcome.skipped {
        let _ = writeln!(err, "skipped {name}: {reason}");
    }
    write!(out, "{}", metrics::format_table(&outcome.reports())).map_err(stdout_io)?;
    Ok(if outcome.skipped.is_empty() { 0 } else { 2 })
}

fn render(a: &RenderArgs) -> Result<i32> {
    let img = match &a.episodes {
        None => render_scene(&load_scene(&a.scene)?),
        Some(eps) => {
            let (scenes, set) = load_inputs(&a.scene, eps)?;
            let ep = set.episodes.get(a.episode_index).ok_or_else(|| {
                Error::InvalidParams(format!(
                    "episode index {} out of range ({} episodes)",
                    a.episode_index,
                    set.episodes.len()
                ))
            })?;
            let (_, pipeline) = resolve_config(&builtin_profiles(), &a.config)?;
            let scene = &scenes[&ep.scene_id];
            let cfg = RunConfig::default();
            let mut runner = EpisodeRunner::new(scene, ep, &pipeline, &cfg, rng::mix(a.seed, a.episode_index as u64))?;
            while runner.steps < a.steps && !runner.is_done() {
                if runner.step().is_err() {
                    break;
                }
            }
            render_maps(&runner.belief, &runner.vmap, &runner.frontiers)
        }
    };
    img.save(&a.out)?;
    Ok(0)
}

/// Reads reports from CSV or JSON, picking the format by extension, plus the
/// `pipelines.json` sidecar next to it when present.
pub fn load_reports(path: &Path) -> Result<Vec<AggregateReport>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reports = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => metrics::from_json(&text)?,
        _ => metrics::from_csv(&text)?,
    };
    let sidecar = path.with_file_name("pipelines.json");
    if sidecar.is_file() {
        let text = std::fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        let summaries: std::collections::BTreeMap<String, PipelineSummary> =
            serde_json::from_str(&text).map_err(|e| Error::parse("pipelines.json", e.to_string()))?;
        for r in &mut reports {
            r.pipeline = summaries.get(&r.config).cloned();
        }
    }
    Ok(reports)
}

fn report(a: &ReportArgs, out: &mut dyn Write) -> Result<i32> {
    let reports = load_reports(&a.input)?;
    let text = match a.format {
        Format::Csv => metrics::to_csv(&reports)?,
        Format::Json => metrics::to_json(&reports)?,
        Format::Table => metrics::format_table(&reports),
    };
    write!(out, "{text}").map_err(stdout_io)?;
    Ok(0)
}
