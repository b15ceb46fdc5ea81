//! Write the ground-truth scene and the agent's maps after 30 steps as PPM.

use fronsim::perception::builtin_profiles;
use fronsim::policy::{EpisodeRunner, RunConfig};
use fronsim::render::{render_maps, render_scene};
use fronsim::world::{generate_scene, make_episodes, EpisodeParams, SceneParams};

fn main() -> fronsim::Result<()> {
    let out = std::env::temp_dir();
    let scene = generate_scene(5, &SceneParams::default())?;
    render_scene(&scene).save(out.join("scene_5.ppm"))?;

    let set = make_episodes(&scene, 1, 5, &EpisodeParams::default())?;
    let pipeline = fronsim::bench::preset(&builtin_profiles(), "final")?;
    let cfg = RunConfig::default();
    let mut runner = EpisodeRunner::new(&scene, &set.episodes[0], &pipeline, &cfg, 0)?;
    for _ in 0..30 {
        if runner.is_done() || runner.step().is_err() {
            break;
        }
    }
    render_maps(&runner.belief, &runner.vmap, &runner.frontiers).save(out.join("scene_5_agent.ppm"))?;
    println!("wrote {} and {}", out.join("scene_5.ppm").display(), out.join("scene_5_agent.ppm").display());
    Ok(())
}
