//! Step one episode by hand and print what the agent does.

use fronsim::perception::builtin_profiles;
use fronsim::policy::{EpisodeRunner, RunConfig};
use fronsim::world::{generate_scene, make_episodes, EpisodeParams, SceneParams};

fn main() -> fronsim::Result<()> {
    let scene = generate_scene(3, &SceneParams::default())?;
    let set = make_episodes(&scene, 1, 3, &EpisodeParams::default())?;
    let ep = &set.episodes[0];
    let pipeline = fronsim::bench::preset(&builtin_profiles(), "final")?;
    let cfg = RunConfig::default();

    println!("goal {} from {}, {} steps away", ep.goal_category, ep.start.cell, ep.shortest_path_len);
    let mut runner = EpisodeRunner::new(&scene, ep, &pipeline, &cfg, 7)?;
    while !runner.is_done() {
        let Ok((action, trace)) = runner.step() else {
            println!("nothing left to explore");
            break;
        };
        println!(
            "{:>3} {:<11} at {} {:?}{}",
            trace.step_index,
            format!("{action:?}"),
            runner.state.pose.cell,
            runner.state.phase,
            if trace.verified { "  (goal verified)" } else { "" }
        );
    }
    let r = runner.finish();
    println!(
        "success={} steps={} path={} modeled time {:.1}s",
        r.success,
        r.steps,
        r.path_length,
        r.modeled_time_ms / 1000.0
    );
    Ok(())
}
