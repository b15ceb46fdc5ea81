//! Two pipelines on the same episodes, then a paired bootstrap on the
//! difference in steps.

use fronsim::bench::{compare, preset, run_pipelines};
use fronsim::metrics::format_table;
use fronsim::perception::builtin_profiles;
use fronsim::policy::RunConfig;
use fronsim::world::{generate_scene, make_episodes, EpisodeParams, EpisodeSet, SceneParams, SceneSet};

fn main() -> fronsim::Result<()> {
    let mut scenes = SceneSet::new();
    let mut sets = Vec::new();
    for seed in 0..4 {
        let scene = generate_scene(seed, &SceneParams::default())?;
        sets.push(make_episodes(&scene, 10, seed, &EpisodeParams::default())?);
        scenes.insert(scene.id.clone(), scene);
    }
    let set = EpisodeSet::concat(sets);

    let registry = builtin_profiles();
    let configs = ["baseline", "final"].map(|n| preset(&registry, n).map(|p| (n.to_owned(), p)));
    let configs = configs.into_iter().collect::<fronsim::Result<Vec<_>>>()?;
    let outcome = run_pipelines(&configs, &scenes, &set, &[0, 1], &RunConfig::default())?;

    print!("{}", format_table(&outcome.reports()));
    println!("{}", compare(&outcome, "baseline", "final", 5000, 0)?.summary_line());
    Ok(())
}
