//! Generate a scene, print it, and sample a few episodes from it.

use fronsim::world::{format_scene, generate_scene, make_episodes, EpisodeParams, SceneParams};

fn main() -> fronsim::Result<()> {
    let params = SceneParams {
        width: 24,
        height: 16,
        room_count: 3,
        ..SceneParams::default()
    };
    let scene = generate_scene(42, &params)?;
    print!("{}", format_scene(&scene));
    println!("{} free cells, {} objects", scene.free_count(), scene.objects.len());

    let set = make_episodes(&scene, 5, 42, &EpisodeParams::default())?;
    for ep in &set.episodes {
        println!(
            "start {} heading {} -> {} ({} steps away)",
            ep.start.cell,
            ep.start.heading.degrees(),
            ep.goal_category,
            ep.shortest_path_len
        );
    }
    Ok(())
}
