//! Modeled time is call count times per-call latency, summed per module.

use fronsim::bench::{accounting_check, preset, relative_error, run_pipelines};
use fronsim::perception::{builtin_profiles, ModuleKind};
use fronsim::policy::RunConfig;
use fronsim::world::{generate_scene, make_episodes, EpisodeParams, SceneParams, SceneSet};

fn main() -> fronsim::Result<()> {
    let scene = generate_scene(11, &SceneParams::default())?;
    let set = make_episodes(&scene, 20, 11, &EpisodeParams::default())?;
    let mut scenes = SceneSet::new();
    scenes.insert(scene.id.clone(), scene);

    let pipeline = preset(&builtin_profiles(), "final-vqa")?;
    let outcome = run_pipelines(&[("final-vqa".into(), pipeline.clone())], &scenes, &set, &[0], &RunConfig::default())?;
    let run = &outcome.runs[0];
    let r = &run.report;

    // scorer and detector run once per step, so steps x episodes x latency
    // reproduces their totals
    for (kind, measured) in [(ModuleKind::Scorer, r.vlm_s), (ModuleKind::Detector, r.det_s)] {
        let predicted = accounting_check(r.avg_steps, r.episodes as f64, pipeline.latency_ms(kind));
        println!(
            "{:<9} {:>8.2}s modeled, {:>8.2}s from avg steps ({:.2}% apart)",
            kind.as_str(),
            measured,
            predicted,
            100.0 * relative_error(measured, predicted)
        );
    }
    println!("segmenter {:.2}s, verifier {:.2}s, total {:.2} min", r.seg_s, r.vqa_s, r.total_min);
    Ok(())
}
