//! VRAM totals of the preset pipelines, and the budget gate.

use fronsim::bench::{preset, PRESETS};
use fronsim::perception::{builtin_profiles, vram_total};

fn main() {
    let registry = builtin_profiles();
    for name in PRESETS {
        match preset(&registry, name) {
            Ok(p) => {
                let modules: Vec<_> = p.modules().map(|m| m.name.as_str()).collect();
                println!("{name:<16} {:>6} MiB  {}", vram_total(&p), modules.join(" + "));
            }
            Err(e) => println!("{name:<16} rejected: {e}"),
        }
    }
}
