//! Supercover line of sight and one field-of-view observation.

use fronsim::rng::{stream, Stream};
use fronsim::sensing::{line_of_sight, sense, supercover, AgentPose, Heading, SensorConfig};
use fronsim::world::parse_scene;
use fronsim::Cell;

const MAP: &str = "\
SCENE v1 10 7 0.25
##########
#........#
#...#....#
#...#....#
#........#
#........#
##########
";

fn main() -> fronsim::Result<()> {
    let scene = parse_scene("demo", MAP)?;

    // a diagonal through a lattice corner touches all four cells around it
    let cover: Vec<String> = supercover(Cell::new(1, 1), Cell::new(3, 3)).iter().map(|c| c.to_string()).collect();
    println!("supercover 1,1 -> 3,3: {}", cover.join(" "));
    for (a, b) in [((1, 2), (7, 2)), ((1, 4), (7, 4))] {
        let (a, b) = (Cell::new(a.0, a.1), Cell::new(b.0, b.1));
        println!("{a} sees {b}: {}", line_of_sight(&scene, a, b));
    }

    let pose = AgentPose::new(Cell::new(1, 3), Heading::EAST);
    let obs = sense(&scene, pose, &SensorConfig::default(), &mut stream(0, Stream::Sensor));
    for y in 0..scene.height() as i32 {
        let row: String = (0..scene.width() as i32)
            .map(|x| {
                let c = Cell::new(x, y);
                if c == pose.cell {
                    '@'
                } else if obs.visible.contains_key(&c) {
                    if scene.is_free(c) { 'o' } else { 'X' }
                } else if scene.is_free(c) {
                    '.'
                } else {
                    '#'
                }
            })
            .collect();
        println!("{row}");
    }
    Ok(())
}
