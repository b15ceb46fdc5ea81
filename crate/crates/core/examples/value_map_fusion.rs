//! Confidence-weighted fusion of repeated scores into one value-map cell.

use fronsim::mapping::{angular_confidence, fuse, ValueCell};

fn main() {
    let fov = 90.0;
    for offset in [0.0, 15.0, 30.0, 45.0] {
        println!("offset {offset:>4} deg -> confidence {:.3}", angular_confidence(offset, fov));
    }

    // the same cell scored three times from different angles
    let mut cell = ValueCell::default();
    for (score, offset) in [(0.2, 40.0), (0.9, 0.0), (0.4, 25.0)] {
        cell = fuse(cell, score, angular_confidence(offset, fov));
        println!("score {score} at {offset} deg -> value {:.3}, confidence {:.3}", cell.value, cell.confidence);
    }
}
