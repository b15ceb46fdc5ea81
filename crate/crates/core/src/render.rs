//! Binary PPM (P6) snapshots, one pixel per cell.
//!
//! Belief layer: unknown gray, free white, obstacle black. Scored free cells
//! are painted with a 256-level blue-to-red heat ramp of their value, and
//! frontier waypoints are drawn as 3×3 green markers on top.

use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Cell;
use crate::mapping::{BeliefMap, FrontierSet, Knowledge, ValueMap};
use crate::world::{CellTruth, Scene};

pub type Rgb = [u8; 3];

const UNKNOWN: Rgb = [128, 128, 128];
const FREE: Rgb = [255, 255, 255];
const OBSTACLE: Rgb = [0, 0, 0];
const MARKER: Rgb = [0, 200, 0];
const OBJECT: Rgb = [255, 160, 0];

pub fn heat(value: f64) -> Rgb {
    let level = (value.clamp(0.0, 1.0) * 255.0).round() as u8;
    [level, 0, 255 - level]
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<Rgb>,
}

impl Image {
    pub fn new(width: usize, height: usize, fill: Rgb) -> Self {
        Image {
            width,
            height,
            pixels: vec![fill; width * height],
        }
    }

    pub fn put(&mut self, c: Cell, rgb: Rgb) {
        if c.x >= 0 && c.y >= 0 && (c.x as usize) < self.width && (c.y as usize) < self.height {
            self.pixels[c.y as usize * self.width + c.x as usize] = rgb;
        }
    }

    pub fn get(&self, c: Cell) -> Rgb {
        self.pixels[c.y as usize * self.width + c.x as usize]
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.reserve(self.pixels.len() * 3);
        for p in &self.pixels {
            out.extend_from_slice(p);
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_ppm()).map_err(|e| Error::io(path, e))
    }
}

pub fn render_maps(belief: &BeliefMap, vmap: &ValueMap, frontiers: &FrontierSet) -> Image {
    let mut img = Image::new(belief.width(), belief.height(), UNKNOWN);
    for (c, k) in belief.grid().iter() {
        let rgb = match k {
            Knowledge::Unknown => UNKNOWN,
            Knowledge::Obstacle => OBSTACLE,
            Knowledge::Free => {
                let v = vmap.get(c);
                if v.confidence > 0.0 {
                    heat(v.value)
                } else {
                    FREE
                }
            }
        };
        img.put(c, rgb);
    }
    for wp in &frontiers.waypoints {
        for dy in -1..=1 {
            for dx in -1..=1 {
                img.put(Cell::new(wp.cell.x + dx, wp.cell.y + dy), MARKER);
            }
        }
    }
    img
}

/// Ground-truth view of a scene with object cells highlighted.
pub fn render_scene(scene: &Scene) -> Image {
    let mut img = Image::new(scene.width(), scene.height(), OBSTACLE);
    for (c, t) in scene.truth.iter() {
        img.put(c, if *t == CellTruth::Free { FREE } else { OBSTACLE });
    }
    for o in &scene.objects {
        for &c in &o.cells {
            img.put(c, OBJECT);
        }
    }
    img
}
