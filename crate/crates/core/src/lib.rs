//! Deterministic 2D simulator and benchmark harness for zero-shot object-goal
//! navigation.
//!
//! The pipeline mirrors a frontier/value-map navigator: the agent spins to
//! seed its maps, scores what it sees with a semantic scorer, fuses those
//! scores into a confidence-weighted value map, ranks frontier waypoints by
//! value, and switches to an object waypoint once a detection has been
//! segmented and (optionally) verified. The neural modules are replaced by
//! behavioral models that carry per-call latency and VRAM costs, so the
//! harness can reason about accuracy/latency trade-offs and memory budgets.
//!
//! Module map:
//!
//! - [`world`]: scene generation, episodes, geodesic distances, scene files
//! - [`sensing`]: field-of-view ray casting and line of sight
//! - [`perception`]: scorer, detector, segmenter and verifier models
//! - [`mapping`]: belief map, frontiers and value-map fusion
//! - [`policy`]: the per-step decision loop and episode runner
//! - [`metrics`]: SR, SPL, modeled time and aggregate reports
//! - [`bench`]: batch runner, paired bootstrap comparison, accounting checks
//! - [`render`]: PPM snapshots of the agent's maps
//! - [`cli`]: the `fronsim` command line

pub mod bench;
pub mod cli;
pub mod error;
pub mod grid;
pub mod mapping;
pub mod metrics;
pub mod perception;
pub mod policy;
pub mod render;
pub mod rng;
pub mod sensing;
pub mod world;

pub use error::{Error, Result};
pub use grid::Cell;
