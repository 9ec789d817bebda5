//! Deterministic cluttered-bin simulator and benchmark for manipulation-aided
//! question answering.
//!
//! An agent is asked a natural-language question about objects piled in a
//! square bin (existence, count, or spatial relation). Objects occlude each
//! other, so the answer is often not readable from the initial view; the agent
//! may push objects around to reveal what is hidden, then answers from a scene
//! graph built over the final view.
//!
//! The crate is split along the pipeline:
//!
//! - [`world`]: the bin simulator (scene generation, push dynamics, occlusion
//!   aware observation).
//! - [`actions`]: the continuous push action and its discretization onto a
//!   28x28 position grid with 8 direction classes plus STOP.
//! - [`graph`]: pairwise relation classification and per-frame scene graphs,
//!   aligned across frames.
//! - [`qa`]: question templates, parsing, and graph-search answering.
//! - [`oracle`]: a least-pushes expert with full scene access that produces
//!   demonstration trajectories.
//! - [`learner`]: a from-scratch GRU policy trained by imitation on the
//!   expert's discretized actions.
//! - [`bench`]: dataset generation, episode execution, and metrics.
//!
//! Numeric code is generic over the scalar type through [`scalar::Real`]
//! (implemented for `f32` and `f64`); [`Scalar`] is the concrete alias used by
//! the shipped tooling. Everything is deterministic given the seeds: scene
//! generation, push resolution, demonstration, training, and evaluation all
//! reproduce byte-identical artifacts on rerun.

pub mod actions;
pub mod bench;
pub mod geom;
pub mod graph;
pub mod learner;
pub mod oracle;
pub mod qa;
pub mod scalar;
pub mod seeds;
pub mod world;

/// Scalar type used by the shipped binaries and default pipelines.
pub type Scalar = f64;

/// Side length of the square bin, in pixels.
pub const BIN_SIZE: i32 = 224;

/// Pitch of the push-start position grid, in pixels.
pub const GRID_STEP: i32 = 8;

/// Position bins per axis (`BIN_SIZE / GRID_STEP`).
pub const N_POS_BINS: usize = 28;

/// Number of push direction classes (multiples of 45 degrees).
pub const N_DIRECTIONS: usize = 8;

/// Index of the STOP class in the orientation head (one past the directions).
pub const STOP_CLASS: u8 = N_DIRECTIONS as u8;

/// Push travel distance, in pixels (a quarter of the bin side).
pub const PUSH_DISTANCE: i32 = 56;

/// Width of the push corridor swept by the pusher, in pixels.
pub const PUSH_WIDTH: i32 = 16;

/// Number of object classes.
pub const N_CLASSES: usize = 20;

/// Maximum instances per class in a scene.
pub const MAX_INSTANCES: usize = 3;

/// Visibility threshold for an object to be detected.
pub const TAU_VIS: f64 = 0.25;

/// Default push budget per episode.
pub const DEFAULT_MAX_STEPS: usize = 5;
