//! Imitation learner: encodes observation/question/action history into fixed
//! vectors and fits a small recurrent policy to expert demonstrations.
//!
//! Everything here is hand-rolled on dense arrays: the recurrent cell, the
//! softmax heads, backpropagation through time, and the momentum optimizer.
//! The model never sees the simulator state, only what a detector would
//! report, so a trained policy can in principle run against real perception.

pub mod checkpoint;
pub mod gru;
pub mod joint;
pub mod train;

use ndarray::Array1;

use crate::actions::DiscreteAction;
use crate::qa::{Question, QuestionType, SpatialRel};
use crate::scalar::Real;
use crate::world::{Observation, OBS_GRID};
use crate::{N_CLASSES, N_DIRECTIONS, N_POS_BINS};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError};
pub use gru::{
    forward, loss, loss_and_grads, loss_from_logits, predict, Forward, GruCell, GruParams,
    HeadLogits, LearnerError, Loss, O_CLASSES, X_CLASSES, Y_CLASSES,
};
pub use joint::{
    joint_action, joint_index, predict_joint, train_joint, JointEpochRecord, JointParams,
    JointTrained, JOINT_CLASSES,
};
pub use train::{curve_csv, train, EpochRecord, TrainConfig, TrainError, Trained};

/// Width of the question block: type one-hot, two class one-hots, relation
/// one-hot (above/below share a slot; the policy's job is the same either way).
pub const QUESTION_DIM: usize = 3 + 2 * N_CLASSES + 2;

/// Width of the previous-action block: x bin, y bin, direction-or-STOP.
pub const ACTION_DIM: usize = 2 * N_POS_BINS + N_DIRECTIONS + 1;

/// How observations are folded into model inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct EncoderConfig {
    /// Side length of the downsampled class-coverage grid fed to the model.
    pub grid: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self { grid: 7 }
    }
}

impl EncoderConfig {
    /// Total input width: visual block + question block + action block.
    pub fn state_dim(&self) -> usize {
        self.grid * self.grid * N_CLASSES + QUESTION_DIM + ACTION_DIM
    }
}

/// One demonstration ready for training: encoded inputs and target actions,
/// aligned step for step.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedDemo<T> {
    pub states: Vec<Array1<T>>,
    pub actions: Vec<DiscreteAction>,
}

/// Encode one timestep. `last_action` is the action taken at the previous
/// step, absent at the start of an episode. Every entry lands in [0, 1].
pub fn encode_state<T: Real>(
    obs: &Observation,
    question: &Question,
    last_action: Option<DiscreteAction>,
    cfg: &EncoderConfig,
) -> Array1<T> {
    let g = cfg.grid;
    assert!(g >= 1 && g <= OBS_GRID, "encoder grid must fit inside the observation grid");
    let mut out = vec![0.0f64; cfg.state_dim()];

    // Visual block: area-weighted average of the observation's class
    // coverage, so a cell value stays the fraction of that (larger) region
    // covered by visible surface of the class.
    let axis = overlap_weights(g);
    let norm = (OBS_GRID as f64 / g as f64) * (OBS_GRID as f64 / g as f64);
    for (ty, row_w) in axis.iter().enumerate() {
        for &(oy, wy) in row_w {
            for (tx, col_w) in axis.iter().enumerate() {
                for &(ox, wx) in col_w {
                    let w = wy * wx / norm;
                    let src = (oy * OBS_GRID + ox) * N_CLASSES;
                    let dst = (ty * g + tx) * N_CLASSES;
                    for c in 0..N_CLASSES {
                        out[dst + c] += obs.class_grid[src + c] * w;
                    }
                }
            }
        }
    }

    // Question block.
    let qoff = g * g * N_CLASSES;
    let type_idx = match question.qtype {
        QuestionType::Existence => 0,
        QuestionType::Counting => 1,
        QuestionType::Spatial => 2,
    };
    out[qoff + type_idx] = 1.0;
    out[qoff + 3 + question.class_a as usize] = 1.0;
    if let Some(b) = question.class_b {
        out[qoff + 3 + N_CLASSES + b as usize] = 1.0;
    }
    if let Some(rel) = question.relation {
        let ridx = match rel {
            SpatialRel::Above | SpatialRel::Below => 0,
            SpatialRel::Near => 1,
        };
        out[qoff + 3 + 2 * N_CLASSES + ridx] = 1.0;
    }

    // Previous-action block, all zeros on the first step.
    let aoff = qoff + QUESTION_DIM;
    if let Some(a) = last_action {
        debug_assert!(a.in_range());
        out[aoff + a.x_bin as usize] = 1.0;
        out[aoff + N_POS_BINS + a.y_bin as usize] = 1.0;
        out[aoff + 2 * N_POS_BINS + a.o_class as usize] = 1.0;
    }

    Array1::from_iter(out.into_iter().map(T::of))
}

/// Encode a whole expert trajectory, threading each action into the next
/// step's input.
pub fn encode_trajectory<T: Real>(
    traj: &crate::oracle::Trajectory,
    cfg: &EncoderConfig,
) -> EncodedDemo<T> {
    let mut last = None;
    let mut states = Vec::with_capacity(traj.steps.len());
    let mut actions = Vec::with_capacity(traj.steps.len());
    for step in &traj.steps {
        states.push(encode_state(&step.observation, &traj.question, last, cfg));
        actions.push(step.action);
        last = Some(step.action);
    }
    EncodedDemo { states, actions }
}

/// For each target cell along one axis, the source cells it overlaps and by
/// how much (in source-cell units).
fn overlap_weights(g: usize) -> Vec<Vec<(usize, f64)>> {
    let span = OBS_GRID as f64 / g as f64;
    (0..g)
        .map(|t| {
            let lo = t as f64 * span;
            let hi = lo + span;
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(OBS_GRID);
            (first..last)
                .filter_map(|o| {
                    let w = hi.min((o + 1) as f64) - lo.max(o as f64);
                    (w > 0.0).then_some((o, w))
                })
                .collect()
        })
        .collect()
}
