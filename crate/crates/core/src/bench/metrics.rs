//! Scoring: answer accuracy with macro precision/recall, and imitation
//! distance/angle errors against expert pushes.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::actions::{continuize, push_midpoint, DiscreteAction, PushAction};
use crate::learner::{
    encode_trajectory, forward, EncodedDemo, EncoderConfig, GruParams, HeadLogits,
};
use crate::oracle::Trajectory;
use crate::qa::{Answer, QuestionType};
use crate::scalar::Real;
use crate::{BIN_SIZE, N_DIRECTIONS, N_POS_BINS};

use super::episode::EpisodeResult;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("prediction and truth lists differ: {predicted} vs {truth}")]
    LengthMismatch { predicted: usize, truth: usize },
    #[error("no answers to score")]
    Empty,
}

/// Distance and angle error of one predicted push against a demonstrated
/// one. Distance compares push midpoints (start plus half the travel),
/// normalized by the bin side; angle is the separation of the two canonical
/// directions as a fraction of a half turn.
pub fn imitation_error(predicted: &PushAction, demonstrated: &PushAction) -> (f64, f64) {
    let (px, py) = push_midpoint(predicted);
    let (dx, dy) = push_midpoint(demonstrated);
    let dis = (px - dx).hypot(py - dy) / BIN_SIZE as f64;
    let diff = (predicted.direction_class as i32 - demonstrated.direction_class as i32)
        .rem_euclid(N_DIRECTIONS as i32);
    let steps = diff.min(N_DIRECTIONS as i32 - diff);
    let angle = steps as f64 * 45.0 / 180.0;
    (dis, angle)
}

/// Accuracy plus macro-averaged one-vs-rest precision and recall. The class
/// set is every answer value appearing in the truth or the predictions;
/// classes with no positive predictions (or no true members) contribute 0 to
/// the corresponding average.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TypeMetrics {
    pub n: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
}

fn answer_key(a: &Answer) -> u8 {
    match a {
        Answer::No => 0,
        Answer::Yes => 1,
        Answer::Count(c) => 2 + c,
    }
}

pub fn qa_metrics(predicted: &[Answer], truth: &[Answer]) -> Result<TypeMetrics, MetricsError> {
    if predicted.len() != truth.len() {
        return Err(MetricsError::LengthMismatch {
            predicted: predicted.len(),
            truth: truth.len(),
        });
    }
    if truth.is_empty() {
        return Err(MetricsError::Empty);
    }
    let pred_keys: Vec<u8> = predicted.iter().map(answer_key).collect();
    let truth_keys: Vec<u8> = truth.iter().map(answer_key).collect();
    let n = truth.len();
    let correct = pred_keys.iter().zip(&truth_keys).filter(|(p, t)| p == t).count();

    let classes: BTreeSet<u8> = pred_keys.iter().chain(&truth_keys).copied().collect();
    let mut precision_sum = 0.0;
    let mut recall_sum = 0.0;
    for class in &classes {
        let tp = pred_keys
            .iter()
            .zip(&truth_keys)
            .filter(|(p, t)| **p == *class && **t == *class)
            .count() as f64;
        let predicted_pos = pred_keys.iter().filter(|p| **p == *class).count() as f64;
        let truth_pos = truth_keys.iter().filter(|t| **t == *class).count() as f64;
        precision_sum += if predicted_pos > 0.0 { tp / predicted_pos } else { 0.0 };
        recall_sum += if truth_pos > 0.0 { tp / truth_pos } else { 0.0 };
    }
    let k = classes.len() as f64;
    Ok(TypeMetrics {
        n,
        accuracy: correct as f64 / n as f64,
        precision: precision_sum / k,
        recall: recall_sum / k,
    })
}

/// Score episode results question-type by question-type, in fixed type
/// order. Types with no episodes are omitted.
pub fn per_type_metrics<'a>(
    results: impl IntoIterator<Item = &'a EpisodeResult>,
) -> Vec<(QuestionType, TypeMetrics)> {
    let results: Vec<&EpisodeResult> = results.into_iter().collect();
    let mut out = Vec::new();
    for qtype in [QuestionType::Existence, QuestionType::Counting, QuestionType::Spatial] {
        let (pred, truth): (Vec<Answer>, Vec<Answer>) = results
            .iter()
            .filter(|r| r.question.qtype == qtype)
            .map(|r| (r.predicted, r.truth))
            .unzip();
        if let Ok(m) = qa_metrics(&pred, &truth) {
            out.push((qtype, m));
        }
    }
    out
}

/// Render per-type metrics as CSV.
pub fn metrics_csv(rows: &[(QuestionType, TypeMetrics)]) -> String {
    let mut out = String::from("qtype,n,accuracy,precision,recall\n");
    for (qtype, m) in rows {
        let name = match qtype {
            QuestionType::Existence => "existence",
            QuestionType::Counting => "counting",
            QuestionType::Spatial => "spatial",
        };
        out.push_str(&format!("{},{},{},{},{}\n", name, m.n, m.accuracy, m.precision, m.recall));
    }
    out
}

/// Mean imitation errors over every expert push step in a set of
/// trajectories.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImitationMetrics {
    /// Number of scored push steps.
    pub n: usize,
    pub dis_e: f64,
    pub a_e: f64,
}

/// Step the model along each demonstration and compare its push to the
/// expert's at every expert push step. The push is read off the position
/// heads and the best non-STOP direction logit: the error formulas are
/// defined on pushes only, so this scores where and which way the model
/// would push, while its decision to stop at all is judged separately by
/// episode accuracy. Expert STOP steps are not scored; there is no push to
/// compare against.
pub fn imitation_eval<T: Real>(
    params: &GruParams<T>,
    enc: &EncoderConfig,
    trajs: &[Trajectory],
) -> ImitationMetrics {
    let mut n = 0usize;
    let mut dis_sum = 0.0;
    let mut ang_sum = 0.0;
    for traj in trajs {
        let demo: EncodedDemo<T> = encode_trajectory(traj, enc);
        let fwd = forward(params, &demo.states);
        for t in 0..demo.actions.len() {
            let target = demo.actions[t];
            if target.is_stop() {
                continue;
            }
            let predicted = push_from_logits(&fwd.logits[t]);
            let truth = continuize(&target).expect("scored steps are pushes");
            let (dis, ang) = imitation_error(&predicted, &truth);
            dis_sum += dis;
            ang_sum += ang;
            n += 1;
        }
    }
    finalize(n, dis_sum, ang_sum)
}

/// Best push under the logits: per-head argmax with STOP excluded from the
/// direction head.
fn push_from_logits<T: Real>(hl: &HeadLogits<T>) -> PushAction {
    let best = |v: &ndarray::Array1<T>, limit: usize| {
        let mut best = 0;
        for i in 1..limit {
            if v[i] > v[best] {
                best = i;
            }
        }
        best as u8
    };
    let action = DiscreteAction {
        x_bin: best(&hl.x, N_POS_BINS),
        y_bin: best(&hl.y, N_POS_BINS),
        o_class: best(&hl.o, N_DIRECTIONS),
    };
    continuize(&action).expect("a non-STOP direction class always forms a push")
}

/// The chance floor: uniformly random pushes scored against the same expert
/// push steps.
pub fn random_imitation_baseline(trajs: &[Trajectory], seed: u64) -> ImitationMetrics {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut n = 0usize;
    let mut dis_sum = 0.0;
    let mut ang_sum = 0.0;
    for traj in trajs {
        for step in &traj.steps {
            if step.action.is_stop() {
                continue;
            }
            let guess = DiscreteAction::new(
                rng.random_range(0..N_POS_BINS as u8),
                rng.random_range(0..N_POS_BINS as u8),
                rng.random_range(0..N_DIRECTIONS as u8),
            );
            let guess = continuize(&guess).expect("random guesses are pushes");
            let truth = continuize(&step.action).expect("scored steps are pushes");
            let (dis, ang) = imitation_error(&guess, &truth);
            dis_sum += dis;
            ang_sum += ang;
            n += 1;
        }
    }
    finalize(n, dis_sum, ang_sum)
}

fn finalize(n: usize, dis_sum: f64, ang_sum: f64) -> ImitationMetrics {
    if n == 0 {
        ImitationMetrics { n: 0, dis_e: 0.0, a_e: 0.0 }
    } else {
        ImitationMetrics { n, dis_e: dis_sum / n as f64, a_e: ang_sum / n as f64 }
    }
}
