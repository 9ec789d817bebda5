//! Control model for the factored-heads comparison: the same recurrent cell
//! driving a single softmax over every (x, y, direction) combination.
//!
//! One joint class per action triple plus STOP makes 28*28*9 outputs, so the
//! decoder is enormous relative to the factored heads and each class sees a
//! sliver of the data. Training it under the identical budget quantifies what
//! the factorization buys.

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::actions::DiscreteAction;
use crate::scalar::Real;
use crate::{N_POS_BINS, STOP_CLASS};

use super::gru::{GruCell, LearnerError, O_CLASSES};
use super::train::{TrainConfig, TrainError};
use super::EncodedDemo;

/// 28 * 28 * 9 = 7056 joint classes. STOP is the class of (0, 0, STOP).
pub const JOINT_CLASSES: usize = N_POS_BINS * N_POS_BINS * O_CLASSES;

/// Flat class of an action. Any STOP maps to the canonical STOP class,
/// because a STOP's position bins carry no information.
pub fn joint_index(a: &DiscreteAction) -> usize {
    if a.is_stop() {
        return STOP_CLASS as usize;
    }
    (a.x_bin as usize * N_POS_BINS + a.y_bin as usize) * O_CLASSES + a.o_class as usize
}

/// Inverse of [`joint_index`].
pub fn joint_action(index: usize) -> DiscreteAction {
    assert!(index < JOINT_CLASSES, "joint class out of range");
    let o = (index % O_CLASSES) as u8;
    let rest = index / O_CLASSES;
    DiscreteAction { x_bin: (rest / N_POS_BINS) as u8, y_bin: (rest % N_POS_BINS) as u8, o_class: o }
}

/// Cell plus one wide decoder.
#[derive(Clone, Debug, PartialEq)]
pub struct JointParams<T> {
    pub cell: GruCell<T>,
    pub dec: Array2<T>,
}

impl<T: Real> JointParams<T> {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self { cell: GruCell::zeros(input, hidden), dec: Array2::zeros((JOINT_CLASSES, hidden)) }
    }

    pub fn init(input: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cell = GruCell::init(input, hidden, &mut rng);
        let bound = 1.0 / (hidden as f64).sqrt();
        let dec =
            Array2::from_shape_fn((JOINT_CLASSES, hidden), |_| T::of(rng.random_range(-bound..bound)));
        Self { cell, dec }
    }

    pub fn hidden_dim(&self) -> usize {
        self.cell.hidden_dim()
    }

    fn zip_mut_with(&mut self, other: &Self, mut f: impl FnMut(&mut T, &T)) {
        self.cell.zip_mut_with(&other.cell, &mut f);
        self.dec.zip_mut_with(&other.dec, |a, b| f(a, b));
    }
}

fn outer<T: Real>(col: &Array1<T>, row: &Array1<T>) -> Array2<T> {
    col.view().insert_axis(Axis(1)).dot(&row.view().insert_axis(Axis(0)))
}

fn cross_entropy<T: Real>(logits: &Array1<T>, target: usize) -> f64 {
    let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let sum: T = logits.iter().map(|&v| (v - m).exp()).sum();
    (m + sum.ln() - logits[target]).to_f64_lossy()
}

fn loss_and_grads<T: Real>(
    params: &JointParams<T>,
    demo: &EncodedDemo<T>,
) -> Result<(f64, JointParams<T>), LearnerError> {
    if demo.states.len() != demo.actions.len() {
        return Err(LearnerError::LengthMismatch {
            logits: demo.states.len(),
            targets: demo.actions.len(),
        });
    }
    if demo.states.is_empty() {
        return Err(LearnerError::EmptySequence);
    }
    for (step, a) in demo.actions.iter().enumerate() {
        if !a.in_range() {
            return Err(LearnerError::TargetOutOfRange { step });
        }
    }

    let n = demo.states.len();
    let mut h = Array1::zeros(params.hidden_dim());
    let mut caches = Vec::with_capacity(n);
    let mut hidden = Vec::with_capacity(n);
    let mut logits = Vec::with_capacity(n);
    for x in &demo.states {
        let (h_new, cache) = params.cell.step_cached(x, &h);
        logits.push(params.dec.dot(&h_new));
        caches.push(cache);
        hidden.push(h_new.clone());
        h = h_new;
    }

    let inv = 1.0 / n as f64;
    let mut total = 0.0;
    let mut grads = JointParams::zeros(params.cell.input_dim(), params.hidden_dim());
    let mut dh_next: Array1<T> = Array1::zeros(params.hidden_dim());
    for t in (0..n).rev() {
        let target = joint_index(&demo.actions[t]);
        total += cross_entropy(&logits[t], target) * inv;
        let m = logits[t].iter().copied().fold(T::neg_infinity(), T::max);
        let mut p = logits[t].mapv(|v| (v - m).exp());
        let s = p.sum();
        p.mapv_inplace(|v| v / s);
        p[target] -= T::one();
        let dl = p.mapv_into(|v| v * T::of(inv));
        grads.dec += &outer(&dl, &hidden[t]);
        let mut dh = dh_next;
        dh += &params.dec.t().dot(&dl);
        dh_next = params.cell.backward(&caches[t], &dh, &mut grads.cell);
    }
    Ok((total, grads))
}

/// Mean joint cross-entropy at the start of each epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointEpochRecord {
    pub epoch: usize,
    pub loss: f64,
}

pub struct JointTrained<T> {
    pub params: JointParams<T>,
    pub curve: Vec<JointEpochRecord>,
}

/// Train the joint-head model with the same optimizer and budget semantics
/// as the factored model.
pub fn train_joint<T: Real>(
    demos: &[EncodedDemo<T>],
    cfg: &TrainConfig,
) -> Result<JointTrained<T>, TrainError> {
    if demos.is_empty() {
        return Err(TrainError::NoDemos);
    }
    let dim = demos
        .first()
        .and_then(|d| d.states.first())
        .map(|s| s.len())
        .ok_or(TrainError::NoDemos)?;
    for (index, demo) in demos.iter().enumerate() {
        if let Some(got) = demo.states.iter().map(|s| s.len()).find(|&w| w != dim) {
            return Err(TrainError::DimMismatch { index, got, expected: dim });
        }
    }

    let mut params = JointParams::<T>::init(dim, cfg.hidden, cfg.seed);
    let mut velocity = JointParams::<T>::zeros(dim, cfg.hidden);
    let mut curve = Vec::with_capacity(cfg.epochs);
    let inv = 1.0 / demos.len() as f64;
    let lr = T::of(cfg.lr);
    let mu = T::of(cfg.momentum);
    let scale = T::of(inv);

    for epoch in 1..=cfg.epochs {
        let mut batch_grads = JointParams::<T>::zeros(dim, cfg.hidden);
        let mut sum = 0.0;
        for (index, demo) in demos.iter().enumerate() {
            let (l, g) = loss_and_grads(&params, demo)
                .map_err(|source| TrainError::BadDemo { index, source })?;
            sum += l;
            batch_grads.zip_mut_with(&g, |acc, &gv| *acc += gv * scale);
        }
        let mean = sum * inv;
        if !mean.is_finite() {
            return Err(TrainError::NonFinite { epoch });
        }
        curve.push(JointEpochRecord { epoch, loss: mean });
        velocity.zip_mut_with(&batch_grads, |v, &g| *v = mu * *v + g);
        params.zip_mut_with(&velocity, |p, &v| *p -= lr * v);
    }

    Ok(JointTrained { params, curve })
}

/// Greedy action from the final step's joint logits; ties break toward the
/// lowest class.
pub fn predict_joint<T: Real>(params: &JointParams<T>, states: &[Array1<T>]) -> DiscreteAction {
    assert!(!states.is_empty(), "prediction needs at least one encoded step");
    let mut h = Array1::zeros(params.hidden_dim());
    for x in states {
        h = params.cell.step(x, &h);
    }
    let logits = params.dec.dot(&h);
    joint_action(super::gru::argmax(&logits))
}
