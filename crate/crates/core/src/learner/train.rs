//! Full-batch gradient descent with classical momentum.

use thiserror::Error;

use crate::scalar::Real;

use super::gru::{loss_and_grads, GruParams, LearnerError, Loss};
use super::EncodedDemo;

/// Optimization settings. `hidden` sizes the model; the rest drive the loop.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub hidden: usize,
    pub lr: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    // lr 0.05: at the benchmark's scale (a few hundred short demos, full-batch
    // updates, 200 epochs) anything much lower leaves the position heads far
    // from converged, and the curve stays smooth well past this budget.
    fn default() -> Self {
        Self { hidden: 64, lr: 0.05, momentum: 0.9, epochs: 200, seed: 0 }
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("no demonstrations to train on")]
    NoDemos,
    #[error("demonstration {index} has state width {got}, expected {expected}")]
    DimMismatch { index: usize, got: usize, expected: usize },
    #[error("demonstration {index} is malformed: {source}")]
    BadDemo { index: usize, source: LearnerError },
    #[error("loss became non-finite at epoch {epoch}")]
    NonFinite { epoch: usize },
}

/// Mean loss over the batch at the start of one epoch, before that epoch's
/// parameter update. Epochs are numbered from 1, so the first record is the
/// loss of the freshly initialized model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: Loss,
}

/// Trained parameters plus the loss curve that produced them.
pub struct Trained<T> {
    pub params: GruParams<T>,
    pub curve: Vec<EpochRecord>,
}

/// Fit the policy to the demonstrations: full-batch gradients, velocity
/// update v = momentum * v + g, parameter update p = p - lr * v.
pub fn train<T: Real>(demos: &[EncodedDemo<T>], cfg: &TrainConfig) -> Result<Trained<T>, TrainError> {
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

    let mut params = GruParams::<T>::init(dim, cfg.hidden, cfg.seed);
    let mut velocity = GruParams::<T>::zeros(dim, cfg.hidden);
    let mut curve = Vec::with_capacity(cfg.epochs);
    let inv = 1.0 / demos.len() as f64;
    let lr = T::of(cfg.lr);
    let mu = T::of(cfg.momentum);
    let scale = T::of(inv);

    for epoch in 1..=cfg.epochs {
        let mut batch_grads = GruParams::<T>::zeros(dim, cfg.hidden);
        let mut sum = Loss { x: 0.0, y: 0.0, o: 0.0 };
        for (index, demo) in demos.iter().enumerate() {
            let (l, g) = loss_and_grads(&params, demo)
                .map_err(|source| TrainError::BadDemo { index, source })?;
            sum.x += l.x;
            sum.y += l.y;
            sum.o += l.o;
            batch_grads.zip_mut_with(&g, |acc, &gv| *acc += gv * scale);
        }
        let mean = Loss { x: sum.x * inv, y: sum.y * inv, o: sum.o * inv };
        if !mean.is_finite() {
            return Err(TrainError::NonFinite { epoch });
        }
        curve.push(EpochRecord { epoch, loss: mean });
        velocity.zip_mut_with(&batch_grads, |v, &g| *v = mu * *v + g);
        params.zip_mut_with(&velocity, |p, &v| *p -= lr * v);
    }

    Ok(Trained { params, curve })
}

/// Render a loss curve as CSV, one row per epoch.
pub fn curve_csv(curve: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,total,loss_x,loss_y,loss_o\n");
    for r in curve {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.epoch,
            r.loss.total(),
            r.loss.x,
            r.loss.y,
            r.loss.o
        ));
    }
    out
}
