//! The recurrent policy: a single gated recurrent cell feeding three linear
//! softmax heads (x bin, y bin, direction-or-STOP), with exact
//! backpropagation through time.

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::actions::DiscreteAction;
use crate::scalar::Real;
use crate::{N_DIRECTIONS, N_POS_BINS};

use super::EncodedDemo;

/// Head sizes: 28 x bins, 28 y bins, 8 directions plus STOP.
pub const X_CLASSES: usize = N_POS_BINS;
pub const Y_CLASSES: usize = N_POS_BINS;
pub const O_CLASSES: usize = N_DIRECTIONS + 1;

/// Loss mix: position heads share half the weight, the direction/STOP head
/// carries the other half because it alone decides whether to act at all.
pub const WEIGHT_X: f64 = 0.25;
pub const WEIGHT_Y: f64 = 0.25;
pub const WEIGHT_O: f64 = 0.5;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LearnerError {
    #[error("sequence lengths differ: {logits} logit steps vs {targets} targets")]
    LengthMismatch { logits: usize, targets: usize },
    #[error("an empty sequence has no loss")]
    EmptySequence,
    #[error("target action out of range at step {step}")]
    TargetOutOfRange { step: usize },
}

/// Gate and candidate parameters of one recurrent cell.
#[derive(Clone, Debug, PartialEq)]
pub struct GruCell<T> {
    pub w_z: Array2<T>,
    pub u_z: Array2<T>,
    pub b_z: Array1<T>,
    pub w_r: Array2<T>,
    pub u_r: Array2<T>,
    pub b_r: Array1<T>,
    pub w_c: Array2<T>,
    pub u_c: Array2<T>,
    pub b_c: Array1<T>,
}

/// Everything the backward pass needs about one forward step.
#[derive(Clone, Debug)]
pub(crate) struct StepCache<T> {
    x: Array1<T>,
    h_prev: Array1<T>,
    z: Array1<T>,
    r: Array1<T>,
    rh: Array1<T>,
    c: Array1<T>,
}

fn sigmoid<T: Real>(a: Array1<T>) -> Array1<T> {
    a.mapv_into(|v| T::one() / (T::one() + (-v).exp()))
}

/// Column times row, as a dense matrix.
fn outer<T: Real>(col: &Array1<T>, row: &Array1<T>) -> Array2<T> {
    let c = col.view().insert_axis(Axis(1));
    let r = row.view().insert_axis(Axis(0));
    c.dot(&r)
}

/// Uniform init in +-1/sqrt(fan_in), sampled in f64 so parameter streams are
/// identical across scalar widths.
fn sample_matrix<T: Real>(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<T> {
    let bound = 1.0 / (cols as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| T::of(rng.random_range(-bound..bound)))
}

impl<T: Real> GruCell<T> {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_z: Array2::zeros((hidden, input)),
            u_z: Array2::zeros((hidden, hidden)),
            b_z: Array1::zeros(hidden),
            w_r: Array2::zeros((hidden, input)),
            u_r: Array2::zeros((hidden, hidden)),
            b_r: Array1::zeros(hidden),
            w_c: Array2::zeros((hidden, input)),
            u_c: Array2::zeros((hidden, hidden)),
            b_c: Array1::zeros(hidden),
        }
    }

    /// Sampled weights, zero biases. Consumes the rng in a fixed order.
    pub fn init(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        Self {
            w_z: sample_matrix(hidden, input, rng),
            u_z: sample_matrix(hidden, hidden, rng),
            b_z: Array1::zeros(hidden),
            w_r: sample_matrix(hidden, input, rng),
            u_r: sample_matrix(hidden, hidden, rng),
            b_r: Array1::zeros(hidden),
            w_c: sample_matrix(hidden, input, rng),
            u_c: sample_matrix(hidden, hidden, rng),
            b_c: Array1::zeros(hidden),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_z.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_z.nrows()
    }

    /// One recurrence step: update gate z, reset gate r, candidate c, then
    /// h' = (1 - z) * h + z * c.
    pub fn step(&self, x: &Array1<T>, h_prev: &Array1<T>) -> Array1<T> {
        self.step_cached(x, h_prev).0
    }

    pub(crate) fn step_cached(
        &self,
        x: &Array1<T>,
        h_prev: &Array1<T>,
    ) -> (Array1<T>, StepCache<T>) {
        let z = sigmoid(self.w_z.dot(x) + self.u_z.dot(h_prev) + &self.b_z);
        let r = sigmoid(self.w_r.dot(x) + self.u_r.dot(h_prev) + &self.b_r);
        let rh = &r * h_prev;
        let c = (self.w_c.dot(x) + self.u_c.dot(&rh) + &self.b_c).mapv_into(T::tanh);
        let h = &z.mapv(|v| T::one() - v) * h_prev + &(&z * &c);
        let cache =
            StepCache { x: x.clone(), h_prev: h_prev.clone(), z, r, rh, c };
        (h, cache)
    }

    /// Reverse one step: fold `dh` into the parameter gradients and return
    /// the gradient with respect to the previous hidden state.
    pub(crate) fn backward(
        &self,
        cache: &StepCache<T>,
        dh: &Array1<T>,
        grads: &mut GruCell<T>,
    ) -> Array1<T> {
        let StepCache { x, h_prev, z, r, rh, c } = cache;
        let dc = dh * z;
        let dz = dh * &(c - h_prev);
        let mut dh_prev = dh * &z.mapv(|v| T::one() - v);

        let da_c = &dc * &c.mapv(|v| T::one() - v * v);
        grads.w_c += &outer(&da_c, x);
        grads.u_c += &outer(&da_c, rh);
        grads.b_c += &da_c;
        let drh = self.u_c.t().dot(&da_c);
        dh_prev += &(&drh * r);

        let dr = &drh * h_prev;
        let da_r = &dr * &(r * &r.mapv(|v| T::one() - v));
        grads.w_r += &outer(&da_r, x);
        grads.u_r += &outer(&da_r, h_prev);
        grads.b_r += &da_r;
        dh_prev += &self.u_r.t().dot(&da_r);

        let da_z = &dz * &(z * &z.mapv(|v| T::one() - v));
        grads.w_z += &outer(&da_z, x);
        grads.u_z += &outer(&da_z, h_prev);
        grads.b_z += &da_z;
        dh_prev += &self.u_z.t().dot(&da_z);

        dh_prev
    }

    /// Element-wise combine with another cell of the same shape.
    pub fn zip_mut_with(&mut self, other: &Self, f: &mut impl FnMut(&mut T, &T)) {
        self.w_z.zip_mut_with(&other.w_z, |a, b| f(a, b));
        self.u_z.zip_mut_with(&other.u_z, |a, b| f(a, b));
        self.b_z.zip_mut_with(&other.b_z, |a, b| f(a, b));
        self.w_r.zip_mut_with(&other.w_r, |a, b| f(a, b));
        self.u_r.zip_mut_with(&other.u_r, |a, b| f(a, b));
        self.b_r.zip_mut_with(&other.b_r, |a, b| f(a, b));
        self.w_c.zip_mut_with(&other.w_c, |a, b| f(a, b));
        self.u_c.zip_mut_with(&other.u_c, |a, b| f(a, b));
        self.b_c.zip_mut_with(&other.b_c, |a, b| f(a, b));
    }

    fn flat_into(&self, out: &mut Vec<T>) {
        for m in [&self.w_z, &self.u_z] {
            out.extend(m.iter().copied());
        }
        out.extend(self.b_z.iter().copied());
        for m in [&self.w_r, &self.u_r] {
            out.extend(m.iter().copied());
        }
        out.extend(self.b_r.iter().copied());
        for m in [&self.w_c, &self.u_c] {
            out.extend(m.iter().copied());
        }
        out.extend(self.b_c.iter().copied());
    }

    fn set_from_flat(&mut self, it: &mut impl Iterator<Item = T>) {
        for v in self
            .w_z
            .iter_mut()
            .chain(self.u_z.iter_mut())
            .chain(self.b_z.iter_mut())
            .chain(self.w_r.iter_mut())
            .chain(self.u_r.iter_mut())
            .chain(self.b_r.iter_mut())
            .chain(self.w_c.iter_mut())
            .chain(self.u_c.iter_mut())
            .chain(self.b_c.iter_mut())
        {
            *v = it.next().expect("flat vector too short for cell");
        }
    }
}

/// Cell plus the three decoder heads. The heads have no biases; the cell's
/// biases carry any needed offset.
#[derive(Clone, Debug, PartialEq)]
pub struct GruParams<T> {
    pub cell: GruCell<T>,
    pub dec_x: Array2<T>,
    pub dec_y: Array2<T>,
    pub dec_o: Array2<T>,
}

impl<T: Real> GruParams<T> {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            cell: GruCell::zeros(input, hidden),
            dec_x: Array2::zeros((X_CLASSES, hidden)),
            dec_y: Array2::zeros((Y_CLASSES, hidden)),
            dec_o: Array2::zeros((O_CLASSES, hidden)),
        }
    }

    /// Deterministic initialization from a seed.
    pub fn init(input: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            cell: GruCell::init(input, hidden, &mut rng),
            dec_x: sample_matrix(X_CLASSES, hidden, &mut rng),
            dec_y: sample_matrix(Y_CLASSES, hidden, &mut rng),
            dec_o: sample_matrix(O_CLASSES, hidden, &mut rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.cell.input_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.cell.hidden_dim()
    }

    pub fn n_params(&self) -> usize {
        let d = self.input_dim();
        let h = self.hidden_dim();
        3 * (h * d + h * h + h) + (X_CLASSES + Y_CLASSES + O_CLASSES) * h
    }

    /// All parameters in one fixed-order vector (gates z, r, c, then the
    /// three heads). The order is part of the on-disk format.
    pub fn flat(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.n_params());
        self.cell.flat_into(&mut out);
        for m in [&self.dec_x, &self.dec_y, &self.dec_o] {
            out.extend(m.iter().copied());
        }
        out
    }

    /// Inverse of [`Self::flat`]; panics on length mismatch.
    pub fn set_flat(&mut self, flat: &[T]) {
        assert_eq!(flat.len(), self.n_params(), "flat parameter vector has the wrong length");
        let mut it = flat.iter().copied();
        self.cell.set_from_flat(&mut it);
        for v in self
            .dec_x
            .iter_mut()
            .chain(self.dec_y.iter_mut())
            .chain(self.dec_o.iter_mut())
        {
            *v = it.next().unwrap();
        }
    }

    /// Element-wise combine with another parameter set of the same shape.
    pub fn zip_mut_with(&mut self, other: &Self, mut f: impl FnMut(&mut T, &T)) {
        self.cell.zip_mut_with(&other.cell, &mut f);
        self.dec_x.zip_mut_with(&other.dec_x, |a, b| f(a, b));
        self.dec_y.zip_mut_with(&other.dec_y, |a, b| f(a, b));
        self.dec_o.zip_mut_with(&other.dec_o, |a, b| f(a, b));
    }
}

/// Per-step logits of the three heads.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadLogits<T> {
    pub x: Array1<T>,
    pub y: Array1<T>,
    pub o: Array1<T>,
}

/// Forward pass over a whole sequence, keeping what backward needs.
pub struct Forward<T> {
    pub hidden: Vec<Array1<T>>,
    pub logits: Vec<HeadLogits<T>>,
    caches: Vec<StepCache<T>>,
}

/// Run the recurrence from a zero hidden state over `states`.
pub fn forward<T: Real>(params: &GruParams<T>, states: &[Array1<T>]) -> Forward<T> {
    let mut h = Array1::zeros(params.hidden_dim());
    let mut hidden = Vec::with_capacity(states.len());
    let mut logits = Vec::with_capacity(states.len());
    let mut caches = Vec::with_capacity(states.len());
    for x in states {
        let (h_new, cache) = params.cell.step_cached(x, &h);
        logits.push(HeadLogits {
            x: params.dec_x.dot(&h_new),
            y: params.dec_y.dot(&h_new),
            o: params.dec_o.dot(&h_new),
        });
        caches.push(cache);
        hidden.push(h_new.clone());
        h = h_new;
    }
    Forward { hidden, logits, caches }
}

/// Per-head cross-entropies, each averaged over every step of the sequence.
/// STOP steps contribute zero to the position heads (there is no position to
/// get right) but still count in the averages' denominator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Loss {
    pub x: f64,
    pub y: f64,
    pub o: f64,
}

impl Loss {
    pub fn total(&self) -> f64 {
        WEIGHT_X * self.x + WEIGHT_Y * self.y + WEIGHT_O * self.o
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.o.is_finite()
    }
}

/// Cross-entropy of one softmax head. Max-shifted so that all-equal logits
/// give exactly ln(n).
fn cross_entropy<T: Real>(logits: &Array1<T>, target: usize) -> f64 {
    let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let sum: T = logits.iter().map(|&v| (v - m).exp()).sum();
    (m + sum.ln() - logits[target]).to_f64_lossy()
}

/// Softmax minus one-hot, scaled: the gradient of `scale * CE` in the logits.
fn softmax_grad<T: Real>(logits: &Array1<T>, target: usize, scale: f64) -> Array1<T> {
    let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let mut p = logits.mapv(|v| (v - m).exp());
    let s = p.sum();
    p.mapv_inplace(|v| v / s);
    p[target] -= T::one();
    p.mapv_into(|v| v * T::of(scale))
}

/// Sequence loss from precomputed logits and aligned target actions.
pub fn loss_from_logits<T: Real>(
    logits: &[HeadLogits<T>],
    targets: &[DiscreteAction],
) -> Result<Loss, LearnerError> {
    if logits.len() != targets.len() {
        return Err(LearnerError::LengthMismatch { logits: logits.len(), targets: targets.len() });
    }
    if targets.is_empty() {
        return Err(LearnerError::EmptySequence);
    }
    let mut lx = 0.0;
    let mut ly = 0.0;
    let mut lo = 0.0;
    for (step, (hl, a)) in logits.iter().zip(targets).enumerate() {
        if !a.in_range() {
            return Err(LearnerError::TargetOutOfRange { step });
        }
        if !a.is_stop() {
            lx += cross_entropy(&hl.x, a.x_bin as usize);
            ly += cross_entropy(&hl.y, a.y_bin as usize);
        }
        lo += cross_entropy(&hl.o, a.o_class as usize);
    }
    let n = targets.len() as f64;
    Ok(Loss { x: lx / n, y: ly / n, o: lo / n })
}

/// Loss of one demonstration under `params`.
pub fn loss<T: Real>(params: &GruParams<T>, demo: &EncodedDemo<T>) -> Result<Loss, LearnerError> {
    let fwd = forward(params, &demo.states);
    loss_from_logits(&fwd.logits, &demo.actions)
}

/// Loss plus full parameter gradients for one demonstration, by
/// backpropagation through time.
pub fn loss_and_grads<T: Real>(
    params: &GruParams<T>,
    demo: &EncodedDemo<T>,
) -> Result<(Loss, GruParams<T>), LearnerError> {
    let fwd = forward(params, &demo.states);
    let loss = loss_from_logits(&fwd.logits, &demo.actions)?;
    let n = demo.actions.len();
    let inv = 1.0 / n as f64;
    let mut grads = GruParams::zeros(params.input_dim(), params.hidden_dim());
    let mut dh_next: Array1<T> = Array1::zeros(params.hidden_dim());
    for t in (0..n).rev() {
        let mut dh = dh_next;
        let h = &fwd.hidden[t];
        let hl = &fwd.logits[t];
        let a = demo.actions[t];
        if !a.is_stop() {
            let dlx = softmax_grad(&hl.x, a.x_bin as usize, WEIGHT_X * inv);
            grads.dec_x += &outer(&dlx, h);
            dh += &params.dec_x.t().dot(&dlx);
            let dly = softmax_grad(&hl.y, a.y_bin as usize, WEIGHT_Y * inv);
            grads.dec_y += &outer(&dly, h);
            dh += &params.dec_y.t().dot(&dly);
        }
        let dlo = softmax_grad(&hl.o, a.o_class as usize, WEIGHT_O * inv);
        grads.dec_o += &outer(&dlo, h);
        dh += &params.dec_o.t().dot(&dlo);
        dh_next = params.cell.backward(&fwd.caches[t], &dh, &mut grads.cell);
    }
    Ok((loss, grads))
}

/// Lowest index of the maximum entry; ties break toward the lower index.
pub(crate) fn argmax<T: Real>(v: &Array1<T>) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Greedy action for the latest step of an episode prefix: per-head argmax
/// of the final logits. A direction argmax of 8 means STOP.
pub fn predict<T: Real>(params: &GruParams<T>, states: &[Array1<T>]) -> DiscreteAction {
    assert!(!states.is_empty(), "prediction needs at least one encoded step");
    let fwd = forward(params, states);
    let hl = fwd.logits.last().unwrap();
    DiscreteAction {
        x_bin: argmax(&hl.x) as u8,
        y_bin: argmax(&hl.y) as u8,
        o_class: argmax(&hl.o) as u8,
    }
}
