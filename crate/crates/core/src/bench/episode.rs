//! Closed-loop episodes: a policy looks, optionally pushes, and the answer
//! is read off the final scene graph.

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::actions::{continuize, discretize, DiscreteAction};
use crate::graph::{build_graph, DynamicSceneGraph};
use crate::learner::{encode_state, predict, EncoderConfig, GruParams};
use crate::oracle::{plan_step, TrajectoryStep};
use crate::qa::{answer, Answer, Question};
use crate::scalar::Real;
use crate::world::{apply_push, observe, Observation, Scene, WorldError};
use crate::{N_DIRECTIONS, N_POS_BINS};

use super::dataset::{ground_truth_answer, Dataset, QRef, Split};

/// An acting agent. `decide` sees the raw scene only so privileged policies
/// (the expert) can exist; perception-driven policies must use nothing but
/// the observations and the question.
pub trait Policy {
    /// Reset per-episode state.
    fn begin_episode(&mut self, question: &Question);

    /// Choose the next action given every observation so far (latest last).
    fn decide(
        &mut self,
        scene: &Scene,
        observations: &[Observation],
        question: &Question,
    ) -> DiscreteAction;
}

/// Never pushes: answers from the first observation alone.
pub struct StopPolicy;

impl Policy for StopPolicy {
    fn begin_episode(&mut self, _question: &Question) {}

    fn decide(&mut self, _: &Scene, _: &[Observation], _: &Question) -> DiscreteAction {
        DiscreteAction::STOP
    }
}

/// The demonstration expert, replanning from the true scene every step. The
/// ground truth is captured from the first scene the policy sees: pushes move
/// objects, so it cannot be recomputed later in the episode.
#[derive(Debug, Default)]
pub struct OraclePolicy {
    truth: Option<Answer>,
}

impl Policy for OraclePolicy {
    fn begin_episode(&mut self, _question: &Question) {
        self.truth = None;
    }

    fn decide(&mut self, scene: &Scene, _: &[Observation], question: &Question) -> DiscreteAction {
        let truth = *self.truth.get_or_insert_with(|| ground_truth_answer(scene, question));
        match plan_step(scene, question, truth) {
            Some(push) => discretize(&push),
            None => DiscreteAction::STOP,
        }
    }
}

/// Uniformly random pushes; never stops on its own. The floor any learned
/// policy has to beat.
pub struct RandomPolicy {
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl Policy for RandomPolicy {
    fn begin_episode(&mut self, _question: &Question) {}

    fn decide(&mut self, _: &Scene, _: &[Observation], _: &Question) -> DiscreteAction {
        DiscreteAction::new(
            self.rng.random_range(0..N_POS_BINS as u8),
            self.rng.random_range(0..N_POS_BINS as u8),
            self.rng.random_range(0..N_DIRECTIONS as u8),
        )
    }
}

/// A trained model driving the loop from observations alone.
pub struct LearnedPolicy<T> {
    params: GruParams<T>,
    encoder: EncoderConfig,
    states: Vec<Array1<T>>,
    last: Option<DiscreteAction>,
}

impl<T: Real> LearnedPolicy<T> {
    pub fn new(params: GruParams<T>, encoder: EncoderConfig) -> Self {
        Self { params, encoder, states: Vec::new(), last: None }
    }
}

impl<T: Real> Policy for LearnedPolicy<T> {
    fn begin_episode(&mut self, _question: &Question) {
        self.states.clear();
        self.last = None;
    }

    fn decide(&mut self, _: &Scene, observations: &[Observation], question: &Question) -> DiscreteAction {
        let obs = observations.last().expect("decide is called with at least one observation");
        self.states.push(encode_state(obs, question, self.last, &self.encoder));
        let action = predict(&self.params, &self.states);
        self.last = Some(action);
        action
    }
}

#[derive(Debug, Error)]
pub enum EpisodeError {
    #[error("policy returned out-of-range action {action:?} at step {step}")]
    InvalidAction { step: usize, action: DiscreteAction },
    #[error(transparent)]
    World(#[from] WorldError),
}

/// Everything one episode produced.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeResult {
    pub question: Question,
    pub truth: Answer,
    pub predicted: Answer,
    pub steps: Vec<TrajectoryStep>,
    pub graphs: DynamicSceneGraph,
    pub final_scene: Scene,
}

impl EpisodeResult {
    pub fn correct(&self) -> bool {
        self.predicted == self.truth
    }

    pub fn push_count(&self) -> usize {
        self.steps.iter().filter(|s| !s.action.is_stop()).count()
    }
}

/// Run one question to completion: observe, let the policy act until STOP or
/// the budget runs out, then answer from the final graph.
pub fn run_episode(
    scene: &Scene,
    question: &Question,
    policy: &mut dyn Policy,
    max_steps: usize,
) -> Result<EpisodeResult, EpisodeError> {
    policy.begin_episode(question);
    let mut cur = scene.clone();
    let mut observations: Vec<Observation> = Vec::new();
    let mut graphs = DynamicSceneGraph::new();
    let mut steps = Vec::new();
    let mut t = 0usize;
    loop {
        let obs = observe(&cur, t as u32);
        graphs.push_frame(build_graph(&obs));
        observations.push(obs.clone());
        // The budget counts pushes; when it is spent the episode ends as if
        // the policy had stopped.
        let action = if t >= max_steps {
            DiscreteAction::STOP
        } else {
            policy.decide(&cur, &observations, question)
        };
        if !action.in_range() {
            return Err(EpisodeError::InvalidAction { step: t, action });
        }
        steps.push(TrajectoryStep { observation: obs, action });
        if action.is_stop() {
            break;
        }
        let push = continuize(&action).expect("non-STOP actions have a push form");
        apply_push(&mut cur, &push)?;
        t += 1;
    }
    let final_graph = graphs.final_graph().expect("the episode observed at least once");
    let predicted = answer(final_graph, question);
    let truth = ground_truth_answer(scene, question);
    Ok(EpisodeResult { question: *question, truth, predicted, steps, graphs, final_scene: cur })
}

/// Run every question of a split under one policy.
pub fn evaluate_split(
    ds: &Dataset,
    split: Split,
    policy: &mut dyn Policy,
    max_steps: usize,
) -> Result<Vec<(QRef, EpisodeResult)>, EpisodeError> {
    let mut out = Vec::new();
    for qr in ds.questions_in(split) {
        let result = run_episode(ds.scene(qr.series), &qr.question, policy, max_steps)?;
        out.push((QRef { series: qr.series, index: qr.index }, result));
    }
    Ok(out)
}
