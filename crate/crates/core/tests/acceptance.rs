//! Release gates for the full pipeline, one test per gate. Each prints a
//! single `[n/9] name: PASS/FAIL (detail)` line; run with `--nocapture` to
//! see the lines for passing gates too.
//!
//! The heavier gates share fixtures: one fresh question set drives the expert
//! evaluations, and one demonstration corpus feeds the factored trainer, the
//! joint-head control, and the held-out comparison.

use std::sync::LazyLock;

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pushqa::actions::{continuize, discretize, DiscreteAction};
use pushqa::bench::{
    demonstrate_questions, encode_demo_split, evaluate_split, generate_dataset, imitation_eval,
    random_imitation_baseline, save_demos, to_step_records, Dataset, DatasetConfig, EpisodeResult,
    OraclePolicy, QRef, Split,
};
use pushqa::graph::{classify_relation, Relation};
use pushqa::learner::{
    encode_trajectory, loss, loss_and_grads, save_checkpoint, train, train_joint, EncodedDemo,
    EncoderConfig, GruParams, TrainConfig, Trained,
};
use pushqa::oracle::Trajectory;
use pushqa::qa::QuestionType;
use pushqa::DEFAULT_MAX_STEPS;

/// Print the verdict line for one gate, then fail the test if it did not hold.
fn gate(n: usize, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("[{n}/9] {name}: {verdict} ({detail})");
    assert!(pass, "[{n}/9] {name}: FAIL ({detail})");
}

// Fresh all-easy questions never used for training: 10 series, 10 questions
// per type per series, 300 questions total.
static FRESH: LazyLock<Dataset> = LazyLock::new(|| {
    generate_dataset(&DatasetConfig {
        n_series: 10,
        questions_per_type: 10,
        split: (0.0, 0.0, 1.0),
        easy_fraction: 1.0,
        master_seed: 0xFE57,
    })
    .expect("valid config")
});

fn expert_eval(max_steps: usize) -> Vec<(QRef, EpisodeResult)> {
    evaluate_split(&FRESH, Split::Test, &mut OraclePolicy::default(), max_steps).expect("expert episodes run")
}

// The full-budget expert evaluation is shared by gates 4 and 5.
static EXPERT_FULL: LazyLock<Vec<(QRef, EpisodeResult)>> =
    LazyLock::new(|| expert_eval(DEFAULT_MAX_STEPS));

struct DemoCorpus {
    train: Vec<EncodedDemo<f64>>,
    heldout: Vec<Trajectory>,
}

// Demonstration corpus for the learner gates: 200 expert trajectories to fit
// on and 50 held-out ones from series the trainer never saw.
static CORPUS: LazyLock<DemoCorpus> = LazyLock::new(|| {
    let ds = generate_dataset(&DatasetConfig {
        n_series: 10,
        questions_per_type: 10,
        split: (0.8, 0.1, 0.1),
        easy_fraction: 1.0,
        master_seed: 0x11A8,
    })
    .expect("valid config");
    let enc = EncoderConfig::default();
    let mut train: Vec<EncodedDemo<f64>> =
        demonstrate_questions(&ds, Split::Train, DEFAULT_MAX_STEPS)
            .iter()
            .map(|(_, traj)| encode_trajectory(traj, &enc))
            .collect();
    train.truncate(200);
    let mut heldout: Vec<Trajectory> = demonstrate_questions(&ds, Split::Eval, DEFAULT_MAX_STEPS)
        .into_iter()
        .map(|(_, traj)| traj)
        .collect();
    heldout.extend(
        demonstrate_questions(&ds, Split::Test, DEFAULT_MAX_STEPS).into_iter().map(|(_, t)| t),
    );
    heldout.truncate(50);
    assert_eq!(train.len(), 200, "train split yields at least 200 demonstrations");
    assert_eq!(heldout.len(), 50, "eval+test splits yield at least 50 demonstrations");
    DemoCorpus { train, heldout }
});

// One default-config training run, shared by gates 6 and 8.
static TRAINED: LazyLock<Trained<f64>> =
    LazyLock::new(|| train(&CORPUS.train, &TrainConfig::default()).expect("training succeeds"));

#[test]
fn relation_rules_match_exhaustive_truth_table() {
    // Restate the four relation cases as independent predicates so the test
    // also proves they are exhaustive and mutually exclusive.
    let mut checked = 0usize;
    let mut pass = true;
    for k in 0..=100u32 {
        for j in 0..=40u32 {
            let iou = f64::from(k) * 0.01;
            let l = f64::from(j) * 0.05;
            let stacked = iou >= 0.5 || (iou < 0.5 && l < 0.5);
            let nearby = iou < 0.5 && (0.5..1.0).contains(&l);
            let faraway = iou < 0.5 && l >= 1.0;
            if usize::from(stacked) + usize::from(nearby) + usize::from(faraway) != 1 {
                pass = false;
            }
            let expected = if stacked {
                Some(Relation::AboveBelow)
            } else if nearby {
                Some(Relation::Nearby)
            } else {
                None
            };
            if classify_relation(iou, l) != expected {
                pass = false;
            }
            checked += 1;
        }
    }
    gate(1, "pairwise relation rule table", pass, &format!("{checked} grid points, exact"));
}

#[test]
fn push_discretization_roundtrips_every_cell() {
    let mut checked = 0usize;
    let mut pass = true;
    for x in 0..28u8 {
        for y in 0..28u8 {
            for o in 0..8u8 {
                let a = DiscreteAction::new(x, y, o);
                let push = continuize(&a).expect("non-STOP actions continuize");
                if discretize(&push) != a {
                    pass = false;
                }
                checked += 1;
            }
        }
    }
    gate(2, "push action grid roundtrip", pass, &format!("{checked} actions, exact"));
}

#[test]
fn analytic_gradients_match_finite_differences() {
    const D: usize = 8;
    const H: usize = 4;
    const LEN: usize = 3;
    const STEP: f64 = 1e-5;
    let mut worst = 0.0f64;
    for inst in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0xACCE55 + inst);
        let states: Vec<Array1<f64>> = (0..LEN)
            .map(|_| Array1::from_iter((0..D).map(|_| rng.random_range(-1.0..1.0))))
            .collect();
        let mut actions: Vec<DiscreteAction> = (0..LEN - 1)
            .map(|_| {
                DiscreteAction::new(
                    rng.random_range(0..28),
                    rng.random_range(0..28),
                    rng.random_range(0..8),
                )
            })
            .collect();
        actions.push(DiscreteAction::STOP);
        let demo = EncodedDemo { states, actions };
        let params = GruParams::<f64>::init(D, H, 7700 + inst);
        let (_, grads) = loss_and_grads(&params, &demo).expect("well-formed demo");
        let analytic = grads.flat();
        let base = params.flat();
        let mut probe = params.clone();
        let mut flat = base.clone();
        for i in 0..base.len() {
            flat[i] = base[i] + STEP;
            probe.set_flat(&flat);
            let up = loss(&probe, &demo).expect("well-formed demo").total();
            flat[i] = base[i] - STEP;
            probe.set_flat(&flat);
            let down = loss(&probe, &demo).expect("well-formed demo").total();
            flat[i] = base[i];
            let numeric = (up - down) / (2.0 * STEP);
            let scale = numeric.abs().max(analytic[i].abs()).max(1e-6);
            worst = worst.max((numeric - analytic[i]).abs() / scale);
        }
    }
    gate(
        3,
        "backprop vs central differences",
        worst < 1e-4,
        &format!("max relative error {worst:.2e} over 20 instances"),
    );
}

fn accuracy<'a>(results: impl IntoIterator<Item = &'a EpisodeResult>) -> f64 {
    let mut n = 0usize;
    let mut correct = 0usize;
    for r in results {
        n += 1;
        correct += usize::from(r.correct());
    }
    correct as f64 / n as f64
}

#[test]
fn expert_accuracy_on_fresh_questions() {
    let results = &*EXPERT_FULL;
    let per_type = |qt: QuestionType| {
        accuracy(results.iter().map(|(_, r)| r).filter(|r| r.question.qtype == qt))
    };
    let existence = per_type(QuestionType::Existence);
    let counting = per_type(QuestionType::Counting);
    let spatial = per_type(QuestionType::Spatial);
    let pass = existence >= 0.95 && counting >= 0.95 && spatial >= 0.85;
    gate(
        4,
        "expert accuracy on fresh questions",
        pass,
        &format!(
            "existence {existence:.3} (need 0.95), counting {counting:.3} (need 0.95), \
             spatial {spatial:.3} (need 0.85), n = {}",
            results.len()
        ),
    );
}

#[test]
fn accuracy_grows_with_push_budget() {
    let a0 = accuracy(expert_eval(0).iter().map(|(_, r)| r));
    let a1 = accuracy(expert_eval(1).iter().map(|(_, r)| r));
    let a5 = accuracy(EXPERT_FULL.iter().map(|(_, r)| r));
    let pass = a0 <= a1 && a1 <= a5 && a5 - a0 >= 0.10;
    gate(
        5,
        "accuracy vs push budget",
        pass,
        &format!("budget 0: {a0:.3}, budget 1: {a1:.3}, budget 5: {a5:.3}, need +0.10 total"),
    );
}

#[test]
fn imitation_training_converges_per_head() {
    let trained = &*TRAINED;
    let first = trained.curve.first().expect("curve has epochs").loss;
    let last = trained.curve.last().expect("curve has epochs").loss;
    let halved = last.total() < 0.5 * first.total();
    let heads = last.x < first.x && last.y < first.y && last.o < first.o;
    gate(
        6,
        "imitation loss convergence",
        halved && heads,
        &format!(
            "total {:.3} -> {:.3} (need < {:.3}); x {:.3} -> {:.3}, y {:.3} -> {:.3}, \
             o {:.3} -> {:.3}",
            first.total(),
            last.total(),
            0.5 * first.total(),
            first.x,
            last.x,
            first.y,
            last.y,
            first.o,
            last.o,
        ),
    );
}

#[test]
fn factored_heads_outtrain_joint_classifier() {
    let joint = train_joint(&CORPUS.train, &TrainConfig::default()).expect("training succeeds");
    let joint_final = joint.curve.last().expect("curve has epochs").loss;
    let factored_final = TRAINED.curve.last().expect("curve has epochs").loss.total();
    let pass = joint_final >= 1.2 * factored_final;
    gate(
        7,
        "factored vs joint action space",
        pass,
        &format!(
            "joint final {joint_final:.3}, factored final {factored_final:.3}, \
             ratio {:.2} (need >= 1.2)",
            joint_final / factored_final
        ),
    );
}

#[test]
fn learned_policy_beats_random_on_held_out_demos() {
    let enc = EncoderConfig::default();
    let model = imitation_eval(&TRAINED.params, &enc, &CORPUS.heldout);
    let random = random_imitation_baseline(&CORPUS.heldout, 0xBA5E);
    let unit = [model.dis_e, model.a_e, random.dis_e, random.a_e]
        .iter()
        .all(|v| (0.0..=1.0).contains(v));
    let better = model.dis_e <= 0.8 * random.dis_e && model.a_e <= 0.8 * random.a_e;
    gate(
        8,
        "learned policy vs random baseline",
        unit && better,
        &format!(
            "position error {:.3} vs random {:.3}, direction error {:.3} vs random {:.3}, \
             need 20% under random, {} scored pushes",
            model.dis_e, random.dis_e, model.a_e, random.a_e, model.n
        ),
    );
}

#[test]
fn pipeline_artifacts_are_byte_reproducible() {
    let cfg = DatasetConfig {
        n_series: 4,
        questions_per_type: 2,
        master_seed: 99,
        ..DatasetConfig::default()
    };
    let run = |dir: &std::path::Path| {
        let ds = generate_dataset(&cfg).expect("valid config");
        ds.save(dir).expect("dataset saves");
        let records = to_step_records(&demonstrate_questions(&ds, Split::Train, DEFAULT_MAX_STEPS));
        save_demos(&dir.join("demos.jsonl"), &records).expect("demos save");
        let enc = EncoderConfig { grid: 4 };
        let demos: Vec<EncodedDemo<f64>> =
            encode_demo_split(&ds, Split::Train, DEFAULT_MAX_STEPS, &enc);
        let model = train(&demos, &TrainConfig { hidden: 8, epochs: 3, ..TrainConfig::default() })
            .expect("training succeeds");
        save_checkpoint(&dir.join("model.json"), &model.params, &enc).expect("checkpoint saves");
    };
    let a = tempfile::tempdir().expect("tempdir");
    let b = tempfile::tempdir().expect("tempdir");
    run(a.path());
    run(b.path());
    let mut pass = true;
    let mut compared = Vec::new();
    for file in ["manifest.json", "scenes.jsonl", "questions.jsonl", "demos.jsonl", "model.json"] {
        let left = std::fs::read(a.path().join(file)).expect("artifact exists");
        let right = std::fs::read(b.path().join(file)).expect("artifact exists");
        if left != right {
            pass = false;
        }
        compared.push(format!("{file} ({} bytes)", left.len()));
    }
    gate(9, "byte-identical reruns", pass, &compared.join(", "));
}
