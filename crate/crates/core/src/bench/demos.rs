//! Expert demonstrations as flat step records: easy to store as JSON lines,
//! and reconstructible bit-for-bit by replaying the actions in the simulator.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::actions::{continuize, DiscreteAction};
use crate::learner::{encode_trajectory, EncodedDemo, EncoderConfig};
use crate::oracle::{demonstrate, Trajectory, TrajectoryStep};
use crate::scalar::Real;
use crate::world::{apply_push, observe};

use super::dataset::{Dataset, QRef, Split};
use super::BenchError;

pub const DEMOS_FILE: &str = "demos.jsonl";

/// Reference to one observation: step `step` of the episode on `series`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObsRef {
    pub series: usize,
    pub step: usize,
}

/// One line of a demo file: trajectory id, step number, where the
/// observation came from, which question was being worked, and the action.
/// Observations themselves are not stored; replay regenerates them.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoStepRecord {
    pub traj: usize,
    pub t: usize,
    pub obs: ObsRef,
    pub question: QRef,
    pub action: DiscreteAction,
}

/// Run the expert over every question of a split, in dataset order.
pub fn demonstrate_questions(
    ds: &Dataset,
    split: Split,
    max_steps: usize,
) -> Vec<(QRef, Trajectory)> {
    ds.questions_in(split)
        .map(|qr| {
            let demo = demonstrate(ds.scene(qr.series), &qr.question, max_steps);
            (QRef { series: qr.series, index: qr.index }, demo.trajectory)
        })
        .collect()
}

/// Flatten trajectories to one record per step.
pub fn to_step_records(trajs: &[(QRef, Trajectory)]) -> Vec<DemoStepRecord> {
    let mut out = Vec::new();
    for (traj_id, (qref, traj)) in trajs.iter().enumerate() {
        for (t, step) in traj.steps.iter().enumerate() {
            out.push(DemoStepRecord {
                traj: traj_id,
                t,
                obs: ObsRef { series: qref.series, step: t },
                question: *qref,
                action: step.action,
            });
        }
    }
    out
}

pub fn save_demos(path: &Path, records: &[DemoStepRecord]) -> Result<(), BenchError> {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn load_demos(path: &Path) -> Result<Vec<DemoStepRecord>, BenchError> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| BenchError::Malformed {
                file: DEMOS_FILE,
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Rebuild full trajectories from step records by replaying the recorded
/// actions on the referenced scenes. The expert recorded exactly the pushes
/// it executed, so the regenerated observations match the originals.
pub fn replay_demos(
    ds: &Dataset,
    records: &[DemoStepRecord],
) -> Result<Vec<(QRef, Trajectory)>, BenchError> {
    let mut out: Vec<(QRef, Trajectory)> = Vec::new();
    let mut cursor = 0usize;
    while cursor < records.len() {
        let traj_id = records[cursor].traj;
        let mut end = cursor;
        while end < records.len() && records[end].traj == traj_id {
            end += 1;
        }
        let group = &records[cursor..end];
        if out.len() != traj_id {
            return Err(BenchError::Inconsistent(format!(
                "trajectory ids must be consecutive from 0, found {traj_id} at position {}",
                out.len()
            )));
        }
        let qref = group[0].question;
        let question = ds
            .question(qref.series, qref.index)
            .ok_or_else(|| {
                BenchError::Inconsistent(format!(
                    "trajectory {traj_id} references unknown question {qref:?}"
                ))
            })?
            .question;
        let mut scene = ds.scene(qref.series).clone();
        let mut steps = Vec::with_capacity(group.len());
        for (t, r) in group.iter().enumerate() {
            if r.t != t || r.question != qref || r.obs != (ObsRef { series: qref.series, step: t })
            {
                return Err(BenchError::Inconsistent(format!(
                    "trajectory {traj_id} step {t} has inconsistent references"
                )));
            }
            let is_last = t + 1 == group.len();
            if r.action.is_stop() != is_last {
                return Err(BenchError::Inconsistent(format!(
                    "trajectory {traj_id} must consist of pushes ending in one STOP"
                )));
            }
            let observation = observe(&scene, t as u32);
            if let Some(push) = continuize(&r.action) {
                apply_push(&mut scene, &push).map_err(|e| {
                    BenchError::Inconsistent(format!(
                        "trajectory {traj_id} step {t} replay failed: {e}"
                    ))
                })?;
            }
            steps.push(TrajectoryStep { observation, action: r.action });
        }
        out.push((qref, Trajectory { question, steps }));
        cursor = end;
    }
    Ok(out)
}

/// Demonstrate a split and encode it for training in one go.
pub fn encode_demo_split<T: Real>(
    ds: &Dataset,
    split: Split,
    max_steps: usize,
    enc: &EncoderConfig,
) -> Vec<EncodedDemo<T>> {
    demonstrate_questions(ds, split, max_steps)
        .iter()
        .map(|(_, traj)| encode_trajectory(traj, enc))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::dataset::{generate_dataset, DatasetConfig};
    use crate::DEFAULT_MAX_STEPS;

    fn tiny_dataset() -> Dataset {
        generate_dataset(&DatasetConfig {
            n_series: 5,
            questions_per_type: 2,
            ..DatasetConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn records_cover_every_step_in_order() {
        let ds = tiny_dataset();
        let trajs = demonstrate_questions(&ds, Split::Train, DEFAULT_MAX_STEPS);
        assert_eq!(trajs.len(), ds.questions_in(Split::Train).count());
        let records = to_step_records(&trajs);
        let total: usize = trajs.iter().map(|(_, t)| t.steps.len()).sum();
        assert_eq!(records.len(), total);
        let mut expected_traj = 0;
        let mut expected_t = 0;
        for r in &records {
            if r.t == 0 && expected_t > 0 {
                expected_traj += 1;
                expected_t = 0;
            }
            assert_eq!((r.traj, r.t), (expected_traj, expected_t));
            expected_t += 1;
        }
    }

    #[test]
    fn save_load_replay_roundtrip() {
        let ds = tiny_dataset();
        let trajs = demonstrate_questions(&ds, Split::Train, DEFAULT_MAX_STEPS);
        let records = to_step_records(&trajs);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(DEMOS_FILE);
        save_demos(&path, &records).unwrap();
        let loaded = load_demos(&path).unwrap();
        assert_eq!(records, loaded);

        // Replay regenerates the observations exactly.
        let replayed = replay_demos(&ds, &loaded).unwrap();
        assert_eq!(replayed, trajs);
    }

    #[test]
    fn corrupted_records_are_rejected() {
        let ds = tiny_dataset();
        let trajs = demonstrate_questions(&ds, Split::Eval, DEFAULT_MAX_STEPS);
        let good = to_step_records(&trajs);

        // A trajectory whose terminal step is not STOP.
        let mut bad = good.clone();
        let last = bad.len() - 1;
        bad[last].action = DiscreteAction::new(0, 0, 0);
        assert!(replay_demos(&ds, &bad).is_err());

        // A hole in the step numbering.
        let mut bad = good.clone();
        bad[0].t = 5;
        assert!(replay_demos(&ds, &bad).is_err());

        // A reference to a question that does not exist.
        let mut bad = good;
        for r in &mut bad {
            if r.traj == 0 {
                r.question.index = 999;
            }
        }
        assert!(replay_demos(&ds, &bad).is_err());
    }

    #[test]
    fn ten_demonstrations_halve_the_training_loss() {
        use crate::learner::{train, TrainConfig};
        let ds = tiny_dataset();
        let mut demos: Vec<EncodedDemo<f64>> =
            encode_demo_split(&ds, Split::Train, DEFAULT_MAX_STEPS, &EncoderConfig::default());
        demos.truncate(10);
        assert_eq!(demos.len(), 10);
        let out = train(&demos, &TrainConfig::default()).unwrap();
        let first = out.curve.first().unwrap().loss.total();
        let last = out.curve.last().unwrap().loss.total();
        assert!(last < 0.5 * first, "loss went {first} -> {last}");
    }

    #[test]
    fn a_single_demonstration_can_be_memorized() {
        use crate::learner::{predict, train, TrainConfig};
        let ds = tiny_dataset();
        let enc = EncoderConfig::default();
        let demos: Vec<EncodedDemo<f64>> =
            encode_demo_split(&ds, Split::Train, DEFAULT_MAX_STEPS, &enc);
        // Pick one demo that actually pushes, so there is something to learn
        // beyond an immediate STOP.
        let demo = demos
            .into_iter()
            .find(|d| d.actions.iter().any(|a| !a.is_stop()))
            .expect("some training demo includes a push");
        let cfg = TrainConfig { epochs: 600, ..TrainConfig::default() };
        let out = train(std::slice::from_ref(&demo), &cfg).unwrap();
        for t in 0..demo.actions.len() {
            let got = predict(&out.params, &demo.states[..=t]);
            let want = demo.actions[t];
            // STOP is STOP regardless of what the masked position heads say.
            if want.is_stop() {
                assert!(got.is_stop(), "step {t}: expected STOP, predicted {got:?}");
            } else {
                assert_eq!(got, want, "step {t}");
            }
        }
    }

    #[test]
    fn encoding_a_split_yields_training_rows() {
        let ds = tiny_dataset();
        let enc = EncoderConfig { grid: 4 };
        let demos: Vec<EncodedDemo<f64>> =
            encode_demo_split(&ds, Split::Eval, DEFAULT_MAX_STEPS, &enc);
        assert_eq!(demos.len(), ds.questions_in(Split::Eval).count());
        for d in &demos {
            assert!(!d.states.is_empty());
            assert_eq!(d.states.len(), d.actions.len());
            assert!(d.actions.last().unwrap().is_stop());
            assert_eq!(d.states[0].len(), enc.state_dim());
        }
    }
}
