//! Deterministic benchmark datasets: a list of generated scenes, each with a
//! fixed slate of questions and their ground-truth answers.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{relate_boxes, Relation};
use crate::qa::{Answer, Question, SpatialRel};
use crate::seeds;
use crate::world::{generate_scene, visibilities, Difficulty, Scene};
use crate::{MAX_INSTANCES, N_CLASSES, TAU_VIS};

use super::BenchError;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SCENES_FILE: &str = "scenes.jsonl";
pub const QUESTIONS_FILE: &str = "questions.jsonl";
const DATASET_VERSION: u32 = 1;

// Distinct stream salts so the per-series rng and the scene seed never
// collide even though both mix the same (master_seed, series) pair.
const SERIES_SALT: u64 = 0x5E51;
const SCENE_SALT: u64 = 0x5CEE;

/// How much of the question slate leans on what is actually in the scene:
/// this fraction of existence/counting questions name a present class, and
/// the same fraction of spatial questions describe a truly related pair.
const GROUNDED_FRACTION: f64 = 0.7;

/// How many resamples to attempt before accepting a duplicate question text
/// within one series.
const DEDUP_TRIES: usize = 40;

/// Within the grounded share, how often the pick prefers something currently
/// below the detection threshold. Questions about covered objects are the
/// ones that actually require manipulation, so without this bias most of the
/// benchmark would be answerable from the first look.
const HIDDEN_BIAS: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    /// Number of scene series (one scene and one question slate each).
    pub n_series: usize,
    /// Questions of each type per series.
    pub questions_per_type: usize,
    /// Fractions of series assigned to train/eval/test, in series order.
    pub split: (f64, f64, f64),
    /// Probability that a series uses the easy object count.
    pub easy_fraction: f64,
    /// Root of every random stream in the dataset.
    pub master_seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            n_series: 100,
            questions_per_type: 10,
            split: (0.8, 0.1, 0.1),
            easy_fraction: 0.5,
            master_seed: 0,
        }
    }
}

impl DatasetConfig {
    pub fn questions_per_series(&self) -> usize {
        3 * self.questions_per_type
    }

    fn validate(&self) -> Result<(), BenchError> {
        if self.n_series == 0 {
            return Err(BenchError::InvalidConfig("n_series must be positive".into()));
        }
        if self.questions_per_type == 0 {
            return Err(BenchError::InvalidConfig("questions_per_type must be positive".into()));
        }
        let (a, b, c) = self.split;
        if a < 0.0 || b < 0.0 || c < 0.0 || (a + b + c - 1.0).abs() > 1e-6 {
            return Err(BenchError::InvalidConfig(format!(
                "split fractions must be non-negative and sum to 1, got ({a}, {b}, {c})"
            )));
        }
        if !(0.0..=1.0).contains(&self.easy_fraction) {
            return Err(BenchError::InvalidConfig(format!(
                "easy_fraction must lie in [0, 1], got {}",
                self.easy_fraction
            )));
        }
        Ok(())
    }

    /// Series counts per split. Train and eval round to nearest; test takes
    /// the remainder so the three always partition the series.
    pub fn split_counts(&self) -> (usize, usize, usize) {
        let n = self.n_series;
        let train = ((n as f64 * self.split.0).round() as usize).min(n);
        let eval = ((n as f64 * self.split.1).round() as usize).min(n - train);
        (train, eval, n - train - eval)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Eval,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Eval => "eval",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "eval" => Ok(Split::Eval),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?} (expected train, eval, or test)")),
        }
    }
}

/// Reference to one question of one series.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QRef {
    pub series: usize,
    pub index: usize,
}

/// One benchmark question with its recorded ground truth. The answer is
/// bookkeeping for scoring; nothing downstream feeds it to a policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub series: usize,
    pub index: usize,
    pub text: String,
    #[serde(flatten)]
    pub question: Question,
    pub answer: Answer,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub config: DatasetConfig,
    /// Scene of series i at index i.
    pub scenes: Vec<Scene>,
    /// All questions, ordered by (series, index).
    pub questions: Vec<QuestionRecord>,
}

impl Dataset {
    pub fn scene(&self, series: usize) -> &Scene {
        &self.scenes[series]
    }

    /// Contiguous series range of a split: train first, then eval, then test.
    pub fn split_series(&self, split: Split) -> std::ops::Range<usize> {
        let (train, eval, _) = self.config.split_counts();
        match split {
            Split::Train => 0..train,
            Split::Eval => train..train + eval,
            Split::Test => train + eval..self.config.n_series,
        }
    }

    pub fn questions_in(&self, split: Split) -> impl Iterator<Item = &QuestionRecord> + '_ {
        let range = self.split_series(split);
        self.questions.iter().filter(move |q| range.contains(&q.series))
    }

    pub fn question(&self, series: usize, index: usize) -> Option<&QuestionRecord> {
        let per = self.config.questions_per_series();
        if series >= self.config.n_series || index >= per {
            return None;
        }
        let record = &self.questions[series * per + index];
        debug_assert_eq!((record.series, record.index), (series, index));
        Some(record)
    }

    pub fn save(&self, dir: &Path) -> Result<(), BenchError> {
        fs::create_dir_all(dir)?;
        let manifest = Manifest {
            version: DATASET_VERSION,
            config: self.config,
            n_scenes: self.scenes.len(),
            n_questions: self.questions.len(),
        };
        fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
        fs::write(dir.join(SCENES_FILE), jsonl(&self.scenes)?)?;
        fs::write(dir.join(QUESTIONS_FILE), jsonl(&self.questions)?)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, BenchError> {
        let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
        if manifest.version != DATASET_VERSION {
            return Err(BenchError::Version(manifest.version));
        }
        manifest.config.validate()?;
        let scenes: Vec<Scene> = read_jsonl(&dir.join(SCENES_FILE), SCENES_FILE)?;
        let questions: Vec<QuestionRecord> = read_jsonl(&dir.join(QUESTIONS_FILE), QUESTIONS_FILE)?;
        if scenes.len() != manifest.n_scenes || scenes.len() != manifest.config.n_series {
            return Err(BenchError::Inconsistent(format!(
                "manifest promises {} scenes, file holds {}",
                manifest.config.n_series,
                scenes.len()
            )));
        }
        if questions.len() != manifest.n_questions
            || questions.len() != manifest.config.n_series * manifest.config.questions_per_series()
        {
            return Err(BenchError::Inconsistent(format!(
                "manifest promises {} questions, file holds {}",
                manifest.n_questions,
                questions.len()
            )));
        }
        for (i, q) in questions.iter().enumerate() {
            let per = manifest.config.questions_per_series();
            if (q.series, q.index) != (i / per, i % per) {
                return Err(BenchError::Inconsistent(format!(
                    "question {i} is out of order (series {}, index {})",
                    q.series, q.index
                )));
            }
        }
        Ok(Self { config: manifest.config, scenes, questions })
    }
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    version: u32,
    config: DatasetConfig,
    n_scenes: usize,
    n_questions: usize,
}

fn jsonl<T: Serialize>(items: &[T]) -> Result<String, BenchError> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item)?);
        out.push('\n');
    }
    Ok(out)
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(
    path: &Path,
    name: &'static str,
) -> Result<Vec<T>, BenchError> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| BenchError::Malformed {
                file: name,
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// The answer a perfectly informed judge gives from the true scene state.
pub fn ground_truth_answer(scene: &Scene, question: &Question) -> Answer {
    match question.qtype {
        crate::qa::QuestionType::Existence => {
            if scene.objects.iter().any(|o| o.class_id == question.class_a) {
                Answer::Yes
            } else {
                Answer::No
            }
        }
        crate::qa::QuestionType::Counting => {
            let n = scene.objects.iter().filter(|o| o.class_id == question.class_a).count();
            Answer::Count(n.min(MAX_INSTANCES) as u8)
        }
        crate::qa::QuestionType::Spatial => {
            let class_b = question.class_b.expect("spatial question carries class_b");
            let rel = question.relation.expect("spatial question carries a relation");
            let yes = scene.objects.iter().enumerate().any(|(i, a)| {
                a.class_id == question.class_a
                    && scene.objects.iter().enumerate().any(|(j, b)| {
                        i != j && b.class_id == class_b && {
                            let r = relate_boxes::<f64>(&a.bbox, &b.bbox)
                                .expect("scene boxes are non-degenerate");
                            match rel {
                                SpatialRel::Near => r == Some(Relation::Nearby),
                                SpatialRel::Above => r == Some(Relation::AboveBelow) && a.z > b.z,
                                SpatialRel::Below => r == Some(Relation::AboveBelow) && a.z < b.z,
                            }
                        }
                    })
            });
            if yes {
                Answer::Yes
            } else {
                Answer::No
            }
        }
    }
}

/// Generate the full dataset for a configuration. Deterministic in the
/// configuration alone.
pub fn generate_dataset(cfg: &DatasetConfig) -> Result<Dataset, BenchError> {
    cfg.validate()?;
    let mut scenes = Vec::with_capacity(cfg.n_series);
    let mut questions = Vec::with_capacity(cfg.n_series * cfg.questions_per_series());
    for series in 0..cfg.n_series {
        let mut rng =
            ChaCha8Rng::seed_from_u64(seeds::mix(&[cfg.master_seed, series as u64, SERIES_SALT]));
        let difficulty =
            if rng.random_bool(cfg.easy_fraction) { Difficulty::Easy } else { Difficulty::Hard };
        let scene_seed = seeds::mix(&[cfg.master_seed, series as u64, SCENE_SALT]);
        let scene = generate_scene(scene_seed, difficulty);

        let view = SceneView::of(&scene);
        let mut used = BTreeSet::new();
        let mut index = 0;
        for sampler in [sample_existence, sample_counting, sample_spatial] {
            for _ in 0..cfg.questions_per_type {
                let question = sample_deduped(&view, &mut rng, &mut used, sampler);
                let answer = ground_truth_answer(&scene, &question);
                questions.push(QuestionRecord {
                    series,
                    index,
                    text: question.text(),
                    question,
                    answer,
                });
                index += 1;
            }
        }
        scenes.push(scene);
    }
    Ok(Dataset { config: *cfg, scenes, questions })
}

/// Resample until the question text is new for this series, within a bounded
/// number of tries; tiny scenes may still repeat.
fn sample_deduped(
    view: &SceneView<'_>,
    rng: &mut ChaCha8Rng,
    used: &mut BTreeSet<String>,
    sampler: fn(&SceneView<'_>, &mut ChaCha8Rng) -> Question,
) -> Question {
    let mut question = sampler(view, rng);
    for _ in 0..DEDUP_TRIES {
        if used.insert(question.text()) {
            return question;
        }
        question = sampler(view, rng);
    }
    question
}

fn random_class(rng: &mut ChaCha8Rng) -> u8 {
    rng.random_range(0..N_CLASSES as u8)
}

/// Scene facts the samplers draw from, computed once per series.
struct SceneView<'a> {
    scene: &'a Scene,
    /// Classes with at least one instance, ascending.
    present: Vec<u8>,
    /// Classes with at least one instance below the detection threshold.
    hidden: Vec<u8>,
    /// Cross-class object pairs related under the true boxes.
    pairs: Vec<(usize, usize, Relation)>,
    /// Related pairs with at least one endpoint below the detection threshold.
    covered_pairs: Vec<(usize, usize, Relation)>,
}

impl<'a> SceneView<'a> {
    fn of(scene: &'a Scene) -> Self {
        let vis = visibilities(scene);
        let present: Vec<u8> = scene
            .objects
            .iter()
            .map(|o| o.class_id)
            .collect::<BTreeSet<u8>>()
            .into_iter()
            .collect();
        let hidden: Vec<u8> = scene
            .objects
            .iter()
            .enumerate()
            .filter(|&(i, _)| vis[i] < TAU_VIS)
            .map(|(_, o)| o.class_id)
            .collect::<BTreeSet<u8>>()
            .into_iter()
            .collect();
        let mut pairs = Vec::new();
        for i in 0..scene.objects.len() {
            for j in i + 1..scene.objects.len() {
                let (a, b) = (&scene.objects[i], &scene.objects[j]);
                if a.class_id == b.class_id {
                    continue;
                }
                if let Some(rel) =
                    relate_boxes::<f64>(&a.bbox, &b.bbox).expect("scene boxes are non-degenerate")
                {
                    pairs.push((i, j, rel));
                }
            }
        }
        let covered_pairs: Vec<(usize, usize, Relation)> = pairs
            .iter()
            .copied()
            .filter(|&(i, j, _)| vis[i] < TAU_VIS || vis[j] < TAU_VIS)
            .collect();
        Self { scene, present, hidden, pairs, covered_pairs }
    }
}

fn grounded_class(view: &SceneView<'_>, rng: &mut ChaCha8Rng) -> u8 {
    if rng.random_bool(GROUNDED_FRACTION) && !view.present.is_empty() {
        if !view.hidden.is_empty() && rng.random_bool(HIDDEN_BIAS) {
            view.hidden[rng.random_range(0..view.hidden.len())]
        } else {
            view.present[rng.random_range(0..view.present.len())]
        }
    } else {
        random_class(rng)
    }
}

fn sample_existence(view: &SceneView<'_>, rng: &mut ChaCha8Rng) -> Question {
    Question::existence(grounded_class(view, rng))
}

fn sample_counting(view: &SceneView<'_>, rng: &mut ChaCha8Rng) -> Question {
    Question::counting(grounded_class(view, rng))
}

fn sample_spatial(view: &SceneView<'_>, rng: &mut ChaCha8Rng) -> Question {
    let scene = view.scene;
    if rng.random_bool(GROUNDED_FRACTION) && !view.pairs.is_empty() {
        let pool = if !view.covered_pairs.is_empty() && rng.random_bool(HIDDEN_BIAS) {
            &view.covered_pairs
        } else {
            &view.pairs
        };
        let (i, j, rel) = pool[rng.random_range(0..pool.len())];
        let (a, b) = (&scene.objects[i], &scene.objects[j]);
        match rel {
            Relation::AboveBelow => {
                let (top, bottom) = if a.z > b.z { (a, b) } else { (b, a) };
                if rng.random_bool(0.5) {
                    Question::spatial(top.class_id, SpatialRel::Above, bottom.class_id)
                } else {
                    Question::spatial(bottom.class_id, SpatialRel::Below, top.class_id)
                }
            }
            Relation::Nearby => {
                let (x, y) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
                Question::spatial(x.class_id, SpatialRel::Near, y.class_id)
            }
        }
    } else {
        let class_a = random_class(rng);
        let mut class_b = random_class(rng);
        while class_b == class_a {
            class_b = random_class(rng);
        }
        let rel = match rng.random_range(0..3) {
            0 => SpatialRel::Above,
            1 => SpatialRel::Below,
            _ => SpatialRel::Near,
        };
        Question::spatial(class_a, rel, class_b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::PixelBox;
    use crate::qa::QuestionType;
    use crate::world::ObjectInstance;

    fn small_config() -> DatasetConfig {
        DatasetConfig { n_series: 10, questions_per_type: 3, ..DatasetConfig::default() }
    }

    #[test]
    fn default_config_sizes() {
        let cfg = DatasetConfig::default();
        assert_eq!(cfg.n_series, 100);
        assert_eq!(cfg.questions_per_series(), 30);
        assert_eq!(cfg.split_counts(), (80, 10, 10));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let cfg = DatasetConfig { n_series: 0, ..DatasetConfig::default() };
        assert!(generate_dataset(&cfg).is_err());
        let cfg = DatasetConfig { split: (0.5, 0.1, 0.1), ..DatasetConfig::default() };
        assert!(generate_dataset(&cfg).is_err());
        let cfg = DatasetConfig { easy_fraction: 1.5, ..DatasetConfig::default() };
        assert!(generate_dataset(&cfg).is_err());
    }

    #[test]
    fn generation_is_deterministic_and_complete() {
        let cfg = small_config();
        let a = generate_dataset(&cfg).unwrap();
        let b = generate_dataset(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.scenes.len(), 10);
        assert_eq!(a.questions.len(), 10 * 9);
        for series in 0..10 {
            for qtype in [QuestionType::Existence, QuestionType::Counting, QuestionType::Spatial] {
                let n = a
                    .questions
                    .iter()
                    .filter(|q| q.series == series && q.question.qtype == qtype)
                    .count();
                assert_eq!(n, 3);
            }
        }
        // A different master seed changes the content.
        let c = generate_dataset(&DatasetConfig { master_seed: 1, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn recorded_answers_match_ground_truth() {
        let ds = generate_dataset(&small_config()).unwrap();
        for q in &ds.questions {
            assert_eq!(q.answer, ground_truth_answer(ds.scene(q.series), &q.question));
            assert_eq!(q.text, q.question.text());
        }
    }

    #[test]
    fn question_texts_rarely_repeat_within_a_series() {
        let ds = generate_dataset(&small_config()).unwrap();
        for series in 0..ds.config.n_series {
            let texts: Vec<&str> = ds
                .questions
                .iter()
                .filter(|q| q.series == series)
                .map(|q| q.text.as_str())
                .collect();
            let unique: BTreeSet<&str> = texts.iter().copied().collect();
            assert_eq!(unique.len(), texts.len(), "series {series} repeats a question");
        }
    }

    #[test]
    fn splits_partition_the_series() {
        let ds = generate_dataset(&small_config()).unwrap();
        let train = ds.split_series(Split::Train);
        let eval = ds.split_series(Split::Eval);
        let test = ds.split_series(Split::Test);
        assert_eq!(train, 0..8);
        assert_eq!(eval, 8..9);
        assert_eq!(test, 9..10);
        let total: usize = ds.questions_in(Split::Train).count()
            + ds.questions_in(Split::Eval).count()
            + ds.questions_in(Split::Test).count();
        assert_eq!(total, ds.questions.len());
    }

    #[test]
    fn question_lookup_by_reference() {
        let ds = generate_dataset(&small_config()).unwrap();
        let q = ds.question(3, 7).unwrap();
        assert_eq!((q.series, q.index), (3, 7));
        assert!(ds.question(3, 9).is_none());
        assert!(ds.question(10, 0).is_none());
    }

    #[test]
    fn save_load_roundtrip() {
        let ds = generate_dataset(&small_config()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        ds.save(dir.path()).unwrap();
        let loaded = Dataset::load(dir.path()).unwrap();
        assert_eq!(ds, loaded);
    }

    #[test]
    fn tampered_files_fail_to_load() {
        let ds = generate_dataset(&small_config()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        ds.save(dir.path()).unwrap();
        let scenes_path = dir.path().join(SCENES_FILE);
        let mut text = fs::read_to_string(&scenes_path).unwrap();
        text.push_str("{\"not\": \"a scene\"}\n");
        fs::write(&scenes_path, text).unwrap();
        assert!(Dataset::load(dir.path()).is_err());
    }

    #[test]
    fn ground_truth_spatial_uses_depth_order() {
        let scene = Scene {
            seed: 0,
            difficulty: Difficulty::Easy,
            objects: vec![
                ObjectInstance {
                    id: 0,
                    class_id: 1,
                    instance_id: 0,
                    bbox: PixelBox::new(50, 50, 90, 90),
                    z: 0,
                },
                ObjectInstance {
                    id: 1,
                    class_id: 2,
                    instance_id: 0,
                    bbox: PixelBox::new(60, 60, 100, 100),
                    z: 1,
                },
            ],
        };
        // Heavy overlap: AboveBelow, with class 2 on top.
        let above = Question::spatial(2, SpatialRel::Above, 1);
        assert_eq!(ground_truth_answer(&scene, &above), Answer::Yes);
        let above_rev = Question::spatial(1, SpatialRel::Above, 2);
        assert_eq!(ground_truth_answer(&scene, &above_rev), Answer::No);
        let below = Question::spatial(1, SpatialRel::Below, 2);
        assert_eq!(ground_truth_answer(&scene, &below), Answer::Yes);
        let near = Question::spatial(1, SpatialRel::Near, 2);
        assert_eq!(ground_truth_answer(&scene, &near), Answer::No);
    }

    #[test]
    fn grounded_sampling_mostly_names_present_classes() {
        let ds = generate_dataset(&DatasetConfig {
            n_series: 20,
            questions_per_type: 5,
            ..DatasetConfig::default()
        })
        .unwrap();
        let mut present = 0usize;
        let mut total = 0usize;
        for q in &ds.questions {
            if q.question.qtype != QuestionType::Existence {
                continue;
            }
            total += 1;
            if ds.scene(q.series).objects.iter().any(|o| o.class_id == q.question.class_a) {
                present += 1;
            }
        }
        // With 70% grounded sampling plus chance hits from the uniform path,
        // well over half the existence questions should be answerable Yes.
        assert!(present * 2 > total, "only {present} of {total} grounded");
    }
}
