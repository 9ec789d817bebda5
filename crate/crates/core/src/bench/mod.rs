//! Benchmark harness: dataset generation, expert demonstration recording,
//! policy episodes, metrics, and frame rendering.

pub mod dataset;
pub mod demos;
pub mod episode;
pub mod metrics;
pub mod render;

use thiserror::Error;

pub use dataset::{
    generate_dataset, ground_truth_answer, Dataset, DatasetConfig, QRef, QuestionRecord, Split,
};
pub use demos::{
    demonstrate_questions, encode_demo_split, load_demos, replay_demos, save_demos, to_step_records,
    DemoStepRecord, ObsRef,
};
pub use episode::{
    evaluate_split, run_episode, EpisodeError, EpisodeResult, LearnedPolicy, OraclePolicy, Policy,
    RandomPolicy, StopPolicy,
};
pub use metrics::{
    imitation_error, imitation_eval, metrics_csv, per_type_metrics, qa_metrics,
    random_imitation_baseline, ImitationMetrics, MetricsError, TypeMetrics,
};
pub use render::{demonstration_frames, scene_svg};

/// Failures while generating, storing, or loading benchmark artifacts.
#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed {file} at line {line}: {message}")]
    Malformed { file: &'static str, line: usize, message: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unsupported dataset version {0}")]
    Version(u32),
    #[error("inconsistent data: {0}")]
    Inconsistent(String),
}
