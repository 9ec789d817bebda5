//! `pushqa`: drive the cluttered-bin question-answering benchmark from the
//! shell. Subcommands cover the whole pipeline: generate a dataset, record
//! expert demonstrations, train the imitation model, evaluate policies,
//! sweep the push budget, and render episodes as SVG frames.

mod config;

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use pushqa::bench::{
    demonstrate_questions, demonstration_frames, evaluate_split, generate_dataset, imitation_eval,
    load_demos, metrics_csv, per_type_metrics, random_imitation_baseline, replay_demos, save_demos,
    scene_svg, to_step_records, Dataset, LearnedPolicy, OraclePolicy, Policy, Split, StopPolicy,
};
use pushqa::learner::{
    curve_csv, encode_trajectory, load_checkpoint, save_checkpoint, train, EncodedDemo,
    EncoderConfig,
};
use pushqa::oracle::demonstrate;
use pushqa::qa::QuestionType;
use pushqa::Scalar;

#[derive(Parser)]
#[command(
    name = "pushqa",
    version,
    about = "Benchmark for answering questions about cluttered bins by pushing objects"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset directory (scenes, questions, manifest).
    Gen(GenArgs),
    /// Record expert demonstrations for one split as a JSONL file.
    Demo(DemoArgs),
    /// Train the imitation model on recorded demonstrations.
    Train(TrainArgs),
    /// Run a policy over a split and write QA metrics as CSV.
    Eval(EvalArgs),
    /// Sweep the push budget and report accuracy per budget.
    Ablate(AblateArgs),
    /// Render one question's expert episode as SVG frames.
    Render(RenderArgs),
}

#[derive(Args)]
struct GenArgs {
    /// TOML config file; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory to write the dataset into (created if missing).
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    n_series: Option<usize>,
    #[arg(long)]
    questions_per_type: Option<usize>,
    /// Train/eval/test fractions, e.g. 0.8,0.1,0.1.
    #[arg(long, value_parser = config::parse_fractions)]
    split: Option<(f64, f64, f64)>,
    #[arg(long)]
    easy_fraction: Option<f64>,
    #[arg(long)]
    master_seed: Option<u64>,
}

#[derive(Args)]
struct DemoArgs {
    /// TOML config file; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset directory written by `gen`.
    #[arg(long)]
    data: PathBuf,
    /// Which split to demonstrate.
    #[arg(long, default_value = "train")]
    split: Split,
    /// Push budget per question.
    #[arg(long)]
    max_steps: Option<usize>,
    /// Output file; defaults to demos.jsonl inside the dataset directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// TOML config file; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset directory written by `gen`.
    #[arg(long)]
    data: PathBuf,
    /// Demonstration file; defaults to demos.jsonl inside the dataset
    /// directory.
    #[arg(long)]
    demos: Option<PathBuf>,
    /// Where to write the model checkpoint.
    #[arg(long, default_value = "model.json")]
    model: PathBuf,
    /// Where to write the loss curve.
    #[arg(long, default_value = "curve.csv")]
    curve: PathBuf,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Side length of the encoder's downsampled visual grid.
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum PolicyKind {
    /// The full-knowledge expert.
    Oracle,
    /// A trained model (requires --model).
    Learned,
    /// Answer from the first look without pushing.
    Stop,
}

#[derive(Args)]
struct EvalArgs {
    /// TOML config file; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset directory written by `gen`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "test")]
    split: Split,
    #[arg(long, value_enum, default_value_t = PolicyKind::Oracle)]
    policy: PolicyKind,
    /// Checkpoint for --policy learned.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    max_steps: Option<usize>,
    /// Where to write per-type accuracy/precision/recall.
    #[arg(long, default_value = "metrics.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct AblateArgs {
    /// Dataset directory written by `gen`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "test")]
    split: Split,
    /// Push budgets to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [0usize, 1, 5])]
    steps: Vec<usize>,
    /// Where to write accuracy per budget and question type.
    #[arg(long, default_value = "ablation.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    /// Dataset directory written by `gen`.
    #[arg(long)]
    data: PathBuf,
    /// Which scene series to draw.
    #[arg(long)]
    series: usize,
    /// Question index within the series; omit to draw the scene alone.
    #[arg(long)]
    question: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
    /// Directory for the SVG files (created if missing).
    #[arg(long)]
    out: PathBuf,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Gen(a) => gen(a),
        Command::Demo(a) => demo(a),
        Command::Train(a) => run_train(a),
        Command::Eval(a) => eval(a),
        Command::Ablate(a) => ablate(a),
        Command::Render(a) => render(a),
    }
}

fn load_dataset(dir: &PathBuf) -> Result<Dataset> {
    Dataset::load(dir).with_context(|| format!("loading dataset from {}", dir.display()))
}

fn gen(a: GenArgs) -> Result<()> {
    let file = config::FileConfig::load(a.config.as_deref())?;
    let cfg = config::dataset_config(
        &file.dataset,
        a.n_series,
        a.questions_per_type,
        a.split,
        a.easy_fraction,
        a.master_seed,
    );
    let ds = generate_dataset(&cfg)?;
    fs::create_dir_all(&a.out)
        .with_context(|| format!("creating {}", a.out.display()))?;
    ds.save(&a.out)?;
    let (train_n, eval_n, test_n) = cfg.split_counts();
    println!(
        "wrote {} series ({} questions) to {} [split {}/{}/{}]",
        cfg.n_series,
        cfg.n_series * cfg.questions_per_series(),
        a.out.display(),
        train_n,
        eval_n,
        test_n
    );
    Ok(())
}

fn demo(a: DemoArgs) -> Result<()> {
    let file = config::FileConfig::load(a.config.as_deref())?;
    let max_steps = config::max_steps(a.max_steps, file.demo.max_steps);
    let ds = load_dataset(&a.data)?;
    let trajs = demonstrate_questions(&ds, a.split, max_steps);
    let records = to_step_records(&trajs);
    let pushes: usize = trajs.iter().map(|(_, t)| t.push_count()).sum();
    let out = a.out.unwrap_or_else(|| a.data.join(pushqa::bench::demos::DEMOS_FILE));
    save_demos(&out, &records)?;
    println!(
        "recorded {} trajectories ({} steps, {} pushes) for split {} to {}",
        trajs.len(),
        records.len(),
        pushes,
        a.split,
        out.display()
    );
    Ok(())
}

fn run_train(a: TrainArgs) -> Result<()> {
    let file = config::FileConfig::load(a.config.as_deref())?;
    let cfg = config::train_config(&file.train, a.hidden, a.lr, a.momentum, a.epochs, a.seed);
    let grid = a.grid.or(file.train.grid).unwrap_or(EncoderConfig::default().grid);
    let enc = EncoderConfig { grid };

    let ds = load_dataset(&a.data)?;
    let demos_path = a.demos.unwrap_or_else(|| a.data.join(pushqa::bench::demos::DEMOS_FILE));
    let records = load_demos(&demos_path)
        .with_context(|| format!("loading demos from {}", demos_path.display()))?;
    let trajs = replay_demos(&ds, &records)?;
    let encoded: Vec<EncodedDemo<Scalar>> =
        trajs.iter().map(|(_, t)| encode_trajectory(t, &enc)).collect();

    let trained = train(&encoded, &cfg)?;
    save_checkpoint(&a.model, &trained.params, &enc)?;
    fs::write(&a.curve, curve_csv(&trained.curve))
        .with_context(|| format!("writing {}", a.curve.display()))?;

    let first = trained.curve.first().expect("training ran at least one epoch");
    let last = trained.curve.last().expect("training ran at least one epoch");
    println!(
        "trained on {} demos for {} epochs: loss {:.4} -> {:.4} (x {:.4}, y {:.4}, o {:.4})",
        encoded.len(),
        cfg.epochs,
        first.loss.total(),
        last.loss.total(),
        last.loss.x,
        last.loss.y,
        last.loss.o
    );
    println!("model: {}  curve: {}", a.model.display(), a.curve.display());
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let file = config::FileConfig::load(a.config.as_deref())?;
    let max_steps = config::max_steps(a.max_steps, file.eval.max_steps);
    let ds = load_dataset(&a.data)?;

    let mut learned_encoder = None;
    let mut policy: Box<dyn Policy> = match a.policy {
        PolicyKind::Oracle => Box::new(OraclePolicy::default()),
        PolicyKind::Stop => Box::new(StopPolicy),
        PolicyKind::Learned => {
            let Some(model) = &a.model else {
                bail!("--policy learned requires --model");
            };
            let (params, enc) = load_checkpoint::<Scalar>(model)
                .with_context(|| format!("loading checkpoint {}", model.display()))?;
            learned_encoder = Some((params.clone(), enc));
            Box::new(LearnedPolicy::new(params, enc))
        }
    };

    let results = evaluate_split(&ds, a.split, policy.as_mut(), max_steps)?;
    if results.is_empty() {
        bail!("split {} contains no questions", a.split);
    }
    let rows = per_type_metrics(results.iter().map(|(_, r)| r));
    let csv = metrics_csv(&rows);
    fs::write(&a.out, &csv).with_context(|| format!("writing {}", a.out.display()))?;
    print!("{csv}");

    let correct = results.iter().filter(|(_, r)| r.correct()).count();
    println!(
        "overall {}/{} correct ({:.3}) at max_steps {}",
        correct,
        results.len(),
        correct as f64 / results.len() as f64,
        max_steps
    );

    // A learned policy is also scored on how closely it imitates the expert,
    // with a uniform-random baseline for scale.
    if let Some((params, enc)) = learned_encoder {
        let trajs: Vec<_> = demonstrate_questions(&ds, a.split, max_steps)
            .into_iter()
            .map(|(_, t)| t)
            .collect();
        let model = imitation_eval(&params, &enc, &trajs);
        let random = random_imitation_baseline(&trajs, 0);
        println!(
            "imitation over {} expert pushes: dis_e {:.4} a_e {:.4} (random {:.4} / {:.4})",
            model.n, model.dis_e, model.a_e, random.dis_e, random.a_e
        );
    }
    Ok(())
}

fn ablate(a: AblateArgs) -> Result<()> {
    if a.steps.is_empty() {
        bail!("--steps needs at least one budget");
    }
    let ds = load_dataset(&a.data)?;
    let mut csv = String::from("max_steps,qtype,n,accuracy\n");
    for &budget in &a.steps {
        let results = evaluate_split(&ds, a.split, &mut OraclePolicy::default(), budget)?;
        if results.is_empty() {
            bail!("split {} contains no questions", a.split);
        }
        for (qtype, m) in per_type_metrics(results.iter().map(|(_, r)| r)) {
            let name = match qtype {
                QuestionType::Existence => "existence",
                QuestionType::Counting => "counting",
                QuestionType::Spatial => "spatial",
            };
            csv.push_str(&format!("{budget},{name},{},{}\n", m.n, m.accuracy));
        }
        let correct = results.iter().filter(|(_, r)| r.correct()).count();
        let overall = correct as f64 / results.len() as f64;
        csv.push_str(&format!("{budget},all,{},{overall}\n", results.len()));
        println!("max_steps {budget}: overall accuracy {overall:.3}");
    }
    fs::write(&a.out, csv).with_context(|| format!("writing {}", a.out.display()))?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn render(a: RenderArgs) -> Result<()> {
    let ds = load_dataset(&a.data)?;
    if a.series >= ds.scenes.len() {
        bail!("series {} out of range (dataset has {})", a.series, ds.scenes.len());
    }
    fs::create_dir_all(&a.out)
        .with_context(|| format!("creating {}", a.out.display()))?;
    let scene = ds.scene(a.series);

    let Some(index) = a.question else {
        let path = a.out.join("scene.svg");
        fs::write(&path, scene_svg(scene, None))?;
        println!("wrote {}", path.display());
        return Ok(());
    };

    let Some(record) = ds.question(a.series, index) else {
        bail!("series {} has no question {}", a.series, index);
    };
    let max_steps = a.max_steps.unwrap_or(pushqa::DEFAULT_MAX_STEPS);
    let demo = demonstrate(scene, &record.question, max_steps);
    let frames = demonstration_frames(scene, &demo.trajectory.steps);
    for (i, svg) in frames.iter().enumerate() {
        let path = a.out.join(format!("frame_{i:03}.svg"));
        fs::write(&path, svg)?;
    }
    println!(
        "{} -> {:?}: wrote {} frames to {}",
        record.text,
        record.answer,
        frames.len(),
        a.out.display()
    );
    Ok(())
}
