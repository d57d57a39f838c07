//! Command-line surface for the segmentation toolkit: dataset generation,
//! training, prediction, evaluation, the split/train/evaluate protocol,
//! solver benchmarks, and loss property checks.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use supseg_core::admm::ADMMParams;
use supseg_core::bench::{bench, BenchMethod};
use supseg_core::experiment::{run_experiment, select_c, ExperimentConfig};
use supseg_core::losses::{biconvex_c_profile, LossFunction};
use supseg_core::model::GridShape;
use supseg_core::oracle::{check_biconvex, check_supermodular};
use supseg_core::raster::write_label_map;
use supseg_core::ssvm::{evaluate_model, predict, train, Model, Sample, TrainConfig};
use supseg_core::synth::{generate, StructureKind, SyntheticConfig};

#[derive(Parser)]
#[command(
    name = "supseg",
    version,
    about = "Binary segmentation with max-margin training under supermodular losses"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory
    Gen(GenArgs),
    /// Train a model on a generated dataset
    Train(TrainArgs),
    /// Run one sample through a model and write the prediction raster
    Predict(PredictArgs),
    /// Evaluate a model on a dataset under one or more losses
    Eval(EvalArgs),
    /// Train/test over seeded splits and print the loss cross table
    RunExperiment(ExperimentArgs),
    /// Time the subproblem solvers and write CSV
    Bench(BenchArgs),
    /// Check the structural properties a loss is supposed to have
    Verify(VerifyArgs),
}

fn parse_grid(text: &str) -> std::result::Result<GridShape, String> {
    let (w, h) = text
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got {text:?}"))?;
    let width: usize = w
        .trim()
        .parse()
        .map_err(|_| format!("bad width in {text:?}"))?;
    let height: usize = h
        .trim()
        .parse()
        .map_err(|_| format!("bad height in {text:?}"))?;
    GridShape::new(width, height).map_err(|e| e.to_string())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum LossArg {
    Hamming,
    Delta8,
    Square,
    Biconvex,
    Iou,
}

impl std::fmt::Display for LossArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            LossArg::Hamming => "hamming",
            LossArg::Delta8 => "delta8",
            LossArg::Square => "square",
            LossArg::Biconvex => "biconvex",
            LossArg::Iou => "iou",
        };
        f.write_str(name)
    }
}

impl LossArg {
    fn build(self, gamma: f64, shape: GridShape) -> Result<LossFunction> {
        Ok(match self {
            LossArg::Hamming => LossFunction::Hamming,
            LossArg::Delta8 => LossFunction::delta8_grid(gamma, shape)?,
            LossArg::Square => LossFunction::square_default(),
            LossArg::Biconvex => LossFunction::BiconvexC,
            LossArg::Iou => LossFunction::IouEval,
        })
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StructureArg {
    Polylines,
    Bars,
    Blobs,
}

impl std::fmt::Display for StructureArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            StructureArg::Polylines => "polylines",
            StructureArg::Bars => "bars",
            StructureArg::Blobs => "blobs",
        };
        f.write_str(name)
    }
}

impl From<StructureArg> for StructureKind {
    fn from(value: StructureArg) -> Self {
        match value {
            StructureArg::Polylines => StructureKind::Polylines,
            StructureArg::Bars => StructureKind::Bars,
            StructureArg::Blobs => StructureKind::Blobs,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Sortscan,
    Minnorm,
}

impl std::fmt::Display for MethodArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            MethodArg::Sortscan => "sortscan",
            MethodArg::Minnorm => "minnorm",
        };
        f.write_str(name)
    }
}

impl From<MethodArg> for BenchMethod {
    fn from(value: MethodArg) -> Self {
        match value {
            MethodArg::Sortscan => BenchMethod::Symmetric,
            MethodArg::Minnorm => BenchMethod::MinNorm,
        }
    }
}

/// A generated dataset on disk: the config it came from plus the samples.
#[derive(Serialize, Deserialize)]
struct Dataset {
    config: SyntheticConfig,
    samples: Vec<Sample>,
}

fn dataset_file(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join("dataset.json")
    } else {
        path.to_path_buf()
    }
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    let file = dataset_file(path);
    let text = fs::read_to_string(&file)
        .with_context(|| format!("reading dataset {}", file.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing dataset {}", file.display()))
}

fn load_model(path: &Path) -> Result<Model> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading model {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing model {}", path.display()))
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_parser = parse_grid, default_value = "24x24")]
    grid: GridShape,
    #[arg(long, default_value_t = 20)]
    samples: usize,
    #[arg(long, value_enum, default_value_t = StructureArg::Polylines)]
    structure: StructureArg,
    /// Gaussian feature noise level
    #[arg(long, default_value_t = 0.5)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory
    #[arg(long, default_value = "dataset")]
    out: PathBuf,
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let config = SyntheticConfig {
        shape: args.grid,
        samples: args.samples,
        structure: args.structure.into(),
        noise: args.noise,
        seed: args.seed,
    };
    let samples = generate(&config)?;
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    for (i, sample) in samples.iter().enumerate() {
        let path = args.out.join(format!("labels_{i:03}.raster"));
        write_label_map(&path, &sample.y_star, sample.shape)?;
    }
    let dataset = Dataset { config, samples };
    let file = args.out.join("dataset.json");
    fs::write(&file, serde_json::to_string_pretty(&dataset)?)?;
    println!(
        "wrote {} samples ({}x{}) to {}",
        dataset.samples.len(),
        args.grid.width,
        args.grid.height,
        args.out.display()
    );
    Ok(())
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset directory or dataset.json path
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = LossArg::Hamming)]
    loss: LossArg,
    /// Pair weight of the delta8 loss
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    /// Slack penalty; ignored when --select-c is given
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Splitting step size
    #[arg(long, default_value_t = 0.1)]
    rho: f64,
    #[arg(long, default_value_t = 1e-3)]
    eps_stop: f64,
    #[arg(long, default_value_t = 50)]
    max_outer: usize,
    /// Pick C by cross-validation over the 10^-2..10^2 grid
    #[arg(long)]
    select_c: bool,
    /// Folds for --select-c
    #[arg(long, default_value_t = 3)]
    folds: usize,
    /// Seed for the cross-validation folds
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write the model JSON
    #[arg(long, default_value = "model.json")]
    model: PathBuf,
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let dataset = load_dataset(&args.data)?;
    if args.loss == LossArg::Iou {
        bail!("the intersection-over-union loss is evaluation-only and cannot be trained with");
    }
    let loss = args.loss.build(args.gamma, dataset.config.shape)?;
    let mut config = TrainConfig {
        c: args.c,
        eps_stop: args.eps_stop,
        max_outer_iterations: args.max_outer,
        loss,
        admm: ADMMParams {
            rho: args.rho,
            ..ADMMParams::default()
        },
    };
    if args.select_c {
        let selection = select_c(&dataset.samples, &config, args.folds, args.seed)?;
        for (c, score) in &selection.scores {
            println!("C = {c:>8}: validation loss {score:.4}");
        }
        println!("selected C = {}", selection.best);
        config.c = selection.best;
    }
    let model = train(&dataset.samples, &config)?;
    fs::write(&args.model, serde_json::to_string_pretty(&model)?)?;
    let final_dual = model.trace.dual_objectives.last().copied().unwrap_or(0.0);
    println!(
        "trained on {} samples: converged={} outer={} planes={} dual={final_dual:.6}",
        dataset.samples.len(),
        model.trace.converged,
        model.trace.outer_iterations,
        model.trace.cutting_planes,
    );
    println!(
        "pairwise weights {:?}, submodularity margin {:.6}",
        model.w.pairwise,
        model.w.submodularity_margin()
    );
    println!("model written to {}", args.model.display());
    Ok(())
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Which sample of the dataset to predict
    #[arg(long, default_value_t = 0)]
    index: usize,
    #[arg(long, default_value = "prediction.raster")]
    out: PathBuf,
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    let dataset = load_dataset(&args.data)?;
    let model = load_model(&args.model)?;
    let Some(sample) = dataset.samples.get(args.index) else {
        bail!(
            "sample index {} out of range (dataset has {})",
            args.index,
            dataset.samples.len()
        );
    };
    let labeling = predict(&model, &sample.features, sample.shape, &sample.edges)?;
    write_label_map(&args.out, &labeling, sample.shape)?;
    let hamming = LossFunction::Hamming.evaluate(&sample.y_star, &labeling)?;
    let iou = LossFunction::IouEval.evaluate(&sample.y_star, &labeling)?;
    println!(
        "sample {}: hamming {hamming}, iou loss {iou:.4}, prediction written to {}",
        args.index,
        args.out.display()
    );
    Ok(())
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Losses to report, comma separated
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [LossArg::Hamming, LossArg::Iou])]
    losses: Vec<LossArg>,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    /// Optional JSON output path for the statistics
    #[arg(long)]
    json: Option<PathBuf>,
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let dataset = load_dataset(&args.data)?;
    let model = load_model(&args.model)?;
    let losses: Vec<LossFunction> = args
        .losses
        .iter()
        .map(|&kind| kind.build(args.gamma, dataset.config.shape))
        .collect::<Result<_>>()?;
    let stats = evaluate_model(&model, &dataset.samples, &losses)?;
    println!("{:>10}  {:>12}  {:>12}", "loss", "mean", "std_error");
    for stat in &stats {
        println!(
            "{:>10}  {:>12.6}  {:>12.6}",
            stat.loss, stat.mean, stat.std_error
        );
    }
    if let Some(path) = args.json {
        fs::write(&path, serde_json::to_string_pretty(&stats)?)?;
        println!("statistics written to {}", path.display());
    }
    Ok(())
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long, value_parser = parse_grid, default_value = "16x16")]
    grid: GridShape,
    #[arg(long, default_value_t = 20)]
    samples: usize,
    #[arg(long, value_enum, default_value_t = StructureArg::Polylines)]
    structure: StructureArg,
    #[arg(long, default_value_t = 0.5)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [LossArg::Hamming, LossArg::Delta8])]
    train_losses: Vec<LossArg>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [LossArg::Hamming, LossArg::Delta8, LossArg::Square, LossArg::Iou])]
    eval_losses: Vec<LossArg>,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 0.1)]
    rho: f64,
    #[arg(long, default_value_t = 5)]
    splits: usize,
    #[arg(long, default_value_t = 0.5)]
    train_fraction: f64,
    #[arg(long, default_value = "experiment.json")]
    out: PathBuf,
}

fn cmd_run_experiment(args: ExperimentArgs) -> Result<()> {
    let synth = SyntheticConfig {
        shape: args.grid,
        samples: args.samples,
        structure: args.structure.into(),
        noise: args.noise,
        seed: args.seed,
    };
    let train_losses: Vec<LossFunction> = args
        .train_losses
        .iter()
        .map(|&kind| {
            if kind == LossArg::Iou {
                bail!("cannot train with the evaluation-only intersection-over-union loss")
            } else {
                kind.build(args.gamma, args.grid)
            }
        })
        .collect::<Result<_>>()?;
    let eval_losses: Vec<LossFunction> = args
        .eval_losses
        .iter()
        .map(|&kind| kind.build(args.gamma, args.grid))
        .collect::<Result<_>>()?;
    let mut config = ExperimentConfig::new(synth, train_losses, eval_losses);
    config.c = args.c;
    config.splits = args.splits;
    config.train_fraction = args.train_fraction;
    config.admm = ADMMParams {
        rho: args.rho,
        ..ADMMParams::default()
    };
    let result = run_experiment(&config)?;
    print!("{}", result.render());
    for (name, ms) in result.train_loss_names.iter().zip(&result.train_ms) {
        println!("training time {name}: {ms:.1} ms total across splits");
    }
    fs::write(&args.out, serde_json::to_string_pretty(&result)?)?;
    println!("result written to {}", args.out.display());
    Ok(())
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [64usize, 256, 1024])]
    sizes: Vec<usize>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [MethodArg::Sortscan, MethodArg::Minnorm])]
    methods: Vec<MethodArg>,
    #[arg(long, default_value_t = 20)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "bench.csv")]
    out: PathBuf,
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let methods: Vec<BenchMethod> = args.methods.iter().map(|&m| m.into()).collect();
    let report = bench(&args.sizes, &methods, args.repeats, args.seed)?;
    let csv = report.to_csv();
    print!("{csv}");
    for note in &report.skipped {
        eprintln!("note: {note}");
    }
    fs::write(&args.out, csv)?;
    println!("timings written to {}", args.out.display());
    Ok(())
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    loss: LossArg,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    /// Grid whose labelings serve as ground truths (at most 12 pixels)
    #[arg(long, value_parser = parse_grid, default_value = "3x2")]
    grid: GridShape,
}

fn cmd_verify(args: VerifyArgs) -> Result<()> {
    let p = args.grid.pixels();
    if p > 12 {
        bail!("verify enumerates all 2^p ground truths; grid capped at 12 pixels, got {p}");
    }
    let loss = args.loss.build(args.gamma, args.grid)?;

    // Sweep the misprediction-set function of every ground truth. The
    // squared-cardinality loss needs a non-empty foreground for its default
    // scale, so the empty mask is skipped there.
    let mut ground_truths = 0usize;
    let mut triples = 0usize;
    let mut violations = 0usize;
    let mut first_violation = None;
    for mask in 0..(1u64 << p) {
        if args.loss == LossArg::Square && mask == 0 {
            continue;
        }
        let y_star = supseg_core::model::Labeling::from_mask(mask, p);
        let oracle = loss.as_set_function(&y_star)?;
        let report = check_supermodular(&oracle);
        ground_truths += 1;
        triples += report.checked;
        violations += report.violations.len();
        if first_violation.is_none() {
            first_violation = report.violations.first().cloned().map(|v| (mask, v));
        }
    }
    println!(
        "{}: checked {ground_truths} ground truths on {}x{} ({triples} triples): {violations} supermodularity violations",
        loss.name(),
        args.grid.width,
        args.grid.height,
    );

    if args.loss == LossArg::Biconvex {
        let mut cells = 0usize;
        let mut bad = 0usize;
        for m in 1..=50usize {
            for total in m..=100usize {
                let report = check_biconvex(
                    |e_minus, e_plus| {
                        biconvex_c_profile(m, e_minus, e_plus)
                            .expect("e_minus stays within the foreground count")
                    },
                    m,
                    total,
                );
                cells += report.checked;
                bad += report.violations.len();
            }
        }
        println!("biconvexity over m <= 50, p <= 100: {bad} violations ({cells} cells)");
        if bad > 0 {
            bail!("biconvexity check failed");
        }
    }

    match args.loss {
        LossArg::Iou => {
            if violations == 0 {
                bail!("expected to find a supermodularity violation for intersection-over-union");
            }
            if let Some((mask, violation)) = first_violation {
                println!("expected failure confirmed, e.g. ground truth mask {mask:#b}: {violation:?}");
            }
        }
        _ => {
            if violations > 0 {
                bail!("{} supermodularity violations found", violations);
            }
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Train(args) => cmd_train(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Eval(args) => cmd_eval(args),
        Command::RunExperiment(args) => cmd_run_experiment(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Verify(args) => cmd_verify(args),
    }
}
