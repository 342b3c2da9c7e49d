//! Command-line front end for the dataset → training → evaluation loop.
//!
//! `generate` renders a procedural RGB-D dataset, `preprocess` re-normalizes
//! its depth maps, `train` fits the residual network (one loss-log line per
//! optimizer step on stdout, so the log can be diffed between runs), `eval`
//! scores a checkpoint, and `gradcheck` verifies the analytic gradients
//! against central finite differences. Every command exits 0 on success and
//! nonzero with a one-line diagnostic on stderr otherwise.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use depthsynth::depthproc::{histogram_equalize, log_transform, standardize};
use depthsynth::nnet::ModelDims;
use depthsynth::pipeline::{
    evaluate_checkpoint, format_log_entry, generate_dataset, load_checkpoint,
    loss_gradient_errors, model_gradient_error, read_pfm, save_checkpoint, train, write_pfm,
    DatasetManifest, GenerateConfig, NormalizationMode, TrainConfig, STANDARDIZE_EPS,
};
use depthsynth::render::NEAR_CLIP;
use depthsynth::scenegen::WeatherKind;

#[derive(Parser)]
#[command(name = "depthsynth", version, about = "Procedural RGB-D data and depth training")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a procedural RGB-D dataset with ground-truth depth.
    Generate(GenerateArgs),
    /// Re-normalize the depth maps of an existing dataset.
    Preprocess(PreprocessArgs),
    /// Train the depth network, streaming the loss log to stdout.
    Train(TrainArgs),
    /// Score a checkpoint against a dataset.
    Eval(EvalArgs),
    /// Check analytic loss and model gradients against finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Number of frames to render.
    #[arg(long)]
    count: usize,
    /// Master seed; every scene seed derives from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Frame size as WIDTHxHEIGHT.
    #[arg(long, default_value = "64x64")]
    size: String,
    /// Comma-separated times of day in hours, each in [0, 24).
    #[arg(long, default_value = "12")]
    times: String,
    /// Comma-separated weather kinds, or "all" for every kind.
    #[arg(long, default_value = "sunny")]
    weathers: String,
    /// Dataset output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PreprocessArgs {
    /// Normalization applied to each depth map: histeq, log or standardize.
    #[arg(long)]
    mode: String,
    /// Input dataset directory (must contain manifest.tsv).
    #[arg(long = "in")]
    input: PathBuf,
    /// Output dataset directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset directory.
    #[arg(long)]
    data: PathBuf,
    /// Full passes over the dataset.
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    /// Mini-batch size.
    #[arg(long, default_value_t = 16)]
    batch: usize,
    /// Base ADAM learning rate.
    #[arg(long, default_value_t = 4e-4)]
    lr: f64,
    /// Optimizer steps between learning-rate decays.
    #[arg(long, default_value_t = 200)]
    decay_every: u64,
    /// Weight of the multi-scale smoothness term.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Pyramid levels of the smoothness term.
    #[arg(long, default_value_t = 3)]
    scales: usize,
    /// Seed for parameter init and batch shuffling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Checkpoint output path.
    #[arg(long)]
    out: PathBuf,
    /// Trunk feature channels.
    #[arg(long, default_value_t = 16)]
    channels: usize,
    /// Residual blocks.
    #[arg(long, default_value_t = 4)]
    blocks: usize,
    /// Pixel-shuffle upscale factor (1, 2 or 4).
    #[arg(long, default_value_t = 4)]
    upscale: usize,
    /// Depth-target normalization: log, histeq or standardize.
    #[arg(long, default_value = "log")]
    mode: String,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint to evaluate.
    #[arg(long)]
    ckpt: PathBuf,
    /// Dataset directory.
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Random loss instances per gradient check.
    #[arg(long, default_value_t = 100)]
    trials: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => run_generate(args),
        Command::Preprocess(args) => run_preprocess(args),
        Command::Train(args) => run_train(args),
        Command::Eval(args) => run_eval(args),
        Command::Gradcheck(args) => run_gradcheck(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn parse_size(s: &str) -> anyhow::Result<(usize, usize)> {
    let parsed = s
        .split_once('x')
        .and_then(|(w, h)| Some((w.trim().parse().ok()?, h.trim().parse().ok()?)));
    parsed.with_context(|| format!("size {s:?} must look like WIDTHxHEIGHT, e.g. 64x64"))
}

fn parse_times(s: &str) -> anyhow::Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .with_context(|| format!("bad time of day {:?}", t.trim()))
        })
        .collect()
}

fn parse_weathers(s: &str) -> anyhow::Result<Vec<WeatherKind>> {
    if s.trim() == "all" {
        return Ok(WeatherKind::ALL.to_vec());
    }
    s.split(',')
        .map(|w| w.trim().parse::<WeatherKind>().map_err(anyhow::Error::from))
        .collect()
}

fn run_generate(args: GenerateArgs) -> anyhow::Result<()> {
    let (width, height) = parse_size(&args.size)?;
    let mut config = GenerateConfig::new(args.count, args.seed, width, height);
    config.times = parse_times(&args.times)?;
    config.weathers = parse_weathers(&args.weathers)?;
    let manifest = generate_dataset(&config, &args.out)?;
    println!("wrote {} frames to {}", manifest.len(), args.out.display());
    Ok(())
}

fn create_parent_dirs(path: &Path) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(())
}

fn run_preprocess(args: PreprocessArgs) -> anyhow::Result<()> {
    let mode: NormalizationMode = args.mode.parse()?;
    let manifest = DatasetManifest::load(&args.input)?;
    let mut manifest_text = String::new();
    for record in manifest.records() {
        let depth = read_pfm(&manifest.root().join(&record.depth_path))?;
        let transformed = match mode {
            NormalizationMode::Log => log_transform(&depth, NEAR_CLIP)?,
            NormalizationMode::HistEq => histogram_equalize(&depth)?,
            NormalizationMode::Standardize => standardize(&depth, STANDARDIZE_EPS)?,
        };
        let depth_out = args.out.join(&record.depth_path);
        create_parent_dirs(&depth_out)?;
        write_pfm(&transformed, &depth_out)?;
        let rgb_out = args.out.join(&record.rgb_path);
        create_parent_dirs(&rgb_out)?;
        fs::copy(manifest.root().join(&record.rgb_path), &rgb_out)
            .with_context(|| format!("copying {}", record.rgb_path.display()))?;
        manifest_text.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            record.rgb_path.display(),
            record.depth_path.display(),
            record.scene_seed,
            record.time_of_day,
            record.weather,
        ));
    }
    let manifest_path = args.out.join("manifest.tsv");
    fs::write(&manifest_path, manifest_text)
        .with_context(|| format!("writing {}", manifest_path.display()))?;
    println!(
        "preprocessed {} depth maps ({mode}) into {}",
        manifest.len(),
        args.out.display()
    );
    Ok(())
}

fn run_train(args: TrainArgs) -> anyhow::Result<()> {
    let mut config = TrainConfig::new(&args.data);
    config.epochs = args.epochs;
    config.batch_size = args.batch;
    config.base_lr = args.lr;
    config.decay_every = args.decay_every;
    config.alpha = args.alpha;
    config.num_scales = args.scales;
    config.seed = args.seed;
    config.mode = args.mode.parse()?;
    config.dims = ModelDims {
        channels: args.channels,
        blocks: args.blocks,
        upscale: args.upscale,
    };
    let outcome = train(&config, |entry| println!("{}", format_log_entry(entry)))?;
    create_parent_dirs(&args.out)?;
    save_checkpoint(&outcome.params, outcome.iterations, &args.out)?;
    // Summary goes to stderr so stdout stays a pure, diffable loss log.
    eprintln!(
        "checkpoint after {} iterations -> {}",
        outcome.iterations,
        args.out.display()
    );
    Ok(())
}

fn run_eval(args: EvalArgs) -> anyhow::Result<()> {
    let (params, iteration) = load_checkpoint(&args.ckpt)?;
    let manifest = DatasetManifest::load(&args.data)?;
    let report = evaluate_checkpoint(&params, &manifest)?;
    let rows = [
        ("rmse", report.rmse()),
        ("rmse_log", report.rmse_log()),
        ("rmse_si", report.rmse_si()),
        ("absrel", report.absrel()),
        ("sqrrel", report.sqrrel()),
    ];
    println!("{:<10} {:>16}", "metric", "value");
    for (name, value) in rows {
        println!("{name:<10} {value:>16.6}");
    }
    println!();
    for (name, value) in rows {
        println!("{name}={value}");
    }
    println!("pixels={}", report.sample_count());
    println!("frames={}", manifest.len());
    println!("iteration={iteration}");
    Ok(())
}

fn run_gradcheck(args: GradcheckArgs) -> anyhow::Result<()> {
    const LOSS_THRESHOLD: f64 = 1e-5;
    const MODEL_THRESHOLD: f64 = 1e-4;
    if args.trials == 0 {
        bail!("need at least one trial");
    }
    let (si, tv) = loss_gradient_errors(args.trials, 0)?;
    let model = model_gradient_error(0)?;
    let verdict = |err: f64, threshold: f64| if err < threshold { "pass" } else { "FAIL" };
    println!(
        "si_loss  max relative gradient error {si:>12.3e}  threshold {LOSS_THRESHOLD:.0e}  {}",
        verdict(si, LOSS_THRESHOLD)
    );
    println!(
        "tv_loss  max relative gradient error {tv:>12.3e}  threshold {LOSS_THRESHOLD:.0e}  {}",
        verdict(tv, LOSS_THRESHOLD)
    );
    println!(
        "model    max relative gradient error {model:>12.3e}  threshold {MODEL_THRESHOLD:.0e}  {}",
        verdict(model, MODEL_THRESHOLD)
    );
    if si >= LOSS_THRESHOLD || tv >= LOSS_THRESHOLD || model >= MODEL_THRESHOLD {
        bail!("a gradient check exceeded its threshold");
    }
    println!("all gradient checks passed");
    Ok(())
}
