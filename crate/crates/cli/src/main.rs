//! `nucleitool`: encode ground-truth labels into training targets, decode
//! prediction maps into instances, ensemble model outputs, score losses, and
//! evaluate predictions with the class-averaged PQ and count-R² metrics.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use nucleitool_core::batch;
use nucleitool_core::dataset;
use nucleitool_core::ensemble::average_predictions;
use nucleitool_core::folds::split_by_domain;
use nucleitool_core::losses::{total_loss, ClassWeights, LossWeights};
use nucleitool_core::postprocess::PostprocessParams;
use nucleitool_core::types::{ClassId, NUM_FG_CLASSES};

mod output;

#[derive(Parser)]
#[command(name = "nucleitool", version, about = "Nucleus segmentation toolkit")]
struct Cli {
    /// Worker threads for per-image fan-out (default: all cores). The
    /// NUCLEITOOL_THREADS environment variable overrides this flag.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a labels array into target map files (np/hv/dg/tp.npy).
    Encode(EncodeArgs),
    /// Decode a prediction directory into a labels array via watershed.
    Postprocess(PostprocessArgs),
    /// Average several prediction directories into one.
    Ensemble(EnsembleArgs),
    /// Score predicted labels against ground truth (JSON on stdout).
    Evaluate(EvaluateArgs),
    /// Per-image nucleus counts as CSV.
    Counts(CountsArgs),
    /// Apply seeded augmentations and regenerate targets.
    Augment(AugmentArgs),
    /// Split a dataset into the five domain folds (JSON on stdout).
    Split(SplitArgs),
    /// Loss decomposition of predictions against targets (JSON on stdout).
    Loss(LossArgs),
}

#[derive(Args)]
struct EncodeArgs {
    /// Labels array, shape (N, H, W, 2).
    #[arg(long)]
    labels: PathBuf,
    /// Output directory for np.npy, hv.npy, dg.npy, tp.npy.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct PostprocessArgs {
    /// Directory holding np.npy, hv.npy, dg.npy, tp.npy.
    #[arg(long)]
    pred_dir: PathBuf,
    /// Output labels array path.
    #[arg(long)]
    out: PathBuf,
    /// Foreground probability threshold.
    #[arg(long, default_value_t = 0.5)]
    t_fg: f64,
    /// Marker energy threshold.
    #[arg(long, default_value_t = 0.4)]
    t_energy: f64,
    /// Minimum marker/instance size in pixels.
    #[arg(long, default_value_t = 10)]
    min_size: usize,
}

#[derive(Args)]
struct EnsembleArgs {
    /// Prediction directories to average (repeat the flag per model).
    #[arg(long = "input", required = true)]
    inputs: Vec<PathBuf>,
    /// Output directory for the averaged maps.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Ground-truth labels array.
    #[arg(long)]
    gt: PathBuf,
    /// Predicted labels array.
    #[arg(long)]
    pred: PathBuf,
}

#[derive(Args)]
struct CountsArgs {
    /// Labels array to count.
    #[arg(long)]
    labels: PathBuf,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AugmentArgs {
    /// Images array, shape (N, H, W, 3).
    #[arg(long)]
    images: PathBuf,
    /// Labels array, shape (N, H, W, 2).
    #[arg(long)]
    labels: PathBuf,
    /// Base seed; image i uses seed + i.
    #[arg(long)]
    seed: u64,
    /// Output directory (images.npy, labels.npy, np/hv/dg/tp.npy).
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SplitArgs {
    /// Text file with one domain name per image.
    #[arg(long)]
    domains: PathBuf,
}

#[derive(Args)]
struct LossArgs {
    /// Predicted maps directory.
    #[arg(long)]
    pred_dir: PathBuf,
    /// Target maps directory (e.g. the output of `encode`).
    #[arg(long)]
    target_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            // clap routes help to stdout and errors to stderr.
            let _ = err.print();
            return ExitCode::from(code);
        }
    };

    let threads = resolve_threads(cli.threads);
    match run(cli.command, threads) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

/// NUCLEITOOL_THREADS overrides --threads; 0 or unset means all cores.
fn resolve_threads(flag: Option<usize>) -> usize {
    if let Ok(value) = std::env::var("NUCLEITOOL_THREADS") {
        if let Ok(parsed) = value.trim().parse::<usize>() {
            return parsed;
        }
        eprintln!("warning: ignoring unparsable NUCLEITOOL_THREADS={value:?}");
    }
    flag.unwrap_or(0)
}

fn run(command: Command, threads: usize) -> anyhow::Result<()> {
    match command {
        Command::Encode(args) => encode(&args, threads),
        Command::Postprocess(args) => postprocess(&args, threads),
        Command::Ensemble(args) => ensemble(&args),
        Command::Evaluate(args) => evaluate(&args, threads),
        Command::Counts(args) => counts(&args, threads),
        Command::Augment(args) => augment(&args, threads),
        Command::Split(args) => split(&args),
        Command::Loss(args) => loss(&args),
    }
}

fn encode(args: &EncodeArgs, threads: usize) -> anyhow::Result<()> {
    let labels = dataset::read_labels(&args.labels)
        .with_context(|| format!("reading {}", args.labels.display()))?;
    let targets = batch::encode_batch(&labels, threads)?;
    dataset::write_target_dir(&args.out_dir, &targets)
        .with_context(|| format!("writing {}", args.out_dir.display()))?;
    Ok(())
}

fn postprocess(args: &PostprocessArgs, threads: usize) -> anyhow::Result<()> {
    if !(0.0 < args.t_fg && args.t_fg < 1.0) || !(0.0 < args.t_energy && args.t_energy < 1.0) {
        bail!("thresholds must lie strictly between 0 and 1");
    }
    let params = PostprocessParams {
        t_fg: args.t_fg,
        t_energy: args.t_energy,
        min_size: args.min_size,
    };
    let preds = dataset::read_prediction_dir(&args.pred_dir)
        .with_context(|| format!("reading {}", args.pred_dir.display()))?;
    let sets = batch::postprocess_batch(&preds, &params, threads);
    let labels: Vec<dataset::LabelPair> = sets.iter().map(|s| s.to_maps()).collect();
    dataset::write_labels(&args.out, &labels)
        .with_context(|| format!("writing {}", args.out.display()))?;
    Ok(())
}

fn ensemble(args: &EnsembleArgs) -> anyhow::Result<()> {
    let mut models = Vec::new();
    for dir in &args.inputs {
        models.push(
            dataset::read_prediction_dir(dir)
                .with_context(|| format!("reading {}", dir.display()))?,
        );
    }
    let n = models[0].len();
    if models.iter().any(|m| m.len() != n) {
        bail!("prediction directories hold different image counts");
    }
    let mut averaged = Vec::with_capacity(n);
    for i in 0..n {
        let members: Vec<_> = models.iter().map(|m| m[i].clone()).collect();
        averaged.push(average_predictions(&members)?);
    }
    dataset::write_prediction_dir(&args.out_dir, &averaged)
        .with_context(|| format!("writing {}", args.out_dir.display()))?;
    Ok(())
}

fn evaluate(args: &EvaluateArgs, threads: usize) -> anyhow::Result<()> {
    let gt =
        dataset::read_labels(&args.gt).with_context(|| format!("reading {}", args.gt.display()))?;
    let pred = dataset::read_labels(&args.pred)
        .with_context(|| format!("reading {}", args.pred.display()))?;
    let eval = batch::evaluate_labels(&gt, &pred, threads)?;
    println!("{}", output::evaluation_json(&eval)?);
    Ok(())
}

fn counts(args: &CountsArgs, threads: usize) -> anyhow::Result<()> {
    let labels = dataset::read_labels(&args.labels)
        .with_context(|| format!("reading {}", args.labels.display()))?;
    let sets = batch::extract_batch(&labels, threads)?;
    let table = nucleitool_core::metrics::counts_from_instances(&sets);
    let csv = output::counts_csv(&table);
    match &args.out {
        Some(path) => {
            std::fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn augment(args: &AugmentArgs, threads: usize) -> anyhow::Result<()> {
    let container = dataset::DatasetContainer::load(&args.images, &args.labels, None)
        .context("loading dataset")?;
    let results = batch::augment_batch(&container.images, &container.labels, args.seed, threads)?;

    std::fs::create_dir_all(&args.out_dir)?;
    let images: Vec<_> = results.iter().map(|(l, _)| l.rgb.clone()).collect();
    let labels: Vec<dataset::LabelPair> = results
        .iter()
        .map(|(l, _)| (l.inst.clone(), l.cls.clone()))
        .collect();
    let targets: Vec<_> = results.into_iter().map(|(_, t)| t).collect();
    dataset::write_images(args.out_dir.join("images.npy"), &images)?;
    dataset::write_labels(args.out_dir.join("labels.npy"), &labels)?;
    dataset::write_target_dir(&args.out_dir, &targets)?;
    Ok(())
}

fn split(args: &SplitArgs) -> anyhow::Result<()> {
    let domains = dataset::read_domains(&args.domains)
        .with_context(|| format!("reading {}", args.domains.display()))?;
    let spec = split_by_domain(&domains)?;
    println!("{}", output::folds_json(&spec)?);
    Ok(())
}

fn loss(args: &LossArgs) -> anyhow::Result<()> {
    let preds = dataset::read_prediction_dir(&args.pred_dir)
        .with_context(|| format!("reading {}", args.pred_dir.display()))?;
    let target_maps = dataset::read_prediction_dir(&args.target_dir)
        .with_context(|| format!("reading {}", args.target_dir.display()))?;
    if preds.len() != target_maps.len() {
        bail!(
            "{} predictions vs {} targets",
            preds.len(),
            target_maps.len()
        );
    }
    if preds.is_empty() {
        bail!("empty prediction directory");
    }
    let cw = ClassWeights::default();
    let lw = LossWeights::default();
    let mut sums = [0.0f64; 9];
    for (pred, target) in preds.iter().zip(target_maps.iter()) {
        let target = nucleitool_core::encoder::TargetMaps {
            np: target.np_prob.clone(),
            hv: target.hv.clone(),
            dg: target.dg.clone(),
            tp: target.tp_prob.clone(),
        };
        let b = total_loss(pred, &target, &cw, &lw)?;
        for (slot, term) in sums.iter_mut().zip([
            b.np_ce, b.np_dice, b.mse_hv, b.mse_dg, b.gmse_hv, b.gmse_dg, b.tp_wce, b.tp_dice,
            b.total,
        ]) {
            *slot += term;
        }
    }
    let n = preds.len() as f64;
    println!("{}", output::loss_json(&sums.map(|s| s / n))?);
    Ok(())
}

/// Foreground class names in id order, shared by the JSON/CSV outputs.
pub(crate) fn class_names() -> [&'static str; NUM_FG_CLASSES] {
    let mut names = [""; NUM_FG_CLASSES];
    for (i, name) in names.iter_mut().enumerate() {
        *name = ClassId::new((i + 1) as u8).unwrap().name();
    }
    names
}
