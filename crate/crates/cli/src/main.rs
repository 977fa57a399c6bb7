//! `repcx`: command-line front end for the representation-complexity profiler.
//!
//! JSON results go to stdout; progress and errors go to stderr. Errors print
//! one line `error[<CODE>]: <message>` and exit 1 (validation/format) or 2 (I/O).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use repcx::lenet::{boundaries, end_to_end_error, forward_batch, CaptureMode};
use repcx::profiler::traces::{write_trace_dir, PREDICTIONS_STEM};
use repcx::profiler::{emit_report, load_image_set, profile_run, ReportFormat, RunConfig, SubsampleSpec};
use repcx::tensor_io::{
    labels_to_tensor, load_labels, load_tensor_with_format, load_weights, save_labels, save_tensor, save_tensor_as,
    LabeledPointSet,
};
use repcx::{Error, Result};
use serde_json::json;

#[derive(Debug, Parser)]
#[command(
    name = "repcx",
    version,
    about = "Leave-one-out nearest-neighbor complexity of network representations"
)]
struct Cli {
    /// Worker threads; defaults to the number of available cores.
    #[arg(long, global = true, env = "REPCX_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Leave-one-out 1-NN error of a labeled tensor, printed as JSON.
    Complexity(ComplexityArgs),
    /// Forward images through a LeNet-5 bundle and dump every boundary tensor.
    Infer(InferArgs),
    /// Measure complexity over every epoch, split and boundary of a run directory.
    Profile(ProfileArgs),
    /// Keep every stride-th sample of a tensor (and optionally its labels).
    Reduce(ReduceArgs),
}

#[derive(Debug, Args)]
struct ComplexityArgs {
    /// Points as an [N, ...] RTD/NPY/IDX tensor; each sample is flattened.
    tensor: PathBuf,
    /// Integer label tensor of length N.
    labels: PathBuf,
    /// Subset size for the subset-mean estimator.
    #[arg(long, default_value_t = 10_000)]
    subset_size: usize,
    /// Measure a uniform subsample of this many points.
    #[arg(long)]
    subsample: Option<usize>,
    /// Seed for --subsample.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct InferArgs {
    /// LNW1 weight bundle directory.
    #[arg(long)]
    weights: PathBuf,
    /// MNIST IDX images, or an [N, 1, 32, 32] RTD/NPY tensor.
    #[arg(long)]
    images: PathBuf,
    /// Labels matching --images.
    #[arg(long)]
    labels: PathBuf,
    /// Output directory for boundary traces, labels and predictions.
    #[arg(long)]
    out: PathBuf,
    /// eval: dropout is the identity; train-dropout: masks applied while capturing.
    #[arg(long, default_value = "eval")]
    mode: CaptureMode,
    /// Mask seed, required with --mode train-dropout.
    #[arg(long)]
    dropout_seed: Option<u64>,
    /// Cap on activations held in memory at once, in MiB.
    #[arg(long, default_value_t = 1024)]
    memory_budget_mb: usize,
}

#[derive(Debug, Args)]
struct ProfileArgs {
    /// Run directory with epoch_NNN/ bundles or traces.
    #[arg(long)]
    run_dir: PathBuf,
    /// JSON run configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for report.csv, report.json and plot_series.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ReduceArgs {
    /// Input tensor; the output keeps its format.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output tensor path.
    #[arg(long)]
    out: PathBuf,
    /// Keep every stride-th sample.
    #[arg(long, default_value_t = 6)]
    stride: usize,
    /// Index of the first kept sample.
    #[arg(long, default_value_t = 0)]
    offset: usize,
    /// Label tensor to reduce alongside.
    #[arg(long, requires = "labels_out")]
    labels: Option<PathBuf>,
    /// Output path for the reduced labels.
    #[arg(long, requires = "labels")]
    labels_out: Option<PathBuf>,
}

fn print_json(value: &serde_json::Value) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("json value serializes")
    );
}

fn complexity(args: ComplexityArgs) -> Result<()> {
    let (t, _) = load_tensor_with_format(&args.tensor)?;
    let labels = load_labels(&args.labels)?;
    let classes = labels.iter().max().map_or(1, |&m| m + 1);
    let set = LabeledPointSet::from_batch(&t, labels, classes)?;
    let sample = args.subsample.map(|n| SubsampleSpec { n, seed: args.seed });
    let est = repcx::profiler::measure_point_set(&set, args.subset_size, sample)?;
    print_json(&serde_json::to_value(&est).expect("estimate serializes"));
    Ok(())
}

fn infer(args: InferArgs) -> Result<()> {
    let weights = load_weights(&args.weights)?;
    let data = load_image_set(&args.images, &args.labels)?;
    let ids = boundaries(weights.variant);
    // the 6×28×28 conv1 maps are the widest boundary
    let widest = 6 * 28 * 28;
    let per_group = ((args.memory_budget_mb << 20) / (data.len().max(1) * widest * 4)).max(1);

    let all: Vec<usize> = (0..ids.len()).collect();
    let mut predictions = None;
    for group in all.chunks(per_group) {
        let batch = forward_batch(&weights, data.points(), args.mode, args.dropout_seed, group)?;
        if predictions.is_none() {
            predictions = Some(batch.predictions());
        }
        write_trace_dir(&args.out, &batch.captured, None)?;
    }
    save_labels(data.labels(), args.out.join("labels.rtd"))?;
    let predictions = predictions.unwrap_or_default();
    save_tensor(
        &labels_to_tensor(&predictions),
        args.out.join(format!("{PREDICTIONS_STEM}.rtd")),
    )?;

    let error = if args.mode == CaptureMode::Eval {
        let wrong = predictions.iter().zip(data.labels()).filter(|(p, l)| p != l).count();
        wrong as f64 / data.len().max(1) as f64
    } else {
        end_to_end_error(&weights, &data)?
    };
    print_json(&json!({
        "variant": weights.variant.as_str(),
        "mode": args.mode,
        "n_points": data.len(),
        "boundary_files": ids.len(),
        "end_to_end_error": error,
    }));
    Ok(())
}

fn profile(args: ProfileArgs) -> Result<()> {
    let cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
            RunConfig::from_json(&text, path.parent().unwrap_or(Path::new(".")))?
        }
        None => RunConfig::default(),
    };
    let report = profile_run(&cfg, &args.run_dir)?;
    fs::create_dir_all(&args.out).map_err(|e| io_error(&args.out, e))?;
    let outputs = [
        (ReportFormat::Csv, "report.csv"),
        (ReportFormat::Json, "report.json"),
        (ReportFormat::PlotSeries, "plot_series.json"),
    ];
    for (format, name) in outputs {
        emit_report(&report, format, &args.out.join(name))?;
    }
    print_json(&json!({
        "cells": report.cells.len(),
        "end_to_end": report.end_to_end.len(),
        "outputs": outputs.iter().map(|(_, n)| args.out.join(n)).collect::<Vec<_>>(),
    }));
    Ok(())
}

fn reduce(args: ReduceArgs) -> Result<()> {
    if args.stride == 0 || args.offset >= args.stride {
        return Err(Error::Parameter(format!(
            "need stride >= 1 and 0 <= offset < stride, got stride {} offset {}",
            args.stride, args.offset
        )));
    }
    let (t, format) = load_tensor_with_format(&args.input)?;
    let n = t.dims().first().copied().unwrap_or(0);
    let rows: Vec<usize> = (args.offset..n).step_by(args.stride).collect();
    save_tensor_as(&t.select_rows(&rows)?, &args.out, format)?;
    if let (Some(lin), Some(lout)) = (&args.labels, &args.labels_out) {
        let (lt, lformat) = load_tensor_with_format(lin)?;
        if lt.dims().first() != Some(&n) {
            return Err(Error::Validation(format!(
                "labels have dims {:?} but the tensor has {n} samples",
                lt.dims()
            )));
        }
        save_tensor_as(&lt.select_rows(&rows)?, lout, lformat)?;
    }
    print_json(&json!({ "n_in": n, "n_out": rows.len(), "stride": args.stride, "offset": args.offset }));
    Ok(())
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Parameter(format!("cannot start {n} threads: {e}")))?;
    }
    match cli.command {
        Command::Complexity(a) => complexity(a),
        Command::Infer(a) => infer(a),
        Command::Profile(a) => profile(a),
        Command::Reduce(a) => reduce(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!("error[E_USAGE]: {}", first.trim_start_matches("error: "));
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.code(), e.to_string().replace('\n', " "));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
