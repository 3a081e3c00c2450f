//! `treetrace`: generate trees, push them through deletion channels,
//! reconstruct, and run experiments.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use tree_trace::channel::{sample_censored_traces, sample_string_traces, ChannelConfig, DeletionModel};
use tree_trace::harness::counts::{random_bits, run_calibration};
use tree_trace::harness::{
    format_bits, parse_bits, run_experiment, verify_bounds, AlgoId, BoundsGrid, ExperimentConfig,
};
use tree_trace::lp_recon::{reconstruct_lp_large, reconstruct_lp_small};
use tree_trace::rng::rng_from_seed;
use tree_trace::spider_recon::{reconstruct_spider_large_depth, reconstruct_spider_meanbased, reconstruct_spider_rows};
use tree_trace::string_recon::{censored_reconstruct, ExhaustiveStringReconstructor};
use tree_trace::ted_recon::{reconstruct_ted_large, reconstruct_ted_small};
use tree_trace::{Execution, LabeledOrderedTree, TreeShape};

#[derive(Parser)]
#[command(name = "treetrace", version, about = "Trace reconstruction for labeled trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a labeled tree and print it as JSON.
    Generate(GenerateArgs),
    /// Sample traces of a generated tree (or a bit string).
    Corrupt(CorruptArgs),
    /// Reconstruct labels from a trace file.
    Reconstruct(ReconstructArgs),
    /// Run a success-rate experiment.
    Experiment(ExperimentArgs),
    /// Check the generating-function bounds on a grid.
    VerifyBounds(VerifyArgs),
    /// Recompute the calibration table.
    Calibrate(CalibrateArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// `kary:K:D` or `spider:N:D`.
    #[arg(long)]
    shape: String,
    /// Labels as a bit string (BFS order for k-ary trees, path by path for
    /// spiders). Random when omitted.
    #[arg(long)]
    labels: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CorruptArgs {
    /// File written by `generate`.
    #[arg(long, conflicts_with = "bits")]
    input: Option<PathBuf>,
    /// Corrupt a bit string instead of a tree.
    #[arg(long)]
    bits: Option<String>,
    /// `ted` or `lp` (ignored for bit strings).
    #[arg(long, default_value = "ted")]
    model: String,
    #[arg(long)]
    q: f64,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReconstructArgs {
    /// `ted`, `lp` or `string`.
    #[arg(long)]
    model: String,
    /// Algorithm id; defaults to the large-k algorithm of the model.
    #[arg(long)]
    algo: Option<String>,
    /// Required for tree models.
    #[arg(long)]
    shape: Option<String>,
    /// Original string length for `--model string`.
    #[arg(long)]
    len: Option<usize>,
    #[arg(long)]
    q: f64,
    /// File written by `corrupt`.
    #[arg(long)]
    traces: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// CSV output (`T,trial,success,millis`); stdout when omitted.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 400)]
    trials: usize,
}

fn parse_shape(s: &str) -> Result<TreeShape> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |i: usize| -> Result<usize> {
        parts.get(i).with_context(|| format!("shape {s:?} is missing a field"))?.parse().context("bad shape number")
    };
    let shape = match parts.first().copied() {
        Some("kary") if parts.len() == 3 => TreeShape::kary(num(1)?, num(2)?)?,
        Some("spider") if parts.len() == 3 => TreeShape::spider(num(1)?, num(2)?)?,
        _ => bail!("shape must be kary:K:D or spider:N:D, got {s:?}"),
    };
    Ok(shape)
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn generate(args: GenerateArgs) -> Result<()> {
    let shape = parse_shape(&args.shape)?;
    let labels = match &args.labels {
        Some(b) => parse_bits(b)?,
        None => random_bits(shape.n(), &mut rng_from_seed(args.seed)),
    };
    let tree = shape.build(&labels)?;
    let doc = json!({ "shape": shape, "labels": format_bits(&labels), "tree": tree });
    write_output(args.out.as_deref(), &serde_json::to_string_pretty(&doc)?)
}

fn corrupt(args: CorruptArgs) -> Result<()> {
    let exec = Execution::default();
    let doc = if let Some(bits) = &args.bits {
        let bits = parse_bits(bits)?;
        let traces = sample_string_traces(exec, &bits, args.q, args.gamma, args.seed, args.count);
        let traces: Vec<Value> =
            traces.iter().map(|t| t.as_ref().map_or(Value::Null, |t| json!(format_bits(t)))).collect();
        json!({ "model": "string", "q": args.q, "traces": traces })
    } else {
        let input = args.input.as_deref().context("either --input or --bits is required")?;
        let doc: Value = serde_json::from_str(&read(input)?)?;
        // The serialized tree has no node indices, so rebuild it from shape
        // and labels to give the channel something to delete.
        let shape: TreeShape = serde_json::from_value(doc["shape"].clone()).context("input has no shape")?;
        let labels = parse_bits(doc["labels"].as_str().context("input has no labels")?)?;
        let tree = shape.build(&labels)?;
        let model: DeletionModel = args.model.parse()?;
        let cfg = ChannelConfig::new(model, args.q, args.seed)?.with_censoring(args.gamma)?;
        let traces = sample_censored_traces(exec, &tree, &cfg, args.count);
        json!({ "model": args.model, "q": args.q, "shape": doc["shape"], "traces": traces })
    };
    write_output(args.out.as_deref(), &serde_json::to_string(&doc)?)
}

fn reconstruct(args: ReconstructArgs) -> Result<()> {
    let doc: Value = serde_json::from_str(&read(&args.traces)?)?;
    let recon = ExhaustiveStringReconstructor { seed: args.seed, ..ExhaustiveStringReconstructor::default() };
    if args.model == "string" {
        let traces: Vec<Option<String>> = serde_json::from_value(doc["traces"].clone())?;
        let traces = traces.iter().map(|t| t.as_deref().map(parse_bits).transpose()).collect::<Result<Vec<_>, _>>()?;
        let len = match args.len {
            Some(m) => m,
            None => {
                traces.iter().flatten().map(Vec::len).max().context("--len is required when every trace is censored")?
            }
        };
        println!("{}", format_bits(&censored_reconstruct(&traces, len, args.q, &recon)?));
        return Ok(());
    }
    let model: DeletionModel = args.model.parse()?;
    let shape = parse_shape(args.shape.as_deref().context("--shape is required for tree models")?)?;
    let algo: AlgoId = match &args.algo {
        Some(a) => a.parse()?,
        None if model == DeletionModel::Ted => AlgoId::TedLarge,
        None => AlgoId::LpLarge,
    };
    algo.check_shape(&shape)?;
    let traces: Vec<Option<LabeledOrderedTree>> = serde_json::from_value(doc["traces"].clone())?;
    let traces: Vec<LabeledOrderedTree> = traces.into_iter().flatten().collect();
    if traces.is_empty() {
        return Err(tree_trace::Error::AllCensored.into());
    }
    let (q, shape) = (args.q, &shape);
    let labels = match algo {
        AlgoId::TedLarge => reconstruct_ted_large(&traces, shape, q, &recon)?,
        AlgoId::TedSmall => reconstruct_ted_small(&traces, shape, q)?,
        AlgoId::LpLarge => reconstruct_lp_large(&traces, shape, q, &recon)?,
        AlgoId::LpSmall => reconstruct_lp_small(&traces, shape, q)?,
        AlgoId::SpiderMeanbased => {
            reconstruct_spider_meanbased(Execution::default(), &traces, shape, q, &mut rng_from_seed(args.seed))?.labels
        }
        AlgoId::SpiderLargeDepth => reconstruct_spider_large_depth(&traces, shape, q, &recon)?.labels,
        AlgoId::SpiderRows => reconstruct_spider_rows(&traces, shape, q, &recon)?,
        AlgoId::String => bail!("use --model string for string reconstruction"),
    };
    println!("{}", format_bits(&labels));
    Ok(())
}

fn experiment(args: ExperimentArgs) -> Result<()> {
    let cfg = ExperimentConfig::from_json(&read(&args.config)?)?;
    let report = run_experiment(&cfg)?;
    write_output(args.csv.as_deref(), report.to_csv()?.trim_end())?;
    if let Some(p) = &args.summary {
        write_output(Some(p), &report.summary_json()?)?;
    }
    for a in &report.aggregates {
        log::info!(
            "T = {}: {}/{} ({:.3}, [{:.3}, {:.3}])",
            a.t,
            a.successes,
            a.trials,
            a.rate,
            a.wilson_low,
            a.wilson_high
        );
    }
    Ok(())
}

fn verify(args: VerifyArgs) -> Result<()> {
    let grid = match &args.config {
        Some(p) => BoundsGrid::from_json(&read(p)?)?,
        None => BoundsGrid::default(),
    };
    let report = verify_bounds(&grid)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    if report.violations() > 0 {
        bail!("{} bound violations", report.violations());
    }
    Ok(())
}

fn calibrate(args: CalibrateArgs) -> Result<()> {
    let cal = run_calibration(Execution::default(), args.seed, args.trials)?;
    write_output(Some(&args.out), &(serde_json::to_string_pretty(&cal)? + "\n"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Corrupt(a) => corrupt(a),
        Command::Reconstruct(a) => reconstruct(a),
        Command::Experiment(a) => experiment(a),
        Command::VerifyBounds(a) => verify(a),
        Command::Calibrate(a) => calibrate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let terminated =
                e.chain().any(|c| c.downcast_ref::<tree_trace::Error>().is_some_and(|t| t.is_termination()));
            ExitCode::from(if terminated { 2 } else { 1 })
        }
    }
}
