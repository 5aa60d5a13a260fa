//! `mnemo` — operator surface for the memory engine: build memories from
//! ingest files, answer single questions, run evaluations, inspect
//! snapshots, and generate a fully offline demo corpus.
//!
//! Exit codes: 0 success, 2 configuration error, 3 input error,
//! 4 backend/transport error, 5 internal error.

mod config;
mod demo;
mod render;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use config::{CliConfig, FileConfig, Overrides};
use mnemo_core::config::MemoryMask;
use mnemo_core::error::Error;
use mnemo_core::eval::{self, EvalOptions};
use mnemo_core::pipeline;
use mnemo_core::store;

#[derive(Parser)]
#[command(
    name = "mnemo",
    version,
    about = "Multimodal memory engine for long-video QA"
)]
struct Cli {
    /// Configuration file (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Memory enable-mask override, e.g. E, E+V, E+S+V.
    #[arg(long, global = true)]
    memories: Option<String>,

    /// Retrieval iteration budget override.
    #[arg(long, global = true)]
    max_iters: Option<usize>,

    /// Backend role override as role=backend_id (repeatable).
    #[arg(long = "backend-role", global = true, value_parser = parse_role_pair)]
    backend_roles: Vec<(String, String)>,

    #[command(subcommand)]
    command: Command,
}

fn parse_role_pair(raw: &str) -> Result<(String, String), String> {
    raw.split_once('=')
        .map(|(role, id)| (role.trim().to_string(), id.trim().to_string()))
        .ok_or_else(|| format!("expected role=backend_id, got {raw:?}"))
}

#[derive(Subcommand)]
enum Command {
    /// Build all enabled memories from ingest files and write a snapshot.
    Ingest(IngestArgs),
    /// Answer one multiple-choice question against a snapshot.
    Query(QueryArgs),
    /// Run an evaluation set (optionally as an ablation over masks).
    Eval(EvalArgs),
    /// Print a snapshot's manifest; --verify re-validates everything.
    Inspect(InspectArgs),
    /// Generate an offline demo corpus with recorded scripted fixtures.
    Demo(DemoArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Line-delimited segment records (repeatable).
    #[arg(long, required = true)]
    segments: Vec<PathBuf>,
    /// Line-delimited feature records (required when visual memory is enabled).
    #[arg(long)]
    features: Option<PathBuf>,
    /// Line-delimited frame records.
    #[arg(long)]
    frames: Option<PathBuf>,
    /// Snapshot output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    snapshot: PathBuf,
    #[arg(long)]
    question: String,
    /// Choice as LETTER=text (repeatable), e.g. --choice 'A=Eating hot pot'.
    #[arg(long = "choice", required = true, value_parser = parse_choice)]
    choices: Vec<(char, String)>,
    /// Machine-readable trace output path.
    #[arg(long, default_value = "trace.json")]
    trace_out: PathBuf,
}

fn parse_choice(raw: &str) -> Result<(char, String), String> {
    let (letter, text) = raw
        .split_once('=')
        .ok_or_else(|| format!("expected LETTER=text, got {raw:?}"))?;
    let letter = letter.trim();
    if letter.chars().count() != 1 {
        return Err(format!(
            "choice letter must be a single character, got {letter:?}"
        ));
    }
    Ok((
        letter.chars().next().unwrap().to_ascii_uppercase(),
        text.to_string(),
    ))
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    snapshot: PathBuf,
    /// Line-delimited eval items.
    #[arg(long)]
    evalset: PathBuf,
    #[arg(long, default_value = "reports")]
    report_dir: PathBuf,
    /// Comma-separated masks for an ablation run, e.g. "E,E+V,E+S,E+S+V".
    #[arg(long)]
    ablation: Option<String>,
    /// Concurrent items.
    #[arg(long)]
    parallelism: Option<usize>,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    snapshot: PathBuf,
    /// Fully load and re-validate the snapshot.
    #[arg(long)]
    verify: bool,
}

#[derive(Args)]
struct DemoArgs {
    /// Output directory for corpus, fixtures, config, and eval set.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

fn exit_code(error: &Error) -> i32 {
    match error {
        Error::Config(_) | Error::UnsupportedVersion { .. } | Error::Capability { .. } => 2,
        Error::InvalidArgument(_)
        | Error::Validation(_)
        | Error::Parse { .. }
        | Error::DegenerateEntity(_)
        | Error::DependencyGap { .. }
        | Error::DimensionMismatch { .. }
        | Error::DegenerateFeature
        | Error::DigestMismatch(_)
        | Error::Io { .. } => 3,
        Error::Backend { .. } => 4,
        Error::Ingest { source, .. } => exit_code(source),
        _ => 5,
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(error) = run(cli) {
        eprintln!("error: {error}");
        let mut source = std::error::Error::source(&error);
        while let Some(cause) = source {
            eprintln!("  caused by: {cause}");
            source = cause.source();
        }
        std::process::exit(exit_code(&error));
    }
}

fn load_config(cli: &Cli) -> mnemo_core::Result<CliConfig> {
    let overrides = Overrides {
        memories: cli.memories.clone(),
        max_iterations: cli.max_iters,
        backend_roles: cli.backend_roles.clone(),
        parallelism: None,
    };
    match &cli.config {
        Some(path) => {
            let file = FileConfig::load(path)?;
            let dir = path.parent().unwrap_or(Path::new("."));
            config::resolve(file, dir, &overrides)
        }
        None => config::resolve(FileConfig::default(), Path::new("."), &overrides),
    }
}

fn run(cli: Cli) -> mnemo_core::Result<()> {
    match &cli.command {
        Command::Ingest(args) => cmd_ingest(&cli, args),
        Command::Query(args) => cmd_query(&cli, args),
        Command::Eval(args) => cmd_eval(&cli, args),
        Command::Inspect(args) => cmd_inspect(args),
        Command::Demo(args) => demo::cmd_demo(&args.out, args.seed),
    }
}

fn read_file(path: &Path) -> mnemo_core::Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn cmd_ingest(cli: &Cli, args: &IngestArgs) -> mnemo_core::Result<()> {
    let config = load_config(cli)?;
    if config.mask.visual && args.features.is_none() {
        return Err(Error::Config(
            "visual memory is enabled but no --features file was given".into(),
        ));
    }

    let mut segments = Vec::new();
    for path in &args.segments {
        segments.extend(pipeline::parse_segment_records(&read_file(path)?)?);
    }
    let features = match &args.features {
        Some(path) => pipeline::parse_feature_records(&read_file(path)?)?,
        None => Vec::new(),
    };
    let frames = match &args.frames {
        Some(path) => pipeline::parse_frame_records(&read_file(path)?)?,
        None => Vec::new(),
    };
    if segments.is_empty() {
        eprintln!("warning: no segment records; writing an empty snapshot");
    }

    let memories = pipeline::build_memories(
        &segments,
        &features,
        &frames,
        &config.timescales,
        &config.retrieval,
        config.mask,
        &config.backends,
    )?;
    let digest = store::save(&memories, &args.out)?;
    println!("snapshot {} written", args.out.display());
    println!("digest sha256:{digest}");
    println!("{}", memories.summary());
    println!(
        "config fingerprint {}",
        config.retrieval.fingerprint(config.mask)
    );
    Ok(())
}

fn cmd_query(cli: &Cli, args: &QueryArgs) -> mnemo_core::Result<()> {
    let config = load_config(cli)?;
    let memories = store::load(&args.snapshot)?;
    let mut choices = BTreeMap::new();
    for (letter, text) in &args.choices {
        if choices.insert(*letter, text.clone()).is_some() {
            return Err(Error::invalid(format!("duplicate choice letter {letter}")));
        }
    }

    let trace = mnemo_core::agent::answer_question(
        &args.question,
        &memories,
        config.mask,
        &choices,
        &config.retrieval,
        &config.backends,
    )?;

    println!(
        "{}",
        render::render_human_trace(&args.question, &choices, &trace)
    );
    std::fs::write(&args.trace_out, trace.to_json())
        .map_err(|e| Error::io(args.trace_out.display().to_string(), e))?;
    eprintln!("trace written to {}", args.trace_out.display());
    eprintln!(
        "config fingerprint {}",
        config.retrieval.fingerprint(config.mask)
    );
    Ok(())
}

fn cmd_eval(cli: &Cli, args: &EvalArgs) -> mnemo_core::Result<()> {
    let mut config = load_config(cli)?;
    if let Some(p) = args.parallelism {
        config.parallelism = p.max(1);
    }
    let memories = store::load(&args.snapshot)?;
    let items = eval::parse_eval_items(&read_file(&args.evalset)?)?;

    let masks: Vec<MemoryMask> = match &args.ablation {
        Some(spec) => spec
            .split(',')
            .map(|m| MemoryMask::parse(m.trim()))
            .collect::<mnemo_core::Result<_>>()?,
        None => vec![config.mask],
    };

    let options = EvalOptions {
        trace_dir: Some(args.report_dir.join("traces")),
        parallelism: config.parallelism,
    };
    let reports = eval::ablation_matrix(
        &items,
        &memories,
        &masks,
        &config.retrieval,
        &config.backends,
        &options,
    )?;

    println!("mask     accuracy  mean_tiou  items    fingerprint");
    for report in &reports {
        let dir = if reports.len() == 1 {
            args.report_dir.clone()
        } else {
            args.report_dir.join(report.mask.replace('+', "_"))
        };
        eval::write_report(report, &dir)?;
        println!(
            "{:<8} {:<9.4} {:<10} {:<8} {}",
            report.mask,
            report.overall_accuracy,
            report
                .mean_tiou_all_rounds
                .map(|v| format!("{v:.4}"))
                .unwrap_or_else(|| "-".into()),
            report.total,
            &report.config_fingerprint[..16],
        );
    }
    println!("reports written under {}", args.report_dir.display());
    Ok(())
}

fn cmd_inspect(args: &InspectArgs) -> mnemo_core::Result<()> {
    let manifest = store::inspect(&args.snapshot)?;
    println!("format version {}", manifest.format_version);
    println!("digest {}:{}", manifest.digest_algo, manifest.digest);
    println!(
        "timescales {:?} (semantic {} ms, visual {} ms)",
        manifest.timescales.scales_ms,
        manifest.timescales.semantic_scale_ms,
        manifest.timescales.visual_scale_ms
    );
    for (name, count) in &manifest.counts {
        println!("{name}: {count}");
    }
    if args.verify {
        let memories = store::load(&args.snapshot)?;
        println!("verification: OK");
        println!("{}", memories.summary());
    }
    Ok(())
}
