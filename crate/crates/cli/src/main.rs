use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context as _;
use clap::{Args, Parser, Subcommand, ValueEnum};

use vos_cascade::data::{generate_scene, preset, read_csv_rows, write_synthetic, ImageFormat, ProposalRecord, SceneSpec, PRESET_NAMES};
use vos_cascade::eval::{EvalOptions, Tolerance};
use vos_cascade::pipeline::{
    evaluate_directories, ground_truth_boxes, proposal_recall, run_dataset, track_eval, BackendKind, PipelineConfig,
    ReferenceProfile,
};
use vos_cascade::Error;

#[derive(Parser)]
#[command(name = "vos-cascade", version, about = "Proposal -> tracking -> segmentation cascade for video object segmentation")]
struct Cli {
    /// Seed override for the scene generator or the pipeline.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Pipeline configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic sequences in DAVIS layout.
    Synth(SynthArgs),
    /// Run the cascade over every sequence of a dataset.
    Run(RunArgs),
    /// Score predicted masks against annotations.
    Eval(EvalArgs),
    /// Success-plot AUC of tracked boxes.
    TrackEval(TrackEvalArgs),
    /// Recall of dumped proposals at an IoU threshold.
    Recall(RecallArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Davis,
    Netpbm,
}

impl From<Format> for ImageFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Davis => ImageFormat::Davis,
            Format::Netpbm => ImageFormat::Netpbm,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Oracle,
    Classical,
}

impl From<Backend> for BackendKind {
    fn from(b: Backend) -> Self {
        match b {
            Backend::Oracle => BackendKind::Oracle,
            Backend::Classical => BackendKind::Classical,
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Preset name (repeatable), or `all`.
    #[arg(long, required_unless_present = "spec")]
    preset: Vec<String>,
    /// Scene description file (TOML).
    #[arg(long, conflicts_with = "preset")]
    spec: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "netpbm")]
    format: Format,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Backend for all three stages; the per-stage flags take precedence.
    #[arg(long, value_enum)]
    backend: Option<Backend>,
    #[arg(long, value_enum)]
    proposals: Option<Backend>,
    #[arg(long, value_enum)]
    scorer: Option<Backend>,
    #[arg(long, value_enum)]
    segmenter: Option<Backend>,
    /// Sample candidates around the previous box only.
    #[arg(long)]
    no_opn: bool,
    /// Replace the tracker with the enclosing box of the previous mask.
    #[arg(long)]
    no_otn: bool,
    /// Keep only the annotated frame as reference.
    #[arg(long)]
    no_dynamic_refs: bool,
    /// gt-only, gt+1, gt+2 or gt+3.
    #[arg(long, value_parser = parse_profile)]
    reference_profile: Option<ReferenceProfile>,
    /// Also write every raw proposal to proposals.csv.
    #[arg(long)]
    dump_proposals: bool,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct EvalArgs {
    /// Directory of predicted sequences, e.g. `<run>/masks`.
    #[arg(long)]
    pred: PathBuf,
    /// Dataset root or annotations root.
    #[arg(long)]
    gt: PathBuf,
    /// Where to write report.txt and report.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Boundary tolerance in pixels; default scales with the image diagonal.
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    include_first_last: bool,
}

#[derive(Args)]
struct TrackEvalArgs {
    /// Tracked boxes, e.g. `<run>/boxes.csv`.
    #[arg(long)]
    boxes: PathBuf,
    /// Box CSV, or a dataset root.
    #[arg(long)]
    gt: PathBuf,
}

#[derive(Args)]
struct RecallArgs {
    /// Proposal dump, e.g. `<run>/proposals.csv`.
    #[arg(long)]
    proposals: PathBuf,
    /// Box CSV, or a dataset root.
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    thresh: f64,
}

fn parse_profile(s: &str) -> Result<ReferenceProfile, String> {
    ReferenceProfile::parse(s).ok_or_else(|| format!("unknown profile `{s}` (gt-only, gt+1, gt+2, gt+3)"))
}

enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
    Pipeline(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Pipeline(_) => 3,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) => Failure::Usage(e.into()),
            Error::Io { .. }
            | Error::Format { .. }
            | Error::Data(_)
            | Error::DimensionMismatch(_)
            | Error::NoFrames
            | Error::DegenerateSpec(_)
            | Error::DuplicateId(_)
            | Error::EmptyMask => Failure::Data(e.into()),
            Error::NoCandidates | Error::EmptyReferenceMask | Error::Backend(_) => Failure::Pipeline(e.into()),
        }
    }
}

type Outcome = Result<(), Failure>;

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::Data)
}

fn synth(cli: &Cli, args: &SynthArgs) -> Outcome {
    let mut specs: Vec<SceneSpec> = Vec::new();
    if let Some(path) = &args.spec {
        specs.push(SceneSpec::from_toml(&read_text(path)?)?);
    }
    for name in &args.preset {
        if name == "all" {
            specs.extend(PRESET_NAMES.iter().filter_map(|n| preset(n)));
        } else {
            let spec = preset(name).ok_or_else(|| {
                Failure::Usage(anyhow::anyhow!("unknown preset `{name}`; expected one of {}, all", PRESET_NAMES.join(", ")))
            })?;
            specs.push(spec);
        }
    }
    for mut spec in specs {
        if let Some(seed) = cli.seed {
            spec.seed = seed;
        }
        let video = generate_scene(&spec)?;
        write_synthetic(&args.out, &video, args.format.into())?;
        println!("{} {} frames {} objects", spec.name, spec.frames, spec.objects.len());
    }
    Ok(())
}

fn pipeline_config(cli: &Cli, args: &RunArgs) -> Result<PipelineConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::from_toml(&read_text(path)?)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        cfg.jobs = jobs;
    }
    if let Some(b) = args.backend {
        cfg.backends.proposals = b.into();
        cfg.backends.scorer = b.into();
        cfg.backends.segmenter = b.into();
    }
    if let Some(b) = args.proposals {
        cfg.backends.proposals = b.into();
    }
    if let Some(b) = args.scorer {
        cfg.backends.scorer = b.into();
    }
    if let Some(b) = args.segmenter {
        cfg.backends.segmenter = b.into();
    }
    cfg.use_opn &= !args.no_opn;
    cfg.use_otn &= !args.no_otn;
    cfg.dynamic_refs &= !args.no_dynamic_refs;
    cfg.dump_proposals |= args.dump_proposals;
    if args.reference_profile.is_some() {
        cfg.reference_profile = args.reference_profile;
    }
    if let Some(f) = args.format {
        cfg.output_format = f.into();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli, args: &RunArgs) -> Outcome {
    let cfg = pipeline_config(cli, args)?;
    let out = run_dataset(&args.dataset, &cfg, &args.out)?;
    print!("{}", out.report.to_text());
    println!("sequences={} failed={}", out.completed.len(), out.failures.len());
    if out.failures.is_empty() {
        return Ok(());
    }
    for (name, e) in &out.failures {
        eprintln!("{name}: {e}");
    }
    Err(Failure::Pipeline(anyhow::anyhow!("{} sequence(s) failed", out.failures.len())))
}

fn eval(cli: &Cli, args: &EvalArgs) -> Outcome {
    let mut opts = match &cli.config {
        Some(path) => PipelineConfig::from_toml(&read_text(path)?)?.eval,
        None => EvalOptions::default(),
    };
    if let Some(t) = args.tolerance {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Failure::Usage(anyhow::anyhow!("tolerance must be a non-negative number")));
        }
        opts.tolerance = Tolerance::Pixels(t);
    }
    opts.include_first_last |= args.include_first_last;
    let report = evaluate_directories(&args.pred, &args.gt, &opts)?;
    if let Some(out) = &args.out {
        std::fs::create_dir_all(out)
            .with_context(|| format!("creating {}", out.display()))
            .map_err(Failure::Data)?;
        report.write_text(&out.join("report.txt"))?;
        report.write_csv(&out.join("report.csv"))?;
    }
    print!("{}", report.to_text());
    Ok(())
}

fn track(args: &TrackEvalArgs) -> Outcome {
    let pred = read_csv_rows(&args.boxes)?;
    let gt = ground_truth_boxes(&args.gt)?;
    let (auc, n) = track_eval(&pred, &gt)?;
    println!("auc={auc:.6}\nframes={n}");
    Ok(())
}

fn recall(args: &RecallArgs) -> Outcome {
    if !(0.0..=1.0).contains(&args.thresh) {
        return Err(Failure::Usage(anyhow::anyhow!("thresh must lie in [0, 1]")));
    }
    let proposals: Vec<ProposalRecord> = read_csv_rows(&args.proposals)?;
    let gt = ground_truth_boxes(&args.gt)?;
    let (r, n) = proposal_recall(&proposals, &gt, args.thresh)?;
    println!("recall={r:.6}\nframes={n}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let outcome = match &cli.command {
        Command::Synth(a) => synth(&cli, a),
        Command::Run(a) => run(&cli, a),
        Command::Eval(a) => eval(&cli, a),
        Command::TrackEval(a) => track(a),
        Command::Recall(a) => recall(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let code = f.code();
            let (Failure::Usage(e) | Failure::Data(e) | Failure::Pipeline(e)) = f;
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}
