use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use clothpile::affordance::{collect_training_data, train, write_dataset, AffordanceModel, CollectConfig, TrainConfig};
use clothpile::harness::{ablation_label, load_logs, report_table, run_experiment, save_logs, ExperimentConfig, MetricsReport, RemoteSettings};
use clothpile::pile::{generate_scene, BoundaryKind, SceneConfig};
use clothpile::pipeline::Ablation;
use clothpile::reasoner::{ReasonerKind, TargetDescriptor, TaskKind, TaskSpec, DEFAULT_TIMEOUT_MS};
use clothpile::Error;

#[derive(Parser)]
#[command(name = "clothpile", version, about = "Garment-pile retrieval simulator and benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run retrieval episodes and write an episode log.
    Run(RunArgs),
    /// Collect grasp labels and train an affordance model.
    TrainAffordance(TrainArgs),
    /// Print metrics for one or more episode logs.
    Report {
        #[arg(long = "in", value_delimiter = ',', required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Generate a scene and write it as JSON.
    GenScene {
        #[arg(long)]
        boundary: BoundaryKind,
        #[arg(long)]
        count_min: usize,
        #[arg(long)]
        count_max: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long, value_parser = parse_task)]
    task: TaskKind,
    /// COLOR[:CATEGORY], required for task b.
    #[arg(long)]
    target: Option<TargetDescriptor>,
    #[arg(long)]
    boundary: BoundaryKind,
    #[arg(long)]
    episodes: usize,
    #[arg(long)]
    seed: u64,
    /// Comma-separated components to remove.
    #[arg(long, value_delimiter = ',')]
    ablate: Vec<Ablation>,
    #[arg(long, default_value = "rule")]
    reasoner: ReasonerKind,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Also print the metrics table.
    #[arg(long)]
    report: bool,
    #[arg(long)]
    count_min: Option<usize>,
    #[arg(long)]
    count_max: Option<usize>,
    #[arg(long, env = "REASONER_URL")]
    reasoner_url: Option<String>,
    #[arg(long, env = "REASONER_TIMEOUT_MS")]
    reasoner_timeout_ms: Option<u64>,
}

#[derive(clap::Args)]
struct TrainArgs {
    #[arg(long)]
    scenes: usize,
    #[arg(long)]
    samples_per_scene: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    hidden: usize,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long)]
    out: PathBuf,
    /// Write the collected examples as JSONL.
    #[arg(long)]
    dataset_out: Option<PathBuf>,
}

fn parse_task(s: &str) -> Result<TaskKind, String> {
    match s.to_ascii_lowercase().as_str() {
        "a" => Ok(TaskKind::A),
        "b" => Ok(TaskKind::B),
        _ => Err(format!("unknown task '{s}' (expected a or b)")),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        e if e.is_remote() => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::TrainAffordance(args) => train_affordance(args),
        Command::Report { inputs } => report(&inputs),
        Command::GenScene { boundary, count_min, count_max, seed, out } => {
            gen_scene(boundary, count_min, count_max, seed, out)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(args: RunArgs) -> Result<u8, Error> {
    let task = match args.task {
        TaskKind::A => TaskSpec::retrieve_all(),
        TaskKind::B => TaskSpec {
            kind: TaskKind::B,
            target: args.target,
        },
    };
    let mut cfg = ExperimentConfig::new(args.boundary, args.episodes, args.seed)
        .with_ablations(args.ablate.iter().copied().collect::<BTreeSet<_>>());
    cfg.task = task;
    cfg.reasoner = args.reasoner;
    cfg.model_path = args.model;
    if let Some(n) = args.count_min {
        cfg.count_min = n;
    }
    if let Some(n) = args.count_max {
        cfg.count_max = n;
    }
    if let Some(url) = args.reasoner_url {
        cfg.remote = Some(RemoteSettings {
            url,
            timeout_ms: args.reasoner_timeout_ms.unwrap_or(DEFAULT_TIMEOUT_MS),
        });
    } else if cfg.reasoner == ReasonerKind::Remote {
        return Err(Error::Config("the remote reasoner needs --reasoner-url or REASONER_URL".into()));
    }

    let (logs, report) = run_experiment(&cfg)?;
    save_logs(&args.out, &logs)?;
    if args.report {
        print!("{}", report_table(&[report]));
    }
    if let Some((ep, msg)) = logs.iter().find_map(|l| l.remote_failure().map(|m| (l.header.episode, m))) {
        eprintln!("error: episode {ep}: {msg}");
        return Ok(3);
    }
    Ok(0)
}

fn train_affordance(args: TrainArgs) -> Result<u8, Error> {
    if args.scenes == 0 || args.samples_per_scene == 0 || args.epochs == 0 || args.hidden == 0 {
        return Err(Error::Config("scenes, samples-per-scene, epochs and hidden must be positive".into()));
    }
    if !(args.lr.is_finite() && args.lr > 0.0) || args.batch_size == 0 {
        return Err(Error::Config("lr must be positive and batch-size nonzero".into()));
    }
    let data = collect_training_data(&CollectConfig::new(args.scenes, args.samples_per_scene, args.seed))?;
    if let Some(path) = &args.dataset_out {
        write_dataset(path, &data)?;
    }
    let init = AffordanceModel::with_hidden(args.hidden, args.seed)?;
    let tc = TrainConfig {
        lr: args.lr,
        epochs: args.epochs,
        batch_size: args.batch_size,
        seed: args.seed,
    };
    let model = train(&init, &data, &tc)?;
    model.save(&args.out)?;
    let positives = data.iter().filter(|e| e.label == 1).count();
    println!(
        "examples {} positives {} loss {:.4} accuracy {:.3}",
        data.len(),
        positives,
        model.mean_loss(&data)?,
        model.accuracy(&data)?
    );
    Ok(0)
}

fn report(inputs: &[PathBuf]) -> Result<u8, Error> {
    let mut reports = Vec::new();
    for path in inputs {
        let logs = load_logs(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let label = match logs.first() {
            Some(l) => ablation_label(&l.header.config.ablations),
            None => path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        };
        reports.push(MetricsReport::from_logs(&label, &logs));
    }
    print!("{}", report_table(&reports));
    Ok(0)
}

fn gen_scene(boundary: BoundaryKind, count_min: usize, count_max: usize, seed: u64, out: PathBuf) -> Result<u8, Error> {
    let cfg = SceneConfig::for_boundary(boundary).with_counts(count_min, count_max);
    let scene = generate_scene(&cfg, seed).map_err(|e| Error::Config(e.to_string()))?;
    scene.save(&out)?;
    Ok(0)
}
