use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use confrank::harness::{self, ExperimentConfig};
use confrank::synthgen::{self, Interactions, ModelSpec, SynthSpec};
use confrank::{Approach, Error, SamplerParams, SplitFractions, TreeParams};

#[derive(Parser)]
#[command(
    name = "confrank",
    version,
    about = "Find near-optimal configurations with few measurements"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sampling approaches on one or more datasets.
    Run(RunArgs),
    /// Trade measurements against rank difference for several lives values.
    SweepLives(SweepArgs),
    /// Write a synthetic configuration table as CSV.
    Synth(SynthArgs),
}

#[derive(Args)]
struct Common {
    /// Configuration tables (CSV, performance in the last column by default).
    #[arg(long = "data", num_args = 1.., required = true)]
    data: Vec<PathBuf>,
    /// Name of the performance column.
    #[arg(long)]
    perf_column: Option<String>,
    /// Treat larger performance values as better.
    #[arg(long)]
    maximize_perf: bool,
    #[arg(long, default_value_t = 20)]
    repeats: usize,
    #[arg(long, default_value_t = 3)]
    thresh_freq: usize,
    /// Train, test and validation fractions.
    #[arg(long, default_value = "0.4,0.2,0.4")]
    split: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    with_replacement: bool,
    #[arg(long)]
    reset_lives: bool,
    #[arg(long, default_value_t = 1)]
    batch_size: usize,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long, default_value_t = 2)]
    min_samples_split: usize,
    #[arg(long, default_value_t = 1)]
    min_samples_leaf: usize,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated list of progressive, projective, rank-based.
    #[arg(long, default_value = "progressive,projective,rank-based")]
    approaches: String,
    #[arg(long, default_value_t = 3)]
    lives: usize,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated lives values.
    #[arg(long, default_value = "2,3,4,5,10")]
    lives: String,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 8)]
    binary: usize,
    #[arg(long, default_value_t = 0)]
    numeric: usize,
    /// Levels of each numeric option.
    #[arg(long, default_value_t = 3)]
    levels: usize,
    /// none, sparse or dense.
    #[arg(long, default_value = "sparse")]
    interactions: String,
    /// Three-way multiplicative terms.
    #[arg(long, default_value_t = 0)]
    hard_terms: usize,
    /// Noise sd as a fraction of the noise-free sd.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 100.0)]
    offset: f64,
    /// Largest table written; bigger spaces are sampled.
    #[arg(long, default_value_t = 10_000)]
    cap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Config(String),
    Dataset(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_dataset_error() {
            Failure::Dataset(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

fn parse_list<T>(s: &str, what: &str, parse: impl Fn(&str) -> Option<T>) -> Result<Vec<T>, Failure> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| parse(p).ok_or_else(|| Failure::Config(format!("invalid {what}: {p:?}"))))
        .collect()
}

fn config_from(common: &Common, approaches: Vec<Approach>, lives: usize) -> Result<ExperimentConfig, Failure> {
    let parts = parse_list(&common.split, "split fraction", |p| p.parse::<f64>().ok())?;
    let [train, test, validate] = parts[..] else {
        return Err(Failure::Config(format!(
            "--split needs three fractions, got {:?}",
            common.split
        )));
    };
    let config = ExperimentConfig {
        datasets: common.data.clone(),
        schema_performance_column: common.perf_column.clone(),
        maximize_performance: common.maximize_perf,
        approaches,
        repeats: common.repeats,
        fractions: SplitFractions::new(train, test, validate).map_err(|e| Failure::Config(e.to_string()))?,
        sampler: SamplerParams {
            lives,
            thresh_freq: common.thresh_freq,
            batch_size: common.batch_size,
            with_replacement: common.with_replacement,
            reset_lives: common.reset_lives,
            tree: TreeParams {
                min_samples_split: common.min_samples_split,
                min_samples_leaf: common.min_samples_leaf,
                max_depth: common.max_depth,
            },
            ..SamplerParams::default()
        },
        master_seed: common.seed,
        jobs: common.jobs,
        output_dir: Some(common.out.clone()),
        ..ExperimentConfig::default()
    };
    config.validate().map_err(|e| Failure::Config(e.to_string()))?;
    Ok(config)
}

fn prepare_out(dir: &std::path::Path) -> Result<(), Failure> {
    harness::prepare_output_dir(dir).map_err(|e| Failure::Config(e.to_string()))
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let approaches = parse_list(&args.approaches, "approach", Approach::parse)?;
    let config = config_from(&args.common, approaches, args.lives)?;
    prepare_out(&args.common.out)?;
    let report = harness::run_experiment(&config)?;
    harness::emit_outputs(&report, &args.common.out).map_err(|e| Failure::Config(e.to_string()))?;
    print!("{}", harness::summary_csv(&report));
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<(), Failure> {
    let lives = parse_list(&args.lives, "lives value", |p| p.parse::<usize>().ok())?;
    let mut config = config_from(&args.common, vec![Approach::RankBased], 3)?;
    config.lives_sweep = Some(lives.clone());
    config.validate().map_err(|e| Failure::Config(e.to_string()))?;
    prepare_out(&args.common.out)?;
    let tables = config.load_datasets()?;
    let rows = harness::sweep_lives(&config, &tables, &lives)?;
    let csv = harness::sweep_csv(&rows);
    let path = args.common.out.join("sweep.csv");
    fs::write(&path, &csv).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    print!("{csv}");
    Ok(())
}

fn synth(args: SynthArgs) -> Result<(), Failure> {
    let interactions = Interactions::parse(&args.interactions)
        .ok_or_else(|| Failure::Config(format!("invalid interactions: {:?}", args.interactions)))?;
    let name = args
        .out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "synthetic".into());
    let spec = SynthSpec {
        name,
        n_binary: args.binary,
        n_numeric: args.numeric,
        numeric_levels: args.levels,
        model: ModelSpec::Random {
            interactions,
            hard_terms: args.hard_terms,
            interaction_scale: 0.5,
            hard_scale: 1.0,
            main_decay: 1.0,
        },
        noise: args.noise,
        offset: args.offset,
        cap: args.cap,
        seed: args.seed,
    };
    let table = synthgen::generate(&spec).map_err(|e| Failure::Config(e.to_string()))?;
    let mut buf = Vec::new();
    table.write_csv(&mut buf).map_err(|e| Failure::Config(e.to_string()))?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Failure::Config(format!("{}: {e}", parent.display())))?;
    }
    fs::write(&args.out, buf).map_err(|e| Failure::Config(format!("{}: {e}", args.out.display())))?;
    eprintln!("wrote {} rows to {}", table.len(), args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::SweepLives(args) => sweep(args),
        Command::Synth(args) => synth(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Dataset(msg)) => {
            eprintln!("dataset error: {msg}");
            ExitCode::from(2)
        }
    }
}
