use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use skillweak::{CandidateEncoding, MatchMode, MethodRegistry};

mod commands;
mod config;
mod output;
mod stage;

use commands::Run;
use config::{EvalSplit, Overrides, RunConfig};
use output::{Manifest, OutDir};
use stage::{fail, AtStage, Stage, StageResult};

/// Weakly supervised skill-span extraction against a skill taxonomy.
#[derive(Parser)]
#[command(name = "skillweak", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Surface statistics of the skill inventory and dataset splits.
    Stats,
    /// Run a surface baseline (exact, lemma, pos) and score it.
    Baseline,
    /// Inverse document frequencies over the train and dev splits.
    Idf,
    /// Build and save a skill representation table (iso, aoc, wse).
    Represent,
    /// Run any registered method end to end and score it.
    #[command(alias = "run")]
    Match,
    /// Score an embedding method over a list of thresholds.
    Sweep,
    /// Score an existing predictions file.
    Eval,
    /// List the registered methods.
    Methods,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Stats => "stats",
            Command::Baseline => "baseline",
            Command::Idf => "idf",
            Command::Represent => "represent",
            Command::Match => "match",
            Command::Sweep => "sweep",
            Command::Eval => "eval",
            Command::Methods => "methods",
        }
    }
}

#[derive(Args)]
struct Flags {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    method: Option<String>,
    #[arg(long, global = true)]
    tau: Option<f64>,
    #[arg(long, global = true)]
    n_max: Option<usize>,
    #[arg(long, global = true, value_parser = parse_mode)]
    mode: Option<MatchMode>,
    #[arg(long, global = true, value_parser = parse_encoding)]
    candidate_encoding: Option<CandidateEncoding>,
    /// Contextual token store directory.
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    #[arg(long, global = true)]
    phrase_store: Option<PathBuf>,
    /// Use hash vectors of this dimension instead of stores.
    #[arg(long, global = true)]
    hash_dim: Option<usize>,
    #[arg(long, global = true)]
    train: Option<PathBuf>,
    #[arg(long, global = true)]
    dev: Option<PathBuf>,
    #[arg(long, global = true)]
    test: Option<PathBuf>,
    #[arg(long, global = true)]
    skills: Option<PathBuf>,
    #[arg(long, global = true)]
    predictions: Option<PathBuf>,
    #[arg(long, global = true, value_parser = parse_split)]
    split: Option<EvalSplit>,
    /// Comma-separated thresholds for `sweep`.
    #[arg(long, global = true, value_delimiter = ',')]
    taus: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pos_top_k: Option<usize>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

fn parse_mode(s: &str) -> Result<MatchMode, String> {
    s.parse()
}

fn parse_encoding(s: &str) -> Result<CandidateEncoding, String> {
    s.parse()
}

fn parse_split(s: &str) -> Result<EvalSplit, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown split {s:?}"))
}

impl Flags {
    fn overrides(&self) -> Overrides {
        Overrides {
            train: self.train.clone(),
            dev: self.dev.clone(),
            test: self.test.clone(),
            skills: self.skills.clone(),
            phrase_store: self.phrase_store.clone(),
            context_store: self.store.clone(),
            hash_dim: self.hash_dim,
            predictions: self.predictions.clone(),
            method: self.method.clone(),
            tau: self.tau,
            n_max: self.n_max,
            mode: self.mode,
            candidate_encoding: self.candidate_encoding,
            eval_split: self.split,
            taus: self.taus.clone(),
            pos_top_k: self.pos_top_k,
            out: self.out.clone(),
            seed: self.seed,
            workers: self.workers,
        }
    }
}

fn resolve(flags: &Flags) -> StageResult<RunConfig> {
    let mut cfg = match &flags.config {
        Some(p) => RunConfig::load(p).at(Stage::Config)?,
        None => RunConfig::default(),
    };
    cfg.apply(flags.overrides());
    cfg.validate().at(Stage::Config)?;
    Ok(cfg)
}

fn execute(cli: Cli) -> StageResult<()> {
    let registry = MethodRegistry::with_builtins();
    if cli.command == Command::Methods {
        for (name, description) in registry.describe() {
            println!("{name:<6} {description}");
        }
        return Ok(());
    }
    let cfg = resolve(&cli.flags)?;
    let uses_method = !matches!(cli.command, Command::Stats | Command::Idf | Command::Eval);
    if uses_method && !registry.contains(&cfg.method) {
        return fail(
            Stage::Usage,
            format!("unknown method {:?}; available: {}", cfg.method, registry.names().join(", ")),
        );
    }

    let workers = cfg
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .at(Stage::Config)?;

    let out = OutDir::create(&cfg.out).at(Stage::Output)?;
    let mut config_json = serde_json::to_string_pretty(&cfg).at(Stage::Output)?;
    config_json.push('\n');
    out.text("config.json", &config_json).at(Stage::Output)?;
    let method = if uses_method { cfg.method.as_str() } else { "" };
    let mut manifest = Manifest::new(cli.command.name(), &config_json, method, cfg.seed, workers);

    let mut run = Run {
        cfg: &cfg,
        out: &out,
        manifest: &mut manifest,
        registry: &registry,
    };
    match cli.command {
        Command::Stats => run.stats()?,
        Command::Baseline => run.baseline()?,
        Command::Idf => run.idf()?,
        Command::Represent => run.represent()?,
        Command::Match => run.run_method()?,
        Command::Sweep => run.sweep()?,
        Command::Eval => run.eval()?,
        Command::Methods => unreachable!(),
    }
    out.json("manifest.json", &manifest).at(Stage::Output)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.stage.exit_code() as u8)
        }
    }
}
