use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tracing_subscriber::EnvFilter;

use proactive_agent::backend::{LlmBackend, RemoteBackend, ScriptedBackend};
use proactive_agent::clock::SystemClock;
use proactive_agent::eval::{
    aggregate, generate_tasks, load_tasks, run_batch, score_run, BatchConfig, Mix, ScoreMode, Timing,
};
use proactive_agent::fixtures;
use proactive_agent::gateway::{replay_file, serve, Catalog, Engine, EngineConfig};
use proactive_agent::sandbox::DashboardModel;
use proactive_agent::store::Knowledge;

#[derive(Parser)]
#[command(name = "proactive", version, about = "Proactive assistant runtime for analytics dashboards")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Data {
    /// Fixture directory holding the bundled datasets.
    #[arg(long, default_value_os_t = fixtures::default_dir())]
    fixtures: PathBuf,
    /// Extra dataset CSV; needs --layout and --knowledge.
    #[arg(long, requires_all = ["layout", "knowledge"])]
    dataset: Option<PathBuf>,
    #[arg(long)]
    layout: Option<PathBuf>,
    #[arg(long)]
    knowledge: Option<PathBuf>,
    /// Name for the extra dataset and profile.
    #[arg(long, default_value = "custom")]
    name: String,
    /// `remote` (reads PROACTIVE_LLM_* from the environment) or `scripted:<file>`.
    #[arg(long, default_value = "remote")]
    backend: String,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the line protocol over TCP.
    Serve {
        #[command(flatten)]
        data: Data,
        #[arg(long, default_value_t = 7878)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Replay a client transcript under a fake clock and print the pushed frames.
    Replay {
        #[command(flatten)]
        data: Data,
        transcript: PathBuf,
    },
    /// Run an evaluation batch and print the report.
    Eval {
        #[command(flatten)]
        data: Data,
        /// Task file; defaults to the bundled set.
        #[arg(long)]
        tasks: Option<PathBuf>,
        /// Ask the backend for this many new tasks instead of reading a file.
        #[arg(long)]
        generate: Option<usize>,
        /// `standard`, `uniform` or `comparison=0.2,trend=0.2,...`.
        #[arg(long, default_value = "standard")]
        mix: String,
        #[arg(long, value_enum, default_value_t = Mode::Rubric)]
        mode: Mode,
        #[arg(long, value_enum, default_value_t = Clock::Simulated)]
        timing: Clock,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long, default_value_t = 10)]
        max_steps: u32,
        #[arg(long, value_enum, default_value_t = Format::Tsv)]
        format: Format,
    },
    /// Regenerate the bundled fixtures.
    GenFixtures {
        #[arg(long, default_value_os_t = fixtures::default_dir())]
        dir: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Rubric,
    Judge,
}

#[derive(Clone, Copy, ValueEnum)]
enum Clock {
    Simulated,
    Measured,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Tsv,
    Json,
}

fn backend(spec: &str) -> Result<Arc<dyn LlmBackend + Send + Sync>, String> {
    match spec.split_once(':') {
        Some(("scripted", path)) => Ok(Arc::new(ScriptedBackend::load(Path::new(path)).map_err(|e| e.to_string())?)),
        None if spec == "remote" => Ok(Arc::new(RemoteBackend::from_env().map_err(|e| e.to_string())?)),
        _ => Err(format!("unknown backend {spec:?}; use remote or scripted:<file>")),
    }
}

fn catalog(data: &Data) -> Result<Catalog, String> {
    let mut c = fixtures::catalog_from_dir(&data.fixtures).map_err(|e| e.to_string())?;
    if let (Some(csv), Some(layout), Some(knowledge)) = (&data.dataset, &data.layout, &data.knowledge) {
        c = c.load(&data.name, knowledge, &data.name, csv, layout).map_err(|e| e.to_string())?;
    }
    Ok(c)
}

fn eval_data(data: &Data) -> Result<(Arc<DashboardModel>, Knowledge), String> {
    let (csv, layout, knowledge) = match (&data.dataset, &data.layout, &data.knowledge) {
        (Some(c), Some(l), Some(k)) => (c.clone(), l.clone(), k.clone()),
        _ => {
            let d = data.fixtures.join("superstore");
            (d.join("orders.csv"), d.join("layout.json"), d.join("knowledge.json"))
        }
    };
    let model = DashboardModel::load(&csv, &layout).map_err(|e| e.to_string())?;
    let knowledge = Knowledge::load(&knowledge).map_err(|e| e.to_string())?;
    Ok((Arc::new(model), knowledge))
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Serve { data, port, host } => {
            let engine = Arc::new(Engine::new(catalog(&data)?, backend(&data.backend)?));
            serve((host.as_str(), port), engine, Arc::new(SystemClock)).map_err(|e| e.to_string())
        }
        Command::Replay { data, transcript } => {
            let out = replay_file(catalog(&data)?, backend(&data.backend)?, EngineConfig::default(), &transcript)
                .map_err(|e| e.to_string())?;
            print!("{}", out.transcript());
            Ok(())
        }
        Command::Eval { data, tasks, generate, mix, mode, timing, workers, max_steps, format } => {
            let (model, knowledge) = eval_data(&data)?;
            let backend = backend(&data.backend)?;
            let bundled = data.fixtures.join("eval/tasks.json");
            let tasks = match generate {
                Some(n) => {
                    let mix = Mix::parse(&mix).map_err(|e| e.to_string())?;
                    let pool = load_tasks(&bundled).unwrap_or_default();
                    generate_tasks(n, mix, &*backend, &knowledge, &pool).map_err(|e| e.to_string())?
                }
                None => load_tasks(tasks.as_deref().unwrap_or(&bundled)).map_err(|e| e.to_string())?,
            };
            let cfg = BatchConfig {
                max_steps,
                workers,
                timing: match timing {
                    Clock::Simulated => BatchConfig::default().timing,
                    Clock::Measured => Timing::Measured,
                },
            };
            let mut runs = run_batch(&tasks, &cfg, &model, &knowledge, &*backend);
            let score_mode = match mode {
                Mode::Rubric => ScoreMode::Rubric,
                Mode::Judge => ScoreMode::Judge(&*backend),
            };
            for (r, t) in runs.iter_mut().zip(&tasks) {
                score_run(r, t, score_mode, &model);
            }
            let report = aggregate(&runs).map_err(|e| e.to_string())?;
            match format {
                Format::Tsv => print!("{}", report.to_tsv()),
                Format::Json => println!("{}", report.to_json()),
            }
            Ok(())
        }
        Command::GenFixtures { dir } => {
            for p in fixtures::write_all(&dir).map_err(|e| e.to_string())? {
                println!("{}", p.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
