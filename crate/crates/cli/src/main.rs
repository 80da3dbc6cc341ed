//! `planweave` command-line entry points.

mod server;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use planweave_core::agents::HttpMode;
use planweave_core::eval::{self, CorruptionKind, EvalConfig, EvalContext, FeedbackMode};
use planweave_core::executor::final_answer;
use planweave_core::lm::{EchoLm, LanguageModel, LiveLm, ScriptedLm};
use planweave_core::{parse_plan, validate, ExecError, Executor, NodeId, Planner, Registry};

#[derive(Parser)]
#[command(name = "planweave", version, about = "Human-in-the-loop multi-agent plan orchestration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a plan file against an agent registry.
    Validate {
        plan: PathBuf,
        #[arg(long)]
        registry: Option<PathBuf>,
    },
    /// Execute a plan file and print a JSON-lines trace.
    Run {
        plan: PathBuf,
        #[arg(long)]
        registry: Option<PathBuf>,
        /// Run only this node.
        #[arg(long)]
        node: Option<u32>,
        #[command(flatten)]
        lm: LmArgs,
    },
    /// Run the refinement benchmark sweep.
    Eval {
        #[arg(long, default_value = "data/corpus.json")]
        corpus: PathBuf,
        #[arg(long, default_value = "data/registry.json")]
        registry: PathBuf,
        /// Comma-separated feedback modes: detailed, vague, dm_fix.
        #[arg(long, value_delimiter = ',', default_value = "detailed,vague,dm_fix")]
        mode: Vec<String>,
        /// Comma-separated corruption kinds.
        #[arg(long, value_delimiter = ',', default_value = "remove_node,add_node,remove_edge,add_edge,wrong_agent,io_change")]
        kinds: Vec<String>,
        #[arg(long, default_value_t = eval::DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value = "eval-out")]
        out: PathBuf,
        /// Worker threads; defaults to the number of logical cores.
        #[arg(long)]
        jobs: Option<usize>,
        #[command(flatten)]
        lm: LmArgs,
    },
    /// Serve the session HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        registry: Option<PathBuf>,
        /// Directory holding one sub-directory per session.
        #[arg(long, default_value = "sessions")]
        data_dir: PathBuf,
        #[command(flatten)]
        lm: LmArgs,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LmChoice {
    /// Replay completions from the fixtures directory.
    Scripted,
    /// Answer refine and fix prompts with the plan unchanged.
    Echo,
    /// Chat-completions endpoint from PLANWEAVE_LM_* variables.
    Live,
}

#[derive(Args, Clone)]
struct LmArgs {
    #[arg(long = "lm", value_enum, default_value = "scripted")]
    lm: LmChoice,
    /// Completion fixtures for the scripted model.
    #[arg(long, default_value = "fixtures/lm")]
    fixtures: PathBuf,
    /// Response fixtures for http agents; without it they are disabled
    /// unless the model is live.
    #[arg(long)]
    http_fixtures: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    /// Bad arguments or unreadable input.
    #[error("{0}")]
    Usage(String),
    /// Invalid plan, failed node and similar.
    #[error("{0}")]
    Domain(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Usage(_) => 2,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Validate { plan, registry } => cmd_validate(&plan, registry.as_deref()),
        Command::Run { plan, registry, node, lm } => cmd_run(&plan, registry.as_deref(), node, &lm),
        Command::Eval { corpus, registry, mode, kinds, seed, out, jobs, lm } => {
            cmd_eval(&corpus, &registry, &mode, &kinds, seed, &out, jobs, &lm)
        }
        Command::Serve { port, host, registry, data_dir, lm } => {
            cmd_serve(&host, port, registry.as_deref(), data_dir, &lm)
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn load_registry(path: Option<&Path>) -> Result<Registry, CliError> {
    match path {
        Some(p) => Registry::load(p).map_err(usage),
        None => Ok(Registry::builtin()),
    }
}

fn build_lm(args: &LmArgs) -> Result<Arc<dyn LanguageModel>, CliError> {
    Ok(match args.lm {
        LmChoice::Scripted => Arc::new(ScriptedLm::new(&args.fixtures)),
        LmChoice::Echo => Arc::new(EchoLm),
        LmChoice::Live => Arc::new(LiveLm::from_env().map_err(usage)?),
    })
}

fn http_mode(args: &LmArgs) -> HttpMode {
    match (&args.http_fixtures, args.lm) {
        (Some(dir), _) => HttpMode::Fixtures(dir.clone()),
        (None, LmChoice::Live) => HttpMode::Live,
        (None, _) => HttpMode::Disabled,
    }
}

fn build_executor(registry: Arc<Registry>, lm: Arc<dyn LanguageModel>, args: &LmArgs) -> Executor {
    Executor::new(registry).with_lm(Some(lm)).with_http(http_mode(args))
}

fn cmd_validate(plan: &Path, registry: Option<&Path>) -> Result<(), CliError> {
    let registry = load_registry(registry)?;
    let text = std::fs::read_to_string(plan).map_err(|e| usage(format!("{}: {e}", plan.display())))?;
    let plan = parse_plan(&text).map_err(|e| usage(format!("{}: {e}", plan.display())))?;
    let report = validate(&plan, &registry);
    print!("{}", report.render());
    if report.is_ok() {
        Ok(())
    } else {
        Err(CliError::Domain(format!("plan has {} error(s)", report.errors.len())))
    }
}

fn cmd_run(plan: &Path, registry: Option<&Path>, node: Option<u32>, lm: &LmArgs) -> Result<(), CliError> {
    let registry = Arc::new(load_registry(registry)?);
    let text = std::fs::read_to_string(plan).map_err(|e| usage(format!("{}: {e}", plan.display())))?;
    let plan = parse_plan(&text).map_err(|e| usage(format!("{}: {e}", plan.display())))?;
    let executor = build_executor(registry, build_lm(lm)?, lm);
    let mut stdout = std::io::stdout().lock();
    match node {
        None => {
            let (_, trace) = executor.execute_all(&plan).map_err(domain)?;
            stdout.write_all(trace.to_json_lines().as_bytes()).map_err(usage)?;
            let failure = trace.failures().next().map(|failed| {
                CliError::Domain(format!(
                    "node {} failed: {}",
                    failed.node,
                    failed.error.as_deref().unwrap_or("unknown error")
                ))
            });
            failure.map_or(Ok(()), Err)
        }
        Some(id) => {
            let (after, record) = executor.execute_node(&plan, NodeId(id)).map_err(domain)?;
            let record_line = serde_json::to_string(&record).expect("record serializes");
            let answer = serde_json::json!({ "final_answer": final_answer(&after) });
            writeln!(stdout, "{record_line}\n{answer}").map_err(usage)?;
            Ok(())
        }
    }
}

fn domain(e: ExecError) -> CliError {
    CliError::Domain(e.to_string())
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    corpus: &Path,
    registry: &Path,
    modes: &[String],
    kinds: &[String],
    seed: u64,
    out: &Path,
    jobs: Option<usize>,
    lm: &LmArgs,
) -> Result<(), CliError> {
    let modes = modes.iter().map(|m| m.parse::<FeedbackMode>()).collect::<Result<Vec<_>, _>>().map_err(usage)?;
    let kinds = kinds.iter().map(|k| k.parse::<CorruptionKind>()).collect::<Result<Vec<_>, _>>().map_err(usage)?;
    let registry = Arc::new(Registry::load(registry).map_err(usage)?);
    let model = build_lm(lm)?;
    let verifier = Executor::new(registry.clone());
    let cases = eval::load_verified(corpus, &verifier).map_err(usage)?;
    let executor = build_executor(registry.clone(), model.clone(), lm);
    let planner = Planner::new(registry.clone(), model);
    let ctx = EvalContext { registry: &registry, executor: &executor, planner: Some(&planner) };
    let config = EvalConfig {
        master_seed: seed,
        modes,
        kinds,
        jobs: jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
        ..EvalConfig::default()
    };
    let outcome = eval::run_sweep(&ctx, &cases, &config);
    let report = outcome.report();
    std::fs::create_dir_all(out).map_err(usage)?;
    let write = |name: &str, body: &str| std::fs::write(out.join(name), body).map_err(usage);
    write("report.json", &report.to_json())?;
    write("report.txt", &report.to_table())?;
    write("results.jsonl", &outcome.results_jsonl())?;
    for skip in &outcome.skipped {
        eprintln!("skipped {} {}: {}", skip.case_id, skip.kind, skip.reason);
    }
    // A closed stdout (e.g. piped into `head`) is not a failure of the sweep.
    let mut stdout = std::io::stdout().lock();
    let _ = write!(stdout, "{}", report.to_table());
    let _ = writeln!(stdout, "wrote {}", out.join("report.json").display());
    Ok(())
}

fn cmd_serve(host: &str, port: u16, registry: Option<&Path>, data_dir: PathBuf, lm: &LmArgs) -> Result<(), CliError> {
    let registry = Arc::new(load_registry(registry)?);
    let model = build_lm(lm)?;
    let executor = build_executor(registry.clone(), model.clone(), lm);
    let planner = Planner::new(registry, model.clone());
    let store = planweave_core::session::SessionStore::new(Some(data_dir), planner, executor, model);
    store.load_all().map_err(usage)?;
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(usage)?;
    runtime.block_on(server::serve(Arc::new(store), host, port)).map_err(usage)
}
