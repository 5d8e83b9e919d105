mod report;

use std::fs;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use prefpareto_core::experiment::{
    evaluation_profiles, pb_ib_matrix, run_seeds, tau_curve, tune_ranker, tuning_profiles, MatrixArgs, TauCurveArgs,
    TuneArgs, TuneChoice, TuneReport,
};
use prefpareto_core::mo::Indicator;
use prefpareto_core::ranker::TrainConfig;
use serde_json::json;

#[derive(Debug, Parser)]
#[command(name = "prefpareto", version, about = "Preference-guided multi-objective HPO experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cross-validated ranking quality of learned utilities per pair budget.
    TauCurve(TauCurveCmd),
    /// Preference-based against indicator-based optimization, 4x4 table.
    Matrix(MatrixCmd),
    /// Grid search over the ranker's regularization on held-out profiles.
    TuneRanker(TuneCmd),
    /// Run the session REST service.
    Serve(ServeCmd),
}

#[derive(Debug, Args)]
struct Common {
    /// Base seed; runs use consecutive seeds starting here.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct Training {
    /// Ranker regularization strength.
    #[arg(long, default_value_t = TrainConfig::default().reg)]
    reg: f64,
    #[arg(long, default_value_t = TrainConfig::default().max_epochs)]
    max_epochs: usize,
    /// tune.json from `tune-ranker`; its per-indicator choices replace --reg.
    #[arg(long)]
    tuned: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TauCurveCmd {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    training: Training,
    #[arg(long, value_delimiter = ',', default_value = "HV,SP,MS,R2")]
    indicators: Vec<Indicator>,
    #[arg(long, value_delimiter = ',', default_value = "28,56,84,112,140")]
    n_pairs: Vec<usize>,
    /// Number of evaluation profiles.
    #[arg(long, default_value_t = 3)]
    profiles: usize,
    /// Number of seeds per profile.
    #[arg(long, default_value_t = 3)]
    seeds: usize,
}

#[derive(Debug, Args)]
struct MatrixCmd {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    training: Training,
    #[arg(long, default_value_t = 10)]
    profiles: usize,
    #[arg(long, default_value_t = 3)]
    seeds: usize,
    /// Evaluations per optimization run.
    #[arg(long, default_value_t = 30)]
    budget: usize,
    /// Simulated comparisons per learned utility.
    #[arg(long, default_value_t = 28)]
    n_pairs: usize,
    /// Surrogate candidates per proposal.
    #[arg(long, default_value_t = 1000)]
    candidates: usize,
}

#[derive(Debug, Args)]
struct TuneCmd {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.1,1,10")]
    reg_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "HV,SP,MS,R2")]
    indicators: Vec<Indicator>,
    /// Number of held-out tuning profiles.
    #[arg(long, default_value_t = 3)]
    profiles: usize,
    #[arg(long, default_value_t = 3)]
    seeds: usize,
    #[arg(long, default_value_t = 28)]
    n_pairs: usize,
}

#[derive(Debug, Args)]
struct ServeCmd {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
    /// Session files live here; without it sessions are kept in memory.
    #[arg(long, env = prefpareto_service::DATA_DIR_ENV)]
    data_dir: Option<PathBuf>,
}

struct Failure {
    code: &'static str,
    message: String,
}

impl Failure {
    fn new(code: &'static str, message: impl ToString) -> Self {
        Failure { code, message: message.to_string() }
    }
}

fn train_config(t: &Training) -> Result<(TrainConfig, Vec<TuneChoice>), Failure> {
    let base = TrainConfig { reg: t.reg, max_epochs: t.max_epochs, ..Default::default() };
    let tuned = match &t.tuned {
        None => Vec::new(),
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::new("io", format!("{}: {e}", path.display())))?;
            let report: TuneReport = serde_json::from_str(&text)
                .map_err(|e| Failure::new("invalid_argument", format!("{}: {e}", path.display())))?;
            report.selected
        }
    };
    Ok((base, tuned))
}

fn prepare_out(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::new("io", format!("{}: {e}", dir.display())))
}

fn finish(written: report::Written, headline: serde_json::Value) -> serde_json::Value {
    let files: Vec<String> = written.files.iter().map(|p| p.display().to_string()).collect();
    json!({ "files": files, "summary": headline })
}

fn run(cli: Cli) -> Result<serde_json::Value, Failure> {
    let experiment = |e: prefpareto_core::error::Error| Failure::new("invalid_argument", e);
    let io = |e: String| Failure::new("io", e);
    match cli.command {
        Command::TauCurve(c) => {
            let (train, tuned) = train_config(&c.training)?;
            let args = TauCurveArgs {
                indicators: c.indicators,
                n_pairs: c.n_pairs,
                profiles: evaluation_profiles(c.profiles),
                seeds: run_seeds(c.common.seed, c.seeds),
                train,
                tuned,
            };
            let rep = tau_curve(&args).map_err(experiment)?;
            prepare_out(&c.common.out)?;
            let headline: Vec<_> = rep
                .summary
                .iter()
                .map(|s| json!({"indicator": s.indicator, "n_pairs": s.n_pairs, "tau_mean": s.tau_mean}))
                .collect();
            Ok(finish(report::tau_curve(&c.common.out, &rep).map_err(io)?, json!(headline)))
        }
        Command::Matrix(c) => {
            let (train, tuned) = train_config(&c.training)?;
            let args = MatrixArgs {
                profiles: evaluation_profiles(c.profiles),
                seeds: run_seeds(c.common.seed, c.seeds),
                budget: c.budget,
                n_pairs: c.n_pairs,
                train,
                tuned,
                n_candidates: c.candidates,
            };
            let rep = pb_ib_matrix(&args).map_err(experiment)?;
            prepare_out(&c.common.out)?;
            let headline = json!({
                "wins": rep.summary.wins,
                "ties": rep.summary.ties,
                "losses": rep.summary.losses,
                "better_or_equal": rep.summary.better_or_equal(),
            });
            Ok(finish(report::matrix(&c.common.out, &rep).map_err(io)?, headline))
        }
        Command::TuneRanker(c) => {
            let args = TuneArgs {
                reg_grid: c.reg_grid,
                indicators: c.indicators,
                profiles: tuning_profiles(c.profiles),
                seeds: run_seeds(c.common.seed, c.seeds),
                n_pairs: c.n_pairs,
            };
            let rep = tune_ranker(&args).map_err(experiment)?;
            prepare_out(&c.common.out)?;
            let headline: Vec<_> = rep
                .selected
                .iter()
                .map(|s| json!({"indicator": s.indicator, "reg": s.train.reg, "tau_mean": s.tau_mean}))
                .collect();
            Ok(finish(report::tune(&c.common.out, &rep).map_err(io)?, json!(headline)))
        }
        Command::Serve(c) => {
            let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::new("io", e))?;
            let addr = SocketAddr::new(c.host, c.port);
            runtime
                .block_on(prefpareto_service::serve(addr, c.data_dir))
                .map_err(|e| Failure::new("io", format!("{addr}: {e}")))?;
            Ok(json!({ "stopped": true }))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let message = e.kind().to_string();
            let detail = e.render().to_string();
            let detail = detail.lines().next().unwrap_or(&message).trim_start_matches("error: ");
            eprintln!("{}", json!({ "error": { "code": "usage", "message": detail } }));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(out) => {
            println!("{out}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("{}", json!({ "error": { "code": f.code, "message": f.message } }));
            ExitCode::FAILURE
        }
    }
}
