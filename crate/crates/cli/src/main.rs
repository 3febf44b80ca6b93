//! `nashzero`: run, summarize and verify zeroth-order learning experiments.

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use nashzero_core::analysis::{fit_rate, DEFAULT_WINDOW_FRACTION};
use nashzero_core::experiment::{
    curve_from_rows, rate_report, read_csv, run_experiment, write_csv, write_meta, ExperimentConfig,
};
use nashzero_core::verify::{run_suite, Suite, VerifyOptions};
use nashzero_core::{catalog, Error, FeedbackMode};

const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_NUMERIC: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "nashzero", version, about = "Payoff-based learning of Nash equilibria in continuous games")]
struct Cli {
    /// Worker threads for ensemble runs and Monte-Carlo checks.
    #[arg(long, global = true, env = "NASHZERO_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an ensemble of learners and write `run_id,t,dist_sq` rows.
    Run(RunArgs),
    /// Fit the log-log convergence rate of a run CSV.
    Rate(RateArgs),
    /// Check analytic properties of a catalog game.
    Verify(VerifyArgs),
    /// List catalog games.
    Games,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// `key = value` config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    game: Option<String>,
    #[arg(long)]
    mode: Option<FeedbackMode>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    iterations: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Maximum number of checkpoints per run.
    #[arg(long)]
    checkpoints: Option<usize>,
    #[arg(long, alias = "output")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RateArgs {
    #[arg(long, alias = "in")]
    input: PathBuf,
    /// Fit over checkpoints with `t >= window * T`.
    #[arg(long, default_value_t = DEFAULT_WINDOW_FRACTION)]
    window: f64,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    game: String,
    #[arg(long)]
    suite: String,
    /// Monte-Carlo samples per estimate.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn io(path: &Path, err: io::Error) -> Self {
        Self {
            code: EXIT_IO,
            message: format!("{}: {err}", path.display()),
        }
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        let code = if err.is_numeric() { EXIT_NUMERIC } else { EXIT_USAGE };
        Self {
            code,
            message: err.to_string(),
        }
    }
}

fn resolve_config(args: &RunArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
        cfg.apply_file(&text)?;
    }
    if let Some(v) = &args.game {
        cfg.game = v.clone();
    }
    if let Some(v) = args.mode {
        cfg.mode = v;
    }
    if let Some(v) = args.c {
        cfg.c = v;
    }
    if let Some(v) = args.a {
        cfg.a = v;
    }
    if let Some(v) = args.s {
        cfg.s = v;
    }
    if let Some(v) = args.iterations {
        cfg.iterations = v;
    }
    if let Some(v) = args.runs {
        cfg.num_runs = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.checkpoints {
        cfg.checkpoints = v;
    }
    if let Some(v) = &args.out {
        cfg.output_path = v.clone();
    }
    cfg.resolve()?;
    Ok(cfg)
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<(), Failure> {
    let file = File::create(path).map_err(|e| Failure::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w).and_then(|_| w.flush()).map_err(|e| Failure::io(path, e))
}

fn cmd_run(args: &RunArgs) -> Result<(), Failure> {
    let cfg = resolve_config(args)?;
    log::info!("running {} x {} iterations of {} ({})", cfg.num_runs, cfg.iterations, cfg.game, cfg.mode);
    let trajectories = run_experiment(&cfg)?;
    write_file(&cfg.output_path, |w| write_csv(w, &trajectories))?;
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    write_file(&cfg.meta_path(), |w| write_meta(w, &cfg, timestamp))?;
    let rows: usize = trajectories.iter().map(|t| t.checkpoints.len()).sum();
    println!("wrote {rows} rows to {}", cfg.output_path.display());
    Ok(())
}

fn cmd_rate(args: &RateArgs) -> Result<(), Failure> {
    let file = File::open(&args.input).map_err(|e| Failure::io(&args.input, e))?;
    let rows = read_csv(BufReader::new(file))?;
    let curve = curve_from_rows(&rows)?;
    let fit = fit_rate(&curve, args.window)?;
    let report = rate_report(&fit, args.window, &args.input.display().to_string());
    print!("{report}");
    let mut out = args.input.clone().into_os_string();
    out.push(".rate");
    let out = PathBuf::from(out);
    write_file(&out, |w| w.write_all(report.as_bytes()))
}

fn cmd_verify(args: &VerifyArgs) -> Result<bool, Failure> {
    let suite: Suite = args.suite.parse()?;
    let entry = catalog::by_name(&args.game)?;
    let mut opts = VerifyOptions {
        seed: args.seed,
        ..Default::default()
    };
    if let Some(n) = args.samples {
        opts.samples = n;
    }
    let results = run_suite(&entry, suite, &opts)?;
    for r in &results {
        println!("{r}");
    }
    let passed = results.iter().filter(|r| r.passed).count();
    println!("{}/{} checks passed ({} on {})", passed, results.len(), suite, entry.name);
    Ok(passed == results.len())
}

fn cmd_games() {
    for name in catalog::names() {
        if let Ok(entry) = catalog::by_name(name) {
            let tags: Vec<String> = entry.tags.iter().map(|t| t.to_string()).collect();
            println!("{name}\tN={} d={}\t{}", entry.game.num_players(), entry.game.dim(), tags.join(","));
        }
    }
}

fn configure_threads(threads: Option<usize>) -> Result<(), Failure> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(Failure::usage("--threads must be at least 1"));
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
        log::warn!("could not size thread pool: {e}");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = configure_threads(cli.threads).and_then(|_| match &cli.command {
        Command::Run(args) => cmd_run(args).map(|_| true),
        Command::Rate(args) => cmd_rate(args).map(|_| true),
        Command::Verify(args) => cmd_verify(args),
        Command::Games => {
            cmd_games();
            Ok(true)
        }
    });
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
