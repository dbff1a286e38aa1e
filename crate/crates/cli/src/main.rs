use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lla_evidence_cli::config::{self, ExperimentConfig};
use lla_evidence_cli::output::{read_summary, write_experiment};
use lla_evidence_cli::runner::run_experiment;
use lla_evidence_cli::select::{format_table, select};
use lla_evidence_cli::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "lla-evidence", version, about = "Estimate Bayesian model evidence")]
struct Cli {
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its summary, replication table and traces.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        seed_override: Option<u64>,
        #[arg(long)]
        replications_override: Option<usize>,
    },
    /// Posterior model probabilities from two or more run summaries.
    Select {
        #[arg(long, num_args = 1.., required = true)]
        summaries: Vec<PathBuf>,
        /// Prior model probabilities, one per summary (uniform by default).
        #[arg(long, value_delimiter = ',')]
        priors: Option<Vec<f64>>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Error and spread of an experiment as a function of the evaluation budget.
    Convergence {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        budgets: Vec<u64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn load(path: &Path) -> CliResult<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(config::parse(&text)?)
}

fn out_dir(flag: Option<PathBuf>, cfg: &ExperimentConfig) -> PathBuf {
    flag.or_else(|| cfg.out_dir.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"))
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    }
    match cli.command {
        Command::Run { config, out_dir: dir, seed_override, replications_override } => {
            let mut cfg = load(&config)?;
            if let Some(s) = seed_override {
                cfg.seed = s;
            }
            if let Some(r) = replications_override {
                if r == 0 {
                    return Err(CliError::Usage("--replications-override must be at least 1".into()));
                }
                cfg.replications = r;
            }
            let dir = out_dir(dir, &cfg);
            let exp = run_experiment(&cfg)?;
            write_experiment(&dir, &exp, cfg.write_traces)?;
            let a = &exp.summary.aggregate;
            println!(
                "{} / {} on {}: mean log evidence {:.6} (reference {:.6}), mean evals {:.0}",
                exp.summary.estimator,
                exp.summary.model,
                exp.summary.benchmark,
                a.mean_log_evidence,
                a.mean_reference_log_evidence,
                a.mean_evals
            );
            if let (Some(e), Some(c)) = (a.mean_abs_error_pct, a.cov_pct) {
                println!("mean |error| {e:.4}%, COV {c:.4}%");
            }
            println!("wrote {}", dir.display());
        }
        Command::Select { summaries, priors, out_dir: dir } => {
            let loaded = summaries.iter().map(|p| read_summary(p)).collect::<CliResult<Vec<_>>>()?;
            let rows = select(&loaded, priors.as_deref())?;
            let table = format_table(&rows);
            print!("{table}");
            if let Some(dir) = dir {
                fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
                let path = dir.join("selection.csv");
                let mut w = csv::Writer::from_path(&path)?;
                w.write_record(["model", "estimator", "log_evidence", "prior", "posterior"])?;
                for r in &rows {
                    w.write_record([
                        r.model.clone(),
                        r.estimator.clone(),
                        r.log_evidence.to_string(),
                        r.prior.to_string(),
                        r.posterior.to_string(),
                    ])?;
                }
                w.flush().map_err(|e| CliError::io(&path, e))?;
            }
        }
        Command::Convergence { config, budgets, out_dir: dir } => {
            if budgets.is_empty() {
                return Err(CliError::Usage("--budgets must list at least one budget".into()));
            }
            let cfg = load(&config)?;
            let dir = out_dir(dir, &cfg);
            fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
            let path = dir.join("convergence.csv");
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(["budget", "mean_evals", "mean_abs_error_pct", "cov_pct"])?;
            for b in budgets {
                let run_cfg = ExperimentConfig { estimator: cfg.estimator.with_budget(b), ..cfg.clone() };
                let exp = run_experiment(&run_cfg)?;
                let a = &exp.summary.aggregate;
                let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
                w.write_record([b.to_string(), a.mean_evals.to_string(), opt(a.mean_abs_error_pct), opt(a.cov_pct)])?;
                println!(
                    "budget {b}: mean evals {:.0}, mean |error| {}%, COV {}%",
                    a.mean_evals,
                    opt(a.mean_abs_error_pct),
                    opt(a.cov_pct)
                );
            }
            w.flush().map_err(|e| CliError::io(&path, e))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
