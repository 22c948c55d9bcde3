use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

use bottlemod_cli::commands::{
    cmd_analyze, cmd_sweep, cmd_validate, AnalyzeOptions, CmdError, Series, SweepOptions,
};

/// Analytical workflow-performance modeling: progress functions and
/// bottleneck timelines for dataflow workflows, in closed form.
#[derive(Parser)]
#[command(name = "bottlemod", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SeriesArg {
    Progress,
    Usage,
    Buffered,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a workflow document and report completions and bottlenecks.
    Analyze {
        /// Workflow document (JSON).
        path: PathBuf,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Emit per-process time series as CSV (requires --csv).
        #[arg(long, value_enum)]
        series: Option<SeriesArg>,
        /// Directory for the per-process CSV files.
        #[arg(long, value_name = "DIR")]
        csv: Option<PathBuf>,
        /// Uniform sample count per series, in addition to breakpoints.
        #[arg(long, default_value_t = 512)]
        samples: usize,
        /// Cross-check the analytic solution against the discretized
        /// simulator; adds oracle_makespan and max_deviation to the report.
        #[arg(long)]
        oracle_check: bool,
        /// Simulator step size for --oracle-check.
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Re-solve the workflow over a range of one scalar parameter.
    Sweep {
        /// Workflow document (JSON).
        path: PathBuf,
        /// Parameter dot path, e.g. `bindings.dl1.fraction`.
        #[arg(long)]
        param: String,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long)]
        steps: usize,
        /// Solve sweep points on all cores (row order is preserved).
        #[arg(long)]
        parallel: bool,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a document against the schema and model constraints.
    Validate {
        /// Workflow document (JSON).
        path: PathBuf,
    },
}

fn emit(artifact: String, out: Option<&PathBuf>) -> Result<(), CmdError> {
    match out {
        Some(path) => std::fs::write(path, artifact.as_bytes())
            .map_err(|e| CmdError::Io(format!("writing {}: {e}", path.display()))),
        None => {
            if artifact.ends_with('\n') {
                print!("{artifact}");
            } else {
                println!("{artifact}");
            }
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), CmdError> {
    match cli.command {
        Command::Analyze { path, out, series, csv, samples, oracle_check, dt } => {
            let opts = AnalyzeOptions {
                out: out.clone(),
                series: series.map(|s| match s {
                    SeriesArg::Progress => Series::Progress,
                    SeriesArg::Usage => Series::Usage,
                    SeriesArg::Buffered => Series::Buffered,
                }),
                csv_dir: csv,
                samples,
                oracle_check,
                dt,
            };
            let report = cmd_analyze(&path, &opts)?;
            emit(report, out.as_ref())
        }
        Command::Sweep { path, param, from, to, steps, parallel, out } => {
            let opts = SweepOptions { param, from, to, steps, parallel };
            let csv = cmd_sweep(&path, &opts)?;
            emit(csv, out.as_ref())
        }
        Command::Validate { path } => {
            let ok = cmd_validate(&path)?;
            println!("{ok}");
            Ok(())
        }
    }
}

fn main() {
    env_logger::init();
    if let Ok(raw) = std::env::var("BOTTLEMOD_TOLERANCE") {
        match raw.parse::<f64>() {
            Ok(eps) if eps > 0.0 && eps < 1.0 => bottlemod::tol::set_eps_rel(eps),
            _ => {
                eprintln!("BOTTLEMOD_TOLERANCE must be a number in (0, 1); got `{raw}`");
                std::process::exit(2);
            }
        }
    }
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        for msg in e.messages() {
            eprintln!("error: {msg}");
        }
        std::process::exit(e.exit_code());
    }
}
