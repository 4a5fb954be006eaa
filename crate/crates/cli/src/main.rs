mod commands;
mod report;

use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser, Debug)]
#[command(name = "ruelle", version, about = "Ruelle invariant, systole and index computations for toric domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Region spec: a path to a JSON file or inline JSON.
    #[arg(long, global = true)]
    region: Option<String>,

    /// Relative quadrature tolerance.
    #[arg(long, global = true, default_value_t = 1e-8)]
    tol: f64,

    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Flow time for dynamical estimates.
    #[arg(long = "T", global = true)]
    t: Option<f64>,

    #[arg(long, global = true)]
    samples: Option<usize>,

    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ru, volume, systole and Laplacian functional from the moment region.
    Toric,
    /// Monte-Carlo average of the finite-time rotation function.
    EstimateFlow {
        /// CSV trace of the first sample's trajectory.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Strain a concave region until Ru reaches the target.
    Counterexample {
        #[arg(long, default_value_t = 50.0)]
        c_target: f64,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
    },
    /// Run a named check.
    Check {
        #[arg(value_enum)]
        name: CheckName,
        /// Outer region for the sandwich check.
        #[arg(long)]
        outer: Option<String>,
        /// Sandwich constant; computed from the regions when absent.
        #[arg(long = "L")]
        l: Option<f64>,
        #[arg(long)]
        t_max: Option<f64>,
    },
    /// Enumerate closed orbits up to a period bound.
    Orbits {
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long, default_value_t = 200)]
        grid: usize,
        #[arg(long, default_value_t = 6)]
        max_winding: u64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CheckName {
    MainInequality,
    Sandwich,
    TraceBound,
    DynConvexity,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("computation error: {0}")]
    Computation(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Computation(_) => 2,
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("RUELLE_THREADS") {
        let k: usize = v.parse().map_err(|_| CliError::Input(format!("RUELLE_THREADS = {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Computation(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<report::Report, CliError> {
    if !(cli.tol > 0.0) {
        return Err(CliError::Input(format!("--tol must be positive, got {}", cli.tol)));
    }
    configure_threads()?;
    match &cli.command {
        Command::Toric => commands::toric(cli),
        Command::EstimateFlow { dump } => commands::estimate_flow(cli, dump.as_deref()),
        Command::Counterexample { c_target, epsilon } => commands::counterexample(cli, *c_target, *epsilon),
        Command::Check { name, outer, l, t_max } => commands::check(cli, *name, outer.as_deref(), *l, *t_max),
        Command::Orbits { t_max, grid, max_winding } => commands::orbits(cli, *t_max, *grid, *max_winding),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let start = Instant::now();
    let report = match run(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let text = match cli.format {
        Format::Json => report.to_json(),
        Format::Csv => report.to_csv(),
    };
    match &cli.out {
        Some(path) => {
            if let Err(e) = report::write_atomic(path, &text) {
                eprintln!("cannot write {}: {e}", path.display());
                return ExitCode::from(1);
            }
        }
        None => print!("{text}"),
    }
    eprintln!("wall time: {:.3} s", start.elapsed().as_secs_f64());
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        for a in report.assertions.iter().filter(|a| !a.passed) {
            eprintln!("assertion failed: {} ({})", a.name, a.detail);
        }
        ExitCode::from(3)
    }
}
