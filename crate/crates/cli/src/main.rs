//! `haxc`: sample hierarchical Archimax copulas, evaluate their densities
//! and stable tail dependence functions, and check samplers against theory.

mod check;
mod commands;
mod error;
mod io;
mod spec;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::check::Level;
use crate::error::{CliError, CliResult};
use crate::io::Output;
use crate::spec::ResolvedSpec;

#[derive(Parser)]
#[command(name = "haxc", version, about = "Hierarchical Archimax copulas")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw n rows from the model; CSV with a header row.
    Sample {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        n: usize,
        /// Overrides the spec's seed (default 0).
        #[arg(long)]
        seed: Option<u64>,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads. The output does not depend on this.
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Log-density of the model at each row of a points CSV.
    Density {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Stable tail dependence function at each row of a points CSV; with
    /// --n, also a Monte Carlo estimate from the EVC's d-norm generator.
    Stdf {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Sample the model and compare with its known properties. Writes the
    /// JSON report to --out, or to stdout with the text report on stderr.
    Check {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, value_enum, default_value_t = Level::Quick)]
        level: Level,
        /// Sample size (default 10^4 quick, 10^5 full).
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
}

fn load(path: &Path) -> CliResult<ResolvedSpec> {
    spec::load(path)?.resolve()
}

fn with_threads<T>(threads: usize, f: impl FnOnce() -> CliResult<T> + Send) -> CliResult<T>
where
    T: Send,
{
    if threads == 0 {
        return Err(CliError::Input("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?
        .install(f)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Sample { spec, n, seed, out, threads } => {
            let s = load(&spec)?;
            let seed = seed.or(s.seed).unwrap_or(0);
            with_threads(threads, || commands::sample(&s, n, seed, out.as_deref()))
        }
        Command::Density { spec, points, out, threads } => {
            let s = load(&spec)?;
            with_threads(threads, || commands::density(&s, &points, out.as_deref()))
        }
        Command::Stdf { spec, points, n, seed, out, threads } => {
            let s = load(&spec)?;
            let mc = n.map(|n| (n, seed.or(s.seed).unwrap_or(0)));
            with_threads(threads, || commands::stdf(&s, &points, out.as_deref(), mc))
        }
        Command::Check { spec, level, n, seed, out, threads } => {
            let s = load(&spec)?;
            let seed = seed.or(s.seed).unwrap_or(0);
            let n = n.unwrap_or(level.default_n());
            let report = with_threads(threads, || check::run(&s, level, n, seed))?;
            let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
            match &out {
                Some(path) => {
                    print!("{}", report.text());
                    Output::open(Some(path))?.write_all(json.as_bytes())?;
                }
                None => {
                    eprint!("{}", report.text());
                    Output::open(None)?.write_all(json.as_bytes())?;
                }
            }
            match report.failures() {
                0 => Ok(()),
                failed => Err(CliError::ChecksFailed { failed, total: report.checks.len() }),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("haxc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
