//! `octav`: calibrate, quantize, and benchmark tensors stored as OCTV files.
//!
//! Exit codes: 0 on success, 1 on input or usage errors, 2 when the data was
//! degenerate (all-zero groups) and either the command could not proceed or
//! `--strict` escalates the warning.

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use octav_cli::{
    commands, BoundaryArg, FixtureKind, GranularityArg, Method, QuantOpts, ScalarSource,
};
use octav_core::{Error, Signedness, SweepMode};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "octav", version, about = "MSE-optimal quantization calibration")]
struct Cli {
    /// Worker threads for calibrate; other commands run single-threaded.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    /// Escalate degenerate-data warnings to exit code 2.
    #[arg(long, global = true)]
    strict: bool,

    /// Seed for commands that generate data.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GridArgs {
    /// Bit width of the quantization grid.
    #[arg(long, default_value_t = 4)]
    bits: u32,

    /// Use an unsigned grid (inputs must be non-negative).
    #[arg(long)]
    unsigned: bool,

    /// Scalar granularity: `tensor` or `row:AXIS`.
    #[arg(long, default_value = "tensor")]
    granularity: GranularityArg,

    /// Level boundary convention: `math` (symmetric) or `twos` (asymmetric).
    #[arg(long, default_value = "math")]
    boundary: BoundaryArg,

    /// Newton iterations for the octav method.
    #[arg(long, default_value_t = 10)]
    iterations: usize,
}

impl GridArgs {
    fn opts(&self) -> QuantOpts {
        QuantOpts {
            bits: self.bits,
            signedness: if self.unsigned { Signedness::Unsigned } else { Signedness::Signed },
            boundary: self.boundary.0,
            granularity: self.granularity.0,
            iterations: self.iterations,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate clipping scalars for every OCTV tensor in a directory.
    Calibrate {
        /// Directory of `<name>.octv` or `<name>.batch<k>.octv` files.
        dir: PathBuf,

        /// Glob over file names to select a subset, e.g. `acts.*`.
        #[arg(long)]
        batches: Option<String>,

        /// Scalar selection: `octav`, `sweep:N`, `percentile:P`, or `max`.
        #[arg(long, default_value = "octav")]
        method: Method,

        #[command(flatten)]
        grid: GridArgs,

        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Quantize one tensor file and write the OCTV result.
    Quantize {
        /// Input OCTV tensor.
        input: PathBuf,

        /// Output OCTV path.
        #[arg(long)]
        out: PathBuf,

        /// Scalar selection method, ignored when `--scalars` is given.
        #[arg(long, default_value = "octav")]
        method: Method,

        /// Reuse scalars from a calibrate report (JSON path); the report's
        /// grid settings take precedence over the flags.
        #[arg(long)]
        scalars: Option<PathBuf>,

        #[command(flatten)]
        grid: GridArgs,
    },

    /// Write the MSE-versus-scalar curve of one tensor as CSV.
    SweepCurve {
        /// Input OCTV tensor.
        input: PathBuf,

        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,

        /// Number of evenly spaced candidate scalars.
        #[arg(long, default_value_t = 100)]
        points: usize,

        /// Evaluate the curve from a histogram noise model instead of
        /// quantizing every element.
        #[arg(long)]
        analytical: bool,

        #[command(flatten)]
        grid: GridArgs,
    },

    /// Time octav against a 100-point sweep over a directory of tensors.
    Bench {
        /// Directory of OCTV tensors (at least 10 of 1e5+ elements for a
        /// representative result).
        dir: PathBuf,

        /// Bit width of the quantization grid.
        #[arg(long, default_value_t = 4)]
        bits: u32,

        /// Timing repetitions; the report carries mean and variance.
        #[arg(long, default_value_t = 1)]
        repetitions: usize,

        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Generate synthetic OCTV fixtures.
    GenFixtures {
        /// Output directory, created if missing.
        dir: PathBuf,

        /// `corpus`, `batches`, or `bimodal`.
        #[arg(long)]
        kind: String,

        /// Corpus: number of tensors.
        #[arg(long, default_value_t = 74)]
        count: usize,

        /// Corpus: minimum elements per tensor.
        #[arg(long, default_value_t = 100_000)]
        min_elements: usize,

        /// Batches: rows per batch.
        #[arg(long, default_value_t = 64)]
        rows: usize,

        /// Batches: columns per batch.
        #[arg(long, default_value_t = 128)]
        cols: usize,

        /// Batches: number of batch files.
        #[arg(long, default_value_t = 4)]
        batches: usize,

        /// Bimodal: total elements.
        #[arg(long, default_value_t = 100_000)]
        elements: usize,
    },
}

fn write_or_print(json: &str, out: Option<&PathBuf>) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, json).map_err(Error::from),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

/// Returns the warnings the command produced so `--strict` can escalate.
fn run(cli: &Cli) -> Result<Vec<String>, Error> {
    match &cli.command {
        Command::Calibrate { dir, batches, method, grid, out } => {
            let report =
                commands::run_calibrate(dir, batches.as_deref(), *method, &grid.opts(), cli.threads)?;
            let json = serde_json::to_string_pretty(&report).expect("report serializes");
            write_or_print(&json, out.as_ref())?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            Ok(report.warnings)
        }
        Command::Quantize { input, out, method, scalars, grid } => {
            let source = match scalars {
                Some(path) => ScalarSource::Report(path),
                None => ScalarSource::Method(*method),
            };
            let outcome = commands::run_quantize(input, source, &grid.opts(), out)?;
            println!("mean_mse {}", outcome.mean_mse);
            for (g, (s, m)) in outcome.scalars.iter().zip(&outcome.mse).enumerate() {
                println!("group {g} scalar {s} mse {m}");
            }
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            Ok(outcome.warnings)
        }
        Command::SweepCurve { input, out, points, analytical, grid } => {
            let mode = if *analytical { SweepMode::Analytical } else { SweepMode::Empirical };
            commands::run_sweep_curve(input, &grid.opts(), *points, mode, out)?;
            Ok(Vec::new())
        }
        Command::Bench { dir, bits, repetitions, out } => {
            let report = commands::run_bench(dir, *bits, *repetitions)?;
            let json = serde_json::to_string_pretty(&report).expect("report serializes");
            write_or_print(&json, out.as_ref())?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            Ok(report.warnings)
        }
        Command::GenFixtures {
            dir,
            kind,
            count,
            min_elements,
            rows,
            cols,
            batches,
            elements,
        } => {
            let kind = match kind.as_str() {
                "corpus" => FixtureKind::Corpus { count: *count, min_elements: *min_elements },
                "batches" => FixtureKind::Batches { rows: *rows, cols: *cols, batches: *batches },
                "bimodal" => FixtureKind::Bimodal { elements: *elements },
                other => {
                    return Err(Error::InvalidParameter {
                        reason: format!(
                            "unknown fixture kind {other:?}; expected corpus, batches, or bimodal"
                        ),
                    })
                }
            };
            let written = commands::run_gen_fixtures(dir, kind, cli.seed)?;
            println!("wrote {} file(s) to {}", written.len(), dir.display());
            Ok(Vec::new())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    match run(&cli) {
        Ok(warnings) => {
            if cli.strict && !warnings.is_empty() {
                eprintln!("error: degenerate data under --strict");
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(Error::Degenerate { context }) => {
            eprintln!("error: degenerate tensor: {context}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
