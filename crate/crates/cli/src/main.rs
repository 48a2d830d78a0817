//! `wvlab`: weak values of photon number in linear-optical circuits.
//!
//! Exit codes: 0 ok, 1 tolerance failure, 2 parse error, 3 I/O error,
//! 4 domain error (rare post-selection, empty shot population, ...).

mod commands;
mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use wvlab_core::fock::DEFAULT_TAIL_TOLERANCE;
use wvlab_core::measurement::Variable;
use wvlab_core::weak_value::DEFAULT_P_MIN;
use wvlab_core::PostSelection;

use commands::{Engine, Failure, MonteCarloArgs, WvArgs};
use report::Format;

#[derive(Parser)]
#[command(name = "wvlab", version, about = "Photon-number weak values in passive linear optics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Output {
    /// Output format.
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Thresholds {
    /// Post-selections rarer than this are rejected.
    #[arg(long, default_value_t = DEFAULT_P_MIN)]
    p_min: f64,
    /// Largest probability the Fock cutoff may drop.
    #[arg(long, default_value_t = DEFAULT_TAIL_TOLERANCE)]
    tail_tol: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a circuit file and check that its stages are unitary.
    Validate {
        file: PathBuf,
        #[arg(long, default_value_t = 1e-12)]
        unitarity_tol: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Weak value of the probe photon number.
    Wv {
        file: PathBuf,
        /// none | fock:<m> | click | noclick
        #[arg(long, default_value = "click")]
        postselect: PostSelection,
        #[arg(long, value_enum, default_value = "analytic")]
        engine: Engine,
        /// Largest allowed analytic/oracle discrepancy with `--engine both`.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[command(flatten)]
        thresholds: Thresholds,
        #[command(flatten)]
        output: Output,
    },
    /// Rebuild the single-photon click weak value from coherent-state data.
    Theorem {
        file: PathBuf,
        /// Comma-separated |alpha|^2 values; defaults to the file's amplitude.
        #[arg(long, value_delimiter = ',')]
        alpha_sq: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_P_MIN)]
        p_min: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Simulate the weakly coupled experiment shot by shot.
    Montecarlo {
        file: PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        shots: usize,
        /// Pointer shift per photon.
        #[arg(long, default_value_t = 0.02)]
        g: f64,
        /// Pointer position spread.
        #[arg(long, default_value_t = 1.0)]
        sigma_x: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// position | momentum
        #[arg(long, default_value = "position")]
        variable: Variable,
        /// Histogram bins per outcome for `--hist-out`.
        #[arg(long, default_value_t = 60)]
        bins: usize,
        /// Write per-outcome pointer histograms as CSV.
        #[arg(long)]
        hist_out: Option<PathBuf>,
        #[command(flatten)]
        thresholds: Thresholds,
        #[command(flatten)]
        output: Output,
    },
    /// Compare ignoring and projecting the undetected modes under Fock(m) post-selection.
    Lemma {
        file: PathBuf,
        #[arg(long, default_value_t = 0)]
        m: u32,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[command(flatten)]
        thresholds: Thresholds,
        #[command(flatten)]
        output: Output,
    },
}

fn configure_threads() {
    let Ok(value) = std::env::var("WVLAB_THREADS") else { return };
    match value.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            // Fails only if a pool already exists, which cannot happen here.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        _ => eprintln!("wvlab: ignoring WVLAB_THREADS={value:?} (expected a positive integer)"),
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<bool, Failure> {
    let start = Instant::now();
    let (result, output) = match cli.command {
        Command::Validate { file, unitarity_tol, output } => (commands::validate(&file, unitarity_tol), output),
        Command::Wv { file, postselect, engine, tol, thresholds, output } => {
            let args = WvArgs { postselect, engine, tol, p_min: thresholds.p_min, tail_tol: thresholds.tail_tol };
            (commands::wv(&file, &args), output)
        }
        Command::Theorem { file, alpha_sq, tol, p_min, output } => {
            (commands::theorem(&file, alpha_sq, tol, p_min), output)
        }
        Command::Montecarlo { file, shots, g, sigma_x, seed, variable, bins, hist_out, thresholds, output } => {
            let args = MonteCarloArgs {
                shots,
                g,
                sigma_x,
                seed,
                variable,
                bins,
                hist_out,
                p_min: thresholds.p_min,
                tail_tol: thresholds.tail_tol,
            };
            (commands::montecarlo(&file, &args), output)
        }
        Command::Lemma { file, m, tol, thresholds, output } => {
            (commands::lemma(&file, m, tol, thresholds.p_min, thresholds.tail_tol), output)
        }
    };
    let mut report = result?;
    report.wall_time_s = start.elapsed().as_secs_f64();
    emit(&report.render(output.format), output.out.as_deref())?;
    Ok(report.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("wvlab: tolerance check failed");
            ExitCode::from(1)
        }
        Err(failure) => {
            eprintln!("wvlab: {}", failure.message());
            ExitCode::from(failure.exit_code() as u8)
        }
    }
}
