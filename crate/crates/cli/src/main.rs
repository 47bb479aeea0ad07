//! `hdmt`: k-sample tests for equal high-dimensional mean vectors.

mod commands;
mod input;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "hdmt", version, about = "Tests for equal mean vectors of several high-dimensional groups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test H0: μ₁ = … = μ_k on a CSV of `group,x1,...,xp` rows.
    ///
    /// p-values are one-sided: large values of the statistic are evidence
    /// against H0.
    Test {
        /// Input CSV. A header row is detected when its second field is not numeric.
        csv: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Trace estimators used to standardise the `our` statistic.
        #[arg(long, value_enum, default_value_t = Estimator::Umvue)]
        estimator: Estimator,
        /// `bs` and `cq` need exactly two groups.
        #[arg(long = "test", value_enum, default_value_t = TestKind::Our)]
        test: TestKind,
        /// Print one JSON object instead of a text report.
        #[arg(long)]
        json: bool,
        /// Treat the first row as data even if it looks like a header.
        #[arg(long)]
        no_header: bool,
    },
    /// Run a Monte Carlo experiment described by a JSON config.
    ///
    /// HDMT_SEED, when set, replaces the config's master_seed.
    Simulate {
        #[arg(value_enum)]
        mode: Mode,
        config: PathBuf,
        /// Worker threads; defaults to the config value, then to available parallelism.
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        threads: Option<u32>,
        /// Directory for CSV, markdown and metadata files.
        #[arg(long, default_value = "hdmt-out")]
        out: PathBuf,
        /// Replace the grid with the full p, n* and replication lists.
        #[arg(long)]
        full_grid: bool,
    },
    /// Print trace estimates tr Σ_i² and tr(Σ_i Σ_j) for every group and pair.
    Estimate {
        csv: PathBuf,
        #[arg(long, value_enum, default_value_t = Estimator::Umvue)]
        kind: Estimator,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        no_header: bool,
        /// Evaluate the distribution-free estimators by direct enumeration
        /// (O(n⁶) work; for checking small data only).
        #[arg(long, conflicts_with = "kind")]
        oracle: bool,
        /// Allow --oracle on groups larger than 12.
        #[arg(long, requires = "oracle")]
        force: bool,
    },
    /// Print the upper-α quantile of the standard normal.
    Quantile { alpha: f64 },
}

#[derive(Clone, Copy, ValueEnum)]
enum Estimator {
    Umvue,
    Une,
    Cq,
}

#[derive(Clone, Copy, ValueEnum)]
enum TestKind {
    Our,
    Bs,
    Cq,
    Sk,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Asl,
    Power,
    Convergence,
}

/// A failure with its exit status: 2 for bad input or configuration, 3 when
/// the statistic cannot be standardised, 1 for I/O trouble writing results.
#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    pub fn data(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }
}

impl From<hdmt_core::Error> for CliError {
    fn from(e: hdmt_core::Error) -> Self {
        let code = if e.is_degenerate() { 3 } else { 2 };
        Self { code, message: e.to_string() }
    }
}

fn fail(code: u8, message: &str) -> ExitCode {
    eprintln!(
        "hdmt: error: {}",
        message.lines().map(str::trim).filter(|l| !l.is_empty()).collect::<Vec<_>>().join(" ")
    );
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let summary = text.split("\n\n").next().unwrap_or("invalid arguments");
            return fail(2, summary.trim_start_matches("error: "));
        }
    };
    let result = match cli.command {
        Command::Test { csv, alpha, estimator, test, json, no_header } => {
            commands::test(&csv, alpha, estimator.into(), test.into(), json, no_header)
        }
        Command::Simulate { mode, config, threads, out, full_grid } => {
            commands::simulate(mode.into(), &config, threads.map(|t| t as usize), &out, full_grid)
        }
        Command::Estimate { csv, kind, json, no_header, oracle, force } => {
            let kind = if oracle {
                commands::EstimateKind::Oracle { force }
            } else {
                commands::EstimateKind::Closed(kind.into())
            };
            commands::estimate(&csv, kind, json, no_header)
        }
        Command::Quantile { alpha } => commands::quantile(alpha),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.code, &e.message),
    }
}

impl From<Estimator> for hdmt_core::EstimatorKind {
    fn from(e: Estimator) -> Self {
        match e {
            Estimator::Umvue => Self::Umvue,
            Estimator::Une => Self::Une,
            Estimator::Cq => Self::ChenQin,
        }
    }
}

impl From<TestKind> for hdmt_core::TestName {
    fn from(t: TestKind) -> Self {
        match t {
            TestKind::Our => Self::Our,
            TestKind::Bs => Self::Bs,
            TestKind::Cq => Self::Cq,
            TestKind::Sk => Self::Sk,
        }
    }
}

impl From<Mode> for commands::SimulateMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Asl => Self::Asl,
            Mode::Power => Self::Power,
            Mode::Convergence => Self::Convergence,
        }
    }
}
