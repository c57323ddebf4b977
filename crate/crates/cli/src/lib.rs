//! `mnlab` command-line front end.
//!
//! Exit codes: 0 when every check passes, 2 when a check fails, 1 for
//! usage and configuration errors.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::fmt;

use clap::{Parser, Subcommand};
use mnlab_core::Error;

use config::{CommandName, Settings};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAIL: i32 = 2;

/// A configuration problem detected before or instead of computing.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageError(pub String);

impl UsageError {
    pub fn new(msg: impl Into<String>) -> Self {
        UsageError(msg.into())
    }
}

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Why a run did not produce a report.
#[derive(Debug)]
pub enum RunError {
    Usage(UsageError),
    /// Core error that reflects the request, not the mathematics.
    Config(Error),
    /// Numerical failure during a check.
    Numerical(Error),
}

impl From<UsageError> for RunError {
    fn from(e: UsageError) -> Self {
        RunError::Usage(e)
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidSpec(_)
            | Error::Unsupported(_)
            | Error::UnsupportedAlpha(_)
            | Error::TooFewBumps { .. }
            | Error::InvalidC(_)
            | Error::InvalidDifferencing(_)
            | Error::InvalidProfile(_)
            | Error::ProfileOutOfClass(_)
            | Error::BudgetExceeded(_)
            | Error::BlockTooSmall { .. }
            | Error::IndexOutOfRange { .. }
            | Error::Io(_) => RunError::Config(e),
            _ => RunError::Numerical(e),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "mnlab", version, about = "Covariance, divergence and lower-bound checks for noisy volatility models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Cholesky, Jacobi and PSD kernels on seeded random matrices.
    VerifyLinalg(Settings),
    /// Closed-form spectrum of A and Q^-1 against the eigensolver.
    VerifySpectral(Settings),
    /// Randomised check of the Frobenius bound on Gaussian KL.
    VerifyKl(Settings),
    /// (2+12L^2)^-1 Q <= Sigma Q Sigma for random Lipschitz profiles.
    VerifyPosdefmaj(Settings),
    /// Band structure of the second-differenced model-3 covariance.
    VerifyModel3Structure(Settings),
    /// Lower-bound certificate for a bump-hypothesis family.
    Certificate(Settings),
    /// Two constant-volatility hypotheses for model 3.
    TwoPointM3(Settings),
    /// Lower-bound rate exponents.
    RateTable(Settings),
    /// Exact KL of a fixed bump alternative across n.
    KlScaling(Settings),
    /// Monte Carlo risk of a constant-volatility estimator across n.
    SimulateRate(Settings),
}

impl Command {
    fn split(self) -> (CommandName, Settings) {
        match self {
            Command::VerifyLinalg(s) => (CommandName::VerifyLinalg, s),
            Command::VerifySpectral(s) => (CommandName::VerifySpectral, s),
            Command::VerifyKl(s) => (CommandName::VerifyKl, s),
            Command::VerifyPosdefmaj(s) => (CommandName::VerifyPosdefmaj, s),
            Command::VerifyModel3Structure(s) => (CommandName::VerifyModel3Structure, s),
            Command::Certificate(s) => (CommandName::Certificate, s),
            Command::TwoPointM3(s) => (CommandName::TwoPointM3, s),
            Command::RateTable(s) => (CommandName::RateTable, s),
            Command::KlScaling(s) => (CommandName::KlScaling, s),
            Command::SimulateRate(s) => (CommandName::SimulateRate, s),
        }
    }
}

/// Parses `argv`, runs the command and writes its report. `env_seed` is
/// the value of `MNLAB_SEED`, if set.
pub fn run<I, T>(argv: I, env_seed: Option<String>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    let (name, settings) = cli.command.split();
    match execute(name, settings, env_seed.as_deref()) {
        Ok(pass) => {
            if pass {
                EXIT_PASS
            } else {
                EXIT_FAIL
            }
        }
        Err(RunError::Usage(e)) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
        Err(RunError::Config(e)) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
        Err(RunError::Numerical(e)) => {
            eprintln!("FAIL: {e}");
            EXIT_FAIL
        }
    }
}

fn execute(name: CommandName, settings: Settings, env_seed: Option<&str>) -> Result<bool, RunError> {
    let cfg = config::resolve(name, settings, env_seed)?;
    let outcome = match cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| UsageError::new(format!("--workers {w}: {e}")))?
            .install(|| commands::dispatch(&cfg))?,
        None => commands::dispatch(&cfg)?,
    };
    let text = output::render(&cfg, &outcome)?;
    output::emit(cfg.out.as_deref(), &text).map_err(|e| {
        RunError::Usage(UsageError::new(format!("--out: {e}")))
    })?;
    for f in &outcome.failures {
        eprintln!("FAIL: {f}");
    }
    if outcome.pass {
        eprintln!("PASS: {}", name.as_str());
    }
    Ok(outcome.pass)
}
