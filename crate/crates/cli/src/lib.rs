//! Command-line front end: pair screening, joint fitting, signal generation,
//! synthetic data and the equal-correlation demo.
//!
//! Reports go to stdout as JSON (CSV for `simulate` and `demo-pitfall`);
//! human-readable summaries go to stderr. Exit codes: 0 success, 2 config
//! error, 3 data error, 4 numeric failure.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::RunConfig;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<copair::Error> for CliError {
    fn from(e: copair::Error) -> Self {
        use copair::Error::*;
        let code = match &e {
            InvalidArgument(_) | EpsilonOutOfRange(_) | ThetaOutOfDomain { .. } | OutOfRange { .. } => EXIT_CONFIG,
            NonConvergence { .. } | AllFitsFailed(_) => EXIT_NUMERIC,
            _ => EXIT_DATA,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        // A closed stdout (e.g. piping into `head`) is not a failure.
        let code = if e.kind() == std::io::ErrorKind::BrokenPipe {
            0
        } else {
            EXIT_DATA
        };
        Self {
            code,
            message: format!("i/o error: {e}"),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "copair", version, about = "Copula-based mispricing signals for asset pairs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rank candidate pairs by return correlation and test cointegration.
    SelectPairs(Common),
    /// Fit marginals and copula to the spreads of two assets.
    Fit(PairArgs),
    /// Emit one JSON line per common timestamp with the verdict.
    Signals(PairArgs),
    /// Write a synthetic long-format price CSV.
    Simulate(Box<SimArgs>),
    /// Two equal-correlation samples with different tails, as CSV.
    DemoPitfall(Common),
}

/// Options shared by every command; flags override the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub base: Option<String>,
    #[arg(long)]
    pub epsilon: Option<String>,
    /// ifm or full-mle
    #[arg(long)]
    pub method: Option<String>,
    /// returns or cumulative
    #[arg(long)]
    pub spread_on: Option<String>,
    /// parametric or empirical
    #[arg(long)]
    pub pit: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// Comma-separated marginal families
    #[arg(long)]
    pub marginals: Option<String>,
    /// Comma-separated copula families
    #[arg(long)]
    pub copulas: Option<String>,
    #[arg(long)]
    pub eg_lags: Option<String>,
    #[arg(long)]
    pub top_k: Option<String>,
    #[arg(long)]
    pub critical_value: Option<String>,
    /// returns or cumulative
    #[arg(long)]
    pub coint_on: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct PairArgs {
    #[command(flatten)]
    pub common: Common,
    /// The two trading assets
    #[arg(num_args = 2, required = true)]
    pub symbols: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    #[command(flatten)]
    pub common: Common,
    /// Number of returns per series
    #[arg(long, default_value = "1000")]
    pub n: String,
    #[arg(long, default_value = "independent")]
    pub copula: String,
    #[arg(long, default_value = "0")]
    pub theta: String,
    /// FAMILY:P1,P2[,P3], e.g. gaussian:0,0.01 or student_t:5,0,0.01
    #[arg(long, default_value = "gaussian:0,0.01")]
    pub margin1: String,
    #[arg(long, default_value = "gaussian:0,0.01")]
    pub margin2: String,
    #[arg(long, default_value = "1")]
    pub beta1: String,
    #[arg(long, default_value = "0.5")]
    pub beta2: String,
    #[arg(long, default_value = "0.02")]
    pub noise_sd: String,
    /// Names of the two trading assets
    #[arg(long, default_value = "A1,A2")]
    pub assets: String,
    #[arg(long, default_value = "1600000000")]
    pub start: String,
    #[arg(long, default_value = "86400")]
    pub step: String,
}

impl Common {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
                RunConfig::parse(&text)?
            }
            None => RunConfig::default(),
        };
        let data = self.data.as_ref().map(|p| p.display().to_string());
        let overrides = [
            ("data_path", data.as_deref()),
            ("base_symbol", self.base.as_deref()),
            ("epsilon", self.epsilon.as_deref()),
            ("fit_method", self.method.as_deref()),
            ("spread_on", self.spread_on.as_deref()),
            ("pit", self.pit.as_deref()),
            ("seed", self.seed.as_deref()),
            ("marginal_families", self.marginals.as_deref()),
            ("copula_families", self.copulas.as_deref()),
            ("eg_lags", self.eg_lags.as_deref()),
            ("top_k", self.top_k.as_deref()),
            ("eg_critical_value", self.critical_value.as_deref()),
            ("coint_on", self.coint_on.as_deref()),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let target: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    match commands::dispatch(&cli.command, out, err) {
        Ok(()) => 0,
        Err(e) if e.code == 0 => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.code
        }
    }
}
