//! `lcland` command-line front end.
//!
//! Exit codes: 0 on success, 1 on validation errors, 2 when a solver does not
//! converge (whatever was computed is still written).

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    /// Bad input; nothing was computed.
    Invalid(String),
    /// A solver failed before producing a result.
    Numerical(String),
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Invalid(m) => write!(f, "invalid input: {m}"),
            CliError::Numerical(m) => write!(f, "solver failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<lcland::Error> for CliError {
    fn from(e: lcland::Error) -> Self {
        use lcland::Error as E;
        match e {
            E::NoConvergence { .. }
            | E::NotStationary { .. }
            | E::LinearSolveFailure { .. }
            | E::DegeneratePath { .. }
            | E::NotIndexOne { .. }
            | E::WrongIndex { .. }
            | E::BudgetExceeded { .. } => CliError::Numerical(e.to_string()),
            E::Io(_) | E::Json(_) => CliError::Io(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Numerical(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "lcland", version, about = "Stable states, transition paths and solution landscapes of confined nematics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct ConfigArgs {
    /// JSON run configuration.
    pub config: PathBuf,
    /// Output directory; overrides `output` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Relax `seeds.init` with L-BFGS and report its Morse index.
    Minimize(ConfigArgs),
    /// Gradient flow from `seeds.init`.
    Flow(ConfigArgs),
    /// Minimal energy path between the relaxed `seeds.init` and `seeds.target`.
    String(ConfigArgs),
    /// Saddle of index `schemes.saddle_index` from `seeds.init`.
    Saddle(ConfigArgs),
    /// Solution landscape below the root state.
    Landscape {
        #[arg(required_unless_present = "toy")]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Use the built-in separable quartic instead of a grid.
        #[arg(long)]
        toy: bool,
    },
    /// Homogeneous Maier-Saupe critical points and Leslie coefficients.
    MaierSaupe {
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        gamma1: f64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Radial hedgehog profile; bulk coefficients come from the config if given.
    Hedgehog {
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 10.0)]
        radius: f64,
        #[arg(long, default_value_t = 512)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let res = match cli.command {
        Command::Minimize(a) => run::minimize(&a),
        Command::Flow(a) => run::flow(&a),
        Command::String(a) => run::string(&a),
        Command::Saddle(a) => run::saddle(&a),
        Command::Landscape { config, out, toy } => run::landscape(config.as_deref(), out, toy),
        Command::MaierSaupe { alpha, gamma1, out } => run::maier_saupe(alpha, gamma1, out),
        Command::Hedgehog { config, radius, n, out } => run::hedgehog(config.as_deref(), radius, n, out),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("lcland: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
