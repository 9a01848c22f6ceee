//! `kdvb`: command-line driver for the travelling-wave experiments.
//!
//! Exit codes: 0 success, 1 numerical failure (diagnostics JSON on stderr),
//! 2 usage or validation error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "KDVB_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "kdvb", version, about = "Travelling waves of the fractional KdV-Burgers equation")]
pub struct Cli {
    /// JSON configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for CSV/JSON outputs (default: $KDVB_OUT_DIR, then ".").
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Roots of P(z) = τz² + z^α - h'.
    Roots(RootsArgs),
    /// Convergence of the discrete fractional derivative on e^{λξ}.
    Dalpha(DalphaArgs),
    /// I[v] by both methods on the seeded random family.
    Quadform(QuadformArgs),
    /// Linearised boundary-value problem and null-space sweep.
    Nullspace(NullspaceArgs),
    /// Travelling-wave profile by Newton's method.
    Wave(WaveArgs),
}

#[derive(Debug, Args)]
pub struct RootsArgs {
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub hprime: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DalphaArgs {
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Exponent of the test function e^{λξ}.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// `exp` or `constant`.
    #[arg(long)]
    pub function: Option<String>,
    /// Domain is [-length, 0].
    #[arg(long)]
    pub length: Option<f64>,
    /// Comma-separated grid spacings, coarse to fine.
    #[arg(long, value_parser = config::parse_spacings)]
    pub hs: Option<config::Spacings>,
}

#[derive(Debug, Args)]
pub struct QuadformArgs {
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub bump_halfwidth: Option<f64>,
    #[arg(long)]
    pub t_nodes: Option<usize>,
}

#[derive(Debug, Args)]
pub struct NullspaceArgs {
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub hprime: Option<f64>,
    /// Domain is [-length, 0].
    #[arg(long)]
    pub length: Option<f64>,
    #[arg(long, value_parser = config::parse_spacings)]
    pub hs: Option<config::Spacings>,
}

#[derive(Debug, Args)]
pub struct WaveArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub phi_minus: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub phi_plus: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Domain is [-length, length].
    #[arg(long)]
    pub length: Option<f64>,
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Also evolve the wave in the moving frame and report the drift.
    #[arg(long)]
    pub validate_evolve: bool,
    /// Grid spacing of the evolution run.
    #[arg(long)]
    pub evolve_h: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(kdvb_core::Error),
    /// A property the command checks did not hold; carries a JSON report.
    Check(serde_json::Value),
    Io(std::io::Error),
}

impl From<kdvb_core::Error> for CliError {
    fn from(e: kdvb_core::Error) -> Self {
        match e {
            kdvb_core::Error::InvalidParameter(m) => CliError::Usage(m),
            other => CliError::Numerical(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

fn diagnostics(e: &kdvb_core::Error) -> serde_json::Value {
    use kdvb_core::Error as E;
    let kind = match e {
        E::InvalidParameter(_) => "invalid_parameter",
        E::NonFinite { .. } => "non_finite",
        E::BranchCut(_) => "branch_cut",
        E::RootSearch(_) => "root_search",
        E::ContourRefinement(_) => "contour_refinement",
        E::Quadrature(_) => "quadrature",
        E::LinearAlgebra(_) => "linear_algebra",
        E::NewtonFailure { .. } => "newton_failure",
        E::Measurement(_) => "measurement",
        E::TimeStepping(_) => "time_stepping",
    };
    let mut v = json!({ "error": kind, "message": e.to_string() });
    if let E::NewtonFailure { iterations, history, .. } = e {
        v["iterations"] = json!(iterations);
        v["residual_history"] = json!(history);
    }
    v
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Numerical(e)) => {
            eprintln!("{}", diagnostics(&e));
            ExitCode::from(1)
        }
        Err(CliError::Check(report)) => {
            eprintln!("{report}");
            ExitCode::from(1)
        }
        Err(CliError::Io(e)) => {
            eprintln!("{}", json!({ "error": "io", "message": e.to_string() }));
            ExitCode::from(1)
        }
    }
}
