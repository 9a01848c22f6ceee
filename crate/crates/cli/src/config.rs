//! JSON run configuration. Every field is optional; command-line flags take
//! precedence over the file, and built-in defaults fill the rest.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub alpha: Option<f64>,
    pub tau: Option<f64>,
    pub hprime: Option<f64>,
    pub phi_minus: Option<f64>,
    pub phi_plus: Option<f64>,
    pub lambda: Option<f64>,
    pub function: Option<String>,
    pub length: Option<f64>,
    pub h: Option<f64>,
    pub hs: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub bump_halfwidth: Option<f64>,
    pub t_nodes: Option<usize>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub validate_evolve: Option<bool>,
    pub evolve_h: Option<f64>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub out_dir: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }
}

/// Flag, then file, then default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Grid spacings given on the command line as one comma-separated value.
#[derive(Debug, Clone, PartialEq)]
pub struct Spacings(pub Vec<f64>);

pub fn parse_spacings(s: &str) -> Result<Spacings, String> {
    let out: Result<Vec<f64>, _> = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|e| format!("bad spacing {t:?}: {e}")))
        .collect();
    let out = out?;
    if out.is_empty() {
        return Err("grid spec is empty".into());
    }
    Ok(Spacings(out))
}
