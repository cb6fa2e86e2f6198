//! Metric zoo, strict configuration, experiment runner and report output.

pub mod config;
pub mod plot;
pub mod report;
pub mod run;
pub mod zoo;

use std::path::Path;

use rayon::prelude::*;

pub use config::{load_config, parse_config, Config, ExperimentKind, ExperimentSpec, LoadedConfig};
pub use plot::emit_plots;
pub use report::{CaseReport, RunReport, Status};
pub use run::{run_case, Artifact, RunOptions};
pub use zoo::{builtin, MetricSpec, ZooEntry};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        EXIT_INPUT
    }
}

/// Runs every experiment; results are assembled in spec order.
pub fn run_config(loaded: &LoadedConfig, opts: &RunOptions) -> (RunReport, Vec<Artifact>) {
    let results: Vec<(CaseReport, Vec<Artifact>)> = loaded
        .config
        .experiments
        .par_iter()
        .enumerate()
        .map(|(i, spec)| {
            let entry = loaded.entry(&spec.case).expect("validated reference");
            run_case(i, spec, entry, opts)
        })
        .collect();
    let mut artifacts = Vec::new();
    let mut cases = Vec::new();
    for (c, a) in results {
        cases.push(c);
        artifacts.extend(a);
    }
    (RunReport::new(loaded.hash.clone(), cases), artifacts)
}

/// Writes `report.json` and the artifacts into `dir`.
pub fn write_outputs(dir: &Path, report: &RunReport, artifacts: &[Artifact]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    for a in artifacts {
        std::fs::write(dir.join(&a.name), &a.contents).map_err(io)?;
    }
    std::fs::write(dir.join("report.json"), report.to_json()).map_err(io)
}

/// Sizes the global worker pool from `SRC_GEOLAB_THREADS` when set.
pub fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("SRC_GEOLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().map_err(|_| CliError::Input(format!("SRC_GEOLAB_THREADS: not a count: '{v}'")))?;
    if n == 0 {
        return Err(CliError::Input("SRC_GEOLAB_THREADS must be positive".into()));
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Input(e.to_string()))
}
