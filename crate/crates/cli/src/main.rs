use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use src_geolab_cli::config::{hash_bytes, validate, Config};
use src_geolab_cli::{
    builtin, emit_plots, init_threads, load_config, run_config, write_outputs, Artifact, CliError, ExperimentKind, ExperimentSpec,
    RunOptions, RunReport,
};

#[derive(Parser)]
#[command(name = "src-geolab", version, about = "Randers geodesics, lightlike lifts and Morse indices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect the built-in metric zoo.
    Zoo {
        #[command(subcommand)]
        action: ZooAction,
    },
    /// Run every experiment of a JSON config.
    Run {
        /// Config path (alternative to --config).
        path: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Render SVG figures for the artifacts of a report.
    Plot { report: PathBuf },
    /// Four-way index comparison on one zoo case.
    VerifySrc {
        #[arg(long)]
        case: String,
        #[command(flatten)]
        common: Common,
    },
    /// Regularity probe on one zoo case.
    Probe {
        #[arg(long)]
        case: String,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Subcommand)]
enum ZooAction {
    List,
}

#[derive(Args)]
struct Common {
    /// Output directory for report.json and artifacts; the report goes to stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long = "basis-n")]
    basis_n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Omit timings so that reports are byte-identical across runs.
    #[arg(long = "canonical-output")]
    canonical_output: bool,
}

impl Common {
    fn options(&self) -> Result<RunOptions, CliError> {
        if self.steps == Some(0) {
            return Err(CliError::Input("--steps must be positive".into()));
        }
        if matches!(self.basis_n, Some(n) if n < 2) {
            return Err(CliError::Input("--basis-n must be at least 2".into()));
        }
        Ok(RunOptions { steps: self.steps, basis_n: self.basis_n, seed: self.seed })
    }
}

fn finish(mut report: RunReport, artifacts: Vec<Artifact>, common: &Common, started: Instant) -> Result<i32, CliError> {
    if common.canonical_output {
        report.canonicalize();
    } else {
        report.seconds = Some(started.elapsed().as_secs_f64());
    }
    for c in &report.experiments {
        let failed: Vec<&str> = c.verdicts.iter().filter(|(_, v)| !**v).map(|(k, _)| k.as_str()).collect();
        eprint!("[{}] {} {}: {:?}", c.index, c.spec.kind.as_str(), c.spec.case, c.status);
        if !failed.is_empty() {
            eprint!(" (failed: {})", failed.join(", "));
        }
        if let Some(e) = &c.error {
            eprint!(" ({e})");
        }
        eprintln!();
    }
    match &common.out {
        Some(dir) => write_outputs(dir, &report, &artifacts)?,
        None => print!("{}", report.to_json()),
    }
    Ok(report.exit_code)
}

fn shortcut(kind: ExperimentKind, case: &str, common: &Common, started: Instant) -> Result<i32, CliError> {
    let config = Config { zoo: Vec::new(), experiments: vec![ExperimentSpec::new(kind, case)] };
    let hash = hash_bytes(serde_json::to_string(&config).expect("config serializes").as_bytes());
    let loaded = validate(config, hash)?;
    let (report, artifacts) = run_config(&loaded, &common.options()?);
    finish(report, artifacts, common, started)
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    let started = Instant::now();
    init_threads()?;
    match cli.command {
        Command::Zoo { action: ZooAction::List } => {
            for e in builtin() {
                let mu = e.expected_mu.map(|m| m.to_string()).unwrap_or_else(|| "-".into());
                println!("{:<12} {:<21} dim={} expected_mu={mu}", e.name, e.metric.kind(), e.metric.dim());
            }
            Ok(0)
        }
        Command::Run { path, config, common } => {
            let path = match (path, config) {
                (Some(p), None) | (None, Some(p)) => p,
                (Some(_), Some(_)) => return Err(CliError::Input("give the config either positionally or with --config".into())),
                (None, None) => return Err(CliError::Input("missing config path".into())),
            };
            let loaded = load_config(&path)?;
            let (report, artifacts) = run_config(&loaded, &common.options()?);
            finish(report, artifacts, &common, started)
        }
        Command::Plot { report } => {
            for p in emit_plots(&report)? {
                println!("{}", p.display());
            }
            Ok(0)
        }
        Command::VerifySrc { case, common } => shortcut(ExperimentKind::VerifySrc, &case, &common, started),
        Command::Probe { case, common } => shortcut(ExperimentKind::Probe, &case, &common, started),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
