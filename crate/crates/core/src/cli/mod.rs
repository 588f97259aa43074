//! Batch experiment runner behind the `isac` binary.
//!
//! `isac run <experiment> --scenario <file> --seed <u64> --out <dir>` loads a
//! TOML scenario, runs one experiment and writes plot-ready CSV files, a
//! `kpis.json` summary and a `manifest.json` that echoes the full scenario,
//! options, seed and crate version. `isac replay <manifest> --out <dir>`
//! reproduces a run from its manifest alone.

mod experiments;
mod output;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::channel::ScenarioFile;
use crate::error::{IsacError, Result};

pub use output::{ArtifactWriter, CsvTable};

/// Manifest format written next to every run.
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    RangeProfile,
    IciImpact,
    PnImpact,
    IciExploit,
    PnExploit,
    DetectionRoc,
    CrbSweep,
    AllocFrontier,
    McpcAnalysis,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::RangeProfile => "range-profile",
            Experiment::IciImpact => "ici-impact",
            Experiment::PnImpact => "pn-impact",
            Experiment::IciExploit => "ici-exploit",
            Experiment::PnExploit => "pn-exploit",
            Experiment::DetectionRoc => "detection-roc",
            Experiment::CrbSweep => "crb-sweep",
            Experiment::AllocFrontier => "alloc-frontier",
            Experiment::McpcAnalysis => "mcpc-analysis",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "isac", version, about = "OFDM/MCPC ISAC experiment runner")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment on a scenario file.
    Run(RunArgs),
    /// Re-run the experiment recorded in a manifest.json.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, clap::Args)]
pub struct RunArgs {
    #[arg(value_enum)]
    pub experiment: Experiment,
    /// Scenario TOML file.
    #[arg(long)]
    pub scenario: PathBuf,
    /// Run seed; replaces the scenario's own seed.
    #[arg(long)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads for trial-level parallelism (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Allow writing into a non-empty output directory.
    #[arg(long)]
    pub overwrite: bool,
}

#[derive(Debug, Clone, clap::Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub overwrite: bool,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub manifest_version: u32,
    pub crate_name: String,
    pub crate_version: String,
    pub experiment: Experiment,
    pub scenario_path: String,
    pub seed: u64,
    pub out_dir: String,
    /// The scenario as parsed, with `seed` set to the run seed; its
    /// `experiment` table holds the experiment options.
    pub scenario: ScenarioFile,
    pub artifacts: Vec<String>,
}

/// Result of a successful run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub manifest: ExperimentManifest,
    pub kpis: serde_json::Value,
}

/// Runs `experiment` on an already parsed scenario and writes all artifacts into `out`.
pub fn run_scenario(
    experiment: Experiment,
    mut scenario: ScenarioFile,
    scenario_path: &str,
    seed: u64,
    out: &Path,
    threads: Option<usize>,
    overwrite: bool,
) -> Result<RunSummary> {
    scenario.seed = seed;
    let mut writer = ArtifactWriter::create(out, overwrite)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| IsacError::InvalidConfig(format!("thread pool: {e}")))?;
    let kpis = pool.install(|| experiments::run(experiment, &scenario, &mut writer))?;
    writer.json("kpis.json", &kpis)?;
    let mut manifest = ExperimentManifest {
        manifest_version: MANIFEST_VERSION,
        crate_name: env!("CARGO_PKG_NAME").into(),
        crate_version: env!("CARGO_PKG_VERSION").into(),
        experiment,
        scenario_path: scenario_path.into(),
        seed,
        out_dir: out.display().to_string(),
        scenario,
        artifacts: Vec::new(),
    };
    manifest.artifacts = writer.written().to_vec();
    manifest.artifacts.push("manifest.json".into());
    writer.json("manifest.json", &manifest)?;
    Ok(RunSummary { manifest, kpis })
}

pub fn run(args: &RunArgs) -> Result<RunSummary> {
    let scenario = ScenarioFile::load(&args.scenario)?;
    run_scenario(
        args.experiment,
        scenario,
        &args.scenario.display().to_string(),
        args.seed,
        &args.out,
        args.threads,
        args.overwrite,
    )
}

pub fn replay(args: &ReplayArgs) -> Result<RunSummary> {
    let text = std::fs::read_to_string(&args.manifest)
        .map_err(|e| IsacError::Io(format!("{}: {e}", args.manifest.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let m: ExperimentManifest = serde_path_to_error::deserialize(de).map_err(|e| IsacError::Scenario {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    run_scenario(
        m.experiment,
        m.scenario,
        &m.scenario_path,
        m.seed,
        &args.out,
        args.threads,
        args.overwrite,
    )
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Run(a) => run(a),
        Command::Replay(a) => replay(a),
    };
    match result {
        Ok(s) => {
            println!(
                "{}: wrote {} artifacts to {}",
                s.manifest.experiment.name(),
                s.manifest.artifacts.len(),
                s.manifest.out_dir
            );
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
