//! Command-line pipeline around `catsim`: simulate states, sample homodyne
//! data, reconstruct, compare, and summarize.

pub mod config;
pub mod error;
pub mod manifest;
pub mod pipeline;
pub mod report;

use std::path::{Path, PathBuf};

use catsim::tes::{analytic_confusion, confusion, TesParams};

pub use config::{Preset, RunConfig};
pub use error::{CliError, CliResult};

/// Options shared by every pipeline stage.
#[derive(Clone, Debug, Default)]
pub struct StageOptions {
    pub config: Option<PathBuf>,
    pub preset: Option<String>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl StageOptions {
    /// The effective config and output directory. A config file wins over a
    /// preset; `--seed` and `--out` override both.
    pub fn resolve(&self) -> CliResult<(RunConfig, PathBuf)> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config("give either --config or --preset, not both".into()))
            }
            (Some(path), None) => RunConfig::load(path)?,
            (None, Some(name)) => RunConfig::preset(Preset::parse(name)?),
            (None, None) => RunConfig::preset(Preset::PaperDefault),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        let out = self
            .out
            .clone()
            .or_else(|| cfg.output_dir.clone())
            .ok_or_else(|| CliError::Config("no output directory: pass --out or set output_dir".into()))?;
        std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
        Ok((cfg, out))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Simulate,
    Sample,
    Reconstruct,
    Analyze,
    Report,
}

pub fn run_stage(stage: Stage, cfg: &RunConfig, out: &Path, user_datasets: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    match stage {
        Stage::Simulate => pipeline::simulate(cfg, out),
        Stage::Sample => pipeline::sample(cfg, out),
        Stage::Reconstruct => pipeline::reconstruct(cfg, out, user_datasets),
        Stage::Analyze => pipeline::analyze(cfg, out),
        Stage::Report => report::report(cfg, out),
    }
}

/// Every stage in order, stopping at the first error.
pub fn run_all(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    for stage in [Stage::Simulate, Stage::Sample, Stage::Reconstruct, Stage::Analyze, Stage::Report] {
        run_stage(stage, cfg, out, &[])?;
    }
    Ok(())
}

/// Writes Monte Carlo and analytic confusion matrices as CSV.
pub fn write_confusion(params: &TesParams, n_max: usize, trials: usize, seed: u64, out: &Path) -> CliResult<()> {
    let bad = |e: catsim::Error| CliError::Config(format!("tes: {e}"));
    let mc = confusion(params, n_max, trials, seed).map_err(bad)?;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    for (name, m) in [("confusion.csv", mc), ("confusion_analytic.csv", analytic_confusion(params, n_max))] {
        let path = out.join(name);
        let mut buf = Vec::new();
        m.write_csv(&mut buf).expect("writing to memory");
        std::fs::write(&path, buf).map_err(|e| CliError::io(&path, e))?;
    }
    Ok(())
}
