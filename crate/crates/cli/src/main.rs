use std::path::PathBuf;
use std::process::ExitCode;

use catsim::tes::{ResolutionKind, TesParams};
use catsim_cli::{run_all, run_stage, write_confusion, CliError, Preset, RunConfig, Stage, StageOptions};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "catsim", version, about = "Photon-subtracted squeezed light: simulation and tomography pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in configuration: paper_default, fig1, fig2 or lossless.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory shared by all stages.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

impl From<Common> for StageOptions {
    fn from(c: Common) -> Self {
        StageOptions {
            config: c.config,
            preset: c.preset,
            out: c.out,
            seed: c.seed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Resolution {
    Fwhm,
    Sigma,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured states and write their grids.
    Simulate(Common),
    /// Draw homodyne datasets from the simulated states.
    Sample(Common),
    /// Maximum-likelihood reconstruction of every dataset.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// Reconstruct these dataset CSVs instead of the sampled ones.
        #[arg(long)]
        dataset: Vec<PathBuf>,
    },
    /// Compare reconstructions with the simulated states.
    Analyze(Common),
    /// Verify checksums and summarize the acceptance criteria.
    Report(Common),
    /// All five stages in order.
    Run(Common),
    /// Print a preset as a config file.
    Config {
        #[arg(long, default_value = "paper_default")]
        preset: String,
    },
    /// Photon-number confusion matrix of the TES model.
    Confusion {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        #[arg(long, default_value_t = 4)]
        n_max: usize,
        /// Energy resolution in eV.
        #[arg(long, default_value_t = 0.176)]
        resolution: f64,
        #[arg(long, value_enum, default_value = "fwhm")]
        resolution_kind: Resolution,
        /// White trace noise in units of the single-photon peak.
        #[arg(long, default_value_t = 0.01)]
        noise: f64,
    },
}

fn stage(stage: Stage, common: Common, datasets: &[PathBuf]) -> Result<(), CliError> {
    let (cfg, out) = StageOptions::from(common).resolve()?;
    let files = run_stage(stage, &cfg, &out, datasets)?;
    eprintln!("wrote {} files under {}", files.len(), out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(c) => stage(Stage::Simulate, c, &[]),
        Command::Sample(c) => stage(Stage::Sample, c, &[]),
        Command::Reconstruct { common, dataset } => stage(Stage::Reconstruct, common, &dataset),
        Command::Analyze(c) => stage(Stage::Analyze, c, &[]),
        Command::Report(c) => {
            let (cfg, out) = StageOptions::from(c).resolve()?;
            let result = run_stage(Stage::Report, &cfg, &out, &[]);
            if let Ok(text) = std::fs::read_to_string(out.join("report").join("summary.txt")) {
                print!("{text}");
            }
            result.map(|_| ())
        }
        Command::Run(c) => {
            let (cfg, out) = StageOptions::from(c).resolve()?;
            let result = run_all(&cfg, &out);
            if let Ok(text) = std::fs::read_to_string(out.join("report").join("summary.txt")) {
                print!("{text}");
            }
            result
        }
        Command::Config { preset } => {
            print!("{}", RunConfig::preset(Preset::parse(&preset)?).to_toml_string());
            Ok(())
        }
        Command::Confusion {
            out,
            seed,
            trials,
            n_max,
            resolution,
            resolution_kind,
            noise,
        } => {
            let params = TesParams {
                energy_resolution_ev: resolution,
                resolution_kind: match resolution_kind {
                    Resolution::Fwhm => ResolutionKind::Fwhm,
                    Resolution::Sigma => ResolutionKind::Sigma,
                },
                noise_floor: noise,
                ..TesParams::default()
            };
            write_confusion(&params, n_max, trials, seed, &out)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
