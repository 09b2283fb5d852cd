use std::path::{Path, PathBuf};

use catsim::channels::{ExperimentFile, ExperimentParams};
use catsim::fock::r_to_db;
use catsim::phase_space::QuadAxis;
use catsim::sampler::PhasePlan;
use catsim::tomography::MleConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Everything one run depends on. One file describes one reproducible run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Used when `--out` is not given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub experiment: ExperimentFile,
    pub scenario: Scenario,
    pub plan: PhasePlan,
    pub mle: MleConfig,
    pub bootstrap: BootstrapSpec,
    pub grid: GridSpec,
}

/// Which states `simulate` produces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Scenario {
    /// Photon subtraction heralded on each listed click number, optionally
    /// with the unheralded input state.
    Heralded { heralds: Vec<usize>, include_input: bool },
    /// Even and odd cats `|α⟩ ± |−α⟩`, the even cat after `loss`, and the
    /// classical mixture of `|±α⟩`.
    Cats { alpha_re: f64, alpha_im: f64, loss: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapSpec {
    /// Zero disables the bootstrap.
    pub replicas: usize,
    /// Replicas are reconstructed from histograms with this bin width.
    pub bin_width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub quad_min: f64,
    pub quad_max: f64,
    pub quad_points: usize,
    pub wigner_min: f64,
    pub wigner_max: f64,
    pub wigner_points: usize,
    pub sweep_min_deg: f64,
    pub sweep_max_deg: f64,
    pub sweep_step_deg: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            quad_min: -6.0,
            quad_max: 6.0,
            quad_points: 241,
            wigner_min: -5.0,
            wigner_max: 5.0,
            wigner_points: 201,
            sweep_min_deg: -90.0,
            sweep_max_deg: 90.0,
            sweep_step_deg: 1.0,
        }
    }
}

impl GridSpec {
    pub fn quad_axis(&self) -> CliResult<QuadAxis> {
        QuadAxis::new(self.quad_min, self.quad_max, self.quad_points)
            .map_err(|e| CliError::Config(format!("grid: {e}")))
    }

    pub fn wigner_axis(&self) -> CliResult<QuadAxis> {
        QuadAxis::new(self.wigner_min, self.wigner_max, self.wigner_points)
            .map_err(|e| CliError::Config(format!("grid: {e}")))
    }

    pub fn sweep_deg(&self) -> CliResult<Vec<f64>> {
        if !(self.sweep_step_deg > 0.0) || self.sweep_max_deg < self.sweep_min_deg {
            return Err(CliError::Config("grid: bad marginal sweep range".into()));
        }
        let steps = ((self.sweep_max_deg - self.sweep_min_deg) / self.sweep_step_deg + 1e-9).floor() as usize;
        Ok((0..=steps)
            .map(|k| self.sweep_min_deg + k as f64 * self.sweep_step_deg)
            .collect())
    }
}

/// Named starting points for a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// Heralds 0..=4 at 6.5 dB with the stated losses.
    PaperDefault,
    /// Cats at α = 2.5i: even, odd, 30 % lossy even, and the mixture.
    Fig1,
    /// r = 0.576, R = 0.81, no loss: input state and four-click herald.
    Fig2,
    /// Heralds 0..=4 at 6.5 dB with every loss removed.
    Lossless,
}

impl Preset {
    pub const NAMES: [&'static str; 4] = ["paper_default", "fig1", "fig2", "lossless"];

    pub fn parse(name: &str) -> CliResult<Self> {
        match name {
            "paper_default" => Ok(Preset::PaperDefault),
            "fig1" => Ok(Preset::Fig1),
            "fig2" => Ok(Preset::Fig2),
            "lossless" => Ok(Preset::Lossless),
            other => Err(CliError::Config(format!(
                "unknown preset `{other}` (expected one of {})",
                Preset::NAMES.join(", ")
            ))),
        }
    }
}

impl RunConfig {
    pub fn preset(preset: Preset) -> Self {
        let heralded = |params: ExperimentParams| RunConfig {
            seed: 1,
            output_dir: None,
            experiment: ExperimentFile::from(&params),
            scenario: Scenario::Heralded {
                heralds: (0..=4).collect(),
                include_input: true,
            },
            plan: PhasePlan::default(),
            mle: MleConfig::default(),
            bootstrap: BootstrapSpec {
                replicas: 20,
                bin_width: 0.05,
            },
            grid: GridSpec::default(),
        };
        match preset {
            Preset::PaperDefault => heralded(ExperimentParams::paper_default()),
            Preset::Lossless => heralded(ExperimentParams::lossless()),
            Preset::Fig2 => {
                let mut params = ExperimentParams::lossless();
                params.squeeze = catsim::fock::SqueezeSpec::from_r(0.576);
                let mut cfg = heralded(params);
                cfg.experiment.squeeze_db = r_to_db(0.576);
                cfg.scenario = Scenario::Heralded {
                    heralds: vec![4],
                    include_input: true,
                };
                cfg
            }
            Preset::Fig1 => {
                let mut cfg = heralded(ExperimentParams {
                    cutoff: 40,
                    ..ExperimentParams::paper_default()
                });
                cfg.scenario = Scenario::Cats {
                    alpha_re: 0.0,
                    alpha_im: 2.5,
                    loss: 0.3,
                };
                cfg.mle.cutoff = 25;
                cfg
            }
        }
    }

    pub fn from_toml_str(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML form, hex encoded.
    pub fn hash(&self) -> String {
        hex_digest(Sha256::digest(self.to_toml_string().as_bytes()).as_slice())
    }

    pub fn params(&self) -> ExperimentParams {
        ExperimentParams::from(self.experiment.clone())
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |what: &str, e: catsim::Error| CliError::Config(format!("{what}: {e}"));
        self.params().validate().map_err(|e| bad("experiment", e))?;
        self.plan.validate().map_err(|e| bad("plan", e))?;
        self.mle.validate().map_err(|e| bad("mle", e))?;
        if self.bootstrap.replicas == 1 {
            return Err(CliError::Config("bootstrap: replicas must be 0 or at least 2".into()));
        }
        if !(self.bootstrap.bin_width > 0.0) {
            return Err(CliError::Config("bootstrap: bin_width must be positive".into()));
        }
        self.grid.quad_axis()?;
        self.grid.wigner_axis()?;
        self.grid.sweep_deg()?;
        match &self.scenario {
            Scenario::Heralded { heralds, include_input } => {
                if heralds.is_empty() && !include_input {
                    return Err(CliError::Config("scenario selects no states".into()));
                }
                if let Some(n) = heralds.iter().find(|n| **n > self.experiment.idler_cutoff) {
                    return Err(CliError::Config(format!(
                        "scenario: herald {n} exceeds idler_cutoff {}",
                        self.experiment.idler_cutoff
                    )));
                }
            }
            Scenario::Cats { alpha_re, alpha_im, loss } => {
                if !(alpha_re.is_finite() && alpha_im.is_finite()) || (*alpha_re == 0.0 && *alpha_im == 0.0) {
                    return Err(CliError::Config("scenario: alpha must be finite and non-zero".into()));
                }
                if !(0.0..=1.0).contains(loss) {
                    return Err(CliError::Config("scenario: loss must lie in [0, 1]".into()));
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
