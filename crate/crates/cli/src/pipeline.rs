//! The five stages. Each reads only what the previous stage wrote into the
//! output directory and records its own files in the manifest.

use std::f64::consts::FRAC_PI_2;
use std::path::{Path, PathBuf};
use std::time::Instant;

use catsim::channels::{count_rate_table, herald_subtract, input_state, loss_channel, CountRateRow};
use catsim::fock::{cat_state, fidelity, mixed_coherent, DensityMatrix, Parity};
use catsim::phase_space::{
    cat_coherence, marginal_sweep, origin_parity, rho_quad, wigner, CatCoherence,
};
use catsim::sampler::{derive_seed, synth_dataset, HomodyneDataset};
use catsim::tomography::{
    bootstrap, mle_reconstruct, Binning, BootstrapReport, MleConfig, MleDiagnostics, StateSummary,
    MONOTONICITY_TOLERANCE,
};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, Scenario};
use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;

pub const STATES_DIR: &str = "states";
pub const DATASETS_DIR: &str = "datasets";
pub const RECON_DIR: &str = "recon";
pub const ANALYSIS_DIR: &str = "analysis";
pub const REPORT_DIR: &str = "report";
pub const INDEX_FILE: &str = "index.json";

/// Stream offset separating bootstrap seeds from sampling seeds.
const BOOTSTRAP_STREAM: u64 = 1 << 32;

/// Collects the files a stage writes, relative to the output directory.
pub(crate) struct StageWriter<'a> {
    out: &'a Path,
    files: Vec<PathBuf>,
}

impl<'a> StageWriter<'a> {
    pub(crate) fn new(out: &'a Path) -> Self {
        Self { out, files: Vec::new() }
    }

    pub(crate) fn write(&mut self, rel: impl AsRef<Path>, bytes: &[u8]) -> CliResult<()> {
        let rel = rel.as_ref().to_path_buf();
        let path = self.out.join(&rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.files.push(rel);
        Ok(())
    }

    pub(crate) fn write_json<T: Serialize>(&mut self, rel: impl AsRef<Path>, value: &T) -> CliResult<()> {
        let text = serde_json::to_string_pretty(value).expect("value serializes") + "\n";
        self.write(rel, text.as_bytes())
    }

    fn write_csv(
        &mut self,
        rel: impl AsRef<Path>,
        f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    ) -> CliResult<()> {
        let mut buf = Vec::new();
        f(&mut buf).expect("writing to memory");
        self.write(rel, &buf)
    }

    pub(crate) fn finish(
        self,
        stage: &str,
        cfg: &RunConfig,
        started: Instant,
    ) -> CliResult<Vec<PathBuf>> {
        let mut manifest = RunManifest::load_or_new(self.out)?;
        manifest.record(
            self.out,
            stage,
            cfg.hash(),
            cfg.seed,
            self.files.clone(),
            started.elapsed().as_secs_f64(),
        )?;
        manifest.save(self.out)?;
        Ok(self.files)
    }
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path, stage: &'static str) -> CliResult<T> {
    if !path.exists() {
        return Err(CliError::MissingInput {
            stage,
            path: path.to_path_buf(),
        });
    }
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::io(path, e))
}

fn read_density(path: &Path, stage: &'static str) -> CliResult<DensityMatrix> {
    if !path.exists() {
        return Err(CliError::MissingInput {
            stage,
            path: path.to_path_buf(),
        });
    }
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    DensityMatrix::from_json_str(&text).map_err(|e| CliError::lib(path.display().to_string(), e))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coherence {
    pub peaks: [f64; 2],
    pub diagonal: [f64; 2],
    pub off_diagonal: [f64; 2],
}

impl From<CatCoherence> for Coherence {
    fn from(c: CatCoherence) -> Self {
        Self {
            peaks: c.peaks,
            diagonal: c.diagonal,
            off_diagonal: c.off_diagonal,
        }
    }
}

impl Coherence {
    pub fn min_ratio(&self) -> f64 {
        (0..2)
            .map(|i| self.off_diagonal[i] / self.diagonal[i])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs_ratio(&self) -> f64 {
        (0..2)
            .map(|i| (self.off_diagonal[i] / self.diagonal[i]).abs())
            .fold(0.0, f64::max)
    }
}

/// Per-state figures of merit written by `simulate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateInfo {
    pub name: String,
    pub herald_n: Option<usize>,
    pub cutoff: usize,
    pub herald_probability: Option<f64>,
    pub rate_cps: Option<f64>,
    pub mean_photon: f64,
    pub wigner_origin: f64,
    pub wigner_min: f64,
    pub odd_weight: f64,
    pub coherence: Coherence,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatesIndex {
    pub scenario: String,
    pub states: Vec<StateInfo>,
    pub rates: Vec<CountRateRow>,
}

impl StatesIndex {
    pub fn get(&self, name: &str) -> Option<&StateInfo> {
        self.states.iter().find(|s| s.name == name)
    }
}

pub fn herald_name(n: usize) -> String {
    format!("herald_{n}")
}

struct Simulated {
    name: String,
    herald_n: Option<usize>,
    herald_probability: Option<f64>,
    rate_cps: Option<f64>,
    rho: DensityMatrix,
}

fn simulated_states(cfg: &RunConfig) -> CliResult<Vec<Simulated>> {
    let params = cfg.params();
    let config = params
        .hilbert()
        .map_err(|e| CliError::Config(format!("experiment: {e}")))?;
    match &cfg.scenario {
        Scenario::Heralded { heralds, include_input } => {
            let mut out = Vec::new();
            if *include_input {
                let rho = input_state(&params, config).map_err(|e| CliError::lib("input state", e))?;
                out.push(Simulated {
                    name: "input".into(),
                    herald_n: None,
                    herald_probability: None,
                    rate_cps: None,
                    rho,
                });
            }
            let branches: Vec<CliResult<Simulated>> = heralds
                .par_iter()
                .map(|&n| {
                    let h = herald_subtract(&params.with_herald(n), config)
                        .map_err(|e| CliError::lib(format!("herald {n}"), e))?;
                    Ok(Simulated {
                        name: herald_name(n),
                        herald_n: Some(n),
                        herald_probability: Some(h.herald_probability),
                        rate_cps: Some(h.estimated_rate),
                        rho: h.state,
                    })
                })
                .collect();
            for b in branches {
                out.push(b?);
            }
            Ok(out)
        }
        Scenario::Cats { alpha_re, alpha_im, loss } => {
            let alpha = Complex64::new(*alpha_re, *alpha_im);
            let cat = |parity| {
                cat_state(alpha, parity, config)
                    .map(|s| s.to_density())
                    .map_err(|e| CliError::lib("cat state", e))
            };
            let even = cat(Parity::Even)?;
            let odd = cat(Parity::Odd)?;
            let lossy = loss_channel(&even, 1.0 - loss).map_err(|e| CliError::lib("lossy cat", e))?;
            let mixture = mixed_coherent(alpha, config).map_err(|e| CliError::lib("mixture", e))?;
            Ok([("even_cat", even), ("odd_cat", odd), ("lossy_even_cat", lossy), ("mixture", mixture)]
                .into_iter()
                .map(|(name, rho)| Simulated {
                    name: name.into(),
                    herald_n: None,
                    herald_probability: None,
                    rate_cps: None,
                    rho,
                })
                .collect())
        }
    }
}

pub fn simulate(cfg: &RunConfig, out: &Path) -> CliResult<Vec<PathBuf>> {
    let started = Instant::now();
    let quad = cfg.grid.quad_axis()?;
    let wig = cfg.grid.wigner_axis()?;
    let sweep = cfg.grid.sweep_deg()?;
    let states = simulated_states(cfg)?;
    let mut writer = StageWriter::new(out);
    let mut infos = Vec::new();
    for s in &states {
        let dir = Path::new(STATES_DIR).join(&s.name);
        let rho = &s.rho;
        writer.write(dir.join("density.json"), rho.to_json_string().as_bytes())?;
        let dist = rho.photon_distribution();
        writer.write_csv(dir.join("photon_distribution.csv"), |w| {
            use std::io::Write;
            writeln!(w, "n,probability")?;
            for (n, p) in dist.iter().enumerate() {
                writeln!(w, "{n},{p:?}")?;
            }
            Ok(())
        })?;
        writer.write_csv(dir.join("rho_momentum.csv"), |w| rho_quad(rho, FRAC_PI_2, &quad).write_csv(w))?;
        writer.write_csv(dir.join("rho_position.csv"), |w| rho_quad(rho, 0.0, &quad).write_csv(w))?;
        let grid = wigner(rho, &wig, &wig);
        writer.write_csv(dir.join("wigner.csv"), |w| grid.write_csv(w))?;
        writer.write_csv(dir.join("wigner_p0.csv"), |w| {
            use std::io::Write;
            writeln!(w, "# basis=position theta=0")?;
            writeln!(w, "x,w")?;
            for (x, v) in grid.cross_section_at_p(0.0) {
                writeln!(w, "{x:?},{v:?}")?;
            }
            Ok(())
        })?;
        writer.write_csv(dir.join("marginal_sweep.csv"), |w| marginal_sweep(rho, &sweep, &quad).write_csv(w))?;
        infos.push(StateInfo {
            name: s.name.clone(),
            herald_n: s.herald_n,
            cutoff: rho.config().cutoff(),
            herald_probability: s.herald_probability,
            rate_cps: s.rate_cps,
            mean_photon: catsim::fock::mean_photon(rho),
            wigner_origin: origin_parity(rho),
            wigner_min: grid.min(),
            odd_weight: dist.iter().skip(1).step_by(2).sum(),
            coherence: cat_coherence(rho, &quad).into(),
        });
    }

    let rates = match &cfg.scenario {
        Scenario::Heralded { heralds, .. } if !heralds.is_empty() => {
            let n_max = *heralds.iter().max().expect("non-empty");
            count_rate_table(&cfg.params(), n_max).map_err(|e| CliError::lib("count rates", e))?
        }
        _ => Vec::new(),
    };
    if !rates.is_empty() {
        writer.write_csv(Path::new(STATES_DIR).join("rates.csv"), |w| {
            use std::io::Write;
            writeln!(w, "n,probability,rate_cps,mean_photon")?;
            for row in &rates {
                let mean = infos
                    .iter()
                    .find(|i| i.herald_n == Some(row.n))
                    .map(|i| format!("{:?}", i.mean_photon))
                    .unwrap_or_default();
                writeln!(w, "{},{:?},{:?},{mean}", row.n, row.probability, row.rate_cps)?;
            }
            Ok(())
        })?;
    }
    let scenario = match cfg.scenario {
        Scenario::Heralded { .. } => "heralded",
        Scenario::Cats { .. } => "cats",
    };
    writer.write_json(
        Path::new(STATES_DIR).join(INDEX_FILE),
        &StatesIndex {
            scenario: scenario.into(),
            states: infos,
            rates,
        },
    )?;
    writer.finish("simulate", cfg, started)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub name: String,
    /// Path of the dataset CSV, relative to the output directory when the
    /// pipeline produced it.
    pub source: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub datasets: Vec<DatasetEntry>,
}

pub fn sample(cfg: &RunConfig, out: &Path) -> CliResult<Vec<PathBuf>> {
    let started = Instant::now();
    let index: StatesIndex = read_json(&out.join(STATES_DIR).join(INDEX_FILE), "simulate")?;
    let mut writer = StageWriter::new(out);
    let mut entries = Vec::new();
    for (i, info) in index.states.iter().enumerate() {
        let rho = read_density(&out.join(STATES_DIR).join(&info.name).join("density.json"), "simulate")?;
        let data = synth_dataset(&rho, &cfg.plan, derive_seed(cfg.seed, i as u64), &info.name)
            .map_err(|e| CliError::lib(format!("sampling {}", info.name), e))?;
        let rel = Path::new(DATASETS_DIR).join(format!("{}.csv", info.name));
        let mut buf = Vec::new();
        data.write_csv(&mut buf).map_err(|e| CliError::lib("dataset", e))?;
        writer.write(&rel, &buf)?;
        entries.push(DatasetEntry {
            name: info.name.clone(),
            source: crate::manifest::rel_string(&rel),
        });
    }
    writer.write_json(Path::new(DATASETS_DIR).join(INDEX_FILE), &DatasetIndex { datasets: entries })?;
    writer.finish("sample", cfg, started)
}

/// `diagnostics.json` of one reconstruction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconDiagnostics {
    pub iterations: usize,
    pub final_log_likelihood: f64,
    pub converged: bool,
    pub warnings: Vec<String>,
    /// Log-likelihood never dropped between iterations.
    pub monotone: bool,
    pub records: usize,
    pub phases: usize,
}

impl ReconDiagnostics {
    fn new(d: &MleDiagnostics, data: &HomodyneDataset) -> Self {
        let monotone = d
            .likelihood_trace
            .windows(2)
            .all(|w| w[1] >= w[0] - MONOTONICITY_TOLERANCE * w[0].abs());
        Self {
            iterations: d.iterations,
            final_log_likelihood: d.final_log_likelihood,
            converged: d.converged,
            warnings: d.warnings.clone(),
            monotone,
            records: data.len(),
            phases: data.phases().len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconIndex {
    pub reconstructions: Vec<DatasetEntry>,
}

/// Reconstructs every dataset written by `sample`, or the given user
/// datasets instead. Never reads simulated density matrices.
pub fn reconstruct(cfg: &RunConfig, out: &Path, user_datasets: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let started = Instant::now();
    let sources: Vec<(String, PathBuf, String)> = if user_datasets.is_empty() {
        let index: DatasetIndex = read_json(&out.join(DATASETS_DIR).join(INDEX_FILE), "sample")?;
        index
            .datasets
            .into_iter()
            .map(|e| (e.name, out.join(&e.source), e.source))
            .collect()
    } else {
        user_datasets
            .iter()
            .map(|p| {
                let name = p
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .ok_or_else(|| CliError::Config(format!("bad dataset path {}", p.display())))?;
                Ok((name, p.clone(), p.display().to_string()))
            })
            .collect::<CliResult<_>>()?
    };
    let boot_cfg = MleConfig {
        binning: Binning::Width(cfg.bootstrap.bin_width),
        ..cfg.mle.clone()
    };
    let mut writer = StageWriter::new(out);
    let mut entries = Vec::new();
    for (i, (name, path, source)) in sources.into_iter().enumerate() {
        if !path.exists() {
            return Err(CliError::MissingInput { stage: "sample", path });
        }
        let data = HomodyneDataset::load(&path).map_err(|e| CliError::lib(path.display().to_string(), e))?;
        let (rho, diag) =
            mle_reconstruct(&data, &cfg.mle).map_err(|e| CliError::lib(format!("reconstructing {name}"), e))?;
        let dir = Path::new(RECON_DIR).join(&name);
        writer.write(dir.join("density.json"), rho.to_json_string().as_bytes())?;
        writer.write_json(dir.join("diagnostics.json"), &ReconDiagnostics::new(&diag, &data))?;
        if cfg.bootstrap.replicas >= 2 {
            let seed = derive_seed(cfg.seed, BOOTSTRAP_STREAM + i as u64);
            let report = bootstrap(&data, &boot_cfg, cfg.bootstrap.replicas, seed)
                .map_err(|e| CliError::lib(format!("bootstrap of {name}"), e))?;
            writer.write_json(dir.join("bootstrap.json"), &report)?;
        }
        entries.push(DatasetEntry { name, source });
    }
    writer.write_json(Path::new(RECON_DIR).join(INDEX_FILE), &ReconIndex { reconstructions: entries })?;
    writer.finish("reconstruct", cfg, started)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Figures {
    pub mean_photon: f64,
    pub wigner_origin: f64,
    pub peak_off_diagonal: f64,
}

impl From<StateSummary> for Figures {
    fn from(s: StateSummary) -> Self {
        Self {
            mean_photon: s.mean_photon,
            wigner_origin: s.wigner_origin,
            peak_off_diagonal: s.peak_off_diagonal,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub name: String,
    pub herald_n: Option<usize>,
    /// Absent when no simulated state of the same name exists.
    pub fidelity: Option<f64>,
    pub simulated: Option<Figures>,
    pub reconstructed: Figures,
    pub bootstrap: Option<BootstrapReport>,
    pub sign_match: Option<bool>,
    pub monotone: bool,
    pub converged: bool,
    pub warnings: Vec<String>,
    pub rate_cps: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub comparisons: Vec<Comparison>,
}

fn pad_to_common(a: &DensityMatrix, b: &DensityMatrix) -> CliResult<(DensityMatrix, DensityMatrix)> {
    let config = if a.dim() >= b.dim() { a.config() } else { b.config() };
    let pad = |m: &DensityMatrix| m.with_cutoff(config).map_err(|e| CliError::lib("padding", e));
    Ok((pad(a)?, pad(b)?))
}

pub fn analyze(cfg: &RunConfig, out: &Path) -> CliResult<Vec<PathBuf>> {
    let started = Instant::now();
    let index: ReconIndex = read_json(&out.join(RECON_DIR).join(INDEX_FILE), "reconstruct")?;
    let states: Option<StatesIndex> = read_json(&out.join(STATES_DIR).join(INDEX_FILE), "simulate").ok();
    let mut comparisons = Vec::new();
    for entry in &index.reconstructions {
        let dir = out.join(RECON_DIR).join(&entry.name);
        let rho = read_density(&dir.join("density.json"), "reconstruct")?;
        let diag: ReconDiagnostics = read_json(&dir.join("diagnostics.json"), "reconstruct")?;
        let boot_path = dir.join("bootstrap.json");
        let boot: Option<BootstrapReport> = if boot_path.exists() {
            Some(read_json(&boot_path, "reconstruct")?)
        } else {
            None
        };
        let info = states.as_ref().and_then(|s| s.get(&entry.name));
        let truth_path = out.join(STATES_DIR).join(&entry.name).join("density.json");
        let truth = if info.is_some() && truth_path.exists() {
            Some(read_density(&truth_path, "simulate")?)
        } else {
            None
        };
        let reconstructed: Figures = StateSummary::of(&rho).into();
        let (fid, simulated, sign_match) = match &truth {
            Some(t) => {
                let (a, b) = pad_to_common(&rho, t)?;
                let f = fidelity(&a, &b).map_err(|e| CliError::lib("fidelity", e))?;
                let sim: Figures = StateSummary::of(t).into();
                let sign = sim.wigner_origin.signum() == reconstructed.wigner_origin.signum();
                (Some(f), Some(sim), Some(sign))
            }
            None => (None, None, None),
        };
        comparisons.push(Comparison {
            name: entry.name.clone(),
            herald_n: info.and_then(|i| i.herald_n),
            fidelity: fid,
            simulated,
            reconstructed,
            bootstrap: boot,
            sign_match,
            monotone: diag.monotone,
            converged: diag.converged,
            warnings: diag.warnings,
            rate_cps: info.and_then(|i| i.rate_cps),
        });
    }
    let mut writer = StageWriter::new(out);
    writer.write_csv(Path::new(ANALYSIS_DIR).join("comparison.csv"), |w| {
        use std::io::Write;
        writeln!(
            w,
            "name,fidelity,mean_photon,mean_photon_std,wigner_origin,wigner_origin_std,peak_off_diagonal,peak_off_diagonal_std,rate_cps"
        )?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
        for c in &comparisons {
            let b = c.bootstrap.as_ref();
            writeln!(
                w,
                "{},{},{:?},{},{:?},{},{:?},{},{}",
                c.name,
                opt(c.fidelity),
                c.reconstructed.mean_photon,
                opt(b.map(|b| b.mean_photon.std)),
                c.reconstructed.wigner_origin,
                opt(b.map(|b| b.wigner_origin.std)),
                c.reconstructed.peak_off_diagonal,
                opt(b.map(|b| b.peak_off_diagonal.std)),
                opt(c.rate_cps),
            )?;
        }
        Ok(())
    })?;
    writer.write_json(Path::new(ANALYSIS_DIR).join("comparison.json"), &Analysis { comparisons })?;
    writer.finish("analyze", cfg, started)
}
