//! Loss, beam splitting and lossy photon counting, composed into the heralded
//! photon-subtraction pipeline.
//!
//! The pipeline runs
//!
//! ```text
//! S(r)|0⟩ ─ loss(1 − opa_loss) ─ BS(R) ─┬─ signal ─ loss(η_s) ─▶ heralded state
//!                                       └─ idler ── Π_n(η_i)
//! ```
//!
//! Idler inefficiency is folded into the photon-counting POVM rather than
//! applied as a two-mode channel; the two are equivalent for a diagonal
//! measurement and the tests check that.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{squeezed_vacuum, DensityMatrix, HilbertConfig, SqueezeSpec, StateVector};
use crate::special::{binomial, binomial_pmf};

/// Default cap on the number of two-mode amplitudes.
pub const DEFAULT_JOINT_BUDGET: usize = 1 << 16;

/// Default idler cutoff.
pub const DEFAULT_IDLER_CUTOFF: usize = 12;

/// Amplitude-damping channel with transmissivity `eta`.
///
/// `ρ' = Σ_k K_k ρ K_k†` with `K_k = Σ_n √(C(n,k) η^{n−k} (1−η)^k) |n−k⟩⟨n|`.
pub fn loss_channel(rho: &DensityMatrix, eta: f64) -> Result<DensityMatrix> {
    check_unit("transmissivity", eta)?;
    let out = loss_operator(rho.elements(), eta);
    Ok(DensityMatrix::from_trusted(hermitize(out), rho.config()))
}

// Elementwise form of the Kraus sum:
// ρ'_{n,m} = Σ_k √(C(n+k,k) C(m+k,k)) η^{(n+m)/2} (1−η)^k ρ_{n+k,m+k}.
pub(crate) fn loss_operator(rho: &DMatrix<Complex64>, eta: f64) -> DMatrix<Complex64> {
    let d = rho.nrows();
    if eta == 1.0 {
        return rho.clone();
    }
    let loss = 1.0 - eta;
    let sqrt_eta_pow: Vec<f64> = (0..d).map(|n| eta.sqrt().powi(n as i32)).collect();
    let loss_pow: Vec<f64> = (0..d).map(|k| loss.powi(k as i32)).collect();
    DMatrix::from_fn(d, d, |n, m| {
        let kmax = d - n.max(m);
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..kmax {
            let w = (binomial(n + k, k) * binomial(m + k, k)).sqrt() * loss_pow[k];
            acc += rho[(n + k, m + k)] * w;
        }
        acc * (sqrt_eta_pow[n] * sqrt_eta_pow[m])
    })
}

fn hermitize(m: DMatrix<Complex64>) -> DMatrix<Complex64> {
    (&m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

fn check_unit(name: &str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::domain(format!("{name} must lie in [0, 1], got {value}")));
    }
    Ok(())
}

/// Pure state of the signal and idler modes after the tap.
///
/// `amplitudes[(s, i)]` is the coefficient of `|s⟩_signal |i⟩_idler`.
#[derive(Clone, Debug)]
pub struct TwoModeState {
    amplitudes: DMatrix<Complex64>,
    signal: HilbertConfig,
    /// Probability that fell above the idler cutoff and was dropped.
    discarded: f64,
}

impl TwoModeState {
    pub fn amplitudes(&self) -> &DMatrix<Complex64> {
        &self.amplitudes
    }

    pub fn signal_config(&self) -> HilbertConfig {
        self.signal
    }

    pub fn idler_cutoff(&self) -> usize {
        self.amplitudes.ncols() - 1
    }

    pub fn discarded_weight(&self) -> f64 {
        self.discarded
    }

    /// Distribution of the total photon number `s + i`.
    pub fn total_photon_distribution(&self) -> Vec<f64> {
        let (rows, cols) = self.amplitudes.shape();
        let mut out = vec![0.0; rows + cols - 1];
        for s in 0..rows {
            for i in 0..cols {
                out[s + i] += self.amplitudes[(s, i)].norm_sqr();
            }
        }
        out
    }

    pub fn idler_distribution(&self) -> Vec<f64> {
        (0..self.amplitudes.ncols())
            .map(|i| self.amplitudes.column(i).iter().map(|c| c.norm_sqr()).sum())
            .collect()
    }

    /// Unnormalized signal operator `Tr_idler[(I ⊗ Π) |Ψ⟩⟨Ψ|]` for a diagonal
    /// idler POVM element.
    pub fn heralded_operator(&self, povm: &DiagonalPovm) -> Result<DMatrix<Complex64>> {
        if povm.weights.len() != self.amplitudes.ncols() {
            return Err(Error::DimensionMismatch {
                left: povm.weights.len(),
                right: self.amplitudes.ncols(),
            });
        }
        let d = self.amplitudes.nrows();
        let mut out = DMatrix::zeros(d, d);
        for (i, &w) in povm.weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let col = self.amplitudes.column(i);
            out += col * col.adjoint() * Complex64::new(w, 0.0);
        }
        Ok(out)
    }
}

/// Mixes `signal_in` with vacuum on a beam splitter of reflectivity `R`.
///
/// The reflected port (amplitude `√R`) is the signal and the transmitted port
/// (amplitude `√(1−R)`) the idler. With vacuum in the second input the
/// `−√(1−R)` entry of the unitary never contributes, so the output is
/// `|N⟩ → Σ_k √(C(N,k) R^{N−k} (1−R)^k) |N−k⟩|k⟩`.
pub fn beamsplitter_join(
    signal_in: &StateVector,
    reflectivity: f64,
    idler_cutoff: usize,
) -> Result<TwoModeState> {
    beamsplitter_join_with_budget(signal_in, reflectivity, idler_cutoff, DEFAULT_JOINT_BUDGET)
}

pub fn beamsplitter_join_with_budget(
    signal_in: &StateVector,
    reflectivity: f64,
    idler_cutoff: usize,
    budget: usize,
) -> Result<TwoModeState> {
    if !(reflectivity > 0.0 && reflectivity <= 1.0) {
        return Err(Error::domain(format!(
            "reflectivity must lie in (0, 1], got {reflectivity}"
        )));
    }
    let signal = signal_in.config();
    let idler_dim = idler_cutoff + 1;
    if signal.dim() * idler_dim > budget {
        return Err(Error::TruncationBudget {
            signal: signal.dim(),
            idler: idler_dim,
            budget,
        });
    }
    let transmission = 1.0 - reflectivity;
    let mut amplitudes = DMatrix::zeros(signal.dim(), idler_dim);
    let mut discarded = 0.0;
    for (total, &c) in signal_in.amplitudes().iter().enumerate() {
        if c.norm_sqr() == 0.0 {
            continue;
        }
        for k in 0..=total {
            let w = binomial_pmf(total, k, transmission);
            if k < idler_dim {
                amplitudes[(total - k, k)] += c * w.sqrt();
            } else {
                discarded += c.norm_sqr() * w;
            }
        }
    }
    Ok(TwoModeState {
        amplitudes,
        signal,
        discarded,
    })
}

/// Diagonal POVM element on the idler mode.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalPovm {
    pub weights: Vec<f64>,
}

/// Photon-counting POVM element for `n` clicks behind a loss of `1 − η`:
/// `Π_n = Σ_{m≥n} C(m,n) η^n (1−η)^{m−n} |m⟩⟨m|`.
///
/// On the truncated idler space the elements for `n = 0..=idler_cutoff` sum to
/// the identity exactly, since every retained `m` has all of its binomial
/// outcomes inside the space.
pub fn lossy_number_povm(n: usize, eta_i: f64, idler_cutoff: usize) -> Result<DiagonalPovm> {
    check_unit("idler efficiency", eta_i)?;
    if n > idler_cutoff {
        return Err(Error::domain(format!(
            "click number {n} exceeds idler cutoff {idler_cutoff}"
        )));
    }
    let weights = (0..=idler_cutoff).map(|m| binomial_pmf(m, n, eta_i)).collect();
    Ok(DiagonalPovm { weights })
}

/// Experimental configuration of the subtraction setup.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentParams {
    pub squeeze: SqueezeSpec,
    pub opa_loss: f64,
    pub bs_reflectivity: f64,
    pub idler_efficiency: f64,
    pub signal_efficiency: f64,
    pub herald_n: usize,
    pub rep_rate_hz: f64,
    pub duty_cycle: f64,
    pub cutoff: usize,
    pub idler_cutoff: usize,
}

impl ExperimentParams {
    /// 6.5 dB input squeezing, OPA loss 0.05, R = 0.81, idler efficiency 0.4,
    /// signal efficiency 0.85, 5 MHz pulses at duty cycle 0.5.
    pub fn paper_default() -> Self {
        Self {
            squeeze: SqueezeSpec::from_db(6.5),
            opa_loss: 0.05,
            bs_reflectivity: 0.81,
            idler_efficiency: 0.40,
            signal_efficiency: 0.85,
            herald_n: 4,
            rep_rate_hz: 5e6,
            duty_cycle: 0.5,
            cutoff: crate::fock::DEFAULT_CUTOFF,
            idler_cutoff: DEFAULT_IDLER_CUTOFF,
        }
    }

    /// Same squeezing and tap, with every loss removed.
    pub fn lossless() -> Self {
        Self {
            opa_loss: 0.0,
            idler_efficiency: 1.0,
            signal_efficiency: 1.0,
            ..Self::paper_default()
        }
    }

    pub fn with_herald(&self, herald_n: usize) -> Self {
        Self {
            herald_n,
            ..self.clone()
        }
    }

    pub fn hilbert(&self) -> Result<HilbertConfig> {
        HilbertConfig::new(self.cutoff)
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.squeeze.r();
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::domain(format!("squeezing must be >= 0, got r = {r}")));
        }
        check_unit("opa_loss", self.opa_loss)?;
        check_unit("idler_efficiency", self.idler_efficiency)?;
        check_unit("signal_efficiency", self.signal_efficiency)?;
        if !(self.bs_reflectivity > 0.0 && self.bs_reflectivity <= 1.0) {
            return Err(Error::domain("bs_reflectivity must lie in (0, 1]"));
        }
        if !(self.duty_cycle > 0.0 && self.duty_cycle <= 1.0) {
            return Err(Error::domain("duty_cycle must lie in (0, 1]"));
        }
        if !(self.rep_rate_hz > 0.0 && self.rep_rate_hz.is_finite()) {
            return Err(Error::domain("rep_rate_hz must be positive"));
        }
        if self.cutoff < 1 {
            return Err(Error::domain("cutoff must be at least 1"));
        }
        if self.herald_n > self.idler_cutoff {
            return Err(Error::domain(format!(
                "herald_n {} exceeds idler_cutoff {}",
                self.herald_n, self.idler_cutoff
            )));
        }
        Ok(())
    }

    /// Flat `key = value` text with the canonical key names.
    pub fn to_kv_string(&self) -> String {
        let file = ExperimentFile::from(self);
        let mut out = String::new();
        for (key, value) in file.entries() {
            out.push_str(&format!("{key} = {value}\n"));
        }
        out
    }

    /// Parses the flat `key = value` form written by [`to_kv_string`](Self::to_kv_string).
    ///
    /// Blank lines and `#` comments are ignored; unknown or missing keys are errors.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut file = ExperimentFile::default();
        let mut seen = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim();
            file.set(key, value.trim())
                .map_err(|message| Error::Parse { line: line_no, message })?;
            seen.push(key.to_string());
        }
        for key in ExperimentFile::KEYS {
            if !seen.iter().any(|k| k == key) {
                return Err(Error::Schema(format!("missing key `{key}`")));
            }
        }
        let params = ExperimentParams::from(file);
        params.validate()?;
        Ok(params)
    }
}

/// Flat serialized form of [`ExperimentParams`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub squeeze_db: f64,
    pub opa_loss: f64,
    pub bs_reflectivity: f64,
    pub idler_efficiency: f64,
    pub signal_efficiency: f64,
    pub herald_n: usize,
    pub rep_rate_hz: f64,
    pub duty_cycle: f64,
    pub cutoff: usize,
    pub idler_cutoff: usize,
}

impl ExperimentFile {
    pub const KEYS: [&'static str; 10] = [
        "squeeze_db",
        "opa_loss",
        "bs_reflectivity",
        "idler_efficiency",
        "signal_efficiency",
        "herald_n",
        "rep_rate_hz",
        "duty_cycle",
        "cutoff",
        "idler_cutoff",
    ];

    fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("squeeze_db", fmt_f64(self.squeeze_db)),
            ("opa_loss", fmt_f64(self.opa_loss)),
            ("bs_reflectivity", fmt_f64(self.bs_reflectivity)),
            ("idler_efficiency", fmt_f64(self.idler_efficiency)),
            ("signal_efficiency", fmt_f64(self.signal_efficiency)),
            ("herald_n", self.herald_n.to_string()),
            ("rep_rate_hz", fmt_f64(self.rep_rate_hz)),
            ("duty_cycle", fmt_f64(self.duty_cycle)),
            ("cutoff", self.cutoff.to_string()),
            ("idler_cutoff", self.idler_cutoff.to_string()),
        ]
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let float = |v: &str| v.parse::<f64>().map_err(|e| format!("`{key}`: {e}"));
        let int = |v: &str| v.parse::<usize>().map_err(|e| format!("`{key}`: {e}"));
        match key {
            "squeeze_db" => self.squeeze_db = float(value)?,
            "opa_loss" => self.opa_loss = float(value)?,
            "bs_reflectivity" => self.bs_reflectivity = float(value)?,
            "idler_efficiency" => self.idler_efficiency = float(value)?,
            "signal_efficiency" => self.signal_efficiency = float(value)?,
            "herald_n" => self.herald_n = int(value)?,
            "rep_rate_hz" => self.rep_rate_hz = float(value)?,
            "duty_cycle" => self.duty_cycle = float(value)?,
            "cutoff" => self.cutoff = int(value)?,
            "idler_cutoff" => self.idler_cutoff = int(value)?,
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }
}

// Shortest representation that parses back to the same bits.
fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

impl From<&ExperimentParams> for ExperimentFile {
    fn from(p: &ExperimentParams) -> Self {
        Self {
            squeeze_db: p.squeeze.level_db(),
            opa_loss: p.opa_loss,
            bs_reflectivity: p.bs_reflectivity,
            idler_efficiency: p.idler_efficiency,
            signal_efficiency: p.signal_efficiency,
            herald_n: p.herald_n,
            rep_rate_hz: p.rep_rate_hz,
            duty_cycle: p.duty_cycle,
            cutoff: p.cutoff,
            idler_cutoff: p.idler_cutoff,
        }
    }
}

impl From<ExperimentFile> for ExperimentParams {
    fn from(f: ExperimentFile) -> Self {
        Self {
            squeeze: SqueezeSpec::from_db(f.squeeze_db),
            opa_loss: f.opa_loss,
            bs_reflectivity: f.bs_reflectivity,
            idler_efficiency: f.idler_efficiency,
            signal_efficiency: f.signal_efficiency,
            herald_n: f.herald_n,
            rep_rate_hz: f.rep_rate_hz,
            duty_cycle: f.duty_cycle,
            cutoff: f.cutoff,
            idler_cutoff: f.idler_cutoff,
        }
    }
}

/// Outcome of one heralding branch.
#[derive(Clone, Debug)]
pub struct HeraldResult {
    /// Normalized signal state, after the signal-arm loss.
    pub state: DensityMatrix,
    /// Probability per pulse of observing `herald_n` idler clicks.
    pub herald_probability: f64,
    /// `herald_probability × rep_rate × duty_cycle`, in counts per second.
    pub estimated_rate: f64,
}

/// Most probability the idler truncation may drop in a heralding run.
const HERALD_TAIL_TOLERANCE: f64 = crate::fock::TAIL_TOLERANCE;

/// Runs the heralded subtraction pipeline for `params.herald_n` clicks.
pub fn herald_subtract(params: &ExperimentParams, config: HilbertConfig) -> Result<HeraldResult> {
    let prepared = PreparedSource::new(params, config)?;
    prepared.herald(params.herald_n)
}

/// Heralding probability and rate for `n = 0..=n_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountRateRow {
    pub n: usize,
    pub probability: f64,
    pub rate_cps: f64,
}

pub fn count_rate_table(params: &ExperimentParams, n_max: usize) -> Result<Vec<CountRateRow>> {
    if n_max > params.idler_cutoff {
        return Err(Error::domain(format!(
            "n_max {n_max} exceeds idler cutoff {}",
            params.idler_cutoff
        )));
    }
    let prepared = PreparedSource::new(params, params.hilbert()?)?;
    (0..=n_max)
        .map(|n| {
            let probability = prepared.herald_probability(n)?;
            Ok(CountRateRow {
                n,
                probability,
                rate_cps: probability * params.rep_rate_hz * params.duty_cycle,
            })
        })
        .collect()
}

/// The two-mode state after the tap, decomposed into pure branches so every
/// herald outcome can reuse it.
struct PreparedSource {
    params: ExperimentParams,
    config: HilbertConfig,
    branches: Vec<(f64, TwoModeState)>,
}

impl PreparedSource {
    fn new(params: &ExperimentParams, config: HilbertConfig) -> Result<Self> {
        params.validate()?;
        let sqz = squeezed_vacuum(params.squeeze, config)?;
        let mixed: Vec<(f64, StateVector)> = if params.opa_loss == 0.0 {
            vec![(1.0, sqz)]
        } else {
            loss_channel(&sqz.to_density(), 1.0 - params.opa_loss)?.eigenstates()
        };
        let mut branches = Vec::with_capacity(mixed.len());
        let mut dropped = 0.0;
        for (weight, state) in mixed {
            let joint = beamsplitter_join(&state, params.bs_reflectivity, params.idler_cutoff)?;
            dropped += weight * joint.discarded_weight();
            branches.push((weight, joint));
        }
        if dropped > HERALD_TAIL_TOLERANCE {
            return Err(Error::Truncation {
                tail: dropped,
                limit: HERALD_TAIL_TOLERANCE,
                cutoff: params.idler_cutoff,
            });
        }
        Ok(Self {
            params: params.clone(),
            config,
            branches,
        })
    }

    fn heralded_operator(&self, n: usize) -> Result<DMatrix<Complex64>> {
        let povm = lossy_number_povm(n, self.params.idler_efficiency, self.params.idler_cutoff)?;
        let d = self.config.dim();
        let mut acc = DMatrix::zeros(d, d);
        for (weight, joint) in &self.branches {
            acc += joint.heralded_operator(&povm)? * Complex64::new(*weight, 0.0);
        }
        Ok(acc)
    }

    fn herald_probability(&self, n: usize) -> Result<f64> {
        Ok(self.heralded_operator(n)?.trace().re)
    }

    fn herald(&self, n: usize) -> Result<HeraldResult> {
        let op = self.heralded_operator(n)?;
        let probability = op.trace().re;
        if !(probability >= 1e-300) {
            return Err(Error::ZeroProbability(probability));
        }
        let heralded = DensityMatrix::from_operator(op, self.config)?;
        let state = loss_channel(&heralded, self.params.signal_efficiency)?;
        Ok(HeraldResult {
            state,
            herald_probability: probability,
            estimated_rate: probability * self.params.rep_rate_hz * self.params.duty_cycle,
        })
    }
}

/// The squeezed input state itself as measured with `R = 1`: OPA loss and the
/// signal-arm loss only.
pub fn input_state(params: &ExperimentParams, config: HilbertConfig) -> Result<DensityMatrix> {
    params.validate()?;
    let sqz = squeezed_vacuum(params.squeeze, config)?.to_density();
    let after_opa = loss_channel(&sqz, 1.0 - params.opa_loss)?;
    loss_channel(&after_opa, params.signal_efficiency)
}
