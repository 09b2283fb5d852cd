//! Truncated Fock-space states and the scalar metrics built on them.
//!
//! Conventions (with `hbar = 1`):
//!
//! * `x = (a + a†)/√2`, `p = (a − a†)/(i√2)`, so `[x, p] = i` and the vacuum
//!   variance of every quadrature is 1/2.
//! * The rotated quadrature is `x_θ = x cos θ + p sin θ`, whose eigenvector
//!   has Fock components `⟨n|x_θ = q⟩ = e^{inθ} ψ_n(q)`.
//! * `S(r)` squeezes `x` and anti-squeezes `p`; its Fock amplitudes satisfy
//!   `c_2 / c_0 = −tanh(r)/√2`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_10;

use crate::error::{Error, Result};
use crate::special::hermite_functions;

/// Default photon-number cutoff.
pub const DEFAULT_CUTOFF: usize = 30;

/// Largest probability a state constructor may discard above the cutoff.
pub const TAIL_TOLERANCE: f64 = 1e-6;

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-9;

/// Dimension of the truncated Fock space.
///
/// `hbar` is fixed to 1; there is deliberately no way to change it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct HilbertConfig {
    cutoff: usize,
}

impl HilbertConfig {
    pub const HBAR: f64 = 1.0;

    pub fn new(cutoff: usize) -> Result<Self> {
        if cutoff < 1 {
            return Err(Error::domain("cutoff must be at least 1"));
        }
        Ok(Self { cutoff })
    }

    /// Highest retained Fock index.
    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.cutoff + 1
    }
}

impl Default for HilbertConfig {
    fn default() -> Self {
        Self {
            cutoff: DEFAULT_CUTOFF,
        }
    }
}

impl TryFrom<usize> for HilbertConfig {
    type Error = Error;
    fn try_from(value: usize) -> Result<Self> {
        Self::new(value)
    }
}

impl From<HilbertConfig> for usize {
    fn from(value: HilbertConfig) -> Self {
        value.cutoff
    }
}

/// Squeezing strength, given either in decibels or as the parameter `r`.
///
/// `level_db = 10 log10(e^{2r})`, i.e. `r = level_db · ln 10 / 20`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SqueezeSpec {
    Decibels(f64),
    Parameter(f64),
}

impl SqueezeSpec {
    pub fn from_db(level_db: f64) -> Self {
        SqueezeSpec::Decibels(level_db)
    }

    pub fn from_r(r: f64) -> Self {
        SqueezeSpec::Parameter(r)
    }

    pub fn r(&self) -> f64 {
        match *self {
            SqueezeSpec::Decibels(db) => db_to_r(db),
            SqueezeSpec::Parameter(r) => r,
        }
    }

    pub fn level_db(&self) -> f64 {
        match *self {
            SqueezeSpec::Decibels(db) => db,
            SqueezeSpec::Parameter(r) => r_to_db(r),
        }
    }
}

pub fn db_to_r(level_db: f64) -> f64 {
    level_db * LN_10 / 20.0
}

pub fn r_to_db(r: f64) -> f64 {
    r * 20.0 / LN_10
}

/// Pure state in the truncated Fock basis, always normalized.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
    config: HilbertConfig,
}

impl StateVector {
    /// Builds a state from raw amplitudes, normalizing them.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>, config: HilbertConfig) -> Result<Self> {
        if amplitudes.len() != config.dim() {
            return Err(Error::DimensionMismatch {
                left: amplitudes.len(),
                right: config.dim(),
            });
        }
        let norm2: f64 = amplitudes.iter().map(|c| c.norm_sqr()).sum();
        if !(norm2 > 0.0) || !norm2.is_finite() {
            return Err(Error::ZeroState);
        }
        let scale = norm2.sqrt().recip();
        let amplitudes = amplitudes.into_iter().map(|c| c * scale).collect();
        Ok(Self { amplitudes, config })
    }

    pub fn fock(n: usize, config: HilbertConfig) -> Result<Self> {
        if n > config.cutoff() {
            return Err(Error::domain(format!(
                "Fock index {n} exceeds cutoff {}",
                config.cutoff()
            )));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); config.dim()];
        amplitudes[n] = Complex64::new(1.0, 0.0);
        Ok(Self { amplitudes, config })
    }

    pub fn vacuum(config: HilbertConfig) -> Self {
        Self::fock(0, config).expect("vacuum is always representable")
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn config(&self) -> HilbertConfig {
        self.config
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        check_same(self.config, other.config)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn photon_distribution(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix::from_pure(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

/// `S(r)|0⟩` truncated at the configured cutoff.
pub fn squeezed_vacuum(spec: SqueezeSpec, config: HilbertConfig) -> Result<StateVector> {
    squeezed_vacuum_with_tolerance(spec, config, TAIL_TOLERANCE)
}

/// As [`squeezed_vacuum`], with a caller-chosen bound on the discarded tail.
pub fn squeezed_vacuum_with_tolerance(
    spec: SqueezeSpec,
    config: HilbertConfig,
    max_tail: f64,
) -> Result<StateVector> {
    let r = spec.r();
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::domain(format!("squeezing parameter must be >= 0, got {r}")));
    }
    let t = r.tanh();
    let dim = config.dim();
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
    // Unnormalized amplitudes in units of sqrt(sech r); the retained weight
    // is tracked alongside so the exact tail is 1 - sech(r) * weight.
    let mut c = 1.0;
    let mut weight = 0.0;
    let mut k = 0usize;
    while 2 * k < dim {
        amplitudes[2 * k] = Complex64::new(c, 0.0);
        weight += c * c;
        let kf = k as f64;
        c *= -t * ((2.0 * kf + 1.0) / (2.0 * kf + 2.0)).sqrt();
        k += 1;
    }
    let tail = (1.0 - weight / r.cosh()).max(0.0);
    check_tail(tail, max_tail, config)?;
    StateVector::from_amplitudes(amplitudes, config)
}

/// Coherent state `|α⟩`, renormalized after truncation.
pub fn coherent_state(alpha: Complex64, config: HilbertConfig) -> Result<StateVector> {
    coherent_state_with_tolerance(alpha, config, TAIL_TOLERANCE)
}

pub fn coherent_state_with_tolerance(
    alpha: Complex64,
    config: HilbertConfig,
    max_tail: f64,
) -> Result<StateVector> {
    let (amplitudes, retained) = poisson_amplitudes(alpha, config.dim());
    check_tail((1.0 - retained).max(0.0), max_tail, config)?;
    StateVector::from_amplitudes(amplitudes, config)
}

/// Normalized `|α⟩ ± |−α⟩`.
pub fn cat_state(alpha: Complex64, parity: Parity, config: HilbertConfig) -> Result<StateVector> {
    if parity == Parity::Odd && alpha.norm() == 0.0 {
        return Err(Error::domain("odd cat state is undefined at alpha = 0"));
    }
    let (mut amplitudes, retained) = poisson_amplitudes(alpha, config.dim());
    check_tail((1.0 - retained).max(0.0), TAIL_TOLERANCE, config)?;
    let keep = match parity {
        Parity::Even => 0,
        Parity::Odd => 1,
    };
    for (n, c) in amplitudes.iter_mut().enumerate() {
        if n % 2 != keep {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    StateVector::from_amplitudes(amplitudes, config)
}

/// Equal-weight classical mixture of `|α⟩` and `|−α⟩`.
pub fn mixed_coherent(alpha: Complex64, config: HilbertConfig) -> Result<DensityMatrix> {
    let plus = coherent_state(alpha, config)?.to_density();
    let minus = coherent_state(-alpha, config)?.to_density();
    let elements = (plus.elements + minus.elements) * Complex64::new(0.5, 0.0);
    DensityMatrix::new(elements, config)
}

// e^{-|α|²/2} αⁿ/√n! for n < dim, plus the retained probability.
fn poisson_amplitudes(alpha: Complex64, dim: usize) -> (Vec<Complex64>, f64) {
    let mut amplitudes = Vec::with_capacity(dim);
    let mut c = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    let mut retained = 0.0;
    for n in 0..dim {
        amplitudes.push(c);
        retained += c.norm_sqr();
        c = c * alpha / ((n + 1) as f64).sqrt();
    }
    (amplitudes, retained)
}

fn check_tail(tail: f64, max_tail: f64, config: HilbertConfig) -> Result<()> {
    if tail > max_tail {
        return Err(Error::Truncation {
            tail,
            limit: max_tail,
            cutoff: config.cutoff(),
        });
    }
    Ok(())
}

/// Applies `a` and renormalizes.
///
/// Returns the new state together with `‖a|ψ⟩‖²`, which equals `⟨n⟩` of the input.
pub fn apply_annihilation(state: &StateVector) -> Result<(StateVector, f64)> {
    let amps = state.amplitudes();
    let mut out = vec![Complex64::new(0.0, 0.0); amps.len()];
    for n in 1..amps.len() {
        out[n - 1] = amps[n] * (n as f64).sqrt();
    }
    let norm2: f64 = out.iter().map(|c| c.norm_sqr()).sum();
    if norm2 == 0.0 {
        return Err(Error::ZeroState);
    }
    Ok((StateVector::from_amplitudes(out, state.config())?, norm2))
}

/// Fock components `⟨n|x_θ = q⟩ = e^{inθ} ψ_n(q)` of a quadrature eigenvector.
///
/// The wavefunction of a state in the rotated quadrature basis is the complex
/// conjugate of this, `⟨x_θ = q|n⟩ = e^{−inθ} ψ_n(q)`; at `θ = π/2` that
/// gives `⟨p|n⟩ = (−i)ⁿ ψ_n(p)`.
pub fn quadrature_wavefunction(config: HilbertConfig, n: usize, q: f64, theta: f64) -> Result<Complex64> {
    if n > config.cutoff() {
        return Err(Error::domain(format!(
            "Fock index {n} exceeds cutoff {}",
            config.cutoff()
        )));
    }
    let psi = hermite_functions(q, n)[n];
    Ok(Complex64::from_polar(1.0, n as f64 * theta) * psi)
}

/// All components `⟨n|x_θ = q⟩` for `n < dim`.
pub fn quadrature_ket(q: f64, theta: f64, dim: usize) -> Vec<Complex64> {
    let psi = hermite_functions(q, dim - 1);
    let step = Complex64::from_polar(1.0, theta);
    let mut phase = Complex64::new(1.0, 0.0);
    psi.into_iter()
        .map(|v| {
            let out = phase * v;
            phase *= step;
            out
        })
        .collect()
}

/// Hermitian, unit-trace, positive semidefinite matrix in the Fock basis.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    elements: DMatrix<Complex64>,
    config: HilbertConfig,
}

impl DensityMatrix {
    /// Validates and wraps a matrix.
    pub fn new(elements: DMatrix<Complex64>, config: HilbertConfig) -> Result<Self> {
        let rho = Self { elements, config };
        rho.validate()?;
        Ok(rho)
    }

    /// Hermitizes and trace-normalizes an operator that should be a state up
    /// to round-off, then validates it.
    pub fn from_operator(elements: DMatrix<Complex64>, config: HilbertConfig) -> Result<Self> {
        if elements.nrows() != config.dim() || elements.ncols() != config.dim() {
            return Err(Error::DimensionMismatch {
                left: elements.nrows(),
                right: config.dim(),
            });
        }
        let herm = (&elements + elements.adjoint()) * Complex64::new(0.5, 0.0);
        let trace = herm.trace().re;
        if !(trace > 0.0) || !trace.is_finite() {
            return Err(Error::InvalidState(format!("trace {trace} is not positive")));
        }
        Self::new(herm / Complex64::new(trace, 0.0), config)
    }

    pub(crate) fn from_trusted(elements: DMatrix<Complex64>, config: HilbertConfig) -> Self {
        Self { elements, config }
    }

    pub fn from_pure(state: &StateVector) -> Self {
        let v = nalgebra::DVector::from_column_slice(state.amplitudes());
        Self {
            elements: &v * v.adjoint(),
            config: state.config(),
        }
    }

    pub fn vacuum(config: HilbertConfig) -> Self {
        Self::from_pure(&StateVector::vacuum(config))
    }

    pub fn fock(n: usize, config: HilbertConfig) -> Result<Self> {
        Ok(Self::from_pure(&StateVector::fock(n, config)?))
    }

    pub fn maximally_mixed(config: HilbertConfig) -> Self {
        let d = config.dim();
        Self {
            elements: DMatrix::identity(d, d) / Complex64::new(d as f64, 0.0),
            config,
        }
    }

    /// Diagonal state with the given photon-number probabilities.
    pub fn diagonal_state(probs: &[f64], config: HilbertConfig) -> Result<Self> {
        if probs.len() != config.dim() {
            return Err(Error::DimensionMismatch {
                left: probs.len(),
                right: config.dim(),
            });
        }
        let mut m = DMatrix::zeros(config.dim(), config.dim());
        for (n, &p) in probs.iter().enumerate() {
            m[(n, n)] = Complex64::new(p, 0.0);
        }
        Self::new(m, config)
    }

    pub fn elements(&self) -> &DMatrix<Complex64> {
        &self.elements
    }

    pub fn into_elements(self) -> DMatrix<Complex64> {
        self.elements
    }

    pub fn config(&self) -> HilbertConfig {
        self.config
    }

    pub fn dim(&self) -> usize {
        self.config.dim()
    }

    /// `ρ_{n,m} = ⟨n|ρ|m⟩`.
    pub fn get(&self, n: usize, m: usize) -> Complex64 {
        self.elements[(n, m)]
    }

    pub fn trace(&self) -> f64 {
        self.elements.trace().re
    }

    pub fn purity(&self) -> f64 {
        // Tr ρ² = Σ |ρ_nm|² for Hermitian ρ.
        self.elements.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn photon_distribution(&self) -> Vec<f64> {
        (0..self.dim()).map(|n| self.elements[(n, n)].re).collect()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut values: Vec<f64> = self
            .elements
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        values.sort_by(f64::total_cmp);
        values
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Spectral decomposition `ρ = Σ λ_i |ψ_i⟩⟨ψ_i|`, keeping only `λ_i > 0`.
    pub fn eigenstates(&self) -> Vec<(f64, StateVector)> {
        let eig = self.elements.clone().symmetric_eigen();
        let mut out = Vec::new();
        for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda <= 0.0 {
                continue;
            }
            let col: Vec<Complex64> = eig.eigenvectors.column(i).iter().copied().collect();
            if let Ok(state) = StateVector::from_amplitudes(col, self.config) {
                out.push((lambda, state));
            }
        }
        out
    }

    /// Checks the Hermitian, trace and positivity invariants.
    pub fn validate(&self) -> Result<()> {
        let d = self.config.dim();
        if self.elements.nrows() != d || self.elements.ncols() != d {
            return Err(Error::DimensionMismatch {
                left: self.elements.nrows(),
                right: d,
            });
        }
        if self.elements.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidState("non-finite element".into()));
        }
        for n in 0..d {
            for m in n..d {
                let diff = (self.elements[(n, m)] - self.elements[(m, n)].conj()).norm();
                if diff > HERMITIAN_TOL {
                    return Err(Error::InvalidState(format!(
                        "not Hermitian at ({n},{m}): deviation {diff:e}"
                    )));
                }
            }
        }
        let trace = self.trace();
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {trace} differs from 1")));
        }
        let min = self.min_eigenvalue();
        if min < -PSD_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    /// `e^{−iθn̂} ρ e^{iθn̂}`.
    pub fn phase_rotated(&self, theta: f64) -> DensityMatrix {
        let d = self.dim();
        let elements = DMatrix::from_fn(d, d, |n, m| {
            self.elements[(n, m)] * Complex64::from_polar(1.0, -theta * (n as f64 - m as f64))
        });
        Self::from_trusted(elements, self.config)
    }

    /// Projects onto a smaller or larger cutoff.
    ///
    /// Shrinking discards the corresponding rows and columns and renormalizes;
    /// growing pads with zeros.
    pub fn with_cutoff(&self, config: HilbertConfig) -> Result<DensityMatrix> {
        let d = config.dim();
        let keep = d.min(self.dim());
        let mut m = DMatrix::zeros(d, d);
        m.view_mut((0, 0), (keep, keep))
            .copy_from(&self.elements.view((0, 0), (keep, keep)));
        DensityMatrix::from_operator(m, config)
    }

    pub fn to_json(&self) -> DensityMatrixJson {
        let d = self.dim();
        DensityMatrixJson {
            cutoff: self.config.cutoff(),
            re: (0..d).map(|n| (0..d).map(|m| self.elements[(n, m)].re).collect()).collect(),
            im: (0..d).map(|n| (0..d).map(|m| self.elements[(n, m)].im).collect()).collect(),
        }
    }

    pub fn from_json(json: &DensityMatrixJson) -> Result<Self> {
        let config = HilbertConfig::new(json.cutoff)?;
        let d = config.dim();
        let rows_ok = |rows: &Vec<Vec<f64>>| rows.len() == d && rows.iter().all(|r| r.len() == d);
        if !rows_ok(&json.re) || !rows_ok(&json.im) {
            return Err(Error::Schema(format!(
                "density matrix must be {d}x{d} for cutoff {}",
                json.cutoff
            )));
        }
        let elements = DMatrix::from_fn(d, d, |n, m| Complex64::new(json.re[n][m], json.im[n][m]));
        Self::new(elements, config)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("plain numeric data serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let json: DensityMatrixJson = serde_json::from_str(text)?;
        Self::from_json(&json)
    }
}

/// Interchange form: `{ "cutoff": N, "re": [[..]], "im": [[..]] }`, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrixJson {
    pub cutoff: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

fn check_same(a: HilbertConfig, b: HilbertConfig) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(())
}

/// `Σ n ρ_{n,n}`.
pub fn mean_photon(rho: &DensityMatrix) -> f64 {
    rho.photon_distribution()
        .iter()
        .enumerate()
        .map(|(n, p)| n as f64 * p)
        .sum()
}

/// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²`.
pub fn fidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    check_same(a.config, b.config)?;
    let sqrt_a = psd_sqrt(&a.elements);
    let inner = &sqrt_a * &b.elements * &sqrt_a;
    let inner = (&inner + inner.adjoint()) * Complex64::new(0.5, 0.0);
    let root_trace: f64 = inner
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|&l| l.max(0.0).sqrt())
        .sum();
    Ok((root_trace * root_trace).clamp(0.0, 1.0))
}

/// Trace distance `½ Tr|ρ − σ|`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    check_same(a.config, b.config)?;
    let diff = &a.elements - &b.elements;
    Ok(0.5 * diff.symmetric_eigen().eigenvalues.iter().map(|l| l.abs()).sum::<f64>())
}

fn psd_sqrt(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let eig = m.clone().symmetric_eigen();
    let d = m.nrows();
    let mut out = DMatrix::zeros(d, d);
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l <= 0.0 {
            continue;
        }
        let v = eig.eigenvectors.column(i);
        out += v * v.adjoint() * Complex64::new(l.sqrt(), 0.0);
    }
    out
}
