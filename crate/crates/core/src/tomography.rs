//! Maximum-likelihood reconstruction from homodyne data (iterative RρR) and
//! bootstrap error bars. No detector-efficiency correction is applied.
//!
//! For a record at angle `θ` the projector is `Π = |q_θ⟩⟨q_θ|` with
//! `⟨n|q_θ⟩ = e^{inθ} ψ_n(q)`. Writing `U_θ = diag(e^{−inθ})`,
//! `Tr(Π ρ) = ψᵀ Re(U_θ ρ U_θ†) ψ` with real `ψ`, and the records of one phase
//! contribute `U_θ† (Σ_j w_j ψ_j ψ_jᵀ / p_j) U_θ` to `R(ρ)`. Each iteration is
//! therefore a handful of real matrix products per phase.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{mean_photon, quadrature_ket, DensityMatrix, HilbertConfig};
use crate::phase_space::{cat_coherence, origin_parity, QuadAxis};
use crate::sampler::{derive_seed, HomodyneDataset};
use crate::special::hermite_functions_into;

/// Round-off allowance for the per-iteration likelihood check, relative to |LL|.
pub const MONOTONICITY_TOLERANCE: f64 = 1e-9;
/// Eigenvalue floor below which the output is clipped to the PSD cone.
pub const PSD_TOLERANCE: f64 = 1e-9;
/// Fraction of bootstrap replicas that must succeed.
pub const MIN_BOOTSTRAP_SUCCESS: f64 = 0.9;

/// How records enter the likelihood.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "width")]
pub enum Binning {
    /// One projector per record.
    Pointwise,
    /// Records at one phase are histogrammed into bins of this width and
    /// represented by the projector at the bin centre.
    Width(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MleConfig {
    pub cutoff: usize,
    pub max_iterations: usize,
    /// Stop when the relative log-likelihood gain of one iteration drops below this.
    pub tolerance: f64,
    pub binning: Binning,
}

impl Default for MleConfig {
    fn default() -> Self {
        Self {
            cutoff: 15,
            max_iterations: 2000,
            tolerance: 1e-10,
            binning: Binning::Pointwise,
        }
    }
}

impl MleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cutoff < 1 {
            return Err(Error::domain("MLE cutoff must be at least 1"));
        }
        if self.max_iterations == 0 {
            return Err(Error::domain("max_iterations must be positive"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::domain("tolerance must be positive"));
        }
        if let Binning::Width(w) = self.binning {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::domain(format!("bin width must be positive, got {w}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MleDiagnostics {
    pub iterations: usize,
    pub final_log_likelihood: f64,
    pub converged: bool,
    pub warnings: Vec<String>,
    /// Log-likelihood after every iteration, starting with the initial state.
    #[serde(skip)]
    pub likelihood_trace: Vec<f64>,
}

/// Rank-one projector `|q_θ⟩⟨q_θ|` on the truncated space; θ in radians.
pub fn povm_projector(theta: f64, q: f64, config: HilbertConfig) -> DMatrix<Complex64> {
    let ket = DVector::from_vec(quadrature_ket(q, theta, config.dim()));
    &ket * ket.adjoint()
}

/// Records of one phase, as rows of real Hermite functions with weights.
#[derive(Clone, Debug)]
struct PhaseBlock {
    /// `psi[(j, n)] = ψ_n(q_j)`.
    psi: DMatrix<f64>,
    weights: DVector<f64>,
    /// Dataset index of each row (pointwise) or of the first record in the bin.
    origin: Vec<usize>,
    /// For every dataset record of this phase, the row it falls into.
    row_of_record: Vec<usize>,
    /// Dataset indices of this phase's records.
    records: Vec<usize>,
    cos: DMatrix<f64>,
    sin: DMatrix<f64>,
}

impl PhaseBlock {
    fn rotated_real(&self, rho: &DMatrix<Complex64>) -> DMatrix<f64> {
        let d = rho.nrows();
        DMatrix::from_fn(d, d, |n, m| {
            let v = rho[(n, m)];
            v.re * self.cos[(n, m)] + v.im * self.sin[(n, m)]
        })
    }

    fn probabilities(&self, rho: &DMatrix<Complex64>) -> DVector<f64> {
        let a = self.rotated_real(rho);
        let pa = &self.psi * a;
        DVector::from_fn(self.psi.nrows(), |j, _| pa.row(j).dot(&self.psi.row(j)))
    }
}

/// Likelihood functional for a fixed dataset and cutoff.
#[derive(Clone, Debug)]
pub struct MleProblem {
    config: HilbertConfig,
    blocks: Vec<PhaseBlock>,
}

impl MleProblem {
    pub fn new(dataset: &HomodyneDataset, cutoff: usize, binning: Binning) -> Result<Self> {
        let config = HilbertConfig::new(cutoff)?;
        let d = config.dim();
        let data = dataset.normalized();
        let mut blocks = Vec::new();
        for theta_deg in data.phases() {
            let records: Vec<usize> = data
                .records
                .iter()
                .enumerate()
                .filter(|(_, r)| r.theta_deg == theta_deg)
                .map(|(i, _)| i)
                .collect();
            let (points, weights, origin, row_of_record) = match binning {
                Binning::Pointwise => (
                    records.iter().map(|&i| data.records[i].q).collect::<Vec<_>>(),
                    vec![1.0; records.len()],
                    records.clone(),
                    (0..records.len()).collect::<Vec<_>>(),
                ),
                Binning::Width(w) => {
                    let mut keys: Vec<i64> = records
                        .iter()
                        .map(|&i| (data.records[i].q / w).floor() as i64)
                        .collect();
                    let mut unique = keys.clone();
                    unique.sort_unstable();
                    unique.dedup();
                    let mut weights = vec![0.0; unique.len()];
                    let mut origin = vec![usize::MAX; unique.len()];
                    for (&i, key) in records.iter().zip(keys.iter_mut()) {
                        let row = unique.binary_search(key).expect("key present");
                        weights[row] += 1.0;
                        origin[row] = origin[row].min(i);
                        *key = row as i64;
                    }
                    let points = unique.iter().map(|&k| (k as f64 + 0.5) * w).collect();
                    let rows = keys.iter().map(|&k| k as usize).collect();
                    (points, weights, origin, rows)
                }
            };
            let mut psi = DMatrix::zeros(points.len(), d);
            let mut buf = vec![0.0; d];
            for (j, &q) in points.iter().enumerate() {
                hermite_functions_into(q, &mut buf);
                for n in 0..d {
                    psi[(j, n)] = buf[n];
                }
            }
            let theta = theta_deg.to_radians();
            let cos = DMatrix::from_fn(d, d, |n, m| ((n as f64 - m as f64) * theta).cos());
            let sin = DMatrix::from_fn(d, d, |n, m| ((n as f64 - m as f64) * theta).sin());
            blocks.push(PhaseBlock {
                psi,
                weights: DVector::from_vec(weights),
                origin,
                row_of_record,
                records,
                cos,
                sin,
            });
        }
        Ok(Self { config, blocks })
    }

    pub fn config(&self) -> HilbertConfig {
        self.config
    }

    pub fn phase_count(&self) -> usize {
        self.blocks.len()
    }

    /// Replaces the weights with the multiplicities of a resample, given per
    /// phase as dataset record indices.
    fn reweighted(&self, picks: &[Vec<usize>]) -> Self {
        let mut out = self.clone();
        for (block, chosen) in out.blocks.iter_mut().zip(picks) {
            block.weights.fill(0.0);
            for &k in chosen {
                block.weights[block.row_of_record[k]] += 1.0;
            }
        }
        out
    }

    fn evaluate(&self, rho: &DMatrix<Complex64>) -> Result<(f64, Vec<DVector<f64>>)> {
        let mut total = 0.0;
        let mut probs = Vec::with_capacity(self.blocks.len());
        let mut singular = Vec::new();
        for block in &self.blocks {
            let p = block.probabilities(rho);
            for (j, (&pj, &w)) in p.iter().zip(block.weights.iter()).enumerate() {
                if w == 0.0 {
                    continue;
                }
                if pj > 0.0 && pj.is_finite() {
                    total += w * pj.ln();
                } else {
                    singular.push(block.origin[j]);
                }
            }
            probs.push(p);
        }
        if !singular.is_empty() {
            singular.sort_unstable();
            return Err(Error::SingularLikelihood { records: singular });
        }
        Ok((total, probs))
    }

    pub fn log_likelihood(&self, rho: &DensityMatrix) -> Result<f64> {
        if rho.dim() != self.config.dim() {
            return Err(Error::DimensionMismatch {
                left: rho.dim(),
                right: self.config.dim(),
            });
        }
        Ok(self.evaluate(rho.elements())?.0)
    }

    /// `R(ρ) = Σ_j w_j Π_j / Tr(Π_j ρ)`, normalized by the total weight.
    fn r_operator(&self, probs: &[DVector<f64>]) -> DMatrix<Complex64> {
        let d = self.config.dim();
        let mut r = DMatrix::<Complex64>::zeros(d, d);
        let mut total_weight = 0.0;
        for (block, p) in self.blocks.iter().zip(probs) {
            let scale = block.weights.component_div(p);
            total_weight += block.weights.sum();
            let mut scaled = block.psi.clone();
            for (j, mut row) in scaled.row_iter_mut().enumerate() {
                row *= scale[j];
            }
            let s = block.psi.transpose() * scaled;
            for n in 0..d {
                for m in 0..d {
                    r[(n, m)] += Complex64::new(s[(n, m)] * block.cos[(n, m)], s[(n, m)] * block.sin[(n, m)]);
                }
            }
        }
        r / Complex64::new(total_weight, 0.0)
    }

    /// Runs the RρR iteration from the maximally mixed state.
    pub fn reconstruct(&self, cfg: &MleConfig) -> Result<(DensityMatrix, MleDiagnostics)> {
        cfg.validate()?;
        let d = self.config.dim();
        let mut warnings = Vec::new();
        if self.blocks.len() < 2 {
            warnings.push(
                "only one LO phase: off-diagonal elements are not identifiable and stay near the phase-insensitive estimate"
                    .to_string(),
            );
        }
        let mut rho = DMatrix::<Complex64>::identity(d, d) / Complex64::new(d as f64, 0.0);
        let (mut ll, mut probs) = self.evaluate(&rho)?;
        let mut trace = vec![ll];
        let mut converged = false;
        let mut iterations = 0;
        let mut dilutions = 0usize;
        while iterations < cfg.max_iterations {
            iterations += 1;
            let r = self.r_operator(&probs);
            let mut step = 1.0;
            let (next, next_ll, next_probs) = loop {
                // The plain RρR step, or the diluted (I + εR)ρ(I + εR) step.
                let op = if step == 1.0 {
                    r.clone()
                } else {
                    DMatrix::<Complex64>::identity(d, d) + &r * Complex64::new(step, 0.0)
                };
                let candidate = normalize(&op * &rho * &op);
                let (cand_ll, cand_probs) = self.evaluate(&candidate)?;
                if cand_ll >= ll - MONOTONICITY_TOLERANCE * ll.abs() || step < 1e-12 {
                    break (candidate, cand_ll, cand_probs);
                }
                dilutions += 1;
                step *= 0.5;
            };
            let gain = (next_ll - ll) / ll.abs().max(f64::MIN_POSITIVE);
            rho = next;
            ll = next_ll;
            probs = next_probs;
            trace.push(ll);
            if gain.abs() < cfg.tolerance {
                converged = true;
                break;
            }
        }
        if dilutions > 0 {
            warnings.push(format!("{dilutions} diluted steps were needed to keep the likelihood monotone"));
        }
        if !converged {
            warnings.push(format!(
                "did not converge in {} iterations; returning the last iterate",
                cfg.max_iterations
            ));
        }
        let state = finalize(rho, self.config)?;
        Ok((
            state,
            MleDiagnostics {
                iterations,
                final_log_likelihood: ll,
                converged,
                warnings,
                likelihood_trace: trace,
            },
        ))
    }
}

fn normalize(m: DMatrix<Complex64>) -> DMatrix<Complex64> {
    let h = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let tr = h.trace().re;
    h / Complex64::new(tr, 0.0)
}

// Clips negative eigenvalues only when they exceed round-off.
fn finalize(rho: DMatrix<Complex64>, config: HilbertConfig) -> Result<DensityMatrix> {
    let eig = rho.clone().symmetric_eigen();
    if eig.eigenvalues.min() >= -PSD_TOLERANCE {
        return DensityMatrix::from_operator(rho, config);
    }
    let clipped = eig.eigenvalues.map(|l| Complex64::new(l.max(0.0), 0.0));
    let v = &eig.eigenvectors;
    let m = v * DMatrix::from_diagonal(&clipped) * v.adjoint();
    DensityMatrix::from_operator(m, config)
}

/// `Σ_j ln Tr(Π_j ρ)` over every record, at the cutoff of `rho`.
pub fn log_likelihood(rho: &DensityMatrix, dataset: &HomodyneDataset) -> Result<f64> {
    MleProblem::new(dataset, rho.config().cutoff(), Binning::Pointwise)?.log_likelihood(rho)
}

pub fn mle_reconstruct(dataset: &HomodyneDataset, cfg: &MleConfig) -> Result<(DensityMatrix, MleDiagnostics)> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::domain("dataset has no records"));
    }
    MleProblem::new(dataset, cfg.cutoff, cfg.binning)?.reconstruct(cfg)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std: f64,
}

impl Estimate {
    fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub replicas: usize,
    pub succeeded: usize,
    pub seed: u64,
    pub diagonal: Vec<Estimate>,
    pub mean_photon: Estimate,
    pub wigner_origin: Estimate,
    /// `Re ρ(p, −p)` at the positive-momentum diagonal peak.
    pub peak_off_diagonal: Estimate,
    pub failures: Vec<String>,
}

/// The quantities tracked by the bootstrap, for one state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSummary {
    pub diagonal: Vec<f64>,
    pub mean_photon: f64,
    pub wigner_origin: f64,
    pub peak_off_diagonal: f64,
}

impl StateSummary {
    pub fn of(rho: &DensityMatrix) -> Self {
        Self {
            diagonal: rho.photon_distribution(),
            mean_photon: mean_photon(rho),
            wigner_origin: origin_parity(rho),
            peak_off_diagonal: cat_coherence(rho, &QuadAxis::quadrature_default()).off_diagonal[1],
        }
    }
}

/// Stratified bootstrap: every replica resamples each phase with replacement,
/// keeping per-phase counts, and reruns the reconstruction.
pub fn bootstrap(dataset: &HomodyneDataset, cfg: &MleConfig, replicas: usize, seed: u64) -> Result<BootstrapReport> {
    if replicas < 2 {
        return Err(Error::domain("bootstrap needs at least 2 replicas"));
    }
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::domain("dataset has no records"));
    }
    let problem = MleProblem::new(dataset, cfg.cutoff, cfg.binning)?;
    let outcomes: Vec<Result<StateSummary>> = (0..replicas)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, k as u64));
            let picks: Vec<Vec<usize>> = problem
                .blocks
                .iter()
                .map(|b| {
                    let n = b.records.len();
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                })
                .collect();
            let (rho, _) = problem.reweighted(&picks).reconstruct(cfg)?;
            Ok(StateSummary::of(&rho))
        })
        .collect();
    let mut summaries = Vec::new();
    let mut failures = Vec::new();
    for (k, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(s) => summaries.push(s),
            Err(e) => failures.push(format!("replica {k}: {e}")),
        }
    }
    let succeeded = summaries.len();
    if (succeeded as f64) < MIN_BOOTSTRAP_SUCCESS * replicas as f64 || succeeded < 2 {
        return Err(Error::Bootstrap { succeeded, replicas });
    }
    let column = |f: &dyn Fn(&StateSummary) -> f64| {
        Estimate::from_samples(&summaries.iter().map(f).collect::<Vec<_>>())
    };
    let d = cfg.cutoff + 1;
    Ok(BootstrapReport {
        replicas,
        succeeded,
        seed,
        diagonal: (0..d).map(|n| column(&|s| s.diagonal[n])).collect(),
        mean_photon: column(&|s| s.mean_photon),
        wigner_origin: column(&|s| s.wigner_origin),
        peak_off_diagonal: column(&|s| s.peak_off_diagonal),
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{fidelity, squeezed_vacuum, SqueezeSpec};
    use crate::sampler::{synth_dataset, HomodyneRecord, PhasePlan};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn cfg(n: usize) -> HilbertConfig {
        HilbertConfig::new(n).unwrap()
    }

    #[test]
    fn projector_elements() {
        let p = povm_projector(0.0, 0.0, cfg(6));
        assert_relative_eq!(p[(0, 0)].re, PI.sqrt().recip(), epsilon = 1e-15);
        assert_eq!(p[(1, 1)].norm(), 0.0);
        let p = povm_projector(0.7, 1.3, cfg(10));
        let direct: f64 = crate::special::hermite_functions(1.3, 10).iter().map(|v| v * v).sum();
        assert_relative_eq!(p.trace().re, direct, epsilon = 1e-12);
        assert!((&p - p.adjoint()).norm() < 1e-15);
        let eig = p.symmetric_eigen().eigenvalues;
        assert!(eig.iter().filter(|l| l.abs() > 1e-12).count() == 1);
    }

    #[test]
    fn fast_probabilities_match_projectors() {
        let rho = crate::fock::coherent_state(Complex64::new(0.4, -0.9), cfg(12)).unwrap().to_density();
        let records = vec![
            HomodyneRecord { theta_deg: 30.0, q: 0.3 },
            HomodyneRecord { theta_deg: -45.0, q: -1.2 },
            HomodyneRecord { theta_deg: 30.0, q: 2.0 },
        ];
        let ds = HomodyneDataset::from_records(records.clone(), "t", None).unwrap();
        let fast = log_likelihood(&rho, &ds).unwrap();
        let slow: f64 = records
            .iter()
            .map(|r| {
                let p = povm_projector(r.theta_deg.to_radians(), r.q, cfg(12));
                (&p * rho.elements()).trace().re.ln()
            })
            .sum();
        assert_relative_eq!(fast, slow, epsilon = 1e-12);
    }

    #[test]
    fn maximally_mixed_single_record() {
        let ds = HomodyneDataset::from_records(vec![HomodyneRecord { theta_deg: 0.0, q: 0.4 }], "t", None).unwrap();
        let mm = DensityMatrix::maximally_mixed(cfg(5));
        let tr: f64 = crate::special::hermite_functions(0.4, 5).iter().map(|v| v * v).sum();
        assert_relative_eq!(log_likelihood(&mm, &ds).unwrap(), (tr / 6.0).ln(), epsilon = 1e-13);
    }

    #[test]
    fn likelihood_ignores_record_order() {
        let sq = squeezed_vacuum(SqueezeSpec::from_r(0.4), cfg(20)).unwrap().to_density();
        let ds = synth_dataset(&sq, &PhasePlan::new(vec![0.0, 60.0], 300).unwrap(), 1, "s").unwrap();
        let mut rev = ds.records.clone();
        rev.reverse();
        let rev = HomodyneDataset::from_records(rev, "s", None).unwrap();
        let rho = sq.with_cutoff(cfg(10)).unwrap();
        let a = log_likelihood(&rho, &ds).unwrap();
        let b = log_likelihood(&rho, &rev).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn true_state_beats_vacuum() {
        let sq = squeezed_vacuum(SqueezeSpec::from_r(0.576), cfg(30)).unwrap().to_density();
        let ds = synth_dataset(&sq, &PhasePlan::new(vec![0.0, 90.0], 5000).unwrap(), 4, "s").unwrap();
        let truth = log_likelihood(&sq, &ds).unwrap();
        let vac = log_likelihood(&DensityMatrix::vacuum(cfg(30)), &ds).unwrap();
        assert!(truth > vac);
    }

    #[test]
    fn singular_likelihood_lists_records() {
        let ds = HomodyneDataset::from_records(
            vec![
                HomodyneRecord { theta_deg: 0.0, q: 0.0 },
                HomodyneRecord { theta_deg: 0.0, q: 1.0 },
            ],
            "t",
            None,
        )
        .unwrap();
        // |1⟩ has a node at q = 0.
        let one = DensityMatrix::fock(1, cfg(3)).unwrap();
        match log_likelihood(&one, &ds) {
            Err(Error::SingularLikelihood { records }) => assert_eq!(records, vec![0]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn vacuum_reconstruction() {
        let vac = DensityMatrix::vacuum(cfg(10));
        let ds = synth_dataset(&vac, &PhasePlan::default(), 8, "vac").unwrap();
        let mle = MleConfig { cutoff: 10, ..MleConfig::default() };
        let (rho, diag) = mle_reconstruct(&ds, &mle).unwrap();
        // At 6×10⁴ records the fidelity scatters over 0.9967–0.9999 between seeds.
        assert!(fidelity(&rho, &vac).unwrap() > 0.995);
        assert!(diag.likelihood_trace.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0].abs()));
        rho.validate().unwrap();
        assert_eq!(diag.likelihood_trace.len(), diag.iterations + 1);
    }

    #[test]
    fn squeezed_fixed_point() {
        let truth = squeezed_vacuum(SqueezeSpec::from_r(0.4), cfg(30)).unwrap().to_density();
        let ds = synth_dataset(&truth, &PhasePlan::new(vec![-45.0, 0.0, 45.0, 90.0], 25_000).unwrap(), 12, "s").unwrap();
        let mle = MleConfig { cutoff: 10, ..MleConfig::default() };
        let (rho, _) = mle_reconstruct(&ds, &mle).unwrap();
        let truncated = truth.with_cutoff(cfg(10)).unwrap();
        assert!(crate::fock::trace_distance(&rho, &truncated).unwrap() < 0.05);
    }

    #[test]
    fn single_phase_warns() {
        let sq = squeezed_vacuum(SqueezeSpec::from_r(0.3), cfg(20)).unwrap().to_density();
        let ds = synth_dataset(&sq, &PhasePlan::new(vec![0.0], 2000).unwrap(), 2, "s").unwrap();
        let mle = MleConfig { cutoff: 6, max_iterations: 50, ..MleConfig::default() };
        let (_, diag) = mle_reconstruct(&ds, &mle).unwrap();
        assert!(diag.warnings.iter().any(|w| w.contains("one LO phase")));
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let sq = squeezed_vacuum(SqueezeSpec::from_r(0.3), cfg(20)).unwrap().to_density();
        let ds = synth_dataset(&sq, &PhasePlan::new(vec![0.0, 90.0], 500).unwrap(), 2, "s").unwrap();
        let mle = MleConfig { cutoff: 8, max_iterations: 3, ..MleConfig::default() };
        let (rho, diag) = mle_reconstruct(&ds, &mle).unwrap();
        assert!(!diag.converged);
        assert_eq!(diag.iterations, 3);
        rho.validate().unwrap();
    }

    #[test]
    fn binned_and_pointwise_agree() {
        let sq = squeezed_vacuum(SqueezeSpec::from_r(0.4), cfg(20)).unwrap().to_density();
        let ds = synth_dataset(&sq, &PhasePlan::default(), 3, "s").unwrap();
        let point = MleConfig { cutoff: 8, ..MleConfig::default() };
        let binned = MleConfig { binning: Binning::Width(0.02), ..point.clone() };
        let (a, _) = mle_reconstruct(&ds, &point).unwrap();
        let (b, _) = mle_reconstruct(&ds, &binned).unwrap();
        assert!(fidelity(&a, &b).unwrap() > 0.999);
    }

    #[test]
    fn config_validation() {
        assert!(MleConfig { cutoff: 0, ..MleConfig::default() }.validate().is_err());
        assert!(MleConfig { tolerance: 0.0, ..MleConfig::default() }.validate().is_err());
        assert!(MleConfig { binning: Binning::Width(-1.0), ..MleConfig::default() }.validate().is_err());
        let json = serde_json::to_string(&MleConfig::default()).unwrap();
        assert_eq!(serde_json::from_str::<MleConfig>(&json).unwrap(), MleConfig::default());
    }

    #[test]
    fn bootstrap_smoke_and_determinism() {
        let vac = DensityMatrix::vacuum(cfg(4));
        let ds = synth_dataset(&vac, &PhasePlan::new(vec![0.0, 90.0], 50).unwrap(), 1, "v").unwrap();
        let mle = MleConfig { cutoff: 3, max_iterations: 200, ..MleConfig::default() };
        let a = bootstrap(&ds, &mle, 2, 9).unwrap();
        assert_eq!(a.succeeded, 2);
        assert!(a.mean_photon.std.is_finite() && a.mean_photon.std >= 0.0);
        assert_eq!(a, bootstrap(&ds, &mle, 2, 9).unwrap());
        assert!(bootstrap(&ds, &mle, 1, 9).is_err());
    }

    #[test]
    fn vacuum_bootstrap_spread() {
        let vac = DensityMatrix::vacuum(cfg(6));
        let ds = synth_dataset(&vac, &PhasePlan::default(), 21, "v").unwrap();
        let mle = MleConfig { cutoff: 6, binning: Binning::Width(0.05), ..MleConfig::default() };
        let report = bootstrap(&ds, &mle, 100, 3).unwrap();
        assert!(report.mean_photon.std < 0.01, "{:?}", report.mean_photon);
        assert!(report.mean_photon.std > 0.0);
    }
}
