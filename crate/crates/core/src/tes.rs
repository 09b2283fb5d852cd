//! Transition-edge-sensor pulses and photon-number discrimination.
//!
//! A pulse of `n` photons is a double exponential normalized to unit peak per
//! photon, starting `onset_ns` into a window of one repetition period. The
//! measured energy carries Gaussian jitter of constant width `σ_E`, and every
//! sample carries white noise of standard deviation `noise_floor` (in units
//! of the single-photon peak).

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::sampler::derive_seed;

/// FWHM of a Gaussian in units of its standard deviation.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

/// How the quoted energy resolution relates to the Gaussian width.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolutionKind {
    Fwhm,
    Sigma,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TesParams {
    pub photon_energy_ev: f64,
    pub energy_resolution_ev: f64,
    pub resolution_kind: ResolutionKind,
    pub decay_tau_ns: f64,
    /// Zero gives an instantaneous rise.
    pub rise_tau_ns: f64,
    pub rep_period_ns: f64,
    pub sample_period_ns: f64,
    pub onset_ns: f64,
    pub noise_floor: f64,
}

impl Default for TesParams {
    fn default() -> Self {
        Self {
            photon_energy_ev: 0.8,
            energy_resolution_ev: 0.176,
            resolution_kind: ResolutionKind::Fwhm,
            decay_tau_ns: 107.0,
            rise_tau_ns: 15.0,
            rep_period_ns: 200.0,
            sample_period_ns: 1.0,
            onset_ns: 20.0,
            noise_floor: 0.01,
        }
    }
}

impl TesParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("photon_energy_ev", self.photon_energy_ev),
            ("decay_tau_ns", self.decay_tau_ns),
            ("rep_period_ns", self.rep_period_ns),
            ("sample_period_ns", self.sample_period_ns),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("{name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("energy_resolution_ev", self.energy_resolution_ev),
            ("rise_tau_ns", self.rise_tau_ns),
            ("onset_ns", self.onset_ns),
            ("noise_floor", self.noise_floor),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.energy_resolution_ev >= self.photon_energy_ev {
            return Err(Error::domain("energy resolution must be below the photon energy"));
        }
        if self.rise_tau_ns >= self.decay_tau_ns {
            return Err(Error::domain("rise time must be shorter than the decay time"));
        }
        if self.onset_ns >= self.rep_period_ns {
            return Err(Error::domain("onset must lie inside the repetition period"));
        }
        Ok(())
    }

    pub fn samples_per_trace(&self) -> usize {
        (self.rep_period_ns / self.sample_period_ns).round() as usize
    }

    /// Gaussian standard deviation of the energy measurement.
    pub fn sigma_ev(&self) -> f64 {
        match self.resolution_kind {
            ResolutionKind::Fwhm => self.energy_resolution_ev / FWHM_PER_SIGMA,
            ResolutionKind::Sigma => self.energy_resolution_ev,
        }
    }

    /// Energy jitter in units of one photon.
    fn sigma_photons(&self) -> f64 {
        self.sigma_ev() / self.photon_energy_ev
    }

    /// Time from onset to the pulse maximum.
    pub fn peak_delay_ns(&self) -> f64 {
        if self.rise_tau_ns == 0.0 {
            0.0
        } else {
            let (r, d) = (self.rise_tau_ns, self.decay_tau_ns);
            r * d / (d - r) * (d / r).ln()
        }
    }

    /// Single-photon pulse at time `t` after onset, unit peak.
    pub fn shape(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let raw = |t: f64| {
            let decay = (-t / self.decay_tau_ns).exp();
            if self.rise_tau_ns == 0.0 {
                decay
            } else {
                decay - (-t / self.rise_tau_ns).exp()
            }
        };
        raw(t) / raw(self.peak_delay_ns())
    }
}

fn render(amplitude: f64, start_ns: f64, params: &TesParams, out: &mut [f64]) {
    if amplitude == 0.0 {
        return;
    }
    for (i, v) in out.iter_mut().enumerate() {
        let t = i as f64 * params.sample_period_ns - start_ns;
        *v += amplitude * params.shape(t);
    }
}

fn jittered_amplitude(n: usize, params: &TesParams, rng: &mut ChaCha8Rng) -> f64 {
    let sigma = params.sigma_photons();
    let z: f64 = StandardNormal.sample(rng);
    if sigma == 0.0 {
        n as f64
    } else {
        n as f64 + sigma * z
    }
}

fn add_noise(trace: &mut [f64], params: &TesParams, rng: &mut ChaCha8Rng) {
    if params.noise_floor == 0.0 {
        return;
    }
    for v in trace {
        let z: f64 = StandardNormal.sample(rng);
        *v += params.noise_floor * z;
    }
}

fn trace_with_rng(n: usize, params: &TesParams, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = vec![0.0; params.samples_per_trace()];
    render(jittered_amplitude(n, params, rng), params.onset_ns, params, &mut out);
    add_noise(&mut out, params, rng);
    out
}

/// One repetition window containing an `n`-photon pulse.
pub fn pulse_trace(n: usize, params: &TesParams, seed: u64) -> Result<Vec<f64>> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(trace_with_rng(n, params, &mut rng))
}

/// Consecutive windows, one pulse per entry of `photons`; earlier pulses leak
/// into later windows.
pub fn pulse_train(photons: &[usize], params: &TesParams, seed: u64) -> Result<Vec<f64>> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = params.samples_per_trace();
    let mut out = vec![0.0; s * photons.len()];
    for (k, &n) in photons.iter().enumerate() {
        let a = jittered_amplitude(n, params, &mut rng);
        let start = k as f64 * params.rep_period_ns + params.onset_ns;
        // A pulse never affects windows before its own.
        render(a, start - (k * s) as f64 * params.sample_period_ns, params, &mut out[k * s..]);
    }
    add_noise(&mut out, params, &mut rng);
    Ok(out)
}

/// Result of classifying one window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseClass {
    pub photons: usize,
    /// Fitted amplitude in photon units.
    pub amplitude: f64,
    /// The fitted amplitude rounded above `n_max`.
    pub saturated: bool,
}

/// Least-squares pulse-height estimator for one window.
///
/// The window is fitted with a constant offset, a decaying exponential tail
/// from earlier pulses, and the single-photon template at the onset; the
/// amplitude of the template is rounded to the nearest photon number.
#[derive(Clone, Debug)]
pub struct PulseClassifier {
    params: TesParams,
    n_max: usize,
    /// Row of the least-squares pseudo-inverse that yields the amplitude.
    weights: DVector<f64>,
}

impl PulseClassifier {
    pub fn new(params: &TesParams, n_max: usize) -> Result<Self> {
        params.validate()?;
        let s = params.samples_per_trace();
        let design = DMatrix::from_fn(s, 3, |i, c| {
            let t = i as f64 * params.sample_period_ns;
            match c {
                0 => 1.0,
                1 => (-t / params.decay_tau_ns).exp(),
                _ => params.shape(t - params.onset_ns),
            }
        });
        let normal = design.transpose() * &design;
        let inverse = normal
            .try_inverse()
            .ok_or_else(|| Error::domain("pulse template is degenerate with the baseline model"))?;
        let weights = (inverse * design.transpose()).row(2).transpose();
        Ok(Self {
            params: params.clone(),
            n_max,
            weights,
        })
    }

    pub fn amplitude(&self, trace: &[f64]) -> Result<f64> {
        if trace.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                left: trace.len(),
                right: self.weights.len(),
            });
        }
        Ok(self.weights.iter().zip(trace).map(|(w, v)| w * v).sum())
    }

    pub fn classify(&self, trace: &[f64]) -> Result<PulseClass> {
        let amplitude = self.amplitude(trace)?;
        let rounded = amplitude.round().max(0.0);
        let saturated = rounded > self.n_max as f64;
        Ok(PulseClass {
            photons: if saturated { self.n_max } else { rounded as usize },
            amplitude,
            saturated,
        })
    }

    pub fn params(&self) -> &TesParams {
        &self.params
    }
}

/// Classifies a single window; see [`PulseClassifier`].
pub fn classify_pulse(trace: &[f64], params: &TesParams, n_max: usize) -> Result<PulseClass> {
    PulseClassifier::new(params, n_max)?.classify(trace)
}

/// `probabilities[(true, assigned)]`, rows summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfusionMatrix {
    pub probabilities: DMatrix<f64>,
    /// Traces simulated per true photon number.
    pub trials_per_row: usize,
}

impl ConfusionMatrix {
    pub fn n_max(&self) -> usize {
        self.probabilities.nrows() - 1
    }

    /// Fraction of all traces assigned a wrong photon number.
    pub fn off_diagonal_mass(&self) -> f64 {
        let d = self.probabilities.nrows();
        let wrong: f64 = (0..d)
            .map(|i| 1.0 - self.probabilities[(i, i)])
            .sum();
        wrong / d as f64
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let d = self.probabilities.nrows();
        let header: Vec<String> = (0..d).map(|m| m.to_string()).collect();
        writeln!(out, "true\\assigned,{}", header.join(","))?;
        for n in 0..d {
            let row: Vec<String> = (0..d).map(|m| format!("{:?}", self.probabilities[(n, m)])).collect();
            writeln!(out, "{n},{}", row.join(","))?;
        }
        Ok(())
    }
}

const CONFUSION_CHUNK: usize = 10_000;

/// Monte Carlo confusion matrix with `trials` traces per true photon number.
pub fn confusion(params: &TesParams, n_max: usize, trials: usize, seed: u64) -> Result<ConfusionMatrix> {
    if trials < 1000 {
        return Err(Error::domain(format!("need at least 1000 trials, got {trials}")));
    }
    let classifier = PulseClassifier::new(params, n_max)?;
    let chunks = trials.div_ceil(CONFUSION_CHUNK);
    let d = n_max + 1;
    let jobs: Vec<(usize, usize)> = (0..d).flat_map(|n| (0..chunks).map(move |c| (n, c))).collect();
    let tallies: Vec<(usize, Vec<u64>)> = jobs
        .par_iter()
        .map(|&(n, c)| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, (n * chunks + c) as u64));
            let count = CONFUSION_CHUNK.min(trials - c * CONFUSION_CHUNK);
            let mut tally = vec![0u64; d];
            for _ in 0..count {
                let trace = trace_with_rng(n, params, &mut rng);
                let class = classifier.classify(&trace).expect("trace length matches");
                tally[class.photons] += 1;
            }
            (n, tally)
        })
        .collect();
    let mut counts = DMatrix::<f64>::zeros(d, d);
    for (n, tally) in tallies {
        for (m, c) in tally.into_iter().enumerate() {
            counts[(n, m)] += c as f64;
        }
    }
    Ok(ConfusionMatrix {
        probabilities: counts / trials as f64,
        trials_per_row: trials,
    })
}

/// Probability that a pulse is assigned to a given neighbour,
/// `erfc(E / (2√2 σ_E)) / 2`.
pub fn adjacent_misassignment(params: &TesParams) -> f64 {
    let sigma = params.sigma_ev();
    if sigma == 0.0 {
        return 0.0;
    }
    0.5 * erfc(params.photon_energy_ev / (2.0 * std::f64::consts::SQRT_2 * sigma))
}

/// Gaussian-overlap confusion matrix for amplitude noise `σ_E` alone, with
/// the same rounding and clamping as [`PulseClassifier`].
pub fn analytic_confusion(params: &TesParams, n_max: usize) -> ConfusionMatrix {
    let d = n_max + 1;
    let sigma = params.sigma_photons();
    let mut p = DMatrix::zeros(d, d);
    for n in 0..d {
        if sigma == 0.0 {
            p[(n, n)] = 1.0;
            continue;
        }
        let normal = Normal::new(n as f64, sigma).expect("positive width");
        for m in 0..d {
            let lo = if m == 0 { f64::NEG_INFINITY } else { m as f64 - 0.5 };
            let hi = if m == n_max { f64::INFINITY } else { m as f64 + 0.5 };
            p[(n, m)] = normal.cdf(hi) - normal.cdf(lo);
        }
    }
    ConfusionMatrix {
        probabilities: p,
        trials_per_row: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn quiet() -> TesParams {
        TesParams {
            energy_resolution_ev: 0.0,
            noise_floor: 0.0,
            ..TesParams::default()
        }
    }

    #[test]
    fn defaults_are_valid() {
        let p = TesParams::default();
        p.validate().unwrap();
        assert_eq!(p.samples_per_trace(), 200);
        assert_relative_eq!(p.sigma_ev(), 0.176 / 2.354_820_045, epsilon = 1e-9);
        assert_relative_eq!(p.photon_energy_ev / p.energy_resolution_ev, 4.545, epsilon = 1e-3);
    }

    #[test]
    fn validation() {
        let bad = [
            TesParams { energy_resolution_ev: 0.9, ..TesParams::default() },
            TesParams { decay_tau_ns: 0.0, ..TesParams::default() },
            TesParams { rise_tau_ns: 200.0, ..TesParams::default() },
            TesParams { noise_floor: -1.0, ..TesParams::default() },
            TesParams { onset_ns: 250.0, ..TesParams::default() },
        ];
        for p in bad {
            assert!(p.validate().is_err(), "{p:?}");
        }
    }

    #[test]
    fn vacuum_trace_is_zero() {
        let t = pulse_trace(0, &quiet(), 1).unwrap();
        assert!(t.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn shape_peaks_at_one() {
        let p = TesParams::default();
        assert_relative_eq!(p.shape(p.peak_delay_ns()), 1.0, epsilon = 1e-15);
        let t = pulse_trace(3, &quiet(), 0).unwrap();
        let peak = t.iter().cloned().fold(f64::MIN, f64::max);
        assert!((peak - 3.0).abs() < 1e-3);
    }

    #[test]
    fn exponential_decay() {
        let p = TesParams { rise_tau_ns: 0.0, ..quiet() };
        let t = pulse_trace(1, &p, 0).unwrap();
        let onset = 20;
        assert_eq!(t[onset], 1.0);
        assert_relative_eq!(t[onset + 107], (-1.0f64).exp(), epsilon = 1e-12);
        assert_relative_eq!(p.shape(200.0), (-200.0f64 / 107.0).exp(), epsilon = 1e-15);
        assert_relative_eq!(p.shape(200.0), 0.154, epsilon = 1e-3);
    }

    #[test]
    fn noiseless_round_trip() {
        let p = quiet();
        let classifier = PulseClassifier::new(&p, 6).unwrap();
        for n in 0..=6 {
            let t = pulse_trace(n, &p, 0).unwrap();
            let c = classifier.classify(&t).unwrap();
            assert_eq!(c.photons, n);
            assert!((c.amplitude - n as f64).abs() < 1e-9);
            assert!(!c.saturated);
        }
        let c = classifier.classify(&pulse_trace(9, &p, 0).unwrap()).unwrap();
        assert!(c.saturated);
        assert_eq!(c.photons, 6);
        assert!(classifier.classify(&[0.0; 3]).is_err());
    }

    #[test]
    fn clean_three_photon_trace() {
        let t = pulse_trace(3, &TesParams::default(), 17).unwrap();
        assert_eq!(classify_pulse(&t, &TesParams::default(), 4).unwrap().photons, 3);
        assert_eq!(classify_pulse(&vec![0.0; 200], &TesParams::default(), 4).unwrap().photons, 0);
    }

    #[test]
    fn pile_up_is_removed_by_baseline_fit() {
        let p = quiet();
        let classifier = PulseClassifier::new(&p, 4).unwrap();
        let s = p.samples_per_trace();
        for first in 0..=4 {
            for second in 0..=4 {
                let train = pulse_train(&[first, second], &p, 0).unwrap();
                let window = &train[s..];
                // Tail of the first pulse one period after its own samples.
                let lone = pulse_trace(second, &p, 0).unwrap();
                let peak = 20 + p.peak_delay_ns().round() as usize;
                let raised = window[peak] - lone[peak];
                assert_relative_eq!(
                    raised,
                    first as f64 * p.shape(peak as f64 - 20.0 + 200.0),
                    epsilon = 1e-12
                );
                assert_eq!(classifier.classify(window).unwrap().photons, second);
            }
        }
        let tail = PulseClassifier::new(&TesParams { rise_tau_ns: 0.0, ..p.clone() }, 4).unwrap();
        let q = TesParams { rise_tau_ns: 0.0, ..p };
        let train = pulse_train(&[4, 1], &q, 0).unwrap();
        assert_relative_eq!(train[200 + 20] - 1.0, 4.0 * (-200.0f64 / 107.0).exp(), epsilon = 1e-12);
        assert_eq!(tail.classify(&train[200..]).unwrap().photons, 1);
    }

    #[test]
    fn pile_up_with_noise() {
        let p = TesParams::default();
        let classifier = PulseClassifier::new(&p, 4).unwrap();
        let s = p.samples_per_trace();
        let mut wrong = 0;
        for seed in 0..200 {
            let train = pulse_train(&[4, 2], &p, seed).unwrap();
            if classifier.classify(&train[s..]).unwrap().photons != 2 {
                wrong += 1;
            }
        }
        assert_eq!(wrong, 0);
    }

    #[test]
    fn deterministic_traces() {
        let p = TesParams::default();
        assert_eq!(pulse_trace(2, &p, 5).unwrap(), pulse_trace(2, &p, 5).unwrap());
        assert_ne!(pulse_trace(2, &p, 5).unwrap(), pulse_trace(2, &p, 6).unwrap());
    }

    #[test]
    fn analytic_values() {
        let p = TesParams::default();
        let a = adjacent_misassignment(&p);
        assert!(a > 1e-8 && a < 1e-7, "{a}");
        let wide = TesParams { energy_resolution_ev: 0.4, ..p.clone() };
        assert_relative_eq!(adjacent_misassignment(&wide), 0.0092, epsilon = 1e-4);
        let sigma_reading = TesParams { resolution_kind: ResolutionKind::Sigma, ..p };
        assert!(adjacent_misassignment(&sigma_reading) > 1e-3);
        let m = analytic_confusion(&wide, 4);
        for n in 0..5 {
            assert_relative_eq!(m.probabilities.row(n).sum(), 1.0, epsilon = 1e-12);
        }
        assert_relative_eq!(m.probabilities[(2, 3)], adjacent_misassignment(&wide), epsilon = 1e-12);
    }

    #[test]
    fn zero_resolution_gives_identity() {
        let p = TesParams { energy_resolution_ev: 0.0, ..TesParams::default() };
        let m = confusion(&p, 4, 2000, 1).unwrap();
        assert_eq!(m.probabilities, DMatrix::identity(5, 5));
        assert!(confusion(&p, 4, 999, 1).is_err());
    }

    #[test]
    fn rows_sum_to_one_and_csv() {
        let p = TesParams { energy_resolution_ev: 0.4, ..TesParams::default() };
        let m = confusion(&p, 3, 5000, 2).unwrap();
        for n in 0..4 {
            assert!((m.probabilities.row(n).sum() - 1.0).abs() < 1e-9);
        }
        assert_eq!(m, confusion(&p, 3, 5000, 2).unwrap());
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("true\\assigned,0,1,2,3\n"));
        assert_eq!(text.lines().count(), 5);
    }
}
