//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line with
//! the measured quantities, then asserts.

use std::f64::consts::FRAC_1_PI;
use std::time::{Duration, Instant};

use catsim::channels::{
    beamsplitter_join, count_rate_table, herald_subtract, loss_channel, lossy_number_povm,
    ExperimentParams, HeraldResult,
};
use catsim::fock::{
    cat_state, fidelity, mean_photon, mixed_coherent, squeezed_vacuum_with_tolerance, DensityMatrix,
    HilbertConfig, Parity, SqueezeSpec,
};
use catsim::phase_space::{
    cat_coherence, marginal_at, wigner, wigner_integral_oracle, wigner_point, QuadAxis,
};
use catsim::sampler::{synth_dataset, PhasePlan};
use catsim::special::binomial;
use catsim::tes::{adjacent_misassignment, confusion, TesParams};
use catsim::tomography::{bootstrap, mle_reconstruct, Binning, MleConfig, MONOTONICITY_TOLERANCE};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: u32, name: &str, pass: bool, elapsed: Duration, limit: Duration, detail: &str) {
    let ok = pass && elapsed < limit;
    println!(
        "{} criterion {id} ({name}) [{:.1}s / {}s] {detail}",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    assert!(ok, "criterion {id} failed: {detail}");
}

fn cfg(cutoff: usize) -> HilbertConfig {
    HilbertConfig::new(cutoff).unwrap()
}

fn heralded(params: &ExperimentParams) -> Vec<HeraldResult> {
    (0..=4)
        .map(|n| herald_subtract(&params.with_herald(n), cfg(params.cutoff)).unwrap())
        .collect()
}

fn random_state(seed: u64, cutoff: usize) -> DensityMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = cutoff + 1;
    let g = DMatrix::from_fn(d, d, |_, _| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    DensityMatrix::from_operator(&g * g.adjoint(), cfg(cutoff)).unwrap()
}

#[test]
fn criterion_01_parity_signs() {
    let start = Instant::now();
    let states = heralded(&ExperimentParams::paper_default());
    let axis = QuadAxis::wigner_default();
    let mut pass = true;
    let mut detail = Vec::new();
    for (n, h) in states.iter().enumerate() {
        let w0 = wigner_point(&h.state, 0.0, 0.0);
        let min = wigner(&h.state, &axis, &axis).min();
        let sign_ok = if n % 2 == 0 { w0 > 0.0 } else { w0 < 0.0 };
        pass &= sign_ok && w0.abs() > 0.005 && (n == 0 || min < -0.002);
        detail.push(format!("n={n}: W0={w0:+.4} minW={min:+.4}"));
    }
    report(1, "parity sign pattern", pass, start.elapsed(), Duration::from_secs(60), &detail.join(", "));
}

#[test]
fn criterion_02_mean_photon() {
    let start = Instant::now();
    let states = heralded(&ExperimentParams::paper_default());
    let means: Vec<f64> = states.iter().map(|h| mean_photon(&h.state)).collect();
    let increasing = means.windows(2).all(|w| w[1] > w[0]);
    let odd: f64 = states[0].state.photon_distribution().iter().skip(1).step_by(2).sum();
    let detail = format!("means={means:.3?} odd weight at n=0: {odd:.4}");
    report(2, "mean photon monotonicity", increasing && odd > 0.01, start.elapsed(), Duration::from_secs(60), &detail);
}

#[test]
fn criterion_03_count_rates() {
    let start = Instant::now();
    let rows = count_rate_table(&ExperimentParams::paper_default(), 4).unwrap();
    let (r3, r4) = (rows[3].rate_cps, rows[4].rate_cps);
    let within = |rate: f64, target: f64| (rate / target).log10().abs() <= 1.0;
    let ratio = r3 / r4;
    let pass = within(r3, 200.0) && within(r4, 1.5) && (30.0..=500.0).contains(&ratio);
    let detail = format!(
        "rate(3)={r3:.1} cps (target 200), rate(4)={r4:.2} cps (target 1.5), ratio={ratio:.1} (need 30..500)"
    );
    report(3, "count rates", pass, start.elapsed(), Duration::from_secs(60), &detail);
}

#[test]
fn criterion_04_cat_coherence() {
    let start = Instant::now();
    let states = heralded(&ExperimentParams::paper_default());
    let axis = QuadAxis::quadrature_default();
    let four = cat_coherence(&states[4].state, &axis);
    let mut pass = four.min_ratio() > 0.25;
    let mut detail = vec![format!(
        "n=4 off/diag={:.4?}/{:.4?} (min ratio {:.3}, need > 0.25)",
        four.off_diagonal,
        four.diagonal,
        four.min_ratio()
    )];
    for n in [1, 3] {
        let c = cat_coherence(&states[n].state, &axis);
        pass &= c.off_diagonal.iter().all(|v| *v < 0.0);
        detail.push(format!("n={n} off={:.4?}", c.off_diagonal));
    }
    report(4, "cat coherence signature", pass, start.elapsed(), Duration::from_secs(60), &detail.join(", "));
}

#[test]
fn criterion_05_cat_panels() {
    let start = Instant::now();
    let alpha = Complex64::new(0.0, 2.5);
    let config = cfg(40);
    let axis = QuadAxis::quadrature_default();
    let even = cat_state(alpha, Parity::Even, config).unwrap().to_density();
    let odd = cat_state(alpha, Parity::Odd, config).unwrap().to_density();
    let even_w0 = wigner_point(&even, 0.0, 0.0);
    let odd_w0 = wigner_point(&odd, 0.0, 0.0);
    let ideal = cat_coherence(&even, &axis);
    let lossy = cat_coherence(&loss_channel(&even, 0.7).unwrap(), &axis);
    let mixture = cat_coherence(&mixed_coherent(alpha, config).unwrap(), &axis);
    let pass = (even_w0 - FRAC_1_PI).abs() < 1e-6
        && (odd_w0 + FRAC_1_PI).abs() < 1e-6
        && lossy.off_diagonal[0].abs() < ideal.off_diagonal[0].abs()
        && lossy.off_diagonal[1].abs() < ideal.off_diagonal[1].abs()
        && mixture.max_abs_ratio() < 0.02;
    let detail = format!(
        "W0 even={:+.3e} odd={:+.3e} from ±1/π, off-diagonal ideal={:.4} lossy={:.4}, mixture ratio={:.2e}",
        even_w0 - FRAC_1_PI,
        odd_w0 + FRAC_1_PI,
        ideal.off_diagonal[1],
        lossy.off_diagonal[1],
        mixture.max_abs_ratio()
    );
    report(5, "cat panels", pass, start.elapsed(), Duration::from_secs(10), &detail);
}

#[test]
fn criterion_06_tomography_closed_loop() {
    let start = Instant::now();
    let params = ExperimentParams::paper_default();
    let states = heralded(&params);
    let mle = MleConfig::default();
    let plan = PhasePlan::default();
    let mut pass = mle.cutoff == 15 && plan.phases_deg.len() == 6 && plan.samples_per_phase == 10_000;
    let mut detail = Vec::new();
    for (n, h) in states.iter().enumerate() {
        let data = synth_dataset(&h.state, &plan, 1000 + n as u64, "acceptance").unwrap();
        let (rho, diag) = mle_reconstruct(&data, &mle).unwrap();
        let f = fidelity(&rho.with_cutoff(h.state.config()).unwrap(), &h.state).unwrap();
        let w_true = wigner_point(&h.state, 0.0, 0.0);
        let w_rec = wigner_point(&rho, 0.0, 0.0);
        let monotone = diag
            .likelihood_trace
            .windows(2)
            .all(|w| w[1] >= w[0] - MONOTONICITY_TOLERANCE * w[0].abs());
        pass &= f >= 0.98 && w_true.signum() == w_rec.signum() && monotone;
        detail.push(format!(
            "n={n}: F={f:.4} W0={w_rec:+.4} iters={} monotone={monotone}",
            diag.iterations
        ));
    }
    report(6, "tomography closed loop", pass, start.elapsed(), Duration::from_secs(900), &detail.join(", "));
}

#[test]
fn criterion_07_bootstrap() {
    let start = Instant::now();
    let state = herald_subtract(&ExperimentParams::paper_default().with_herald(2), cfg(30))
        .unwrap()
        .state;
    let mle = MleConfig {
        binning: Binning::Width(0.05),
        ..MleConfig::default()
    };
    let sigma = |per_phase: usize, seed: u64| {
        let plan = PhasePlan::new(PhasePlan::default().phases_deg, per_phase).unwrap();
        let data = synth_dataset(&state, &plan, seed, "acceptance").unwrap();
        bootstrap(&data, &mle, 100, seed + 1).unwrap().wigner_origin.std
    };
    let small = sigma(10_000, 70);
    let large = sigma(40_000, 80);
    let ratio = large / small;
    let pass = small < 0.05 && (0.4..=0.6).contains(&ratio);
    let detail = format!("σ(W0) 1e4/phase={small:.5}, 4e4/phase={large:.5}, ratio={ratio:.3}");
    report(7, "bootstrap sanity", pass, start.elapsed(), Duration::from_secs(1800), &detail);
}

#[test]
fn criterion_08_wigner_oracles() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_integral: f64 = 0.0;
    let mut worst_radon: f64 = 0.0;
    for s in 0..10 {
        let rho = random_state(100 + s, 8);
        for _ in 0..25 {
            let (x, p) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let oracle = wigner_integral_oracle(&rho, x, p).unwrap();
            worst_integral = worst_integral.max((oracle - wigner_point(&rho, x, p)).abs());
        }
        let theta: f64 = rng.random_range(0.0..std::f64::consts::PI);
        let points = [-1.7, -0.4, 0.3, 1.9];
        let (c, sn) = (theta.cos(), theta.sin());
        for (q, m) in points.iter().zip(marginal_at(&rho, theta, &points)) {
            let radon = quadrature::integrate(
                |t| wigner_point(&rho, q * c - t * sn, q * sn + t * c),
                -9.0,
                9.0,
                1e-10,
            )
            .integral;
            worst_radon = worst_radon.max((radon - m).abs());
        }
    }
    let pass = worst_integral < 1e-6 && worst_radon < 1e-4;
    let detail = format!("max |Laguerre − integral|={worst_integral:.2e}, max |marginal − Radon|={worst_radon:.2e}");
    report(8, "Wigner cross-method oracle", pass, start.elapsed(), Duration::from_secs(60), &detail);
}

#[test]
fn criterion_09_channel_algebra() {
    let start = Instant::now();
    let rho = random_state(9, 10);
    let composed = loss_channel(&loss_channel(&rho, 0.8).unwrap(), 0.6).unwrap();
    let direct = loss_channel(&rho, 0.48).unwrap();
    let composition = (composed.elements() - direct.elements()).camax();

    let cutoff = 8;
    // Deliberately truncated: both routes see the same cutoff-8 input.
    let sqz = squeezed_vacuum_with_tolerance(SqueezeSpec::from_r(0.45), cfg(cutoff), 1.0).unwrap();
    let joint = beamsplitter_join(&sqz, 0.7, cutoff).unwrap();
    let eta = 0.4;
    let d = cutoff + 1;
    let mut povm_gap: f64 = 0.0;
    for n in 0..=4 {
        let via_povm = joint.heralded_operator(&lossy_number_povm(n, eta, cutoff).unwrap()).unwrap();
        // Channel route: amplitude-damp the idler with explicit Kraus
        // matrices, then project it onto |n⟩.
        let mut via_channel = DMatrix::<Complex64>::zeros(d, d);
        for k in 0..=cutoff {
            let kraus = DMatrix::from_fn(d, d, |row, col| {
                if col >= k && row == col - k {
                    let w = binomial(col, k) * eta.powi(row as i32) * (1.0 - eta).powi(k as i32);
                    Complex64::new(w.sqrt(), 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            });
            let damped = joint.amplitudes() * kraus.transpose();
            let col = damped.column(n);
            via_channel += col * col.adjoint();
        }
        povm_gap = povm_gap.max((via_povm - via_channel).camax());
    }

    let lossless = heralded(&ExperimentParams::lossless());
    let off_parity = lossless
        .iter()
        .enumerate()
        .map(|(n, h)| {
            h.state
                .photon_distribution()
                .iter()
                .enumerate()
                .filter(|(k, _)| (k + n) % 2 == 1)
                .map(|(_, p)| p)
                .sum::<f64>()
        })
        .fold(0.0, f64::max);
    let pass = composition < 1e-10 && povm_gap < 1e-10 && off_parity < 1e-12;
    let detail = format!("composition={composition:.1e}, POVM vs channel={povm_gap:.1e}, off-parity={off_parity:.1e}");
    report(9, "channel algebra", pass, start.elapsed(), Duration::from_secs(60), &detail);
}

#[test]
fn criterion_10_tes_discrimination() {
    let start = Instant::now();
    let defaults = TesParams::default();
    let sharp = confusion(&defaults, 4, 1_000_000, 10).unwrap();
    let wide_params = TesParams {
        energy_resolution_ev: 0.4,
        ..TesParams::default()
    };
    let wide = confusion(&wide_params, 4, 1_000_000, 11).unwrap();
    let expected = adjacent_misassignment(&wide_params);
    let mut worst: f64 = 0.0;
    for n in 0..4 {
        for (a, b) in [(n, n + 1), (n + 1, n)] {
            worst = worst.max((wide.probabilities[(a, b)] / expected - 1.0).abs());
        }
    }
    let pass = sharp.off_diagonal_mass() < 1e-5 && worst < 0.2;
    let detail = format!(
        "off-diagonal mass at defaults={:.1e}, ΔE=0.4 adjacent analytic={expected:.5} worst relative error={worst:.3}",
        sharp.off_diagonal_mass()
    );
    report(10, "TES discrimination", pass, start.elapsed(), Duration::from_secs(120), &detail);
}
