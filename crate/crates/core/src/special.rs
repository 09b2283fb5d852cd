//! Special functions used throughout: normalized Hermite functions, normalized
//! Laguerre functions and binomial weights.
//!
//! Everything here is evaluated by three-term recurrences with the
//! normalization folded in, so no factorial is ever formed explicitly and the
//! routines stay finite well past `n = 170`.

use std::f64::consts::PI;

/// Normalized Hermite functions `psi_n(q) = pi^{-1/4} (2^n n!)^{-1/2} H_n(q) e^{-q^2/2}`
/// for `n = 0..=n_max`.
///
/// These are the position-space wavefunctions of the Fock states with the
/// vacuum quadrature variance equal to 1/2.
pub fn hermite_functions(q: f64, n_max: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    hermite_functions_into(q, &mut out);
    out
}

/// In-place variant of [`hermite_functions`]; fills `out[0..out.len()]`.
pub fn hermite_functions_into(q: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = PI.powf(-0.25) * (-0.5 * q * q).exp();
    if out.len() > 1 {
        out[1] = std::f64::consts::SQRT_2 * q * out[0];
    }
    for n in 1..out.len().saturating_sub(1) {
        let nf = n as f64;
        out[n + 1] = (2.0 / (nf + 1.0)).sqrt() * q * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
    }
}

/// Normalized associated Laguerre functions for a fixed order `k`:
///
/// `l_n^k(u) = sqrt(n!/(n+k)!) u^{k/2} e^{-u/2} L_n^{(k)}(u)`, `n = 0..len`.
///
/// `|l_n^k| <= 1` for `u >= 0`, which keeps the Fock-basis Wigner expansion
/// well conditioned at large cutoffs.
pub fn laguerre_functions(k: usize, u: f64, len: usize, out: &mut Vec<f64>) {
    out.clear();
    if len == 0 {
        return;
    }
    let kf = k as f64;
    let first = if u == 0.0 {
        if k == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        (0.5 * kf * u.ln() - 0.5 * u - 0.5 * ln_factorial(k)).exp()
    };
    out.push(first);
    if len == 1 {
        return;
    }
    out.push((1.0 + kf - u) * first / (kf + 1.0).sqrt());
    for n in 1..len - 1 {
        let nf = n as f64;
        let next = ((2.0 * nf + 1.0 + kf - u) * out[n] - (nf * (nf + kf)).sqrt() * out[n - 1])
            / ((nf + 1.0) * (nf + kf + 1.0)).sqrt();
        out.push(next);
    }
}

/// `ln(n!)` by direct summation; exact enough for the cutoffs used here.
pub fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Binomial coefficient as a float.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Binomial probability `C(n,k) p^k (1-p)^{n-k}` with `0^0 = 1`.
pub fn binomial_pmf(n: usize, k: usize, p: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    binomial(n, k) * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
}
