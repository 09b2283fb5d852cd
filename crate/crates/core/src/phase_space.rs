//! Wigner functions, quadrature-basis density matrices and marginals.
//!
//! The quadrature at angle `θ` is `x_θ = x cosθ + p sinθ`; `θ = 0` is the
//! position basis and `θ = π/2` the momentum basis.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{quadrature_ket, DensityMatrix};
use crate::special::{hermite_functions, hermite_functions_into, laguerre_functions};

/// Uniformly spaced, strictly increasing axis.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadAxis {
    min: f64,
    max: f64,
    points: usize,
}

impl QuadAxis {
    pub fn new(min: f64, max: f64, points: usize) -> Result<Self> {
        if points < 3 {
            return Err(Error::domain(format!("axis needs at least 3 points, got {points}")));
        }
        if !(min.is_finite() && max.is_finite() && max > min) {
            return Err(Error::domain(format!("axis bounds must satisfy min < max, got {min}..{max}")));
        }
        Ok(Self { min, max, points })
    }

    /// −6…6 with 241 points.
    pub fn quadrature_default() -> Self {
        Self { min: -6.0, max: 6.0, points: 241 }
    }

    /// −5…5 with 201 points.
    pub fn wigner_default() -> Self {
        Self { min: -5.0, max: 5.0, points: 201 }
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        (self.max - self.min) / (self.points - 1) as f64
    }

    pub fn value(&self, i: usize) -> f64 {
        if i + 1 == self.points {
            self.max
        } else {
            self.min + i as f64 * self.spacing()
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.value(i)).collect()
    }

    /// Index of the grid point closest to `v`.
    pub fn nearest(&self, v: f64) -> usize {
        let idx = ((v - self.min) / self.spacing()).round();
        idx.clamp(0.0, (self.points - 1) as f64) as usize
    }
}

/// Measurement basis of a quadrature grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum QuadBasis {
    Position,
    Momentum,
    /// Rotated quadrature, angle in radians.
    Angle(f64),
}

impl QuadBasis {
    pub fn theta(self) -> f64 {
        match self {
            QuadBasis::Position => 0.0,
            QuadBasis::Momentum => FRAC_PI_2,
            QuadBasis::Angle(theta) => theta,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            QuadBasis::Position => "position",
            QuadBasis::Momentum => "momentum",
            QuadBasis::Angle(_) => "angle",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadGrid {
    pub axis: QuadAxis,
    pub basis: QuadBasis,
}

impl QuadGrid {
    pub fn new(axis: QuadAxis, basis: QuadBasis) -> Self {
        Self { axis, basis }
    }
}

/// `values[(i, j)] = W(x_i, p_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WignerGrid {
    pub x_axis: QuadAxis,
    pub p_axis: QuadAxis,
    pub values: DMatrix<f64>,
}

impl WignerGrid {
    pub fn min(&self) -> f64 {
        self.values.min()
    }

    pub fn max(&self) -> f64 {
        self.values.max()
    }

    /// Riemann sum of `W dx dp`.
    pub fn riemann_sum(&self) -> f64 {
        self.values.sum() * self.x_axis.spacing() * self.p_axis.spacing()
    }

    /// `W(x, p_j)` along the row of grid points nearest to `p`.
    pub fn cross_section_at_p(&self, p: f64) -> Vec<(f64, f64)> {
        let j = self.p_axis.nearest(p);
        (0..self.x_axis.len())
            .map(|i| (self.x_axis.value(i), self.values[(i, j)]))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# basis=phase-space theta=0")?;
        writeln!(out, "x,p,w")?;
        for i in 0..self.x_axis.len() {
            let x = self.x_axis.value(i);
            for j in 0..self.p_axis.len() {
                writeln!(out, "{:?},{:?},{:?}", x, self.p_axis.value(j), self.values[(i, j)])?;
            }
        }
        Ok(())
    }
}

/// `values[(i, j)] = ρ(q_i, q_j)` in the basis `grid.basis`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadDensityMatrix {
    pub grid: QuadGrid,
    pub values: DMatrix<Complex64>,
}

impl QuadDensityMatrix {
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.grid.axis.len()).map(|i| self.values[(i, i)].re).collect()
    }

    pub fn riemann_trace(&self) -> f64 {
        self.diagonal().iter().sum::<f64>() * self.grid.axis.spacing()
    }

    /// Largest deviation from `ρ(q, q') = conj ρ(q', q)`.
    pub fn hermiticity_residual(&self) -> f64 {
        (&self.values - self.values.adjoint())
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "# basis={} theta={:?}",
            self.grid.basis.label(),
            self.grid.basis.theta().to_degrees()
        )?;
        writeln!(out, "q,q_prime,re,im")?;
        let axis = &self.grid.axis;
        for i in 0..axis.len() {
            for j in 0..axis.len() {
                let v = self.values[(i, j)];
                writeln!(out, "{:?},{:?},{:?},{:?}", axis.value(i), axis.value(j), v.re, v.im)?;
            }
        }
        Ok(())
    }
}

// Terms ρ_{n+k,n} (−1)^n, one vector per off-diagonal order k.
fn wigner_coefficients(rho: &DensityMatrix) -> Vec<Vec<Complex64>> {
    let d = rho.dim();
    (0..d)
        .map(|k| {
            (0..d - k)
                .map(|n| {
                    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                    rho.get(n + k, n) * sign
                })
                .collect()
        })
        .collect()
}

fn wigner_from_coefficients(coeffs: &[Vec<Complex64>], x: f64, p: f64, buf: &mut Vec<f64>) -> f64 {
    let u = 2.0 * (x * x + p * p);
    let phi = p.atan2(x);
    let mut total = 0.0;
    for (k, diag) in coeffs.iter().enumerate() {
        laguerre_functions(k, u, diag.len(), buf);
        let mut acc = Complex64::new(0.0, 0.0);
        for (c, l) in diag.iter().zip(buf.iter()) {
            acc += c * l;
        }
        if k == 0 {
            total += acc.re;
        } else {
            total += 2.0 * (acc * Complex64::from_polar(1.0, -(k as f64) * phi)).re;
        }
    }
    total / PI
}

/// Wigner function at a single point, from the Fock-basis Laguerre expansion.
pub fn wigner_point(rho: &DensityMatrix, x: f64, p: f64) -> f64 {
    let coeffs = wigner_coefficients(rho);
    wigner_from_coefficients(&coeffs, x, p, &mut Vec::new())
}

/// Wigner function on a rectangular grid.
pub fn wigner(rho: &DensityMatrix, x_axis: &QuadAxis, p_axis: &QuadAxis) -> WignerGrid {
    let coeffs = wigner_coefficients(rho);
    let columns: Vec<Vec<f64>> = (0..p_axis.len())
        .into_par_iter()
        .map_init(Vec::new, |buf, j| {
            let p = p_axis.value(j);
            (0..x_axis.len())
                .map(|i| wigner_from_coefficients(&coeffs, x_axis.value(i), p, buf))
                .collect()
        })
        .collect();
    let values = DMatrix::from_fn(x_axis.len(), p_axis.len(), |i, j| columns[j][i]);
    WignerGrid {
        x_axis: x_axis.clone(),
        p_axis: p_axis.clone(),
        values,
    }
}

/// Absolute accuracy requested from the quadrature in the integral oracle.
const ORACLE_TOLERANCE: f64 = 1e-10;

/// Direct evaluation of `W(x, p) = (1/π) ∫ e^{2ixy} ρ(p + y, p − y) dy` over
/// the momentum-basis matrix elements.
pub fn wigner_integral_oracle(rho: &DensityMatrix, x: f64, p: f64) -> Result<f64> {
    let d = rho.dim();
    // ⟨p|n⟩ = (−i)^n ψ_n(p); fold the phases into the matrix once.
    let phase = |n: usize| Complex64::i().powu(n as u32).conj();
    let m = DMatrix::from_fn(d, d, |n, k| phase(n) * rho.get(n, k) * phase(k).conj());
    let integrand = |y: f64| {
        let a = hermite_functions(p + y, d - 1);
        let b = hermite_functions(p - y, d - 1);
        let mut acc = Complex64::new(0.0, 0.0);
        for n in 0..d {
            if a[n] == 0.0 {
                continue;
            }
            for k in 0..d {
                acc += m[(n, k)] * (a[n] * b[k]);
            }
        }
        (Complex64::from_polar(1.0, 2.0 * x * y) * acc).re
    };
    // Hermite functions up to order d−1 are below 1e-16 beyond √(2d) + 8.
    // Unit-width panels keep the oscillatory integrand well resolved.
    let reach = (2.0 * d as f64).sqrt() + 8.0;
    let panels = (reach + p.abs()).ceil() as i64;
    let mut total = 0.0;
    for j in -panels..panels {
        let (a, b) = (j as f64, (j + 1) as f64);
        let out = quadrature::integrate(&integrand, a, b, ORACLE_TOLERANCE);
        if !(out.error_estimate <= ORACLE_TOLERANCE) || !out.integral.is_finite() {
            return Err(Error::Convergence(format!(
                "Wigner integral at ({x}, {p}) on [{a}, {b}] has error estimate {:e}",
                out.error_estimate
            )));
        }
        total += out.integral;
    }
    Ok(total / PI)
}

// Rows Φ[i, n] = ⟨q_i,θ|n⟩.
fn quadrature_rows(theta: f64, axis: &QuadAxis, dim: usize) -> DMatrix<Complex64> {
    let mut phi = DMatrix::zeros(axis.len(), dim);
    for i in 0..axis.len() {
        let ket = quadrature_ket(axis.value(i), theta, dim);
        for n in 0..dim {
            phi[(i, n)] = ket[n].conj();
        }
    }
    phi
}

/// Density matrix `ρ(q, q') = ⟨q_θ|ρ|q'_θ⟩` on a grid.
pub fn rho_quad(rho: &DensityMatrix, theta: f64, axis: &QuadAxis) -> QuadDensityMatrix {
    let phi = quadrature_rows(theta, axis, rho.dim());
    let values = &phi * rho.elements() * phi.adjoint();
    let basis = if theta == 0.0 {
        QuadBasis::Position
    } else if theta == FRAC_PI_2 {
        QuadBasis::Momentum
    } else {
        QuadBasis::Angle(theta)
    };
    QuadDensityMatrix {
        grid: QuadGrid::new(axis.clone(), basis),
        values,
    }
}

/// Single element `⟨q_θ|ρ|q'_θ⟩`.
pub fn rho_quad_element(rho: &DensityMatrix, theta: f64, q: f64, q_prime: f64) -> Complex64 {
    let d = rho.dim();
    let bra = quadrature_ket(q, theta, d);
    let ket = quadrature_ket(q_prime, theta, d);
    let mut acc = Complex64::new(0.0, 0.0);
    for n in 0..d {
        for m in 0..d {
            acc += bra[n].conj() * rho.get(n, m) * ket[m];
        }
    }
    acc
}

/// `Re[e^{−i(n−m)θ} ρ_{nm}]`: the marginal at angle θ is `ψᵀ A ψ` with the
/// real Hermite functions `ψ`.
pub(crate) fn rotated_real_part(rho: &DensityMatrix, theta: f64) -> DMatrix<f64> {
    let d = rho.dim();
    DMatrix::from_fn(d, d, |n, m| {
        let phase = Complex64::from_polar(1.0, -((n as f64) - (m as f64)) * theta);
        (rho.get(n, m) * phase).re
    })
}

pub(crate) fn quadratic_form(a: &DMatrix<f64>, psi: &[f64]) -> f64 {
    let d = psi.len();
    let mut total = 0.0;
    for m in 0..d {
        let mut col = 0.0;
        for n in 0..d {
            col += a[(n, m)] * psi[n];
        }
        total += col * psi[m];
    }
    total
}

/// Marginal density `Pr(q | θ)` at arbitrary points.
pub fn marginal_at(rho: &DensityMatrix, theta: f64, points: &[f64]) -> Vec<f64> {
    let a = rotated_real_part(rho, theta);
    let mut psi = vec![0.0; rho.dim()];
    points
        .iter()
        .map(|&q| {
            hermite_functions_into(q, &mut psi);
            quadratic_form(&a, &psi)
        })
        .collect()
}

/// Marginal density `Pr(q | θ)` on an axis; θ in radians.
pub fn marginal(rho: &DensityMatrix, theta: f64, axis: &QuadAxis) -> Vec<f64> {
    marginal_at(rho, theta, &axis.values())
}

/// Marginals over a list of angles in degrees.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginalSweep {
    pub thetas_deg: Vec<f64>,
    pub axis: QuadAxis,
    /// `values[t][i] = Pr(q_i | θ_t)`.
    pub values: Vec<Vec<f64>>,
}

impl MarginalSweep {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# basis=angle theta=sweep")?;
        writeln!(out, "theta_deg,q,probability")?;
        for (t, row) in self.thetas_deg.iter().zip(&self.values) {
            for (i, v) in row.iter().enumerate() {
                writeln!(out, "{:?},{:?},{:?}", t, self.axis.value(i), v)?;
            }
        }
        Ok(())
    }
}

pub fn marginal_sweep(rho: &DensityMatrix, thetas_deg: &[f64], axis: &QuadAxis) -> MarginalSweep {
    let values = thetas_deg
        .par_iter()
        .map(|t| marginal(rho, t.to_radians(), axis))
        .collect();
    MarginalSweep {
        thetas_deg: thetas_deg.to_vec(),
        axis: axis.clone(),
        values,
    }
}

/// `W(0, 0) = π⁻¹ Σ_n (−1)^n ρ_{nn}`.
pub fn origin_parity(rho: &DensityMatrix) -> f64 {
    let parity: f64 = (0..rho.dim())
        .map(|n| if n % 2 == 0 { rho.get(n, n).re } else { -rho.get(n, n).re })
        .sum();
    parity / PI
}

/// Momentum-basis interference between the two lobes of a cat-like state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CatCoherence {
    /// Positions of the diagonal maxima for `p < 0` and `p > 0`.
    pub peaks: [f64; 2],
    /// `ρ(p, p)` at each peak.
    pub diagonal: [f64; 2],
    /// `Re ρ(p, −p)` at each peak.
    pub off_diagonal: [f64; 2],
}

impl CatCoherence {
    /// Smallest `Re ρ(p, −p) / ρ(p, p)` over the two peaks.
    pub fn min_ratio(&self) -> f64 {
        (0..2)
            .map(|i| self.off_diagonal[i] / self.diagonal[i])
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest `|Re ρ(p, −p)| / ρ(p, p)` over the two peaks.
    pub fn max_abs_ratio(&self) -> f64 {
        (0..2)
            .map(|i| (self.off_diagonal[i] / self.diagonal[i]).abs())
            .fold(0.0, f64::max)
    }
}

/// Locates the momentum-marginal maxima on each side of `p = 0` (grid search
/// on `axis`) and reads the anti-diagonal `Re ρ(p, −p)` there.
pub fn cat_coherence(rho: &DensityMatrix, axis: &QuadAxis) -> CatCoherence {
    let points = axis.values();
    let density = marginal_at(rho, FRAC_PI_2, &points);
    let argmax = |keep: &dyn Fn(f64) -> bool| {
        points
            .iter()
            .zip(&density)
            .filter(|(p, _)| keep(**p))
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(p, _)| *p)
            .unwrap_or(0.0)
    };
    let peaks = [argmax(&|p| p < 0.0), argmax(&|p| p > 0.0)];
    let mut diagonal = [0.0; 2];
    let mut off_diagonal = [0.0; 2];
    for (i, &p) in peaks.iter().enumerate() {
        diagonal[i] = rho_quad_element(rho, FRAC_PI_2, p, p).re;
        off_diagonal[i] = rho_quad_element(rho, FRAC_PI_2, p, -p).re;
    }
    CatCoherence {
        peaks,
        diagonal,
        off_diagonal,
    }
}
