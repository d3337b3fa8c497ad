//! Real-variable tools around `|D|^l`: the hypersingular quadrature, the
//! fractional difference `𝒟_s`, the product-rule commutator, the maximal
//! function, Hedberg's inequality and the Mikhlin bounds on `m_l`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, FormboundError, Result};
use crate::periodic::{pair_guard, PeriodicKernel};
use crate::spectral::{apply_symbol, gap_ml, Field, Grid, Multiplier, Symbol};
use crate::stencil::BallStencil;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub fitted_constant: f64,
    /// `≤ 0` when every sample respects the inequality with the fitted constant.
    pub max_violation: f64,
    pub sample_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RieszQuadrature {
    pub field: Field,
    /// The constant `c(n,l)` fitted on the lowest plane wave.
    pub calibration: f64,
}

fn check_order(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        return invalid(format!("{name} must lie in (0, 1), got {v}"));
    }
    Ok(())
}

/// `c(n,l)` such that the quadrature reproduces `|ξ|^l` on the plane wave
/// `e^{iπx₀/L}`.
fn calibrate(grid: &Grid, kernel: &PeriodicKernel, l: f64) -> f64 {
    let xi = std::f64::consts::PI / grid.half_length();
    let h = grid.spacing();
    let mut mu = 0.0;
    for z in 1..grid.len() {
        let idx = grid.multi_index(z);
        let z0 = crate::spectral::signed_index(idx[0], grid.points()) as f64 * h;
        mu += kernel.at(z) * (1.0 - (xi * z0).cos());
    }
    xi.powf(l) / (mu * grid.cell_volume())
}

fn riesz_parts(u: &Field, kernel: &PeriodicKernel, c: f64) -> Result<Field> {
    let re = u.real_parts();
    let dr = kernel.pair_sum(|x, y| re[x] - re[y]);
    let values: Vec<Complex64> = if u.max_imag() == 0.0 {
        dr.into_iter().map(|v| Complex64::new(c * v, 0.0)).collect()
    } else {
        let im: Vec<f64> = u.values().iter().map(|z| z.im).collect();
        let di = kernel.pair_sum(|x, y| im[x] - im[y]);
        dr.into_iter()
            .zip(di)
            .map(|(a, b)| Complex64::new(c * a, c * b))
            .collect()
    };
    Field::from_complex(*u.grid(), values)
}

/// `|D|^l u(x) = c(n,l) Σ_{y≠x} (u(x) − u(y)) K(x−y) h^n` with the periodized
/// kernel `K(z) = Σ_m |z + 2Lm|^{-(n+l)}`.
pub fn riesz_quadrature(u: &Field, l: f64) -> Result<RieszQuadrature> {
    u.require_space()?;
    check_order("l", l)?;
    let g = *u.grid();
    pair_guard(&g, "Riesz quadrature")?;
    let kernel = PeriodicKernel::new(&g, g.dim() as f64 + l)?;
    let c = calibrate(&g, &kernel, l);
    Ok(RieszQuadrature {
        field: riesz_parts(u, &kernel, c)?,
        calibration: c,
    })
}

/// `𝒟_s u(x) = (Σ_{y≠x} |u(x) − u(y)|² K_{n+2s}(x−y) h^n)^{1/2}`.
pub fn fractional_difference(u: &Field, s: f64) -> Result<Field> {
    u.require_space()?;
    check_order("s", s)?;
    let g = *u.grid();
    pair_guard(&g, "fractional difference")?;
    let kernel = PeriodicKernel::new(&g, g.dim() as f64 + 2.0 * s)?;
    let v = u.values();
    let sums = kernel.pair_sum(|x, y| (v[x] - v[y]).norm_sqr());
    Field::from_real(g, &sums.into_iter().map(|s| s.max(0.0).sqrt()).collect::<Vec<_>>())
}

/// Fits `c` in `| |D|^l(γu) − γ|D|^l u − u|D|^l γ | ≤ c 𝒟_{l/2}u · 𝒟_{l/2}γ`.
pub fn commutator_check(gamma: &Field, u: &Field, l: f64) -> Result<FitReport> {
    gamma.require_space()?;
    u.require_space()?;
    gamma.grid().ensure_same(u.grid())?;
    check_order("l", l)?;
    let g = *u.grid();
    pair_guard(&g, "commutator check")?;
    let kernel = PeriodicKernel::new(&g, g.dim() as f64 + l)?;
    let c = calibrate(&g, &kernel, l);
    let prod = gamma.zip_with(u, |a, b| a * b)?;
    let d_prod = riesz_parts(&prod, &kernel, c)?;
    let d_u = riesz_parts(u, &kernel, c)?;
    let d_g = riesz_parts(gamma, &kernel, c)?;
    let du = fractional_difference(u, 0.5 * l)?.real_parts();
    let dg = fractional_difference(gamma, 0.5 * l)?.real_parts();

    let max = |f: &Field| f.max_modulus();
    let lhs_scale = max(&d_prod) + max(gamma) * max(&d_u) + max(u) * max(&d_g);
    let rhs: Vec<f64> = du.iter().zip(&dg).map(|(a, b)| a * b).collect();
    let rhs_scale = rhs.iter().fold(0.0f64, |m, &v| m.max(v));
    let tau_l = 1e-12 * lhs_scale;
    let tau_r = 1e-12 * rhs_scale;

    let mut fitted = 0.0f64;
    let mut violation = f64::NEG_INFINITY;
    let mut samples = 0;
    for x in 0..g.len() {
        let lhs = (d_prod.values()[x] - gamma.values()[x] * d_u.values()[x]
            - u.values()[x] * d_g.values()[x])
            .norm();
        let r = rhs[x];
        if r <= tau_r {
            if lhs > tau_l {
                violation = violation.max(lhs - tau_l);
            }
            continue;
        }
        samples += 1;
        fitted = fitted.max(lhs / r);
    }
    Ok(FitReport {
        fitted_constant: fitted,
        max_violation: if violation.is_finite() { violation } else { 0.0 },
        sample_count: samples,
    })
}

/// Radii `h, 2h, 4h, …` not exceeding `L`.
pub fn maximal_ladder(grid: &Grid) -> Vec<f64> {
    let mut out = Vec::new();
    let mut r = grid.spacing();
    while r <= grid.half_length() * (1.0 + 1e-12) {
        out.push(r);
        r *= 2.0;
    }
    out
}

/// `Mf(x) = max_r |B_r|^{-1} ∫_{B_r(x)} |f|` over open lattice balls with
/// radii from [`maximal_ladder`]; the radius-`h` ball is the cell itself.
/// The mean over the whole torus is included as the last rung, so points
/// that no ladder ball connects to the support still see its mass.
pub fn maximal_function(f: &Field) -> Result<Field> {
    f.require_space()?;
    let g = *f.grid();
    let abs = f.moduli();
    let mean = abs.iter().sum::<f64>() / g.len() as f64;
    let mut best: Vec<f64> = abs.iter().map(|&v| v.max(mean)).collect();
    let lattice = g.lattice();
    let mut spectrum: Vec<Complex64> = abs.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    crate::spectral::fft::fft_nd(&mut spectrum, lattice.shape(), false);
    for r in maximal_ladder(&g).into_iter().skip(1) {
        let ball = BallStencil::open(&g, r)?;
        let mut indicator = vec![Complex64::new(0.0, 0.0); g.len()];
        for o in ball.offsets() {
            indicator[g.shifted(0, &o[..g.dim()])] = Complex64::new(1.0, 0.0);
        }
        crate::spectral::fft::fft_nd(&mut indicator, lattice.shape(), false);
        let mut conv: Vec<Complex64> = spectrum
            .iter()
            .zip(&indicator)
            .map(|(a, b)| a * b / g.len() as f64)
            .collect();
        crate::spectral::fft::fft_nd(&mut conv, lattice.shape(), true);
        let count = ball.len() as f64;
        for (b, c) in best.iter_mut().zip(&conv) {
            *b = b.max(c.re.max(0.0) / count);
        }
    }
    Field::from_real(g, &best)
}

fn require_nonnegative(g: &Field) -> Result<Vec<f64>> {
    g.require_space()?;
    let scale = g.max_modulus();
    if g.max_imag() > 1e-12 * scale {
        return invalid("expected a real field");
    }
    let re = g.real_parts();
    let min = re.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < 0.0 {
        return Err(FormboundError::Negative { min });
    }
    Ok(re)
}

/// Fits `c` in `J_{1/4} g ≤ c (Mg)^{1/2} (J_{1/2} g)^{1/2}` for `g ≥ 0`.
pub fn hedberg_check(g: &Field) -> Result<FitReport> {
    let re = require_nonnegative(g)?;
    let grid = *g.grid();
    let field = Field::from_real(grid, &re)?;
    let lhs = apply_symbol(&field, Symbol::Bessel { s: 0.25 })?.real_parts();
    let j = apply_symbol(&field, Symbol::Bessel { s: 0.5 })?.real_parts();
    let m = maximal_function(&field)?.real_parts();
    let rhs: Vec<f64> = m.iter().zip(&j).map(|(a, b)| (a * b.max(0.0)).sqrt()).collect();
    let tau_r = 1e-12 * rhs.iter().fold(0.0f64, |a, &b| a.max(b));
    let tau_l = 1e-12 * lhs.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let mut fitted = 0.0f64;
    let mut violation = f64::NEG_INFINITY;
    let mut samples = 0;
    for (&a, &b) in lhs.iter().zip(&rhs) {
        if b <= tau_r {
            if a > tau_l {
                violation = violation.max(a - tau_l);
            }
            continue;
        }
        samples += 1;
        fitted = fitted.max(a / b);
    }
    Ok(FitReport {
        fitted_constant: fitted,
        max_violation: if violation.is_finite() { violation } else { 0.0 },
        sample_count: samples,
    })
}

/// Central finite-difference radial derivative of order 0, 1 or 2 of `m_l`.
pub fn mikhlin_derivative(l: f64, r: f64, order: usize) -> f64 {
    let d = 1e-3 * r;
    let m = |x: f64| gap_ml(x, l);
    match order {
        0 => m(r),
        1 => (m(r + d) - m(r - d)) / (2.0 * d),
        _ => (m(r + d) - 2.0 * m(r) + m(r - d)) / (d * d),
    }
}

/// The profile each derivative is compared with: `(1+r)^{l-2}` for the
/// value, `r^{l-k}(1+r)^{-2}` for the `k`-th derivative.
pub fn mikhlin_bound(l: f64, r: f64, order: usize) -> f64 {
    if order == 0 {
        (1.0 + r).powf(l - 2.0)
    } else {
        r.powf(l - order as f64) * (1.0 + r).powi(-2)
    }
}

/// Fits the constant in `|∂_r^k m_l(r)| ≤ C · bound_k(r)` for `k ≤ min(n, 2)`
/// and reports negativity of `m_l` as the violation.
pub fn mikhlin_check(l: f64, sample_radii: &[f64], dim: usize) -> Result<FitReport> {
    if !(l > 0.0 && l <= 2.0) {
        return invalid(format!("l must lie in (0, 2], got {l}"));
    }
    if sample_radii.is_empty() || sample_radii.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
        return invalid("sample radii must be positive and finite");
    }
    if dim == 0 {
        return invalid("dimension must be positive");
    }
    let orders = dim.min(2);
    let mut fitted = 0.0f64;
    let mut violation = f64::NEG_INFINITY;
    let mut samples = 0;
    for &r in sample_radii {
        violation = violation.max(-gap_ml(r, l));
        for k in 0..=orders {
            let ratio = mikhlin_derivative(l, r, k).abs() / mikhlin_bound(l, r, k);
            if !ratio.is_finite() {
                violation = f64::INFINITY;
                continue;
            }
            fitted = fitted.max(ratio);
            samples += 1;
        }
    }
    Ok(FitReport {
        fitted_constant: fitted,
        max_violation: violation,
        sample_count: samples,
    })
}

/// Spectral `|D|^l u`, for comparison with [`riesz_quadrature`].
pub fn spectral_riesz(u: &Field, l: f64) -> Result<Field> {
    u.require_space()?;
    let m = Multiplier::from_symbol(u.grid().lattice(), Symbol::Riesz { s: l });
    Field::from_complex(*u.grid(), m.apply(u.values()))
}
