use statrs::function::gamma::gamma;

use crate::error::{invalid, Result};
use crate::quadrature::integrate;

/// Radial Bessel kernel `G_l` of `(-Δ+1)^{-l/2}` on `ℝ^n` at radius `r`.
///
/// Inverting the symbol through `(1+|ξ|²)^{-l/2} = Γ(l/2)^{-1} ∫ e^{-t(1+|ξ|²)} t^{l/2-1} dt`
/// gives `G_l(r) = (4π)^{-n/2} Γ(l/2)^{-1} ∫_0^∞ e^{-t - r²/(4t)} t^{(l-n)/2-1} dt`,
/// which is integrated in `s = ln t` where the integrand decays
/// double-exponentially at both ends.
pub fn bessel_kernel_g(l: f64, n: usize, r: f64) -> Result<f64> {
    if !(l > 0.0 && l < n as f64 + 1.0) {
        return invalid(format!("kernel order must lie in (0, n+1), got {l}"));
    }
    if !(r > 0.0 && r.is_finite()) {
        return invalid(format!("radius must be positive, got {r}"));
    }
    let cutoff = 745.0f64;
    let lo = (r * r / (4.0 * cutoff)).ln();
    let hi = cutoff.ln();
    let power = 0.5 * (l - n as f64);
    let r2q = 0.25 * r * r;
    let integrand = |s: f64| {
        let t = s.exp();
        (-t - r2q / t + power * s).exp()
    };
    // Scale-aware tolerance: the integral grows like r^{l-n} as r → 0.
    let q = integrate(integrand, lo, hi, 1e-14, 1e-11, 4000)?;
    let prefactor = (4.0 * std::f64::consts::PI).powf(-0.5 * n as f64) / gamma(0.5 * l);
    Ok(prefactor * q.value)
}
