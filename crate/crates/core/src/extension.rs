//! Lifting `γ` on `ℝ^n` to the single layer `γ⊗δ` on `ℝ^{n+1}` and the
//! trace identity `Tr J_{ε+3/2}^{(n+1)}(γ⊗δ) = c_ε J_{ε+1/2}^{(n)} γ`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, FormboundError, Result};
use crate::formnorm::{estimate_form_norm, sandwich_norm, NormEstimate, DEFAULT_SEED};
use crate::quadrature::integrate;
use crate::spectral::{apply_symbol, Field, Grid, Lattice, Multiplier, Symbol};

/// Largest number of lifted cells accepted.
pub const LIFT_LIMIT: usize = 1 << 24;

/// Values on the `(n+1)`-dimensional lattice with the base spacing `h` and
/// `transverse` points along the last axis.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedField {
    base: Grid,
    transverse: usize,
    values: Vec<Complex64>,
}

impl LiftedField {
    pub fn base(&self) -> &Grid {
        &self.base
    }

    pub fn transverse_points(&self) -> usize {
        self.transverse
    }

    pub fn lattice(&self) -> Lattice {
        let mut shape = self.base.shape();
        shape.push(self.transverse);
        Lattice::new(shape, self.base.spacing())
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Transverse index of the hyperplane `x_{n+1} = 0`.
    pub fn plane_index(&self) -> usize {
        self.transverse / 2
    }

    /// `h^{n+1} Σ` of the lifted values.
    pub fn total(&self) -> Complex64 {
        let h = self.base.spacing();
        self.values.iter().sum::<Complex64>() * h.powi(self.base.dim() as i32 + 1)
    }

    /// Restriction to the hyperplane `x_{n+1} = 0` of `values`, laid out
    /// like this lift.
    pub fn slice(&self, values: &[Complex64]) -> Result<Field> {
        let t = self.transverse;
        let j = self.plane_index();
        let plane: Vec<Complex64> = (0..self.base.len()).map(|i| values[i * t + j]).collect();
        Field::from_complex(self.base, plane)
    }
}

/// `γ⊗δ` with as many transverse points as the base grid has per axis.
pub fn tensor_delta(gamma: &Field) -> Result<LiftedField> {
    tensor_delta_with(gamma, gamma.grid().points())
}

/// `γ⊗δ`: `γ(x)/h` on the hyperplane, zero elsewhere.
pub fn tensor_delta_with(gamma: &Field, transverse: usize) -> Result<LiftedField> {
    gamma.require_space()?;
    let g = *gamma.grid();
    if g.dim() > 2 {
        return invalid("the lift needs n + 1 ≤ 3");
    }
    if transverse < 2 || !transverse.is_multiple_of(2) {
        return invalid(format!("transverse points must be even and ≥ 2, got {transverse}"));
    }
    let cells = g.len().saturating_mul(transverse);
    if cells > LIFT_LIMIT {
        return Err(FormboundError::CostGuard {
            what: "lifted grid",
            needed: cells as u128,
            limit: LIFT_LIMIT as u128,
        });
    }
    let h = g.spacing();
    let mut values = vec![Complex64::new(0.0, 0.0); cells];
    let j = transverse / 2;
    for (i, v) in gamma.values().iter().enumerate() {
        values[i * transverse + j] = v / h;
    }
    Ok(LiftedField {
        base: g,
        transverse,
        values,
    })
}

/// `c_ε = (2π)^{-1} ∫_ℝ (1+t²)^{-(ε+3/2)/2} dt`, by quadrature in
/// `t = tan θ`, which turns the algebraic tail into a weak endpoint
/// singularity `cos^{ε-1/2} θ`.
pub fn trace_constant(eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 0.5) {
        return invalid(format!("ε must lie in (0, 1/2), got {eps}"));
    }
    let power = eps - 0.5;
    let half_pi = std::f64::consts::FRAC_PI_2;
    let q = integrate(|th: f64| th.cos().powf(power), 0.0, half_pi, 1e-15, 1e-13, 4000)?;
    Ok(2.0 * q.value / (2.0 * std::f64::consts::PI))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceCheck {
    pub rel_error: f64,
    pub fitted_const: f64,
    pub eps: f64,
    pub transverse_points: usize,
}

pub fn trace_identity_check(gamma: &Field, eps: f64) -> Result<TraceCheck> {
    trace_identity_check_with(gamma, eps, gamma.grid().points())
}

/// `‖T − c_ε R‖/‖c_ε R‖` with `T` the hyperplane slice of
/// `J_{ε+3/2}(γ⊗δ)` and `R = J_{ε+1/2} γ`.
pub fn trace_identity_check_with(gamma: &Field, eps: f64, transverse: usize) -> Result<TraceCheck> {
    let c = trace_constant(eps)?;
    let lift = tensor_delta_with(gamma, transverse)?;
    let smoothed = Multiplier::from_symbol(lift.lattice(), Symbol::Bessel { s: eps + 1.5 })
        .apply(lift.values());
    let t = lift.slice(&smoothed)?;
    let r = apply_symbol(gamma, Symbol::Bessel { s: eps + 0.5 })?.scaled(Complex64::new(c, 0.0));
    let denom = r.l2_norm();
    let rel_error = if denom == 0.0 {
        0.0
    } else {
        t.zip_with(&r, |a, b| a - b)?.l2_norm() / denom
    };
    Ok(TraceCheck {
        rel_error,
        fitted_const: c,
        eps,
        transverse_points: transverse,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftedNormCheck {
    pub ratio: f64,
    pub lifted: NormEstimate,
    pub base: NormEstimate,
    /// Both norms vanished; `ratio` is then 1 by convention.
    pub zero: bool,
}

/// `‖J_1 M_{γ⊗δ} J_1‖` on the lift divided by `‖J_{1/2} M_γ J_{1/2}‖`.
pub fn lifted_norm_check(gamma: &Field, tol: f64, max_iter: usize) -> Result<LiftedNormCheck> {
    let lift = tensor_delta(gamma)?;
    let bessel = Symbol::Bessel { s: 1.0 };
    let lifted = sandwich_norm(
        lift.lattice(),
        |x| bessel.eval(x),
        lift.values(),
        tol,
        max_iter,
        DEFAULT_SEED,
    )?;
    let base = estimate_form_norm(gamma, tol, max_iter)?;
    let zero = lifted.value == 0.0 && base.value == 0.0;
    let ratio = if zero {
        1.0
    } else if base.value == 0.0 {
        f64::INFINITY
    } else {
        lifted.value / base.value
    };
    Ok(LiftedNormCheck {
        ratio,
        lifted,
        base,
        zero,
    })
}
