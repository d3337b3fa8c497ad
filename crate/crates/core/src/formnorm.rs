//! Direct estimation of the sharp form-bound constant
//! `‖(-Δ+1)^{-1/4} M_Q (-Δ+1)^{-1/4}‖` and related quantities.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, FormboundError, Result};
use crate::spectral::{Field, Grid, Lattice, Multiplier, Symbol};
use crate::stencil::BallStencil;

pub const DEFAULT_SEED: u64 = 0x5EED_F0B0;

/// Largest `N^n` accepted by [`dense_form_norm`].
pub const DENSE_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMethod {
    PowerIteration,
    Dense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
    /// Relative change of the last eigenvalue estimate of `A*A`.
    pub residual: f64,
    pub method: NormMethod,
    pub converged: bool,
    pub seed: u64,
}

/// One point `(a, b) = (σ(t), t·σ(t))` on the relative form-bound curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormBoundPair {
    pub t: f64,
    pub a: f64,
    pub b: f64,
    pub estimate: NormEstimate,
}

fn random_unit(len: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<Complex64> = (0..len)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    normalize(&mut v);
    v
}

fn euclid_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn normalize(v: &mut [Complex64]) -> f64 {
    let n = euclid_norm(v);
    if n > 0.0 {
        for z in v.iter_mut() {
            *z /= n;
        }
    }
    n
}

/// Power iteration on `A*A` from a seeded random start.
///
/// Stops after two consecutive steps whose eigenvalue estimates differ by
/// less than `tol` relatively; returns `‖A‖ ≈ √λ`.
pub(crate) fn power_norm(
    len: usize,
    apply: impl Fn(&[Complex64]) -> Vec<Complex64>,
    apply_adjoint: impl Fn(&[Complex64]) -> Vec<Complex64>,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<NormEstimate> {
    if !(tol > 0.0) || max_iter == 0 {
        return invalid(format!("need tol > 0 and max_iter ≥ 1, got {tol}, {max_iter}"));
    }
    let mut v = random_unit(len, seed);
    let mut prev: Option<f64> = None;
    let mut streak = 0;
    let mut lambda = 0.0;
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let w = apply(&v);
        lambda = w.iter().map(|z| z.norm_sqr()).sum::<f64>();
        if lambda == 0.0 {
            return Ok(NormEstimate {
                value: 0.0,
                iterations: it,
                residual: 0.0,
                method: NormMethod::PowerIteration,
                converged: true,
                seed,
            });
        }
        if !lambda.is_finite() {
            return invalid("operator produced non-finite values");
        }
        if let Some(p) = prev {
            residual = (lambda - p).abs() / lambda;
            if residual < tol {
                streak += 1;
                if streak >= 2 {
                    return Ok(NormEstimate {
                        value: lambda.sqrt(),
                        iterations: it,
                        residual,
                        method: NormMethod::PowerIteration,
                        converged: true,
                        seed,
                    });
                }
            } else {
                streak = 0;
            }
        }
        prev = Some(lambda);
        v = apply_adjoint(&w);
        normalize(&mut v);
    }
    Ok(NormEstimate {
        value: lambda.sqrt(),
        iterations: max_iter,
        residual,
        method: NormMethod::PowerIteration,
        converged: false,
        seed,
    })
}

/// `‖S M_w S‖` for a real symmetric multiplier `S` on `lattice`.
pub(crate) fn sandwich_norm(
    lattice: Lattice,
    symbol: impl Fn(f64) -> f64,
    weight: &[Complex64],
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<NormEstimate> {
    let s = Multiplier::new(lattice, symbol);
    let conj: Vec<Complex64> = weight.iter().map(|z| z.conj()).collect();
    let op = |v: &[Complex64], w: &[Complex64]| {
        let mut x = s.apply(v);
        for (a, b) in x.iter_mut().zip(w) {
            *a *= b;
        }
        s.apply_in_place(&mut x);
        x
    };
    power_norm(
        weight.len(),
        |v| op(v, weight),
        |v| op(v, &conj),
        tol,
        max_iter,
        seed,
    )
}

/// Sharp form-bound constant `‖J_{1/2} M_Q J_{1/2}‖` with the default seed.
pub fn estimate_form_norm(q: &Field, tol: f64, max_iter: usize) -> Result<NormEstimate> {
    estimate_form_norm_seeded(q, tol, max_iter, DEFAULT_SEED)
}

pub fn estimate_form_norm_seeded(
    q: &Field,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<NormEstimate> {
    q.require_space()?;
    let bessel = Symbol::Bessel { s: 0.5 };
    sandwich_norm(q.grid().lattice(), |x| bessel.eval(x), q.values(), tol, max_iter, seed)
}

/// `‖M_Φ‖_{W^{1/2}_2 → L_2} = ‖J_{1/2} M_{|Φ|²} J_{1/2}‖^{1/2}`.
pub fn estimate_phi_multiplier_norm(phi: &Field, tol: f64, max_iter: usize) -> Result<NormEstimate> {
    estimate_phi_multiplier_norm_seeded(phi, tol, max_iter, DEFAULT_SEED)
}

pub fn estimate_phi_multiplier_norm_seeded(
    phi: &Field,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<NormEstimate> {
    phi.require_space()?;
    let sq: Vec<f64> = phi.squared_moduli();
    let weight = Field::from_real(*phi.grid(), &sq)?;
    let mut est = estimate_form_norm_seeded(&weight, tol, max_iter, seed)?;
    est.value = est.value.sqrt();
    Ok(est)
}

/// For each `t > 0`, `σ(t) = ‖(|ξ|+t)^{-1/2} M_Q (|ξ|+t)^{-1/2}‖`, so that
/// `|⟨Qu,u⟩| ≤ σ(t) ‖(-Δ)^{1/4}u‖² + t σ(t) ‖u‖²`.
pub fn relative_form_bound(
    q: &Field,
    t_list: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<FormBoundPair>> {
    relative_form_bound_seeded(q, t_list, tol, max_iter, DEFAULT_SEED)
}

pub fn relative_form_bound_seeded(
    q: &Field,
    t_list: &[f64],
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<Vec<FormBoundPair>> {
    q.require_space()?;
    t_list
        .iter()
        .map(|&t| {
            if !(t > 0.0 && t.is_finite()) {
                return invalid(format!("shift t must be positive, got {t}"));
            }
            let sym = Symbol::ShiftedRiesz {
                shift: t,
                power: -0.5,
            };
            let est = sandwich_norm(
                q.grid().lattice(),
                |x| sym.eval(x),
                q.values(),
                tol,
                max_iter,
                seed,
            )?;
            Ok(FormBoundPair {
                t,
                a: est.value,
                b: t * est.value,
                estimate: est,
            })
        })
        .collect()
}

/// `|⟨Qu,v⟩ − ¼ Σ_k i^k ⟨Q(u+i^k v), u+i^k v⟩|`.
pub fn polarization_check(q: &Field, u: &Field, v: &Field) -> Result<f64> {
    q.grid().ensure_same(u.grid())?;
    q.grid().ensure_same(v.grid())?;
    let form = |a: &Field, b: &Field| -> Result<Complex64> {
        let qa = a.zip_with(q, |x, y| x * y)?;
        qa.inner(b)
    };
    let direct = form(u, v)?;
    let mut sum = Complex64::new(0.0, 0.0);
    let mut ik = Complex64::new(1.0, 0.0);
    for _ in 0..4 {
        let w = u.zip_with(v, |a, b| a + ik * b)?;
        sum += ik * form(&w, &w)?;
        ik *= Complex64::i();
    }
    Ok((direct - 0.25 * sum).norm())
}

/// `sup_x (∫_{B_1(x)} |f|²)^{1/2}` over closed lattice balls of radius 1.
pub fn l2_unif_norm(f: &Field) -> Result<f64> {
    Ok(l2_unif_with_witness(f)?.0)
}

/// The norm together with the maximising centre (lowest index on ties).
pub fn l2_unif_with_witness(f: &Field) -> Result<(f64, usize)> {
    f.require_space()?;
    let g = f.grid();
    if 2.0 * g.half_length() < 2.0 {
        return Err(FormboundError::DomainTooSmall {
            half_length: g.half_length(),
            required: 1.0,
        });
    }
    let stencil = BallStencil::closed(g, 1.0)?;
    let sums = stencil.sums(g, &f.squared_moduli());
    let (at, best) = crate::stencil::argmax(&sums).expect("non-empty grid");
    Ok(((best * g.cell_volume()).sqrt(), at))
}

/// Volume `h^n · #{o : |o|h ≤ 1}` of the lattice unit ball on this grid.
pub fn lattice_unit_ball_volume(grid: &Grid) -> Result<f64> {
    Ok(BallStencil::closed(grid, 1.0)?.measure(grid))
}

/// Dense matrix `B = J_{1/2}` built from the kernel
/// `κ(z) = N^{-n} Σ_ξ (1+|ξ|²)^{-1/4} cos(ξ·z)` without any FFT.
fn dense_bessel(grid: &Grid) -> DMatrix<f64> {
    let len = grid.len();
    let n = grid.dim();
    let freqs: Vec<[f64; 3]> = (0..len)
        .map(|k| {
            let idx = grid.multi_index(k);
            let mut xi = [0.0; 3];
            for a in 0..n {
                xi[a] = grid.frequency(idx[a]);
            }
            xi
        })
        .collect();
    let weights: Vec<f64> = freqs
        .iter()
        .map(|xi| (1.0 + xi.iter().map(|v| v * v).sum::<f64>()).powf(-0.25))
        .collect();
    let h = grid.spacing();
    let kernel: Vec<f64> = (0..len)
        .into_par_iter()
        .map(|z| {
            let idx = grid.multi_index(z);
            let mut acc = 0.0;
            for (xi, w) in freqs.iter().zip(&weights) {
                let mut phase = 0.0;
                for a in 0..n {
                    phase += xi[a] * idx[a] as f64 * h;
                }
                acc += w * phase.cos();
            }
            acc / len as f64
        })
        .collect();
    let points = grid.points();
    DMatrix::from_fn(len, len, |j, k| {
        let ij = grid.multi_index(j);
        let ik = grid.multi_index(k);
        let mut d = [0usize; 3];
        for a in 0..n {
            d[a] = (ij[a] + points - ik[a]) % points;
        }
        kernel[grid.flat_index(&d)]
    })
}

/// Largest singular value of the assembled `J_{1/2} M_Q J_{1/2}`.
///
/// Only for `N^n ≤ 4096`; used to validate [`estimate_form_norm`].
pub fn dense_form_norm(q: &Field) -> Result<NormEstimate> {
    q.require_space()?;
    let g = q.grid();
    if g.len() > DENSE_LIMIT {
        return Err(FormboundError::CostGuard {
            what: "dense form norm",
            needed: g.len() as u128,
            limit: DENSE_LIMIT as u128,
        });
    }
    let b = dense_bessel(g);
    let len = g.len();
    let value = if q.max_imag() == 0.0 {
        let mut bq = b.clone();
        for k in 0..len {
            let w = q.values()[k].re;
            bq.column_mut(k).scale_mut(w);
        }
        let a = &bq * &b;
        a.singular_values().max()
    } else {
        let bc = b.map(|x| Complex64::new(x, 0.0));
        let mut bq = bc.clone();
        for k in 0..len {
            let w = q.values()[k];
            for z in bq.column_mut(k).iter_mut() {
                *z *= w;
            }
        }
        let a = &bq * &bc;
        a.singular_values().max()
    };
    Ok(NormEstimate {
        value,
        iterations: 0,
        residual: 0.0,
        method: NormMethod::Dense,
        converged: true,
        seed: 0,
    })
}
