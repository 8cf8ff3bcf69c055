use num_complex::Complex64;
use num_traits::Num;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::exp_horizon::ExpHorizonLaw;
use super::grid::{cumulative_integral, integrate_checked, validate_grid};
use super::{Horizon, OccupationDistribution};
use crate::levy_models::ModelSpec;
use crate::scale::{lambda_delayed_deriv, ScaleContext};
use crate::{Error, Result};

/// Above this total weight `Σ|a_k|` a direct mixture loses too many digits.
const MAX_WEIGHT_MASS: f64 = 1e4;

/// A sum of independent exponential times with distinct rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypoExpHorizon {
    rates: Vec<f64>,
}

impl HypoExpHorizon {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if rates.is_empty() || rates.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(Error::DuplicateRates(format!("rates must be positive and finite: {rates:?}")));
        }
        hypoexp_weights(&rates)?;
        Ok(HypoExpHorizon { rates })
    }

    /// The Erlang-like horizon with mean `t` and rates `n(n+1)/(2kt)`.
    pub fn erlang(t: f64, n: usize) -> Result<Self> {
        Self::new(erlang_rates(t, n)?)
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn mean(&self) -> f64 {
        self.rates.iter().map(|r| 1.0 / r).sum()
    }

    pub fn weights(&self) -> Vec<f64> {
        hypoexp_weights(&self.rates).unwrap_or_default()
    }
}

/// `a_k = Π_{j≠k} λ_j/(λ_j - λ_k)`; the law of the sum is `Σ a_k Exp(λ_k)`.
///
/// ```
/// use ruinlab::occupation::hypoexp_weights;
/// let a = hypoexp_weights(&[1.0, 2.0]).unwrap();
/// assert_eq!(a, vec![2.0, -1.0]);
/// ```
pub fn hypoexp_weights<T: Num + Clone>(rates: &[T]) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(rates.len());
    for (k, lk) in rates.iter().enumerate() {
        let mut a = T::one();
        for (j, lj) in rates.iter().enumerate() {
            if j == k {
                continue;
            }
            let gap = lj.clone() - lk.clone();
            if gap.is_zero() {
                return Err(Error::DuplicateRates(format!("rates {k} and {j} coincide")));
            }
            a = a * lj.clone() / gap;
        }
        out.push(a);
    }
    Ok(out)
}

/// Rates `n(n+1)/(2kt)`, `k = 1..n`, whose sum of reciprocals is `t`.
pub fn erlang_rates(t: f64, n: usize) -> Result<Vec<f64>> {
    if !(t > 0.0) || !t.is_finite() || n == 0 {
        return Err(Error::DomainError(format!("erlang rates need t > 0 and n >= 1, got ({t}, {n})")));
    }
    let nf = n as f64;
    Ok((1..=n).map(|k| nf * (nf + 1.0) / (2.0 * k as f64 * t)).collect())
}

/// `Σ_k a_k h(λ_k)` as `(1/π)∫_0^∞ Re[h(z)/(zΠ_j(1 - z/λ_j))] dv` on
/// `z = z₀ + iv`, which avoids the cancellation between large weights.
fn contour_mixture<H>(rates: &[f64], z0: f64, h: H, ctx: &ScaleContext) -> Result<f64>
where
    H: Fn(Complex64) -> Result<Complex64>,
{
    let f = |v: f64| -> Result<f64> {
        let z = Complex64::new(z0, v);
        let mut den = z;
        for l in rates {
            den *= 1.0 - z / l;
        }
        if !den.is_finite() {
            return Ok(0.0);
        }
        Ok((h(z)? / den).re)
    };
    let v = integrate_checked(&f, 0.0, f64::INFINITY, false, ctx.tolerance())?;
    Ok(v / std::f64::consts::PI)
}

/// Occupation law below 0 up to a hypoexponential horizon.
///
/// A start at 0 with several rates goes through a contour integral over
/// the rate; other starts use the weighted mixture of exponential-horizon
/// laws, which fails with `IllConditionedMixture` once `Σ|a_k|` is large.
pub fn density_hypoexp_horizon(
    model: &ModelSpec,
    x: f64,
    horizon: &HypoExpHorizon,
    y_grid: &[f64],
) -> Result<OccupationDistribution> {
    validate_grid(y_grid)?;
    let rates = horizon.rates();
    let weights = horizon.weights();
    let tag = Horizon::Hypoexponential { rates: rates.to_vec() };
    if x == 0.0 && rates.len() > 1 {
        return contour_law(model, horizon, y_grid, tag);
    }
    let weight_mass: f64 = weights.iter().map(|a| a.abs()).sum();
    if weight_mass > MAX_WEIGHT_MASS {
        return Err(Error::IllConditionedMixture { weight_mass });
    }
    let parts = rates
        .par_iter()
        .map(|l| ExpHorizonLaw::new(model, x, *l)?.distribution(y_grid))
        .collect::<Result<Vec<_>>>()?;
    let mut atom0 = 0.0;
    let mut density = vec![0.0; y_grid.len()];
    let mut cdf = vec![0.0; y_grid.len()];
    let mut atoms = Vec::new();
    for (a, p) in weights.iter().zip(&parts) {
        atom0 += a * p.atom0;
        for i in 0..y_grid.len() {
            density[i] += a * p.density[i];
            cdf[i] += a * p.cdf[i];
        }
        for (y0, m) in &p.interior_atoms {
            match atoms.iter_mut().find(|(y, _): &&mut (f64, f64)| *y == *y0) {
                Some(slot) => slot.1 += a * m,
                None => atoms.push((*y0, a * m)),
            }
        }
    }
    OccupationDistribution::assemble(atom0, y_grid.to_vec(), density, cdf, tag, atoms)
}

fn contour_law(
    model: &ModelSpec,
    horizon: &HypoExpHorizon,
    y_grid: &[f64],
    tag: Horizon,
) -> Result<OccupationDistribution> {
    let rates = horizon.rates();
    let lmin = rates.iter().copied().fold(f64::INFINITY, f64::min);
    let z0 = (1.0 / horizon.mean()).min(0.5 * lmin);
    let ctx0 = ScaleContext::new(model, 0.0)?;
    let phi = |z: Complex64| model.phi_complex(z);
    let w0 = ctx0.w(0.0)?;
    let atom0 = if w0 > 0.0 {
        w0 * contour_mixture(rates, z0, |z| Ok(z / phi(z)?), &ctx0)?
    } else {
        0.0
    };
    // Mixture of λe^{-λy}/Φ_λ over the horizon rates.
    let weight = |y: f64| contour_mixture(rates, z0, |z| Ok(z * (-z * y).exp() / phi(z)?), &ctx0);
    let f = |y: f64| -> Result<f64> {
        let y = y.max(1e-12);
        Ok(weight(y)? * lambda_delayed_deriv(&ctx0, 0.0, y)?)
    };
    let density = y_grid.par_iter().map(|y| f(*y)).collect::<Result<Vec<_>>>()?;
    let acc = cumulative_integral(&f, y_grid, &[], ctx0.tolerance())?;
    let cdf = acc.into_iter().map(|a| atom0 + a).collect();
    OccupationDistribution::assemble(atom0, y_grid.to_vec(), density, cdf, tag, vec![])
}

/// Approximates the fixed horizon `t` by `n` exponential stages with
/// mean `t`.
pub fn erlangize(model: &ModelSpec, x: f64, t: f64, n: usize, y_grid: &[f64]) -> Result<OccupationDistribution> {
    density_hypoexp_horizon(model, x, &HypoExpHorizon::erlang(t, n)?, y_grid)
}
