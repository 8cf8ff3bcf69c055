use std::f64::consts::PI;

use rayon::prelude::*;

use super::grid::{cumulative_integral, integrate_checked};
use super::{clamp_probability, Horizon, OccupationDistribution};
use crate::levy_models::ModelSpec;
use crate::numerics::{lower_incomplete_gamma, normal_sf, Quadrature, Tolerance};
use crate::scale::{lambda_delayed_deriv, ScaleContext};
use crate::{Error, Result};

pub(crate) fn check_inner_grid(t: f64, grid: &[f64]) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::DomainError(format!("horizon must be > 0, got {t}")));
    }
    super::validate_grid(grid)?;
    if grid[0] <= 0.0 || *grid.last().unwrap_or(&t) >= t {
        return Err(Error::DomainError(format!("grid must lie inside (0, {t})")));
    }
    Ok(())
}

/// `∫_0^t f` for a density with `1/√` singularities at both ends.
fn full_mass<F: Fn(f64) -> Result<f64>>(f: &F, t: f64, tol: Tolerance) -> Result<f64> {
    let h = 0.5 * t;
    let left = integrate_checked(f, 0.0, h, true, tol)?;
    let right = integrate_checked(&|u: f64| f(t - u), 0.0, h, true, tol)?;
    Ok(left + right)
}

/// Assembles a fixed-horizon law whose mass not covered by `atom0` and
/// the density is reported at `t`.
pub(crate) fn fixed_law<F>(atom0: f64, t: f64, grid: &[f64], f: F, tol: Tolerance) -> Result<OccupationDistribution>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let density = grid.par_iter().map(|s| f(*s)).collect::<Result<Vec<_>>>()?;
    let acc = cumulative_integral(&f, grid, &[0.5 * t], tol)?;
    let cdf = acc.into_iter().map(|a| atom0 + a).collect();
    let total = atom0 + full_mass(&f, t, tol)?;
    let mut d = OccupationDistribution::assemble(atom0, grid.to_vec(), density, cdf, Horizon::Fixed { t }, vec![])?;
    d.mass_at_t = Some(clamp_probability(1.0 - total, "mass at t")?);
    Ok(d)
}

/// `(2/σ²)[σe^{-μ²s/2σ²}/√(2πs) - μN̄(μ√s/σ)]`, the derivative in `x` of
/// the rate-0 delayed scale function at 0 for Brownian motion with drift.
pub(crate) fn bm_lambda_prime(mu: f64, sigma: f64, s: f64) -> f64 {
    let s2 = sigma * sigma;
    2.0 / s2 * (sigma * (-mu * mu * s / (2.0 * s2)).exp() / (2.0 * PI * s).sqrt() - mu * normal_sf(mu * s.sqrt() / sigma))
}

/// `ν + σe^{-ν²u/2σ²}/√(2πu) - νN̄(ν√u/σ)`, whose Laplace transform in `u`
/// is `1/Φ_λ` for Brownian motion with drift `ν`.
pub(crate) fn drift_tail(nu: f64, sigma: f64, u: f64) -> f64 {
    let s2 = sigma * sigma;
    nu + sigma * (-nu * nu * u / (2.0 * s2)).exp() / (2.0 * PI * u).sqrt() - nu * normal_sf(nu * u.sqrt() / sigma)
}

/// Law of the time Brownian motion with drift `μ >= 0`, started at 0,
/// spends below 0 during `[0, t]`.
pub fn fixed_horizon_bm(mu: f64, sigma: f64, t: f64, s_grid: &[f64]) -> Result<OccupationDistribution> {
    if !(mu >= 0.0) || !(sigma > 0.0) || !mu.is_finite() || !sigma.is_finite() {
        return Err(Error::DomainError(format!("needs mu >= 0 and sigma > 0, got ({mu}, {sigma})")));
    }
    check_inner_grid(t, s_grid)?;
    let f = |s: f64| Ok(bm_lambda_prime(mu, sigma, s) * drift_tail(mu, sigma, t - s));
    fixed_law(0.0, t, s_grid, f, Tolerance::default())
}

/// `P(O_t > r)` for driftless Brownian motion: `1 - (2/π)asin√(r/t)`.
pub fn arcsine_tail(t: f64, r: f64) -> Result<f64> {
    if !(t > 0.0) || !(r > 0.0 && r < t) {
        return Err(Error::DomainError(format!("arcsine tail needs 0 < r < t, got r={r}, t={t}")));
    }
    Ok(1.0 - 2.0 / PI * (r / t).sqrt().asin())
}

/// `P(O_t = 0)` for the Cramér–Lundberg model with exponential claims,
/// started at 0.
pub fn cl_atom_a_t(c: f64, eta: f64, alpha: f64, t: f64) -> Result<f64> {
    let model = ModelSpec::cl(c, eta, alpha)?;
    model.require_net_profit(0.0)?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::DomainError(format!("t must be >= 0, got {t}")));
    }
    let ca = c * alpha;
    let g = (ca * eta).sqrt();
    // u = cos θ removes the square-root endpoints.
    let f = |th: f64| {
        let (s, u) = th.sin_cos();
        s * s * (-(eta + ca) * t - 2.0 * g * t * u).exp() / (eta + ca + 2.0 * g * u)
    };
    let inner = Quadrature::new(Tolerance::fine()).integrate(f, 0.0, PI)?.value;
    clamp_probability((1.0 - eta / ca).max(0.0) + 2.0 * eta / PI * inner, "a_t")
}

/// Law of the time the Cramér–Lundberg model started at 0 spends below 0
/// during `[0, t]`: an atom `a_t` at 0 and density `cΛ'(0,s)a_{t-s}`.
pub fn fixed_horizon_cl(c: f64, eta: f64, alpha: f64, t: f64, s_grid: &[f64]) -> Result<OccupationDistribution> {
    let model = ModelSpec::cl(c, eta, alpha)?;
    model.require_net_profit(0.0)?;
    check_inner_grid(t, s_grid)?;
    let ctx = ScaleContext::new(&model, 0.0)?;
    let f = |s: f64| Ok(c * lambda_delayed_deriv(&ctx, 0.0, s)? * cl_atom_a_t(c, eta, alpha, t - s)?);
    fixed_law(cl_atom_a_t(c, eta, alpha, t)?, t, s_grid, f, ctx.tolerance())
}

/// `Λ'(0, s)` at rate 0 for the Cramér–Lundberg model from its
/// incomplete-gamma series for `∫_0^∞ z P(X_s ∈ dz)`.
pub fn cl_lambda_prime_series(c: f64, eta: f64, alpha: f64, s: f64) -> Result<f64> {
    ModelSpec::cl(c, eta, alpha)?;
    if !(s > 0.0) {
        return Err(Error::DomainError(format!("s must be > 0, got {s}")));
    }
    let b = alpha * c * s;
    let es = eta * s;
    let mut sum = 0.0;
    // (ηs)^{m+1}/(m!(m+1)!) built incrementally.
    let mut coef = es;
    for m in 0..2000u32 {
        let mf = f64::from(m);
        let term = coef * (c * s * lower_incomplete_gamma(mf + 1.0, b)? - lower_incomplete_gamma(mf + 2.0, b)? / alpha);
        sum += term;
        if m > 2 && term.abs() < 1e-17 * sum.abs().max(1e-300) {
            let positive = (-es).exp() * (c * s + sum);
            return Ok(alpha / (c * s) * (positive - (c - eta / alpha) * s));
        }
        coef *= es / ((mf + 1.0) * (mf + 2.0));
    }
    Err(Error::SeriesNotConverged(format!("positive-part series at s = {s}")))
}
