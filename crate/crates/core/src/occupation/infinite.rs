use rayon::prelude::*;

use super::grid::{cumulative_integral, integrate_checked, validate_grid};
use super::{clamp_probability, Horizon, OccupationDistribution};
use crate::levy_models::ModelSpec;
use crate::scale::{lambda_delayed_deriv, lambda_deriv_atom, z_scale, ScaleContext};
use crate::{Error, Result};

/// Rate-0 context after checking `E[X_1] > 0`.
fn profit_context(model: &ModelSpec) -> Result<(ScaleContext, f64)> {
    let drift = model.require_net_profit(0.0)?;
    Ok((ScaleContext::new(model, 0.0)?, drift))
}

fn start_terms(ctx: &ScaleContext, x: f64) -> Result<(f64, Option<(f64, f64)>)> {
    if !x.is_finite() {
        return Err(Error::DomainError(format!("start must be finite, got {x}")));
    }
    let w = if x < 0.0 { 0.0 } else { ctx.w(x)? };
    Ok((w, lambda_deriv_atom(ctx, x)?))
}

fn deriv(ctx: &ScaleContext, x: f64, s: f64) -> Result<f64> {
    lambda_delayed_deriv(ctx, x, s.max(1e-12))
}

/// `∫_0^r Λ'(x, s) ds`, point mass included.
fn deriv_integral(ctx: &ScaleContext, x: f64, r: f64, atom: Option<(f64, f64)>) -> Result<f64> {
    let tol = ctx.tolerance();
    let mut cuts = vec![0.0];
    cuts.extend(atom.iter().map(|a| a.0).filter(|s| *s < r));
    cuts.push(r);
    let mut v = 0.0;
    for w in cuts.windows(2) {
        v += integrate_checked(&|s| deriv(ctx, x, s), w[0], w[1], w[0] == 0.0, tol)?;
    }
    Ok(v + atom.filter(|a| a.0 <= r).map_or(0.0, |a| a.1))
}

/// Law of the total time spent below 0, under `E[X_1] > 0`.
pub fn dist_infinite(model: &ModelSpec, x: f64, y_grid: &[f64]) -> Result<OccupationDistribution> {
    validate_grid(y_grid)?;
    let (ctx, drift) = profit_context(model)?;
    let (w, atom) = start_terms(&ctx, x)?;
    let atom0 = drift * w;
    let density = y_grid
        .par_iter()
        .map(|y| Ok(drift * deriv(&ctx, x, *y)?))
        .collect::<Result<Vec<_>>>()?;
    let breaks: Vec<f64> = atom.iter().map(|a| a.0).collect();
    let acc = cumulative_integral(|s| deriv(&ctx, x, s), y_grid, &breaks, ctx.tolerance())?;
    let cdf = y_grid
        .iter()
        .zip(acc)
        .map(|(y, a)| atom0 + drift * (a + atom.filter(|t| t.0 <= *y).map_or(0.0, |t| t.1)))
        .collect();
    let interior = atom.map(|(s0, m)| (s0, drift * m)).into_iter().collect();
    OccupationDistribution::assemble(atom0, y_grid.to_vec(), density, cdf, Horizon::Infinite, interior)
}

/// `P_x(σ_r < ∞)`: the probability that the time spent below 0 ever
/// exceeds `r`.
pub fn prob_inverse_occupation(model: &ModelSpec, x: f64, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::DomainError(format!("r must be > 0, got {r}")));
    }
    let (ctx, drift) = profit_context(model)?;
    let (w, atom) = start_terms(&ctx, x)?;
    clamp_probability(1.0 - drift * (w + deriv_integral(&ctx, x, r, atom)?), "inverse occupation probability")
}

/// Probability of Parisian ruin when each excursion below 0 is allowed an
/// independent exponential delay of rate `q`.
pub fn prob_parisian_exp_delay(model: &ModelSpec, x: f64, q: f64) -> Result<f64> {
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::DomainError(format!("q must be > 0, got {q}")));
    }
    let (ctx, drift) = profit_context(model)?;
    let phi_q = model.phi(q)?;
    clamp_probability(1.0 - drift * phi_q / q * z_scale(&ctx, x, phi_q)?, "Parisian ruin probability")
}

/// `P(-D̄_s < x)` for the future drawdown extreme at `s`; equal to the
/// cdf of the infinite-horizon occupation started at `x`, evaluated at `s`.
pub fn future_drawdown_cdf(model: &ModelSpec, s: f64, x: f64) -> Result<f64> {
    Ok(1.0 - prob_inverse_occupation(model, x, s)?)
}
