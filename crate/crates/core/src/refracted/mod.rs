//! Occupation below 0 for the refracted process `U`, which moves as
//! `Y = X - δt` above 0 and as `X` below.

mod fixed;

use serde::{Deserialize, Serialize};

use crate::levy_models::ModelSpec;
use crate::occupation::{clamp_probability, integrate_checked, ExpHorizonLaw, OccupationDistribution};
use crate::scale::{deriv_atom_against, lambda_deriv_against, z_scale, ScaleContext};
use crate::{Error, Result};

pub use fixed::{
    bm_survival_deriv, cl_survival, fixed_horizon_refracted_bm, fixed_horizon_refracted_cl, ClSurvival,
};

/// Offset used on either side of the removable pole `q = δΦ_{λ+q}`.
const POLE_OFFSET: f64 = 1e-6;

/// A base process together with a refraction rate `δ >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefractedSpec {
    pub base: ModelSpec,
    pub delta: f64,
}

impl RefractedSpec {
    pub fn new(base: ModelSpec, delta: f64) -> Result<Self> {
        base.validate()?;
        base.drift_shifted(delta)?;
        Ok(RefractedSpec { base, delta })
    }

    /// `Y_t = X_t - δt`.
    pub fn y_model(&self) -> Result<ModelSpec> {
        self.base.drift_shifted(self.delta)
    }

    /// Scale functions of `Y` at rate `q`.
    pub fn y_context(&self, q: f64) -> Result<ScaleContext> {
        ScaleContext::new(&self.y_model()?, q)
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::DomainError(format!("{name} must be > 0, got {v}")));
    }
    Ok(())
}

/// `φ_q`, the right inverse of `θ ↦ ψ(θ) - δθ`.
pub fn varphi(spec: &RefractedSpec, q: f64) -> Result<f64> {
    spec.y_model()?.phi(q)
}

/// `𝕎_q(x)`.
pub fn w_scale_y(spec: &RefractedSpec, q: f64, x: f64) -> Result<f64> {
    spec.y_model()?.w_scale(q, x)
}

/// `ℤ_{δ,q}(x, θ)`, built from `ψ_q(θ) - δθ` and `𝕎_q`.
pub fn z_scale_y(spec: &RefractedSpec, q: f64, x: f64, theta: f64) -> Result<f64> {
    z_scale(&spec.y_context(q)?, x, theta)
}

/// `w^(q)(x; z) = W_q(x-z) + δ1{x>=0}∫_0^x 𝕎_q(x-y)W_q'(y-z)dy`.
pub fn w_u(spec: &RefractedSpec, q: f64, x: f64, z: f64) -> Result<f64> {
    let wx = spec.base.scale_function(q)?;
    let head = if x - z < 0.0 { 0.0 } else { wx.value(x - z)? };
    if x < 0.0 || spec.delta == 0.0 {
        return Ok(head);
    }
    let wy = spec.y_model()?.scale_function(q)?;
    let f = |y: f64| Ok(wy.value(x - y)? * wx.deriv(y - z)?);
    let lo = z.max(0.0);
    let v = integrate_checked(&f, lo, x, false, crate::numerics::Tolerance::default())?;
    Ok(head + spec.delta * v)
}

/// `E_x[e^{-λν₀⁻ + rY_{ν₀⁻}}] = ℤ_{δ,λ}(x,r) - ((ψ_λ(r) - δr)/(r - φ_λ))𝕎_λ(x)`,
/// where `ν₀⁻` is the first passage of `Y` below 0.
pub fn lt_exit_y(spec: &RefractedSpec, x: f64, lambda: f64, r: f64) -> Result<f64> {
    check_positive("lambda", lambda)?;
    let ctx = spec.y_context(lambda)?;
    let varphi = ctx.phi();
    if (r - varphi).abs() < 1e-12 {
        return Err(Error::PoleAtVarphi { r, varphi });
    }
    let z = z_scale(&ctx, x, r)?;
    if x < 0.0 {
        return Ok(z);
    }
    Ok(z - ctx.psi_q(r)? / (r - varphi) * ctx.w(x)?)
}

fn parisian_raw(spec: &RefractedSpec, ctx: &ScaleContext, x: f64, q: f64) -> Result<f64> {
    let lambda = ctx.q();
    let theta = spec.base.phi(lambda + q)?;
    let den = q - spec.delta * theta;
    if den.abs() < 1e-12 {
        return Err(Error::DenominatorPole { q });
    }
    let varphi = ctx.phi();
    let z = if x < 0.0 { 1.0 } else { ctx.z(x)? };
    let zt = z_scale(ctx, x, theta)?;
    Ok(q / (lambda + q) * (z - lambda * (theta - varphi) / (den * varphi) * zt))
}

/// `E_x[e^{-λκ}]` for Parisian ruin of `U` with exponential delays of rate
/// `q`. Requests within 1e-9 of the removable pole `q = δΦ_{λ+q}` are
/// averaged over `q ± 1e-6`.
pub fn lt_parisian_refracted(spec: &RefractedSpec, x: f64, q: f64, lambda: f64) -> Result<f64> {
    check_positive("q", q)?;
    check_positive("lambda", lambda)?;
    let ctx = spec.y_context(lambda)?;
    let gap = q - spec.delta * spec.base.phi(lambda + q)?;
    if gap.abs() < 1e-9 {
        if q <= POLE_OFFSET {
            return Err(Error::DenominatorPole { q });
        }
        let lo = parisian_raw(spec, &ctx, x, q - POLE_OFFSET)?;
        let hi = parisian_raw(spec, &ctx, x, q + POLE_OFFSET)?;
        return Ok(0.5 * (lo + hi));
    }
    parisian_raw(spec, &ctx, x, q)
}

/// `E_x[e^{-q O}]` for the occupation of `U` below 0 up to an exponential
/// time of rate `λ`.
pub fn lt_occupation_refracted(spec: &RefractedSpec, x: f64, q: f64, lambda: f64) -> Result<f64> {
    Ok(1.0 - lt_parisian_refracted(spec, x, q, lambda)?)
}

fn refracted_law(spec: &RefractedSpec, x: f64, lambda: f64) -> Result<ExpHorizonLaw> {
    check_positive("lambda", lambda)?;
    ExpHorizonLaw::build(spec.y_context(lambda)?, &spec.base, Some(spec.delta), x)
}

/// Law of the occupation of `U` below 0 up to an exponential time.
///
/// The atom is `1 - ℤ_λ(x) + (λ/φ_λ)𝕎_λ(x)` and the kernel integrates
/// `𝕎_λ` against the transition law of `X`.
pub fn occupation_density_refracted_exp(
    spec: &RefractedSpec,
    x: f64,
    lambda: f64,
    y_grid: &[f64],
) -> Result<OccupationDistribution> {
    refracted_law(spec, x, lambda)?.distribution(y_grid)
}

/// `(ℤ_λ(x) - (λ/φ_λ)ℤ_λ(x))`, the atom with `ℤ` in place of `𝕎`; kept to
/// show it does not match simulation.
pub fn literal_atom_refracted(spec: &RefractedSpec, x: f64, lambda: f64) -> Result<f64> {
    check_positive("lambda", lambda)?;
    let ctx = spec.y_context(lambda)?;
    let z = if x < 0.0 { 1.0 } else { ctx.z(x)? };
    Ok(z - lambda / ctx.phi() * z)
}

/// `E_x[e^{-λσ_r}]` for the inverse occupation time of `U`.
pub fn lt_inverse_occupation_refracted(spec: &RefractedSpec, x: f64, r: f64, lambda: f64) -> Result<f64> {
    refracted_law(spec, x, lambda)?.tail(r)
}

/// `∫_0^r Λ_δ'(x, s) ds` at rate 0, point mass included.
fn deriv_integral(spec: &RefractedSpec, ctx: &ScaleContext, x: f64, r: f64) -> Result<f64> {
    let atom = deriv_atom_against(ctx, &spec.base, x)?;
    let mut cuts = vec![0.0];
    cuts.extend(atom.iter().map(|a| a.0).filter(|s| *s < r));
    cuts.push(r);
    let f = |s: f64| lambda_deriv_against(ctx, &spec.base, x, s.max(1e-12));
    let mut v = 0.0;
    for w in cuts.windows(2) {
        v += integrate_checked(&f, w[0], w[1], w[0] == 0.0, ctx.tolerance())?;
    }
    Ok(v + atom.filter(|a| a.0 <= r).map_or(0.0, |a| a.1))
}

fn profit_context(spec: &RefractedSpec, r: f64) -> Result<(ScaleContext, f64)> {
    check_positive("r", r)?;
    let y = spec.y_model()?;
    let drift = y.require_net_profit(0.0)?;
    Ok((ScaleContext::new(&y, 0.0)?, drift))
}

/// `P_x(σ_r < ∞) = 1 - (E[X_1] - δ)(𝕎(x) + ∫_0^r Λ_δ'(x,s)ds)`.
pub fn prob_inverse_occupation_refracted(spec: &RefractedSpec, x: f64, r: f64) -> Result<f64> {
    let (ctx, drift) = profit_context(spec, r)?;
    let w = if x < 0.0 { 0.0 } else { ctx.w(x)? };
    clamp_probability(1.0 - drift * (w + deriv_integral(spec, &ctx, x, r)?), "inverse occupation probability")
}

/// The same probability with `𝕎(x)` replaced by `w(x; 0)/(1 - δW(0))`.
pub fn prob_inverse_occupation_refracted_via_w(spec: &RefractedSpec, x: f64, r: f64) -> Result<f64> {
    let (ctx, drift) = profit_context(spec, r)?;
    let w0 = spec.base.scale_function(0.0)?.at_zero()?;
    let head = w_u(spec, 0.0, x, 0.0)? / (1.0 - spec.delta * w0);
    clamp_probability(1.0 - drift * (head + deriv_integral(spec, &ctx, x, r)?), "inverse occupation probability")
}
