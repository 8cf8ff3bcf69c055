use std::f64::consts::PI;

use num_complex::Complex64;

use crate::levy_models::ModelSpec;
use crate::numerics::{gauss_legendre, normal_cdf, normal_pdf, normal_sf, Quadrature, Tolerance};
use crate::occupation::{bm_lambda_prime, check_inner_grid, cl_atom_a_t, drift_tail, fixed_law, OccupationDistribution};
use crate::scale::{lambda_delayed_deriv, ScaleContext};
use crate::{Error, Result};

/// Nodes per dimension in the running-maximum expectation.
const MAX_NODES: usize = 32;

/// Finite-time survival `Q(u, z) = P_z(no ruin during [0, u])` of the
/// Cramér–Lundberg model with exponential claims, and its derivatives in
/// `z`.
///
/// In units where the premium rate and mean claim are 1 and the claim rate
/// is `β < 1`,
/// `Q = 1 - βe^{-(1-β)z} + (β/π)∫_0^π e^{E(θ)} Re[(1 - e^{2iθ})e^{wz}]/(1 + β - 2√β cos θ) dθ`
/// with `w = √β e^{iθ} - 1` and `E(θ) = 2√β u cos θ - (1+β)u`.
#[derive(Debug, Clone, Copy)]
pub struct ClSurvival {
    beta: f64,
    alpha: f64,
    clock: f64,
}

impl ClSurvival {
    pub fn new(c: f64, eta: f64, alpha: f64) -> Result<Self> {
        let m = ModelSpec::cl(c, eta, alpha)?;
        m.require_net_profit(0.0)?;
        Ok(ClSurvival {
            beta: eta / (c * alpha),
            alpha,
            clock: c * alpha,
        })
    }

    /// `Σ_m ω_m ∂_z^k Q(u, ξ_m)` over `points = [(ξ_m, ω_m)]`.
    pub fn deriv_sum(&self, u: f64, k: i32, points: &[(f64, f64)]) -> Result<f64> {
        if !(u >= 0.0) || points.iter().any(|p| !(p.0 >= 0.0)) {
            return Err(Error::DomainError(format!("survival needs u >= 0 and z >= 0, got u={u}")));
        }
        let (b, a) = (self.beta, self.alpha);
        let rb = b.sqrt();
        let tt = self.clock * u;
        let f = |th: f64| {
            let (sn, cs) = th.sin_cos();
            let w = Complex64::new(rb * cs - 1.0, rb * sn);
            let lead = Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, 2.0 * th);
            let mut s = Complex64::new(0.0, 0.0);
            for (z, om) in points {
                s += om * (w * a * z).exp();
            }
            let e = (2.0 * rb * tt * cs - (1.0 + b) * tt).exp();
            e * (lead * (w * a).powi(k) * s).re / (1.0 + b - 2.0 * rb * cs)
        };
        let weight: f64 = points.iter().map(|p| p.1.abs()).sum::<f64>().max(1.0);
        let tol = Tolerance::new(1e-12 * weight, 1e-10, 400)?;
        let body = Quadrature::new(tol).integrate(f, 0.0, PI)?.value * b / PI;
        let decay = -(1.0 - b) * a;
        let mut head = 0.0;
        for (z, om) in points {
            head -= om * b * decay.powi(k) * (decay * z).exp();
            if k == 0 {
                head += om;
            }
        }
        Ok(head + body)
    }
}

/// `Q(u, z)` for the Cramér–Lundberg model with exponential claims.
pub fn cl_survival(c: f64, eta: f64, alpha: f64, u: f64, z: f64) -> Result<f64> {
    ClSurvival::new(c, eta, alpha)?.deriv_sum(u, 0, &[(z, 1.0)])
}

/// `∂_z P_z(inf_{[0,u]} Y >= 0)` for Brownian motion `Y` with drift `ν`.
pub fn bm_survival_deriv(nu: f64, sigma: f64, u: f64, z: f64) -> f64 {
    let sd = sigma * u.sqrt();
    let a = (z + nu * u) / sd;
    let b = (nu * u - z) / sd;
    2.0 * normal_pdf(a) / sd + 2.0 * nu / (sigma * sigma) * (-2.0 * nu * z / (sigma * sigma)).exp() * normal_cdf(b)
}

/// Density at `z > 0` of `sup_{[0,s]} X` for Brownian motion with drift `μ`.
fn bm_running_max_density(mu: f64, sigma: f64, s: f64, z: f64) -> f64 {
    let sd = sigma * s.sqrt();
    let s2 = sigma * sigma;
    let tail = normal_sf((z + mu * s) / sd);
    let reflected = if tail > 0.0 { (2.0 * mu * z / s2 + tail.ln()).exp() } else { 0.0 };
    2.0 * normal_pdf((z - mu * s) / sd) / sd - 2.0 * mu / s2 * reflected
}

/// Law of the time refracted Brownian motion started at 0 spends below 0
/// during `[0, t]`; `μ` is the drift below 0 and `μ - δ > 0` above.
///
/// The density at `s` is `h_{μ-δ}(t-s)Λ'(0,s) + δE[∂_zQ(t-s, X̄_s)]`, where
/// `h_ν` inverts `1/φ_λ`, `Q` is the survival function of `Y` and `X̄_s`
/// the running maximum of `X`.
pub fn fixed_horizon_refracted_bm(
    mu: f64,
    sigma: f64,
    delta: f64,
    t: f64,
    s_grid: &[f64],
) -> Result<OccupationDistribution> {
    ModelSpec::bm(mu, sigma)?;
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::InvalidRefraction(format!("delta must be >= 0, got {delta}")));
    }
    if !(mu > delta) {
        return Err(Error::NetProfitViolation { drift: mu, required: delta });
    }
    check_inner_grid(t, s_grid)?;
    let nu = mu - delta;
    let tol = Tolerance::default();
    let cross = |u: f64, s: f64| -> Result<f64> {
        if delta == 0.0 {
            return Ok(0.0);
        }
        let g = |z: f64| bm_survival_deriv(nu, sigma, u, z) * bm_running_max_density(mu, sigma, s, z);
        // Geometric panels out to where the running maximum has no mass.
        let top = mu * s + 12.0 * sigma * s.sqrt();
        let mut lo = 0.0;
        let mut hi = sigma * u.min(s).sqrt();
        let mut v = 0.0;
        while lo < top {
            v += Quadrature::new(tol).integrate(g, lo, hi.min(top))?.value;
            lo = hi;
            hi *= 3.0;
        }
        Ok(v)
    };
    let f = |s: f64| {
        let u = t - s;
        Ok(drift_tail(nu, sigma, u) * bm_lambda_prime(mu, sigma, s) + delta * cross(u, s)?)
    };
    let mut d = fixed_law(0.0, t, s_grid, f, tol)?;
    d.delta = Some(delta);
    Ok(d)
}

/// `(ξ, ω)` with `Σ ω g'(ξ) = ∫_0^s E[g'(X_r) X_r/r; X_r > 0] dr`, so that
/// `E[g(X̄_s)] = g(0) + Σ ω g'(ξ)`.
fn running_max_nodes(model: &ModelSpec, c: f64, eta: f64, s: f64) -> Result<Vec<(f64, f64)>> {
    let (x, w) = gauss_legendre(MAX_NODES);
    let mut out = Vec::with_capacity(MAX_NODES * (MAX_NODES + 1));
    for (xr, wr) in x.iter().zip(&w) {
        let r = 0.5 * s * (xr + 1.0);
        let wr = 0.5 * s * wr;
        let top = c * r;
        out.push((top, wr * c * (-eta * r).exp()));
        let tm = model.transition_measure(r)?;
        for (xz, wz) in x.iter().zip(&w) {
            let z = 0.5 * top * (xz + 1.0);
            out.push((z, wr * 0.5 * top * wz * z / r * tm.density(z)?));
        }
    }
    Ok(out)
}

/// Law of the time the refracted Cramér–Lundberg model started at 0 spends
/// below 0 during `[0, t]`; the premium rate is `c` below 0 and `c - δ`
/// above.
///
/// The atom is `a_t^δ`, the survival probability of `Y` over `[0, t]`, and
/// the density at `s` is `c a^δ_{t-s}Λ'(0,s) + δE[∂_zQ(t-s, X̄_s)]`.
pub fn fixed_horizon_refracted_cl(
    c: f64,
    eta: f64,
    alpha: f64,
    delta: f64,
    t: f64,
    s_grid: &[f64],
) -> Result<OccupationDistribution> {
    let base = ModelSpec::cl(c, eta, alpha)?;
    let cd = base.drift_shifted(delta)?.premium_rate().unwrap_or(c);
    let survival = ClSurvival::new(cd, eta, alpha)?;
    check_inner_grid(t, s_grid)?;
    let ctx = ScaleContext::new(&base, 0.0)?;
    let cross = |u: f64, s: f64| -> Result<f64> {
        if delta == 0.0 {
            return Ok(0.0);
        }
        let nodes = running_max_nodes(&base, c, eta, s)?;
        Ok(survival.deriv_sum(u, 1, &[(0.0, 1.0)])? + survival.deriv_sum(u, 2, &nodes)?)
    };
    let f = |s: f64| {
        let u = t - s;
        Ok(c * lambda_delayed_deriv(&ctx, 0.0, s)? * cl_atom_a_t(cd, eta, alpha, u)? + delta * cross(u, s)?)
    };
    let mut d = fixed_law(cl_atom_a_t(cd, eta, alpha, t)?, t, s_grid, f, ctx.tolerance())?;
    d.delta = Some(delta);
    Ok(d)
}
