use super::ScaleContext;
use crate::levy_models::{ModelSpec, TransitionMeasure};
use crate::numerics::Quadrature;
use crate::{Error, Result};

fn check_r(r: f64) -> Result<()> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::DomainError(format!("delayed scale needs r > 0, got {r}")));
    }
    Ok(())
}

/// `∫_{z > max(0,-x)} g(x+z) (z/r) P(X_r ∈ dz)`, atom included.
fn against_law<G: Fn(f64) -> Result<f64>>(
    ctx: &ScaleContext,
    tm: &TransitionMeasure,
    x: f64,
    tilt: f64,
    g: G,
) -> Result<f64> {
    let r = tm.time;
    let (blo, bhi) = tm.bulk(tilt);
    let lo = (-x).max(0.0);
    let mut total = 0.0;
    let start = lo.max(blo);
    if start < bhi {
        let f = |z: f64| match (g(x + z), tm.density(z)) {
            (Ok(a), Ok(b)) => a * (z / r) * b,
            _ => f64::NAN,
        };
        let quad = Quadrature::new(ctx.tol).sqrt_singular(start == lo);
        total += quad.integrate(f, start, bhi)?.value;
    }
    if let Some(loc) = tm.atom_location {
        // Right-continuous in x when the atom sits exactly on the jump of W.
        if loc >= lo && tm.atom_mass > 0.0 {
            total += g(x + loc)? * (loc / r) * tm.atom_mass;
        }
    }
    Ok(total)
}

/// The boundary term `W(0+)(-x/r) f_r(-x)` picked up by the derivative when
/// `x < 0` and paths have bounded variation.
fn boundary_term(ctx: &ScaleContext, tm: &TransitionMeasure, x: f64) -> Result<f64> {
    if x >= 0.0 || !tm.model().has_bounded_variation() {
        return Ok(0.0);
    }
    let w0 = ctx.w.at_zero()?;
    Ok(w0 * (-x / tm.time) * tm.density(-x)?)
}

/// `Λ^(q)(x, r) = ∫_0^∞ W_q(x+z)(z/r) P(X_r ∈ dz)`.
pub fn lambda_delayed(ctx: &ScaleContext, x: f64, r: f64) -> Result<f64> {
    lambda_against(ctx, &ctx.model, x, r)
}

/// `Λ` with the scale function of `ctx` integrated against the transition
/// law of `law`, which may be a different process.
fn lambda_against(ctx: &ScaleContext, law: &ModelSpec, x: f64, r: f64) -> Result<f64> {
    check_r(r)?;
    let tm = law.transition_measure(r)?;
    against_law(ctx, &tm, x, ctx.phi, |w| ctx.w.value(w))
}

/// `∂Λ^(q)/∂x (x, r)`.
///
/// For bounded-variation models with `x < 0` the jump of `W_q` at 0 adds
/// `W_q(0)(-x/r) f_r(-x)` to the integral of `W_q'`.
pub fn lambda_delayed_deriv(ctx: &ScaleContext, x: f64, r: f64) -> Result<f64> {
    lambda_deriv_against(ctx, &ctx.model, x, r)
}

pub(crate) fn lambda_deriv_against(ctx: &ScaleContext, law: &ModelSpec, x: f64, r: f64) -> Result<f64> {
    check_r(r)?;
    let tm = law.transition_measure(r)?;
    let body = against_law(ctx, &tm, x, ctx.phi, |w| ctx.w.deriv(w))?;
    Ok(body + boundary_term(ctx, &tm, x)?)
}

/// The point mass of `s ↦ Λ^(q)'(x, s)` for bounded-variation models
/// started at `x < 0`: claim-free paths reach 0 at `s₀ = -x/c`, where the
/// jump of `W_q` contributes `W_q(0)·P(no claim by s₀)` at `s₀`.
///
/// [`lambda_delayed_deriv`] returns the density part only.
pub fn lambda_deriv_atom(ctx: &ScaleContext, x: f64) -> Result<Option<(f64, f64)>> {
    deriv_atom_against(ctx, &ctx.model, x)
}

pub(crate) fn deriv_atom_against(ctx: &ScaleContext, law: &ModelSpec, x: f64) -> Result<Option<(f64, f64)>> {
    let c = match law.premium_rate() {
        Some(c) if x < 0.0 && law.has_bounded_variation() => c,
        _ => return Ok(None),
    };
    let s0 = -x / c;
    let tm = law.transition_measure(s0)?;
    Ok(Some((s0, ctx.w.at_zero()? * tm.atom_mass)))
}

/// `B^(λ)(x, s) = Λ^(λ)'(x, s)/Φ_λ - Λ^(λ)(x, s)` with `λ = ctx.q()`.
///
/// The `e^{Φ_λ w}/ψ'(Φ_λ)` part of `W_λ` cancels between the two terms, so
/// only the remainder `R = W_λ - e^{Φ_λ w}/ψ'(Φ_λ)` is integrated.
pub fn b_kernel(ctx: &ScaleContext, x: f64, s: f64) -> Result<f64> {
    b_kernel_against(ctx, &ctx.model, x, s)
}

pub(crate) fn b_kernel_against(ctx: &ScaleContext, law: &ModelSpec, x: f64, s: f64) -> Result<f64> {
    check_r(s)?;
    if !(ctx.q > 0.0) {
        return Err(Error::DomainError(format!("b_kernel needs lambda > 0, got {}", ctx.q)));
    }
    let phi = ctx.phi;
    let tm = law.transition_measure(s)?;
    let body = against_law(ctx, &tm, x, 0.0, |w| {
        let (r, dr) = ctx.w.residual(w)?;
        Ok(dr / phi - r)
    })?;
    Ok(body + boundary_term(ctx, &tm, x)? / phi)
}

/// `B^(λ)` as the literal difference of the two delayed-scale evaluations.
pub fn b_kernel_direct(ctx: &ScaleContext, x: f64, s: f64) -> Result<f64> {
    Ok(lambda_delayed_deriv(ctx, x, s)? / ctx.phi - lambda_delayed(ctx, x, s)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy_models::{ModelSpec, PhaseType};
    use crate::numerics::{normal_sf, Tolerance};

    fn models() -> Vec<ModelSpec> {
        vec![
            ModelSpec::bm(1.0, 1.0).unwrap(),
            ModelSpec::bm(-0.5, 1.2).unwrap(),
            ModelSpec::cl(1.0, 0.5, 1.0).unwrap(),
            ModelSpec::JumpDiffusionPhaseType(
                PhaseType::new(1.5, 0.3, 0.5, vec![-2.0, 2.0, 0.0, -2.0], vec![1.0, 0.0]).unwrap(),
            ),
            ModelSpec::JumpDiffusionPhaseType(
                PhaseType::new(1.2, 0.0, 0.8, vec![-3.0, 1.0, 0.5, -2.0], vec![0.6, 0.4]).unwrap(),
            ),
            ModelSpec::StableThreeHalves,
        ]
    }

    #[test]
    fn lambda_at_zero_is_exponential() {
        for m in models() {
            for q in [0.0, 0.5, 1.0] {
                let ctx = ScaleContext::new(&m, q).unwrap();
                for r in [0.25, 1.0, 2.0] {
                    let v = lambda_delayed(&ctx, 0.0, r).unwrap();
                    let want = (q * r).exp();
                    assert!((v - want).abs() < 1e-7 * want, "{} q={q} r={r}: {v}", m.name());
                }
            }
        }
    }

    /// `Λ'(0, s)` for Brownian motion with drift at `q = 0`.
    fn bm_lambda_prime_zero(mu: f64, sigma: f64, s: f64) -> f64 {
        let pi = std::f64::consts::PI;
        let a = sigma * (-mu * mu * s / (2.0 * sigma * sigma)).exp() / (2.0 * pi * s).sqrt();
        2.0 / (sigma * sigma) * (a - mu * normal_sf(mu * s.sqrt() / sigma))
    }

    #[test]
    fn bm_derivative_closed_form() {
        let m = ModelSpec::bm(1.0, 1.0).unwrap();
        let ctx = ScaleContext::new(&m, 0.0).unwrap();
        for s in [0.1, 0.5, 1.0, 3.0] {
            let got = lambda_delayed_deriv(&ctx, 0.0, s).unwrap();
            let want = bm_lambda_prime_zero(1.0, 1.0, s);
            assert!((got - want).abs() < 1e-8 * want, "s={s}: {got} vs {want}");
        }
    }

    #[test]
    fn bm_lambda_closed_form() {
        // W(y) = 1 - e^{-2y} for μ = σ = 1, so Λ(x, r) = E[(1 - e^{-2(x+X_r)}) X_r/r; X_r > 0].
        let ctx = ScaleContext::new(&ModelSpec::bm(1.0, 1.0).unwrap(), 0.0).unwrap();
        let (x, r) = (1.0f64, 1.0f64);
        let pi = std::f64::consts::PI;
        let phi_pdf = |z: f64| (-0.5 * z * z).exp() / (2.0 * pi).sqrt();
        // E[X; X > 0] for X ~ N(m, v) is m·N̄(-m/√v) + √v·φ(-m/√v).
        let part = |m: f64, v: f64| {
            let k = -m / v.sqrt();
            m * normal_sf(k) + v.sqrt() * phi_pdf(k)
        };
        // The e^{-2X} tilt maps N(r, r) to N(-r, r) with factor e^{-2x}·e^{0}.
        let want = (part(r, r) - (-2.0 * x).exp() * part(-r, r)) / r;
        let got = lambda_delayed(&ctx, x, r).unwrap();
        assert!((got - want).abs() < 1e-8, "{got} vs {want}");
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for m in models() {
            let ctx = ScaleContext::new(&m, 0.5).unwrap();
            for x in [-0.7, -0.45, 0.5, 1.0, 2.0] {
                for r in [0.25, 1.0] {
                    let h = 1e-4;
                    let fd = (lambda_delayed(&ctx, x + h, r).unwrap() - lambda_delayed(&ctx, x - h, r).unwrap())
                        / (2.0 * h);
                    let d = lambda_delayed_deriv(&ctx, x, r).unwrap();
                    let tol = (1e-3 * d.abs()).max(1e-5);
                    assert!((d - fd).abs() < tol, "{} x={x} r={r}: {d} vs fd {fd}", m.name());
                }
            }
        }
    }

    #[test]
    fn b_kernel_residual_form_matches_direct() {
        for m in models() {
            let ctx = ScaleContext::new(&m, 1.0).unwrap();
            for x in [-1.0, 0.0, 0.5, 2.0] {
                for s in [0.25, 1.0, 3.0] {
                    let a = b_kernel(&ctx, x, s).unwrap();
                    let b = b_kernel_direct(&ctx, x, s).unwrap();
                    let scale = lambda_delayed(&ctx, x, s).unwrap().abs().max(1.0);
                    assert!((a - b).abs() < 1e-6 * scale, "{} x={x} s={s}: {a} vs {b}", m.name());
                }
            }
        }
    }

    #[test]
    fn b_kernel_tolerance_consistency() {
        let m = ModelSpec::cl(1.0, 0.5, 1.0).unwrap();
        let coarse = ScaleContext::with_tolerance(&m, 1.0, Tolerance::default()).unwrap();
        let fine = ScaleContext::with_tolerance(&m, 1.0, Tolerance::default().scaled(0.5)).unwrap();
        let a = b_kernel(&coarse, 0.0, 0.5).unwrap();
        let b = b_kernel(&fine, 0.0, 0.5).unwrap();
        assert!(a.is_finite() && (a - b).abs() < 1e-6, "{a} vs {b}");
        let at_zero = lambda_delayed_deriv(&fine, 0.0, 0.5).unwrap() / fine.phi() - 0.5f64.exp();
        assert!((a - at_zero).abs() < 1e-6);
    }

    #[test]
    fn b_kernel_zero_drift_is_finite() {
        let ctx = ScaleContext::new(&ModelSpec::bm(0.0, 1.0).unwrap(), 1.0).unwrap();
        assert!(b_kernel(&ctx, 0.3, 1.0).unwrap().is_finite());
    }

    #[test]
    fn rejects_nonpositive_r() {
        let ctx = ScaleContext::new(&ModelSpec::bm(1.0, 1.0).unwrap(), 0.0).unwrap();
        assert!(matches!(lambda_delayed(&ctx, 0.0, 0.0), Err(Error::DomainError(_))));
    }
}
