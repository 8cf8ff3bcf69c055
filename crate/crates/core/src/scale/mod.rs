//! Second-layer scale objects: `Z_q(x, θ)`, the delayed scale function
//! `Λ^(q)` with its x-derivative, the kernel `B^(λ)` and an identity checker.

mod delayed;
mod identities;

use num_complex::Complex64;

use crate::levy_models::{ModelSpec, ScaleFunction};
use crate::numerics::{Quadrature, Tolerance};
use crate::{Error, Result};

pub use delayed::{b_kernel, b_kernel_direct, lambda_delayed, lambda_delayed_deriv, lambda_deriv_atom};
pub(crate) use delayed::{b_kernel_against, deriv_atom_against, lambda_deriv_against};
pub use identities::{verify_identities, IdentityCheck, IdentityGrid, ValidationReport};

/// A model paired with one rate `q`, caching `Φ_q`, `E[X_1]` and `W_q`.
///
/// Immutable once built and cheap to share across threads.
#[derive(Debug, Clone)]
pub struct ScaleContext {
    model: ModelSpec,
    q: f64,
    phi: f64,
    mean_drift: f64,
    w: ScaleFunction,
    tol: Tolerance,
}

impl ScaleContext {
    pub fn new(model: &ModelSpec, q: f64) -> Result<Self> {
        Self::with_tolerance(model, q, Tolerance::default())
    }

    pub fn with_tolerance(model: &ModelSpec, q: f64, tol: Tolerance) -> Result<Self> {
        if !(q >= 0.0) || !q.is_finite() {
            return Err(Error::DomainError(format!("scale context needs q >= 0, got {q}")));
        }
        let w = ScaleFunction::new(model, q)?;
        let phi = w.phi();
        let check = model.laplace_exponent(phi)? - q;
        if check.abs() > 1e-9 * q.max(1.0) {
            return Err(Error::NumericalInconsistency(format!(
                "psi(Phi_q) - q = {check:e} at q = {q}"
            )));
        }
        Ok(ScaleContext {
            model: model.clone(),
            q,
            phi,
            mean_drift: model.mean_drift(),
            w,
            tol,
        })
    }

    /// The same model and tolerance at another rate.
    pub fn at_rate(&self, q: f64) -> Result<Self> {
        Self::with_tolerance(&self.model, q, self.tol)
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn mean_drift(&self) -> f64 {
        self.mean_drift
    }

    pub fn tolerance(&self) -> Tolerance {
        self.tol
    }

    pub fn scale_function(&self) -> &ScaleFunction {
        &self.w
    }

    /// `W_q(x)`.
    pub fn w(&self, x: f64) -> Result<f64> {
        self.w.value(x)
    }

    /// `W_q'(x)`, right derivative at 0.
    pub fn w_deriv(&self, x: f64) -> Result<f64> {
        self.w.deriv(x)
    }

    /// `ψ_q(θ) = ψ(θ) - q`.
    pub fn psi_q(&self, theta: f64) -> Result<f64> {
        Ok(self.model.laplace_exponent(theta)? - self.q)
    }

    /// `Z_q(x) = 1 + q∫_0^x W_q`.
    pub fn z(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Ok(1.0);
        }
        Ok(1.0 + self.q * self.w.integral(x)?)
    }
}

/// `Z_q(x, θ)`; equal to `e^{θx}` for `x < 0`.
pub fn z_scale(ctx: &ScaleContext, x: f64, theta: f64) -> Result<f64> {
    if !(theta >= 0.0) || !x.is_finite() {
        return Err(Error::DomainError(format!("z_scale needs theta >= 0 and finite x, got ({x}, {theta})")));
    }
    if x < 0.0 {
        return Ok((theta * x).exp());
    }
    if theta == 0.0 {
        return ctx.z(x);
    }
    let psi_q = ctx.psi_q(theta)?;
    if let Some(v) = z_from_residues(ctx, x, theta, psi_q) {
        return Ok(v);
    }
    let partial = match ctx.w.laplace_partial(x, theta)? {
        Some(v) => v,
        None => {
            let w = &ctx.w;
            Quadrature::new(ctx.tol.scaled(1e-2))
                .sqrt_singular(true)
                .integrate(|y: f64| (-theta * y).exp() * w.value(y).unwrap_or(f64::NAN), 0.0, x)?
                .value
        }
    };
    Ok((theta * x).exp() * (1.0 - psi_q * partial))
}

/// For `W_q = Σ c_j e^{ρ_j x}` the partial fractions of `1/ψ_q` cancel the
/// `e^{θx}` part exactly, leaving `ψ_q(θ) Σ c_j e^{ρ_j x}/(θ - ρ_j)`.
fn z_from_residues(ctx: &ScaleContext, x: f64, theta: f64, psi_q: f64) -> Option<f64> {
    let terms = ctx.w.terms()?;
    let th = Complex64::from(theta);
    let mut s = Complex64::new(0.0, 0.0);
    for t in terms {
        let gap = th - t.rate;
        if t.power != 0 || gap.norm() < 1e-6 * (1.0 + theta) {
            return None;
        }
        s += t.coef * (t.rate * x).exp() / gap;
    }
    Some(psi_q * s.re)
}

/// `ψ_q(θ)∫_0^∞ e^{-θy} W_q(x+y) dy`, valid for `θ > Φ_q`.
///
/// An independent route to `Z_q(x, θ)` used for cross-checks.
pub fn z_scale_tail_form(ctx: &ScaleContext, x: f64, theta: f64) -> Result<f64> {
    if !(theta > ctx.phi) {
        return Err(Error::DomainError(format!(
            "tail form needs theta > Phi_q = {}, got {theta}",
            ctx.phi
        )));
    }
    let x = x.max(0.0);
    let w = &ctx.w;
    let r = Quadrature::new(ctx.tol.scaled(1e-2))
        .initial_panel(1.0 / (theta - ctx.phi))
        .integrate(
            |y: f64| {
                let e = (-theta * y).exp();
                if e == 0.0 {
                    return 0.0;
                }
                match w.value(x + y) {
                    // W overflows only where the discount has already won.
                    Ok(v) if v.is_infinite() => 0.0,
                    Ok(v) => e * v,
                    Err(_) => f64::NAN,
                }
            },
            0.0,
            f64::INFINITY,
        )?;
    Ok(ctx.psi_q(theta)? * r.value)
}
