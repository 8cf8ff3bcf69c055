//! The four spectrally negative model families: Laplace exponent, mean
//! drift, right-inverse, transition law and closed-form scale function.

mod phase_type;
mod scale_fn;
mod transition;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::numerics::{find_root_increasing_newton, Tolerance};
use crate::{Error, Result};

pub use phase_type::PhaseType;
pub use scale_fn::{ExpTerm, ScaleFunction};
pub use transition::TransitionMeasure;

/// A spectrally negative Lévy risk process.
///
/// Serialises with a `model` tag of `bm`, `cl`, `jdpt` or `stable`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model")]
pub enum ModelSpec {
    /// `X_t = μt + σB_t`.
    #[serde(rename = "bm")]
    BrownianDrift { mu: f64, sigma: f64 },
    /// Premium rate `c`, Poisson(`η`) claims of size Exp(`α`).
    #[serde(rename = "cl")]
    CramerLundbergExp { c: f64, eta: f64, alpha: f64 },
    /// Brownian perturbation plus Poisson(`η`) phase-type claims.
    #[serde(rename = "jdpt")]
    JumpDiffusionPhaseType(PhaseType),
    /// `ψ(λ) = λ^{3/2}`. Experimental: exponential horizons only.
    #[serde(rename = "stable")]
    StableThreeHalves,
}

impl ModelSpec {
    pub fn bm(mu: f64, sigma: f64) -> Result<Self> {
        let m = ModelSpec::BrownianDrift { mu, sigma };
        m.validate()?;
        Ok(m)
    }

    pub fn cl(c: f64, eta: f64, alpha: f64) -> Result<Self> {
        let m = ModelSpec::CramerLundbergExp { c, eta, alpha };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match *self {
            ModelSpec::BrownianDrift { mu, sigma } => {
                if !mu.is_finite() || !(sigma > 0.0) || !sigma.is_finite() {
                    return bad(format!("bm needs finite mu and sigma > 0 (mu={mu}, sigma={sigma})"));
                }
            }
            ModelSpec::CramerLundbergExp { c, eta, alpha } => {
                for (name, v) in [("c", c), ("eta", eta), ("alpha", alpha)] {
                    if !(v > 0.0) || !v.is_finite() {
                        return bad(format!("cl needs {name} > 0, got {v}"));
                    }
                }
            }
            ModelSpec::JumpDiffusionPhaseType(ref p) => p.validate()?,
            ModelSpec::StableThreeHalves => {}
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::BrownianDrift { .. } => "bm",
            ModelSpec::CramerLundbergExp { .. } => "cl",
            ModelSpec::JumpDiffusionPhaseType(_) => "jdpt",
            ModelSpec::StableThreeHalves => "stable",
        }
    }

    /// Paths of bounded variation, i.e. `W_q(0) > 0`.
    pub fn has_bounded_variation(&self) -> bool {
        match self {
            ModelSpec::CramerLundbergExp { .. } => true,
            ModelSpec::JumpDiffusionPhaseType(p) => p.sigma == 0.0,
            _ => false,
        }
    }

    /// Drift of the linear part for bounded-variation models.
    pub fn premium_rate(&self) -> Option<f64> {
        match self {
            ModelSpec::CramerLundbergExp { c, .. } => Some(*c),
            ModelSpec::JumpDiffusionPhaseType(p) if p.sigma == 0.0 => Some(p.c),
            _ => None,
        }
    }

    /// The model of `X_t - δt`.
    pub fn drift_shifted(&self, delta: f64) -> Result<ModelSpec> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::InvalidRefraction(format!("delta must be >= 0, got {delta}")));
        }
        if delta == 0.0 {
            return Ok(self.clone());
        }
        let shifted = match self {
            ModelSpec::BrownianDrift { mu, sigma } => ModelSpec::BrownianDrift {
                mu: mu - delta,
                sigma: *sigma,
            },
            ModelSpec::CramerLundbergExp { c, eta, alpha } => {
                if c - delta <= 0.0 {
                    return Err(Error::InvalidRefraction(format!(
                        "c - delta must stay positive (c={c}, delta={delta})"
                    )));
                }
                ModelSpec::CramerLundbergExp {
                    c: c - delta,
                    eta: *eta,
                    alpha: *alpha,
                }
            }
            ModelSpec::JumpDiffusionPhaseType(p) => {
                if p.sigma == 0.0 && p.c - delta <= 0.0 {
                    return Err(Error::InvalidRefraction(format!(
                        "c - delta must stay positive without diffusion (c={}, delta={delta})",
                        p.c
                    )));
                }
                let mut q = p.clone();
                q.c -= delta;
                ModelSpec::JumpDiffusionPhaseType(q)
            }
            ModelSpec::StableThreeHalves => {
                return Err(Error::InvalidRefraction(
                    "the stable family has no drift to refract".into(),
                ))
            }
        };
        Ok(shifted)
    }

    /// `ψ(θ) = log E[e^{θX_1}]`.
    pub fn laplace_exponent(&self, theta: f64) -> Result<f64> {
        match *self {
            ModelSpec::BrownianDrift { mu, sigma } => Ok(mu * theta + 0.5 * sigma * sigma * theta * theta),
            ModelSpec::CramerLundbergExp { c, eta, alpha } => {
                if theta <= -alpha {
                    return Err(Error::DomainError(format!(
                        "cl exponent needs theta > -alpha, got {theta}"
                    )));
                }
                Ok(c * theta + eta * (alpha / (theta + alpha) - 1.0))
            }
            ModelSpec::JumpDiffusionPhaseType(ref p) => p.laplace_exponent(theta),
            ModelSpec::StableThreeHalves => {
                if theta < 0.0 {
                    return Err(Error::DomainError(format!(
                        "stable exponent needs theta >= 0, got {theta}"
                    )));
                }
                Ok(theta * theta.sqrt())
            }
        }
    }

    /// `ψ'(θ)`.
    pub fn laplace_exponent_deriv(&self, theta: f64) -> Result<f64> {
        match *self {
            ModelSpec::BrownianDrift { mu, sigma } => Ok(mu + sigma * sigma * theta),
            ModelSpec::CramerLundbergExp { c, eta, alpha } => {
                let d = theta + alpha;
                Ok(c - eta * alpha / (d * d))
            }
            ModelSpec::JumpDiffusionPhaseType(ref p) => p.laplace_exponent_deriv(theta),
            ModelSpec::StableThreeHalves => Ok(1.5 * theta.max(0.0).sqrt()),
        }
    }

    /// `ψ` continued to complex arguments with `Re θ > 0`.
    pub fn laplace_exponent_complex(&self, theta: Complex64) -> Complex64 {
        match *self {
            ModelSpec::BrownianDrift { mu, sigma } => theta * mu + theta * theta * (0.5 * sigma * sigma),
            ModelSpec::CramerLundbergExp { c, eta, alpha } => {
                theta * c + (Complex64::from(alpha) / (theta + alpha) - 1.0) * eta
            }
            ModelSpec::JumpDiffusionPhaseType(ref p) => p.laplace_exponent_complex(theta),
            ModelSpec::StableThreeHalves => theta * theta.sqrt(),
        }
    }

    /// `E[X_1] = ψ'(0+)`.
    pub fn mean_drift(&self) -> f64 {
        match *self {
            ModelSpec::BrownianDrift { mu, .. } => mu,
            ModelSpec::CramerLundbergExp { c, eta, alpha } => c - eta / alpha,
            ModelSpec::JumpDiffusionPhaseType(ref p) => p.mean_drift(),
            ModelSpec::StableThreeHalves => 0.0,
        }
    }

    /// Errors with `NetProfitViolation` unless `E[X_1] > required`.
    pub fn require_net_profit(&self, required: f64) -> Result<f64> {
        let drift = self.mean_drift();
        if drift > required {
            Ok(drift)
        } else {
            Err(Error::NetProfitViolation { drift, required })
        }
    }

    /// `Φ_q = sup{θ >= 0 : ψ(θ) = q}`.
    pub fn phi(&self, q: f64) -> Result<f64> {
        if !(q >= 0.0) || !q.is_finite() {
            return Err(Error::DomainError(format!("phi needs q >= 0, got {q}")));
        }
        match *self {
            ModelSpec::BrownianDrift { mu, sigma } => {
                let s2 = sigma * sigma;
                let root = (mu * mu + 2.0 * q * s2).sqrt();
                // Rationalised when mu > 0 to avoid cancellation at small q.
                if mu > 0.0 {
                    Ok(2.0 * q / (root + mu))
                } else {
                    Ok((root - mu) / s2)
                }
            }
            ModelSpec::CramerLundbergExp { c, eta, alpha } => {
                let (plus, _) = cl_roots(c, eta, alpha, q);
                Ok(plus)
            }
            ModelSpec::JumpDiffusionPhaseType(_) => self.phi_numeric(q),
            ModelSpec::StableThreeHalves => Ok(q.powf(2.0 / 3.0)),
        }
    }

    /// Right-inverse by bracketing from the minimiser of `ψ` on `[0, ∞)`.
    pub(crate) fn phi_numeric(&self, q: f64) -> Result<f64> {
        let tol = Tolerance {
            abs_tol: 1e-15,
            rel_tol: 1e-14,
            max_iter: 400,
        };
        let lo = if self.laplace_exponent_deriv(0.0)? >= 0.0 {
            0.0
        } else {
            let dpsi = |t: f64| self.laplace_exponent_deriv(t).unwrap_or(f64::NAN);
            crate::numerics::find_root_increasing(dpsi, 0.0, 0.0, &tol)?
        };
        if q == 0.0 && lo == 0.0 {
            return Ok(0.0);
        }
        let f = |t: f64| self.laplace_exponent(t).unwrap_or(f64::NAN);
        let df = |t: f64| self.laplace_exponent_deriv(t).unwrap_or(f64::NAN);
        find_root_increasing_newton(f, df, q, lo, &tol)
    }

    /// `Φ_z` for complex `z` with `Re z > 0`: the unique root of `ψ(θ) = z`
    /// in the right half-plane.
    pub fn phi_complex(&self, z: Complex64) -> Result<Complex64> {
        if !(z.re > 0.0) {
            return Err(Error::DomainError(format!("phi_complex needs Re z > 0, got {z}")));
        }
        let roots: Vec<Complex64> = match *self {
            ModelSpec::BrownianDrift { mu, sigma } => {
                let s2 = sigma * sigma;
                let d = (Complex64::from(mu * mu) + z * (2.0 * s2)).sqrt();
                vec![(d - mu) / s2, (-d - mu) / s2]
            }
            ModelSpec::CramerLundbergExp { c, eta, alpha } => {
                let b = Complex64::from(c * alpha - eta) - z;
                let d = (b * b + z * (4.0 * c * alpha)).sqrt();
                vec![(-b + d) / (2.0 * c), (-b - d) / (2.0 * c)]
            }
            ModelSpec::JumpDiffusionPhaseType(ref p) => p.roots_complex(z)?,
            ModelSpec::StableThreeHalves => return Ok(z.powf(2.0 / 3.0)),
        };
        roots
            .into_iter()
            .filter(|r| r.re > 0.0)
            .max_by(|a, b| a.re.total_cmp(&b.re))
            .ok_or_else(|| Error::RootEnumerationFailed(format!("no right half-plane root for z={z}")))
    }

    pub fn transition_measure(&self, t: f64) -> Result<TransitionMeasure> {
        TransitionMeasure::new(self, t)
    }

    /// The `q`-scale function, prepared once for repeated evaluation.
    pub fn scale_function(&self, q: f64) -> Result<ScaleFunction> {
        ScaleFunction::new(self, q)
    }

    pub fn w_scale(&self, q: f64, x: f64) -> Result<f64> {
        if x < 0.0 {
            return Ok(0.0);
        }
        self.scale_function(q)?.value(x)
    }
}

/// Roots `θ+ >= θ-` of `cθ² + (cα - η - q)θ - qα = 0`.
pub(crate) fn cl_roots(c: f64, eta: f64, alpha: f64, q: f64) -> (f64, f64) {
    let b = c * alpha - eta - q;
    let disc = (b * b + 4.0 * c * q * alpha).sqrt();
    // Pick the cancellation-free formula for each root.
    if b >= 0.0 {
        let minus = (-b - disc) / (2.0 * c);
        let plus = if minus != 0.0 { -q * alpha / (c * minus) } else { 0.0 };
        (plus, minus)
    } else {
        let plus = (-b + disc) / (2.0 * c);
        let minus = if plus != 0.0 { -q * alpha / (c * plus) } else { 0.0 };
        (plus, minus)
    }
}

/// Free-function form of [`ModelSpec::laplace_exponent`].
pub fn laplace_exponent(model: &ModelSpec, theta: f64) -> Result<f64> {
    model.laplace_exponent(theta)
}

pub fn mean_drift(model: &ModelSpec) -> f64 {
    model.mean_drift()
}

pub fn phi(model: &ModelSpec, q: f64) -> Result<f64> {
    model.phi(q)
}

pub fn transition_measure(model: &ModelSpec, t: f64) -> Result<TransitionMeasure> {
    model.transition_measure(t)
}

pub fn w_scale(model: &ModelSpec, q: f64, x: f64) -> Result<f64> {
    model.w_scale(q, x)
}
