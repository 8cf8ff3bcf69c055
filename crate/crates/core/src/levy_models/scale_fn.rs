use num_complex::Complex64;

use super::{cl_roots, ModelSpec};
use crate::numerics::{mittag_leffler, Quadrature, Tolerance};
use crate::{Error, Result};

/// One term `coef·x^power·e^{rate·x}` of an exponential-sum scale function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpTerm {
    pub coef: Complex64,
    pub rate: Complex64,
    pub power: u8,
}

impl ExpTerm {
    fn value(&self, x: f64) -> Complex64 {
        let e = (self.rate * x).exp() * self.coef;
        if self.power == 1 {
            e * x
        } else {
            e
        }
    }

    fn deriv(&self, x: f64) -> Complex64 {
        let e = (self.rate * x).exp() * self.coef;
        if self.power == 1 {
            e * (self.rate * x + 1.0)
        } else {
            e * self.rate
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    /// Real part of a sum of exponential terms; `dominant` marks the
    /// `e^{Φ_q x}/ψ'(Φ_q)` term when it exists.
    ExpSum {
        terms: Vec<ExpTerm>,
        dominant: Option<usize>,
    },
    /// `W_q(x) = √x E_{3/2,3/2}(q x^{3/2})`.
    Stable,
}

/// `W_q` for one model and one `q`, with roots and residues precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleFunction {
    q: f64,
    phi: f64,
    repr: Repr,
}

impl ScaleFunction {
    pub fn new(model: &ModelSpec, q: f64) -> Result<Self> {
        model.validate()?;
        let phi = model.phi(q)?;
        let repr = match *model {
            ModelSpec::BrownianDrift { mu, sigma } => {
                let s2 = sigma * sigma;
                let root = (mu * mu + 2.0 * q * s2).sqrt();
                if root <= 1e-12 * (mu.abs() + sigma) {
                    Repr::ExpSum {
                        terms: vec![real_term(2.0 / s2, 0.0, 1)],
                        dominant: None,
                    }
                } else {
                    let rho = (-root - mu) / s2;
                    Repr::ExpSum {
                        terms: vec![real_term(1.0 / root, phi, 0), real_term(-1.0 / root, rho, 0)],
                        dominant: Some(0),
                    }
                }
            }
            ModelSpec::CramerLundbergExp { c, eta, alpha } => {
                let (plus, minus) = cl_roots(c, eta, alpha, q);
                if plus - minus <= 1e-12 * (plus.abs() + minus.abs() + alpha) {
                    // Double root at 0: W(x) = (1 + αx)/c.
                    Repr::ExpSum {
                        terms: vec![real_term(1.0 / c, 0.0, 0), real_term(alpha / c, 0.0, 1)],
                        dominant: None,
                    }
                } else {
                    let gap = c * (plus - minus);
                    Repr::ExpSum {
                        terms: vec![
                            real_term((plus + alpha) / gap, plus, 0),
                            real_term(-(minus + alpha) / gap, minus, 0),
                        ],
                        dominant: Some(0),
                    }
                }
            }
            ModelSpec::JumpDiffusionPhaseType(ref p) => {
                let (terms, dominant) = p.scale_terms(q, phi)?;
                Repr::ExpSum {
                    terms,
                    dominant: Some(dominant),
                }
            }
            ModelSpec::StableThreeHalves => Repr::Stable,
        };
        Ok(ScaleFunction { q, phi, repr })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// The exponential terms, when the representation is a finite sum.
    pub fn terms(&self) -> Option<&[ExpTerm]> {
        match &self.repr {
            Repr::ExpSum { terms, .. } => Some(terms),
            Repr::Stable => None,
        }
    }

    /// `W_q(x)`, zero for `x < 0`.
    pub fn value(&self, x: f64) -> Result<f64> {
        if x < 0.0 {
            return Ok(0.0);
        }
        match &self.repr {
            Repr::ExpSum { terms, .. } => Ok(terms.iter().map(|t| t.value(x)).sum::<Complex64>().re),
            Repr::Stable => Ok(x.sqrt() * mittag_leffler(3, self.q * x * x.sqrt())?),
        }
    }

    /// `W_q'(x)`, the right derivative at 0 and zero for `x < 0`.
    ///
    /// Infinite at 0 for the stable family.
    pub fn deriv(&self, x: f64) -> Result<f64> {
        if x < 0.0 {
            return Ok(0.0);
        }
        match &self.repr {
            Repr::ExpSum { terms, .. } => Ok(terms.iter().map(|t| t.deriv(x)).sum::<Complex64>().re),
            Repr::Stable => {
                if x == 0.0 {
                    return Ok(f64::INFINITY);
                }
                Ok(mittag_leffler(1, self.q * x * x.sqrt())? / x.sqrt())
            }
        }
    }

    /// `W_q(0+)`.
    pub fn at_zero(&self) -> Result<f64> {
        self.value(0.0)
    }

    /// `W_q(x) - e^{Φ_q x}/ψ'(Φ_q)` together with its derivative, for
    /// `x >= 0`. Without a dominant term this is `(W_q, W_q')`.
    pub fn residual(&self, x: f64) -> Result<(f64, f64)> {
        match &self.repr {
            Repr::ExpSum { terms, dominant } => {
                let mut v = Complex64::new(0.0, 0.0);
                let mut d = Complex64::new(0.0, 0.0);
                for (i, t) in terms.iter().enumerate() {
                    if Some(i) != *dominant {
                        v += t.value(x);
                        d += t.deriv(x);
                    }
                }
                Ok((v.re, d.re))
            }
            Repr::Stable => self.stable_residual(x),
        }
    }

    /// Branch-cut form `-(1/π)∫_0^∞ e^{-xt} t^{3/2}/(q²+t³) dt` for large
    /// `Φx`; direct subtraction where the dominant term is still modest.
    fn stable_residual(&self, x: f64) -> Result<(f64, f64)> {
        if self.q == 0.0 {
            return Ok((self.value(x)?, self.deriv(x)?));
        }
        let phi = self.phi;
        let dpsi = 1.5 * phi.sqrt();
        if phi * x <= 2.0 {
            let e = (phi * x).exp() / dpsi;
            return Ok((self.value(x)? - e, self.deriv(x)? - phi * e));
        }
        let q2 = self.q * self.q;
        let tol = Tolerance {
            abs_tol: 1e-300,
            rel_tol: 1e-13,
            max_iter: 400,
        };
        let quad = Quadrature::new(tol).initial_panel(1.0 / x);
        let weight = |t: f64| t * t.sqrt() / (q2 + t * t * t);
        let v = quad.integrate(|t: f64| (-x * t).exp() * weight(t), 0.0, f64::INFINITY)?;
        let d = quad.integrate(|t: f64| t * (-x * t).exp() * weight(t), 0.0, f64::INFINITY)?;
        let pi = std::f64::consts::PI;
        Ok((-v.value / pi, d.value / pi))
    }

    /// `e^{Φ_q x}/ψ'(Φ_q)` coefficient, when a dominant term exists.
    pub fn dominant_coef(&self) -> Option<f64> {
        match &self.repr {
            Repr::ExpSum { terms, dominant } => dominant.map(|i| terms[i].coef.re),
            Repr::Stable if self.q > 0.0 => Some(1.0 / (1.5 * self.phi.sqrt())),
            Repr::Stable => None,
        }
    }

    /// `∫_0^x W_q(y) dy`, closed form for exponential sums.
    pub fn integral(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Ok(0.0);
        }
        match &self.repr {
            Repr::ExpSum { terms, .. } => {
                let mut s = Complex64::new(0.0, 0.0);
                for t in terms {
                    s += exp_moment(t, x, Complex64::new(0.0, 0.0));
                }
                Ok(s.re)
            }
            Repr::Stable => {
                // Termwise integration raises β from 3/2 to 5/2.
                let z = self.q * x * x.sqrt();
                Ok(x * x.sqrt() * mittag_leffler(5, z)?)
            }
        }
    }

    /// `∫_0^x e^{-θy} W_q(y) dy`, closed form for exponential sums.
    pub fn laplace_partial(&self, x: f64, theta: f64) -> Result<Option<f64>> {
        match &self.repr {
            Repr::ExpSum { terms, .. } => {
                if x <= 0.0 {
                    return Ok(Some(0.0));
                }
                let mut s = Complex64::new(0.0, 0.0);
                for t in terms {
                    s += exp_moment(t, x, Complex64::from(theta));
                }
                Ok(Some(s.re))
            }
            Repr::Stable => Ok(None),
        }
    }
}

fn real_term(coef: f64, rate: f64, power: u8) -> ExpTerm {
    ExpTerm {
        coef: Complex64::from(coef),
        rate: Complex64::from(rate),
        power,
    }
}

/// `∫_0^x e^{-θy} coef·y^p·e^{ρy} dy` for `p ∈ {0, 1}`.
fn exp_moment(t: &ExpTerm, x: f64, theta: Complex64) -> Complex64 {
    let a = t.rate - theta;
    let ax = a * x;
    if ax.norm() < 1e-3 {
        // Series in a·x to avoid cancellation in (e^{ax} - 1)/a.
        let mut sum = Complex64::new(0.0, 0.0);
        let mut term = Complex64::from(1.0);
        let p = t.power as f64;
        for k in 0..12 {
            sum += term / (k as f64 + 1.0 + p);
            term = term * ax / (k as f64 + 1.0);
        }
        return t.coef * sum * x.powi(1 + t.power as i32);
    }
    let e = ax.exp();
    if t.power == 0 {
        t.coef * (e - 1.0) / a
    } else {
        t.coef * ((ax - 1.0) * e + 1.0) / (a * a)
    }
}

/// Checks `W_q` against `1/(ψ(λ) - q)` by quadrature; used in tests.
#[allow(dead_code)]
pub(crate) fn laplace_check(model: &ModelSpec, q: f64, lambda: f64, upper: f64) -> Result<f64> {
    let w = ScaleFunction::new(model, q)?;
    let tol = Tolerance::fine();
    let r = Quadrature::new(tol).sqrt_singular(true).integrate(
        |y: f64| (-lambda * y).exp() * w.value(y).unwrap_or(f64::NAN),
        0.0,
        upper,
    )?;
    let target = 1.0 / (model.laplace_exponent(lambda)? - q);
    if !target.is_finite() {
        return Err(Error::DomainError(format!("psi(lambda) = q at lambda={lambda}")));
    }
    Ok((r.value - target).abs() / target.abs())
}
