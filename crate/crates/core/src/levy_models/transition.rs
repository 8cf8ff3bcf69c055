use super::phase_type::{poisson_upper, ClaimSum};
use super::ModelSpec;
use crate::numerics::{integrate, ln_gamma, normal_pdf, whittaker_w_scaled, Tolerance};
use crate::{Error, Result};

const CL_SERIES_CAP: usize = 400;

#[derive(Debug, Clone)]
enum Law {
    Normal { mean: f64, sd: f64 },
    CompoundExp { c: f64, eta: f64, alpha: f64 },
    PhaseType { c: f64, sd: f64, claims: ClaimSum },
    Stable,
}

/// Law of `X_t` started at 0: an optional atom plus a density.
#[derive(Debug, Clone)]
pub struct TransitionMeasure {
    pub time: f64,
    pub atom_location: Option<f64>,
    pub atom_mass: f64,
    model: ModelSpec,
    law: Law,
}

impl TransitionMeasure {
    pub fn new(model: &ModelSpec, t: f64) -> Result<Self> {
        model.validate()?;
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::DomainError(format!("transition law needs t > 0, got {t}")));
        }
        let (atom, law) = match *model {
            ModelSpec::BrownianDrift { mu, sigma } => (
                None,
                Law::Normal {
                    mean: mu * t,
                    sd: sigma * t.sqrt(),
                },
            ),
            ModelSpec::CramerLundbergExp { c, eta, alpha } => {
                (Some((c * t, (-eta * t).exp())), Law::CompoundExp { c, eta, alpha })
            }
            ModelSpec::JumpDiffusionPhaseType(ref p) => {
                let claims = p.claim_sum(t)?;
                let atom = if p.sigma == 0.0 {
                    Some((p.c * t, claims.no_claim))
                } else {
                    None
                };
                (
                    atom,
                    Law::PhaseType {
                        c: p.c,
                        sd: p.sigma * t.sqrt(),
                        claims,
                    },
                )
            }
            ModelSpec::StableThreeHalves => (None, Law::Stable),
        };
        Ok(TransitionMeasure {
            time: t,
            atom_location: atom.map(|a| a.0),
            atom_mass: atom.map_or(0.0, |a| a.1),
            model: model.clone(),
            law,
        })
    }

    /// Density of the continuous part at `z`.
    pub fn density(&self, z: f64) -> Result<f64> {
        let t = self.time;
        match &self.law {
            Law::Normal { mean, sd } => Ok(normal_pdf((z - mean) / sd) / sd),
            Law::CompoundExp { c, eta, alpha } => cl_density(*c, *eta, *alpha, t, z),
            Law::PhaseType { c, sd, claims } => {
                let shift = c * t - z;
                if *sd == 0.0 {
                    return Ok(claims.density(shift));
                }
                let no_claim = claims.no_claim * normal_pdf(shift / sd) / sd;
                let lo = (shift - 12.0 * sd).max(0.0);
                let hi = (shift + 12.0 * sd).min(claims.y_max);
                if hi <= lo {
                    return Ok(no_claim);
                }
                let tol = Tolerance {
                    abs_tol: 1e-15,
                    rel_tol: 1e-11,
                    max_iter: 200,
                };
                let conv = integrate(
                    |y: f64| claims.density(y) * normal_pdf((shift - y) / sd) / sd,
                    lo,
                    hi,
                    &tol,
                )?;
                Ok(no_claim + conv.value)
            }
            Law::Stable => {
                let s = t.powf(2.0 / 3.0);
                Ok(stable_unit_density(z / s)? / s)
            }
        }
    }

    /// An interval holding all but a negligible part of the law of `X_t`
    /// tilted by `e^{θX_t}`, for the `θ` at which integrands grow.
    pub fn bulk(&self, theta: f64) -> (f64, f64) {
        let t = self.time;
        match &self.law {
            Law::Normal { mean, sd } => {
                let tilted = mean + sd * sd * theta;
                (tilted.min(*mean) - 14.0 * sd, tilted.max(*mean) + 14.0 * sd)
            }
            Law::CompoundExp { c, eta, alpha } => {
                // Tilting by θ < 0 slows claim decay to α + θ and raises
                // the intensity to ηα/(α + θ).
                let rate = alpha + theta.min(0.0).max(-0.9 * alpha);
                let intensity = eta * alpha / rate;
                let k = poisson_upper(intensity * t) as f64;
                let span = (k + 12.0 * k.sqrt() + 40.0) / rate;
                (c * t - span, c * t)
            }
            Law::PhaseType { c, sd, claims } => (c * t - claims.y_max - 14.0 * sd, c * t + 14.0 * sd),
            Law::Stable => {
                // The right tail decays like exp(-(4/27)(z/s)^3); tilting
                // moves the peak to tψ'(θ) with curvature (8/9)z*/t².
                let s = t.powf(2.0 / 3.0);
                let zstar = 1.5 * t * theta.max(0.0).sqrt();
                let sd = if zstar > 0.0 { t / (8.0 / 9.0 * zstar).sqrt() } else { 0.0 };
                (f64::NEG_INFINITY, 8.0 * s + zstar + 12.0 * sd)
            }
        }
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }
}

/// `P(X_t ∈ dz)/dz` for the Cramér–Lundberg model below the atom at `ct`.
///
/// With `s = ct - z` and `κ = ηtαs` the density is
/// `e^{-ηt-αs}/s · Σ_{n>=1} κ^n/(n!(n-1)!)`, summed in log scale.
fn cl_density(c: f64, eta: f64, alpha: f64, t: f64, z: f64) -> Result<f64> {
    let s = c * t - z;
    if !(s > 0.0) {
        return Ok(0.0);
    }
    let kappa = eta * t * alpha * s;
    let ln_k = kappa.ln();
    let scale = 2.0 * kappa.sqrt();
    let peak = kappa.sqrt();
    let mut ln_term = ln_k;
    let mut sum = 0.0;
    for n in 1..=CL_SERIES_CAP {
        let term = (ln_term - scale).exp();
        sum += term;
        if n as f64 > peak && term <= 1e-16 * sum {
            let ln = -eta * t - alpha * s - s.ln() + scale + sum.ln();
            return Ok(ln.exp());
        }
        let nf = n as f64;
        ln_term += ln_k - (nf * (nf + 1.0)).ln();
    }
    Err(Error::SeriesNotConverged(format!(
        "compound Poisson density at t={t}, z={z} needs more than {CL_SERIES_CAP} terms"
    )))
}

/// Density of `X_1` for `ψ(λ) = λ^{3/2}`, via Whittaker functions of
/// `u = (4/27)|y|³`.
pub(crate) fn stable_unit_density(y: f64) -> Result<f64> {
    if y == 0.0 {
        return Ok(stable_density_at_zero());
    }
    let u = 4.0 / 27.0 * y.abs().powi(3);
    let pi = std::f64::consts::PI;
    if y > 0.0 {
        if u > 1400.0 {
            return Ok(0.0);
        }
        let w = whittaker_w_scaled(0.5, 1.0 / 6.0, u)?;
        Ok((3.0 / pi).sqrt() / y * (-u).exp() * w)
    } else {
        let w = whittaker_w_scaled(-0.5, 1.0 / 6.0, u)?;
        Ok(-1.0 / (2.0 * (3.0 * pi).sqrt()) / y * w)
    }
}

/// `f_1(0) = √(3/π)·(4^{1/3}/3)·Γ(1/3)/Γ(1/6)`, the limit of the `y > 0`
/// branch.
fn stable_density_at_zero() -> f64 {
    let pi = std::f64::consts::PI;
    (3.0 / pi).sqrt() * 4f64.cbrt() / 3.0 * (ln_gamma(1.0f64 / 3.0) - ln_gamma(1.0f64 / 6.0)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy_models::PhaseType;
    use crate::numerics::Quadrature;

    fn mass(tm: &TransitionMeasure) -> f64 {
        let (lo, hi) = tm.bulk(0.0);
        let mut pts = vec![lo.max(-400.0), hi];
        if let Some(a) = tm.atom_location {
            pts.insert(1, a.min(hi));
        }
        let tol = Tolerance {
            abs_tol: 1e-13,
            rel_tol: 1e-11,
            max_iter: 400,
        };
        let mut total = tm.atom_mass;
        for w in pts.windows(2) {
            total += integrate(|z| tm.density(z).unwrap(), w[0], w[1], &tol).unwrap().value;
        }
        total
    }

    #[test]
    fn cl_atom_and_mass() {
        let m = ModelSpec::cl(1.0, 0.5, 1.0).unwrap();
        let tm = m.transition_measure(1.0).unwrap();
        assert_eq!(tm.atom_location, Some(1.0));
        assert!((tm.atom_mass - (-0.5f64).exp()).abs() < 1e-16);
        assert!((mass(&tm) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn bm_density_value() {
        let tm = ModelSpec::bm(0.0, 1.0).unwrap().transition_measure(4.0).unwrap();
        let v = tm.density(0.0).unwrap();
        assert!((v - 1.0 / (8.0 * std::f64::consts::PI).sqrt()).abs() < 1e-16);
    }

    #[test]
    fn cl_density_matches_single_claim_term() {
        // With one claim only, the density is ηt e^{-ηt} α e^{-αs}; compare
        // at tiny κ where the n = 1 term dominates.
        let (c, eta, alpha, t): (f64, f64, f64, f64) = (1.0, 1e-4, 1.0, 1.0);
        let z = 0.5;
        let s = c * t - z;
        let one = eta * t * (-eta * t).exp() * alpha * (-alpha * s).exp();
        let v = cl_density(c, eta, alpha, t, z).unwrap();
        assert!((v - one).abs() / one < 1e-4);
    }

    #[test]
    fn normalisation_all_families() {
        let models = [
            ModelSpec::bm(1.0, 1.0).unwrap(),
            ModelSpec::cl(1.0, 0.5, 1.0).unwrap(),
            ModelSpec::JumpDiffusionPhaseType(
                PhaseType::new(1.5, 0.3, 0.5, vec![-2.0, 2.0, 0.0, -2.0], vec![1.0, 0.0]).unwrap(),
            ),
            ModelSpec::JumpDiffusionPhaseType(
                PhaseType::new(1.2, 0.0, 0.8, vec![-3.0, 1.0, 0.5, -2.0], vec![0.6, 0.4]).unwrap(),
            ),
        ];
        for m in &models {
            for t in [0.5, 1.0, 2.0] {
                let tm = m.transition_measure(t).unwrap();
                let total = mass(&tm);
                assert!((total - 1.0).abs() < 1e-6, "{} t={t}: {total}", m.name());
            }
        }
    }

    #[test]
    fn stable_density_reference_values() {
        // Fourier inversion of E[e^{iuX_1}] = exp((iu)^{3/2}) at 30 digits.
        let refs = [
            (1.0, 0.350_568_075_920_111_6),
            (-1.0, 0.111_982_707_038_605_68),
            (0.5, 0.323_888_561_289_353_2),
            (-3.0, 0.022_525_307_074_017_16),
            (-50.0, 2.393_528_029_065_859_7e-5),
            (-7.45, 2.750_200_398_194_694_4e-3),
        ];
        for (y, v) in refs {
            let got = stable_unit_density(y).unwrap();
            assert!((got - v).abs() < 1e-8 * v.max(1e-3), "y={y}: {got} vs {v}");
        }
        let near = stable_unit_density(1e-6).unwrap();
        assert!((near - stable_density_at_zero()).abs() < 1e-5);
    }

    #[test]
    fn stable_scaling_mass() {
        let tm = ModelSpec::StableThreeHalves.transition_measure(2.0).unwrap();
        let quad = Quadrature::new(Tolerance {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_iter: 400,
        });
        let right = quad.integrate(|z| tm.density(z).unwrap(), 0.0, tm.bulk(0.0).1).unwrap();
        // Left tail ~ |y|^{-5/2}: integrate in u = 1/√(-z) to tame it.
        let left = quad
            .integrate(
                |u: f64| {
                    if u == 0.0 {
                        return 0.0;
                    }
                    let z = -1.0 / (u * u);
                    tm.density(z).unwrap() * 2.0 / (u * u * u)
                },
                0.0,
                1.0,
            )
            .unwrap();
        let near = quad.integrate(|z| tm.density(z).unwrap(), -1.0, 0.0).unwrap();
        assert!((right.value - 2.0 / 3.0).abs() < 1e-7, "{}", right.value);
        assert!((right.value + near.value + left.value - 1.0).abs() < 1e-6, "{} {}", right.value, left.value + near.value);
    }
}
