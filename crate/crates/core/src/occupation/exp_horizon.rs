use rayon::prelude::*;

use super::grid::{cumulative_integral, integrate_checked, validate_grid};
use super::{clamp_probability, Horizon, OccupationDistribution};
use crate::levy_models::ModelSpec;
use crate::scale::{b_kernel_against, deriv_atom_against, lambda_delayed_deriv, z_scale, ScaleContext};
use crate::{Error, Result};

/// Where `y = 0` is requested, singular densities are reported at this
/// right offset instead.
const ZERO_OFFSET: f64 = 1e-12;

fn check_rate(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::DomainError(format!("{name} must be > 0, got {v}")));
    }
    Ok(())
}

#[derive(Debug, Clone)]
enum Form {
    /// Start at 0: `(λ/Φ_λ)[W_λ(0)δ_0 + e^{-λy}Λ'(0,y)dy]` with `Λ'` at rate 0.
    AtZero { ctx0: ScaleContext },
    /// `λe^{-λy}[B(x,y) - λ∫_0^y B + K]`.
    General,
}

/// Law of the occupation time below 0 up to an independent exponential
/// time of rate `λ`, for one model and start.
///
/// Writing `K = Z_λ(x) - (λ/Φ_λ)W_λ(x)` and `G(y) = ∫_0^y B^(λ)(x,s)ds`,
/// the cdf is `atom0 + K(1 - e^{-λy}) + λe^{-λy}G(y)`.
#[derive(Debug, Clone)]
pub struct ExpHorizonLaw {
    ctx: ScaleContext,
    /// Process whose transition law the kernel integrates against; differs
    /// from the scale-function model for the refracted process.
    law: ModelSpec,
    delta: Option<f64>,
    x: f64,
    lambda: f64,
    k: f64,
    atom0: f64,
    /// Point mass of `s ↦ B(x, s)` as `(s₀, mass)`.
    b_atom: Option<(f64, f64)>,
    form: Form,
}

impl ExpHorizonLaw {
    pub fn new(model: &ModelSpec, x: f64, lambda: f64) -> Result<Self> {
        let mut law = Self::build(ScaleContext::new(model, lambda)?, model, None, x)?;
        if x == 0.0 {
            law.form = Form::AtZero { ctx0: law.ctx.at_rate(0.0)? };
        }
        Ok(law)
    }

    /// The general form with `ctx` holding the scale functions and `law`
    /// the process driving the kernel.
    pub(crate) fn build(ctx: ScaleContext, law: &ModelSpec, delta: Option<f64>, x: f64) -> Result<Self> {
        let lambda = ctx.q();
        check_rate("lambda", lambda)?;
        if !x.is_finite() {
            return Err(Error::DomainError(format!("start must be finite, got {x}")));
        }
        let phi = ctx.phi();
        let (z, w) = if x < 0.0 { (1.0, 0.0) } else { (ctx.z(x)?, ctx.w(x)?) };
        let k = z - lambda / phi * w;
        let atom0 = if x < 0.0 { 0.0 } else { clamp_probability(1.0 - k, "atom0")? };
        let b_atom = deriv_atom_against(&ctx, law, x)?.map(|(s0, m)| (s0, m / phi));
        Ok(ExpHorizonLaw {
            ctx,
            law: law.clone(),
            delta,
            x,
            lambda,
            k,
            atom0,
            b_atom,
            form: Form::General,
        })
    }

    pub fn atom0(&self) -> f64 {
        self.atom0
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn start(&self) -> f64 {
        self.x
    }

    /// `Z_λ(x) - (λ/Φ_λ)W_λ(x)`, the probability of going below 0 before the
    /// exponential time.
    pub fn below_before_horizon(&self) -> f64 {
        self.k
    }

    /// Point mass of the occupation time away from 0 as `(y₀, mass)`.
    pub fn interior_atom(&self) -> Option<(f64, f64)> {
        let (s0, m) = self.b_atom?;
        Some((s0, self.lambda * (-self.lambda * s0).exp() * m))
    }

    fn breaks(&self) -> Vec<f64> {
        self.b_atom.iter().map(|(s0, _)| *s0).collect()
    }

    fn b(&self, s: f64) -> Result<f64> {
        b_kernel_against(&self.ctx, &self.law, self.x, s.max(ZERO_OFFSET))
    }

    /// `G(y) = ∫_0^y B^(λ)(x, s) ds`, point mass included.
    pub fn b_integral(&self, y: f64) -> Result<f64> {
        let tol = self.ctx.tolerance();
        let mut cuts = vec![0.0];
        cuts.extend(self.breaks().into_iter().filter(|t| *t < y));
        cuts.push(y);
        let mut g = 0.0;
        for w in cuts.windows(2) {
            g += integrate_checked(&|s| self.b(s), w[0], w[1], w[0] == 0.0, tol)?;
        }
        Ok(g + self.atom_part(y))
    }

    fn atom_part(&self, y: f64) -> f64 {
        match self.b_atom {
            Some((s0, m)) if s0 <= y => m,
            _ => 0.0,
        }
    }

    fn density_with(&self, y: f64, g: f64) -> Result<f64> {
        let l = self.lambda;
        let y = y.max(ZERO_OFFSET);
        let e = (-l * y).exp();
        match &self.form {
            Form::AtZero { ctx0 } => Ok(l / self.ctx.phi() * e * lambda_delayed_deriv(ctx0, 0.0, y)?),
            Form::General => Ok(l * e * (self.b(y)? - l * g + self.k)),
        }
    }

    /// Density of the absolutely continuous part at `y > 0`.
    pub fn density(&self, y: f64) -> Result<f64> {
        match self.form {
            Form::AtZero { .. } => self.density_with(y, 0.0),
            Form::General => self.density_with(y, self.b_integral(y)?),
        }
    }

    /// `P(O ≤ y)`, atoms included.
    pub fn cdf(&self, y: f64) -> Result<f64> {
        if y < 0.0 {
            return Ok(0.0);
        }
        Ok(self.cdf_grid(&[y])?[0])
    }

    /// `P(O > r) = e^{-λr}(K - λG(r))`.
    pub fn tail(&self, r: f64) -> Result<f64> {
        check_rate("r", r)?;
        let e = (-self.lambda * r).exp();
        clamp_probability(e * (self.k - self.lambda * self.b_integral(r)?), "tail")
    }

    fn cdf_grid(&self, grid: &[f64]) -> Result<Vec<f64>> {
        let l = self.lambda;
        match &self.form {
            Form::AtZero { ctx0 } => {
                let scale = l / self.ctx.phi();
                let acc = cumulative_integral(
                    |s| Ok((-l * s).exp() * lambda_delayed_deriv(ctx0, 0.0, s)?),
                    grid,
                    &[],
                    self.ctx.tolerance(),
                )?;
                Ok(acc.into_iter().map(|a| self.atom0 + scale * a).collect())
            }
            Form::General => {
                let g = self.g_grid(grid)?;
                Ok(grid.iter().zip(g).map(|(y, g)| self.cdf_from(*y, g)).collect())
            }
        }
    }

    fn cdf_from(&self, y: f64, g: f64) -> f64 {
        let e = (-self.lambda * y).exp();
        self.atom0 + self.k * (1.0 - e) + self.lambda * e * g
    }

    fn g_grid(&self, grid: &[f64]) -> Result<Vec<f64>> {
        let g = cumulative_integral(|s| self.b(s), grid, &self.breaks(), self.ctx.tolerance())?;
        Ok(grid.iter().zip(g).map(|(y, g)| g + self.atom_part(*y)).collect())
    }

    /// Density and cdf on a grid, sharing the prefix integrals.
    pub fn distribution(&self, y_grid: &[f64]) -> Result<OccupationDistribution> {
        validate_grid(y_grid)?;
        let l = self.lambda;
        let (density, cdf) = match self.form {
            Form::AtZero { .. } => {
                let d = y_grid
                    .par_iter()
                    .map(|y| self.density_with(*y, 0.0))
                    .collect::<Result<Vec<_>>>()?;
                (d, self.cdf_grid(y_grid)?)
            }
            Form::General => {
                let g = self.g_grid(y_grid)?;
                let d = y_grid
                    .par_iter()
                    .zip(&g)
                    .map(|(y, g)| self.density_with(*y, *g))
                    .collect::<Result<Vec<_>>>()?;
                let c = y_grid.iter().zip(&g).map(|(y, g)| self.cdf_from(*y, *g)).collect();
                (d, c)
            }
        };
        let mut d = OccupationDistribution::assemble(
            self.atom0,
            y_grid.to_vec(),
            density,
            cdf,
            Horizon::Exponential { lambda: l },
            self.interior_atom().into_iter().collect(),
        )?;
        d.delta = self.delta;
        Ok(d)
    }
}

/// `E_x[e^{-q O}]` for the occupation time up to an exponential time of
/// rate `λ`.
pub fn lt_occupation_exp_horizon(model: &ModelSpec, x: f64, q: f64, lambda: f64) -> Result<f64> {
    check_rate("q", q)?;
    check_rate("lambda", lambda)?;
    let ctx = ScaleContext::new(model, lambda)?;
    let phi_l = ctx.phi();
    let phi_lq = model.phi(lambda + q)?;
    let z_theta = z_scale(&ctx, x, phi_lq)?;
    let z = if x < 0.0 { 1.0 } else { ctx.z(x)? };
    let v = lambda * (phi_lq - phi_l) / ((lambda + q) * phi_l) * z_theta - q * z / (q + lambda) + 1.0;
    clamp_probability(v, "Laplace transform")
}

/// The law of the occupation time up to an exponential time, on `y_grid`.
pub fn occupation_density_exp_horizon(
    model: &ModelSpec,
    x: f64,
    lambda: f64,
    y_grid: &[f64],
) -> Result<OccupationDistribution> {
    ExpHorizonLaw::new(model, x, lambda)?.distribution(y_grid)
}

/// Law of `e_λ - G_{e_λ}`, the time since the last running maximum, which
/// coincides with the occupation law started at 0.
pub fn last_time_at_max_dist(
    model: &ModelSpec,
    x: f64,
    lambda: f64,
    y_grid: &[f64],
) -> Result<OccupationDistribution> {
    if x != 0.0 {
        return Err(Error::InvalidStart { x });
    }
    occupation_density_exp_horizon(model, 0.0, lambda, y_grid)
}

/// `E_x[e^{-λ σ_r}]` where `σ_r` is the first time the occupation below 0
/// exceeds `r`; equal to `P_x(O_{e_λ} > r)`.
pub fn lt_inverse_occupation(model: &ModelSpec, x: f64, r: f64, lambda: f64) -> Result<f64> {
    ExpHorizonLaw::new(model, x, lambda)?.tail(r)
}

#[cfg(test)]
mod tests {
    use super::super::grid::gauss_grid;
    use super::*;

    fn bm() -> ModelSpec {
        ModelSpec::bm(1.0, 1.0).unwrap()
    }

    fn cl() -> ModelSpec {
        ModelSpec::cl(1.0, 0.5, 1.0).unwrap()
    }

    /// Panels for a GL grid covering the bulk of `e_λ`, with the interior
    /// atom as an edge.
    fn edges(lambda: f64, atom: Option<f64>) -> Vec<f64> {
        let mut e: Vec<f64> = [0.05, 0.25, 0.5, 1.0, 2.0, 4.0, 7.0, 11.0, 16.0, 24.0, 34.0]
            .iter()
            .map(|v| v / lambda)
            .collect();
        if let Some(a) = atom {
            e.push(a);
            e.sort_by(f64::total_cmp);
        }
        e
    }

    fn mass_and_lt(model: &ModelSpec, x: f64, lambda: f64, qs: &[f64]) -> (f64, Vec<f64>) {
        let law = ExpHorizonLaw::new(model, x, lambda).unwrap();
        let atom = law.interior_atom();
        let (y, w) = gauss_grid(&edges(lambda, atom.map(|a| a.0)), 12);
        let d = law.distribution(&y).unwrap();
        let mut mass = d.atom0;
        let mut lts = vec![d.atom0; qs.len()];
        for ((y, w), f) in y.iter().zip(&w).zip(&d.density) {
            mass += w * f;
            for (lt, q) in lts.iter_mut().zip(qs) {
                *lt += w * f * (-q * y).exp();
            }
        }
        if let Some((y0, m)) = atom {
            mass += m;
            for (lt, q) in lts.iter_mut().zip(qs) {
                *lt += m * (-q * y0).exp();
            }
        }
        (mass, lts)
    }

    #[test]
    fn mass_and_laplace_round_trip() {
        for m in [bm(), cl()] {
            for x in [-1.0, 0.0, 1.0] {
                let lambda = 1.0;
                let qs = [0.1, 1.0, 5.0];
                let (mass, lts) = mass_and_lt(&m, x, lambda, &qs);
                assert!((mass - 1.0).abs() < 1e-6, "{} x={x}: mass {mass}", m.name());
                for (q, lt) in qs.iter().zip(lts) {
                    let want = lt_occupation_exp_horizon(&m, x, *q, lambda).unwrap();
                    assert!((lt - want).abs() < 1e-6 * want, "{} x={x} q={q}: {lt} vs {want}", m.name());
                }
            }
        }
    }

    #[test]
    fn cl_atom_at_zero() {
        let law = ExpHorizonLaw::new(&cl(), 0.0, 1.0).unwrap();
        let phi = cl().phi(1.0).unwrap();
        assert!((law.atom0() - 1.0 / phi).abs() < 1e-12);
        assert_eq!(ExpHorizonLaw::new(&bm(), 0.0, 1.0).unwrap().atom0(), 0.0);
    }

    #[test]
    fn cl_interior_atom_below_zero() {
        let law = ExpHorizonLaw::new(&cl(), -1.0, 1.0).unwrap();
        let (y0, m) = law.interior_atom().unwrap();
        // No claim before reaching 0 at time 1, then stay above 0 until e_1.
        let phi = cl().phi(1.0).unwrap();
        let want = (-1.0f64).exp() * (-0.5f64).exp() / phi;
        assert!((y0 - 1.0).abs() < 1e-15 && (m - want).abs() < 1e-12, "{m} vs {want}");
    }

    #[test]
    fn tail_matches_cdf() {
        for m in [bm(), cl()] {
            let law = ExpHorizonLaw::new(&m, 0.5, 1.0).unwrap();
            for r in [0.3, 2.0] {
                let t = lt_inverse_occupation(&m, 0.5, r, 1.0).unwrap();
                assert!((t - (1.0 - law.cdf(r).unwrap())).abs() < 1e-12);
            }
            assert!(lt_inverse_occupation(&m, 0.5, 50.0, 1.0).unwrap() < 1e-15);
        }
    }

    #[test]
    fn laplace_transform_limits() {
        let v = lt_occupation_exp_horizon(&cl(), 1.0, 1e-8, 1.0).unwrap();
        assert!((v - 1.0).abs() < 1e-6);
        let deep = lt_occupation_exp_horizon(&cl(), -50.0, 1.0, 1.0).unwrap();
        assert!((deep - 0.5).abs() < 1e-4, "{deep}");
    }

    #[test]
    fn last_time_requires_zero_start() {
        let grid = [0.5, 1.0];
        assert!(matches!(last_time_at_max_dist(&cl(), 1.0, 1.0, &grid), Err(Error::InvalidStart { .. })));
        let a = last_time_at_max_dist(&cl(), 0.0, 1.0, &grid).unwrap();
        let b = occupation_density_exp_horizon(&cl(), 0.0, 1.0, &grid).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cdf_is_ordered_in_start() {
        let grid = [0.1, 0.5, 1.0, 2.0, 5.0];
        for m in [bm(), cl()] {
            let cdfs: Vec<Vec<f64>> = [-1.0, 0.0, 1.0, 2.0]
                .iter()
                .map(|x| occupation_density_exp_horizon(&m, *x, 1.0, &grid).unwrap().cdf)
                .collect();
            for w in cdfs.windows(2) {
                for (a, b) in w[0].iter().zip(&w[1]) {
                    assert!(a <= &(b + 1e-9), "{}: {a} > {b}", m.name());
                }
            }
        }
    }

    #[test]
    fn small_rate_approaches_infinite_horizon() {
        let grid = [0.5, 1.0, 3.0, 10.0];
        for x in [0.0, 1.0] {
            let e = occupation_density_exp_horizon(&cl(), x, 1e-3, &grid).unwrap();
            let inf = super::super::dist_infinite(&cl(), x, &grid).unwrap();
            for (a, b) in e.cdf.iter().zip(&inf.cdf) {
                assert!(*a >= b - 1e-9 && a - b < 0.02, "x={x}: {a} vs {b}");
            }
        }
    }
}
