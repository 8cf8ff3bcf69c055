use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{lambda_delayed, lambda_delayed_deriv, lambda_deriv_atom, z_scale, z_scale_tail_form, ScaleContext};
use crate::levy_models::ScaleFunction;
use crate::numerics::Quadrature;
use crate::Result;

/// Sample points for [`verify_identities`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityGrid {
    pub x: Vec<f64>,
    pub r: Vec<f64>,
    /// `(p, s)` rate pairs for the convolution identity.
    pub pairs: Vec<(f64, f64)>,
    /// Laplace variables for the exponential-horizon transforms.
    pub laplace_q: Vec<f64>,
    /// Pass threshold on the relative error (with a small absolute floor).
    pub tolerance: f64,
}

impl Default for IdentityGrid {
    fn default() -> Self {
        IdentityGrid {
            x: vec![-1.0, -0.5, 0.0, 0.5, 1.0, 2.0],
            r: vec![0.25, 1.0, 4.0],
            pairs: vec![(0.0, 1.0), (0.5, 1.5)],
            laplace_q: vec![1.0],
            tolerance: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub max_abs_err: f64,
    pub max_rel_err: f64,
    pub worst_point: BTreeMap<String, f64>,
    pub points: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// Identity name to its error summary.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub identities: BTreeMap<String, IdentityCheck>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.identities.values().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&IdentityCheck> {
        self.identities.get(name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.identities).unwrap_or_default()
    }
}

const ABS_FLOOR: f64 = 1e-9;

struct Sample {
    point: Vec<(&'static str, f64)>,
    outcome: Result<(f64, f64)>,
}

fn summarise(samples: Vec<Sample>, tolerance: f64) -> IdentityCheck {
    let mut check = IdentityCheck {
        max_abs_err: 0.0,
        max_rel_err: 0.0,
        worst_point: BTreeMap::new(),
        points: samples.len(),
        tolerance,
        passed: true,
    };
    let mut worst = -1.0;
    for s in samples {
        let (abs, rel, badness) = match s.outcome {
            Ok((lhs, rhs)) => {
                let abs = (lhs - rhs).abs();
                let rel = if rhs != 0.0 { abs / rhs.abs() } else { abs };
                (abs, rel, abs / (tolerance * rhs.abs() + ABS_FLOOR))
            }
            Err(_) => (f64::INFINITY, f64::INFINITY, f64::INFINITY),
        };
        // NaN comparisons fail, so a NaN side counts as a failure.
        check.passed &= badness <= 1.0;
        check.max_abs_err = check.max_abs_err.max(abs);
        check.max_rel_err = check.max_rel_err.max(rel);
        if !(badness <= worst) {
            worst = badness;
            check.worst_point = s.point.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        }
    }
    check
}

fn run<P, F>(points: Vec<P>, label: fn(&P) -> Vec<(&'static str, f64)>, f: F) -> Vec<Sample>
where
    P: Sync,
    F: Fn(&P) -> Result<(f64, f64)> + Sync,
{
    points
        .par_iter()
        .map(|p| Sample {
            point: label(p),
            outcome: f(p),
        })
        .collect()
}

/// Evaluates both sides of the scale-function identities on `grid` and
/// reports the largest discrepancies.
///
/// Rows: `convolution`, `lambda_rate_shift` (x ≤ 0), `laplace_lambda`,
/// `laplace_lambda_deriv`, `lambda_at_zero`, `kendall`, plus the cross-checks
/// `lambda_deriv_fd` and `z_tail_form`. Rows needing `q > 0` are skipped
/// when `ctx.q() == 0`.
pub fn verify_identities(ctx: &ScaleContext, grid: &IdentityGrid) -> ValidationReport {
    let tol = grid.tolerance;
    let mut report = ValidationReport::default();
    let mut put = |name: &str, samples: Vec<Sample>| {
        if !samples.is_empty() {
            report.identities.insert(name.to_string(), summarise(samples, tol));
        }
    };
    let q = ctx.q();
    let xs_nonneg: Vec<f64> = grid.x.iter().copied().filter(|x| *x >= 0.0).collect();

    let conv_points: Vec<(f64, f64, f64)> = grid
        .pairs
        .iter()
        .flat_map(|&(p, s)| xs_nonneg.iter().map(move |&x| (p, s, x)))
        .collect();
    put(
        "convolution",
        run(conv_points, |&(p, s, x)| vec![("p", p), ("s", s), ("x", x)], |&(p, s, x)| convolution(ctx, p, s, x)),
    );

    let xr: Vec<(f64, f64)> = grid.x.iter().flat_map(|&x| grid.r.iter().map(move |&r| (x, r))).collect();
    let label_xr = |&(x, r): &(f64, f64)| vec![("x", x), ("r", r)];

    // Points where an atom of X_r lands on the jump of W are kinks in x.
    let atom_rate = ctx.model().premium_rate().filter(|_| ctx.model().has_bounded_variation());
    let regular = |x: f64, r: f64| atom_rate.map_or(true, |c| (x + c * r).abs() > 1e-2);

    if q > 0.0 {
        let points: Vec<(f64, f64)> = xr.iter().copied().filter(|&(x, r)| x <= 0.0 && regular(x, r)).collect();
        put("lambda_rate_shift", run(points, label_xr, |&(x, r)| rate_shift(ctx, x, r)));
    }

    put(
        "lambda_at_zero",
        run(grid.r.clone(), |&r| vec![("r", r)], |&r| Ok((lambda_delayed(ctx, 0.0, r)?, (q * r).exp()))),
    );

    let fd_points: Vec<(f64, f64)> = xr.iter().copied().filter(|&(x, r)| x.abs() > 1e-3 && regular(x, r)).collect();
    put(
        "lambda_deriv_fd",
        run(fd_points, label_xr, |&(x, r)| {
            let h = 1e-4 * (1.0 + x.abs());
            let fd = (lambda_delayed(ctx, x + h, r)? - lambda_delayed(ctx, x - h, r)?) / (2.0 * h);
            Ok((fd, lambda_delayed_deriv(ctx, x, r)?))
        }),
    );

    if q > 0.0 {
        let xq: Vec<(f64, f64)> =
            grid.x.iter().flat_map(|&x| grid.laplace_q.iter().map(move |&lq| (x, lq))).collect();
        let label_xq = |&(x, lq): &(f64, f64)| vec![("x", x), ("q", lq)];
        put("laplace_lambda", run(xq.clone(), label_xq, |&(x, lq)| laplace_lambda(ctx, x, lq)));
        put("laplace_lambda_deriv", run(xq, label_xq, |&(x, lq)| laplace_lambda_deriv(ctx, x, lq)));
        let zq: Vec<(f64, f64)> = grid
            .x
            .iter()
            .filter(|x| **x > 0.0)
            .flat_map(|&z| grid.laplace_q.iter().map(move |&lq| (z, lq)))
            .collect();
        put("kendall", run(zq, |&(z, lq)| vec![("z", z), ("q", lq)], |&(z, lq)| kendall(ctx, z, lq)));
        put(
            "z_tail_form",
            run(xs_nonneg.clone(), |&x| vec![("x", x)], |&x| {
                let theta = ctx.phi() + 0.5;
                Ok((z_scale(ctx, x, theta)?, z_scale_tail_form(ctx, x, theta)?))
            }),
        );
    }
    report
}

/// `(s-p)∫_0^x W_p(x-y)W_s(y)dy` against `W_s(x) - W_p(x)`.
fn convolution(ctx: &ScaleContext, p: f64, s: f64, x: f64) -> Result<(f64, f64)> {
    let wp = ScaleFunction::new(ctx.model(), p)?;
    let ws = ScaleFunction::new(ctx.model(), s)?;
    let rhs = ws.value(x)? - wp.value(x)?;
    if x == 0.0 || p == s {
        return Ok((0.0, rhs));
    }
    let f = |y: f64| wp.value(x - y).unwrap_or(f64::NAN) * ws.value(y).unwrap_or(f64::NAN);
    // Split at the midpoint so each half has at most one √ endpoint.
    let quad = Quadrature::new(ctx.tolerance().scaled(1e-2));
    let left = quad.sqrt_singular(true).integrate(f, 0.0, 0.5 * x)?.value;
    let right = quad.sqrt_singular(true).integrate(|u: f64| f(x - u), 0.0, 0.5 * x)?.value;
    Ok(((s - p) * (left + right), rhs))
}

/// `Λ'(x, r)` at rate 0 against `Λ^(q)'(x,r) - q∫_0^r Λ^(q)'(x,s)ds - qW_q(x)`.
fn rate_shift(ctx: &ScaleContext, x: f64, r: f64) -> Result<(f64, f64)> {
    let q = ctx.q();
    let ctx0 = ctx.at_rate(0.0)?;
    let lhs = lambda_delayed_deriv(&ctx0, x, r)?;
    let integral = Quadrature::new(ctx.tolerance().scaled(10.0))
        .sqrt_singular(true)
        .integrate(|s: f64| if s == 0.0 { 0.0 } else { lambda_delayed_deriv(ctx, x, s).unwrap_or(f64::NAN) }, 0.0, r)?
        .value;
    let atom = match lambda_deriv_atom(ctx, x)? {
        Some((s0, mass)) if s0 < r => mass,
        _ => 0.0,
    };
    let rhs = lambda_delayed_deriv(ctx, x, r)? - q * (integral + atom) - q * ctx.w(x)?;
    Ok((lhs, rhs))
}

/// `∫_0^∞ e^{-(lq+λ)y} g(y) dy` with `λ = ctx.q()`.
///
/// `e^{-λy} g(y)` grows at most polynomially, so the range is cut at
/// `50/lq` where the remaining discount is below `e^{-50}`.
fn discounted<G: Fn(f64) -> Result<f64> + Sync>(ctx: &ScaleContext, lq: f64, g: G) -> Result<f64> {
    let rate = lq + ctx.q();
    let end = 50.0 / lq;
    let split = end.min(1.0);
    let f = |y: f64| {
        if y == 0.0 {
            return 0.0;
        }
        (-rate * y).exp() * g(y).unwrap_or(f64::NAN)
    };
    let quad = Quadrature::new(ctx.tolerance().scaled(10.0));
    let head = quad.sqrt_singular(true).integrate(f, 0.0, split)?.value;
    let tail = quad.integrate(f, split, end)?.value;
    Ok(head + tail)
}

/// `∫_0^∞ e^{-qr} P(τ_z^+ ∈ dr)` with the first-passage law read off the
/// transition law as `(z/r) P(X_r ∈ dz)`, against `e^{-Φ_q z}`.
fn kendall(ctx: &ScaleContext, z: f64, lq: f64) -> Result<(f64, f64)> {
    let model = ctx.model();
    let rhs = (-model.phi(lq)? * z).exp();
    let f = |r: f64| {
        if r == 0.0 {
            return 0.0;
        }
        match model.transition_measure(r).and_then(|tm| tm.density(z)) {
            Ok(d) => (-lq * r).exp() * (z / r) * d,
            Err(_) => f64::NAN,
        }
    };
    let quad = Quadrature::new(ctx.tolerance().scaled(1e-1));
    let (mut lhs, start) = match model.premium_rate().filter(|_| model.has_bounded_variation()) {
        Some(c) => {
            // Claim-free paths cross z at r = z/c exactly.
            let r0 = z / c;
            let tm = model.transition_measure(r0)?;
            ((-lq * r0).exp() * tm.atom_mass, r0)
        }
        None => (0.0, 0.0),
    };
    // The discount is below e^{-60} past the end point.
    let split = start + 1.0;
    lhs += quad.integrate(f, start, split)?.value;
    lhs += quad.integrate(f, split, split + 60.0 / lq)?.value;
    Ok((lhs, rhs))
}

/// `Z_λ(x, Φ_{λ+q})/q` against `∫_0^∞ e^{-qy} e^{-λy} Λ^(λ)(x, y) dy`.
fn laplace_lambda(ctx: &ScaleContext, x: f64, lq: f64) -> Result<(f64, f64)> {
    let theta = ctx.model().phi(ctx.q() + lq)?;
    let lhs = z_scale(ctx, x, theta)? / lq;
    let rhs = discounted(ctx, lq, |y| lambda_delayed(ctx, x, y))?;
    Ok((rhs, lhs))
}

/// `(Φ_{λ+q}Z_λ(x, Φ_{λ+q}) - qW_λ(x))/q` against the transform of `Λ^(λ)'`.
fn laplace_lambda_deriv(ctx: &ScaleContext, x: f64, lq: f64) -> Result<(f64, f64)> {
    let theta = ctx.model().phi(ctx.q() + lq)?;
    let lhs = (theta * z_scale(ctx, x, theta)? - lq * ctx.w(x)?) / lq;
    let atom = match lambda_deriv_atom(ctx, x)? {
        Some((s0, mass)) => (-(lq + ctx.q()) * s0).exp() * mass,
        None => 0.0,
    };
    let rhs = discounted(ctx, lq, |y| lambda_delayed_deriv(ctx, x, y))? + atom;
    Ok((rhs, lhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy_models::{ModelSpec, PhaseType};

    #[test]
    fn convolution_degenerate_pair_is_zero() {
        let ctx = ScaleContext::new(&ModelSpec::cl(1.0, 0.5, 1.0).unwrap(), 1.0).unwrap();
        let (l, r) = convolution(&ctx, 0.7, 0.7, 1.3).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(r, 0.0);
    }

    #[test]
    fn cl_lambda_at_zero_row() {
        let ctx = ScaleContext::new(&ModelSpec::cl(1.0, 0.5, 1.0).unwrap(), 1.0).unwrap();
        let grid = IdentityGrid {
            x: vec![],
            r: vec![0.25, 0.5, 1.0],
            pairs: vec![],
            laplace_q: vec![],
            tolerance: 1e-6,
        };
        let rep = verify_identities(&ctx, &grid);
        let row = rep.get("lambda_at_zero").unwrap();
        assert!(row.passed && row.max_rel_err < 1e-6, "{row:?}");
    }

    #[test]
    fn bm_laplace_identity() {
        let ctx = ScaleContext::new(&ModelSpec::bm(1.0, 1.0).unwrap(), 1.0).unwrap();
        let (a, b) = laplace_lambda(&ctx, 0.5, 1.0).unwrap();
        assert!((a - b).abs() < 1e-4 * b.abs(), "{a} vs {b}");
    }

    #[test]
    fn default_grid_passes_for_bm_and_cl() {
        for m in [ModelSpec::bm(1.0, 1.0).unwrap(), ModelSpec::cl(1.0, 0.5, 1.0).unwrap()] {
            for q in [0.5, 1.0] {
                let ctx = ScaleContext::new(&m, q).unwrap();
                let rep = verify_identities(&ctx, &IdentityGrid::default());
                assert_eq!(rep.identities.len(), 8);
                for (name, row) in &rep.identities {
                    assert!(row.passed, "{} q={q} {name}: {row:?}", m.name());
                }
            }
        }
    }

    #[test]
    fn small_grid_passes_for_phase_type_and_stable() {
        let grid = IdentityGrid {
            x: vec![-0.5, 0.0, 1.0],
            r: vec![0.5],
            pairs: vec![(0.5, 1.5)],
            laplace_q: vec![2.0],
            tolerance: 1e-5,
        };
        let models = [
            ModelSpec::JumpDiffusionPhaseType(
                PhaseType::new(1.2, 0.0, 0.8, vec![-3.0, 1.0, 0.5, -2.0], vec![0.6, 0.4]).unwrap(),
            ),
            ModelSpec::StableThreeHalves,
        ];
        for m in models {
            let ctx = ScaleContext::new(&m, 1.0).unwrap();
            let rep = verify_identities(&ctx, &grid);
            for (name, row) in &rep.identities {
                assert!(row.passed, "{} {name}: {row:?}", m.name());
            }
        }
    }

    #[test]
    fn report_serialises() {
        let ctx = ScaleContext::new(&ModelSpec::bm(1.0, 1.0).unwrap(), 0.5).unwrap();
        let grid = IdentityGrid {
            x: vec![0.5],
            r: vec![1.0],
            pairs: vec![(0.0, 1.0)],
            laplace_q: vec![1.0],
            tolerance: 1e-5,
        };
        let rep = verify_identities(&ctx, &grid);
        let json: serde_json::Value = serde_json::from_str(&rep.to_json()).unwrap();
        assert!(json["convolution"]["max_abs_err"].is_number());
        assert!(json["convolution"]["worst_point"]["x"].is_number());
    }
}
