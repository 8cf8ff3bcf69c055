use std::cell::RefCell;

use rayon::prelude::*;

use crate::numerics::{gauss_legendre, Quadrature, Tolerance};
use crate::{Error, Result};

/// Checks that a grid is nonempty, finite, nonnegative and strictly
/// increasing.
pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::DomainError("grid is empty".into()));
    }
    if grid.iter().any(|y| !y.is_finite() || *y < 0.0) {
        return Err(Error::DomainError("grid values must be finite and >= 0".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::DomainError("grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Integrates `f` over `[a, b]`, keeping the first error `f` reports.
pub(crate) fn integrate_checked<F>(f: &F, a: f64, b: f64, singular_at_a: bool, tol: Tolerance) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if b <= a {
        return Ok(0.0);
    }
    let failure = RefCell::new(None);
    let g = |y: f64| match f(y) {
        Ok(v) => v,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    };
    let r = Quadrature::new(tol).sqrt_singular(singular_at_a).integrate(g, a, b);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(r?.value)
}

/// `∫_0^{y_i} f` at every grid point.
///
/// Panels between consecutive grid points are integrated in parallel and
/// summed in order. The panel starting at 0 is treated as `1/√y` singular;
/// `breaks` are extra split points where `f` may jump.
pub fn cumulative_integral<F>(f: F, grid: &[f64], breaks: &[f64], tol: Tolerance) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    validate_grid(grid)?;
    let mut edges = Vec::with_capacity(grid.len() + 1);
    edges.push(0.0);
    edges.extend(grid.iter().copied().filter(|y| *y > 0.0));
    let panels: Vec<(f64, f64)> = edges.windows(2).map(|w| (w[0], w[1])).collect();
    let pieces = panels
        .par_iter()
        .map(|&(a, b)| {
            let mut cuts = vec![a];
            cuts.extend(breaks.iter().copied().filter(|t| *t > a && *t < b));
            cuts.push(b);
            let mut s = 0.0;
            for w in cuts.windows(2) {
                s += integrate_checked(&f, w[0], w[1], w[0] == 0.0, tol)?;
            }
            Ok(s)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut out = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    let mut k = 0;
    for y in grid {
        if *y > 0.0 {
            acc += pieces[k];
            k += 1;
        }
        out.push(acc);
    }
    Ok(out)
}

/// `n - 1` points inside `(0, t)` clustered at both ends as
/// `t(1 - cos(πi/n))/2`, plus geometric points down to `1e-9 t` from each
/// end, where fixed-horizon densities have `1/√` singularities.
pub fn horizon_grid(t: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    let mut g: Vec<f64> = (1..n)
        .map(|i| 0.5 * t * (1.0 - (std::f64::consts::PI * i as f64 / n as f64).cos()))
        .collect();
    let first = g[0];
    let mut v = 0.5 * first;
    while v > 1e-9 * t {
        g.push(v);
        g.push(t - v);
        v *= 0.5;
    }
    g.sort_by(f64::total_cmp);
    g.dedup();
    g.retain(|y| *y > 0.0 && *y < t);
    g
}

/// Gauss–Legendre nodes and weights on `[0, edges[0]], [edges[0], edges[1]], ...`
/// with `n` nodes per panel; the panel at 0 uses `y = u²` so that `1/√y`
/// densities are integrated exactly enough.
pub fn gauss_grid(edges: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let mut lo = 0.0;
    for &hi in edges {
        if hi <= lo {
            continue;
        }
        if lo == 0.0 {
            let root = f64::sqrt(hi);
            for (xi, wi) in x.iter().zip(&w) {
                let u = 0.5 * root * (xi + 1.0);
                nodes.push(u * u);
                weights.push(wi * 0.5 * root * 2.0 * u);
            }
        } else {
            let half = 0.5 * (hi - lo);
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(lo + half * (xi + 1.0));
                weights.push(wi * half);
            }
        }
        lo = hi;
    }
    let mut order: Vec<usize> = (0..nodes.len()).collect();
    order.sort_by(|a, b| nodes[*a].total_cmp(&nodes[*b]));
    (order.iter().map(|i| nodes[*i]).collect(), order.iter().map(|i| weights[*i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cumulative_matches_closed_form() {
        let grid = [0.0, 0.5, 1.0, 2.0, 4.0];
        let v = cumulative_integral(|y| Ok(1.0 / y.sqrt()), &grid, &[1.5], Tolerance::default()).unwrap();
        for (y, got) in grid.iter().zip(v) {
            assert!((got - 2.0 * y.sqrt()).abs() < 1e-9, "{y}: {got}");
        }
    }

    #[test]
    fn cumulative_propagates_errors() {
        let r = cumulative_integral(
            |y| if y > 1.0 { Err(Error::DomainError("boom".into())) } else { Ok(1.0) },
            &[1.0, 2.0],
            &[],
            Tolerance::default(),
        );
        assert_eq!(r, Err(Error::DomainError("boom".into())));
    }

    #[test]
    fn gauss_grid_integrates_singular_start() {
        let (y, w) = gauss_grid(&[1.0, 3.0], 20);
        let s: f64 = y.iter().zip(&w).map(|(y, w)| w / y.sqrt()).sum();
        assert!((s - 2.0 * 3.0f64.sqrt()).abs() < 1e-12);
        assert!(y.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn grid_validation() {
        assert!(validate_grid(&[0.0, 1.0]).is_ok());
        assert!(validate_grid(&[1.0, 1.0]).is_err());
        assert!(validate_grid(&[-1.0]).is_err());
        assert!(validate_grid(&[]).is_err());
    }

    #[test]
    fn horizon_grid_hugs_both_ends() {
        let g = horizon_grid(2.0, 100);
        assert!(validate_grid(&g).is_ok());
        assert!(g[0] < 1e-8 && g[0] > 0.0);
        assert!(2.0 - g[g.len() - 1] < 1e-8);
        assert!(g.windows(2).all(|p| p[1] - p[0] < 0.07));
    }
}
