use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{Real, Tolerance};
use crate::{Error, Result};

/// Solves `f(x) = target` for `f` increasing on `[lo, ∞)`.
///
/// The bracket grows by doubling its width from `lo`, then bisection
/// narrows it until `|f(x) - target| <= max(abs_tol, rel_tol·|target|)` or
/// the bracket collapses to machine resolution.
///
/// ```
/// use ruinlab::numerics::{find_root_increasing, Tolerance};
/// let r = find_root_increasing(|x: f64| x * x, 4.0, 0.0, &Tolerance::default()).unwrap();
/// assert!((r - 2.0).abs() < 1e-8);
/// ```
pub fn find_root_increasing<T, F>(f: F, target: T, lo: T, tol: &Tolerance) -> Result<T>
where
    T: Real,
    F: Fn(T) -> T,
{
    solve(&f, None::<&fn(T) -> T>, target, lo, tol)
}

/// As [`find_root_increasing`], with Newton steps taken inside the bracket
/// whenever they stay in it.
pub fn find_root_increasing_newton<T, F, D>(
    f: F,
    df: D,
    target: T,
    lo: T,
    tol: &Tolerance,
) -> Result<T>
where
    T: Real,
    F: Fn(T) -> T,
    D: Fn(T) -> T,
{
    solve(&f, Some(&df), target, lo, tol)
}

fn solve<T, F, D>(f: &F, df: Option<&D>, target: T, lo: T, tol: &Tolerance) -> Result<T>
where
    T: Real,
    F: Fn(T) -> T,
    D: Fn(T) -> T,
{
    let bound = T::lit(tol.bound(target.to_f64_lossy()));
    let g = |x: T| f(x) - target;
    let g_lo = g(lo);
    if g_lo.is_nan() {
        return Err(Error::NonFiniteEvaluation {
            at: lo.to_f64_lossy(),
        });
    }
    if g_lo.abs() <= bound {
        return Ok(lo);
    }
    if g_lo > T::zero() {
        return Err(Error::NoBracket {
            lo: lo.to_f64_lossy(),
            iterations: 0,
        });
    }

    let mut a = lo;
    let mut width = T::one().max(lo.abs() * T::lit(1e-3));
    let mut b = lo + width;
    let mut g_b = g(b);
    let mut doublings = 0;
    while !(g_b >= T::zero()) {
        if g_b.is_nan() {
            return Err(Error::NonFiniteEvaluation {
                at: b.to_f64_lossy(),
            });
        }
        doublings += 1;
        if doublings > tol.max_iter {
            return Err(Error::NoBracket {
                lo: lo.to_f64_lossy(),
                iterations: doublings,
            });
        }
        a = b;
        width = width + width;
        b = lo + width;
        g_b = g(b);
    }
    if g_b.abs() <= bound {
        return Ok(b);
    }

    let two = T::lit(2.0);
    let mut x = (a + b) / two;
    let mut last = T::infinity();
    for _ in 0..tol.max_iter.max(200) {
        let gx = g(x);
        if gx.is_nan() {
            return Err(Error::NonFiniteEvaluation {
                at: x.to_f64_lossy(),
            });
        }
        if gx.abs() <= bound {
            return Ok(x);
        }
        if gx < T::zero() {
            a = x;
        } else {
            b = x;
        }
        if (b - a) <= T::epsilon() * T::lit(4.0) * x.abs().max(T::min_positive_value()) {
            return Ok(x);
        }
        last = gx.abs();
        let mut next = (a + b) / two;
        if let Some(df) = df {
            let d = df(x);
            if d > T::zero() && d.is_finite() {
                let newton = x - gx / d;
                if newton > a && newton < b {
                    next = newton;
                }
            }
        }
        x = next;
    }
    Err(Error::NotConverged {
        iterations: tol.max_iter,
        residual: last.to_f64_lossy(),
    })
}

/// Horner evaluation of `Σ coeffs[k] z^k` and its derivative.
pub fn polynomial_eval(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// All roots of `Σ coeffs[k] z^k` (lowest degree first) as companion-matrix
/// eigenvalues, each polished by Newton steps on the polynomial.
pub fn polynomial_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let mut coeffs = coeffs.to_vec();
    while coeffs.last().is_some_and(|c| c.norm() == 0.0) {
        coeffs.pop();
    }
    let n = coeffs.len().saturating_sub(1);
    if n == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[n];
    let mut companion = DMatrix::<Complex64>::zeros(n, n);
    for i in 1..n {
        companion[(i, i - 1)] = Complex64::new(1.0, 0.0);
    }
    for i in 0..n {
        companion[(i, n - 1)] = -coeffs[i] / lead;
    }
    let eig = companion
        .eigenvalues()
        .ok_or_else(|| Error::RootEnumerationFailed("companion eigenvalues did not converge".into()))?;
    let mut roots: Vec<Complex64> = eig.iter().copied().collect();
    for r in roots.iter_mut() {
        for _ in 0..8 {
            let (p, dp) = polynomial_eval(&coeffs, *r);
            if dp.norm() == 0.0 {
                break;
            }
            let step = p / dp;
            *r -= step;
            if step.norm() <= 1e-16 * r.norm().max(1.0) {
                break;
            }
        }
        if !(r.re.is_finite() && r.im.is_finite()) {
            return Err(Error::RootEnumerationFailed("non-finite polynomial root".into()));
        }
    }
    Ok(roots)
}
