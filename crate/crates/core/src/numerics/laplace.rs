use super::{NeumaierSum, Real};
use crate::{Error, Result};

/// Default agreement required between node counts `N` and `N - 2`.
const DEFAULT_REL_TOL: f64 = 1e-4;

fn factorial<T: Real>(n: usize) -> T {
    (1..=n).fold(T::one(), |acc, k| acc * T::lit(k as f64))
}

/// Gaver–Stehfest weights `V_1..V_N` evaluated in `T`.
pub fn stehfest_weights<T: Real>(n: usize) -> Vec<T> {
    let half = n / 2;
    (1..=n)
        .map(|k| {
            let lo = k.div_ceil(2);
            let hi = k.min(half);
            let mut sum = T::zero();
            for j in lo..=hi {
                let num = T::lit(j as f64).powi(half as i32) * factorial::<T>(2 * j);
                let den = factorial::<T>(half - j)
                    * factorial::<T>(j)
                    * factorial::<T>(j - 1)
                    * factorial::<T>(k - j)
                    * factorial::<T>(2 * j - k);
                sum = sum + num / den;
            }
            if (k + half) % 2 == 0 {
                sum
            } else {
                -sum
            }
        })
        .collect()
}

fn stehfest_sum<T: Real, F: Fn(f64) -> f64>(f: &F, t: f64, n: usize) -> Result<T> {
    let ln2 = T::LN_2();
    let tt = T::lit(t);
    let mut acc = NeumaierSum::default();
    for (k, v) in stehfest_weights::<T>(n).into_iter().enumerate() {
        let s = (T::lit((k + 1) as f64) * ln2 / tt).to_f64_lossy();
        let fs = f(s);
        if !fs.is_finite() {
            return Err(Error::NonFiniteEvaluation { at: s });
        }
        acc.add(v * T::lit(fs));
    }
    Ok(acc.value() * ln2 / tt)
}

/// Gaver–Stehfest inversion of a real-axis Laplace transform at `t`.
///
/// Validation-only: accurate to roughly `1e-4` relative for smooth
/// originals. The alternating sum is accumulated with compensation.
///
/// ```
/// use ruinlab::numerics::laplace_invert;
/// let v = laplace_invert(|q| 1.0 / (q + 1.0), 1.0, 14).unwrap();
/// assert!((v - (-1.0f64).exp()).abs() < 1e-4);
/// ```
pub fn laplace_invert<F: Fn(f64) -> f64>(f: F, t: f64, node_count: usize) -> Result<f64> {
    laplace_invert_with::<f64, _>(f, t, node_count, DEFAULT_REL_TOL)
}

/// As [`laplace_invert`] with an explicit accumulation type and tolerance.
pub fn laplace_invert_with<T: Real, F: Fn(f64) -> f64>(
    f: F,
    t: f64,
    node_count: usize,
    rel_tol: f64,
) -> Result<f64> {
    if !(t > 0.0) || node_count < 8 || node_count % 2 != 0 {
        return Err(Error::DomainError(format!(
            "Stehfest inversion needs t > 0 and an even node count >= 8 (t={t}, N={node_count})"
        )));
    }
    let fine = stehfest_sum::<T, F>(&f, t, node_count)?.to_f64_lossy();
    let coarse = stehfest_sum::<T, F>(&f, t, node_count - 2)?.to_f64_lossy();
    if (fine - coarse).abs() > 10.0 * rel_tol * fine.abs().max(1.0) {
        return Err(Error::UnstableInversion { coarse, fine });
    }
    Ok(fine)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_function() {
        let v = laplace_invert(|q| 1.0 / q, 1.0, 14).unwrap();
        assert!((v - 1.0).abs() < 1e-6);
    }

    #[test]
    fn exponential_decay() {
        let v = laplace_invert(|q| 1.0 / (q + 1.0), 1.0, 14).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-4);
    }

    #[test]
    fn ramp() {
        let v = laplace_invert(|q| 1.0 / (q * q), 2.0, 14).unwrap();
        assert!((v - 2.0).abs() < 1e-4);
    }

    #[test]
    fn weights_reproduce_unit_step_exactly() {
        // Inverting 1/q reduces to sum V_k / k, which must equal 1.
        let w = stehfest_weights::<f64>(14);
        let s: f64 = w.iter().enumerate().map(|(k, v)| v / (k + 1) as f64).sum();
        assert!((s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_odd_node_count() {
        assert!(matches!(
            laplace_invert(|q| 1.0 / q, 1.0, 9),
            Err(Error::DomainError(_))
        ));
    }

    #[test]
    fn discontinuous_original_is_flagged() {
        // Heaviside step at t = 1 evaluated exactly at the jump.
        let r = laplace_invert(|q| (-q).exp() / q, 1.0, 16);
        assert!(matches!(r, Err(Error::UnstableInversion { .. })));
    }
}
