use twofloat::TwoFloat;

use super::{Quadrature, Real, Tolerance};
use crate::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

const SERIES_CAP: usize = 1000;

/// Compensated (Kahan–Babuška–Neumaier) running sum.
#[derive(Debug, Clone, Copy)]
pub struct NeumaierSum<T> {
    sum: T,
    compensation: T,
}

impl<T: Real> Default for NeumaierSum<T> {
    fn default() -> Self {
        NeumaierSum {
            sum: T::zero(),
            compensation: T::zero(),
        }
    }
}

impl<T: Real> NeumaierSum<T> {
    pub fn add(&mut self, v: T) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.compensation = self.compensation + ((self.sum - t) + v);
        } else {
            self.compensation = self.compensation + ((v - t) + self.sum);
        }
        self.sum = t;
    }

    pub fn value(&self) -> T {
        self.sum + self.compensation
    }
}

/// `ln Γ(x)` by the Lanczos approximation (about 15 significant digits).
pub fn ln_gamma<T: Real>(x: T) -> T {
    if x < T::lit(0.5) {
        let pi = T::PI();
        return (pi / (pi * x).sin().abs()).ln() - ln_gamma(T::one() - x);
    }
    let x = x - T::one();
    let mut a = T::lit(LANCZOS[0]);
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a = a + T::lit(*c) / (x + T::lit(i as f64));
    }
    let t = x + T::lit(LANCZOS_G + 0.5);
    T::lit(0.5) * (T::lit(2.0) * T::PI()).ln() + (x + T::lit(0.5)) * t.ln() - t + a.ln()
}

/// `Γ(n/2)` exactly in `T` for a positive integer `n`.
pub fn gamma_half_integer<T: Real>(n: u32) -> T {
    assert!(n > 0, "Γ(0) is undefined");
    let mut g = if n % 2 == 0 { T::one() } else { T::PI().sqrt() };
    let mut k = if n % 2 == 0 { 2 } else { 1 };
    while k < n {
        g = g * T::lit(k as f64) / T::lit(2.0);
        k += 2;
    }
    g
}

fn check_gamma_args<T: Real>(a: T, x: T) -> Result<()> {
    if !(a > T::zero()) || !(x >= T::zero()) || !a.is_finite() {
        return Err(Error::DomainError(format!(
            "incomplete gamma needs a > 0 and x >= 0 (a={a:?}, x={x:?})"
        )));
    }
    Ok(())
}

/// Series `Σ x^n / (a(a+1)…(a+n))`, so that `γ(a,x) = x^a e^{-x} · series`.
fn gamma_series<T: Real>(a: T, x: T) -> Result<T> {
    let mut term = T::one() / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..SERIES_CAP {
        ap = ap + T::one();
        term = term * x / ap;
        sum = sum + term;
        if term.abs() < sum.abs() * T::epsilon() {
            return Ok(sum);
        }
    }
    Err(Error::SeriesNotConverged(format!(
        "incomplete gamma series at a={a:?}, x={x:?}"
    )))
}

/// Continued fraction (modified Lentz) with `Γ(a,x) = x^a e^{-x} · cf`.
fn gamma_continued_fraction<T: Real>(a: T, x: T) -> Result<T> {
    let tiny = T::min_positive_value() / T::epsilon();
    let mut b = x + T::one() - a;
    let mut c = T::one() / tiny;
    let mut d = T::one() / b;
    let mut h = d;
    for i in 1..SERIES_CAP {
        let an = -T::lit(i as f64) * (T::lit(i as f64) - a);
        b = b + T::lit(2.0);
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = T::one() / d;
        let delta = d * c;
        h = h * delta;
        if (delta - T::one()).abs() < T::epsilon() {
            return Ok(h);
        }
    }
    Err(Error::SeriesNotConverged(format!(
        "incomplete gamma continued fraction at a={a:?}, x={x:?}"
    )))
}

/// Regularized pair `(P(a,x), Q(a,x))`, each computed without cancellation
/// on its own side of `x = a + 1`.
pub fn regularized_gamma<T: Real>(a: T, x: T) -> Result<(T, T)> {
    check_gamma_args(a, x)?;
    if x == T::zero() {
        return Ok((T::zero(), T::one()));
    }
    let prefactor = (a * x.ln() - x - ln_gamma(a)).exp();
    if x < a + T::one() {
        let p = prefactor * gamma_series(a, x)?;
        Ok((p, T::one() - p))
    } else {
        let q = prefactor * gamma_continued_fraction(a, x)?;
        Ok((T::one() - q, q))
    }
}

/// Lower incomplete gamma `γ(a,x) = ∫_0^x e^{-t} t^{a-1} dt` (unregularized).
///
/// ```
/// use ruinlab::numerics::lower_incomplete_gamma;
/// let v = lower_incomplete_gamma(1.0, 1.0).unwrap();
/// assert!((v - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
/// ```
pub fn lower_incomplete_gamma<T: Real>(a: T, x: T) -> Result<T> {
    check_gamma_args(a, x)?;
    if x == T::zero() {
        return Ok(T::zero());
    }
    if x < a + T::one() {
        Ok((a * x.ln() - x).exp() * gamma_series(a, x)?)
    } else {
        let upper = (a * x.ln() - x).exp() * gamma_continued_fraction(a, x)?;
        Ok(ln_gamma(a).exp() - upper)
    }
}

/// Standard normal distribution function.
pub fn normal_cdf<T: Real>(z: T) -> T {
    if z.is_nan() {
        return z;
    }
    if z.is_infinite() {
        return if z > T::zero() { T::one() } else { T::zero() };
    }
    let half = T::lit(0.5);
    let (_, q) = regularized_gamma(half, half * z * z).expect("valid arguments");
    if z < T::zero() {
        half * q
    } else {
        T::one() - half * q
    }
}

/// Standard normal survival function `1 - N(z)`, accurate in the right tail.
pub fn normal_sf<T: Real>(z: T) -> T {
    normal_cdf(-z)
}

pub fn normal_pdf<T: Real>(z: T) -> T {
    (-T::lit(0.5) * z * z).exp() / (T::lit(2.0) * T::PI()).sqrt()
}

/// Two-parameter Mittag-Leffler function `E_{3/2, β}(z)` for `β = beta2/2`.
///
/// Summed as two interleaved subsequences (even and odd powers) whose
/// gamma ratios are exact cubic polynomials, so no gamma function is
/// evaluated after the first two terms.
pub fn mittag_leffler<T: Real>(beta2: u32, z: T) -> Result<T> {
    let beta = T::lit(beta2 as f64) / T::lit(2.0);
    let one = T::one();
    let two = T::lit(2.0);
    let z2 = z * z;
    let mut even = one / gamma_half_integer::<T>(beta2);
    let mut odd = z / gamma_half_integer::<T>(beta2 + 3);
    let mut acc = NeumaierSum::default();
    acc.add(even);
    acc.add(odd);
    let mut quiet = 0;
    for j in 0..SERIES_CAP {
        let three_j = T::lit(3.0 * j as f64);
        let e0 = three_j + beta;
        even = even * z2 / (e0 * (e0 + one) * (e0 + two));
        let o0 = three_j + T::lit(1.5) + beta;
        odd = odd * z2 / (o0 * (o0 + one) * (o0 + two));
        acc.add(even);
        acc.add(odd);
        let scale = acc.value().abs().max(T::min_positive_value());
        if even.abs() + odd.abs() <= T::epsilon() * scale * T::lit(1e-2) {
            quiet += 1;
            if quiet >= 2 {
                let v = acc.value();
                if !v.is_finite() {
                    break;
                }
                return Ok(v);
            }
        } else {
            quiet = 0;
        }
    }
    Err(Error::SeriesNotConverged(format!(
        "Mittag-Leffler E_(3/2,{beta:?}) at z={z:?}"
    )))
}

/// Arguments below this would lose more than eight digits to cancellation
/// even in double-double.
const ML_NEGATIVE_LIMIT: f64 = -50.0;

/// `1/√π` split into double-double words.
const INV_SQRT_PI: (f64, f64) = (0.564_189_583_547_756_3, 7.667_729_806_582_94e-18);

/// `1/Γ(n/2)` in double-double, built only from multiplications and
/// divisions by exact `f64` values.
fn inv_gamma_half_integer_dd(n: u32) -> TwoFloat {
    if n % 2 == 0 {
        let fact: f64 = (1..n / 2).map(f64::from).product();
        TwoFloat::from(1.0) / fact
    } else {
        let mut r = TwoFloat::new_add(INV_SQRT_PI.0, INV_SQRT_PI.1);
        let mut k = 1;
        while k < n {
            r = r * 2.0 / f64::from(k);
            k += 2;
        }
        r
    }
}

/// Double-double evaluation of `E_{3/2,β}(z)` for negative `z`, where the
/// alternating terms peak near `exp(|z|^{2/3})` and cancel.
fn mittag_leffler_negative(beta2: u32, z: f64) -> Result<f64> {
    let beta = f64::from(beta2) / 2.0;
    let z2 = TwoFloat::new_mul(z, z);
    let mut even = inv_gamma_half_integer_dd(beta2);
    let mut odd = inv_gamma_half_integer_dd(beta2 + 3) * z;
    let mut acc = even + odd;
    let mut quiet = 0;
    for j in 0..SERIES_CAP {
        let three_j = 3.0 * j as f64;
        let e0 = three_j + beta;
        even = even * z2 / (e0 * (e0 + 1.0) * (e0 + 2.0));
        let o0 = three_j + 1.5 + beta;
        odd = odd * z2 / (o0 * (o0 + 1.0) * (o0 + 2.0));
        acc += even + odd;
        if (even.hi().abs() + odd.hi().abs()) <= 1e-32 * acc.hi().abs() {
            quiet += 1;
            if quiet >= 2 {
                return Ok(acc.hi() + acc.lo());
            }
        } else {
            quiet = 0;
        }
    }
    Err(Error::SeriesNotConverged(format!(
        "Mittag-Leffler E_(3/2,{beta}) at z={z}"
    )))
}

fn ml_f64(beta2: u32, z: f64) -> Result<f64> {
    if z.is_nan() || z < ML_NEGATIVE_LIMIT {
        return Err(Error::DomainError(format!(
            "Mittag-Leffler evaluation supported for z >= {ML_NEGATIVE_LIMIT}, got {z}"
        )));
    }
    if z < 0.0 {
        return mittag_leffler_negative(beta2, z);
    }
    let v = mittag_leffler::<f64>(beta2, z)?;
    if !v.is_finite() {
        return Err(Error::DomainError(format!(
            "Mittag-Leffler overflows at z={z}"
        )));
    }
    Ok(v)
}

/// `E_{3/2}(z) = Σ z^k / Γ(3k/2 + 1)`.
///
/// ```
/// use ruinlab::numerics::mittag_leffler_3_2;
/// assert_eq!(mittag_leffler_3_2(0.0).unwrap(), 1.0);
/// ```
pub fn mittag_leffler_3_2(z: f64) -> Result<f64> {
    ml_f64(2, z)
}

/// `E'_{3/2}(z) = (2/3) E_{3/2,3/2}(z)`.
pub fn mittag_leffler_3_2_deriv(z: f64) -> Result<f64> {
    Ok(ml_f64(3, z)? * 2.0 / 3.0)
}

/// Whittaker `W_{κ,μ}(u)` for the two index pairs `(±1/2, 1/6)`.
///
/// Evaluated as `e^{-u/2} u^{μ+1/2} U(a, 1+2μ, u)` with Kummer's `U` from
/// its integral representation after the substitution `t = v^{1/a}`,
/// which removes the `t^{a-1}` endpoint singularity.
pub fn whittaker_w(kappa: f64, mu: f64, u: f64) -> Result<f64> {
    Ok((-0.5 * u).exp() * whittaker_w_scaled(kappa, mu, u)?)
}

/// `e^{u/2} W_{κ,μ}(u)`, finite for large `u` where `W` underflows.
pub fn whittaker_w_scaled(kappa: f64, mu: f64, u: f64) -> Result<f64> {
    let supported = (mu - 1.0 / 6.0).abs() < 1e-15 && ((kappa.abs() - 0.5).abs() < 1e-15);
    if !supported {
        return Err(Error::DomainError(format!(
            "whittaker_w supports (kappa, mu) = (±1/2, 1/6), got ({kappa}, {mu})"
        )));
    }
    if !(u > 0.0) || !u.is_finite() {
        return Err(Error::DomainError(format!("whittaker_w needs u > 0, got {u}")));
    }
    let a = 0.5 + mu - kappa;
    let b = 1.0 + 2.0 * mu;
    if u > 60.0 {
        // u^κ 2F0(a, a-b+1;; -1/u); terms shrink below 1e-17 well before divergence.
        let a2 = a - b + 1.0;
        let mut term = 1.0;
        let mut sum = 1.0;
        for n in 0..60 {
            let nf = n as f64;
            term *= -(a + nf) * (a2 + nf) / ((nf + 1.0) * u);
            sum += term;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        return Ok(u.powf(kappa) * sum);
    }
    let p = 1.0 / a;
    let c = b - a - 1.0;
    let integrand = move |v: f64| {
        let t = v.powf(p);
        (-u * t).exp() * (1.0 + t).powf(c)
    };
    let scale = u.powf(-a).max(1e-3);
    let tol = Tolerance {
        abs_tol: 1e-300,
        rel_tol: 1e-13,
        max_iter: 400,
    };
    let r = Quadrature::new(tol)
        .initial_panel(scale)
        .integrate(integrand, 0.0, f64::INFINITY)?;
    let kummer_u = r.value / ln_gamma(a + 1.0).exp();
    Ok(u.powf(mu + 0.5) * kummer_u)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn gamma_values() {
        assert!(rel(ln_gamma(5.0f64).exp(), 24.0) < 1e-14);
        assert!(rel(ln_gamma(0.5f64).exp(), std::f64::consts::PI.sqrt()) < 1e-14);
        assert_eq!(gamma_half_integer::<f64>(6), 2.0);
        assert!(rel(gamma_half_integer::<f64>(5), 0.75 * std::f64::consts::PI.sqrt()) < 1e-15);
    }

    #[test]
    fn normal_cdf_symmetry_and_tails() {
        assert_eq!(normal_cdf(0.0f64), 0.5);
        // Reference values from a 30-digit evaluation.
        assert!(rel(normal_cdf(1.0f64), 0.841_344_746_068_542_9) < 1e-14);
        assert!(rel(normal_cdf(-5.0f64), 2.866_515_718_791_939e-7) < 1e-12);
        assert!(rel(normal_cdf(-20.0f64), 2.753_624_118_606_233e-89) < 1e-11);
        assert!(rel(normal_cdf(-1.3f64), 0.096_800_484_585_610_33) < 1e-13);
    }

    #[test]
    fn lower_gamma_values() {
        assert!(rel(lower_incomplete_gamma(1.0f64, 1.0).unwrap(), 0.632_120_558_828_557_7) < 1e-15);
        // γ(2.5, 3) and γ(10, 4) to 16 digits.
        assert!(rel(lower_incomplete_gamma(2.5f64, 3.0).unwrap(), 0.922_271_212_307_834_0) < 1e-13);
        assert!(rel(lower_incomplete_gamma(10.0f64, 4.0).unwrap(), 2_951.028_266_151_360_3) < 1e-13);
        assert!(lower_incomplete_gamma(-1.0f64, 1.0).is_err());
    }

    #[test]
    fn mittag_leffler_values() {
        assert_eq!(mittag_leffler_3_2(0.0).unwrap(), 1.0);
        // E_{3/2}(1), E_{3/2}(10), E_{3/2}(-10), E_{3/2}(-50) and E'_{3/2}(2).
        assert!(rel(mittag_leffler_3_2(1.0).unwrap(), 1.939_487_261_433_749) < 1e-13);
        assert!(rel(mittag_leffler_3_2(10.0).unwrap(), 69.165_433_808_528_8) < 1e-12);
        assert!(rel(mittag_leffler_3_2(-10.0).unwrap(), -0.109_713_054_252_740_15) < 1e-12);
        assert!(rel(mittag_leffler_3_2_deriv(2.0).unwrap(), 1.698_891_146_048_570_5) < 1e-12);
        assert!(rel(mittag_leffler_3_2(-50.0).unwrap(), -0.004_578_385_105_839_278) < 1e-8);
        assert!(mittag_leffler_3_2(-60.0).is_err());
    }

    #[test]
    fn whittaker_values() {
        assert!(rel(whittaker_w(0.5, 1.0 / 6.0, 1.0).unwrap(), 0.619_187_218_286_583_9) < 1e-9);
        assert!(rel(whittaker_w(-0.5, 1.0 / 6.0, 1.0).unwrap(), 0.367_117_130_349_207) < 1e-9);
        assert!(rel(whittaker_w(0.5, 1.0 / 6.0, 50.0).unwrap(), 9.825_663_287_059_137e-11) < 1e-8);
        assert!(rel(whittaker_w(-0.5, 1.0 / 6.0, 50.0).unwrap(), 1.927_294_807_691_605_4e-12) < 1e-8);
        assert!(rel(whittaker_w(0.5, 1.0 / 6.0, 1e-4).unwrap(), 0.023_629_418_355_638_913) < 1e-8);
        assert!(rel(whittaker_w(-0.5, 1.0 / 6.0, 1e-4).unwrap(), 0.126_289_569_489_534_02) < 1e-8);
        assert!(whittaker_w(1.5, 1.0 / 6.0, 1.0).is_err());
    }
}
