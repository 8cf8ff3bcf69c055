use serde::{Deserialize, Serialize};

use super::{Real, Tolerance};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult<T> {
    pub value: T,
    pub error_estimate: T,
    pub evaluations: usize,
}

// 21-point Kronrod extension of the 10-point Gauss rule.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_060,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_130,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_459,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_208_611_428,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

/// Consecutive negligible panels required before a semi-infinite integral
/// is truncated.
const QUIET_PANELS: usize = 5;
const MAX_PANELS: usize = 80;

#[derive(Debug, Clone, Copy)]
struct Segment<T> {
    a: T,
    b: T,
    value: T,
    error: T,
    abs_value: T,
}

fn gk21<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T) -> Result<Segment<T>> {
    let half = T::lit(0.5);
    let center = half * (a + b);
    let half_len = half * (b - a);
    let eval = |x: T| -> Result<T> {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteEvaluation {
                at: x.to_f64_lossy(),
            })
        }
    };

    let fc = eval(center)?;
    let mut kronrod = fc * T::lit(WGK[10]);
    let mut abs_sum = kronrod.abs();
    let mut gauss = T::zero();
    let mut values = [(T::zero(), T::zero()); 10];
    for (j, slot) in values.iter_mut().enumerate() {
        let dx = half_len * T::lit(XGK[j]);
        let f1 = eval(center - dx)?;
        let f2 = eval(center + dx)?;
        let w = T::lit(WGK[j]);
        kronrod = kronrod + w * (f1 + f2);
        abs_sum = abs_sum + w * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss = gauss + T::lit(WG[j / 2]) * (f1 + f2);
        }
        *slot = (f1, f2);
    }

    let mean = kronrod * half;
    let mut asc = T::lit(WGK[10]) * (fc - mean).abs();
    for (j, (f1, f2)) in values.iter().enumerate() {
        asc = asc + T::lit(WGK[j]) * ((*f1 - mean).abs() + (*f2 - mean).abs());
    }

    let value = kronrod * half_len;
    let abs_value = abs_sum * half_len.abs();
    let asc = asc * half_len.abs();
    let mut error = ((kronrod - gauss) * half_len).abs();
    if asc > T::zero() && error > T::zero() {
        let ratio = (T::lit(200.0) * error / asc).powf(T::lit(1.5));
        error = asc * ratio.min(T::one());
    }
    let floor = T::epsilon() * T::lit(50.0) * abs_value;
    if floor > error {
        error = floor;
    }
    Ok(Segment {
        a,
        b,
        value,
        error,
        abs_value,
    })
}

#[derive(Debug, Clone, Copy)]
struct Adaptive<T> {
    value: T,
    error: T,
    abs_value: T,
    evaluations: usize,
}

fn adaptive<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T, tol: &Tolerance) -> Result<Adaptive<T>> {
    if a == b {
        return Ok(Adaptive {
            value: T::zero(),
            error: T::zero(),
            abs_value: T::zero(),
            evaluations: 0,
        });
    }
    let first = gk21(f, a, b)?;
    let mut evaluations = 21;
    let mut segments = vec![first];
    let mut frozen_error = T::zero();
    loop {
        let total: T = segments.iter().fold(T::zero(), |s, g| s + g.value);
        let error: T = segments.iter().fold(frozen_error, |s, g| s + g.error);
        let bound = T::lit(tol.abs_tol).max(T::lit(tol.rel_tol) * total.abs());
        if error <= bound || segments.is_empty() {
            let abs_value = segments.iter().fold(T::zero(), |s, g| s + g.abs_value);
            return Ok(Adaptive {
                value: total,
                error,
                abs_value,
                evaluations,
            });
        }
        if segments.len() >= tol.max_iter {
            return Err(Error::MaxSubdivisions {
                limit: tol.max_iter,
                value: total.to_f64_lossy(),
                error: error.to_f64_lossy(),
            });
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |(bi, be), (i, g)| {
                if g.error > be {
                    (i, g.error)
                } else {
                    (bi, be)
                }
            });
        let seg = segments.swap_remove(worst);
        let mid = T::lit(0.5) * (seg.a + seg.b);
        let resolution = T::epsilon() * T::lit(100.0) * mid.abs().max(T::min_positive_value());
        if (seg.b - seg.a).abs() <= resolution {
            // Nothing left to split; keep its contribution and move on.
            frozen_error = frozen_error + seg.error;
            let frozen = Segment {
                error: T::zero(),
                ..seg
            };
            segments.push(frozen);
            if segments.iter().all(|g| g.error == T::zero()) {
                let total = segments.iter().fold(T::zero(), |s, g| s + g.value);
                return Err(Error::MaxSubdivisions {
                    limit: tol.max_iter,
                    value: total.to_f64_lossy(),
                    error: frozen_error.to_f64_lossy(),
                });
            }
            continue;
        }
        segments.push(gk21(f, seg.a, mid)?);
        segments.push(gk21(f, mid, seg.b)?);
        evaluations += 42;
    }
}

/// Adaptive Gauss–Kronrod integration with optional endpoint treatment.
///
/// A `b` of `+∞` switches to semi-infinite mode: doubling panels starting
/// at width `initial_panel`, truncated after five consecutive panels whose
/// absolute mass is below `1e-3` of the tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub tol: Tolerance,
    pub sqrt_singular: bool,
    pub initial_panel: f64,
}

impl Quadrature {
    pub fn new(tol: Tolerance) -> Self {
        Quadrature {
            tol,
            sqrt_singular: false,
            initial_panel: 1.0,
        }
    }

    /// Declares an integrable `(s-a)^{-1/2}` singularity at the lower limit;
    /// the integral is taken in `u = sqrt(s-a)`.
    pub fn sqrt_singular(mut self, on: bool) -> Self {
        self.sqrt_singular = on;
        self
    }

    pub fn initial_panel(mut self, width: f64) -> Self {
        self.initial_panel = width;
        self
    }

    pub fn integrate<T: Real, F: Fn(T) -> T>(
        &self,
        f: F,
        a: T,
        b: T,
    ) -> Result<QuadratureResult<T>> {
        if a.is_nan() || b.is_nan() || a.is_infinite() {
            return Err(Error::DomainError(format!(
                "integration limits must be finite-start, got [{:?}, {:?}]",
                a, b
            )));
        }
        if b < a {
            let r = self.integrate(f, b, a)?;
            return Ok(QuadratureResult {
                value: -r.value,
                ..r
            });
        }
        if self.sqrt_singular {
            let two = T::lit(2.0);
            let g = move |u: T| two * u * f(a + u * u);
            let upper = if b.is_infinite() { b } else { (b - a).sqrt() };
            let inner = Quadrature {
                sqrt_singular: false,
                initial_panel: self.initial_panel.sqrt(),
                ..*self
            };
            return inner.plain(&g, T::zero(), upper);
        }
        self.plain(&f, a, b)
    }

    fn plain<T: Real, F: Fn(T) -> T>(&self, f: &F, a: T, b: T) -> Result<QuadratureResult<T>> {
        if b.is_infinite() {
            return self.semi_infinite(f, a);
        }
        let r = adaptive(f, a, b, &self.tol)?;
        Ok(QuadratureResult {
            value: r.value,
            error_estimate: r.error,
            evaluations: r.evaluations,
        })
    }

    fn semi_infinite<T: Real, F: Fn(T) -> T>(&self, f: &F, a: T) -> Result<QuadratureResult<T>> {
        let mut width = T::lit(self.initial_panel.max(1e-300));
        let mut lo = a;
        let mut total = T::zero();
        let mut error = T::zero();
        let mut evaluations = 0;
        let mut quiet = 0;
        let panel_tol = Tolerance {
            abs_tol: self.tol.abs_tol * 0.25,
            ..self.tol
        };
        for _ in 0..MAX_PANELS {
            let hi = lo + width;
            let r = adaptive(f, lo, hi, &panel_tol)?;
            total = total + r.value;
            error = error + r.error;
            evaluations += r.evaluations;
            let threshold = T::lit(1e-3)
                * T::lit(self.tol.abs_tol).max(T::lit(self.tol.rel_tol) * total.abs());
            if r.abs_value <= threshold {
                quiet += 1;
                if quiet >= QUIET_PANELS {
                    return Ok(QuadratureResult {
                        value: total,
                        error_estimate: error,
                        evaluations,
                    });
                }
            } else {
                quiet = 0;
            }
            lo = hi;
            width = width + width;
        }
        Err(Error::NotConverged {
            iterations: MAX_PANELS,
            residual: error.to_f64_lossy(),
        })
    }
}

/// `∫_a^b f` with the given tolerance; `b = +∞` selects semi-infinite mode.
///
/// ```
/// use ruinlab::numerics::{integrate, Tolerance};
/// let r = integrate(|s: f64| (-s).exp(), 0.0, f64::INFINITY, &Tolerance::default()).unwrap();
/// assert!((r.value - 1.0).abs() < 1e-9);
/// ```
pub fn integrate<T: Real, F: Fn(T) -> T>(
    f: F,
    a: T,
    b: T,
    tol: &Tolerance,
) -> Result<QuadratureResult<T>> {
    Quadrature::new(*tol).integrate(f, a, b)
}

/// `∫_a^b f` for integrands with an `(s-a)^{-1/2}` singularity at `a`.
pub fn integrate_sqrt_singular<T: Real, F: Fn(T) -> T>(
    f: F,
    a: T,
    b: T,
    tol: &Tolerance,
) -> Result<QuadratureResult<T>> {
    Quadrature::new(*tol).sqrt_singular(true).integrate(f, a, b)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = x;
                p0 = 1.0;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}
