use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::scale_fn::ExpTerm;
use crate::numerics::{ln_gamma, polynomial_eval, polynomial_roots};
use crate::{Error, Result};

/// Jump-diffusion with phase-type claims `(m, T, α)`.
///
/// A defective initial vector (`Σα < 1`) is read as zero-size claims with
/// probability `1 - Σα`, which is the same process as thinning the claim
/// intensity to `η·Σα` with initial vector `α / Σα`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseType {
    pub c: f64,
    pub sigma: f64,
    pub eta: f64,
    pub m: usize,
    /// Sub-intensity matrix, row-major.
    #[serde(rename = "T")]
    pub t_matrix: Vec<f64>,
    pub alpha_vec: Vec<f64>,
}

impl PhaseType {
    pub fn new(c: f64, sigma: f64, eta: f64, t_matrix: Vec<f64>, alpha_vec: Vec<f64>) -> Result<Self> {
        let p = PhaseType {
            c,
            sigma,
            eta,
            m: alpha_vec.len(),
            t_matrix,
            alpha_vec,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        let m = self.m;
        if m == 0 || self.alpha_vec.len() != m || self.t_matrix.len() != m * m {
            return bad(format!(
                "jdpt needs m >= 1, alpha_vec of length m and T of m*m entries \
                 (m={m}, alpha_vec={}, T={})",
                self.alpha_vec.len(),
                self.t_matrix.len()
            ));
        }
        if !self.c.is_finite() || !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return bad(format!("jdpt needs finite c and sigma >= 0 (c={}, sigma={})", self.c, self.sigma));
        }
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return bad(format!("jdpt needs eta > 0, got {}", self.eta));
        }
        if self.sigma == 0.0 && !(self.c > 0.0) {
            return bad(format!("jdpt without diffusion needs c > 0, got {}", self.c));
        }
        let mass: f64 = self.alpha_vec.iter().sum();
        if self.alpha_vec.iter().any(|&a| !(a >= 0.0)) || !(mass > 0.0) || mass > 1.0 + 1e-12 {
            return bad(format!("alpha_vec must be nonnegative with 0 < sum <= 1 (sum={mass})"));
        }
        let mut strict = false;
        for i in 0..m {
            let row = &self.t_matrix[i * m..(i + 1) * m];
            if row.iter().any(|v| !v.is_finite()) {
                return bad(format!("T row {i} has non-finite entries"));
            }
            for (j, &v) in row.iter().enumerate() {
                if i != j && v < 0.0 {
                    return bad(format!("T[{i}][{j}] = {v} must be >= 0 off the diagonal"));
                }
            }
            let sum: f64 = row.iter().sum();
            if sum > 1e-12 * row[i].abs() {
                return bad(format!("T row {i} sums to {sum} > 0"));
            }
            strict |= sum < 0.0;
        }
        if !strict {
            return bad("T needs a strictly negative row sum somewhere".into());
        }
        if self.sub_intensity().lu().determinant().abs() < 1e-300 {
            return bad("T is singular, so claims are not a.s. finite".into());
        }
        Ok(())
    }

    pub(crate) fn sub_intensity(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.m, self.m, &self.t_matrix)
    }

    /// `t = -T 1`.
    pub(crate) fn exit_vector(&self) -> DVector<f64> {
        let t = self.sub_intensity();
        -(&t * DVector::from_element(self.m, 1.0))
    }

    /// Thinned intensity and normalised initial vector.
    pub(crate) fn effective(&self) -> (f64, DVector<f64>) {
        let mass: f64 = self.alpha_vec.iter().sum();
        (
            self.eta * mass,
            DVector::from_iterator(self.m, self.alpha_vec.iter().map(|a| a / mass)),
        )
    }

    /// `(θI - T)^{-k} t` for `k = 1..=depth`.
    fn resolvent_powers(&self, theta: f64, depth: usize) -> Result<Vec<DVector<f64>>> {
        let a = DMatrix::identity(self.m, self.m) * theta - self.sub_intensity();
        let lu = a.lu();
        let scale = a_norm(&self.t_matrix).max(theta.abs()).max(1.0);
        if lu.determinant().abs() < 1e-13 * scale.powi(self.m as i32) {
            return Err(Error::SingularResolvent { lambda: theta });
        }
        let mut out = Vec::with_capacity(depth);
        let mut v = self.exit_vector();
        for _ in 0..depth {
            v = lu.solve(&v).ok_or(Error::SingularResolvent { lambda: theta })?;
            out.push(v.clone());
        }
        Ok(out)
    }

    pub fn laplace_exponent(&self, theta: f64) -> Result<f64> {
        let (eta, alpha) = self.effective();
        let r = self.resolvent_powers(theta, 1)?;
        Ok(self.c * theta + 0.5 * self.sigma * self.sigma * theta * theta + eta * (alpha.dot(&r[0]) - 1.0))
    }

    pub fn laplace_exponent_deriv(&self, theta: f64) -> Result<f64> {
        let (eta, alpha) = self.effective();
        let r = self.resolvent_powers(theta, 2)?;
        Ok(self.c + self.sigma * self.sigma * theta - eta * alpha.dot(&r[1]))
    }

    pub fn mean_drift(&self) -> f64 {
        self.c - self.eta * self.mean_claim_defective()
    }

    /// `α(-T)^{-1}1` with the user's (possibly defective) `α`.
    fn mean_claim_defective(&self) -> f64 {
        let neg = -self.sub_intensity();
        let ones = DVector::from_element(self.m, 1.0);
        let x = neg.lu().solve(&ones).unwrap_or_else(|| DVector::from_element(self.m, f64::NAN));
        DVector::from_column_slice(&self.alpha_vec).dot(&x)
    }

    /// Mean and second moment of one (non-defective) claim.
    pub(crate) fn claim_moments(&self) -> (f64, f64) {
        let (_, alpha) = self.effective();
        let lu = (-self.sub_intensity()).lu();
        let ones = DVector::from_element(self.m, 1.0);
        let x1 = lu.solve(&ones).expect("validated nonsingular");
        let x2 = lu.solve(&x1).expect("validated nonsingular");
        (alpha.dot(&x1), 2.0 * alpha.dot(&x2))
    }

    /// Slowest exponential decay rate of the claim tail.
    pub(crate) fn tail_rate(&self) -> f64 {
        let eig = self.sub_intensity().complex_eigenvalues();
        eig.iter().map(|z| -z.re).fold(f64::INFINITY, f64::min)
    }

    /// Coefficients of `det(θI - T)` and `α adj(θI - T) t` by
    /// Faddeev–LeVerrier, lowest degree first.
    fn char_polys(&self) -> (Vec<f64>, Vec<f64>) {
        let m = self.m;
        let a = self.sub_intensity();
        let (_, alpha) = self.effective();
        let t = self.exit_vector();
        let mut det = vec![0.0; m + 1];
        det[m] = 1.0;
        let mut adj = vec![0.0; m];
        let mut mk = DMatrix::<f64>::zeros(m, m);
        for k in 1..=m {
            mk = &a * &mk + DMatrix::identity(m, m) * det[m - k + 1];
            adj[m - k] = alpha.dot(&(&mk * &t));
            det[m - k] = -(&a * &mk).trace() / k as f64;
        }
        (det, adj)
    }

    /// Coefficients of `(ψ(θ) - q)·det(θI - T)`.
    fn exponent_numerator(&self, q: Complex64) -> Vec<Complex64> {
        let (det, adj) = self.char_polys();
        let (eta, _) = self.effective();
        let s2 = 0.5 * self.sigma * self.sigma;
        let lin = [-q - eta, Complex64::from(self.c), Complex64::from(s2)];
        let mut out = vec![Complex64::new(0.0, 0.0); det.len() + 2];
        for (i, &l) in lin.iter().enumerate() {
            for (j, &d) in det.iter().enumerate() {
                out[i + j] += l * d;
            }
        }
        for (j, &p) in adj.iter().enumerate() {
            out[j] += eta * p;
        }
        while out.len() > 1 && out.last().is_some_and(|c| c.norm() == 0.0) {
            out.pop();
        }
        out
    }

    pub fn laplace_exponent_complex(&self, theta: Complex64) -> Complex64 {
        let (det, _) = self.char_polys();
        let det: Vec<Complex64> = det.into_iter().map(Complex64::from).collect();
        let num = self.exponent_numerator(Complex64::new(0.0, 0.0));
        polynomial_eval(&num, theta).0 / polynomial_eval(&det, theta).0
    }

    /// Every root of `ψ(θ) = z`.
    pub(crate) fn roots_complex(&self, z: Complex64) -> Result<Vec<Complex64>> {
        polynomial_roots(&self.exponent_numerator(z))
    }

    /// Exponential-sum representation of `W_q`, with the index of the
    /// `e^{Φ_q x}` term.
    pub(crate) fn scale_terms(&self, q: f64, phi: f64) -> Result<(Vec<ExpTerm>, usize)> {
        let num = self.exponent_numerator(Complex64::from(q));
        let roots = polynomial_roots(&num)?;
        let (det, _) = self.char_polys();
        let det: Vec<Complex64> = det.into_iter().map(Complex64::from).collect();
        let scale = roots.iter().map(|r| r.norm()).fold(1.0, f64::max);
        let dominant = roots
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - phi).norm().total_cmp(&(b.1 - phi).norm()))
            .map(|(i, _)| i)
            .ok_or_else(|| Error::RootEnumerationFailed("no roots".into()))?;
        if (roots[dominant] - phi).norm() > 1e-7 * scale {
            return Err(Error::RootEnumerationFailed(format!(
                "no polynomial root matches Phi_q = {phi} (closest {})",
                roots[dominant]
            )));
        }
        for (i, r) in roots.iter().enumerate() {
            if i != dominant && r.re > 1e-9 * scale {
                return Err(Error::RootEnumerationFailed(format!(
                    "root {r} lies in the right half-plane besides Phi_q"
                )));
            }
            for s in &roots[i + 1..] {
                if (r - s).norm() < 1e-7 * scale {
                    return Err(Error::RootEnumerationFailed(format!(
                        "nearly coincident roots {r} and {s}"
                    )));
                }
            }
        }
        let mut terms = Vec::with_capacity(roots.len());
        for (i, &r) in roots.iter().enumerate() {
            let rate = if i == dominant { Complex64::from(phi) } else { r };
            let (_, dp) = polynomial_eval(&num, rate);
            let coef = polynomial_eval(&det, rate).0 / dp;
            terms.push(ExpTerm { coef, rate, power: 0 });
        }
        Ok((terms, dominant))
    }

    /// Density of the compound claim sum over `[0, t]` via uniformisation.
    pub(crate) fn claim_sum(&self, t: f64) -> Result<ClaimSum> {
        let (eta, alpha) = self.effective();
        let m = self.m;
        let mass = eta * t;
        let k_max = poisson_upper(mass).max(1);
        let (mean, second) = self.claim_moments();
        let sd = (second - mean * mean).max(0.0).sqrt();
        let gamma = self.tail_rate();
        let kf = k_max as f64;
        let y_max = kf * mean + 10.0 * kf.sqrt() * sd + 40.0 / gamma;
        let tm = self.sub_intensity();
        let rate = (0..m).map(|i| tm[(i, i)].abs()).fold(0.0, f64::max);
        let n_max = poisson_upper(rate * y_max);
        if n_max > 200_000 {
            return Err(Error::SeriesNotConverged(format!(
                "uniformisation needs {n_max} terms for t={t}"
            )));
        }
        let p = DMatrix::identity(m, m) + &tm / rate;
        let exit = self.exit_vector();
        let exit_scaled = &exit / rate;
        let k_weights = poisson_pmf_upto(mass, k_max);
        let mut blocks: Vec<DVector<f64>> = vec![DVector::zeros(m); k_max];
        blocks[0] = alpha.clone();
        let mut h = Vec::with_capacity(n_max + 1);
        for n in 0..=n_max {
            let mut hn = 0.0;
            for (k, b) in blocks.iter().enumerate() {
                hn += k_weights[k + 1] * b.dot(&exit);
            }
            h.push(hn);
            let mut next: Vec<DVector<f64>> = Vec::with_capacity(k_max);
            for j in 0..k_max {
                let mut v = p.tr_mul(&blocks[j]);
                if j > 0 {
                    v += &alpha * blocks[j - 1].dot(&exit_scaled);
                }
                next.push(v);
            }
            blocks = next;
            if n >= k_max && blocks.iter().all(|b| b.amax() == 0.0) {
                break;
            }
        }
        Ok(ClaimSum {
            rate,
            h,
            y_max,
            no_claim: (-mass).exp(),
        })
    }
}

fn a_norm(entries: &[f64]) -> f64 {
    entries.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Absolutely continuous part of the compound claim sum at a fixed time.
#[derive(Debug, Clone)]
pub(crate) struct ClaimSum {
    rate: f64,
    h: Vec<f64>,
    pub y_max: f64,
    /// Probability of no claim, i.e. the atom of the sum at 0.
    pub no_claim: f64,
}

impl ClaimSum {
    pub fn density(&self, y: f64) -> f64 {
        if !(y > 0.0) || y > self.y_max {
            return 0.0;
        }
        let lam = self.rate * y;
        let n_max = self.h.len() - 1;
        // Only Poisson weights within 14 standard deviations of the mode matter.
        let mode = (lam.floor() as usize).min(n_max);
        let reach = (14.0 * lam.sqrt() + 30.0) as usize;
        let p_mode = (mode as f64 * lam.ln() - lam - ln_gamma(mode as f64 + 1.0)).exp();
        let mut sum = p_mode * self.h[mode];
        let mut p = p_mode;
        for n in (mode + 1)..=(mode + reach).min(n_max) {
            p *= lam / n as f64;
            sum += p * self.h[n];
        }
        p = p_mode;
        for n in (mode.saturating_sub(reach)..mode).rev() {
            p *= (n + 1) as f64 / lam;
            sum += p * self.h[n];
        }
        sum.max(0.0)
    }
}

/// A count beyond which the Poisson(`mean`) tail is below `1e-14`.
pub(crate) fn poisson_upper(mean: f64) -> usize {
    (mean + 12.0 * mean.sqrt() + 40.0).ceil() as usize
}

/// Poisson probabilities `P(N = 0..=n_max)`, recursing outward from the
/// mode so large means do not underflow.
pub(crate) fn poisson_pmf_upto(mean: f64, n_max: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    if mean <= 0.0 {
        out[0] = 1.0;
        return out;
    }
    let mode = (mean.floor() as usize).min(n_max);
    let ln_mode = mode as f64 * mean.ln() - mean - ln_gamma(mode as f64 + 1.0);
    out[mode] = ln_mode.exp();
    for n in (mode + 1)..=n_max {
        out[n] = out[n - 1] * mean / n as f64;
    }
    for n in (0..mode).rev() {
        out[n] = out[n + 1] * (n + 1) as f64 / mean;
    }
    out
}
