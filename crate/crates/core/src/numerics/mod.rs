//! Numerical kernels shared by every higher layer: root finding, adaptive
//! quadrature, Gaver–Stehfest inversion and the special functions the
//! closed-form laws need.
//!
//! Kernels are generic over [`Real`] so the same code runs in `f32` or `f64`.

mod laplace;
mod quadrature;
mod roots;
mod special;

use std::fmt::Debug;

use num_traits::{Float, FloatConst, FromPrimitive};
use serde::{Deserialize, Serialize};

pub use laplace::{laplace_invert, laplace_invert_with, stehfest_weights};
pub use quadrature::{
    gauss_legendre, integrate, integrate_sqrt_singular, QuadratureResult, Quadrature,
};
pub use roots::{
    find_root_increasing, find_root_increasing_newton, polynomial_eval, polynomial_roots,
};
pub use special::{
    gamma_half_integer, ln_gamma, lower_incomplete_gamma, mittag_leffler, mittag_leffler_3_2,
    mittag_leffler_3_2_deriv, normal_cdf, normal_pdf, normal_sf, regularized_gamma,
    whittaker_w, whittaker_w_scaled, NeumaierSum,
};

/// Scalar types the numerical kernels accept.
pub trait Real:
    Float + FloatConst + FromPrimitive + Debug + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("finite literal")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Stopping rule shared by the iterative kernels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_iter: 200,
        }
    }
}

impl Tolerance {
    pub fn new(abs_tol: f64, rel_tol: f64, max_iter: usize) -> crate::Result<Self> {
        if !(abs_tol > 0.0) || !(rel_tol > 0.0) || max_iter == 0 {
            return Err(crate::Error::InvalidParameter(format!(
                "tolerance needs abs_tol > 0, rel_tol > 0, max_iter >= 1 \
                 (got {abs_tol}, {rel_tol}, {max_iter})"
            )));
        }
        Ok(Tolerance {
            abs_tol,
            rel_tol,
            max_iter,
        })
    }

    /// The tolerance used for inner integrals of the delayed scale functions.
    pub fn fine() -> Self {
        Tolerance {
            abs_tol: 1e-14,
            rel_tol: 1e-11,
            max_iter: 400,
        }
    }

    pub fn scaled(self, factor: f64) -> Self {
        Tolerance {
            abs_tol: self.abs_tol * factor,
            rel_tol: self.rel_tol * factor,
            max_iter: self.max_iter,
        }
    }

    pub(crate) fn bound(&self, reference: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * reference.abs())
    }
}
