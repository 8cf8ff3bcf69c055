//! Occupation time below 0 for the base process: exponential, infinite,
//! hypoexponential and fixed horizons, plus ruin-type applications.

mod exp_horizon;
mod fixed;
mod grid;
mod hypoexp;
mod infinite;

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use exp_horizon::{
    last_time_at_max_dist, lt_inverse_occupation, lt_occupation_exp_horizon, occupation_density_exp_horizon,
    ExpHorizonLaw,
};
pub use fixed::{arcsine_tail, cl_atom_a_t, cl_lambda_prime_series, fixed_horizon_bm, fixed_horizon_cl};
pub use grid::{cumulative_integral, gauss_grid, horizon_grid, validate_grid};
pub(crate) use fixed::{bm_lambda_prime, check_inner_grid, drift_tail, fixed_law};
pub(crate) use grid::integrate_checked;
pub use hypoexp::{density_hypoexp_horizon, erlang_rates, erlangize, hypoexp_weights, HypoExpHorizon};
pub use infinite::{dist_infinite, future_drawdown_cdf, prob_inverse_occupation, prob_parisian_exp_delay};

/// Slack allowed before a probability outside `[0, 1]` is treated as a bug.
pub(crate) const CLAMP_SLACK: f64 = 1e-6;

/// The time horizon over which occupation is accumulated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Horizon {
    Exponential { lambda: f64 },
    Infinite,
    Fixed { t: f64 },
    Hypoexponential { rates: Vec<f64> },
}

impl fmt::Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Horizon::Exponential { lambda } => write!(f, "exp:{lambda}"),
            Horizon::Infinite => write!(f, "inf"),
            Horizon::Fixed { t } => write!(f, "fixed:{t}"),
            Horizon::Hypoexponential { rates } => {
                let parts: Vec<String> = rates.iter().map(|r| r.to_string()).collect();
                write!(f, "hypo:{}", parts.join(","))
            }
        }
    }
}

/// Law of an occupation time on a grid: the atom at 0, point masses inside
/// the range, a density and the cumulative distribution at each grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationDistribution {
    pub atom0: f64,
    pub y_grid: Vec<f64>,
    pub density: Vec<f64>,
    pub cdf: Vec<f64>,
    pub horizon: Horizon,
    /// `(location, mass)` of point masses away from 0. Bounded-variation
    /// models started below 0 put one at the claim-free return time.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub interior_atoms: Vec<(f64, f64)>,
    /// Mass at the horizon itself for fixed horizons.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass_at_t: Option<f64>,
    /// Refraction rate, for laws of the refracted process.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

impl OccupationDistribution {
    /// Builds a distribution after checking and clamping the probabilities.
    pub(crate) fn assemble(
        atom0: f64,
        y_grid: Vec<f64>,
        density: Vec<f64>,
        cdf: Vec<f64>,
        horizon: Horizon,
        interior_atoms: Vec<(f64, f64)>,
    ) -> Result<Self> {
        let atom0 = clamp_probability(atom0, "atom0")?;
        let density_scale = density.iter().fold(1.0f64, |m, d| if d.is_finite() { m.max(d.abs()) } else { m });
        let density = density
            .into_iter()
            .map(|d| {
                if d < -CLAMP_SLACK * density_scale {
                    Err(Error::NumericalInconsistency(format!("negative density {d:e}")))
                } else {
                    Ok(d.max(0.0))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = Vec::with_capacity(cdf.len());
        let mut running = atom0;
        for (i, c) in cdf.into_iter().enumerate() {
            let c = clamp_probability(c, "cdf")?;
            if c < running - CLAMP_SLACK {
                return Err(Error::NumericalInconsistency(format!(
                    "cdf decreases from {running} to {c} at y = {}",
                    y_grid[i]
                )));
            }
            running = running.max(c);
            out.push(running);
        }
        Ok(OccupationDistribution {
            atom0,
            y_grid,
            density,
            cdf: out,
            horizon,
            interior_atoms,
            mass_at_t: None,
            delta: None,
        })
    }

    /// `P(O ≤ y)` by linear interpolation of the tabulated cdf; `atom0`
    /// below the first grid point and the last value beyond the grid.
    pub fn cdf_at(&self, y: f64) -> f64 {
        if y < 0.0 {
            return 0.0;
        }
        let g = &self.y_grid;
        if g.is_empty() {
            return self.atom0;
        }
        if y <= g[0] {
            if g[0] == 0.0 || y == g[0] {
                return self.cdf[0];
            }
            return self.atom0 + (self.cdf[0] - self.atom0) * y / g[0];
        }
        let i = g.partition_point(|v| *v < y);
        if i >= g.len() {
            return *self.cdf.last().unwrap_or(&self.atom0);
        }
        let (y0, y1) = (g[i - 1], g[i]);
        let w = (y - y0) / (y1 - y0);
        self.cdf[i - 1] + w * (self.cdf[i] - self.cdf[i - 1])
    }

    /// Total mass accounted for on the grid: the last cdf value plus any
    /// mass at the horizon.
    pub fn total_mass(&self) -> f64 {
        self.cdf.last().copied().unwrap_or(self.atom0) + self.mass_at_t.unwrap_or(0.0)
    }

    /// CSV with a `#` header line carrying the atom and the horizon.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = write!(s, "# atom0={:.16e} horizon={}", self.atom0, self.horizon);
        if let Some(d) = self.delta {
            let _ = write!(s, " delta={d}");
        }
        if let Some(m) = self.mass_at_t {
            let _ = write!(s, " mass_at_t={m:.16e}");
        }
        if !self.interior_atoms.is_empty() {
            let parts: Vec<String> = self.interior_atoms.iter().map(|(y, m)| format!("{y:.16e}:{m:.16e}")).collect();
            let _ = write!(s, " atoms={}", parts.join(";"));
        }
        s.push_str("\ny,density,cdf\n");
        for ((y, d), c) in self.y_grid.iter().zip(&self.density).zip(&self.cdf) {
            let _ = writeln!(s, "{y:.16e},{d:.16e},{c:.16e}");
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap_or_default()
    }
}

/// Clamps `p` into `[0, 1]`, failing if it lies further than the slack
/// outside.
pub(crate) fn clamp_probability(p: f64, what: &str) -> Result<f64> {
    if !p.is_finite() || p < -CLAMP_SLACK || p > 1.0 + CLAMP_SLACK {
        return Err(Error::NumericalInconsistency(format!("{what} = {p} is not a probability")));
    }
    Ok(p.clamp(0.0, 1.0))
}
