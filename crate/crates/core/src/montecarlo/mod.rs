//! Path simulation of the base and refracted processes, used as an
//! independent check on the analytical occupation laws.
//!
//! Bounded-variation models are simulated exactly. Models with a Brownian
//! part use an Euler scheme at step `dt`, whose occupation carries an
//! `O(√dt)` bias.

mod paths;

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::levy_models::ModelSpec;
use crate::occupation::{Horizon, OccupationDistribution};
use crate::refracted::RefractedSpec;
use crate::{Error, Result};

use paths::{euler_path, linear_path, sample_horizon, Dynamics, Outcome};

/// Environment variable capping the number of simulation threads; 0 or
/// unset means one per core.
pub const THREADS_ENV: &str = "RUINLAB_THREADS";

/// The process to simulate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimProcess {
    Base(ModelSpec),
    Refracted(RefractedSpec),
}

impl SimProcess {
    fn parts(&self) -> (&ModelSpec, f64) {
        match self {
            SimProcess::Base(m) => (m, 0.0),
            SimProcess::Refracted(r) => (&r.base, r.delta),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub process: SimProcess,
    pub x0: f64,
    pub horizon: Horizon,
    pub n_paths: usize,
    pub seed: u64,
    /// Euler step; required with a Brownian part and rejected without.
    pub dt: Option<f64>,
    /// Replace the left-endpoint indicator by the expected time a Brownian
    /// bridge between the step endpoints spends below 0. Brownian motion,
    /// refracted or not, only.
    #[serde(default)]
    pub bridge: bool,
}

impl SimConfig {
    pub fn new(process: SimProcess, x0: f64, horizon: Horizon, n_paths: usize, seed: u64) -> Self {
        SimConfig {
            process,
            x0,
            horizon,
            n_paths,
            seed,
            dt: None,
            bridge: false,
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }

    pub fn with_bridge(mut self, on: bool) -> Self {
        self.bridge = on;
        self
    }

    fn dynamics(&self) -> Result<Dynamics> {
        let (model, delta) = self.process.parts();
        model.validate()?;
        if let SimProcess::Refracted(r) = &self.process {
            RefractedSpec::new(r.base.clone(), r.delta)?;
        }
        let dy = Dynamics::new(model, delta)?;
        if self.n_paths == 0 {
            return Err(Error::DomainError("n_paths must be >= 1".into()));
        }
        if !self.x0.is_finite() {
            return Err(Error::DomainError(format!("x0 must be finite, got {}", self.x0)));
        }
        match (dy.has_diffusion(), self.dt) {
            (true, Some(dt)) if dt > 0.0 && dt.is_finite() => {}
            (true, Some(dt)) => return Err(Error::DomainError(format!("dt must be > 0, got {dt}"))),
            (true, None) => return Err(Error::DomainError("a Brownian part needs a time step dt".into())),
            (false, Some(_)) => {
                return Err(Error::DomainError(
                    "bounded-variation paths are simulated exactly and take no dt".into(),
                ))
            }
            (false, None) => {}
        }
        if self.bridge && !dy.is_brownian() {
            return Err(Error::UnsupportedModel(
                "the bridge refinement needs a model without claims".into(),
            ));
        }
        if matches!(self.horizon, Horizon::Infinite) {
            return Err(Error::DomainError("simulation needs a finite horizon".into()));
        }
        Ok(dy)
    }
}

/// Sorted occupation samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    pub samples: Vec<f64>,
    pub zero_count: usize,
    pub n: usize,
    pub horizon: Horizon,
    pub seed: u64,
}

impl EmpiricalDistribution {
    pub fn from_samples(mut samples: Vec<f64>, horizon: Horizon, seed: u64) -> Self {
        samples.sort_by(f64::total_cmp);
        let zero_count = samples.iter().take_while(|s| **s <= 0.0).count();
        EmpiricalDistribution {
            n: samples.len(),
            samples,
            zero_count,
            horizon,
            seed,
        }
    }

    /// Fraction of samples `<= y`.
    pub fn cdf(&self, y: f64) -> f64 {
        self.samples.partition_point(|s| *s <= y) as f64 / self.n as f64
    }

    /// Fraction of samples `> y`.
    pub fn tail(&self, y: f64) -> f64 {
        1.0 - self.cdf(y)
    }

    pub fn atom_fraction(&self) -> f64 {
        self.zero_count as f64 / self.n as f64
    }

    /// Lower empirical quantile.
    pub fn quantile(&self, p: f64) -> f64 {
        let k = ((p * self.n as f64).ceil() as usize).clamp(1, self.n);
        self.samples[k - 1]
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.n as f64
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("occupation\n");
        for v in &self.samples {
            let _ = writeln!(s, "{v:.16e}");
        }
        s
    }

    pub fn summary_json(&self) -> String {
        let probs = [0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99];
        let quantiles: serde_json::Map<String, serde_json::Value> = probs
            .iter()
            .map(|p| (p.to_string(), serde_json::json!(self.quantile(*p))))
            .collect();
        let v = serde_json::json!({
            "n": self.n,
            "zero_count": self.zero_count,
            "seed": self.seed,
            "horizon": self.horizon,
            "mean": self.mean(),
            "quantiles": quantiles,
        });
        serde_json::to_string_pretty(&v).unwrap_or_default()
    }
}

/// Runs `f` on a pool sized by [`THREADS_ENV`].
pub fn with_thread_cap<R: Send>(f: impl FnOnce() -> R + Send) -> Result<R> {
    let n = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| Error::DomainError(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Runs every path; stream `i` of the ChaCha generator keyed by the seed
/// drives path `i`, so results do not depend on scheduling.
fn run(config: &SimConfig, target: f64) -> Result<Vec<(Outcome, f64)>> {
    let dy = config.dynamics()?;
    let one = |i: usize| -> Result<(Outcome, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(i as u64);
        let t = sample_horizon(&config.horizon, &mut rng)?;
        let out = match config.dt {
            Some(dt) => euler_path(&dy, config.x0, t, dt, config.bridge, target, &mut rng),
            None => linear_path(&dy, config.x0, t, target, &mut rng),
        };
        Ok((out, t))
    };
    with_thread_cap(|| (0..config.n_paths).into_par_iter().map(one).collect())?
}

/// Occupation below 0 over the horizon, one sample per path.
pub fn simulate_occupation(config: &SimConfig) -> Result<EmpiricalDistribution> {
    let samples = run(config, f64::INFINITY)?.into_iter().map(|(o, _)| o.occupation).collect();
    Ok(EmpiricalDistribution::from_samples(samples, config.horizon.clone(), config.seed))
}

/// Fraction of paths whose occupation exceeds `r` before the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseOccupationEstimate {
    pub r: f64,
    pub horizon: Horizon,
    /// `P(σ_r <= t)` for a fixed horizon and `E[e^{-λσ_r}]` for an
    /// exponential one.
    pub estimate: f64,
    pub std_error: f64,
    /// Mean of `σ_r` over the paths where it falls inside the horizon.
    pub mean_hit_time: Option<f64>,
    pub n: usize,
}

/// Estimates the law of the inverse occupation time `σ_r` by counting the
/// paths where it falls inside the horizon.
pub fn simulate_inverse_occupation(config: &SimConfig, r: f64) -> Result<InverseOccupationEstimate> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::DomainError(format!("r must be > 0, got {r}")));
    }
    let runs = run(config, r)?;
    let hits: Vec<f64> = runs.iter().filter_map(|(o, _)| o.crossed_at).collect();
    let n = runs.len();
    let p = hits.len() as f64 / n as f64;
    Ok(InverseOccupationEstimate {
        r,
        horizon: config.horizon.clone(),
        estimate: p,
        std_error: (p * (1.0 - p) / n as f64).sqrt(),
        mean_hit_time: (!hits.is_empty()).then(|| hits.iter().sum::<f64>() / hits.len() as f64),
        n,
    })
}

/// Analytical cdf with the mass at a fixed horizon added at `t`.
fn law_cdf(dist: &OccupationDistribution, y: f64) -> f64 {
    let base = dist.cdf_at(y);
    match (&dist.horizon, dist.mass_at_t) {
        (Horizon::Fixed { t }, Some(m)) if y >= *t => base + m,
        _ => base,
    }
}

/// Kolmogorov-Smirnov distance between samples and an analytical law,
/// taken on both sides of every distinct sample value.
pub fn ks_distance(emp: &EmpiricalDistribution, dist: &OccupationDistribution) -> Result<f64> {
    if emp.horizon != dist.horizon {
        return Err(Error::HorizonMismatch(format!(
            "samples over {} against a law over {}",
            emp.horizon, dist.horizon
        )));
    }
    let s = &emp.samples;
    let n = emp.n as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < s.len() {
        let v = s[i];
        let mut j = i;
        while j < s.len() && s[j] == v {
            j += 1;
        }
        let at = law_cdf(dist, v);
        let before = if v <= 0.0 { 0.0 } else { at };
        d = d.max((j as f64 / n - at).abs()).max((i as f64 / n - before).abs());
        i = j;
    }
    Ok(d)
}

#[cfg(test)]
mod tests;
