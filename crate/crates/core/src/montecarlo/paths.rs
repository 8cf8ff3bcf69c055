use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Exp1, StandardNormal};

use crate::levy_models::ModelSpec;
use crate::occupation::Horizon;
use crate::{Error, Result};

/// Same-side steps with `2ab/(σ²h)` above this cross 0 with probability
/// below `e^{-40}` and are not refined.
const BRIDGE_CUTOFF: f64 = 40.0;

#[derive(Debug, Clone)]
pub(crate) enum Claims {
    Exponential { alpha: f64 },
    PhaseType {
        /// Cumulative initial distribution.
        start: Vec<f64>,
        /// Holding rate `-T_ii` per phase.
        hold: Vec<f64>,
        /// Cumulative jump distribution per phase; the final entry is
        /// absorption.
        moves: Vec<Vec<f64>>,
    },
}

impl Claims {
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Claims::Exponential { alpha } => rng.sample::<f64, _>(Exp1) / alpha,
            Claims::PhaseType { start, hold, moves } => {
                let mut phase = pick(start, rng.random());
                let mut size = 0.0;
                loop {
                    size += rng.sample::<f64, _>(Exp1) / hold[phase];
                    let next = pick(&moves[phase], rng.random());
                    if next == hold.len() {
                        return size;
                    }
                    phase = next;
                }
            }
        }
    }
}

fn pick(cumulative: &[f64], u: f64) -> usize {
    cumulative.iter().position(|c| u < *c).unwrap_or(cumulative.len() - 1)
}

/// Dynamics of `U`: linear drift that drops by `δ` above 0, an optional
/// Brownian part and compound Poisson claims.
#[derive(Debug, Clone)]
pub(crate) struct Dynamics {
    below: f64,
    above: f64,
    sigma: f64,
    claim_rate: f64,
    claims: Option<Claims>,
}

impl Dynamics {
    pub(crate) fn new(model: &ModelSpec, delta: f64) -> Result<Self> {
        let d = match model {
            ModelSpec::BrownianDrift { mu, sigma } => Dynamics {
                below: *mu,
                above: *mu,
                sigma: *sigma,
                claim_rate: 0.0,
                claims: None,
            },
            ModelSpec::CramerLundbergExp { c, eta, alpha } => Dynamics {
                below: *c,
                above: *c,
                sigma: 0.0,
                claim_rate: *eta,
                claims: Some(Claims::Exponential { alpha: *alpha }),
            },
            ModelSpec::JumpDiffusionPhaseType(p) => {
                let (rate, init) = p.effective();
                let m = p.m;
                let mut start = Vec::with_capacity(m);
                let mut acc = 0.0;
                for a in init.iter() {
                    acc += a;
                    start.push(acc);
                }
                let exit = p.exit_vector();
                let mut hold = Vec::with_capacity(m);
                let mut moves = Vec::with_capacity(m);
                for i in 0..m {
                    let h = -p.t_matrix[i * m + i];
                    let mut row = Vec::with_capacity(m + 1);
                    let mut acc = 0.0;
                    for j in 0..m {
                        if j != i {
                            acc += p.t_matrix[i * m + j] / h;
                        }
                        row.push(acc);
                    }
                    acc += exit[i] / h;
                    row.push(acc.max(1.0));
                    hold.push(h);
                    moves.push(row);
                }
                Dynamics {
                    below: p.c,
                    above: p.c,
                    sigma: p.sigma,
                    claim_rate: rate,
                    claims: Some(Claims::PhaseType { start, hold, moves }),
                }
            }
            ModelSpec::StableThreeHalves => {
                return Err(Error::UnsupportedModel(
                    "the stable family has no tractable exact path scheme".into(),
                ))
            }
        };
        Ok(Dynamics {
            above: d.below - delta,
            ..d
        })
    }

    pub(crate) fn has_diffusion(&self) -> bool {
        self.sigma > 0.0
    }

    pub(crate) fn is_brownian(&self) -> bool {
        self.claims.is_none()
    }

    fn next_claim(&self, now: f64, rng: &mut ChaCha8Rng) -> f64 {
        if self.claims.is_none() {
            return f64::INFINITY;
        }
        now + rng.sample::<f64, _>(Exp1) / self.claim_rate
    }

    fn claim(&self, rng: &mut ChaCha8Rng) -> f64 {
        self.claims.as_ref().map_or(0.0, |c| c.sample(rng))
    }
}

/// Occupation over the horizon and the first time it exceeded the target.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Outcome {
    pub occupation: f64,
    pub crossed_at: Option<f64>,
}

struct Tracker {
    occupation: f64,
    target: f64,
    crossed_at: Option<f64>,
}

impl Tracker {
    fn new(target: f64) -> Self {
        Tracker {
            occupation: 0.0,
            target,
            crossed_at: None,
        }
    }

    fn add(&mut self, start: f64, dur: f64) {
        if dur <= 0.0 {
            return;
        }
        if self.crossed_at.is_none() && self.occupation + dur > self.target {
            self.crossed_at = Some(start + (self.target - self.occupation).max(0.0));
        }
        self.occupation += dur;
    }

    fn finish(self) -> Outcome {
        Outcome {
            occupation: self.occupation,
            crossed_at: self.crossed_at,
        }
    }
}

pub(crate) fn sample_horizon(horizon: &Horizon, rng: &mut ChaCha8Rng) -> Result<f64> {
    match horizon {
        Horizon::Fixed { t } => Ok(*t),
        Horizon::Exponential { lambda } => exp_draw(*lambda, rng),
        Horizon::Hypoexponential { rates } => rates.iter().map(|r| exp_draw(*r, rng)).sum(),
        Horizon::Infinite => Err(Error::DomainError("simulation needs a finite horizon".into())),
    }
}

fn exp_draw(rate: f64, rng: &mut ChaCha8Rng) -> Result<f64> {
    let e = Exp::new(rate).map_err(|_| Error::DomainError(format!("exponential rate must be > 0, got {rate}")))?;
    Ok(e.sample(rng))
}

/// Exact path of a bounded-variation model: linear between claims, so the
/// time below 0 on each segment is found in closed form.
pub(crate) fn linear_path(dy: &Dynamics, x0: f64, t_end: f64, target: f64, rng: &mut ChaCha8Rng) -> Outcome {
    let mut tr = Tracker::new(target);
    let (mut now, mut x) = (0.0, x0);
    loop {
        let jump = dy.next_claim(now, rng);
        let end = jump.min(t_end);
        let mut len = end - now;
        if x < 0.0 {
            let below = (-x / dy.below).min(len);
            tr.add(now, below);
            len -= below;
            x = if len > 0.0 { 0.0 } else { x + dy.below * below };
        }
        x += dy.above * len;
        if jump >= t_end {
            break;
        }
        x -= dy.claim(rng);
        now = jump;
    }
    tr.finish()
}

/// `e^{x²}erfc(x)` for `x >= 0`.
fn erfcx(x: f64) -> f64 {
    if x > 25.0 {
        let r = 1.0 / (x * x);
        return (1.0 - 0.5 * r + 0.75 * r * r) / (x * std::f64::consts::PI.sqrt());
    }
    (x * x).exp() * libm::erfc(x)
}

/// Expected fraction of a unit-variance, unit-length Brownian bridge from
/// `a` to `b` spent below 0.
fn bridge_fraction(a: f64, b: f64) -> f64 {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    if b < 0.0 {
        return 1.0 - bridge_fraction(-b, -a);
    }
    let root = (0.5 * std::f64::consts::PI).sqrt();
    if a >= 0.0 {
        if 2.0 * a * b > BRIDGE_CUTOFF {
            return 0.0;
        }
        let s = a + b;
        return (-2.0 * a * b).exp() * (0.5 - root * 0.5 * s * erfcx(s / std::f64::consts::SQRT_2));
    }
    0.5 - root * 0.5 * (a + b) * erfcx((b - a) / std::f64::consts::SQRT_2)
}

/// Euler scheme on a grid of step `dt`, drift and indicator taken at the
/// left endpoint of each step; claims are applied at the end of the step
/// containing them.
pub(crate) fn euler_path(
    dy: &Dynamics,
    x0: f64,
    t_end: f64,
    dt: f64,
    bridge: bool,
    target: f64,
    rng: &mut ChaCha8Rng,
) -> Outcome {
    let mut tr = Tracker::new(target);
    let steps = ((t_end / dt) * (1.0 - 1e-12)).ceil().max(1.0) as u64;
    let root = dt.sqrt();
    let var = dy.sigma * dy.sigma * dt;
    let mut x = x0;
    let mut jump = dy.next_claim(0.0, rng);
    for k in 0..steps {
        let now = k as f64 * dt;
        let last = k + 1 == steps;
        let h = if last { t_end - now } else { dt };
        let scale = if last { h.sqrt() } else { root };
        let drift = if x > 0.0 { dy.above } else { dy.below };
        let z: f64 = rng.sample(StandardNormal);
        let mut next = x + drift * h + dy.sigma * scale * z;
        let refine = bridge && (last || 2.0 * x * next <= BRIDGE_CUTOFF * var);
        let below = if refine {
            let sd = dy.sigma * scale;
            h * bridge_fraction(x / sd, next / sd)
        } else if x < 0.0 {
            h
        } else {
            0.0
        };
        tr.add(now, below);
        let end = if last { t_end } else { now + h };
        while jump <= end {
            next -= dy.claim(rng);
            jump = dy.next_claim(jump, rng);
        }
        x = next;
    }
    tr.finish()
}
