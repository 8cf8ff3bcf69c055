use std::fmt::Write as _;

use ruinlab::levy_models::ModelSpec;
use ruinlab::montecarlo::{simulate_occupation, SimConfig, SimProcess};
use ruinlab::occupation::{
    dist_infinite, erlangize, fixed_horizon_bm, fixed_horizon_cl, future_drawdown_cdf, lt_inverse_occupation,
    lt_occupation_exp_horizon, occupation_density_exp_horizon, prob_inverse_occupation, prob_parisian_exp_delay,
    density_hypoexp_horizon, ExpHorizonLaw, HypoExpHorizon, OccupationDistribution,
};
use ruinlab::refracted::{
    fixed_horizon_refracted_bm, fixed_horizon_refracted_cl, literal_atom_refracted, lt_inverse_occupation_refracted,
    lt_occupation_refracted, lt_parisian_refracted, occupation_density_refracted_exp,
    prob_inverse_occupation_refracted, RefractedSpec,
};
use ruinlab::scale::{verify_identities, IdentityGrid, ScaleContext};
use ruinlab::Error;
use serde_json::json;

use crate::error::CliError;
use crate::request::{CommandName, Format, GridSpec, HorizonSpec, RunRequest, Suite};

/// Gap allowed between the analytical and simulated refracted atom.
const ATOM_TOLERANCE: f64 = 0.01;

/// Text for the output sink, and the failure to report after writing it.
pub struct Report {
    pub text: String,
    pub failure: Option<CliError>,
}

impl From<String> for Report {
    fn from(text: String) -> Self {
        Report { text, failure: None }
    }
}

/// Carries out a request.
pub fn execute(req: &RunRequest) -> Result<Report, CliError> {
    req.model.validate()?;
    let refracted = req.delta.map(|d| RefractedSpec::new(req.model.clone(), d)).transpose()?;
    match req.command {
        CommandName::Density => density(req, refracted.as_ref()).map(Report::from),
        CommandName::Lt => lt(req, refracted.as_ref()).map(Report::from),
        CommandName::Ruin => ruin(req, refracted.as_ref()).map(Report::from),
        CommandName::Parisian => parisian(req, refracted.as_ref()).map(Report::from),
        CommandName::InverseOccupation => inverse_occupation(req, refracted.as_ref()).map(Report::from),
        CommandName::Drawdown => drawdown(req, refracted.as_ref()).map(Report::from),
        CommandName::Simulate => simulate(req).map(Report::from),
        CommandName::Validate => validate(req, refracted.as_ref()),
    }
}

fn need_grid(req: &RunRequest) -> Result<&GridSpec, CliError> {
    req.grid.as_ref().ok_or_else(|| CliError::usage("this command needs --grid start:stop:points"))
}

fn need_horizon(req: &RunRequest) -> Result<&HorizonSpec, CliError> {
    req.horizon.as_ref().ok_or_else(|| CliError::usage("this command needs --horizon"))
}

fn need(value: Option<f64>, flag: &str) -> Result<f64, CliError> {
    value.ok_or_else(|| CliError::usage(format!("this command needs --{flag}")))
}

fn unsupported(what: &str) -> CliError {
    Error::DomainError(what.to_string()).into()
}

fn exp_rate(h: &HorizonSpec, command: &str) -> Result<f64, CliError> {
    match h {
        HorizonSpec::Exp(l) => Ok(*l),
        _ => Err(unsupported(&format!("{command} needs an exponential horizon, got {h}"))),
    }
}

fn density(req: &RunRequest, refracted: Option<&RefractedSpec>) -> Result<String, CliError> {
    let grid = need_grid(req)?.values();
    let law = match (need_horizon(req)?, refracted) {
        (HorizonSpec::Exp(l), None) => occupation_density_exp_horizon(&req.model, req.x, *l, &grid)?,
        (HorizonSpec::Exp(l), Some(spec)) => occupation_density_refracted_exp(spec, req.x, *l, &grid)?,
        (HorizonSpec::Fixed(t), spec) => fixed_law(req, spec, *t, &grid)?,
        (HorizonSpec::Inf, None) => dist_infinite(&req.model, req.x, &grid)?,
        (HorizonSpec::Hypo(rates), None) => {
            density_hypoexp_horizon(&req.model, req.x, &HypoExpHorizon::new(rates.clone())?, &grid)?
        }
        (HorizonSpec::Erlang(t, n), None) => erlangize(&req.model, req.x, *t, *n, &grid)?,
        (h, Some(_)) => {
            return Err(unsupported(&format!(
                "refracted laws need an exponential or fixed horizon, got {h}"
            )))
        }
    };
    Ok(match req.format {
        Format::Csv => law.to_csv(),
        Format::Json => law.to_json() + "\n",
    })
}

/// Fixed-horizon law on the grid points strictly inside `(0, t)`.
fn fixed_law(
    req: &RunRequest,
    refracted: Option<&RefractedSpec>,
    t: f64,
    grid: &[f64],
) -> Result<OccupationDistribution, CliError> {
    if req.x != 0.0 {
        return Err(Error::InvalidStart { x: req.x }.into());
    }
    let inner: Vec<f64> = grid.iter().copied().filter(|y| *y > 0.0 && *y < t).collect();
    if inner.is_empty() {
        return Err(unsupported(&format!("no grid point lies strictly inside (0, {t})")));
    }
    let delta = refracted.map(|s| s.delta);
    Ok(match (&req.model, delta) {
        (ModelSpec::CramerLundbergExp { c, eta, alpha }, None) => fixed_horizon_cl(*c, *eta, *alpha, t, &inner)?,
        (ModelSpec::CramerLundbergExp { c, eta, alpha }, Some(d)) => {
            fixed_horizon_refracted_cl(*c, *eta, *alpha, d, t, &inner)?
        }
        (ModelSpec::BrownianDrift { mu, sigma }, None) => fixed_horizon_bm(*mu, *sigma, t, &inner)?,
        (ModelSpec::BrownianDrift { mu, sigma }, Some(d)) => fixed_horizon_refracted_bm(*mu, *sigma, d, t, &inner)?,
        (m, _) => return Err(unsupported(&format!("fixed horizons are available for bm and cl, not {}", m.name()))),
    })
}

/// Two-column table of `f` over the grid.
fn table(
    req: &RunRequest,
    variable: &str,
    column: &str,
    f: impl Fn(f64) -> ruinlab::Result<f64>,
) -> Result<String, CliError> {
    let points = need_grid(req)?.values();
    let values = points.iter().map(|v| f(*v)).collect::<ruinlab::Result<Vec<_>>>()?;
    Ok(match req.format {
        Format::Csv => {
            let mut s = format!("{variable},{column}\n");
            for (p, v) in points.iter().zip(&values) {
                let _ = writeln!(s, "{p:.16e},{v:.16e}");
            }
            s
        }
        Format::Json => {
            let v = json!({ "command": req.command, variable: points, column: values });
            serde_json::to_string_pretty(&v).unwrap_or_default() + "\n"
        }
    })
}

fn lt(req: &RunRequest, refracted: Option<&RefractedSpec>) -> Result<String, CliError> {
    let lambda = exp_rate(need_horizon(req)?, "lt")?;
    let x = req.x;
    table(req, "q", "laplace_transform", |q| match refracted {
        _ if q == 0.0 => Ok(1.0),
        None => lt_occupation_exp_horizon(&req.model, x, q, lambda),
        Some(spec) => lt_occupation_refracted(spec, x, q, lambda),
    })
}

fn ruin(req: &RunRequest, refracted: Option<&RefractedSpec>) -> Result<String, CliError> {
    let col = "ruin_probability";
    match (need_horizon(req)?, refracted) {
        (HorizonSpec::Inf, None) => {
            let drift = req.model.require_net_profit(0.0)?;
            let ctx = ScaleContext::new(&req.model, 0.0)?;
            table(req, "x", col, |x| Ok(1.0 - drift * ctx.w(x)?))
        }
        (HorizonSpec::Exp(l), None) => table(req, "x", col, |x| Ok(1.0 - ExpHorizonLaw::new(&req.model, x, *l)?.atom0())),
        (HorizonSpec::Exp(l), Some(spec)) => table(req, "x", col, |x| {
            Ok(1.0 - occupation_density_refracted_exp(spec, x, *l, &[1.0])?.atom0)
        }),
        (h, _) => Err(unsupported(&format!("ruin supports inf and exp horizons (exp only when refracted), got {h}"))),
    }
}

fn parisian(req: &RunRequest, refracted: Option<&RefractedSpec>) -> Result<String, CliError> {
    let q = need(req.q, "q")?;
    let col = "parisian_ruin";
    match (need_horizon(req)?, refracted) {
        (HorizonSpec::Inf, None) => table(req, "x", col, |x| prob_parisian_exp_delay(&req.model, x, q)),
        (HorizonSpec::Exp(l), None) => {
            table(req, "x", col, |x| Ok(1.0 - lt_occupation_exp_horizon(&req.model, x, q, *l)?))
        }
        (HorizonSpec::Exp(l), Some(spec)) => table(req, "x", col, |x| lt_parisian_refracted(spec, x, q, *l)),
        (h, _) => Err(unsupported(&format!("parisian supports inf and exp horizons (exp only when refracted), got {h}"))),
    }
}

fn inverse_occupation(req: &RunRequest, refracted: Option<&RefractedSpec>) -> Result<String, CliError> {
    if need_grid(req)?.start <= 0.0 {
        return Err(CliError::usage("inverse-occupation needs a grid of r values starting above 0"));
    }
    let x = req.x;
    match (need_horizon(req)?, refracted) {
        (HorizonSpec::Inf, None) => table(req, "r", "probability", |r| prob_inverse_occupation(&req.model, x, r)),
        (HorizonSpec::Inf, Some(spec)) => {
            table(req, "r", "probability", |r| prob_inverse_occupation_refracted(spec, x, r))
        }
        (HorizonSpec::Exp(l), None) => {
            table(req, "r", "laplace_transform", |r| lt_inverse_occupation(&req.model, x, r, *l))
        }
        (HorizonSpec::Exp(l), Some(spec)) => {
            table(req, "r", "laplace_transform", |r| lt_inverse_occupation_refracted(spec, x, r, *l))
        }
        (h, _) => Err(unsupported(&format!("inverse-occupation supports inf and exp horizons, got {h}"))),
    }
}

fn drawdown(req: &RunRequest, refracted: Option<&RefractedSpec>) -> Result<String, CliError> {
    if refracted.is_some() {
        return Err(unsupported("drawdown is available for the base process only"));
    }
    let s = need(req.s, "s")?;
    table(req, "x", "cdf", |x| future_drawdown_cdf(&req.model, s, x))
}

fn sim_config(req: &RunRequest, refracted: Option<RefractedSpec>, n_paths: usize) -> Result<SimConfig, CliError> {
    let process = match refracted {
        Some(spec) => SimProcess::Refracted(spec),
        None => SimProcess::Base(req.model.clone()),
    };
    let mut cfg = SimConfig::new(process, req.x, need_horizon(req)?.to_horizon()?, n_paths, req.seed.unwrap_or(0))
        .with_bridge(req.bridge);
    cfg.dt = req.dt;
    Ok(cfg)
}

fn simulate(req: &RunRequest) -> Result<String, CliError> {
    let refracted = req.delta.map(|d| RefractedSpec::new(req.model.clone(), d)).transpose()?;
    let cfg = sim_config(req, refracted, req.n_paths.unwrap_or(crate::request::DEFAULT_PATHS))?;
    let emp = simulate_occupation(&cfg)?;
    Ok(match req.format {
        Format::Csv => emp.to_csv(),
        Format::Json => emp.summary_json() + "\n",
    })
}

fn validate(req: &RunRequest, refracted: Option<&RefractedSpec>) -> Result<Report, CliError> {
    match req.suite.unwrap_or(Suite::Identities) {
        Suite::Identities => {
            let model = match refracted {
                Some(spec) => spec.y_model()?,
                None => req.model.clone(),
            };
            let ctx = ScaleContext::new(&model, req.q.unwrap_or(1.0))?;
            let report = verify_identities(&ctx, &IdentityGrid::default());
            let text = match req.format {
                Format::Json => report.to_json() + "\n",
                Format::Csv => {
                    let mut s = String::from("identity,max_abs_err,max_rel_err,points,tolerance,passed\n");
                    for (name, row) in &report.identities {
                        let _ = writeln!(
                            s,
                            "{name},{:.16e},{:.16e},{},{:.16e},{}",
                            row.max_abs_err, row.max_rel_err, row.points, row.tolerance, row.passed
                        );
                    }
                    s
                }
            };
            let failed: Vec<&str> =
                report.identities.iter().filter(|(_, r)| !r.passed).map(|(n, _)| n.as_str()).collect();
            let failure = (!failed.is_empty())
                .then(|| CliError::ValidationFailed(format!("identities above tolerance: {}", failed.join(", "))));
            Ok(Report { text, failure })
        }
        Suite::RefractedAtom => refracted_atom(req, refracted),
    }
}

/// Analytical refracted atom, its literal alternative and the simulated
/// frequency of never going below 0 before the horizon.
fn refracted_atom(req: &RunRequest, refracted: Option<&RefractedSpec>) -> Result<Report, CliError> {
    let spec = refracted.ok_or_else(|| CliError::usage("the refracted-atom suite needs --delta"))?;
    let lambda = exp_rate(need_horizon(req)?, "the refracted-atom suite")?;
    let implemented = occupation_density_refracted_exp(spec, req.x, lambda, &[1.0])?.atom0;
    let literal = literal_atom_refracted(spec, req.x, lambda)?;
    let n = req.n_paths.unwrap_or(crate::request::DEFAULT_ATOM_PATHS);
    let simulated = simulate_occupation(&sim_config(req, Some(spec.clone()), n)?)?.atom_fraction();
    let passed = (implemented - simulated).abs() < ATOM_TOLERANCE;
    let v = json!({
        "suite": "refracted-atom",
        "model": req.model,
        "delta": spec.delta,
        "x": req.x,
        "lambda": lambda,
        "n_paths": n,
        "seed": req.seed.unwrap_or(0),
        "tolerance": ATOM_TOLERANCE,
        "simulated": simulated,
        "implemented": { "atom0": implemented, "passed": passed },
        "literal": { "atom0": literal, "passed": (literal - simulated).abs() < ATOM_TOLERANCE },
    });
    let text = match req.format {
        Format::Json => serde_json::to_string_pretty(&v).unwrap_or_default() + "\n",
        Format::Csv => format!(
            "expression,atom0,simulated,passed\nimplemented,{implemented:.16e},{simulated:.16e},{passed}\nliteral,{literal:.16e},{simulated:.16e},{}\n",
            (literal - simulated).abs() < ATOM_TOLERANCE
        ),
    };
    let failure = (!passed).then(|| {
        CliError::ValidationFailed(format!("analytical atom {implemented} vs simulated {simulated}"))
    });
    Ok(Report { text, failure })
}
