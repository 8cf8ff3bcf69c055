use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::levy_models::PhaseType;
use crate::occupation::{
    fixed_horizon_bm, fixed_horizon_cl, lt_inverse_occupation, occupation_density_exp_horizon,
};
use crate::refracted::occupation_density_refracted_exp;

fn cl() -> ModelSpec {
    ModelSpec::cl(1.0, 0.5, 1.0).unwrap()
}

fn inner_grid(t: f64, n: usize) -> Vec<f64> {
    (1..n).map(|i| t * i as f64 / n as f64).collect()
}

fn atom_band(atom: f64, n: usize) -> f64 {
    3.0 * (atom * (1.0 - atom) / n as f64).sqrt()
}

#[test]
fn cl_atom_matches_survival_probability() {
    let cfg = SimConfig::new(SimProcess::Base(cl()), 0.0, Horizon::Fixed { t: 1.0 }, 100_000, 42);
    let emp = simulate_occupation(&cfg).unwrap();
    let law = fixed_horizon_cl(1.0, 0.5, 1.0, 1.0, &inner_grid(1.0, 200)).unwrap();
    assert!((emp.atom_fraction() - law.atom0).abs() < 0.005);
    assert_eq!(emp.n, 100_000);
    assert!(emp.samples.iter().all(|s| (0.0..=1.0).contains(s)));
}

#[test]
fn far_start_never_goes_below() {
    for process in [
        SimProcess::Base(cl()),
        SimProcess::Base(ModelSpec::bm(1.0, 1.0).unwrap()),
    ] {
        let dt = matches!(process, SimProcess::Base(ModelSpec::BrownianDrift { .. })).then_some(1e-2);
        let mut cfg = SimConfig::new(process, 1e6, Horizon::Fixed { t: 1.0 }, 1000, 7);
        cfg.dt = dt;
        let emp = simulate_occupation(&cfg).unwrap();
        assert_eq!(emp.zero_count, emp.n);
    }
}

#[test]
fn zero_refraction_reproduces_the_base_samples() {
    let bm = ModelSpec::bm(1.0, 1.0).unwrap();
    for (model, dt) in [(cl(), None), (bm, Some(1e-3))] {
        let mut base = SimConfig::new(SimProcess::Base(model.clone()), 0.5, Horizon::Exponential { lambda: 1.0 }, 500, 3);
        base.dt = dt;
        let mut refr = base.clone();
        refr.process = SimProcess::Refracted(RefractedSpec::new(model, 0.0).unwrap());
        assert_eq!(simulate_occupation(&base).unwrap(), simulate_occupation(&refr).unwrap());
    }
}

#[test]
fn samples_are_reproducible_across_thread_counts() {
    let cfg = SimConfig::new(SimProcess::Base(cl()), 0.0, Horizon::Fixed { t: 2.0 }, 2000, 11);
    std::env::set_var(THREADS_ENV, "1");
    let one = simulate_occupation(&cfg).unwrap();
    std::env::set_var(THREADS_ENV, "4");
    let four = simulate_occupation(&cfg).unwrap();
    std::env::remove_var(THREADS_ENV);
    assert_eq!(one.to_csv(), four.to_csv());
    assert_eq!(one, simulate_occupation(&cfg).unwrap());
    let other = SimConfig { seed: 12, ..cfg };
    assert_ne!(one.samples, simulate_occupation(&other).unwrap().samples);
}

#[test]
fn config_preconditions() {
    let base = SimConfig::new(SimProcess::Base(cl()), 0.0, Horizon::Fixed { t: 1.0 }, 10, 1);
    let err = |c: &SimConfig| simulate_occupation(c).unwrap_err().name();
    assert_eq!(err(&base.clone().with_dt(1e-3)), "DomainError");
    assert_eq!(err(&SimConfig { n_paths: 0, ..base.clone() }), "DomainError");
    assert_eq!(err(&base.clone().with_bridge(true)), "UnsupportedModel");
    assert_eq!(err(&SimConfig { horizon: Horizon::Infinite, ..base.clone() }), "DomainError");
    let bm = SimConfig {
        process: SimProcess::Base(ModelSpec::bm(0.0, 1.0).unwrap()),
        ..base.clone()
    };
    assert_eq!(err(&bm), "DomainError");
    assert_eq!(err(&bm.clone().with_dt(0.0)), "DomainError");
    let stable = SimConfig {
        process: SimProcess::Base(ModelSpec::StableThreeHalves),
        ..base
    };
    assert_eq!(err(&stable), "UnsupportedModel");
}

/// Draws from a tabulated law by inverting its cdf.
fn sample_law(law: &OccupationDistribution, n: usize, seed: u64) -> EmpiricalDistribution {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = &law.y_grid;
    let samples = (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            if u < law.atom0 {
                return 0.0;
            }
            let i = law.cdf.partition_point(|c| *c < u);
            if i == 0 {
                return g[0] * (u - law.atom0) / (law.cdf[0] - law.atom0);
            }
            if i >= g.len() {
                return *g.last().unwrap();
            }
            let (c0, c1) = (law.cdf[i - 1], law.cdf[i]);
            g[i - 1] + (g[i] - g[i - 1]) * (u - c0) / (c1 - c0)
        })
        .collect();
    EmpiricalDistribution::from_samples(samples, law.horizon.clone(), seed)
}

#[test]
fn ks_distance_properties() {
    let law = fixed_horizon_cl(1.0, 0.5, 1.0, 1.0, &inner_grid(1.0, 400)).unwrap();
    let emp = sample_law(&law, 100_000, 5);
    assert!(ks_distance(&emp, &law).unwrap() < 0.006);

    let mut point = law.clone();
    point.atom0 = 1.0;
    point.cdf.iter_mut().for_each(|c| *c = 1.0);
    point.density.iter_mut().for_each(|d| *d = 0.0);
    let zeros = EmpiricalDistribution::from_samples(vec![0.0; 50], law.horizon.clone(), 0);
    assert_eq!(ks_distance(&zeros, &point).unwrap(), 0.0);

    let mut half = point.clone();
    half.atom0 = 0.5;
    half.cdf = g_linear(&half.y_grid, 0.5, 1.0);
    assert!((ks_distance(&zeros, &half).unwrap() - 0.5).abs() < 1e-15);

    let other = EmpiricalDistribution::from_samples(vec![0.0; 5], Horizon::Fixed { t: 2.0 }, 0);
    assert_eq!(ks_distance(&other, &law).unwrap_err().name(), "HorizonMismatch");
}

fn g_linear(grid: &[f64], atom: f64, t: f64) -> Vec<f64> {
    grid.iter().map(|y| atom + (1.0 - atom) * y / t).collect()
}

#[test]
fn empirical_summaries() {
    let emp = EmpiricalDistribution::from_samples(vec![0.3, 0.0, 0.1, 0.0], Horizon::Fixed { t: 1.0 }, 9);
    assert_eq!(emp.samples, vec![0.0, 0.0, 0.1, 0.3]);
    assert_eq!(emp.zero_count, 2);
    assert_eq!(emp.cdf(0.0), 0.5);
    assert_eq!(emp.quantile(0.5), 0.0);
    assert_eq!(emp.quantile(1.0), 0.3);
    assert_eq!(emp.to_csv().lines().count(), 5);
    let v: serde_json::Value = serde_json::from_str(&emp.summary_json()).unwrap();
    assert_eq!(v["zero_count"], 2);
    assert_eq!(v["seed"], 9);
}

#[test]
fn exponential_horizon_atoms() {
    let n = 40_000;
    let model = cl();
    for x in [0.0, 1.0] {
        let law = occupation_density_exp_horizon(&model, x, 1.0, &[0.5, 1.0]).unwrap();
        let cfg = SimConfig::new(SimProcess::Base(model.clone()), x, Horizon::Exponential { lambda: 1.0 }, n, 21);
        let emp = simulate_occupation(&cfg).unwrap();
        assert!((emp.atom_fraction() - law.atom0).abs() < atom_band(law.atom0, n), "x={x}");
    }
    let spec = RefractedSpec::new(model, 0.25).unwrap();
    let law = occupation_density_refracted_exp(&spec, 1.0, 1.0, &[0.5, 1.0]).unwrap();
    let cfg = SimConfig::new(SimProcess::Refracted(spec), 1.0, Horizon::Exponential { lambda: 1.0 }, n, 22);
    let emp = simulate_occupation(&cfg).unwrap();
    assert!((emp.atom_fraction() - law.atom0).abs() < atom_band(law.atom0, n));
}

#[test]
fn phase_type_claims_are_sampled_in_law() {
    // Erlang(2, 2) claims with unit mean; thinned by half through α.
    let p = PhaseType::new(1.0, 0.0, 1.0, vec![-2.0, 2.0, 0.0, -2.0], vec![0.5, 0.0]).unwrap();
    let model = ModelSpec::JumpDiffusionPhaseType(p);
    let n = 40_000;
    let law = occupation_density_exp_horizon(&model, 0.5, 1.0, &[0.5, 1.0]).unwrap();
    let cfg = SimConfig::new(SimProcess::Base(model), 0.5, Horizon::Exponential { lambda: 1.0 }, n, 31);
    let emp = simulate_occupation(&cfg).unwrap();
    assert!((emp.atom_fraction() - law.atom0).abs() < atom_band(law.atom0, n));
}

#[test]
fn inverse_occupation_estimates() {
    let model = cl();
    let fixed = SimConfig::new(SimProcess::Base(model.clone()), 0.0, Horizon::Fixed { t: 1.0 }, 20_000, 4);
    assert_eq!(simulate_inverse_occupation(&fixed, 1.5).unwrap().estimate, 0.0);
    let ruin = 1.0 - simulate_occupation(&fixed).unwrap().atom_fraction();
    let tiny = simulate_inverse_occupation(&fixed, 1e-12).unwrap();
    assert!((tiny.estimate - ruin).abs() < 1e-3);

    let exp = SimConfig::new(SimProcess::Base(model.clone()), 0.0, Horizon::Exponential { lambda: 1.0 }, 40_000, 4);
    let est = simulate_inverse_occupation(&exp, 0.5).unwrap();
    let exact = lt_inverse_occupation(&model, 0.0, 0.5, 1.0).unwrap();
    assert!((est.estimate - exact).abs() < 0.01, "{} vs {exact}", est.estimate);
    assert!(est.mean_hit_time.unwrap() > 0.5);
}

#[test]
fn euler_bias_shrinks_with_the_step() {
    let law = fixed_horizon_bm(1.0, 1.0, 1.0, &inner_grid(1.0, 400)).unwrap();
    let ks = |dt: f64| -> f64 {
        (0..5)
            .map(|seed| {
                let cfg = SimConfig::new(
                    SimProcess::Base(ModelSpec::bm(1.0, 1.0).unwrap()),
                    0.0,
                    Horizon::Fixed { t: 1.0 },
                    10_000,
                    seed,
                )
                .with_dt(dt);
                ks_distance(&simulate_occupation(&cfg).unwrap(), &law).unwrap()
            })
            .sum::<f64>()
            / 5.0
    };
    let (coarse, fine) = (ks(1e-3), ks(1e-4));
    assert!(coarse >= fine, "{coarse} < {fine}");
}

#[test]
fn bridge_removes_the_grid_atom() {
    let cfg = SimConfig::new(
        SimProcess::Base(ModelSpec::bm(0.0, 1.0).unwrap()),
        0.0,
        Horizon::Fixed { t: 1.0 },
        4000,
        8,
    )
    .with_dt(1e-3);
    let plain = simulate_occupation(&cfg).unwrap();
    let bridged = simulate_occupation(&cfg.with_bridge(true)).unwrap();
    assert!(plain.zero_count > 0);
    assert_eq!(bridged.zero_count, 0);
    assert!(bridged.samples.iter().all(|s| (0.0..=1.0 + 1e-12).contains(s)));
}
