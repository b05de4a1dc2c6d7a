mod common;

use goodwill::allocator::{self, Constraints};
use goodwill::blocks::Variant;
use goodwill::dataset::split;
use goodwill::forecast::{self, FutureInputs};
use goodwill::mcmc::McmcConfig;
use goodwill::model::{self, FitConfig, FittedModel};
use goodwill::priors::PriorConfig;
use goodwill::store;

fn quick_config(seed: u64) -> FitConfig {
    FitConfig {
        spec: common::spec(Variant::RF),
        priors: PriorConfig {
            expected_model_size: 3.0,
            ..Default::default()
        },
        mcmc: McmcConfig {
            chains: 2,
            iterations: 400,
            burn_in: 200,
            seed,
            ..Default::default()
        },
    }
}

fn fitted() -> (FittedModel, goodwill::dataset::Dataset) {
    let (d, _) = common::simulate(180, 11);
    let (train, hold) = split(&d, 150).unwrap();
    (model::fit(&train, &quick_config(3)).unwrap(), hold)
}

#[test]
fn store_round_trip_is_exact() {
    let (m, _) = fitted();
    let dir = tempfile::tempdir().unwrap();
    store::save(&m, dir.path()).unwrap();
    let back = store::load(dir.path()).unwrap();
    assert_eq!(m, back);
}

#[test]
fn identical_seeds_give_identical_manifests() {
    let (d, _) = common::simulate(120, 2);
    let a = model::fit(&d, &quick_config(9)).unwrap();
    let b = model::fit(&d, &quick_config(9)).unwrap();
    let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    store::save(&a, da.path()).unwrap();
    store::save(&b, db.path()).unwrap();
    for f in ["manifest.json", "draws/chain-0.csv", "draws/chain-1.csv"] {
        assert_eq!(std::fs::read(da.path().join(f)).unwrap(), std::fs::read(db.path().join(f)).unwrap(), "{f}");
    }
    let c = model::fit(&d, &quick_config(10)).unwrap();
    assert_ne!(a.chains[0].draws, c.chains[0].draws);
}

#[test]
fn simulated_forecast_matches_exact_mixture_moments() {
    let (m, hold) = fitted();
    let future = FutureInputs::from_dataset(&m, &hold).unwrap();
    let f = forecast::predictive_sample(&m, &future, 6, 1).unwrap();
    let n = f.paths.len() as f64;
    for t in 0..6 {
        let se = (f.mixture_variance[t] / n).sqrt();
        assert!((f.mean[t] - f.mixture_mean[t]).abs() < 3.5 * se, "step {t}");
        assert!(f.lower[t] <= f.median[t] && f.median[t] <= f.upper[t]);
    }
    let again = forecast::predictive_sample(&m, &future, 6, 1).unwrap();
    assert_eq!(f, again);
}

#[test]
fn missing_future_regressors_are_rejected() {
    let (m, hold) = fitted();
    let future = FutureInputs::from_dataset(&m, &hold.slice(0..2)).unwrap();
    assert!(forecast::predictive_sample(&m, &future, 5, 1).is_err());
}

#[test]
fn holdout_report_is_well_formed() {
    let (m, hold) = fitted();
    let e = forecast::one_step_ahead(&m, &hold).unwrap();
    assert_eq!(e.steps.len(), hold.len());
    assert!(e.mape.unwrap() >= 0.0);
    assert!((0.0..=1.0).contains(&e.coverage));
    let total: f64 = e.cps.values().map(|y| y.actual).sum();
    let observed: f64 = hold.sales.iter().flatten().sum();
    assert!((total - observed).abs() < 1e-9 * observed.abs());
    for s in &e.steps {
        assert!(s.lower <= s.mean && s.mean <= s.upper);
    }
}

#[test]
fn moment_model_agrees_with_the_forecast() {
    let (m, hold) = fitted();
    let mut future = FutureInputs::from_dataset(&m, &hold).unwrap();
    for row in &mut future.spend {
        row.iter_mut().for_each(|u| *u = 0.0);
    }
    let f = forecast::predictive_sample(&m, &future, 2, 0).unwrap();
    let mm = allocator::reduce(&m, &future.regressors[1..2], 1).unwrap();
    let zero = vec![0.0; 3];
    assert!((mm.mean(&zero) - f.mixture_mean[1]).abs() < 1e-10 * (1.0 + f.mixture_mean[1].abs()));
    assert!((mm.variance(&zero) - f.mixture_variance[1]).abs() < 1e-9 * f.mixture_variance[1]);

    // A unit of spend on one channel moves the mean forecast by the reduced slope.
    future.spend[0][1] = 1.0;
    let g = forecast::predictive_sample(&m, &future, 2, 0).unwrap();
    assert!((g.mixture_mean[1] - f.mixture_mean[1] - mm.m_q[1]).abs() < 1e-9);

    let two = allocator::reduce(&m, &future.regressors[1..3], 2).unwrap();
    assert_eq!(two.dim(), 6);
    let cons = Constraints {
        budgets: vec![10.0, 10.0],
        lower: vec![0.0; 6],
        upper: vec![10.0; 6],
        equality: false,
    };
    let a = allocator::maximize_expected(&two, &cons, None).unwrap();
    assert!(a.spend[..3].iter().sum::<f64>() <= 10.0 + 1e-9);
}

#[test]
fn too_few_draws_for_moments() {
    let (d, _) = common::simulate(60, 1);
    let mut cfg = quick_config(1);
    cfg.mcmc.iterations = 20;
    cfg.mcmc.burn_in = 10;
    let m = model::fit(&d, &cfg).unwrap();
    let x = vec![vec![0.0; 6]];
    assert!(allocator::reduce(&m, &x, 1).is_err());
}
