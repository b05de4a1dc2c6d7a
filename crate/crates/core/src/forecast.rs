//! Predictive simulation and one-step-ahead holdout evaluation.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blocks::{self, StepInputs};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{self, Component};
use crate::mcmc::Draw;
use crate::model::FittedModel;
use crate::priors;
use crate::state_space::{self, GaussianBelief, Start, TimeSeq};

pub const INTERVAL: (f64, f64) = (0.025, 0.975);

/// Exogenous rows after the training range, original units, model column order.
///
/// Row `i` is week `T + i`: its regressors enter forecast step `i + 1` and its
/// spend drives step `i + 2`. The spend of the last training week (stored in the
/// model) drives step 1.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FutureInputs {
    #[serde(default)]
    pub week_start: Vec<NaiveDate>,
    pub spend: Vec<Vec<f64>>,
    pub regressors: Vec<Vec<f64>>,
}

impl FutureInputs {
    /// Pick the model's columns out of a frame of future rows.
    pub fn from_dataset(model: &FittedModel, d: &Dataset) -> Result<Self> {
        let col = |pool: &[crate::dataset::Series], name: &str, prefix: &str| {
            pool.iter()
                .find(|s| s.name == name)
                .map(|s| s.values.clone())
                .ok_or_else(|| Error::Input(format!("future rows lack column `{prefix}{name}`")))
        };
        let ch: Vec<Vec<f64>> = model
            .channels()
            .iter()
            .map(|c| col(&d.channels, c, "u_"))
            .collect::<Result<_>>()?;
        let rg: Vec<Vec<f64>> = model
            .regressors()
            .iter()
            .map(|r| col(&d.regressors, r, "x_"))
            .collect::<Result<_>>()?;
        Ok(Self {
            week_start: d.week_start.clone(),
            spend: (0..d.len()).map(|t| ch.iter().map(|c| c[t]).collect()).collect(),
            regressors: (0..d.len()).map(|t| rg.iter().map(|c| c[t]).collect()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.regressors.len().max(self.spend.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Standardized system inputs for forecast steps `1..=horizon`.
pub fn forecast_inputs(model: &FittedModel, future: &FutureInputs, horizon: usize) -> Result<Vec<StepInputs>> {
    if horizon == 0 {
        return Err(Error::Input("horizon must be at least 1".into()));
    }
    let k = model.channels().len();
    let regs = model.regressors();
    let p = regs.len();
    if p > 0 && future.regressors.len() < horizon {
        return Err(Error::Input(format!(
            "horizon {horizon} needs regressor values for {horizon} future weeks, got {}",
            future.regressors.len()
        )));
    }
    if k > 0 && horizon > 1 && future.spend.len() < horizon - 1 {
        return Err(Error::Input(format!(
            "horizon {horizon} needs planned spend for {} future weeks, got {}",
            horizon - 1,
            future.spend.len()
        )));
    }
    let scale_spend = |row: &[f64], week: usize| -> Result<Vec<f64>> {
        if row.len() != k {
            return Err(Error::Input(format!("future week {week}: {} spend values for {k} channels", row.len())));
        }
        Ok(row.iter().enumerate().map(|(i, &u)| model.channel_scale(i).apply(u)).collect())
    };
    let mut out = Vec::with_capacity(horizon);
    for i in 0..horizon {
        let spend = if i == 0 {
            scale_spend(&model.last_spend, 0)?
        } else {
            scale_spend(&future.spend[i - 1], i - 1)?
        };
        let regressors = if p == 0 {
            Vec::new()
        } else {
            let row = &future.regressors[i];
            if row.len() != p {
                return Err(Error::Input(format!("future week {i}: {} regressor values for {p} regressors", row.len())));
            }
            row.iter().zip(&regs).map(|(&x, r)| model.regressor_scale(r).apply(x)).collect()
        };
        out.push(StepInputs { spend, regressors });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub horizon: usize,
    /// Simulated sales, one path per posterior draw, original units.
    pub paths: Vec<Vec<f64>>,
    /// Sample mean and variance of the paths at each step.
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub lower: Vec<f64>,
    pub median: Vec<f64>,
    pub upper: Vec<f64>,
    /// Exact mixture moments (average of per-draw conditional moments).
    pub mixture_mean: Vec<f64>,
    pub mixture_variance: Vec<f64>,
}

fn draw_system(model: &FittedModel, draw: &Draw, inputs: &[StepInputs]) -> Result<state_space::StateSpaceSystem> {
    let mut params = draw.params(&model.spec);
    params.regression_inclusion = Some(draw.inclusion[model.channels().len()..].to_vec());
    blocks::compile(&model.spec, inputs, &params)
}

/// Observation-noise variance of one draw (infinite for student-t with `ν ≤ 2`).
fn noise_variance(model: &FittedModel, draw: &Draw) -> f64 {
    match model.student_nu() {
        None => draw.obs_variance,
        Some(nu) if nu > 2.0 => draw.obs_variance * nu / (nu - 2.0),
        Some(_) => f64::INFINITY,
    }
}

/// Per-draw conditional mean and variance of `y` at each forecast step, model units.
fn conditional_moments(
    model: &FittedModel,
    draw: &Draw,
    inputs: &[StepInputs],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let sys = draw_system(model, draw, inputs)?;
    let mut belief = GaussianBelief::fixed(DVector::from_vec(draw.terminal_state.clone()));
    let v = noise_variance(model, draw);
    let mut means = Vec::with_capacity(inputs.len());
    let mut vars = Vec::with_capacity(inputs.len());
    for t in 0..sys.len() {
        belief = state_space::predict(&sys, t, &belief);
        let f = sys.observation(t);
        means.push(f.dot(&belief.mean));
        vars.push(f.dot(&(&belief.cov * f)) + v);
    }
    Ok((means, vars))
}

/// Draw one predictive sales path per posterior draw.
pub fn predictive_sample(model: &FittedModel, future: &FutureInputs, horizon: usize, seed: u64) -> Result<Forecast> {
    let inputs = forecast_inputs(model, future, horizon)?;
    let draws: Vec<&Draw> = model.draws().collect();
    if draws.is_empty() {
        return Err(Error::InsufficientData("model has no posterior draws".into()));
    }
    let sales = model.scaling.sales;
    let nu = model.student_nu();
    let per_draw: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = draws
        .par_iter()
        .enumerate()
        .map(|(i, draw)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut sys = draw_system(model, draw, &inputs)?;
            if let Some(nu) = nu {
                let v: Vec<f64> = (0..horizon)
                    .map(|_| draw.obs_variance * priors::sample_inverse_gamma(nu / 2.0, nu / 2.0, &mut rng))
                    .collect();
                sys = sys.with_obs_var(TimeSeq::Varying(v))?;
            }
            let path = state_space::simulate_forward(&sys, &Start::Fixed(DVector::from_vec(draw.terminal_state.clone())), &mut rng)?;
            let (m, v) = conditional_moments(model, draw, &inputs)?;
            Ok((path.observations.iter().map(|&y| sales.invert(y)).collect(), m, v))
        })
        .collect::<Result<_>>()?;

    let n = per_draw.len() as f64;
    let mut out = Forecast {
        horizon,
        paths: per_draw.iter().map(|(p, _, _)| p.clone()).collect(),
        mean: Vec::with_capacity(horizon),
        variance: Vec::with_capacity(horizon),
        lower: Vec::with_capacity(horizon),
        median: Vec::with_capacity(horizon),
        upper: Vec::with_capacity(horizon),
        mixture_mean: Vec::with_capacity(horizon),
        mixture_variance: Vec::with_capacity(horizon),
    };
    for t in 0..horizon {
        let mut col: Vec<f64> = out.paths.iter().map(|p| p[t]).collect();
        let mean = col.iter().sum::<f64>() / n;
        let var = if col.len() > 1 {
            col.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        col.sort_by(|a, b| a.total_cmp(b));
        out.mean.push(mean);
        out.variance.push(var);
        out.lower.push(metrics::quantile_sorted(&col, INTERVAL.0));
        out.median.push(metrics::quantile_sorted(&col, 0.5));
        out.upper.push(metrics::quantile_sorted(&col, INTERVAL.1));
        let mm = per_draw.iter().map(|(_, m, _)| m[t]).sum::<f64>() / n;
        let within = per_draw.iter().map(|(_, _, v)| v[t]).sum::<f64>() / n;
        let between = per_draw.iter().map(|(_, m, _)| (m[t] - mm).powi(2)).sum::<f64>() / n;
        out.mixture_mean.push(sales.invert(mm));
        out.mixture_variance.push((within + between) * sales.scale * sales.scale);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepEvaluation {
    pub week_start: NaiveDate,
    pub actual: Option<f64>,
    pub mean: f64,
    pub variance: f64,
    pub lower: f64,
    pub upper: f64,
    /// Standardized residual `(y - mean) / sqrt(variance)`.
    pub residual: Option<f64>,
    pub log_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearTotals {
    pub predicted: f64,
    pub actual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub steps: Vec<StepEvaluation>,
    /// `None` when any observed holdout value is zero.
    pub mape: Option<f64>,
    /// Cumulative predicted and actual sales per calendar year (observed weeks only).
    pub cps: BTreeMap<i32, YearTotals>,
    pub coverage: f64,
    pub log_score: f64,
    /// How residuals are standardized.
    pub residual_convention: String,
}

impl Evaluation {
    pub fn residuals(&self) -> Vec<f64> {
        self.steps.iter().filter_map(|s| s.residual).collect()
    }
}

/// Per-draw one-step-ahead predictive components over the holdout, model units.
fn one_step_components(model: &FittedModel, draw: &Draw, inputs: &[StepInputs], y: &[Option<f64>]) -> Result<Vec<(f64, f64)>> {
    let sys = draw_system(model, draw, inputs)?;
    let mut belief = GaussianBelief::fixed(DVector::from_vec(draw.terminal_state.clone()));
    let tau2 = draw.obs_variance;
    let mut out = Vec::with_capacity(y.len());
    for (t, obs) in y.iter().enumerate() {
        let pred = state_space::predict(&sys, t, &belief);
        let f = sys.observation(t);
        let mean = f.dot(&pred.mean);
        let s = f.dot(&(&pred.cov * f)).max(0.0);
        out.push((mean, s));
        belief = match obs {
            None => pred,
            Some(v) => {
                // Student-t: condition on the posterior mean of the latent scale given the error.
                let obs_var = match model.student_nu() {
                    None => tau2,
                    Some(nu) => {
                        let e = v - mean;
                        tau2 * (nu + e * e / (s + tau2)) / (nu + 1.0)
                    }
                };
                state_space::update(t, &pred, f, obs_var, *v)?.belief
            }
        };
    }
    Ok(out)
}

/// Inputs for evaluating a holdout frame that directly follows the training rows.
fn holdout_inputs(model: &FittedModel, holdout: &Dataset) -> Result<Vec<StepInputs>> {
    let future = FutureInputs::from_dataset(model, holdout)?;
    forecast_inputs(model, &future, holdout.len())
}

/// One-step-ahead predictive evaluation on the rows following the training range.
pub fn one_step_ahead(model: &FittedModel, holdout: &Dataset) -> Result<Evaluation> {
    if holdout.is_empty() {
        return Err(Error::InsufficientData("holdout frame is empty".into()));
    }
    let inputs = holdout_inputs(model, holdout)?;
    let sales = model.scaling.sales;
    let y: Vec<Option<f64>> = holdout.sales.iter().map(|v| v.map(|v| sales.apply(v))).collect();
    let draws: Vec<&Draw> = model.draws().collect();
    if draws.is_empty() {
        return Err(Error::InsufficientData("model has no posterior draws".into()));
    }
    let per_draw: Vec<Vec<(f64, f64)>> = draws
        .par_iter()
        .map(|d| one_step_components(model, d, &inputs, &y))
        .collect::<Result<_>>()?;
    let nu = model.student_nu();
    let sy = sales.scale;

    let mut steps = Vec::with_capacity(holdout.len());
    for t in 0..holdout.len() {
        let components: Vec<Component> = per_draw
            .iter()
            .zip(&draws)
            .map(|(c, d)| {
                let (m, s) = c[t];
                Component {
                    mean: sales.invert(m),
                    scale: (s + d.obs_variance).sqrt() * sy,
                    nu,
                }
            })
            .collect();
        let (mean, variance) = match nu {
            None => metrics::mixture_moments(&components),
            Some(nu) => {
                // State uncertainty is Gaussian; only the noise term carries the t inflation.
                let cnt = components.len() as f64;
                let mean = components.iter().map(|c| c.mean).sum::<f64>() / cnt;
                let within = per_draw
                    .iter()
                    .zip(&draws)
                    .map(|(c, d)| {
                        let noise = if nu > 2.0 { d.obs_variance * nu / (nu - 2.0) } else { f64::INFINITY };
                        (c[t].1 + noise) * sy * sy
                    })
                    .sum::<f64>()
                    / cnt;
                let between = components.iter().map(|c| (c.mean - mean).powi(2)).sum::<f64>() / cnt;
                (mean, within + between)
            }
        };
        let actual = holdout.sales[t];
        let lower = metrics::mixture_quantile(&components, INTERVAL.0);
        let upper = metrics::mixture_quantile(&components, INTERVAL.1);
        steps.push(StepEvaluation {
            week_start: holdout.week_start[t],
            actual,
            mean,
            variance,
            lower,
            upper,
            residual: actual.map(|a| (a - mean) / variance.sqrt()),
            log_score: actual.map(|a| metrics::mixture_log_density(&components, a)),
        });
    }

    let observed: Vec<&StepEvaluation> = steps.iter().filter(|s| s.actual.is_some()).collect();
    let actual: Vec<f64> = observed.iter().map(|s| s.actual.unwrap()).collect();
    let predicted: Vec<f64> = observed.iter().map(|s| s.mean).collect();
    let mape = if actual.is_empty() {
        None
    } else {
        match metrics::mape(&actual, &predicted) {
            Ok(v) => Some(v),
            Err(Error::UndefinedMetric(msg)) => {
                log::warn!("{msg}");
                None
            }
            Err(e) => return Err(e),
        }
    };
    let mut cps = BTreeMap::new();
    for s in &observed {
        let e = cps.entry(chrono::Datelike::year(&s.week_start)).or_insert(YearTotals {
            predicted: 0.0,
            actual: 0.0,
        });
        e.predicted += s.mean;
        e.actual += s.actual.unwrap();
    }
    let lower: Vec<f64> = observed.iter().map(|s| s.lower).collect();
    let upper: Vec<f64> = observed.iter().map(|s| s.upper).collect();
    Ok(Evaluation {
        mape,
        cps,
        coverage: metrics::coverage(&actual, &lower, &upper),
        log_score: observed.iter().filter_map(|s| s.log_score).sum(),
        residual_convention: "mixture moments: (y - E[y]) / sqrt(Var[y]) under the posterior predictive mixture".into(),
        steps,
    })
}

/// Exact per-draw predictive covariance of the first `horizon` forecast steps, model units.
///
/// Used by the allocator; the covariance does not depend on spend because the
/// channel coefficients are fixed within a draw.
pub(crate) fn step_covariance(model: &FittedModel, draw: &Draw, inputs: &[StepInputs]) -> Result<DMatrix<f64>> {
    let sys = draw_system(model, draw, inputs)?;
    let h = sys.len();
    let m = sys.state_dim();
    // Cross-covariances Cov(θ_s, θ_t) for s <= t via C_{s,t} = C_{s,t-1} G_t'.
    let mut covs: Vec<DMatrix<f64>> = Vec::with_capacity(h);
    let mut p = DMatrix::<f64>::zeros(m, m);
    for t in 0..h {
        let g = sys.transition(t);
        p = g * &p * g.transpose() + sys.process_cov(t);
        covs.push(p.clone());
    }
    let v = noise_variance(model, draw);
    let mut out = DMatrix::zeros(h, h);
    for s in 0..h {
        let mut cross = covs[s].clone();
        for t in s..h {
            if t > s {
                cross = &cross * sys.transition(t).transpose();
            }
            let c = sys.observation(s).dot(&(&cross * sys.observation(t)));
            out[(s, t)] = c;
            out[(t, s)] = c;
        }
        out[(s, s)] += v;
    }
    Ok(out)
}

/// Per-draw conditional means over the forecast steps, model units.
pub(crate) fn step_means(model: &FittedModel, draw: &Draw, inputs: &[StepInputs]) -> Result<Vec<f64>> {
    Ok(conditional_moments(model, draw, inputs)?.0)
}

/// Grid point with the highest holdout log-score.
pub fn estimate_nu(scores: &[(f64, f64)]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::Config("degrees-of-freedom grid is empty".into()));
    }
    scores
        .iter()
        .filter(|(_, s)| s.is_finite())
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(nu, _)| *nu)
        .ok_or_else(|| Error::Config("no finite log-scores to choose a degrees-of-freedom value from".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimate_nu_picks_the_best_score() {
        assert_eq!(estimate_nu(&[(3.0, -10.0), (5.0, -8.0), (30.0, -9.0)]).unwrap(), 5.0);
        assert_eq!(estimate_nu(&[(10.0, -1.0)]).unwrap(), 10.0);
        assert!(matches!(estimate_nu(&[]), Err(Error::Config(_))));
    }
}
