//! End-to-end fitting and the fitted-model container.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::blocks::{ModelSpec, ObservationFamily};
use crate::dataset::{self, Dataset, Scale, ScalingParams};
use crate::diagnostics::{self, CoefficientRow, InclusionEntry, RhatEntry};
use crate::error::{Error, Result};
use crate::mcmc::{self, ChainDraws, Draw, McmcConfig, SamplerData, SamplerPriors};
use crate::priors::PriorConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub spec: ModelSpec,
    #[serde(default)]
    pub priors: PriorConfig,
    #[serde(default)]
    pub mcmc: McmcConfig,
}

/// Posterior draws plus everything needed to forecast and destandardize.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    /// Spec with channel and regressor lists resolved against the training data.
    pub spec: ModelSpec,
    pub priors: PriorConfig,
    pub mcmc: McmcConfig,
    pub scaling: ScalingParams,
    pub train_rows: usize,
    pub last_week: NaiveDate,
    /// Spend of the last training week, original units; it drives the first forecast step.
    pub last_spend: Vec<f64>,
    pub chains: Vec<ChainDraws>,
}

/// Fit `config.spec` to a training frame.
pub fn fit(train: &Dataset, config: &FitConfig) -> Result<FittedModel> {
    train.validate()?;
    config.mcmc.validate()?;
    config.priors.validate()?;
    let spec = dataset::resolve_spec(&config.spec, train)?;
    let (std, scaling) = dataset::standardize(train)?;
    let data = SamplerData::from_dataset(&spec, &std)?;
    let priors = SamplerPriors::new(&spec, &data, &config.priors)?;
    let chains = mcmc::gibbs_run(&spec, &data, &priors, &config.mcmc)?;
    let last = train.len() - 1;
    let last_spend = spec
        .nerlove_arrow()
        .channels
        .iter()
        .map(|c| train.channel(c).expect("resolved channel").values[last])
        .collect();
    Ok(FittedModel {
        spec,
        priors: config.priors.clone(),
        mcmc: config.mcmc.clone(),
        scaling,
        train_rows: train.len(),
        last_week: train.week_start[last],
        last_spend,
        chains,
    })
}

/// Which scalar a trace or R̂ entry refers to.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Scalar {
    Delta,
    Coefficient(usize),
    Observation,
    Goodwill,
    Level,
    Slope,
    Seasonal,
}

impl FittedModel {
    pub fn channels(&self) -> &[String] {
        &self.spec.nerlove_arrow().channels
    }

    pub fn regressors(&self) -> Vec<String> {
        self.spec.regression().map(|r| r.regressors.clone()).unwrap_or_default()
    }

    /// `u_<channel>` names followed by `x_<regressor>` names.
    pub fn coefficient_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.channels().iter().map(|c| format!("u_{c}")).collect();
        names.extend(self.regressors().iter().map(|r| format!("x_{r}")));
        names
    }

    pub fn draws(&self) -> impl Iterator<Item = &Draw> {
        self.chains.iter().flat_map(|c| c.draws.iter())
    }

    pub fn draw_count(&self) -> usize {
        self.chains.iter().map(|c| c.draws.len()).sum()
    }

    pub fn student_nu(&self) -> Option<f64> {
        match self.spec.observation {
            ObservationFamily::StudentT { nu } => Some(nu),
            ObservationFamily::Gaussian => None,
        }
    }

    pub fn channel_scale(&self, i: usize) -> Scale {
        self.scaling.channel(&self.channels()[i])
    }

    pub fn regressor_scale(&self, name: &str) -> Scale {
        self.scaling.regressor(name)
    }

    /// Multiplier taking coefficient `i` (channels first) from model to original units.
    pub fn coefficient_factor(&self, i: usize) -> f64 {
        let k = self.channels().len();
        let sy = self.scaling.sales.scale;
        if i < k {
            sy / self.channel_scale(i).scale
        } else {
            let regs = self.regressors();
            sy / self.scaling.regressor(&regs[i - k]).scale
        }
    }

    fn scalar_names(&self) -> Vec<(String, Scalar)> {
        let mut out = vec![("delta".to_string(), Scalar::Delta)];
        for (i, n) in self.coefficient_names().into_iter().enumerate() {
            out.push((n, Scalar::Coefficient(i)));
        }
        out.push(("obs_variance".into(), Scalar::Observation));
        out.push(("goodwill_variance".into(), Scalar::Goodwill));
        if self.spec.trend().is_some() {
            out.push(("level_variance".into(), Scalar::Level));
        }
        if self.spec.layout().slope.is_some() {
            out.push(("slope_variance".into(), Scalar::Slope));
        }
        if self.spec.seasonal().is_some() {
            out.push(("seasonal_variance".into(), Scalar::Seasonal));
        }
        out
    }

    fn value(&self, d: &Draw, s: Scalar) -> f64 {
        let var_factor = self.scaling.sales.scale.powi(2);
        match s {
            Scalar::Delta => d.delta,
            Scalar::Coefficient(i) => d.coefficients[i] * self.coefficient_factor(i),
            Scalar::Observation => d.obs_variance * var_factor,
            Scalar::Goodwill => d.goodwill_variance * var_factor,
            Scalar::Level => d.level_variance * var_factor,
            Scalar::Slope => d.slope_variance * var_factor,
            Scalar::Seasonal => d.seasonal_variance * var_factor,
        }
    }

    /// Traces of every scalar parameter, original units, one vector per chain.
    pub fn traces(&self) -> Vec<(String, Vec<Vec<f64>>)> {
        self.scalar_names()
            .into_iter()
            .map(|(name, s)| {
                let per_chain = self
                    .chains
                    .iter()
                    .map(|c| c.draws.iter().map(|d| self.value(d, s)).collect())
                    .collect();
                (name, per_chain)
            })
            .collect()
    }

    /// Pooled draws of one named scalar, original units.
    pub fn scalar_draws(&self, name: &str) -> Result<Vec<f64>> {
        let (_, s) = self
            .scalar_names()
            .into_iter()
            .find(|(n, _)| n == name)
            .ok_or_else(|| Error::NotFound(format!("no parameter named `{name}`")))?;
        Ok(self.draws().map(|d| self.value(d, s)).collect())
    }

    pub fn rhat_table(&self) -> Result<Vec<RhatEntry>> {
        self.traces()
            .iter()
            .map(|(name, chains)| diagnostics::rhat_entry(name, chains))
            .collect()
    }

    pub fn inclusion_table(&self) -> Vec<InclusionEntry> {
        let gamma: Vec<Vec<bool>> = self.draws().map(|d| d.inclusion.clone()).collect();
        let beta: Vec<Vec<f64>> = self.draws().map(|d| d.coefficients.clone()).collect();
        diagnostics::inclusion_probabilities(&self.coefficient_names(), &gamma, &beta)
    }

    /// Posterior mean and s.d. of every coefficient and of `δ`, original units.
    pub fn coefficient_table(&self) -> Vec<CoefficientRow> {
        let mut rows = vec![diagnostics::summarize("delta", &self.draws().map(|d| d.delta).collect::<Vec<_>>())];
        for (i, name) in self.coefficient_names().iter().enumerate() {
            let v: Vec<f64> = self.draws().map(|d| self.value(d, Scalar::Coefficient(i))).collect();
            rows.push(diagnostics::summarize(name, &v));
        }
        rows
    }

    /// Posterior mean goodwill path over the training rows, original sales units
    /// (scale only; the sales location is carried by the level).
    pub fn mean_goodwill(&self) -> Vec<f64> {
        let n = self.chains.first().map_or(0, |c| c.mean_goodwill.len());
        let sy = self.scaling.sales.scale;
        (0..n)
            .map(|t| self.chains.iter().map(|c| c.mean_goodwill[t]).sum::<f64>() / self.chains.len() as f64 * sy)
            .collect()
    }
}

/// Convergence and interpretation summary written next to the draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub rhat_variant: String,
    pub threshold: f64,
    pub rhat: Vec<RhatEntry>,
    pub max_rhat: Option<f64>,
    pub converged: bool,
    pub delta_acceptance: Vec<f64>,
    pub draws_per_chain: usize,
    pub chains: usize,
}

pub fn diagnostics_report(model: &FittedModel, threshold: f64) -> Result<DiagnosticsReport> {
    let rhat = model.rhat_table()?;
    let max_rhat = rhat.iter().filter_map(|r| r.rhat).fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.max(r))));
    Ok(DiagnosticsReport {
        rhat_variant: diagnostics::RHAT_VARIANT.to_string(),
        threshold,
        converged: rhat.iter().all(|r| r.passes(threshold)),
        max_rhat,
        rhat,
        delta_acceptance: model.chains.iter().map(|c| c.delta_acceptance).collect(),
        draws_per_chain: model.chains.first().map_or(0, |c| c.draws.len()),
        chains: model.chains.len(),
    })
}

pub const DEFAULT_NU_GRID: [f64; 4] = [3.0, 5.0, 10.0, 30.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuSelection {
    pub nu: f64,
    /// `(ν, validation log-score)` for every grid point.
    pub scores: Vec<(f64, f64)>,
}

/// Choose student-t degrees of freedom by one-step-ahead log-score on the last
/// `validation_rows` rows of `train`, fitting each candidate on the rows before.
pub fn select_nu(train: &Dataset, config: &FitConfig, grid: &[f64], validation_rows: usize) -> Result<NuSelection> {
    if grid.is_empty() {
        return Err(Error::Config("degrees-of-freedom grid is empty".into()));
    }
    if let Some(nu) = grid.iter().find(|&&nu| !(nu > 1.0)) {
        return Err(Error::Config(format!("degrees of freedom must exceed 1, got {nu}")));
    }
    let cut = train.len().checked_sub(validation_rows).ok_or_else(|| Error::Bounds {
        index: validation_rows,
        message: format!("validation slice longer than the {} training rows", train.len()),
    })?;
    let (fit_rows, validation) = dataset::split(train, cut)?;
    let mut scores = Vec::with_capacity(grid.len());
    for &nu in grid {
        let mut cfg = config.clone();
        cfg.spec.observation = ObservationFamily::StudentT { nu };
        let model = fit(&fit_rows, &cfg)?;
        let eval = crate::forecast::one_step_ahead(&model, &validation)?;
        scores.push((nu, eval.log_score));
    }
    Ok(NuSelection {
        nu: crate::forecast::estimate_nu(&scores)?,
        scores,
    })
}
