//! Three-step Gibbs sampler.
//!
//! The goodwill state is split as `A_t = q'Z_t(δ) + N_t`, where `Z_t(δ)` is the
//! adstock of spend (`Z_t = (1-δ) Z_{t-1} + u_{t-1}`) and `N_t` is an AR(1)
//! remainder with coefficient `1-δ`. Each iteration
//!
//! 1. draws `δ` by Metropolis on the logit scale against the Kalman-filter
//!    likelihood, with the dynamic states integrated out,
//! 2. draws `(q, β, γ)` from the spike-and-slab conditional with design
//!    `[Z(δ), X]`, again with the states integrated out (the regression runs
//!    on one-step innovations of `y` and of every design column),
//! 3. draws the dynamic states `[N, trend, seasonal]` by FFBS, then the
//!    structural and observation variances from their inverse-gamma
//!    conditionals and, for student-t noise, the latent scales.
//!
//! Sampling the coefficients jointly with the states would leave the level
//! free to trade off against `q'Z`, which mixes very slowly.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blocks::{self, DynamicLayout, DynamicState, ModelParams, ModelSpec, ObservationFamily};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::priors::{self, DeltaPrior, PriorConfig, RegressionStats, SpikeSlabPrior, VariancePrior};
use crate::state_space::{self, GaussianBelief, TimeSeq};

pub const DIFFUSE_VARIANCE: f64 = 1e7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    #[serde(default = "default_chains")]
    pub chains: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default)]
    pub seed: u64,
    /// Initial s.d. of the logit-scale random walk for `δ`.
    #[serde(default = "default_scale")]
    pub proposal_scale: f64,
    /// Tune the proposal during burn-in towards 20-50% acceptance.
    #[serde(default = "default_true")]
    pub adapt: bool,
}

fn default_chains() -> usize {
    4
}
fn default_iterations() -> usize {
    4000
}
fn default_burn_in() -> usize {
    2000
}
fn default_scale() -> f64 {
    0.3
}
fn default_true() -> bool {
    true
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            chains: default_chains(),
            iterations: default_iterations(),
            burn_in: default_burn_in(),
            seed: 0,
            proposal_scale: default_scale(),
            adapt: true,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 {
            return Err(Error::Config("need at least one chain".into()));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::Config(format!(
                "burn-in ({}) must be smaller than the iteration count ({})",
                self.burn_in, self.iterations
            )));
        }
        if !(self.proposal_scale >= 0.0) {
            return Err(Error::Config(format!("proposal scale must be >= 0, got {}", self.proposal_scale)));
        }
        Ok(())
    }
}

/// One stored posterior draw, in model (standardized) units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub delta: f64,
    /// Channel coefficients `q` followed by regression coefficients `β`.
    pub coefficients: Vec<f64>,
    pub inclusion: Vec<bool>,
    pub obs_variance: f64,
    pub goodwill_variance: f64,
    pub level_variance: f64,
    pub slope_variance: f64,
    pub seasonal_variance: f64,
    /// Full state at the last training row.
    pub terminal_state: Vec<f64>,
}

impl Draw {
    pub fn params(&self, spec: &ModelSpec) -> ModelParams {
        let k = spec.channel_count();
        ModelParams {
            delta: self.delta,
            channel_coefficients: self.coefficients[..k].to_vec(),
            regression_coefficients: self.coefficients[k..].to_vec(),
            regression_inclusion: None,
            obs_variance: self.obs_variance,
            goodwill_variance: self.goodwill_variance,
            level_variance: self.level_variance,
            slope_variance: self.slope_variance,
            seasonal_variance: self.seasonal_variance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDraws {
    pub chain: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub draws: Vec<Draw>,
    /// Post-burn-in acceptance rate of the `δ` proposals.
    pub delta_acceptance: f64,
    pub proposal_scale: f64,
    /// Posterior mean of the goodwill path `A_0..A_{T-1}`.
    pub mean_goodwill: Vec<f64>,
    /// Posterior mean of the latent scales (student-t runs only).
    pub mean_latent_scales: Option<Vec<f64>>,
}

/// Standardized training data arranged by system step.
#[derive(Debug, Clone)]
pub struct SamplerData {
    /// Observations of rows `1..T`.
    pub y: Vec<f64>,
    /// Row `j`: spend of data row `j`, which drives step `j`.
    pub spend: DMatrix<f64>,
    /// Row `j`: regressors of data row `j + 1`.
    pub regressors: DMatrix<f64>,
}

impl SamplerData {
    pub fn from_dataset(spec: &ModelSpec, d: &Dataset) -> Result<Self> {
        let channels = &spec.nerlove_arrow().channels;
        let regs = spec.regression().map(|r| r.regressors.clone()).unwrap_or_default();
        let inputs = d.step_inputs(channels, &regs)?;
        let n = inputs.len();
        if n < 2 {
            return Err(Error::InsufficientData(format!("need at least 3 training rows, got {}", d.len())));
        }
        let mut y = Vec::with_capacity(n);
        for row in 1..d.len() {
            y.push(d.sales[row].ok_or_else(|| Error::Validation {
                row,
                column: "sales".into(),
                message: "training range must not contain missing sales".into(),
            })?);
        }
        let spend = DMatrix::from_fn(n, channels.len(), |j, i| inputs[j].spend[i]);
        let regressors = DMatrix::from_fn(n, regs.len(), |j, i| inputs[j].regressors[i]);
        Ok(Self { y, spend, regressors })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Adstock `Z_j(δ)` for every step, starting from zero before step 0.
pub fn adstock(spend: &DMatrix<f64>, delta: f64) -> DMatrix<f64> {
    let (n, k) = spend.shape();
    let mut z = DMatrix::zeros(n, k);
    for i in 0..k {
        let mut acc = 0.0;
        for j in 0..n {
            acc = (1.0 - delta) * acc + spend[(j, i)];
            z[(j, i)] = acc;
        }
    }
    z
}

fn design(z: &DMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, k) = z.shape();
    let p = x.ncols();
    DMatrix::from_fn(n, k + p, |t, j| if j < k { z[(t, j)] } else { x[(t, j - k)] })
}

/// Conditional target for `δ` given a drawn goodwill remainder path.
#[derive(Debug, Clone)]
pub struct DeltaTarget<'a> {
    /// Goodwill remainder `N_0..N_n`.
    pub remainder: &'a [f64],
    pub goodwill_variance: f64,
    pub spend: &'a DMatrix<f64>,
    pub channel_coefficients: &'a [f64],
    /// `y_t` minus every contribution except `q'Z_t(δ)`.
    pub residual: &'a [f64],
    pub obs_variances: &'a [f64],
}

const VARIANCE_FLOOR: f64 = 1e-12;

impl DeltaTarget<'_> {
    pub fn log_density(&self, delta: f64) -> f64 {
        let w = self.goodwill_variance.max(VARIANCE_FLOOR);
        let mut lp = 0.0;
        for t in 1..self.remainder.len() {
            let e = self.remainder[t] - (1.0 - delta) * self.remainder[t - 1];
            lp -= e * e / (2.0 * w);
        }
        if self.channel_coefficients.iter().any(|&q| q != 0.0) {
            let k = self.channel_coefficients.len();
            let mut z = vec![0.0; k];
            for (j, &r) in self.residual.iter().enumerate() {
                let mut fit = 0.0;
                for i in 0..k {
                    z[i] = (1.0 - delta) * z[i] + self.spend[(j, i)];
                    fit += self.channel_coefficients[i] * z[i];
                }
                let e = r - fit;
                lp -= e * e / (2.0 * self.obs_variances[j].max(VARIANCE_FLOOR));
            }
        }
        lp
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Random-walk Metropolis on `logit(δ)`. Returns the new value and whether the
/// proposal was accepted.
pub fn sample_delta<R: Rng + ?Sized, F: Fn(f64) -> f64>(
    delta: f64,
    log_target: F,
    prior: &DeltaPrior,
    scale: f64,
    rng: &mut R,
) -> (f64, bool) {
    if let DeltaPrior::PointMass { value } = prior {
        return (*value, false);
    }
    if scale == 0.0 {
        return (delta, false);
    }
    let z: f64 = rng.sample(StandardNormal);
    let proposal = sigmoid(logit(delta) + scale * z);
    let u: f64 = rng.random();
    if !(proposal > 0.0 && proposal < 1.0) {
        return (delta, false);
    }
    let log_jac = |d: f64| d.ln() + (1.0 - d).ln();
    let ratio = log_target(proposal) + prior.log_density(proposal) + log_jac(proposal)
        - log_target(delta)
        - prior.log_density(delta)
        - log_jac(delta);
    if u.ln() < ratio {
        (proposal, true)
    } else {
        (delta, false)
    }
}

/// Resolved priors shared by every chain.
#[derive(Debug, Clone)]
pub struct SamplerPriors {
    pub spike_slab: SpikeSlabPrior,
    pub config: PriorConfig,
}

impl SamplerPriors {
    pub fn new(spec: &ModelSpec, data: &SamplerData, config: &PriorConfig) -> Result<Self> {
        config.validate()?;
        let channels = &spec.nerlove_arrow().channels;
        let regs = spec.regression().map(|r| r.regressors.clone()).unwrap_or_default();
        let inclusion = priors::inclusion_probabilities(
            spec.variant,
            channels,
            &regs,
            config.expected_model_size,
            &config.inclusion_overrides,
        );
        // The slab information is fixed from the design at the prior mean of δ,
        // centred so that column means (absorbed by the level) carry no weight.
        let mut d = design(&adstock(&data.spend, config.delta.mean()), &data.regressors);
        for mut col in d.column_iter_mut() {
            let m = col.mean();
            col.add_scalar_mut(-m);
        }
        let stats = RegressionStats::new(&d, &data.y, None);
        let precision = priors::g_prior_precision(&stats.xtx, data.len(), config.kappa, config.diagonal_weight);
        if let Some(f) = &config.fixed_coefficients {
            if f.len() != inclusion.len() {
                return Err(Error::Dimension(format!(
                    "{} fixed coefficients for {} coefficients",
                    f.len(),
                    inclusion.len()
                )));
            }
        }
        Ok(Self {
            spike_slab: SpikeSlabPrior {
                inclusion,
                precision,
                residual: config.observation,
                fixed_coefficients: config.fixed_coefficients.clone(),
            },
            config: config.clone(),
        })
    }
}

struct ChainState {
    delta: f64,
    coefficients: Vec<f64>,
    gamma: Vec<bool>,
    obs_variance: f64,
    goodwill_variance: f64,
    level_variance: f64,
    slope_variance: f64,
    seasonal_variance: f64,
    lambda: Vec<f64>,
}

impl ChainState {
    fn params(&self, spec: &ModelSpec, delta: f64) -> ModelParams {
        let k = spec.channel_count();
        ModelParams {
            delta,
            channel_coefficients: self.coefficients[..k].to_vec(),
            regression_coefficients: self.coefficients[k..].to_vec(),
            regression_inclusion: None,
            obs_variance: self.obs_variance,
            goodwill_variance: self.goodwill_variance,
            level_variance: self.level_variance,
            slope_variance: self.slope_variance,
            seasonal_variance: self.seasonal_variance,
        }
    }
}

fn initial_variance<R: Rng + ?Sized>(prior: &VariancePrior, typical: f64, rng: &mut R) -> f64 {
    match prior {
        VariancePrior::Fixed { value } => *value,
        VariancePrior::InverseGamma { .. } => typical * (0.5 + rng.random::<f64>()),
    }
}

/// Run every chain; chains execute in parallel on independent streams.
pub fn gibbs_run(
    spec: &ModelSpec,
    data: &SamplerData,
    priors: &SamplerPriors,
    config: &McmcConfig,
) -> Result<Vec<ChainDraws>> {
    config.validate()?;
    spec.validate()?;
    if let ObservationFamily::StudentT { nu } = spec.observation {
        if !(nu > 1.0) {
            return Err(Error::Config(format!("student-t degrees of freedom must exceed 1, got {nu}")));
        }
    }
    (0..config.chains)
        .into_par_iter()
        .map(|c| run_chain(spec, data, priors, config, c))
        .collect()
}

fn run_chain(
    spec: &ModelSpec,
    data: &SamplerData,
    priors: &SamplerPriors,
    config: &McmcConfig,
    chain: usize,
) -> Result<ChainDraws> {
    let abort = |iteration: usize| {
        move |e: Error| Error::ChainAborted {
            chain,
            iteration,
            message: e.to_string(),
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(chain as u64 + 1);
    let n = data.len();
    let k = spec.channel_count();
    let p = k + spec.regressor_count();
    let lay = DynamicLayout::new(spec);
    let pc = &priors.config;
    let student_nu = match spec.observation {
        ObservationFamily::StudentT { nu } => Some(nu),
        ObservationFamily::Gaussian => None,
    };

    let mut st = ChainState {
        delta: match pc.delta {
            DeltaPrior::PointMass { value } => value,
            _ => 0.1 + 0.8 * rng.random::<f64>(),
        },
        coefficients: pc.fixed_coefficients.clone().unwrap_or_else(|| vec![0.0; p]),
        gamma: priors.spike_slab.inclusion.iter().map(|&pi| pi >= 0.5).collect(),
        obs_variance: initial_variance(&pc.observation, 0.5, &mut rng),
        goodwill_variance: initial_variance(&pc.goodwill, 0.01, &mut rng),
        level_variance: initial_variance(&pc.level, 0.01, &mut rng),
        slope_variance: initial_variance(&pc.slope, 0.001, &mut rng),
        seasonal_variance: initial_variance(&pc.seasonal, 0.01, &mut rng),
        lambda: vec![1.0; n],
    };
    if let Some(f) = &pc.fixed_coefficients {
        st.gamma = f.iter().map(|b| *b != 0.0).collect();
    }
    let mut scale = config.proposal_scale;
    let (mut accepted, mut proposed) = (0usize, 0usize);
    let (mut window_accepted, mut window_proposed) = (0usize, 0usize);
    let kept = config.iterations - config.burn_in;
    let mut draws = Vec::with_capacity(kept);
    let mut mean_goodwill = vec![0.0; n + 1];
    let mut mean_lambda = vec![0.0; n];
    let initial = GaussianBelief::diffuse(lay.dim, DIFFUSE_VARIANCE);
    let delta_free = !matches!(pc.delta, DeltaPrior::PointMass { .. }) && scale > 0.0;

    for it in 0..config.iterations {
        let err = abort(it);
        let obs_vars: Vec<f64> = st.lambda.iter().map(|l| l * st.obs_variance).collect();
        let system = |st: &ChainState, delta: f64| {
            blocks::compile_dynamic(spec, n, &st.params(spec, delta))
                .and_then(|s| s.with_obs_var(TimeSeq::Varying(obs_vars.clone())))
        };

        // δ from its conditional with the dynamic states integrated out.
        if delta_free {
            let log_target = |delta: f64| -> f64 {
                let z = adstock(&data.spend, delta);
                let fit = design(&z, &data.regressors) * DVector::from_column_slice(&st.coefficients);
                let resid: Vec<Option<f64>> = (0..n).map(|t| Some(data.y[t] - fit[t])).collect();
                system(&st, delta)
                    .and_then(|sys| state_space::kalman_filter(&sys, &resid, &initial))
                    .map_or(f64::NEG_INFINITY, |f| f.log_likelihood)
            };
            let (delta, acc) = sample_delta(st.delta, log_target, &pc.delta, scale, &mut rng);
            st.delta = delta;
            if it >= config.burn_in {
                proposed += 1;
                accepted += acc as usize;
            } else {
                window_proposed += 1;
                window_accepted += acc as usize;
            }
            if config.adapt && it < config.burn_in && window_proposed == 50 {
                let rate = window_accepted as f64 / window_proposed as f64;
                if rate < 0.2 {
                    scale *= 0.7;
                } else if rate > 0.5 {
                    scale *= 1.4;
                }
                window_accepted = 0;
                window_proposed = 0;
            }
        }

        // (q, β, γ) with the dynamic states integrated out: regress the
        // one-step innovations of y on those of each design column.
        let z = adstock(&data.spend, st.delta);
        let d = design(&z, &data.regressors);
        let sys = system(&st, st.delta).map_err(err)?;
        if pc.fixed_coefficients.is_none() && p > 0 {
            let columns: Vec<Vec<f64>> = (0..p).map(|j| d.column(j).iter().copied().collect()).collect();
            let mut series: Vec<&[f64]> = vec![&data.y];
            series.extend(columns.iter().map(|c| c.as_slice()));
            let inn = state_space::innovations(&sys, &initial.cov, &series).map_err(err)?;
            let weights: Vec<f64> = inn.variances.iter().map(|&s| if s > 0.0 { 1.0 / s } else { 0.0 }).collect();
            let ed = DMatrix::from_fn(n, p, |t, j| inn.errors[j + 1][t]);
            let stats = RegressionStats::new(&ed, &inn.errors[0], Some(&weights));
            let prior = SpikeSlabPrior {
                inclusion: priors.spike_slab.inclusion.clone(),
                precision: &priors.spike_slab.precision / st.obs_variance.max(VARIANCE_FLOOR),
                residual: VariancePrior::Fixed { value: 1.0 },
                fixed_coefficients: None,
            };
            let draw = priors::sample_spike_slab(&stats, &prior, &st.gamma, &mut rng).map_err(err)?;
            st.coefficients = draw.beta;
            st.gamma = draw.gamma;
        }

        // Dynamic states given everything else.
        let fit = &d * DVector::from_column_slice(&st.coefficients);
        let resid: Vec<Option<f64>> = (0..n).map(|t| Some(data.y[t] - fit[t])).collect();
        let path = state_space::ffbs_sample(&sys, &resid, &initial, &mut rng).map_err(err)?;
        let dyn_fit: Vec<f64> = (0..n).map(|t| lay.observed(&path[t + 1])).collect();
        let remainder: Vec<f64> = path.iter().map(|s| s[lay.remainder]).collect();

        // Structural variances from the state path.
        let ss_goodwill: f64 = (1..=n)
            .map(|t| (remainder[t] - (1.0 - st.delta) * remainder[t - 1]).powi(2))
            .sum();
        st.goodwill_variance = pc.goodwill.posterior_draw(n, ss_goodwill, &mut rng);
        if let Some(l) = lay.level {
            let ss: f64 = (1..=n)
                .map(|t| {
                    let drift = lay.slope.map_or(0.0, |s| path[t - 1][s]);
                    (path[t][l] - path[t - 1][l] - drift).powi(2)
                })
                .sum();
            st.level_variance = pc.level.posterior_draw(n, ss, &mut rng);
        }
        if let Some(s) = lay.slope {
            let ss: f64 = (1..=n).map(|t| (path[t][s] - path[t - 1][s]).powi(2)).sum();
            st.slope_variance = pc.slope.posterior_draw(n, ss, &mut rng);
        }
        if let Some(r) = &lay.seasonal {
            let ss: f64 = (1..=n)
                .map(|t| (path[t][r.start] + path[t - 1].rows(r.start, r.len()).sum()).powi(2))
                .sum();
            st.seasonal_variance = pc.seasonal.posterior_draw(n, ss, &mut rng);
        }

        // Observation variance (τ² for student-t), including the slab term
        // because the coefficient prior scales with it.
        let e: Vec<f64> = (0..n).map(|t| data.y[t] - fit[t] - dyn_fit[t]).collect();
        let mut ss_obs: f64 = e.iter().zip(&st.lambda).map(|(e, l)| e * e / l).sum();
        let mut dof = n;
        if pc.fixed_coefficients.is_none() {
            let idx: Vec<usize> = (0..p).filter(|&i| st.gamma[i]).collect();
            for &i in &idx {
                for &j in &idx {
                    ss_obs += st.coefficients[i] * priors.spike_slab.precision[(i, j)] * st.coefficients[j];
                }
            }
            dof += idx.len();
        }
        st.obs_variance = pc.observation.posterior_draw(dof, ss_obs, &mut rng);
        if let Some(nu) = student_nu {
            st.lambda = priors::sample_latent_scales(&e, nu, st.obs_variance, &mut rng).map_err(err)?;
        }
        for (name, v) in [
            ("observation", st.obs_variance),
            ("goodwill", st.goodwill_variance),
            ("level", st.level_variance),
            ("slope", st.slope_variance),
            ("seasonal", st.seasonal_variance),
        ] {
            if !v.is_finite() {
                return Err(err(Error::Numerical {
                    step: it,
                    message: format!("{name} variance draw diverged ({v})"),
                }));
            }
        }

        if it >= config.burn_in {
            let q = &st.coefficients[..k];
            let goodwill_at = |j: usize| -> f64 {
                let carried: f64 = if j == 0 { 0.0 } else { (0..k).map(|i| q[i] * z[(j - 1, i)]).sum() };
                carried + remainder[j]
            };
            for (j, m) in mean_goodwill.iter_mut().enumerate() {
                *m += goodwill_at(j) / kept as f64;
            }
            if student_nu.is_some() {
                for (m, l) in mean_lambda.iter_mut().zip(&st.lambda) {
                    *m += l / kept as f64;
                }
            }
            let params = st.params(spec, st.delta);
            let dynamic: DynamicState = lay.dynamic_state(&path[n], goodwill_at(n));
            draws.push(Draw {
                delta: st.delta,
                coefficients: st.coefficients.clone(),
                inclusion: st.gamma.clone(),
                obs_variance: st.obs_variance,
                goodwill_variance: st.goodwill_variance,
                level_variance: st.level_variance,
                slope_variance: st.slope_variance,
                seasonal_variance: st.seasonal_variance,
                terminal_state: blocks::full_state(spec, &params, &dynamic).iter().copied().collect(),
            });
        }
    }
    Ok(ChainDraws {
        chain,
        iterations: config.iterations,
        burn_in: config.burn_in,
        draws,
        delta_acceptance: if proposed > 0 { accepted as f64 / proposed as f64 } else { 0.0 },
        proposal_scale: scale,
        mean_goodwill,
        mean_latent_scales: student_nu.map(|_| mean_lambda),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::{Block, NerloveArrowBlock, TrendBlock, TrendKind, Variant};

    #[test]
    fn adstock_recursion() {
        let u = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 2.0]);
        let z = adstock(&u, 0.5);
        assert_eq!(z.as_slice(), &[1.0, 0.5, 2.25]);
    }

    #[test]
    fn zero_scale_keeps_delta() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = DMatrix::zeros(2, 0);
        let t = DeltaTarget {
            remainder: &[1.0, 0.5, 0.25],
            goodwill_variance: 0.1,
            spend: &u,
            channel_coefficients: &[],
            residual: &[0.0, 0.0],
            obs_variances: &[1.0, 1.0],
        };
        for _ in 0..10 {
            assert_eq!(sample_delta(0.37, |x| t.log_density(x), &DeltaPrior::Uniform, 0.0, &mut rng).0, 0.37);
            assert_eq!(sample_delta(0.37, |x| t.log_density(x), &DeltaPrior::PointMass { value: 0.2 }, 1.0, &mut rng).0, 0.2);
        }
    }

    #[test]
    fn delta_sampler_recovers_the_forgetting_rate() {
        // Goodwill observed with small noise through the adstock of spend.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 400;
        let u = DMatrix::from_fn(n, 1, |j, _| ((j * 37) % 11) as f64 / 5.0);
        let z = adstock(&u, 0.4);
        let r: Vec<f64> = (0..n).map(|j| 1.5 * z[(j, 0)] + 0.01 * rng.sample::<f64, _>(StandardNormal)).collect();
        let remainder = vec![0.0; n + 1];
        let vars = vec![1e-4; n];
        let t = DeltaTarget {
            remainder: &remainder,
            goodwill_variance: 1e-4,
            spend: &u,
            channel_coefficients: &[1.5],
            residual: &r,
            obs_variances: &vars,
        };
        let mut d = 0.7;
        let mut sum = 0.0;
        for i in 0..12_000 {
            d = sample_delta(d, |x| t.log_density(x), &DeltaPrior::Uniform, 0.05, &mut rng).0;
            assert!(d > 0.0 && d < 1.0);
            if i >= 2000 {
                sum += d;
            }
        }
        assert!((sum / 10_000.0 - 0.4).abs() < 0.02);
    }

    fn tiny_spec() -> ModelSpec {
        ModelSpec {
            blocks: vec![
                Block::NerloveArrow(NerloveArrowBlock {
                    channels: vec!["tv".into()],
                }),
                Block::Trend(TrendBlock {
                    kind: TrendKind::LocalLevel,
                }),
            ],
            observation: ObservationFamily::Gaussian,
            variant: Variant::B,
        }
    }

    #[test]
    fn point_mass_priors_return_the_generating_parameters() {
        let n = 40;
        let spend = DMatrix::from_fn(n, 1, |j, _| (j % 5) as f64);
        let z = adstock(&spend, 0.3);
        let y: Vec<f64> = (0..n).map(|j| 2.0 * z[(j, 0)] + 1.0).collect();
        let data = SamplerData {
            y,
            spend,
            regressors: DMatrix::zeros(n, 0),
        };
        let cfg = PriorConfig {
            observation: VariancePrior::Fixed { value: 0.0 },
            goodwill: VariancePrior::Fixed { value: 0.0 },
            level: VariancePrior::Fixed { value: 0.0 },
            delta: DeltaPrior::PointMass { value: 0.3 },
            fixed_coefficients: Some(vec![2.0]),
            ..PriorConfig::default()
        };
        let spec = tiny_spec();
        let priors = SamplerPriors::new(&spec, &data, &cfg).unwrap();
        let mc = McmcConfig {
            chains: 2,
            iterations: 20,
            burn_in: 10,
            seed: 9,
            ..McmcConfig::default()
        };
        let chains = gibbs_run(&spec, &data, &priors, &mc).unwrap();
        for c in &chains {
            assert_eq!(c.draws.len(), 10);
            for d in &c.draws {
                assert_eq!(d.delta, 0.3);
                assert_eq!(d.coefficients, vec![2.0]);
                assert_eq!(d.obs_variance, 0.0);
                // Terminal goodwill is q'Z plus a remainder that must vanish.
                assert!((d.terminal_state[0] - 2.0 * z[(n - 1, 0)]).abs() < 1e-4);
                assert!((d.terminal_state[2] - 1.0).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn identical_seeds_give_identical_draws() {
        let n = 30;
        let spend = DMatrix::from_fn(n, 1, |j, _| ((j * 7) % 4) as f64);
        let z = adstock(&spend, 0.5);
        let y: Vec<f64> = (0..n).map(|j| z[(j, 0)] + ((j as f64) * 1.3).sin() * 0.3).collect();
        let data = SamplerData {
            y,
            spend,
            regressors: DMatrix::zeros(n, 0),
        };
        let spec = tiny_spec();
        let priors = SamplerPriors::new(&spec, &data, &PriorConfig::default()).unwrap();
        let mc = McmcConfig {
            chains: 2,
            iterations: 60,
            burn_in: 20,
            seed: 11,
            ..McmcConfig::default()
        };
        let a = gibbs_run(&spec, &data, &priors, &mc).unwrap();
        let b = gibbs_run(&spec, &data, &priors, &mc).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].draws, a[1].draws);
        assert!(a.iter().flat_map(|c| &c.draws).all(|d| d.delta > 0.0 && d.delta < 1.0));
    }
}
