//! Prior families and the conjugate conditional draws built on them.

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::blocks::Variant;
use crate::error::{Error, Result};

/// Prior for a variance parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum VariancePrior {
    /// Density proportional to `x^(-shape-1) exp(-scale/x)`.
    InverseGamma { shape: f64, scale: f64 },
    /// Point mass; the variance is never updated.
    Fixed { value: f64 },
}

impl VariancePrior {
    pub const WEAK: VariancePrior = VariancePrior::InverseGamma {
        shape: 0.01,
        scale: 0.01,
    };

    pub fn validate(&self, name: &str) -> Result<()> {
        match *self {
            VariancePrior::InverseGamma { shape, scale } if !(shape > 0.0 && scale > 0.0) => Err(Error::Config(
                format!("{name} variance prior needs shape > 0 and scale > 0, got ({shape}, {scale})"),
            )),
            VariancePrior::Fixed { value } if !(value >= 0.0 && value.is_finite()) => {
                Err(Error::Config(format!("{name} variance must be finite and >= 0, got {value}")))
            }
            _ => Ok(()),
        }
    }

    /// Conditional draw given `n` residuals with sum of squares `ss`.
    pub fn posterior_draw<R: Rng + ?Sized>(&self, n: usize, ss: f64, rng: &mut R) -> f64 {
        match *self {
            VariancePrior::Fixed { value } => value,
            VariancePrior::InverseGamma { shape, scale } => {
                sample_inverse_gamma(shape + n as f64 / 2.0, scale + ss / 2.0, rng)
            }
        }
    }
}

/// Prior on the forgetting rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DeltaPrior {
    Uniform,
    Beta { a: f64, b: f64 },
    PointMass { value: f64 },
}

impl DeltaPrior {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DeltaPrior::Beta { a, b } if !(a > 0.0 && b > 0.0) => {
                Err(Error::Config(format!("beta prior on the forgetting rate needs a, b > 0, got ({a}, {b})")))
            }
            DeltaPrior::PointMass { value } if !(0.0..=1.0).contains(&value) => {
                Err(Error::Config(format!("point mass at {value} lies outside [0, 1]")))
            }
            _ => Ok(()),
        }
    }

    /// Unnormalised log density on (0, 1).
    pub fn log_density(&self, delta: f64) -> f64 {
        if !(delta > 0.0 && delta < 1.0) {
            return f64::NEG_INFINITY;
        }
        match *self {
            DeltaPrior::Uniform => 0.0,
            DeltaPrior::Beta { a, b } => (a - 1.0) * delta.ln() + (b - 1.0) * (1.0 - delta).ln(),
            DeltaPrior::PointMass { value } => {
                if delta == value {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            DeltaPrior::Uniform => 0.5,
            DeltaPrior::Beta { a, b } => a / (a + b),
            DeltaPrior::PointMass { value } => value,
        }
    }
}

/// User-facing prior configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    /// Prior expected number of included coefficients.
    #[serde(default = "default_expected_size")]
    pub expected_model_size: f64,
    /// Per-coefficient inclusion probabilities that override the variant default.
    #[serde(default)]
    pub inclusion_overrides: BTreeMap<String, f64>,
    /// Slab information weight, in observations' worth.
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    /// Weight of the diagonal part of the slab information.
    #[serde(default = "default_diag_weight")]
    pub diagonal_weight: f64,
    #[serde(default = "weak")]
    pub observation: VariancePrior,
    #[serde(default = "weak")]
    pub goodwill: VariancePrior,
    #[serde(default = "weak")]
    pub level: VariancePrior,
    #[serde(default = "weak")]
    pub slope: VariancePrior,
    #[serde(default = "weak")]
    pub seasonal: VariancePrior,
    #[serde(default = "uniform")]
    pub delta: DeltaPrior,
    /// Hold every regression coefficient fixed at these values (model units).
    #[serde(default)]
    pub fixed_coefficients: Option<Vec<f64>>,
}

fn default_expected_size() -> f64 {
    5.0
}
fn default_kappa() -> f64 {
    1.0
}
fn default_diag_weight() -> f64 {
    0.5
}
fn weak() -> VariancePrior {
    VariancePrior::WEAK
}
fn uniform() -> DeltaPrior {
    DeltaPrior::Uniform
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            expected_model_size: default_expected_size(),
            inclusion_overrides: BTreeMap::new(),
            kappa: default_kappa(),
            diagonal_weight: default_diag_weight(),
            observation: weak(),
            goodwill: weak(),
            level: weak(),
            slope: weak(),
            seasonal: weak(),
            delta: uniform(),
            fixed_coefficients: None,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.expected_model_size >= 0.0) {
            return Err(Error::Config(format!("expected model size must be >= 0, got {}", self.expected_model_size)));
        }
        if !(self.kappa > 0.0) {
            return Err(Error::Config(format!("slab weight kappa must be > 0, got {}", self.kappa)));
        }
        if !(0.0..=1.0).contains(&self.diagonal_weight) {
            return Err(Error::Config(format!("diagonal weight must lie in [0, 1], got {}", self.diagonal_weight)));
        }
        for (name, p) in &self.inclusion_overrides {
            if !(0.0..=1.0).contains(p) {
                return Err(Error::Config(format!("inclusion probability for `{name}` must lie in [0, 1], got {p}")));
            }
        }
        for (name, v) in [
            ("observation", &self.observation),
            ("goodwill", &self.goodwill),
            ("level", &self.level),
            ("slope", &self.slope),
            ("seasonal", &self.seasonal),
        ] {
            v.validate(name)?;
        }
        self.delta.validate()
    }
}

/// Prior inclusion probability for every coefficient, channels first.
///
/// `RA` spreads the expected size over all coefficients (`π = E/p`), `RF`
/// forces channels in and spreads `E` over the regressors, `B` applies
/// `min(E, k)/k` to the channels. Overrides are keyed by column name
/// (`u_<name>` or `x_<name>`).
pub fn inclusion_probabilities(
    variant: Variant,
    channels: &[String],
    regressors: &[String],
    expected_size: f64,
    overrides: &BTreeMap<String, f64>,
) -> Vec<f64> {
    let (k, px) = (channels.len(), regressors.len());
    let clamp = |v: f64| v.clamp(0.0, 1.0);
    let (pc, pr) = match variant {
        Variant::RA => {
            let p = (k + px).max(1) as f64;
            (clamp(expected_size / p), clamp(expected_size / p))
        }
        Variant::RF => (1.0, clamp(expected_size / px.max(1) as f64)),
        Variant::B => (clamp(expected_size.min(k as f64) / k.max(1) as f64), 0.0),
    };
    let mut out: Vec<f64> = Vec::with_capacity(k + px);
    for c in channels {
        out.push(*overrides.get(&format!("u_{c}")).unwrap_or(&pc));
    }
    for x in regressors {
        out.push(*overrides.get(&format!("x_{x}")).unwrap_or(&pr));
    }
    out
}

/// Weighted sufficient statistics of a linear regression `r = D b + e`.
#[derive(Debug, Clone)]
pub struct RegressionStats {
    pub xtx: DMatrix<f64>,
    pub xty: DVector<f64>,
    pub yty: f64,
    pub n: usize,
}

impl RegressionStats {
    /// `weights[t]` multiplies the precision of observation `t`.
    pub fn new(design: &DMatrix<f64>, response: &[f64], weights: Option<&[f64]>) -> Self {
        let (n, p) = design.shape();
        let mut xtx = DMatrix::zeros(p, p);
        let mut xty = DVector::zeros(p);
        let mut yty = 0.0;
        for t in 0..n {
            let w = weights.map_or(1.0, |w| w[t]);
            let row = design.row(t);
            for i in 0..p {
                let wi = w * row[i];
                xty[i] += wi * response[t];
                for j in i..p {
                    xtx[(i, j)] += wi * row[j];
                }
            }
            yty += w * response[t] * response[t];
        }
        for i in 0..p {
            for j in 0..i {
                xtx[(i, j)] = xtx[(j, i)];
            }
        }
        Self { xtx, xty, yty, n }
    }
}

/// Slab information `Ω = κ/n ((1-w) X'X + w diag(X'X))`, with a small floor on
/// the diagonal so that all-zero columns stay proper.
pub fn g_prior_precision(xtx: &DMatrix<f64>, n: usize, kappa: f64, diagonal_weight: f64) -> DMatrix<f64> {
    let p = xtx.nrows();
    let mut omega = xtx * ((1.0 - diagonal_weight) * kappa / n.max(1) as f64);
    for i in 0..p {
        omega[(i, i)] += diagonal_weight * kappa / n.max(1) as f64 * xtx[(i, i)];
        omega[(i, i)] = omega[(i, i)].max(1e-8);
    }
    omega
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeSlabPrior {
    pub inclusion: Vec<f64>,
    /// Slab information `Ω`, scaled by `σ²` in the prior `β_γ ~ N(0, σ² Ω_γ⁻¹)`.
    pub precision: DMatrix<f64>,
    pub residual: VariancePrior,
    #[serde(default)]
    pub fixed_coefficients: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpikeSlabDraw {
    pub beta: Vec<f64>,
    pub gamma: Vec<bool>,
    pub sigma2: f64,
}

fn subset(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
}

struct Conditional {
    log_marginal: f64,
    chol: Option<Cholesky<f64, nalgebra::Dyn>>,
    beta_hat: DVector<f64>,
    ss: f64,
}

fn cholesky_with_jitter(m: DMatrix<f64>) -> Option<Cholesky<f64, nalgebra::Dyn>> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Some(c);
    }
    let n = m.nrows();
    Cholesky::new(m + DMatrix::identity(n, n) * 1e-8)
}

fn conditional(stats: &RegressionStats, prior: &SpikeSlabPrior, idx: &[usize]) -> Result<Conditional> {
    let n = stats.n as f64;
    let (log_det_ratio, chol, beta_hat, ss) = if idx.is_empty() {
        (0.0, None, DVector::zeros(0), stats.yty)
    } else {
        let omega = subset(&prior.precision, idx);
        let p = subset(&stats.xtx, idx) + &omega;
        let xty = DVector::from_iterator(idx.len(), idx.iter().map(|&i| stats.xty[i]));
        let chol = cholesky_with_jitter(p).ok_or_else(|| Error::Numerical {
            step: 0,
            message: "spike-and-slab conditional information is singular".into(),
        })?;
        let omega_chol = cholesky_with_jitter(omega).ok_or_else(|| Error::Numerical {
            step: 0,
            message: "slab information is singular".into(),
        })?;
        let ld = |c: &Cholesky<f64, nalgebra::Dyn>| 2.0 * c.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let beta_hat = chol.solve(&xty);
        let ss = (stats.yty - beta_hat.dot(&xty)).max(0.0);
        (0.5 * (ld(&omega_chol) - ld(&chol)), Some(chol), beta_hat, ss)
    };
    let log_marginal = match prior.residual {
        VariancePrior::InverseGamma { shape, scale } => log_det_ratio - (shape + n / 2.0) * (scale + ss / 2.0).ln(),
        VariancePrior::Fixed { value } => log_det_ratio - ss / (2.0 * value.max(f64::MIN_POSITIVE)),
    };
    Ok(Conditional {
        log_marginal,
        chol,
        beta_hat,
        ss,
    })
}

/// One joint draw of `(β, γ, σ²)`.
///
/// `γ` is updated coordinate-wise in random order from its conditional with
/// `β` and `σ²` integrated out; coordinates with `π ∈ {0, 1}` are never
/// flipped. `β` and `σ²` are then drawn from their conjugate conditionals.
pub fn sample_spike_slab<R: Rng + ?Sized>(
    stats: &RegressionStats,
    prior: &SpikeSlabPrior,
    gamma: &[bool],
    rng: &mut R,
) -> Result<SpikeSlabDraw> {
    let p = prior.inclusion.len();
    if stats.xtx.nrows() != p || gamma.len() != p {
        return Err(Error::Dimension(format!(
            "spike-and-slab has {p} inclusion probabilities, design has {} columns",
            stats.xtx.nrows()
        )));
    }
    if let Some(fixed) = &prior.fixed_coefficients {
        let beta = fixed.clone();
        let gamma = beta.iter().map(|b| *b != 0.0).collect();
        let fitted_ss = {
            let b = DVector::from_vec(beta.clone());
            (stats.yty - 2.0 * b.dot(&stats.xty) + (b.transpose() * &stats.xtx * &b)[(0, 0)]).max(0.0)
        };
        let sigma2 = prior.residual.posterior_draw(stats.n, fitted_ss, rng);
        return Ok(SpikeSlabDraw { beta, gamma, sigma2 });
    }
    let mut gamma: Vec<bool> = gamma
        .iter()
        .zip(&prior.inclusion)
        .map(|(&g, &pi)| if pi >= 1.0 { true } else if pi <= 0.0 { false } else { g })
        .collect();
    let mut order: Vec<usize> = (0..p).filter(|&i| prior.inclusion[i] > 0.0 && prior.inclusion[i] < 1.0).collect();
    order.shuffle(rng);
    let indices = |g: &[bool]| -> Vec<usize> { (0..p).filter(|&i| g[i]).collect() };
    for &i in &order {
        let pi = prior.inclusion[i];
        gamma[i] = true;
        let on = conditional(stats, prior, &indices(&gamma))?.log_marginal + pi.ln();
        gamma[i] = false;
        let off = conditional(stats, prior, &indices(&gamma))?.log_marginal + (1.0 - pi).ln();
        let prob_on = 1.0 / (1.0 + (off - on).exp());
        gamma[i] = rng.random::<f64>() < prob_on;
    }
    let idx = indices(&gamma);
    let cond = conditional(stats, prior, &idx)?;
    let sigma2 = prior.residual.posterior_draw(stats.n, cond.ss, rng);
    if !sigma2.is_finite() {
        return Err(Error::Numerical {
            step: 0,
            message: format!("residual variance draw overflowed ({sigma2})"),
        });
    }
    let mut beta = vec![0.0; p];
    if let Some(chol) = cond.chol {
        // β ~ N(β̂, σ² P⁻¹): solve L' x = z for z standard normal.
        let z = DVector::from_iterator(idx.len(), (0..idx.len()).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let dev = chol
            .l()
            .transpose()
            .solve_upper_triangular(&z)
            .ok_or_else(|| Error::Numerical {
                step: 0,
                message: "triangular solve failed".into(),
            })?;
        for (j, &i) in idx.iter().enumerate() {
            beta[i] = cond.beta_hat[j] + sigma2.sqrt() * dev[j];
        }
    }
    Ok(SpikeSlabDraw { beta, gamma, sigma2 })
}

pub fn sample_inverse_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    let g = Gamma::new(shape, 1.0 / scale).expect("positive inverse-gamma parameters");
    1.0 / g.sample(rng)
}

/// Latent variance scales for student-t observation noise.
pub fn sample_latent_scales<R: Rng + ?Sized>(
    residuals: &[f64],
    nu: f64,
    tau2: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(nu > 1.0) {
        return Err(Error::Config(format!(
            "student-t degrees of freedom must exceed 1 for a finite variance, got {nu}"
        )));
    }
    if !(tau2 > 0.0) {
        return Err(Error::Domain(format!("student-t scale must be > 0, got {tau2}")));
    }
    Ok(residuals
        .iter()
        .map(|e| sample_inverse_gamma((nu + 1.0) / 2.0, (nu + e * e / tau2) / 2.0, rng))
        .collect())
}
