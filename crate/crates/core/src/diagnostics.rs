//! Convergence and interpretation summaries of fitted chains.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name of the R̂ variant reported in every diagnostic payload.
pub const RHAT_VARIANT: &str = "gelman-rubin multi-chain (not split)";

/// Classic multi-chain potential scale reduction factor.
///
/// `W` is the mean within-chain sample variance, `B/m` the sample variance of
/// the chain means, `V̂ = (m-1)/m W + B/m` and `R̂ = sqrt(V̂/W)`.
pub fn gelman_rubin(chains: &[Vec<f64>]) -> Result<f64> {
    if chains.len() < 2 {
        return Err(Error::Input(format!("R-hat needs at least 2 chains, got {}", chains.len())));
    }
    let m = chains[0].len();
    if m < 2 || chains.iter().any(|c| c.len() != m) {
        return Err(Error::Input("R-hat needs chains of equal length >= 2".into()));
    }
    let n_chains = chains.len() as f64;
    let mf = m as f64;
    let means: Vec<f64> = chains.iter().map(|c| c.iter().sum::<f64>() / mf).collect();
    let w = chains
        .iter()
        .zip(&means)
        .map(|(c, mu)| c.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (mf - 1.0))
        .sum::<f64>()
        / n_chains;
    if w <= 0.0 {
        return Err(Error::DegenerateChains("every chain has zero within-chain variance".into()));
    }
    let grand = means.iter().sum::<f64>() / n_chains;
    let b_over_m = means.iter().map(|mu| (mu - grand).powi(2)).sum::<f64>() / (n_chains - 1.0);
    let v_hat = (mf - 1.0) / mf * w + b_over_m;
    Ok((v_hat / w).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhatEntry {
    pub name: String,
    /// `None` when every chain is constant.
    pub rhat: Option<f64>,
    /// Chains constant at one shared value: trivially converged.
    pub constant: bool,
}

impl RhatEntry {
    pub fn passes(&self, threshold: f64) -> bool {
        match self.rhat {
            Some(r) => r < threshold,
            None => self.constant,
        }
    }
}

/// R̂ for one named coordinate, tolerating chains that are constant.
pub fn rhat_entry(name: &str, chains: &[Vec<f64>]) -> Result<RhatEntry> {
    match gelman_rubin(chains) {
        Ok(r) => Ok(RhatEntry {
            name: name.to_string(),
            rhat: Some(r),
            constant: false,
        }),
        Err(Error::DegenerateChains(_)) => {
            let first = chains[0][0];
            Ok(RhatEntry {
                name: name.to_string(),
                rhat: None,
                constant: chains.iter().all(|c| c.iter().all(|&x| x == first)),
            })
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusionEntry {
    pub name: String,
    pub probability: f64,
    /// Sign of the mean coefficient over draws where it is included (0 if never).
    pub sign: i8,
}

/// Fraction of draws with `γ_i = 1`, and the sign of the included mean.
pub fn inclusion_probabilities(names: &[String], gamma: &[Vec<bool>], beta: &[Vec<f64>]) -> Vec<InclusionEntry> {
    names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let n = gamma.len().max(1) as f64;
            let included: Vec<f64> = gamma
                .iter()
                .zip(beta)
                .filter(|(g, _)| g[i])
                .map(|(_, b)| b[i])
                .collect();
            let mean = if included.is_empty() {
                0.0
            } else {
                included.iter().sum::<f64>() / included.len() as f64
            };
            InclusionEntry {
                name: name.clone(),
                probability: included.len() as f64 / n,
                sign: if mean > 0.0 {
                    1
                } else if mean < 0.0 {
                    -1
                } else {
                    0
                },
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    /// `|mean| > 2 sd`.
    pub significant: bool,
}

pub fn summarize(name: &str, values: &[f64]) -> CoefficientRow {
    let n = values.len().max(1) as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let sd = var.sqrt();
    CoefficientRow {
        name: name.to_string(),
        mean,
        sd,
        significant: mean.abs() > 2.0 * sd,
    }
}

/// Keep at most `max_points` evenly spaced entries (always including the last).
pub fn decimate(values: &[f64], max_points: usize) -> Vec<f64> {
    if values.len() <= max_points || max_points == 0 {
        return values.to_vec();
    }
    let step = values.len() as f64 / max_points as f64;
    let mut out: Vec<f64> = (0..max_points).map(|i| values[(i as f64 * step) as usize]).collect();
    if let Some(last) = out.last_mut() {
        *last = values[values.len() - 1];
    }
    out
}
