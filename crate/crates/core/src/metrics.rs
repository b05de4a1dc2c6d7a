//! Point-forecast and calibration metrics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

/// Mean absolute percentage error, in percent.
pub fn mape(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    if actual.len() != predicted.len() {
        return Err(Error::Dimension(format!(
            "{} actual values for {} predictions",
            actual.len(),
            predicted.len()
        )));
    }
    if actual.is_empty() {
        return Err(Error::UndefinedMetric("MAPE of an empty sequence".into()));
    }
    let mut total = 0.0;
    for (i, (&y, &p)) in actual.iter().zip(predicted).enumerate() {
        if y == 0.0 {
            return Err(Error::UndefinedMetric(format!("MAPE is undefined: actual value at step {i} is zero")));
        }
        total += ((y - p) / y).abs();
    }
    Ok(100.0 * total / actual.len() as f64)
}

/// Cumulative predicted sales over the steps labelled `year`.
pub fn cps(predicted: &[f64], years: &[i32], year: i32) -> Result<f64> {
    if predicted.len() != years.len() {
        return Err(Error::Dimension(format!("{} predictions for {} year labels", predicted.len(), years.len())));
    }
    let mut found = false;
    let mut total = 0.0;
    for (&p, &y) in predicted.iter().zip(years) {
        if y == year {
            found = true;
            total += p;
        }
    }
    if !found {
        return Err(Error::UndefinedMetric(format!("no steps fall in year {year}")));
    }
    Ok(total)
}

/// `cps` for every year present, in calendar order.
pub fn cps_by_year(predicted: &[f64], years: &[i32]) -> Result<BTreeMap<i32, f64>> {
    if predicted.len() != years.len() {
        return Err(Error::Dimension(format!("{} predictions for {} year labels", predicted.len(), years.len())));
    }
    let mut out = BTreeMap::new();
    for (&p, &y) in predicted.iter().zip(years) {
        *out.entry(y).or_insert(0.0) += p;
    }
    Ok(out)
}

pub fn standardized_residuals(actual: &[f64], mean: &[f64], variance: &[f64]) -> Result<Vec<f64>> {
    if actual.len() != mean.len() || mean.len() != variance.len() {
        return Err(Error::Dimension("actual, mean and variance lengths differ".into()));
    }
    actual
        .iter()
        .zip(mean)
        .zip(variance)
        .enumerate()
        .map(|(t, ((&y, &m), &v))| {
            if !(v > 0.0) {
                return Err(Error::Numerical {
                    step: t,
                    message: format!("predictive variance {v} is not positive"),
                });
            }
            Ok((y - m) / v.sqrt())
        })
        .collect()
}

/// Fraction of `actual` inside `[lower, upper]`.
pub fn coverage(actual: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    let n = actual.len();
    if n == 0 {
        return f64::NAN;
    }
    let hits = (0..n).filter(|&i| actual[i] >= lower[i] && actual[i] <= upper[i]).count();
    hits as f64 / n as f64
}

/// Linear-interpolation quantile of an ascending sample.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// One component of an equally weighted predictive mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub mean: f64,
    /// Scale: the standard deviation for Gaussian components.
    pub scale: f64,
    /// Degrees of freedom; `None` for Gaussian components.
    pub nu: Option<f64>,
}

impl Component {
    pub fn cdf(&self, x: f64) -> f64 {
        if self.scale <= 0.0 {
            return if x >= self.mean { 1.0 } else { 0.0 };
        }
        let z = (x - self.mean) / self.scale;
        match self.nu {
            None => Normal::new(0.0, 1.0).expect("standard normal").cdf(z),
            Some(nu) => StudentsT::new(0.0, 1.0, nu).expect("positive dof").cdf(z),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if self.scale <= 0.0 {
            return if x == self.mean { f64::INFINITY } else { 0.0 };
        }
        let z = (x - self.mean) / self.scale;
        let d = match self.nu {
            None => Normal::new(0.0, 1.0).expect("standard normal").pdf(z),
            Some(nu) => StudentsT::new(0.0, 1.0, nu).expect("positive dof").pdf(z),
        };
        d / self.scale
    }

    /// Variance, infinite for `ν ≤ 2`.
    pub fn variance(&self) -> f64 {
        match self.nu {
            None => self.scale * self.scale,
            Some(nu) if nu > 2.0 => self.scale * self.scale * nu / (nu - 2.0),
            Some(_) => f64::INFINITY,
        }
    }
}

pub fn mixture_cdf(components: &[Component], x: f64) -> f64 {
    components.iter().map(|c| c.cdf(x)).sum::<f64>() / components.len() as f64
}

pub fn mixture_log_density(components: &[Component], x: f64) -> f64 {
    (components.iter().map(|c| c.pdf(x)).sum::<f64>() / components.len() as f64).ln()
}

/// Mean and variance of the mixture (mean of variances plus variance of means).
pub fn mixture_moments(components: &[Component]) -> (f64, f64) {
    let n = components.len() as f64;
    let mean = components.iter().map(|c| c.mean).sum::<f64>() / n;
    let within = components.iter().map(|c| c.variance()).sum::<f64>() / n;
    let between = components.iter().map(|c| (c.mean - mean).powi(2)).sum::<f64>() / n;
    (mean, within + between)
}

/// Quantile of the mixture by bisection on its CDF.
pub fn mixture_quantile(components: &[Component], p: f64) -> f64 {
    let (mean, var) = mixture_moments(components);
    let spread = if var.is_finite() && var > 0.0 {
        var.sqrt()
    } else {
        components.iter().map(|c| c.scale).fold(0.0, f64::max).max(1e-12)
    };
    let mut lo = components.iter().map(|c| c.mean).fold(f64::INFINITY, f64::min) - 10.0 * spread;
    let mut hi = components.iter().map(|c| c.mean).fold(f64::NEG_INFINITY, f64::max) + 10.0 * spread;
    while mixture_cdf(components, lo) > p {
        lo -= (hi - lo).max(1.0);
    }
    while mixture_cdf(components, hi) < p {
        hi += (hi - lo).max(1.0);
    }
    if !mean.is_finite() {
        return f64::NAN;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mixture_cdf(components, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * (1.0 + mid.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}
