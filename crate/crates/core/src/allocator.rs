//! Budget allocation under the posterior predictive distribution of sales.
//!
//! The posterior is reduced to the moments of total target-week sales as a
//! function of planned spend `u`: with per-draw total `a_d + g_d'u`,
//!
//! `mean(u) = m_c + m_q'u` and
//! `var(u) = σ_cc + 2 σ_cq'u + u'Σ_qq u + ω`,
//!
//! where the moments are population moments over draws and `ω` is the mean
//! per-draw process plus observation variance.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::{self, FutureInputs};
use crate::linalg;
use crate::model::FittedModel;

pub const MIN_DRAWS: usize = 30;
pub const DEFAULT_FRONTIER_POINTS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentModel {
    pub channels: Vec<String>,
    /// Number of decision weeks; decision vectors are week-major (`week * K + channel`).
    pub weeks: usize,
    pub m_c: f64,
    pub m_q: Vec<f64>,
    pub sigma_cc: f64,
    pub sigma_cq: Vec<f64>,
    pub sigma_qq: Vec<Vec<f64>>,
    pub omega: f64,
    pub draws: usize,
}

impl MomentModel {
    /// Population moments of per-draw intercepts `a`, slopes `g` and residual variances `omega`.
    pub fn from_draws(channels: Vec<String>, weeks: usize, a: &[f64], g: &[Vec<f64>], omega: &[f64]) -> Result<Self> {
        let n = a.len();
        if n == 0 || g.len() != n || omega.len() != n {
            return Err(Error::Dimension("per-draw intercepts, slopes and variances differ in count".into()));
        }
        let dim = channels.len() * weeks;
        if g.iter().any(|row| row.len() != dim) {
            return Err(Error::Dimension(format!("slopes must have {dim} entries")));
        }
        let nf = n as f64;
        let m_c = a.iter().sum::<f64>() / nf;
        let m_q: Vec<f64> = (0..dim).map(|i| g.iter().map(|r| r[i]).sum::<f64>() / nf).collect();
        let sigma_cc = a.iter().map(|x| (x - m_c).powi(2)).sum::<f64>() / nf;
        let sigma_cq = (0..dim)
            .map(|i| a.iter().zip(g).map(|(x, r)| (x - m_c) * (r[i] - m_q[i])).sum::<f64>() / nf)
            .collect();
        let sigma_qq = (0..dim)
            .map(|i| {
                (0..dim)
                    .map(|j| g.iter().map(|r| (r[i] - m_q[i]) * (r[j] - m_q[j])).sum::<f64>() / nf)
                    .collect()
            })
            .collect();
        Ok(Self {
            channels,
            weeks,
            m_c,
            m_q,
            sigma_cc,
            sigma_cq,
            sigma_qq,
            omega: omega.iter().sum::<f64>() / nf,
            draws: n,
        })
    }

    pub fn dim(&self) -> usize {
        self.m_q.len()
    }

    fn sigma(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| self.sigma_qq[i][j])
    }

    pub fn mean(&self, u: &[f64]) -> f64 {
        self.m_c + dot(&self.m_q, u)
    }

    pub fn variance(&self, u: &[f64]) -> f64 {
        let quad: f64 = (0..u.len())
            .map(|i| u[i] * (0..u.len()).map(|j| self.sigma_qq[i][j] * u[j]).sum::<f64>())
            .sum();
        self.sigma_cc + 2.0 * dot(&self.sigma_cq, u) + quad + self.omega
    }

    /// Express the model in spend units `c` times larger.
    pub fn rescale_spend(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.m_q.iter_mut().for_each(|v| *v /= c);
        out.sigma_cq.iter_mut().for_each(|v| *v /= c);
        out.sigma_qq.iter_mut().flatten().for_each(|v| *v /= c * c);
        out
    }

    fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d != self.channels.len() * self.weeks || self.sigma_cq.len() != d || self.sigma_qq.len() != d {
            return Err(Error::Dimension("moment model dimensions are inconsistent".into()));
        }
        if self.sigma_qq.iter().any(|r| r.len() != d) {
            return Err(Error::Dimension("Σ_qq is not square".into()));
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Reduce a fitted model to the moments of total sales over `weeks` target weeks.
///
/// Decision week `w` is the week after the last training week plus `w`; its
/// spend first affects sales one week later, so the targets are the `weeks`
/// weeks following the first decision week. `regressors[j]` holds the
/// regressor row of target week `j` (original units).
pub fn reduce(model: &FittedModel, regressors: &[Vec<f64>], weeks: usize) -> Result<MomentModel> {
    if weeks == 0 {
        return Err(Error::Input("need at least one decision week".into()));
    }
    if model.draw_count() < MIN_DRAWS {
        return Err(Error::InsufficientData(format!(
            "moment reduction needs at least {MIN_DRAWS} posterior draws, got {}",
            model.draw_count()
        )));
    }
    let k = model.channels().len();
    let p = model.regressors().len();
    if p > 0 && regressors.len() < weeks {
        return Err(Error::Input(format!(
            "{weeks} target weeks need {weeks} regressor rows, got {}",
            regressors.len()
        )));
    }
    // Lead-in week first: its sales are not a target, so its regressor row is irrelevant.
    let lead_in = (0..p).map(|i| model.regressor_scale(&model.regressors()[i]).invert(0.0)).collect();
    let mut rows = vec![lead_in];
    rows.extend(regressors.iter().take(weeks).cloned());
    if p == 0 {
        rows = vec![Vec::new(); weeks + 1];
    }
    let future = FutureInputs {
        week_start: Vec::new(),
        spend: vec![vec![0.0; k]; weeks],
        regressors: rows,
    };
    let inputs = forecast::forecast_inputs(model, &future, weeks + 1)?;
    let sales = model.scaling.sales;
    let sy = sales.scale;
    let unit: Vec<f64> = (0..k).map(|i| sy / model.channel_scale(i).scale).collect();
    let draws: Vec<_> = model.draws().collect();
    let per_draw: Vec<(f64, Vec<f64>, f64)> = draws
        .par_iter()
        .map(|d| {
            let means = forecast::step_means(model, d, &inputs)?;
            let cov = forecast::step_covariance(model, d, &inputs)?;
            let a = sy * means[1..].iter().sum::<f64>() + weeks as f64 * sales.location;
            let omega = sy * sy * cov.view((1, 1), (weeks, weeks)).sum();
            let retain = 1.0 - d.delta;
            let mut g = vec![0.0; k * weeks];
            for w in 0..weeks {
                let carry: f64 = (0..weeks - w).map(|i| retain.powi(i as i32)).sum();
                for c in 0..k {
                    g[w * k + c] = unit[c] * d.coefficients[c] * carry;
                }
            }
            Ok((a, g, omega))
        })
        .collect::<Result<_>>()?;
    let a: Vec<f64> = per_draw.iter().map(|x| x.0).collect();
    let g: Vec<Vec<f64>> = per_draw.iter().map(|x| x.1.clone()).collect();
    let omega: Vec<f64> = per_draw.iter().map(|x| x.2).collect();
    MomentModel::from_draws(model.channels().to_vec(), weeks, &a, &g, &omega)
}

/// Feasible spend set: per-channel bounds and one budget per decision week.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraints {
    pub budgets: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Spend the whole budget every week instead of at most the budget.
    #[serde(default)]
    pub equality: bool,
}

impl Constraints {
    /// Single-week budget with bounds `[0, budget]` on every channel.
    pub fn simple(budget: f64, channels: usize) -> Self {
        Self {
            budgets: vec![budget],
            lower: vec![0.0; channels],
            upper: vec![budget; channels],
            equality: false,
        }
    }

    fn check(&self, mm: &MomentModel) -> Result<()> {
        let k = mm.channels.len();
        let d = mm.dim();
        if self.budgets.len() != mm.weeks || self.lower.len() != d || self.upper.len() != d {
            return Err(Error::Dimension(format!(
                "constraints need {} budgets and {d} bounds (got {}, {}, {})",
                mm.weeks,
                self.budgets.len(),
                self.lower.len(),
                self.upper.len()
            )));
        }
        for i in 0..d {
            if !(self.lower[i] <= self.upper[i]) || !self.lower[i].is_finite() || !self.upper[i].is_finite() {
                return Err(Error::Infeasible {
                    binding: format!("bounds:{}", mm.channels[i % k]),
                    detail: format!("lower bound {} exceeds upper bound {}", self.lower[i], self.upper[i]),
                });
            }
        }
        for (w, &b) in self.budgets.iter().enumerate() {
            let lo: f64 = self.lower[w * k..(w + 1) * k].iter().sum();
            let hi: f64 = self.upper[w * k..(w + 1) * k].iter().sum();
            if lo > b * (1.0 + 1e-12) + 1e-12 {
                return Err(Error::Infeasible {
                    binding: "budget".into(),
                    detail: format!("week {w}: lower bounds sum to {lo}, above the budget {b}"),
                });
            }
            if self.equality && hi < b * (1.0 - 1e-12) - 1e-12 {
                return Err(Error::Infeasible {
                    binding: "budget".into(),
                    detail: format!("week {w}: upper bounds sum to {hi}, below the budget {b} that must be spent"),
                });
            }
        }
        Ok(())
    }

    /// Euclidean projection onto the feasible set (weeks are independent).
    fn project(&self, z: &[f64], k: usize) -> Vec<f64> {
        let mut out = vec![0.0; z.len()];
        for (w, &b) in self.budgets.iter().enumerate() {
            let r = w * k..(w + 1) * k;
            let (lo, hi, zw) = (&self.lower[r.clone()], &self.upper[r.clone()], &z[r.clone()]);
            let at = |tau: f64| -> Vec<f64> { (0..k).map(|i| (zw[i] - tau).clamp(lo[i], hi[i])).collect() };
            let total = |v: &[f64]| v.iter().sum::<f64>();
            let v0 = at(0.0);
            let v = if !self.equality && total(&v0) <= b {
                v0
            } else {
                let mut a = (0..k).map(|i| zw[i] - hi[i]).fold(f64::INFINITY, f64::min);
                let mut c = (0..k).map(|i| zw[i] - lo[i]).fold(f64::NEG_INFINITY, f64::max);
                for _ in 0..200 {
                    let mid = 0.5 * (a + c);
                    if total(&at(mid)) > b {
                        a = mid;
                    } else {
                        c = mid;
                    }
                }
                at(0.5 * (a + c))
            };
            out[r].copy_from_slice(&v);
        }
        out
    }

    /// Maximize the linear objective `c'u` over the feasible set.
    fn linear_max(&self, c: &[f64], k: usize) -> Vec<f64> {
        let mut u = self.lower.clone();
        for (w, &b) in self.budgets.iter().enumerate() {
            let base = w * k;
            let mut remaining = b - self.lower[base..base + k].iter().sum::<f64>();
            let mut order: Vec<usize> = (0..k).collect();
            order.sort_by(|&i, &j| c[base + j].total_cmp(&c[base + i]));
            for i in order {
                if remaining <= 0.0 || (!self.equality && c[base + i] <= 0.0) {
                    break;
                }
                let add = (self.upper[base + i] - self.lower[base + i]).min(remaining);
                u[base + i] += add;
                remaining -= add;
            }
        }
        u
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub spend: Vec<f64>,
    pub expected_sales: f64,
    pub variance: f64,
    /// Constraints active at the solution: `budget:<week>`, `variance_cap`,
    /// `lower:<channel>`, `upper:<channel>`.
    pub binding: Vec<String>,
}

fn allocation(mm: &MomentModel, cons: &Constraints, u: Vec<f64>, cap: Option<f64>) -> Allocation {
    let k = mm.channels.len();
    let mut binding = Vec::new();
    for (w, &b) in cons.budgets.iter().enumerate() {
        let spent: f64 = u[w * k..(w + 1) * k].iter().sum();
        if (spent - b).abs() <= 1e-9 * (1.0 + b.abs()) {
            binding.push(format!("budget:{w}"));
        }
    }
    let variance = mm.variance(&u);
    if let Some(cap) = cap {
        if variance >= cap * (1.0 - 1e-8) {
            binding.push("variance_cap".into());
        }
    }
    for i in 0..u.len() {
        let tol = 1e-9 * (1.0 + cons.upper[i].abs());
        if cons.upper[i] > cons.lower[i] + tol {
            if u[i] <= cons.lower[i] + tol {
                binding.push(format!("lower:{}:{}", i / k, mm.channels[i % k]));
            } else if u[i] >= cons.upper[i] - tol {
                binding.push(format!("upper:{}:{}", i / k, mm.channels[i % k]));
            }
        }
    }
    Allocation {
        expected_sales: mm.mean(&u),
        variance,
        spend: u,
        binding,
    }
}

/// `argmax_u m'u - μ var(u)` over the feasible set by accelerated projected gradient.
fn penalized_qp(mm: &MomentModel, cons: &Constraints, sigma: &DMatrix<f64>, lmax: f64, mu: f64) -> Vec<f64> {
    let k = mm.channels.len();
    let d = mm.dim();
    let c: Vec<f64> = (0..d).map(|i| mm.m_q[i] - 2.0 * mu * mm.sigma_cq[i]).collect();
    let lipschitz = 2.0 * mu * lmax;
    let scale = 1.0 + cons.upper.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if lipschitz <= 1e-300 || !lipschitz.is_finite() {
        return cons.linear_max(&c, k);
    }
    let step = 1.0 / lipschitz;
    let grad = |u: &[f64]| -> Vec<f64> {
        let su = sigma * DVector::from_column_slice(u);
        (0..d).map(|i| c[i] - 2.0 * mu * su[i]).collect()
    };
    let mut x = cons.linear_max(&c, k);
    let mut y = x.clone();
    let mut t = 1.0_f64;
    for _ in 0..50_000 {
        let gy = grad(&y);
        let z: Vec<f64> = (0..d).map(|i| y[i] + step * gy[i]).collect();
        let x_next = cons.project(&z, k);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let change = (0..d).map(|i| (x_next[i] - x[i]).abs()).fold(0.0, f64::max);
        y = (0..d).map(|i| x_next[i] + (t - 1.0) / t_next * (x_next[i] - x[i])).collect();
        x = x_next;
        t = t_next;
        if change <= 1e-14 * scale {
            break;
        }
    }
    x
}

struct Solver<'a> {
    mm: &'a MomentModel,
    cons: &'a Constraints,
    sigma: DMatrix<f64>,
    lmax: f64,
}

impl<'a> Solver<'a> {
    fn new(mm: &'a MomentModel, cons: &'a Constraints) -> Result<Self> {
        mm.validate()?;
        cons.check(mm)?;
        let sigma = mm.sigma();
        let lmax = if mm.dim() == 0 { 0.0 } else { linalg::max_eigenvalue(&sigma).max(0.0) };
        Ok(Self { mm, cons, sigma, lmax })
    }

    fn at(&self, mu: f64) -> Vec<f64> {
        penalized_qp(self.mm, self.cons, &self.sigma, self.lmax, mu)
    }

    fn unconstrained(&self) -> Vec<f64> {
        self.cons.linear_max(&self.mm.m_q, self.mm.channels.len())
    }

    /// Feasible point with the smallest variance.
    fn min_variance(&self) -> Vec<f64> {
        let k = self.mm.channels.len();
        let d = self.mm.dim();
        if self.lmax <= 1e-300 {
            let c: Vec<f64> = self.mm.sigma_cq.iter().map(|v| -v).collect();
            return self.cons.linear_max(&c, k);
        }
        let zero = MomentModel {
            m_q: vec![0.0; d],
            ..self.mm.clone()
        };
        penalized_qp(&zero, self.cons, &self.sigma, self.lmax, 1.0)
    }

    /// Best point on the segment from feasible `a` towards `b` with `var <= cap`.
    fn blend(&self, a: &[f64], b: &[f64], cap: f64) -> Vec<f64> {
        let d: Vec<f64> = b.iter().zip(a).map(|(x, y)| x - y).collect();
        if dot(&self.mm.m_q, &d) <= 0.0 {
            return a.to_vec();
        }
        let mut lo = 0.0;
        let mut hi = 1.0;
        let point = |th: f64| -> Vec<f64> { a.iter().zip(&d).map(|(x, y)| x + th * y).collect() };
        if self.mm.variance(&point(1.0)) <= cap {
            return point(1.0);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.mm.variance(&point(mid)) <= cap {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        point(lo)
    }

    fn capped(&self, cap: f64) -> Result<Vec<f64>> {
        let u0 = self.unconstrained();
        if self.mm.variance(&u0) <= cap {
            return Ok(u0);
        }
        let umin = self.min_variance();
        let vmin = self.mm.variance(&umin);
        if vmin > cap * (1.0 + 1e-10) {
            return Err(Error::Infeasible {
                binding: "variance_cap".into(),
                detail: format!("smallest attainable variance {vmin} exceeds the cap {cap}"),
            });
        }
        // Bracket μ: var(u(μ)) decreases in μ.
        let mut mu_lo = 0.0;
        let mut mu_hi = 1.0;
        let mut u_hi = self.at(mu_hi);
        let mut tries = 0;
        while self.mm.variance(&u_hi) > cap && tries < 200 {
            mu_lo = mu_hi;
            mu_hi *= 4.0;
            u_hi = self.at(mu_hi);
            tries += 1;
        }
        if self.mm.variance(&u_hi) > cap {
            u_hi = umin;
        }
        let mut u_lo = if mu_lo == 0.0 { u0 } else { self.at(mu_lo) };
        for _ in 0..100 {
            let mid = if mu_lo == 0.0 { 0.5 * mu_hi } else { (mu_lo * mu_hi).sqrt() };
            let u = self.at(mid);
            if self.mm.variance(&u) > cap {
                mu_lo = mid;
                u_lo = u;
            } else {
                mu_hi = mid;
                u_hi = u;
            }
            if (mu_hi - mu_lo) <= 1e-13 * mu_hi {
                break;
            }
        }
        Ok(self.blend(&u_hi, &u_lo, cap))
    }
}

/// Maximize expected sales, optionally subject to `var(u) <= variance_cap`.
pub fn maximize_expected(mm: &MomentModel, cons: &Constraints, variance_cap: Option<f64>) -> Result<Allocation> {
    let solver = Solver::new(mm, cons)?;
    let u = match variance_cap {
        None => solver.unconstrained(),
        Some(cap) => {
            if !(cap > 0.0) {
                return Err(Error::Input(format!("variance cap must be positive, got {cap}")));
            }
            solver.capped(cap)?
        }
    };
    Ok(allocation(mm, cons, u, variance_cap))
}

/// Maximize `mean(u) - λ sqrt(var(u))`.
///
/// The objective is concave; its maximizer also maximizes `m'u - μ var(u)` with
/// `μ = λ / (2 sqrt(var(u)))`, and that fixed point is found by bisection on `μ`.
pub fn maximize_penalized(mm: &MomentModel, cons: &Constraints, lambda: f64) -> Result<Allocation> {
    if !(lambda >= 0.0) {
        return Err(Error::Input(format!("risk weight must be >= 0, got {lambda}")));
    }
    let solver = Solver::new(mm, cons)?;
    if lambda == 0.0 {
        return Ok(allocation(mm, cons, solver.unconstrained(), None));
    }
    let objective = |u: &[f64]| mm.mean(u) - lambda * mm.variance(u).max(0.0).sqrt();
    let gap = |mu: f64| -> (f64, Vec<f64>) {
        let u = solver.at(mu);
        let sd = mm.variance(&u).max(1e-300).sqrt();
        (mu - lambda / (2.0 * sd), u)
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut tries = 0;
    while gap(hi).0 < 0.0 && tries < 200 {
        lo = hi;
        hi *= 4.0;
        tries += 1;
    }
    for _ in 0..100 {
        let mid = if lo == 0.0 { 0.5 * hi } else { (lo * hi).sqrt() };
        if gap(mid).0 < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    let (_, a) = gap(lo);
    let (_, b) = gap(hi);
    // A jump between the two sides happens when the inner problem is linear; search the segment.
    let mut best = if objective(&a) >= objective(&b) { a.clone() } else { b.clone() };
    let (mut l, mut r) = (0.0_f64, 1.0_f64);
    let at = |th: f64| -> Vec<f64> { a.iter().zip(&b).map(|(x, y)| x + th * (y - x)).collect() };
    for _ in 0..200 {
        let m1 = l + (r - l) / 3.0;
        let m2 = r - (r - l) / 3.0;
        if objective(&at(m1)) < objective(&at(m2)) {
            l = m1;
        } else {
            r = m2;
        }
    }
    let mid = at(0.5 * (l + r));
    if objective(&mid) > objective(&best) {
        best = mid;
    }
    Ok(allocation(mm, cons, best, None))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub variance_cap: f64,
    pub spend: Vec<f64>,
    pub expected_sales: f64,
    pub variance: f64,
}

/// Keep points not dominated by any other (higher-or-equal mean with
/// lower-or-equal variance, one strictly); exact duplicates keep their first copy.
/// Survivors keep their input order.
pub fn filter_dominated(points: &[FrontierPoint]) -> Vec<FrontierPoint> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| {
        points[i]
            .variance
            .total_cmp(&points[j].variance)
            .then(points[j].expected_sales.total_cmp(&points[i].expected_sales))
            .then(i.cmp(&j))
    });
    let mut best = f64::NEG_INFINITY;
    let mut kept = Vec::new();
    for i in order {
        if points[i].expected_sales > best {
            best = points[i].expected_sales;
            kept.push(i);
        }
    }
    kept.sort_unstable();
    kept.into_iter().map(|i| points[i].clone()).collect()
}

/// Solve the capped problem on `points` log-spaced caps between the smallest
/// attainable variance and the variance of the uncapped optimum.
pub fn pareto_frontier(mm: &MomentModel, cons: &Constraints, points: usize) -> Result<Vec<FrontierPoint>> {
    let solver = Solver::new(mm, cons)?;
    let v_lo = mm.variance(&solver.min_variance());
    let v_hi = mm.variance(&solver.unconstrained());
    if !(v_lo > 0.0) {
        return Err(Error::Domain(format!("smallest attainable variance {v_lo} is not positive")));
    }
    let points = points.max(1);
    let caps: Vec<f64> = if points == 1 || v_hi <= v_lo {
        vec![v_hi.max(v_lo)]
    } else {
        let (a, b) = (v_lo.ln(), v_hi.ln());
        (0..points).map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp()).collect()
    };
    let raw: Vec<FrontierPoint> = caps
        .iter()
        .map(|&cap| {
            // Guard the lowest cap against round-off in the minimum-variance solve.
            let u = solver.capped(cap * (1.0 + 1e-9))?;
            Ok(FrontierPoint {
                variance_cap: cap,
                expected_sales: mm.mean(&u),
                variance: mm.variance(&u),
                spend: u,
            })
        })
        .collect::<Result<_>>()?;
    Ok(filter_dominated(&raw))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn two_channel() -> MomentModel {
        MomentModel {
            channels: vec!["a".into(), "b".into()],
            weeks: 1,
            m_c: 10.0,
            m_q: vec![2.0, 1.0],
            sigma_cc: 1.0,
            sigma_cq: vec![0.1, 0.0],
            sigma_qq: vec![vec![1.0, 0.0], vec![0.0, 0.25]],
            omega: 1.0,
            draws: 100,
        }
    }

    #[test]
    fn uncapped_optimum_spends_on_the_best_channel() {
        let mm = two_channel();
        let a = maximize_expected(&mm, &Constraints::simple(3.0, 2), None).unwrap();
        assert_eq!(a.spend, vec![3.0, 0.0]);
        assert!(a.binding.contains(&"budget:0".to_string()));
    }

    #[test]
    fn zero_covariance_gives_the_all_in_vertex() {
        let mm = MomentModel {
            sigma_cq: vec![0.0, 0.0],
            sigma_qq: vec![vec![0.0; 2]; 2],
            ..two_channel()
        };
        let a = maximize_expected(&mm, &Constraints::simple(5.0, 2), Some(100.0)).unwrap();
        assert_eq!(a.spend, vec![5.0, 0.0]);
    }

    #[test]
    fn variance_cap_is_respected_and_binding() {
        let mm = two_channel();
        let cap = 4.0;
        let a = maximize_expected(&mm, &Constraints::simple(3.0, 2), Some(cap)).unwrap();
        assert!(a.variance <= cap * (1.0 + 1e-9));
        assert!(a.binding.contains(&"variance_cap".to_string()));
        assert!((a.variance - cap).abs() < 1e-6);
    }

    #[test]
    fn impossible_cap_is_infeasible() {
        let mm = two_channel();
        let err = maximize_expected(&mm, &Constraints::simple(3.0, 2), Some(0.5)).unwrap_err();
        assert!(matches!(err, Error::Infeasible { ref binding, .. } if binding == "variance_cap"));
    }

    #[test]
    fn bounds_above_budget_are_infeasible() {
        let mm = two_channel();
        let cons = Constraints {
            budgets: vec![1.0],
            lower: vec![1.0, 1.0],
            upper: vec![2.0, 2.0],
            equality: false,
        };
        assert!(matches!(maximize_expected(&mm, &cons, None), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn equality_budget_spends_everything() {
        let mut mm = two_channel();
        mm.m_q = vec![-1.0, -2.0];
        let cons = Constraints {
            equality: true,
            ..Constraints::simple(2.0, 2)
        };
        let a = maximize_expected(&mm, &cons, None).unwrap();
        assert!((a.spend.iter().sum::<f64>() - 2.0).abs() < 1e-12);
        assert_eq!(a.spend, vec![2.0, 0.0]);
        let free = maximize_expected(&mm, &Constraints::simple(2.0, 2), None).unwrap();
        assert_eq!(free.spend, vec![0.0, 0.0]);
    }

    #[test]
    fn zero_risk_weight_matches_expected_maximization() {
        let mm = two_channel();
        let cons = Constraints::simple(3.0, 2);
        let a = maximize_penalized(&mm, &cons, 0.0).unwrap();
        let b = maximize_expected(&mm, &cons, None).unwrap();
        assert_eq!(a.spend, b.spend);
    }

    #[test]
    fn dominated_points_are_removed() {
        let p = |v: f64, m: f64| FrontierPoint {
            variance_cap: v,
            spend: vec![],
            expected_sales: m,
            variance: v,
        };
        let out = filter_dominated(&[p(1.0, 1.0), p(2.0, 0.5), p(2.0, 3.0), p(3.0, 3.0), p(1.0, 1.0)]);
        let pairs: Vec<(f64, f64)> = out.iter().map(|q| (q.variance, q.expected_sales)).collect();
        assert_eq!(pairs, vec![(1.0, 1.0), (2.0, 3.0)]);
    }

    #[test]
    fn projection_lands_in_the_feasible_set() {
        let cons = Constraints {
            budgets: vec![1.0],
            lower: vec![0.0, 0.0, 0.0],
            upper: vec![0.6, 1.0, 1.0],
            equality: false,
        };
        let v = cons.project(&[2.0, 0.5, -1.0], 3);
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((v[0] - 0.6).abs() < 1e-12);
        assert!((v[1] - 0.4).abs() < 1e-12);
        assert_eq!(v[2], 0.0);
    }
}
