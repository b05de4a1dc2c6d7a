//! Operations shared by the command line and the HTTP service.
//!
//! Both front ends parse their input into the request types below and call the
//! same functions, so identical inputs and seeds give identical outputs.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use goodwill::allocator::{self, Allocation, Constraints, FrontierPoint, MomentModel};
use goodwill::blocks::{DynamicState, ModelParams, ModelSpec, Variant};
use goodwill::dataset::{self, ChannelGenerator, Dataset, RegressorGenerator, Series, SimulationConfig};
use goodwill::diagnostics::{self, CoefficientRow, InclusionEntry};
use goodwill::forecast::{self, Evaluation, FutureInputs};
use goodwill::model::{self, DiagnosticsReport, FitConfig, FittedModel};
use goodwill::{store, Error, Result};
use serde::{Deserialize, Serialize};

pub const RHAT_THRESHOLD: f64 = 1.1;
pub const DEFAULT_TRACE_POINTS: usize = 1000;

fn default_threshold() -> f64 {
    RHAT_THRESHOLD
}

fn default_horizon() -> usize {
    1
}

fn default_grid() -> usize {
    allocator::DEFAULT_FRONTIER_POINTS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRequest {
    #[serde(flatten)]
    pub config: FitConfig,
    /// Rows before this index are used for fitting, the rest become the holdout.
    #[serde(default)]
    pub train_end: Option<usize>,
    #[serde(default = "default_threshold")]
    pub rhat_threshold: f64,
}

impl FitRequest {
    pub fn new(config: FitConfig) -> Self {
        Self {
            config,
            train_end: None,
            rhat_threshold: RHAT_THRESHOLD,
        }
    }
}

/// `tables.json`: interpretation summaries in original units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tables {
    pub coefficients: Vec<CoefficientRow>,
    pub inclusion: Vec<InclusionEntry>,
    pub mean_goodwill: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub train_rows: usize,
    pub holdout_rows: usize,
    pub converged: bool,
    pub max_rhat: Option<f64>,
    pub tables: Tables,
    pub evaluation: Option<Evaluation>,
}

pub fn tables(m: &FittedModel) -> Tables {
    Tables {
        coefficients: m.coefficient_table(),
        inclusion: m.inclusion_table(),
        mean_goodwill: m.mean_goodwill(),
    }
}

/// Fit, persist the draws to `dir`, and write diagnostics, tables and (with a
/// holdout) the one-step evaluation next to them.
pub fn fit_to_dir(data: &Dataset, req: &FitRequest, dir: &Path) -> Result<FitSummary> {
    let cut = req.train_end.unwrap_or(data.len());
    let (train, holdout) = if cut >= data.len() {
        (data.clone(), data.slice(data.len()..data.len()))
    } else {
        dataset::split(data, cut)?
    };
    let fitted = model::fit(&train, &req.config)?;
    store::save(&fitted, dir)?;
    let report = model::diagnostics_report(&fitted, req.rhat_threshold)?;
    store::write_json(dir, "diagnostics.json", &report)?;
    let tables = tables(&fitted);
    store::write_json(dir, "tables.json", &tables)?;
    let evaluation = if holdout.is_empty() {
        None
    } else {
        let e = forecast::one_step_ahead(&fitted, &holdout)?;
        store::write_json(dir, "evaluation.json", &e)?;
        Some(e)
    };
    Ok(FitSummary {
        train_rows: train.len(),
        holdout_rows: holdout.len(),
        converged: report.converged,
        max_rhat: report.max_rhat,
        tables,
        evaluation,
    })
}

/// One future week keyed by dataset column names (`u_<channel>`, `x_<regressor>`).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FutureRow {
    #[serde(default)]
    pub date: Option<NaiveDate>,
    #[serde(flatten)]
    pub values: BTreeMap<String, f64>,
}

/// Turn JSON future rows into a frame; missing dates continue weekly after `last_week`.
pub fn future_frame(rows: &[FutureRow], last_week: NaiveDate) -> Result<Dataset> {
    let columns: Vec<String> = rows.first().map(|r| r.values.keys().cloned().collect()).unwrap_or_default();
    let mut channels: Vec<Series> = Vec::new();
    let mut regressors: Vec<Series> = Vec::new();
    for c in &columns {
        let values = rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r.values
                    .get(c)
                    .copied()
                    .ok_or_else(|| Error::Input(format!("future row {i} lacks column `{c}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(name) = c.strip_prefix("u_") {
            channels.push(Series::new(name, values));
        } else if let Some(name) = c.strip_prefix("x_") {
            regressors.push(Series::new(name, values));
        } else {
            return Err(Error::Input(format!("unrecognised future column `{c}`")));
        }
    }
    for (i, r) in rows.iter().enumerate() {
        if r.values.len() != columns.len() {
            return Err(Error::Input(format!("future row {i} has different columns from row 0")));
        }
    }
    let week_start = rows
        .iter()
        .enumerate()
        .map(|(i, r)| r.date.unwrap_or(last_week + chrono::Duration::weeks(i as i64 + 1)))
        .collect();
    let d = Dataset {
        week_start,
        sales: vec![None; rows.len()],
        channels,
        regressors,
    };
    d.validate().map_err(|e| Error::Input(format!("future rows: {e}")))?;
    Ok(d)
}

fn future_inputs(m: &FittedModel, future: Option<&Dataset>) -> Result<FutureInputs> {
    match future {
        Some(d) => FutureInputs::from_dataset(m, d),
        None => Ok(FutureInputs::default()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastStep {
    pub week_start: NaiveDate,
    pub mean: f64,
    pub variance: f64,
    pub lower: f64,
    pub median: f64,
    pub upper: f64,
    pub mixture_mean: f64,
    pub mixture_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResponse {
    pub horizon: usize,
    pub seed: u64,
    /// Probabilities of the `lower` and `upper` quantiles.
    pub interval: (f64, f64),
    pub steps: Vec<ForecastStep>,
}

/// Predictive forecast with `future` rows starting the week after training.
pub fn forecast(m: &FittedModel, horizon: usize, future: Option<&Dataset>, seed: u64) -> Result<ForecastResponse> {
    if horizon == 0 {
        return Err(Error::Input("forecast horizon must be at least 1".into()));
    }
    let inputs = future_inputs(m, future)?;
    let f = forecast::predictive_sample(m, &inputs, horizon, seed)?;
    let steps = (0..horizon)
        .map(|t| ForecastStep {
            week_start: inputs
                .week_start
                .get(t)
                .copied()
                .unwrap_or(m.last_week + chrono::Duration::weeks(t as i64 + 1)),
            mean: f.mean[t],
            variance: f.variance[t],
            lower: f.lower[t],
            median: f.median[t],
            upper: f.upper[t],
            mixture_mean: f.mixture_mean[t],
            mixture_variance: f.mixture_variance[t],
        })
        .collect();
    Ok(ForecastResponse {
        horizon,
        seed,
        interval: forecast::INTERVAL,
        steps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    #[serde(default)]
    pub name: Option<String>,
    /// Week-major spend, `weeks × channels` entries.
    pub spend: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AllocateRequest {
    /// Budget for every decision week.
    #[serde(default)]
    pub budget: Option<f64>,
    /// Per-week budgets; overrides `budget`.
    #[serde(default)]
    pub budgets: Option<Vec<f64>>,
    /// Per-channel bounds applied in every week; default `[0, budget]`.
    #[serde(default)]
    pub lower: BTreeMap<String, f64>,
    #[serde(default)]
    pub upper: BTreeMap<String, f64>,
    #[serde(default)]
    pub equality: bool,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_grid")]
    pub risk_grid: usize,
    #[serde(default)]
    pub variance_cap: Option<f64>,
    #[serde(default)]
    pub lambda: Option<f64>,
    /// Future rows from the week after training; regressors of weeks `1..=horizon` are used.
    #[serde(default)]
    pub future: Option<Vec<FutureRow>>,
    #[serde(default)]
    pub strategies: Vec<Strategy>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chosen {
    /// `expected`, `variance_cap` or `penalized`.
    pub objective: String,
    pub parameter: Option<f64>,
    pub allocation: Allocation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyRow {
    pub name: String,
    pub spend: Vec<f64>,
    pub expected_sales: f64,
    pub variance: f64,
    pub dominated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocateResponse {
    pub channels: Vec<String>,
    pub weeks: usize,
    pub constraints: Constraints,
    pub moments: MomentModel,
    pub frontier: Vec<FrontierPoint>,
    pub chosen: Chosen,
    pub strategies: Vec<StrategyRow>,
}

pub fn constraints(channels: &[String], req: &AllocateRequest) -> Result<Constraints> {
    let weeks = req.horizon;
    let budgets = match (&req.budgets, req.budget) {
        (Some(b), _) => b.clone(),
        (None, Some(b)) => vec![b; weeks],
        (None, None) => return Err(Error::Input("allocation needs `budget` or `budgets`".into())),
    };
    if budgets.len() != weeks {
        return Err(Error::Input(format!("{} budgets for {weeks} decision weeks", budgets.len())));
    }
    for name in req.lower.keys().chain(req.upper.keys()) {
        if !channels.contains(name) {
            return Err(Error::Input(format!("bound given for unknown channel `{name}`")));
        }
    }
    let mut lower = Vec::with_capacity(weeks * channels.len());
    let mut upper = Vec::with_capacity(weeks * channels.len());
    for b in &budgets {
        for c in channels {
            lower.push(req.lower.get(c).copied().unwrap_or(0.0));
            upper.push(req.upper.get(c).copied().unwrap_or(*b));
        }
    }
    Ok(Constraints {
        budgets,
        lower,
        upper,
        equality: req.equality,
    })
}

/// Regressor rows of the target weeks: future rows `1..=weeks`.
fn target_regressors(m: &FittedModel, future: Option<&Dataset>, weeks: usize) -> Result<Vec<Vec<f64>>> {
    if m.regressors().is_empty() {
        return Ok(Vec::new());
    }
    let inputs = future_inputs(m, future)?;
    if inputs.regressors.len() < weeks + 1 {
        return Err(Error::Input(format!(
            "allocating {weeks} week(s) needs {} future rows (the decision week plus each target week), got {}",
            weeks + 1,
            inputs.regressors.len()
        )));
    }
    Ok(inputs.regressors[1..=weeks].to_vec())
}

pub fn allocate(m: &FittedModel, req: &AllocateRequest) -> Result<AllocateResponse> {
    let future = match &req.future {
        Some(rows) => Some(future_frame(rows, m.last_week)?),
        None => None,
    };
    let regs = target_regressors(m, future.as_ref(), req.horizon)?;
    let mm = allocator::reduce(m, &regs, req.horizon)?;
    let cons = constraints(m.channels(), req)?;
    let frontier = allocator::pareto_frontier(&mm, &cons, req.risk_grid)?;
    let chosen = match (req.lambda, req.variance_cap) {
        (Some(l), _) => Chosen {
            objective: "penalized".into(),
            parameter: Some(l),
            allocation: allocator::maximize_penalized(&mm, &cons, l)?,
        },
        (None, Some(cap)) => Chosen {
            objective: "variance_cap".into(),
            parameter: Some(cap),
            allocation: allocator::maximize_expected(&mm, &cons, Some(cap))?,
        },
        (None, None) => Chosen {
            objective: "expected".into(),
            parameter: None,
            allocation: allocator::maximize_expected(&mm, &cons, None)?,
        },
    };
    let strategies = compare(&mm, &req.strategies)?;
    Ok(AllocateResponse {
        channels: m.channels().to_vec(),
        weeks: req.horizon,
        constraints: cons,
        moments: mm,
        frontier,
        chosen,
        strategies,
    })
}

/// Evaluate user strategies under the moment model and mark the dominated ones.
pub fn compare(mm: &MomentModel, strategies: &[Strategy]) -> Result<Vec<StrategyRow>> {
    let points = strategies
        .iter()
        .enumerate()
        .map(|(i, s)| {
            if s.spend.len() != mm.dim() {
                return Err(Error::Input(format!(
                    "strategy {i} has {} spends, expected {}",
                    s.spend.len(),
                    mm.dim()
                )));
            }
            if let Some(v) = s.spend.iter().find(|v| !(**v >= 0.0)) {
                return Err(Error::Input(format!("strategy {i} has negative or missing spend {v}")));
            }
            Ok(FrontierPoint {
                variance_cap: f64::NAN,
                expected_sales: mm.mean(&s.spend),
                variance: mm.variance(&s.spend),
                spend: s.spend.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let kept = allocator::filter_dominated(&points);
    let mut survivors = kept.iter().peekable();
    Ok(points
        .iter()
        .zip(strategies)
        .enumerate()
        .map(|(i, (p, s))| {
            // Survivors come back in input order, so one forward scan matches them up.
            let alive = survivors.peek().is_some_and(|k| k.spend == p.spend && k.variance == p.variance);
            if alive {
                survivors.next();
            }
            StrategyRow {
                name: s.name.clone().unwrap_or_else(|| format!("strategy {}", i + 1)),
                spend: s.spend.clone(),
                expected_sales: p.expected_sales,
                variance: p.variance,
                dominated: !alive,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub name: String,
    /// Decimated draws, one vector per chain.
    pub chains: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsResponse {
    pub report: DiagnosticsReport,
    pub inclusion: Vec<InclusionEntry>,
    pub coefficients: Vec<CoefficientRow>,
    pub traces: Vec<Trace>,
}

pub fn diagnose(m: &FittedModel, threshold: f64, max_points: usize) -> Result<DiagnosticsResponse> {
    Ok(DiagnosticsResponse {
        report: model::diagnostics_report(m, threshold)?,
        inclusion: m.inclusion_table(),
        coefficients: m.coefficient_table(),
        traces: m
            .traces()
            .into_iter()
            .map(|(name, chains)| Trace {
                name,
                chains: chains.iter().map(|c| diagnostics::decimate(c, max_points)).collect(),
            })
            .collect(),
    })
}

/// Three channels, six standard-normal regressors (three active), local level.
pub fn default_simulation(weeks: usize) -> SimulationConfig {
    let channels = ["tv", "radio", "online"];
    let regressors: Vec<String> = (1..=6).map(|i| format!("x{i}")).collect();
    SimulationConfig {
        spec: ModelSpec::standard(Variant::RF, channels.iter().map(|c| c.to_string()).collect(), regressors.clone()),
        params: ModelParams {
            delta: 0.3,
            channel_coefficients: vec![0.5, 0.3, 0.8],
            regression_coefficients: vec![1.0, -0.8, 0.6, 0.0, 0.0, 0.0],
            regression_inclusion: None,
            obs_variance: 1.0,
            goodwill_variance: 0.1,
            level_variance: 0.05,
            slope_variance: 0.0,
            seasonal_variance: 0.0,
        },
        weeks,
        start: NaiveDate::from_ymd_opt(2015, 1, 5).expect("valid date"),
        channels: channels
            .iter()
            .map(|c| ChannelGenerator {
                name: c.to_string(),
                mean: 5.0,
                sd: 3.0,
            })
            .collect(),
        regressors: regressors
            .into_iter()
            .map(|name| RegressorGenerator {
                name,
                event_probability: None,
            })
            .collect(),
        initial: DynamicState {
            goodwill: 10.0,
            level: 50.0,
            ..Default::default()
        },
    }
}

/// Resolve `--model`: an existing model directory, else an id under the store root.
pub fn resolve_model_dir(root: &Path, model: &str) -> Result<std::path::PathBuf> {
    let p = Path::new(model);
    if p.join("manifest.json").is_file() {
        return Ok(p.to_path_buf());
    }
    let dir = store::model_dir(root, model)?;
    if !dir.join("manifest.json").is_file() {
        return Err(Error::NotFound(format!("no fitted model `{model}`")));
    }
    Ok(dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(date: Option<NaiveDate>, pairs: &[(&str, f64)]) -> FutureRow {
        FutureRow {
            date,
            values: pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }

    #[test]
    fn future_rows_continue_weekly_after_training() {
        let last = NaiveDate::from_ymd_opt(2020, 1, 6).unwrap();
        let rows = [row(None, &[("u_tv", 1.0), ("x_hol", 0.0)]), row(None, &[("u_tv", 2.0), ("x_hol", 1.0)])];
        let d = future_frame(&rows, last).unwrap();
        assert_eq!(d.week_start, vec![NaiveDate::from_ymd_opt(2020, 1, 13).unwrap(), NaiveDate::from_ymd_opt(2020, 1, 20).unwrap()]);
        assert_eq!(d.channels[0].values, vec![1.0, 2.0]);
        assert_eq!(d.regressors[0].name, "hol");
        assert!(d.sales.iter().all(Option::is_none));
    }

    #[test]
    fn future_rows_must_share_columns() {
        let last = NaiveDate::from_ymd_opt(2020, 1, 6).unwrap();
        let rows = [row(None, &[("u_tv", 1.0)]), row(None, &[("u_tv", 1.0), ("u_radio", 2.0)])];
        assert!(matches!(future_frame(&rows, last), Err(Error::Input(_))));
        assert!(matches!(future_frame(&[row(None, &[("sales", 1.0)])], last), Err(Error::Input(_))));
    }

    #[test]
    fn bounds_default_to_the_weekly_budget() {
        let channels = vec!["a".to_string(), "b".to_string()];
        let req = AllocateRequest {
            budgets: Some(vec![4.0, 6.0]),
            horizon: 2,
            lower: [("b".to_string(), 1.0)].into(),
            ..Default::default()
        };
        let c = constraints(&channels, &req).unwrap();
        assert_eq!(c.lower, vec![0.0, 1.0, 0.0, 1.0]);
        assert_eq!(c.upper, vec![4.0, 4.0, 6.0, 6.0]);
        let bad = AllocateRequest {
            budget: Some(1.0),
            horizon: 1,
            upper: [("zz".to_string(), 1.0)].into(),
            ..Default::default()
        };
        assert!(constraints(&channels, &bad).is_err());
    }
}
