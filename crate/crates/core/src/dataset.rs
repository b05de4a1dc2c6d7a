//! Weekly sales panels: CSV ingest, validation, scaling, splitting and synthetic generation.

use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::blocks::{self, DynamicState, ModelParams, ModelSpec, ObservationFamily, StepInputs};
use crate::error::{Error, Result};
use crate::state_space::{self, Start, TimeSeq};

/// A named numeric column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub values: Vec<f64>,
}

impl Series {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            values,
        }
    }

    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub week_start: Vec<NaiveDate>,
    /// `None` marks a missing observation.
    pub sales: Vec<Option<f64>>,
    pub channels: Vec<Series>,
    pub regressors: Vec<Series>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.week_start.len()
    }

    pub fn is_empty(&self) -> bool {
        self.week_start.is_empty()
    }

    pub fn channel_names(&self) -> Vec<String> {
        self.channels.iter().map(|s| s.name.clone()).collect()
    }

    pub fn regressor_names(&self) -> Vec<String> {
        self.regressors.iter().map(|s| s.name.clone()).collect()
    }

    pub fn channel(&self, name: &str) -> Option<&Series> {
        self.channels.iter().find(|s| s.name == name)
    }

    pub fn regressor(&self, name: &str) -> Option<&Series> {
        self.regressors.iter().find(|s| s.name == name)
    }

    pub fn years(&self) -> Vec<i32> {
        self.week_start.iter().map(|d| d.year()).collect()
    }

    /// Check every structural invariant; warnings are logged for all-zero channels.
    pub fn validate(&self) -> Result<()> {
        let t = self.len();
        if t < 2 {
            return Err(Error::InsufficientData(format!("need at least 2 weeks, got {t}")));
        }
        if self.sales.len() != t {
            return Err(Error::Dimension(format!("sales has {} rows, dates have {t}", self.sales.len())));
        }
        for s in self.channels.iter().chain(&self.regressors) {
            if s.values.len() != t {
                return Err(Error::Dimension(format!("series `{}` has {} rows, expected {t}", s.name, s.values.len())));
            }
        }
        for w in 1..t {
            let gap = (self.week_start[w] - self.week_start[w - 1]).num_days();
            if gap != 7 {
                return Err(Error::Validation {
                    row: w,
                    column: "date".into(),
                    message: format!("dates must increase in 7-day steps, got a gap of {gap} days"),
                });
            }
        }
        for (row, v) in self.sales.iter().enumerate() {
            if let Some(v) = v {
                if !v.is_finite() {
                    return Err(Error::Validation {
                        row,
                        column: "sales".into(),
                        message: format!("non-finite value {v}"),
                    });
                }
            }
        }
        for s in &self.channels {
            for (row, &v) in s.values.iter().enumerate() {
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::Validation {
                        row,
                        column: format!("u_{}", s.name),
                        message: format!("channel spend must be finite and >= 0, got {v}"),
                    });
                }
            }
            if s.values.iter().all(|&v| v == 0.0) {
                log::warn!("channel `{}` has zero spend in every week; its coefficient is unidentifiable", s.name);
            }
        }
        for s in &self.regressors {
            for (row, &v) in s.values.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::Validation {
                        row,
                        column: format!("x_{}", s.name),
                        message: format!("non-finite value {v}"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Rows `range`, keeping every column.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Dataset {
        let cut = |s: &Series| Series::new(s.name.clone(), s.values[range.clone()].to_vec());
        Dataset {
            week_start: self.week_start[range.clone()].to_vec(),
            sales: self.sales[range.clone()].to_vec(),
            channels: self.channels.iter().map(cut).collect(),
            regressors: self.regressors.iter().map(cut).collect(),
        }
    }

    /// Append `other` below `self`; columns must match by name and order.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.channel_names() != other.channel_names() || self.regressor_names() != other.regressor_names() {
            return Err(Error::Schema("cannot concatenate datasets with different columns".into()));
        }
        let join = |a: &Series, b: &Series| {
            let mut v = a.values.clone();
            v.extend_from_slice(&b.values);
            Series::new(a.name.clone(), v)
        };
        let mut week_start = self.week_start.clone();
        week_start.extend_from_slice(&other.week_start);
        let mut sales = self.sales.clone();
        sales.extend_from_slice(&other.sales);
        Ok(Dataset {
            week_start,
            sales,
            channels: self.channels.iter().zip(&other.channels).map(|(a, b)| join(a, b)).collect(),
            regressors: self.regressors.iter().zip(&other.regressors).map(|(a, b)| join(a, b)).collect(),
        })
    }

    /// Inputs for system step `j = 0..T-1`: spend of row `j` and regressors of row `j+1`.
    pub fn step_inputs(&self, channels: &[String], regressors: &[String]) -> Result<Vec<StepInputs>> {
        let ch = self.lookup(&self.channels, channels, "u_")?;
        let rg = self.lookup(&self.regressors, regressors, "x_")?;
        Ok((0..self.len().saturating_sub(1))
            .map(|j| StepInputs {
                spend: ch.iter().map(|s| s.values[j]).collect(),
                regressors: rg.iter().map(|s| s.values[j + 1]).collect(),
            })
            .collect())
    }

    fn lookup<'a>(&'a self, pool: &'a [Series], names: &[String], prefix: &str) -> Result<Vec<&'a Series>> {
        names
            .iter()
            .map(|n| {
                pool.iter()
                    .find(|s| &s.name == n)
                    .ok_or_else(|| Error::Spec(format!("dataset has no column `{prefix}{n}`")))
            })
            .collect()
    }
}

fn parse_cell(raw: &str, row: usize, column: &str) -> Result<f64> {
    raw.trim().parse::<f64>().map_err(|_| Error::Validation {
        row,
        column: column.to_string(),
        message: format!("cannot parse `{raw}` as a number"),
    })
}

fn is_missing(raw: &str) -> bool {
    matches!(raw.trim(), "" | "NA" | "NaN" | "nan" | "null")
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(file)
}

/// Parse the `date,sales,u_<name>...,x_<name>...` layout.
pub fn read_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || headers.iter().all(|h| h.trim().is_empty()) {
        return Err(Error::Schema("missing header row".into()));
    }
    let mut date_col = None;
    let mut sales_col = None;
    let mut channel_cols = Vec::new();
    let mut regressor_cols = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        let h = h.trim();
        match h {
            "date" => date_col = Some(i),
            "sales" => sales_col = Some(i),
            _ if h.starts_with("u_") && h.len() > 2 => channel_cols.push((i, h[2..].to_string())),
            _ if h.starts_with("x_") && h.len() > 2 => regressor_cols.push((i, h[2..].to_string())),
            _ => return Err(Error::Schema(format!("unrecognised column `{h}`"))),
        }
    }
    let date_col = date_col.ok_or_else(|| Error::Schema("header has no `date` column".into()))?;
    let sales_col = sales_col.ok_or_else(|| Error::Schema("header has no `sales` column".into()))?;

    let mut week_start = Vec::new();
    let mut sales = Vec::new();
    let mut channels: Vec<Series> = channel_cols.iter().map(|(_, n)| Series::new(n.clone(), vec![])).collect();
    let mut regressors: Vec<Series> = regressor_cols.iter().map(|(_, n)| Series::new(n.clone(), vec![])).collect();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let date_raw = record.get(date_col).unwrap_or("").trim();
        let date = NaiveDate::parse_from_str(date_raw, "%Y-%m-%d").map_err(|_| Error::Validation {
            row,
            column: "date".into(),
            message: format!("`{date_raw}` is not an ISO-8601 date"),
        })?;
        if let Some(prev) = week_start.last() {
            if date <= *prev {
                return Err(Error::Validation {
                    row,
                    column: "date".into(),
                    message: "dates must be strictly increasing".into(),
                });
            }
        }
        week_start.push(date);
        let s = record.get(sales_col).unwrap_or("");
        sales.push(if is_missing(s) { None } else { Some(parse_cell(s, row, "sales")?) });
        for ((i, name), series) in channel_cols.iter().zip(channels.iter_mut()) {
            let col = format!("u_{name}");
            let v = parse_cell(record.get(*i).unwrap_or(""), row, &col)?;
            if v < 0.0 {
                return Err(Error::Validation {
                    row,
                    column: col,
                    message: format!("channel spend must be >= 0, got {v}"),
                });
            }
            series.values.push(v);
        }
        for ((i, name), series) in regressor_cols.iter().zip(regressors.iter_mut()) {
            series.values.push(parse_cell(record.get(*i).unwrap_or(""), row, &format!("x_{name}"))?);
        }
    }
    let d = Dataset {
        week_start,
        sales,
        channels,
        regressors,
    };
    d.validate()?;
    Ok(d)
}

pub fn write_csv<W: Write>(d: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["date".to_string(), "sales".to_string()];
    header.extend(d.channels.iter().map(|s| format!("u_{}", s.name)));
    header.extend(d.regressors.iter().map(|s| format!("x_{}", s.name)));
    wtr.write_record(&header)?;
    for t in 0..d.len() {
        let mut row = vec![
            d.week_start[t].format("%Y-%m-%d").to_string(),
            d.sales[t].map(|v| v.to_string()).unwrap_or_default(),
        ];
        row.extend(d.channels.iter().map(|s| s.values[t].to_string()));
        row.extend(d.regressors.iter().map(|s| s.values[t].to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_csv(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write_csv(d, std::fs::File::create(path.as_ref())?)
}

/// Affine map `z = (x - location) / scale` for one series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scale {
    pub location: f64,
    pub scale: f64,
    /// `false` when the series was left on its original scale (binary or constant).
    pub standardized: bool,
}

impl Scale {
    pub const IDENTITY: Scale = Scale {
        location: 0.0,
        scale: 1.0,
        standardized: false,
    };

    pub fn apply(&self, x: f64) -> f64 {
        (x - self.location) / self.scale
    }

    pub fn invert(&self, z: f64) -> f64 {
        z * self.scale + self.location
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub sales: Scale,
    pub channels: Vec<(String, Scale)>,
    pub regressors: Vec<(String, Scale)>,
    /// Denominator used for the sample standard deviation.
    pub ddof: usize,
}

fn mean_sd(values: impl Iterator<Item = f64> + Clone) -> (f64, f64, usize) {
    let n = values.clone().count();
    let mean = values.clone().sum::<f64>() / n as f64;
    let ss: f64 = values.map(|v| (v - mean).powi(2)).sum();
    let sd = if n > 1 { (ss / (n - 1) as f64).sqrt() } else { 0.0 };
    (mean, sd, n)
}

impl ScalingParams {
    /// Estimate scaling from `d`. Sales and continuous regressors are centred and
    /// scaled; binary regressors are kept as-is; channel spend is divided by its
    /// standard deviation without centring so that it stays non-negative.
    pub fn fit(d: &Dataset) -> Result<Self> {
        if d.len() < 2 {
            return Err(Error::InsufficientData(format!("need at least 2 rows to standardize, got {}", d.len())));
        }
        let observed = d.sales.iter().flatten().copied();
        if observed.clone().count() < 2 {
            return Err(Error::InsufficientData("need at least 2 observed sales values".into()));
        }
        let (m, sd, _) = mean_sd(observed);
        let sales = if sd > 0.0 {
            Scale {
                location: m,
                scale: sd,
                standardized: true,
            }
        } else {
            log::warn!("sales series is constant; left unscaled");
            Scale::IDENTITY
        };
        let channels = d
            .channels
            .iter()
            .map(|s| {
                let (_, sd, _) = mean_sd(s.values.iter().copied());
                let scale = if sd > 0.0 {
                    Scale {
                        location: 0.0,
                        scale: sd,
                        standardized: true,
                    }
                } else {
                    Scale::IDENTITY
                };
                (s.name.clone(), scale)
            })
            .collect();
        let regressors = d
            .regressors
            .iter()
            .map(|s| {
                let (m, sd, _) = mean_sd(s.values.iter().copied());
                let scale = if s.is_binary() || sd == 0.0 {
                    Scale::IDENTITY
                } else {
                    Scale {
                        location: m,
                        scale: sd,
                        standardized: true,
                    }
                };
                (s.name.clone(), scale)
            })
            .collect();
        Ok(Self {
            sales,
            channels,
            regressors,
            ddof: 1,
        })
    }

    pub fn channel(&self, name: &str) -> Scale {
        self.channels.iter().find(|(n, _)| n == name).map_or(Scale::IDENTITY, |(_, s)| *s)
    }

    pub fn regressor(&self, name: &str) -> Scale {
        self.regressors.iter().find(|(n, _)| n == name).map_or(Scale::IDENTITY, |(_, s)| *s)
    }

    pub fn apply(&self, d: &Dataset) -> Dataset {
        self.map(d, Scale::apply)
    }

    pub fn invert(&self, d: &Dataset) -> Dataset {
        self.map(d, Scale::invert)
    }

    fn map(&self, d: &Dataset, f: fn(&Scale, f64) -> f64) -> Dataset {
        let tr = |s: &Series, sc: Scale| Series::new(s.name.clone(), s.values.iter().map(|&v| f(&sc, v)).collect());
        Dataset {
            week_start: d.week_start.clone(),
            sales: d.sales.iter().map(|v| v.map(|v| f(&self.sales, v))).collect(),
            channels: d.channels.iter().map(|s| tr(s, self.channel(&s.name))).collect(),
            regressors: d.regressors.iter().map(|s| tr(s, self.regressor(&s.name))).collect(),
        }
    }
}

pub fn standardize(d: &Dataset) -> Result<(Dataset, ScalingParams)> {
    let params = ScalingParams::fit(d)?;
    Ok((params.apply(d), params))
}

pub fn destandardize(d: &Dataset, params: &ScalingParams) -> Dataset {
    params.invert(d)
}

/// Train on rows `0..train_end_index`, hold out the rest.
pub fn split(d: &Dataset, train_end_index: usize) -> Result<(Dataset, Dataset)> {
    let t = d.len();
    if train_end_index < 2 || train_end_index + 1 > t {
        return Err(Error::Bounds {
            index: train_end_index,
            message: format!("train end index must lie in [2, {}]", t.saturating_sub(1)),
        });
    }
    Ok((d.slice(0..train_end_index), d.slice(train_end_index..t)))
}

/// Fill in the channel and regressor lists of `spec` that were left empty.
///
/// Empty channels select every channel with at least 1% of total spend; empty
/// regressors select every regressor in the dataset.
pub fn resolve_spec(spec: &ModelSpec, d: &Dataset) -> Result<ModelSpec> {
    spec.validate()?;
    let mut out = spec.clone();
    for block in &mut out.blocks {
        match block {
            blocks::Block::NerloveArrow(na) if na.channels.is_empty() => {
                let totals: Vec<f64> = d.channels.iter().map(|s| s.values.iter().sum()).collect();
                let all: f64 = totals.iter().sum();
                na.channels = d
                    .channels
                    .iter()
                    .zip(&totals)
                    .filter(|(_, &t)| all > 0.0 && t / all >= 0.01)
                    .map(|(s, _)| s.name.clone())
                    .collect();
            }
            blocks::Block::Regression(r) if r.regressors.is_empty() => r.regressors = d.regressor_names(),
            _ => {}
        }
    }
    for c in &out.nerlove_arrow().channels {
        if d.channel(c).is_none() {
            return Err(Error::Spec(format!("nerlove_arrow block references missing column `u_{c}`")));
        }
    }
    if let Some(r) = out.regression() {
        for x in &r.regressors {
            if d.regressor(x).is_none() {
                return Err(Error::Spec(format!("regression block references missing column `x_{x}`")));
            }
        }
    }
    Ok(out)
}

/// Ground truth produced alongside a simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentRecord {
    /// Full state at every row (row 0 is the initial state).
    pub states: Vec<Vec<f64>>,
    pub goodwill: Vec<f64>,
    pub level: Vec<f64>,
    pub slope: Vec<f64>,
    pub seasonal: Vec<Vec<f64>>,
    pub observation_noise: Vec<f64>,
    /// Per-row latent variance scales (all 1 for Gaussian noise).
    pub noise_scales: Vec<f64>,
}

/// Iterate the model equations with known parameters.
///
/// `investments` and `regressors` give `T` rows each and must cover the
/// channels and regressors named in `spec`. Row 0 holds `initial`; every later
/// row is one transition driven by the previous row's spend.
pub fn simulate_dataset(
    spec: &ModelSpec,
    params: &ModelParams,
    investments: &[Series],
    regressors: &[Series],
    start: NaiveDate,
    initial: &DynamicState,
    seed: u64,
) -> Result<(Dataset, LatentRecord)> {
    spec.validate()?;
    params.validate(spec)?;
    let t_len = investments
        .first()
        .or(regressors.first())
        .map(|s| s.values.len())
        .ok_or_else(|| Error::Input("need at least one input series to fix the length".into()))?;
    if t_len < 2 {
        return Err(Error::InsufficientData(format!("need at least 2 weeks, got {t_len}")));
    }
    let week_start: Vec<NaiveDate> = (0..t_len).map(|i| start + chrono::Duration::weeks(i as i64)).collect();
    let mut data = Dataset {
        week_start,
        sales: vec![None; t_len],
        channels: investments.to_vec(),
        regressors: regressors.to_vec(),
    };
    data.validate()?;
    let spec = resolve_spec(spec, &data)?;
    let chans = spec.nerlove_arrow().channels.clone();
    let regs = spec.regression().map(|r| r.regressors.clone()).unwrap_or_default();
    let inputs = data.step_inputs(&chans, &regs)?;
    let sys = blocks::compile(&spec, &inputs, params)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scales: Vec<f64> = match spec.observation {
        ObservationFamily::Gaussian => vec![1.0; t_len],
        ObservationFamily::StudentT { nu } => {
            // λ ~ IG(ν/2, ν/2) so that √λ·N(0, τ²) is t_ν(0, τ²).
            rng.set_stream(1);
            let gamma = Gamma::new(nu / 2.0, 2.0 / nu).map_err(|e| Error::Config(e.to_string()))?;
            (0..t_len).map(|_| 1.0 / gamma.sample(&mut rng)).collect()
        }
    };
    let sys = sys.with_obs_var(TimeSeq::Varying(scales[1..].iter().map(|l| l * params.obs_variance).collect()))?;
    rng.set_stream(0);
    let theta0 = blocks::full_state(&spec, params, initial);
    let path = state_space::simulate_forward(&sys, &Start::Fixed(theta0.clone()), &mut rng)?;

    // Row 0 is observed through the same equation using its own regressors.
    rng.set_stream(2);
    let row0_noise = if params.obs_variance > 0.0 {
        Normal::new(0.0, (scales[0] * params.obs_variance).sqrt())
            .map_err(|e| Error::Domain(e.to_string()))?
            .sample(&mut rng)
    } else {
        0.0
    };
    let row0_regs: Vec<f64> = regs.iter().map(|n| data.regressor(n).expect("resolved").values[0]).collect();
    let f0 = observation_row(&spec, params, &row0_regs);
    let y0 = f0.dot(&theta0) + row0_noise;

    let layout = spec.layout();
    let mut sales = vec![Some(y0)];
    sales.extend(path.observations.iter().map(|&y| Some(y)));
    data.sales = sales;
    let mut noise = vec![row0_noise];
    noise.extend_from_slice(&path.observation_noise);
    let get = |i: Option<usize>| -> Vec<f64> { i.map_or_else(Vec::new, |i| path.states.iter().map(|s| s[i]).collect()) };
    let record = LatentRecord {
        states: path.states.iter().map(|s| s.iter().copied().collect()).collect(),
        goodwill: path.states.iter().map(|s| s[layout.goodwill]).collect(),
        level: get(layout.level),
        slope: get(layout.slope),
        seasonal: layout
            .seasonal
            .as_ref()
            .map_or_else(Vec::new, |r| path.states.iter().map(|s| s.rows(r.start, r.len()).iter().copied().collect()).collect()),
        observation_noise: noise,
        noise_scales: scales,
    };
    Ok((data, record))
}

fn observation_row(spec: &ModelSpec, params: &ModelParams, regs: &[f64]) -> DVector<f64> {
    let layout = spec.layout();
    let mut f = DVector::zeros(layout.dim);
    f[layout.goodwill] = 1.0;
    if let Some(l) = layout.level {
        f[l] = 1.0;
    }
    if let Some(r) = &layout.seasonal {
        f[r.start] = 1.0;
    }
    if let Some(r) = &layout.regression {
        for (i, j) in r.clone().enumerate() {
            let inc = params.regression_inclusion.as_ref().map_or(true, |g| g[i]);
            f[j] = if inc { regs[i] } else { 0.0 };
        }
    }
    f
}

/// Synthetic input generator used by the CLI `simulate` command and the tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub spec: ModelSpec,
    pub params: ModelParams,
    pub weeks: usize,
    #[serde(default = "default_start")]
    pub start: NaiveDate,
    /// Per-channel spend drawn as `|N(mean, sd)|`.
    pub channels: Vec<ChannelGenerator>,
    /// Regressors drawn as `N(0, 1)` or, for event flags, `Bernoulli(p)`.
    pub regressors: Vec<RegressorGenerator>,
    #[serde(default)]
    pub initial: DynamicState,
}

fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2010, 1, 4).expect("valid date")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelGenerator {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorGenerator {
    pub name: String,
    /// `Some(p)` generates a 0/1 event flag with probability `p`.
    #[serde(default)]
    pub event_probability: Option<f64>,
}

impl SimulationConfig {
    pub fn inputs(&self, seed: u64) -> Result<(Vec<Series>, Vec<Series>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(7);
        let mut channels = Vec::new();
        for c in &self.channels {
            let dist = Normal::new(c.mean, c.sd).map_err(|e| Error::Config(format!("channel `{}`: {e}", c.name)))?;
            channels.push(Series::new(c.name.clone(), (0..self.weeks).map(|_| dist.sample(&mut rng).abs()).collect()));
        }
        let mut regressors = Vec::new();
        for r in &self.regressors {
            let values = match r.event_probability {
                Some(p) => {
                    let b = rand_distr::Bernoulli::new(p).map_err(|e| Error::Config(format!("regressor `{}`: {e}", r.name)))?;
                    (0..self.weeks).map(|_| if b.sample(&mut rng) { 1.0 } else { 0.0 }).collect()
                }
                None => (0..self.weeks).map(|_| rand_distr::StandardNormal.sample(&mut rng)).collect(),
            };
            regressors.push(Series::new(r.name.clone(), values));
        }
        Ok((channels, regressors))
    }

    pub fn run(&self, seed: u64) -> Result<(Dataset, LatentRecord)> {
        let (channels, regressors) = self.inputs(seed)?;
        simulate_dataset(&self.spec, &self.params, &channels, &regressors, self.start, &self.initial, seed)
    }
}
