//! Structural building blocks and their superposition into one state-space system.
//!
//! Full state layout, in block order:
//!
//! * Nerlove-Arrow: `[A_t, q_1, ..., q_k]` with the lagged spend in the first row of `G_t`
//! * local level: `[μ_t]`; local linear trend: `[μ_t, ν_t]`
//! * seasonal (dummy form): `[s_t, s_{t-1}, ..., s_{t-S+2}]`
//! * regression: `[β_1, ..., β_p]`, entering through `X_t` in the observation row

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state_space::{GaussianBelief, StateSpaceSystem, TimeSeq};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NerloveArrowBlock {
    /// Channel names (without the `u_` prefix). Empty means "select by spend share".
    #[serde(default)]
    pub channels: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendKind {
    LocalLevel,
    LocalLinearTrend,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendBlock {
    #[serde(default = "default_trend_kind")]
    pub kind: TrendKind,
}

fn default_trend_kind() -> TrendKind {
    TrendKind::LocalLevel
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonalBlock {
    #[serde(default = "default_seasons")]
    pub seasons: usize,
}

fn default_seasons() -> usize {
    52
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionBlock {
    /// Regressor names (without the `x_` prefix). Empty means "all regressors".
    #[serde(default)]
    pub regressors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Block {
    NerloveArrow(NerloveArrowBlock),
    Trend(TrendBlock),
    Seasonal(SeasonalBlock),
    Regression(RegressionBlock),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ObservationFamily {
    Gaussian,
    StudentT { nu: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// Goodwill plus trend, no external regressors.
    B,
    /// Regression with every coefficient treated alike by the inclusion prior.
    RA,
    /// Regression with channel coefficients forced into the model.
    RF,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub blocks: Vec<Block>,
    #[serde(default = "default_family")]
    pub observation: ObservationFamily,
    pub variant: Variant,
}

fn default_family() -> ObservationFamily {
    ObservationFamily::Gaussian
}

impl ModelSpec {
    /// Goodwill + local level + optional regression, the default composition.
    pub fn standard(variant: Variant, channels: Vec<String>, regressors: Vec<String>) -> Self {
        let mut blocks = vec![
            Block::NerloveArrow(NerloveArrowBlock { channels }),
            Block::Trend(TrendBlock {
                kind: TrendKind::LocalLevel,
            }),
        ];
        if variant != Variant::B {
            blocks.push(Block::Regression(RegressionBlock { regressors }));
        }
        Self {
            blocks,
            observation: ObservationFamily::Gaussian,
            variant,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let count = |f: fn(&Block) -> bool| self.blocks.iter().filter(|b| f(b)).count();
        let na = count(|b| matches!(b, Block::NerloveArrow(_)));
        if na != 1 {
            return Err(Error::Spec(format!("expected exactly one nerlove_arrow block, found {na}")));
        }
        for (name, n) in [
            ("trend", count(|b| matches!(b, Block::Trend(_)))),
            ("seasonal", count(|b| matches!(b, Block::Seasonal(_)))),
            ("regression", count(|b| matches!(b, Block::Regression(_)))),
        ] {
            if n > 1 {
                return Err(Error::Spec(format!("at most one {name} block is allowed, found {n}")));
            }
        }
        if self.variant == Variant::B && self.regression().is_some() {
            return Err(Error::Spec("variant B must not contain a regression block".into()));
        }
        if let Some(s) = self.seasonal() {
            if s.seasons < 2 {
                return Err(Error::Spec(format!("seasonal block needs at least 2 seasons, got {}", s.seasons)));
            }
        }
        if let ObservationFamily::StudentT { nu } = self.observation {
            if !(nu > 1.0) {
                return Err(Error::Config(format!("student-t degrees of freedom must exceed 1, got {nu}")));
            }
        }
        Ok(())
    }

    pub fn nerlove_arrow(&self) -> &NerloveArrowBlock {
        self.blocks
            .iter()
            .find_map(|b| match b {
                Block::NerloveArrow(na) => Some(na),
                _ => None,
            })
            .expect("validated spec has a nerlove_arrow block")
    }

    pub fn trend(&self) -> Option<&TrendBlock> {
        self.blocks.iter().find_map(|b| match b {
            Block::Trend(t) => Some(t),
            _ => None,
        })
    }

    pub fn seasonal(&self) -> Option<&SeasonalBlock> {
        self.blocks.iter().find_map(|b| match b {
            Block::Seasonal(s) => Some(s),
            _ => None,
        })
    }

    pub fn regression(&self) -> Option<&RegressionBlock> {
        self.blocks.iter().find_map(|b| match b {
            Block::Regression(r) => Some(r),
            _ => None,
        })
    }

    pub fn channel_count(&self) -> usize {
        self.nerlove_arrow().channels.len()
    }

    pub fn regressor_count(&self) -> usize {
        self.regression().map_or(0, |r| r.regressors.len())
    }

    pub fn layout(&self) -> StateLayout {
        StateLayout::new(self)
    }
}

/// Where each structural component lives in the full state vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateLayout {
    pub goodwill: usize,
    pub channels: std::ops::Range<usize>,
    pub level: Option<usize>,
    pub slope: Option<usize>,
    pub seasonal: Option<std::ops::Range<usize>>,
    pub regression: Option<std::ops::Range<usize>>,
    pub dim: usize,
}

impl StateLayout {
    fn new(spec: &ModelSpec) -> Self {
        let mut layout = StateLayout {
            goodwill: 0,
            channels: 0..0,
            level: None,
            slope: None,
            seasonal: None,
            regression: None,
            dim: 0,
        };
        let mut offset = 0;
        for block in &spec.blocks {
            match block {
                Block::NerloveArrow(na) => {
                    layout.goodwill = offset;
                    layout.channels = offset + 1..offset + 1 + na.channels.len();
                    offset += 1 + na.channels.len();
                }
                Block::Trend(t) => {
                    layout.level = Some(offset);
                    offset += 1;
                    if t.kind == TrendKind::LocalLinearTrend {
                        layout.slope = Some(offset);
                        offset += 1;
                    }
                }
                Block::Seasonal(s) => {
                    layout.seasonal = Some(offset..offset + s.seasons - 1);
                    offset += s.seasons - 1;
                }
                Block::Regression(r) => {
                    layout.regression = Some(offset..offset + r.regressors.len());
                    offset += r.regressors.len();
                }
            }
        }
        layout.dim = offset;
        layout
    }
}

/// Parameter values a system is compiled with (model units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub delta: f64,
    pub channel_coefficients: Vec<f64>,
    pub regression_coefficients: Vec<f64>,
    /// `None` includes every regressor; `Some(γ)` zeroes the observation column of excluded ones.
    #[serde(default)]
    pub regression_inclusion: Option<Vec<bool>>,
    /// `V` for Gaussian errors, `τ²` for student-t errors.
    pub obs_variance: f64,
    pub goodwill_variance: f64,
    #[serde(default)]
    pub level_variance: f64,
    #[serde(default)]
    pub slope_variance: f64,
    #[serde(default)]
    pub seasonal_variance: f64,
}

impl ModelParams {
    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(Error::Domain(format!("forgetting rate {} is outside [0, 1]", self.delta)));
        }
        if self.channel_coefficients.len() != spec.channel_count() {
            return Err(Error::Dimension(format!(
                "{} channel coefficients for {} channels",
                self.channel_coefficients.len(),
                spec.channel_count()
            )));
        }
        if self.regression_coefficients.len() != spec.regressor_count() {
            return Err(Error::Dimension(format!(
                "{} regression coefficients for {} regressors",
                self.regression_coefficients.len(),
                spec.regressor_count()
            )));
        }
        for (name, v) in [
            ("observation", self.obs_variance),
            ("goodwill", self.goodwill_variance),
            ("level", self.level_variance),
            ("slope", self.slope_variance),
            ("seasonal", self.seasonal_variance),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!("{name} variance {v} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

/// Exogenous inputs for one step: the spend driving this step's goodwill
/// transition (`u_{t-1}`) and this step's regressor row `X_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepInputs {
    pub spend: Vec<f64>,
    pub regressors: Vec<f64>,
}

/// Deterministic goodwill recursion `(1-δ) A_{t-1} + Σ q_i u_{i,t-1}`.
pub fn koyck_step(a_prev: f64, delta: f64, q: &[f64], u_prev: &[f64]) -> Result<f64> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::Domain(format!("forgetting rate {delta} is outside [0, 1]")));
    }
    if q.len() != u_prev.len() {
        return Err(Error::Dimension(format!("{} coefficients for {} spends", q.len(), u_prev.len())));
    }
    Ok((1.0 - delta) * a_prev + q.iter().zip(u_prev).map(|(a, b)| a * b).sum::<f64>())
}

/// Euler discretization of `dA/dt = q u(t) - δ A(t)` with step `dt`.
///
/// Returns the discrete `(δ, q)` pair for `A_t = (1-δ) A_{t-1} + q u_{t-1}`.
pub fn discretize_nerlove_arrow(effectiveness_rate: f64, decay_rate: f64, dt: f64) -> Result<(f64, f64)> {
    let delta = decay_rate * dt;
    if !(0.0..=1.0).contains(&delta) || dt <= 0.0 {
        return Err(Error::Domain(format!(
            "decay rate {decay_rate} with step {dt} gives a discrete forgetting rate outside [0, 1]"
        )));
    }
    Ok((delta, effectiveness_rate * dt))
}

fn check_inputs(spec: &ModelSpec, inputs: &[StepInputs]) -> Result<()> {
    let (k, p) = (spec.channel_count(), spec.regressor_count());
    for (t, step) in inputs.iter().enumerate() {
        if step.spend.len() != k {
            return Err(Error::Spec(format!(
                "step {t}: nerlove_arrow block needs {k} channel series ({}), got {}",
                spec.nerlove_arrow().channels.join(", "),
                step.spend.len()
            )));
        }
        if step.regressors.len() < p {
            let names = spec.regression().map(|r| r.regressors.join(", ")).unwrap_or_default();
            return Err(Error::Spec(format!(
                "step {t}: regression block needs {p} regressor series ({names}), got {}",
                step.regressors.len()
            )));
        }
    }
    Ok(())
}

/// Block-diagonal superposition of every block into the full system.
pub fn compile(spec: &ModelSpec, inputs: &[StepInputs], params: &ModelParams) -> Result<StateSpaceSystem> {
    spec.validate()?;
    params.validate(spec)?;
    check_inputs(spec, inputs)?;
    let layout = spec.layout();
    let m = layout.dim;
    let n = inputs.len();
    if n == 0 {
        return Err(Error::InsufficientData("cannot compile a system with zero steps".into()));
    }

    // Disturbances: one per dynamic state.
    let mut loading_cols = Vec::new();
    let mut variances = Vec::new();
    loading_cols.push(layout.goodwill);
    variances.push(params.goodwill_variance);
    if let Some(l) = layout.level {
        loading_cols.push(l);
        variances.push(params.level_variance);
    }
    if let Some(s) = layout.slope {
        loading_cols.push(s);
        variances.push(params.slope_variance);
    }
    if let Some(r) = &layout.seasonal {
        loading_cols.push(r.start);
        variances.push(params.seasonal_variance);
    }
    let g = loading_cols.len();
    let mut loading = DMatrix::zeros(m, g);
    for (j, &row) in loading_cols.iter().enumerate() {
        loading[(row, j)] = 1.0;
    }
    let state_cov = DMatrix::from_diagonal(&DVector::from_vec(variances));

    let mut base = DMatrix::<f64>::zeros(m, m);
    let mut base_f = DVector::<f64>::zeros(m);
    base[(layout.goodwill, layout.goodwill)] = 1.0 - params.delta;
    base_f[layout.goodwill] = 1.0;
    for c in layout.channels.clone() {
        base[(c, c)] = 1.0;
    }
    if let Some(l) = layout.level {
        base[(l, l)] = 1.0;
        base_f[l] = 1.0;
        if let Some(s) = layout.slope {
            base[(l, s)] = 1.0;
            base[(s, s)] = 1.0;
        }
    }
    if let Some(r) = &layout.seasonal {
        for j in r.clone() {
            base[(r.start, j)] = -1.0;
        }
        for j in r.start + 1..r.end {
            base[(j, j - 1)] = 1.0;
        }
        base_f[r.start] = 1.0;
    }
    if let Some(r) = &layout.regression {
        for j in r.clone() {
            base[(j, j)] = 1.0;
        }
    }

    let mut transitions = Vec::with_capacity(n);
    let mut observations = Vec::with_capacity(n);
    for step in inputs {
        let mut gt = base.clone();
        for (i, c) in layout.channels.clone().enumerate() {
            gt[(layout.goodwill, c)] = step.spend[i];
        }
        transitions.push(gt);
        let mut ft = base_f.clone();
        if let Some(r) = &layout.regression {
            for (i, j) in r.clone().enumerate() {
                let included = params
                    .regression_inclusion
                    .as_ref()
                    .map_or(true, |g| g[i]);
                ft[j] = if included { step.regressors[i] } else { 0.0 };
            }
        }
        observations.push(ft);
    }
    StateSpaceSystem::new(
        n,
        TimeSeq::Varying(observations),
        TimeSeq::Varying(transitions),
        TimeSeq::Constant(loading),
        TimeSeq::Constant(state_cov),
        TimeSeq::Constant(params.obs_variance),
    )
}

/// Full state vector with the static coefficients filled in from `params` and
/// the dynamic components taken from `dynamic` (goodwill, level, slope, seasonal).
pub fn full_state(spec: &ModelSpec, params: &ModelParams, dynamic: &DynamicState) -> DVector<f64> {
    let layout = spec.layout();
    let mut s = DVector::zeros(layout.dim);
    s[layout.goodwill] = dynamic.goodwill;
    for (i, c) in layout.channels.clone().enumerate() {
        s[c] = params.channel_coefficients[i];
    }
    if let Some(l) = layout.level {
        s[l] = dynamic.level;
    }
    if let Some(sl) = layout.slope {
        s[sl] = dynamic.slope;
    }
    if let Some(r) = &layout.seasonal {
        for (i, j) in r.clone().enumerate() {
            s[j] = dynamic.seasonal.get(i).copied().unwrap_or(0.0);
        }
    }
    if let Some(r) = &layout.regression {
        for (i, j) in r.clone().enumerate() {
            s[j] = params.regression_coefficients[i];
        }
    }
    s
}

/// Values of the dynamic (time-varying) parts of the state at one time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DynamicState {
    pub goodwill: f64,
    #[serde(default)]
    pub level: f64,
    #[serde(default)]
    pub slope: f64,
    #[serde(default)]
    pub seasonal: Vec<f64>,
}

/// Prior over the full state: dynamic components diffuse, static coefficients
/// pinned at their `params` values.
pub fn initial_belief(spec: &ModelSpec, params: &ModelParams, diffuse_variance: f64) -> GaussianBelief {
    let layout = spec.layout();
    let mean = full_state(spec, params, &DynamicState::default());
    let mut cov = DMatrix::zeros(layout.dim, layout.dim);
    cov[(layout.goodwill, layout.goodwill)] = diffuse_variance;
    for i in [layout.level, layout.slope].into_iter().flatten() {
        cov[(i, i)] = diffuse_variance;
    }
    if let Some(r) = &layout.seasonal {
        for j in r.clone() {
            cov[(j, j)] = diffuse_variance;
        }
    }
    GaussianBelief::new(mean, cov)
}

/// Layout of the reduced system used inside the sampler: the goodwill
/// remainder `A_t - q'Z_t` followed by trend and seasonal states, with the
/// channel and regression effects carried outside the state.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicLayout {
    pub remainder: usize,
    pub level: Option<usize>,
    pub slope: Option<usize>,
    pub seasonal: Option<std::ops::Range<usize>>,
    pub dim: usize,
}

impl DynamicLayout {
    pub fn new(spec: &ModelSpec) -> Self {
        let mut out = DynamicLayout {
            remainder: 0,
            level: None,
            slope: None,
            seasonal: None,
            dim: 0,
        };
        let mut offset = 0;
        for block in &spec.blocks {
            match block {
                Block::NerloveArrow(_) => {
                    out.remainder = offset;
                    offset += 1;
                }
                Block::Trend(t) => {
                    out.level = Some(offset);
                    offset += 1;
                    if t.kind == TrendKind::LocalLinearTrend {
                        out.slope = Some(offset);
                        offset += 1;
                    }
                }
                Block::Seasonal(s) => {
                    out.seasonal = Some(offset..offset + s.seasons - 1);
                    offset += s.seasons - 1;
                }
                Block::Regression(_) => {}
            }
        }
        out.dim = offset;
        out
    }

    pub fn dynamic_state(&self, v: &DVector<f64>, goodwill: f64) -> DynamicState {
        DynamicState {
            goodwill,
            level: self.level.map_or(0.0, |i| v[i]),
            slope: self.slope.map_or(0.0, |i| v[i]),
            seasonal: self
                .seasonal
                .as_ref()
                .map_or_else(Vec::new, |r| r.clone().map(|i| v[i]).collect()),
        }
    }

    /// Sum of the dynamic contributions `F θ_t` to the observation.
    pub fn observed(&self, v: &DVector<f64>) -> f64 {
        let mut s = v[self.remainder];
        if let Some(l) = self.level {
            s += v[l];
        }
        if let Some(r) = &self.seasonal {
            s += v[r.start];
        }
        s
    }
}

/// Time-invariant reduced system over [`DynamicLayout`].
pub fn compile_dynamic(spec: &ModelSpec, len: usize, params: &ModelParams) -> Result<StateSpaceSystem> {
    let lay = DynamicLayout::new(spec);
    let m = lay.dim;
    let mut g = DMatrix::zeros(m, m);
    let mut f = DVector::zeros(m);
    let mut variances = vec![params.goodwill_variance];
    let mut cols = vec![lay.remainder];
    g[(lay.remainder, lay.remainder)] = 1.0 - params.delta;
    f[lay.remainder] = 1.0;
    if let Some(l) = lay.level {
        g[(l, l)] = 1.0;
        f[l] = 1.0;
        cols.push(l);
        variances.push(params.level_variance);
        if let Some(s) = lay.slope {
            g[(l, s)] = 1.0;
            g[(s, s)] = 1.0;
            cols.push(s);
            variances.push(params.slope_variance);
        }
    }
    if let Some(r) = &lay.seasonal {
        for j in r.clone() {
            g[(r.start, j)] = -1.0;
        }
        for j in r.start + 1..r.end {
            g[(j, j - 1)] = 1.0;
        }
        f[r.start] = 1.0;
        cols.push(r.start);
        variances.push(params.seasonal_variance);
    }
    let mut h = DMatrix::zeros(m, cols.len());
    for (j, &row) in cols.iter().enumerate() {
        h[(row, j)] = 1.0;
    }
    StateSpaceSystem::new(
        len,
        TimeSeq::Constant(f),
        TimeSeq::Constant(g),
        TimeSeq::Constant(h),
        TimeSeq::Constant(DMatrix::from_diagonal(&DVector::from_vec(variances))),
        TimeSeq::Constant(params.obs_variance),
    )
}

/// Outcome of checking a seasonal state path against the dummy-seasonal identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonalReport {
    /// Effect implied for the season not carried in the state, at the last time.
    pub implied_effect: f64,
    /// Largest `|Σ_{j<S} s_{t-j}|`; each such sum equals one seasonal disturbance.
    pub max_abs_season_sum: f64,
    /// Root mean square of the season sums.
    pub rms_season_sum: f64,
    /// Largest deviation from exact `S`-periodicity of the current effect.
    pub max_periodicity_gap: f64,
    /// `(mean(e²)/σ² - 1) / sqrt(2/n)`; `None` when the noise variance is zero.
    pub z_score: Option<f64>,
    pub consistent: bool,
}

/// Verify that season sums over any `S` consecutive effects behave like
/// independent `N(0, σ²)` disturbances (exactly zero without noise).
pub fn seasonal_pattern_check(block: &SeasonalBlock, path: &[Vec<f64>], noise_variance: f64) -> SeasonalReport {
    let s = block.seasons;
    let current: Vec<f64> = path.iter().map(|st| st.first().copied().unwrap_or(0.0)).collect();
    let implied_effect = path.last().map_or(0.0, |st| -st.iter().sum::<f64>());
    let mut sums = Vec::new();
    // State at time t carries s_t..s_{t-S+2}; adding the previous state's
    // effects gives the full S-window.
    for t in 1..path.len() {
        let window: f64 = path[t][0] + path[t - 1].iter().sum::<f64>();
        sums.push(window);
    }
    let mut gap = 0.0_f64;
    for t in s..current.len() {
        gap = gap.max((current[t] - current[t - s]).abs());
    }
    let max_abs = sums.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let mean_sq = if sums.is_empty() {
        0.0
    } else {
        sums.iter().map(|v| v * v).sum::<f64>() / sums.len() as f64
    };
    let (z_score, consistent) = if noise_variance > 0.0 && !sums.is_empty() {
        let z = (mean_sq / noise_variance - 1.0) / (2.0 / sums.len() as f64).sqrt();
        (Some(z), z.abs() <= 3.0)
    } else {
        (None, max_abs <= 1e-9)
    };
    SeasonalReport {
        implied_effect,
        max_abs_season_sum: max_abs,
        rms_season_sum: mean_sq.sqrt(),
        max_periodicity_gap: gap,
        z_score,
        consistent,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(delta: f64, q: Vec<f64>, beta: Vec<f64>) -> ModelParams {
        ModelParams {
            delta,
            channel_coefficients: q,
            regression_coefficients: beta,
            regression_inclusion: None,
            obs_variance: 0.0,
            goodwill_variance: 0.0,
            level_variance: 0.0,
            slope_variance: 0.0,
            seasonal_variance: 0.0,
        }
    }

    fn na_only(k: usize) -> ModelSpec {
        ModelSpec {
            blocks: vec![Block::NerloveArrow(NerloveArrowBlock {
                channels: (0..k).map(|i| format!("c{i}")).collect(),
            })],
            observation: ObservationFamily::Gaussian,
            variant: Variant::B,
        }
    }

    #[test]
    fn goodwill_row_carries_lagged_spend() {
        let spec = na_only(2);
        let inputs = vec![StepInputs {
            spend: vec![5.0, 7.0],
            regressors: vec![],
        }];
        let sys = compile(&spec, &inputs, &params(0.3, vec![1.0, 1.0], vec![])).unwrap();
        let g = sys.transition(0);
        assert!((g[(0, 0)] - 0.7).abs() < 1e-15);
        assert_eq!(g[(0, 1)], 5.0);
        assert_eq!(g[(0, 2)], 7.0);
        assert_eq!(g[(1, 1)], 1.0);
        assert_eq!(g[(2, 2)], 1.0);
        assert_eq!(g[(1, 0)], 0.0);
    }

    #[test]
    fn superposition_is_block_diagonal() {
        // NA with 2 channels (dim 3) + local linear trend (dim 2).
        let spec = ModelSpec {
            blocks: vec![
                Block::NerloveArrow(NerloveArrowBlock {
                    channels: vec!["a".into(), "b".into()],
                }),
                Block::Trend(TrendBlock {
                    kind: TrendKind::LocalLinearTrend,
                }),
            ],
            observation: ObservationFamily::Gaussian,
            variant: Variant::B,
        };
        let inputs = vec![StepInputs {
            spend: vec![1.0, 2.0],
            regressors: vec![],
        }];
        let sys = compile(&spec, &inputs, &params(0.5, vec![0.0, 0.0], vec![])).unwrap();
        let g = sys.transition(0);
        assert_eq!(g.nrows(), 5);
        for i in 0..3 {
            for j in 3..5 {
                assert_eq!(g[(i, j)], 0.0);
                assert_eq!(g[(j, i)], 0.0);
            }
        }
    }

    #[test]
    fn koyck_examples() {
        assert_eq!(koyck_step(0.0, 0.4, &[1.0], &[0.0]).unwrap(), 0.0);
        assert_eq!(koyck_step(3.0, 1.0, &[2.0], &[3.0]).unwrap(), 6.0);
        assert!((koyck_step(10.0, 0.2, &[0.5, 1.5], &[2.0, 4.0]).unwrap() - 15.0).abs() < 1e-12);
        assert!(matches!(koyck_step(1.0, 0.2, &[1.0], &[1.0, 2.0]), Err(Error::Dimension(_))));
        assert!(matches!(koyck_step(1.0, 1.2, &[1.0], &[1.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn variant_b_rejects_regression() {
        let mut spec = ModelSpec::standard(Variant::RA, vec!["tv".into()], vec!["hols".into()]);
        spec.variant = Variant::B;
        assert!(matches!(spec.validate(), Err(Error::Spec(_))));
    }

    #[test]
    fn missing_series_is_named() {
        let spec = ModelSpec::standard(Variant::RA, vec!["tv".into()], vec!["hols".into(), "temp".into()]);
        let inputs = vec![StepInputs {
            spend: vec![1.0],
            regressors: vec![0.0],
        }];
        let err = compile(&spec, &inputs, &params(0.5, vec![1.0], vec![0.0, 0.0])).unwrap_err();
        assert!(err.to_string().contains("temp"));
    }

    #[test]
    fn excluded_regressor_has_zero_column() {
        let spec = ModelSpec::standard(Variant::RA, vec!["tv".into()], vec!["a".into(), "b".into()]);
        let inputs = vec![StepInputs {
            spend: vec![1.0],
            regressors: vec![3.0, 4.0],
        }];
        let mut p = params(0.5, vec![1.0], vec![0.0, 2.0]);
        p.regression_inclusion = Some(vec![false, true]);
        let sys = compile(&spec, &inputs, &p).unwrap();
        let r = spec.layout().regression.unwrap();
        assert_eq!(sys.observation(0)[r.start], 0.0);
        assert_eq!(sys.observation(0)[r.start + 1], 4.0);
    }

    #[test]
    fn seasonal_identity_in_the_noiseless_case() {
        let block = SeasonalBlock { seasons: 4 };
        let report = seasonal_pattern_check(&block, &[vec![1.0, -1.0, 2.0]], 0.0);
        assert_eq!(report.implied_effect, -2.0);

        // Iterate the dummy recursion and check exact periodicity.
        let mut path = vec![vec![1.0, -1.0, 2.0]];
        for _ in 0..20 {
            let prev = path.last().unwrap().clone();
            let next = vec![-prev.iter().sum::<f64>(), prev[0], prev[1]];
            path.push(next);
        }
        let report = seasonal_pattern_check(&block, &path, 0.0);
        assert_eq!(report.max_abs_season_sum, 0.0);
        assert_eq!(report.max_periodicity_gap, 0.0);
        assert!(report.consistent);
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = ModelSpec {
            blocks: vec![
                Block::NerloveArrow(NerloveArrowBlock {
                    channels: vec!["tv".into()],
                }),
                Block::Trend(TrendBlock {
                    kind: TrendKind::LocalLevel,
                }),
                Block::Seasonal(SeasonalBlock { seasons: 52 }),
                Block::Regression(RegressionBlock {
                    regressors: vec!["hols".into()],
                }),
            ],
            observation: ObservationFamily::StudentT { nu: 5.0 },
            variant: Variant::RF,
        };
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<ModelSpec>(&json).unwrap(), spec);
    }

    #[test]
    fn discretization_is_euler() {
        let (delta, q) = discretize_nerlove_arrow(2.0, 0.1, 0.5).unwrap();
        assert!((delta - 0.05).abs() < 1e-15);
        assert!((q - 1.0).abs() < 1e-15);
        assert!(discretize_nerlove_arrow(1.0, 3.0, 1.0).is_err());
    }
}
