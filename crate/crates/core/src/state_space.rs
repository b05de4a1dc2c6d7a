//! Time-varying linear-Gaussian state-space systems.
//!
//! State equation `θ_t = G_t θ_{t-1} + H_t ε_t`, `ε_t ~ N(0, W_t)`, and scalar
//! observation `y_t = F_t θ_t + ε'_t`, `ε'_t ~ N(0, V_t)`. Step `t = 0` is the
//! first transition out of the initial belief.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Predictive variances at or below this fraction of the squared signal level
/// are treated as exactly zero. Diffuse initial variances leave round-off of
/// roughly `1e-16 * 1e7` behind once the state is pinned down.
pub const DEGENERATE_VARIANCE: f64 = 1e-9;

/// Per-step quantity that is either shared by every step or given per step.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub enum TimeSeq<T> {
    Constant(T),
    Varying(Vec<T>),
}

impl<T> TimeSeq<T> {
    pub fn at(&self, t: usize) -> &T {
        match self {
            TimeSeq::Constant(v) => v,
            TimeSeq::Varying(v) => &v[t],
        }
    }

    fn count(&self) -> Option<usize> {
        match self {
            TimeSeq::Constant(_) => None,
            TimeSeq::Varying(v) => Some(v.len()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateSpaceSystem {
    len: usize,
    state_dim: usize,
    disturbance_dim: usize,
    /// Observation rows `F_t`, stored as column vectors of length m.
    observation: TimeSeq<DVector<f64>>,
    transition: TimeSeq<DMatrix<f64>>,
    loading: TimeSeq<DMatrix<f64>>,
    state_cov: TimeSeq<DMatrix<f64>>,
    obs_var: TimeSeq<f64>,
}

impl StateSpaceSystem {
    pub fn new(
        len: usize,
        observation: TimeSeq<DVector<f64>>,
        transition: TimeSeq<DMatrix<f64>>,
        loading: TimeSeq<DMatrix<f64>>,
        state_cov: TimeSeq<DMatrix<f64>>,
        obs_var: TimeSeq<f64>,
    ) -> Result<Self> {
        for (name, c) in [
            ("F", observation.count()),
            ("G", transition.count()),
            ("H", loading.count()),
            ("W", state_cov.count()),
            ("V", obs_var.count()),
        ] {
            if let Some(c) = c {
                if c != len {
                    return Err(Error::Dimension(format!("{name} has {c} steps, expected {len}")));
                }
            }
        }
        let m = transition.at(0).nrows();
        let g = loading.at(0).ncols();
        for t in 0..len {
            let (gt, ht, wt, ft) = (transition.at(t), loading.at(t), state_cov.at(t), observation.at(t));
            if gt.nrows() != m || gt.ncols() != m {
                return Err(Error::Dimension(format!("G_{t} is {}x{}, expected {m}x{m}", gt.nrows(), gt.ncols())));
            }
            if ht.nrows() != m || ht.ncols() != g {
                return Err(Error::Dimension(format!("H_{t} is {}x{}, expected {m}x{g}", ht.nrows(), ht.ncols())));
            }
            if wt.nrows() != g || wt.ncols() != g {
                return Err(Error::Dimension(format!("W_{t} is {}x{}, expected {g}x{g}", wt.nrows(), wt.ncols())));
            }
            if ft.len() != m {
                return Err(Error::Dimension(format!("F_{t} has length {}, expected {m}", ft.len())));
            }
            if *obs_var.at(t) < 0.0 || !obs_var.at(t).is_finite() {
                return Err(Error::Domain(format!("V_{t} = {} must be finite and >= 0", obs_var.at(t))));
            }
            if (wt - wt.transpose()).abs().max() > 1e-10 {
                return Err(Error::Domain(format!("W_{t} is not symmetric")));
            }
            if matches!(state_cov, TimeSeq::Varying(_)) || t == 0 {
                if linalg::psd_factor(wt).is_none() {
                    return Err(Error::Domain(format!("W_{t} is not positive semidefinite")));
                }
            }
        }
        Ok(Self {
            len,
            state_dim: m,
            disturbance_dim: g,
            observation,
            transition,
            loading,
            state_cov,
            obs_var,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn disturbance_dim(&self) -> usize {
        self.disturbance_dim
    }

    pub fn observation(&self, t: usize) -> &DVector<f64> {
        self.observation.at(t)
    }

    pub fn transition(&self, t: usize) -> &DMatrix<f64> {
        self.transition.at(t)
    }

    pub fn loading(&self, t: usize) -> &DMatrix<f64> {
        self.loading.at(t)
    }

    pub fn state_cov(&self, t: usize) -> &DMatrix<f64> {
        self.state_cov.at(t)
    }

    pub fn obs_var(&self, t: usize) -> f64 {
        *self.obs_var.at(t)
    }

    /// State disturbance covariance `H_t W_t H_t'` in state coordinates.
    pub fn process_cov(&self, t: usize) -> DMatrix<f64> {
        let h = self.loading(t);
        h * self.state_cov(t) * h.transpose()
    }

    /// Replace the observation variances (used for latent-scale augmentation).
    pub fn with_obs_var(mut self, obs_var: TimeSeq<f64>) -> Result<Self> {
        if let Some(c) = obs_var.count() {
            if c != self.len {
                return Err(Error::Dimension(format!("V has {c} steps, expected {}", self.len)));
            }
        }
        self.obs_var = obs_var;
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianBelief {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianBelief {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        Self { mean, cov }
    }

    /// Point mass at `state`.
    pub fn fixed(state: DVector<f64>) -> Self {
        let m = state.len();
        Self {
            mean: state,
            cov: DMatrix::zeros(m, m),
        }
    }

    /// Zero mean with `variance * I`, the finite stand-in for a diffuse prior.
    pub fn diffuse(dim: usize, variance: f64) -> Self {
        Self {
            mean: DVector::zeros(dim),
            cov: DMatrix::identity(dim, dim) * variance,
        }
    }
}

/// Outcome of a single measurement update.
#[derive(Debug, Clone)]
pub struct Update {
    pub belief: GaussianBelief,
    pub predictive_mean: f64,
    pub predictive_var: f64,
    pub log_density: f64,
}

/// Time update: `a = G m`, `R = G C G' + H W H'`.
pub fn predict(sys: &StateSpaceSystem, t: usize, belief: &GaussianBelief) -> GaussianBelief {
    let g = sys.transition(t);
    let mean = g * &belief.mean;
    let mut cov = g * &belief.cov * g.transpose() + sys.process_cov(t);
    linalg::symmetrize_in_place(&mut cov);
    GaussianBelief { mean, cov }
}

/// Measurement update with observation variance `v` (Joseph form).
///
/// A zero predictive variance means the observation is already determined by the
/// predicted belief; it is accepted without changing the belief when the
/// innovation is numerically zero and rejected otherwise.
pub fn update(
    t: usize,
    predicted: &GaussianBelief,
    f: &DVector<f64>,
    v: f64,
    y: f64,
) -> Result<Update> {
    let pf = &predicted.cov * f;
    let mean_y = f.dot(&predicted.mean);
    let s = f.dot(&pf) + v;
    let innovation = y - mean_y;
    let tol = DEGENERATE_VARIANCE * (1.0 + y * y).max(mean_y * mean_y);
    if !s.is_finite() || s < -tol {
        return Err(Error::Numerical {
            step: t,
            message: format!("predictive variance {s} is not positive"),
        });
    }
    if s <= tol {
        if innovation.abs() <= 1e-6 * (1.0 + y.abs()) {
            return Ok(Update {
                belief: predicted.clone(),
                predictive_mean: mean_y,
                predictive_var: 0.0,
                log_density: 0.0,
            });
        }
        return Err(Error::Numerical {
            step: t,
            message: format!("observation {y} has zero predictive variance but innovation {innovation}"),
        });
    }
    let gain = &pf / s;
    let mean = &predicted.mean + &gain * innovation;
    let m = f.len();
    let i_kf = DMatrix::identity(m, m) - &gain * f.transpose();
    let mut cov = &i_kf * &predicted.cov * i_kf.transpose() + (&gain * gain.transpose()) * v;
    linalg::symmetrize_in_place(&mut cov);
    let log_density = -0.5 * ((2.0 * std::f64::consts::PI * s).ln() + innovation * innovation / s);
    Ok(Update {
        belief: GaussianBelief { mean, cov },
        predictive_mean: mean_y,
        predictive_var: s,
        log_density,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterResult {
    pub initial: GaussianBelief,
    pub predicted: Vec<GaussianBelief>,
    pub filtered: Vec<GaussianBelief>,
    pub predictive_mean: Vec<f64>,
    pub predictive_var: Vec<f64>,
    pub log_likelihood: f64,
}

pub fn kalman_filter(
    sys: &StateSpaceSystem,
    y: &[Option<f64>],
    initial: &GaussianBelief,
) -> Result<FilterResult> {
    if y.len() != sys.len() {
        return Err(Error::Dimension(format!(
            "{} observations for a system of length {}",
            y.len(),
            sys.len()
        )));
    }
    if initial.mean.len() != sys.state_dim() {
        return Err(Error::Dimension("initial belief does not match state dimension".into()));
    }
    let n = sys.len();
    let mut out = FilterResult {
        initial: initial.clone(),
        predicted: Vec::with_capacity(n),
        filtered: Vec::with_capacity(n),
        predictive_mean: Vec::with_capacity(n),
        predictive_var: Vec::with_capacity(n),
        log_likelihood: 0.0,
    };
    let mut belief = initial.clone();
    for (t, obs) in y.iter().enumerate() {
        let pred = predict(sys, t, &belief);
        let f = sys.observation(t);
        let v = sys.obs_var(t);
        match obs {
            Some(value) => {
                let upd = update(t, &pred, f, v, *value)?;
                out.predictive_mean.push(upd.predictive_mean);
                out.predictive_var.push(upd.predictive_var);
                out.log_likelihood += upd.log_density;
                belief = upd.belief;
            }
            None => {
                out.predictive_mean.push(f.dot(&pred.mean));
                out.predictive_var.push(f.dot(&(&pred.cov * f)) + v);
                belief = pred.clone();
            }
        }
        out.predicted.push(pred);
        out.filtered.push(belief.clone());
    }
    Ok(out)
}

/// Backward gain `J = C G' R⁺` computed as the transpose of `R⁺ (G C)`.
fn backward_gain(g: &DMatrix<f64>, filtered_cov: &DMatrix<f64>, predicted_cov: &DMatrix<f64>) -> DMatrix<f64> {
    let gc = g * filtered_cov;
    linalg::solve_symmetric(predicted_cov, &gc).transpose()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmootherResult {
    /// Smoothed belief about the initial state.
    pub initial: GaussianBelief,
    /// Smoothed beliefs `p(θ_t | y_{1:n})` for every step.
    pub steps: Vec<GaussianBelief>,
}

/// Rauch-Tung-Striebel smoother.
pub fn kalman_smoother(sys: &StateSpaceSystem, filter: &FilterResult) -> Result<SmootherResult> {
    let n = sys.len();
    if filter.filtered.len() != n {
        return Err(Error::Dimension("filter result does not match system length".into()));
    }
    if n == 0 {
        return Ok(SmootherResult {
            initial: filter.initial.clone(),
            steps: Vec::new(),
        });
    }
    let mut steps = vec![filter.filtered[n - 1].clone(); n];
    let mut next = steps[n - 1].clone();
    let smooth_one = |t_next: usize, filtered: &GaussianBelief, next: &GaussianBelief| {
        let pred = &filter.predicted[t_next];
        let j = backward_gain(sys.transition(t_next), &filtered.cov, &pred.cov);
        let mean = &filtered.mean + &j * (&next.mean - &pred.mean);
        let mut cov = &filtered.cov + &j * (&next.cov - &pred.cov) * j.transpose();
        linalg::symmetrize_in_place(&mut cov);
        GaussianBelief { mean, cov }
    };
    for t in (0..n - 1).rev() {
        let s = smooth_one(t + 1, &filter.filtered[t], &next);
        steps[t] = s.clone();
        next = s;
    }
    let initial = smooth_one(0, &filter.initial, &next);
    Ok(SmootherResult { initial, steps })
}

/// One exact draw of the state path from `p(θ_0, ..., θ_n | y)` by forward
/// filtering and backward sampling. Entry 0 is the initial state; entry `t + 1`
/// is the state after step `t`.
pub fn ffbs_sample<R: Rng + ?Sized>(
    sys: &StateSpaceSystem,
    y: &[Option<f64>],
    initial: &GaussianBelief,
    rng: &mut R,
) -> Result<Vec<DVector<f64>>> {
    let filter = kalman_filter(sys, y, initial)?;
    ffbs_from_filter(sys, &filter, rng)
}

pub fn ffbs_from_filter<R: Rng + ?Sized>(
    sys: &StateSpaceSystem,
    filter: &FilterResult,
    rng: &mut R,
) -> Result<Vec<DVector<f64>>> {
    let n = sys.len();
    let mut path = vec![DVector::zeros(sys.state_dim()); n + 1];
    // Round-off left behind by a diffuse start scales with the initial variance.
    let tol = 1e-14 * filter.initial.cov.diagonal().iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    let last = if n == 0 { &filter.initial } else { &filter.filtered[n - 1] };
    path[n] = linalg::sample_mvn_tol(&last.mean, &last.cov, tol, rng).ok_or_else(|| Error::Numerical {
        step: n.saturating_sub(1),
        message: "filtered covariance is indefinite".into(),
    })?;
    for t in (0..n).rev() {
        // Condition the belief before step t on the sampled state after step t.
        let before = if t == 0 { &filter.initial } else { &filter.filtered[t - 1] };
        let pred = &filter.predicted[t];
        let g = sys.transition(t);
        let j = backward_gain(g, &before.cov, &pred.cov);
        let mean = &before.mean + &j * (&path[t + 1] - &pred.mean);
        let mut cov = &before.cov - &j * (g * &before.cov);
        linalg::symmetrize_in_place(&mut cov);
        path[t] = linalg::sample_mvn_tol(&mean, &cov, tol, rng).ok_or_else(|| Error::Numerical {
            step: t,
            message: "backward conditional covariance is indefinite".into(),
        })?;
    }
    Ok(path)
}

/// One-step prediction errors of several series through the same system.
#[derive(Debug, Clone)]
pub struct Innovations {
    /// Predictive variance per step; zero marks a step with a determined observation.
    pub variances: Vec<f64>,
    /// `errors[j][t]`: prediction error of series `j` at step `t`.
    pub errors: Vec<Vec<f64>>,
}

/// Run the covariance recursion once and push every series through the
/// resulting gains, each starting from a zero state mean.
///
/// Because the filter is linear in the data, the innovations of `y - D b`
/// equal those of `y` minus `D`'s innovations weighted by `b`.
pub fn innovations(sys: &StateSpaceSystem, initial_cov: &DMatrix<f64>, series: &[&[f64]]) -> Result<Innovations> {
    let n = sys.len();
    let m = sys.state_dim();
    for (j, s) in series.iter().enumerate() {
        if s.len() != n {
            return Err(Error::Dimension(format!("series {j} has {} steps, system has {n}", s.len())));
        }
    }
    let mut cov = initial_cov.clone();
    // Same round-off allowance as in backward sampling.
    let tol = 1e-14 * initial_cov.diagonal().iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    let mut means = vec![DVector::<f64>::zeros(m); series.len()];
    let mut variances = Vec::with_capacity(n);
    let mut errors = vec![Vec::with_capacity(n); series.len()];
    for t in 0..n {
        let g = sys.transition(t);
        let mut pred = g * &cov * g.transpose() + sys.process_cov(t);
        linalg::symmetrize_in_place(&mut pred);
        let f = sys.observation(t);
        let pf = &pred * f;
        let s = f.dot(&pf) + sys.obs_var(t);
        let degenerate = s <= tol;
        for (j, c) in series.iter().enumerate() {
            let a = g * &means[j];
            let e = c[t] - f.dot(&a);
            errors[j].push(if degenerate { 0.0 } else { e });
            means[j] = if degenerate { a } else { a + &pf * (e / s) };
        }
        variances.push(if degenerate { 0.0 } else { s });
        if !degenerate {
            let gain = &pf / s;
            let i_kf = DMatrix::identity(m, m) - &gain * f.transpose();
            cov = &i_kf * &pred * i_kf.transpose() + (&gain * gain.transpose()) * sys.obs_var(t);
            linalg::symmetrize_in_place(&mut cov);
        } else {
            cov = pred;
        }
    }
    Ok(Innovations { variances, errors })
}

/// Starting point for forward simulation.
#[derive(Debug, Clone)]
pub enum Start {
    Belief(GaussianBelief),
    Fixed(DVector<f64>),
}

#[derive(Debug, Clone)]
pub struct SimulatedPath {
    /// Initial state followed by the state after each step (length n + 1).
    pub states: Vec<DVector<f64>>,
    pub observations: Vec<f64>,
    /// Observation noise realisations `ε'_t`.
    pub observation_noise: Vec<f64>,
}

/// Draw states and observations by iterating the model equations.
pub fn simulate_forward<R: Rng + ?Sized>(
    sys: &StateSpaceSystem,
    start: &Start,
    rng: &mut R,
) -> Result<SimulatedPath> {
    let m = sys.state_dim();
    let mut state = match start {
        Start::Fixed(s) => s.clone(),
        Start::Belief(b) => linalg::sample_mvn(&b.mean, &b.cov, rng)
            .ok_or_else(|| Error::Domain("start covariance is not PSD".into()))?,
    };
    if state.len() != m {
        return Err(Error::Dimension(format!("start state has length {}, expected {m}", state.len())));
    }
    let mut states = Vec::with_capacity(sys.len() + 1);
    let mut observations = Vec::with_capacity(sys.len());
    let mut observation_noise = Vec::with_capacity(sys.len());
    states.push(state.clone());
    let mut w_factor: Option<DMatrix<f64>> = None;
    for t in 0..sys.len() {
        if w_factor.is_none() || matches!(sys.state_cov, TimeSeq::Varying(_)) {
            w_factor = Some(
                linalg::psd_factor(sys.state_cov(t))
                    .ok_or_else(|| Error::Domain(format!("W_{t} is not PSD")))?,
            );
        }
        let g = sys.disturbance_dim();
        let z = DVector::from_iterator(g, (0..g).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let eps = w_factor.as_ref().expect("factor set above") * z;
        state = sys.transition(t) * &state + sys.loading(t) * eps;
        let noise = sys.obs_var(t).sqrt() * rng.sample::<f64, _>(StandardNormal);
        observations.push(sys.observation(t).dot(&state) + noise);
        observation_noise.push(noise);
        states.push(state.clone());
    }
    Ok(SimulatedPath {
        states,
        observations,
        observation_noise,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar_system(len: usize, g: f64, w: f64, v: f64) -> StateSpaceSystem {
        StateSpaceSystem::new(
            len,
            TimeSeq::Constant(DVector::from_element(1, 1.0)),
            TimeSeq::Constant(DMatrix::from_element(1, 1, g)),
            TimeSeq::Constant(DMatrix::from_element(1, 1, 1.0)),
            TimeSeq::Constant(DMatrix::from_element(1, 1, w)),
            TimeSeq::Constant(v),
        )
        .unwrap()
    }

    #[test]
    fn conjugate_normal_update() {
        let sys = scalar_system(1, 1.0, 0.0, 1.0);
        let prior = GaussianBelief::new(DVector::from_element(1, 0.0), DMatrix::from_element(1, 1, 1.0));
        let f = kalman_filter(&sys, &[Some(2.0)], &prior).unwrap();
        assert!((f.filtered[0].mean[0] - 1.0).abs() < 1e-15);
        assert!((f.filtered[0].cov[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn missing_observations_only_propagate() {
        let sys = scalar_system(4, 1.0, 0.3, 1.0);
        let prior = GaussianBelief::new(DVector::from_element(1, 2.0), DMatrix::from_element(1, 1, 1.0));
        let f = kalman_filter(&sys, &[None; 4], &prior).unwrap();
        for (t, b) in f.filtered.iter().enumerate() {
            assert_eq!(b, &f.predicted[t]);
            assert_eq!(b.mean[0], 2.0);
            assert!((b.cov[(0, 0)] - (1.0 + 0.3 * (t + 1) as f64)).abs() < 1e-12);
        }
        assert_eq!(f.log_likelihood, 0.0);
    }

    #[test]
    fn smoother_ends_at_filter() {
        let sys = scalar_system(5, 0.9, 0.2, 0.5);
        let prior = GaussianBelief::diffuse(1, 10.0);
        let y: Vec<_> = [0.3, -0.1, 0.8, 1.2, 0.4].iter().map(|v| Some(*v)).collect();
        let f = kalman_filter(&sys, &y, &prior).unwrap();
        let s = kalman_smoother(&sys, &f).unwrap();
        assert_eq!(s.steps[4], f.filtered[4]);
    }

    #[test]
    fn static_state_smooths_to_a_constant() {
        let sys = scalar_system(6, 1.0, 0.0, 1.0);
        let prior = GaussianBelief::diffuse(1, 100.0);
        let y: Vec<_> = [1.0, 3.0, 2.0, -1.0, 0.5, 2.5].iter().map(|v| Some(*v)).collect();
        let f = kalman_filter(&sys, &y, &prior).unwrap();
        let s = kalman_smoother(&sys, &f).unwrap();
        for b in &s.steps {
            assert!((b.mean[0] - s.steps[0].mean[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_noise_ffbs_follows_the_recursion() {
        let sys = scalar_system(5, 0.5, 0.0, 0.0);
        let start = DVector::from_element(1, 8.0);
        let y: Vec<_> = (1..=5).map(|t| Some(8.0 * 0.5f64.powi(t))).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let path = ffbs_sample(&sys, &y, &GaussianBelief::fixed(start), &mut rng).unwrap();
        for (t, s) in path.iter().enumerate() {
            assert!((s[0] - 8.0 * 0.5f64.powi(t as i32)).abs() < 1e-12);
        }
    }

    #[test]
    fn impossible_observation_is_reported_with_its_step() {
        let sys = scalar_system(2, 1.0, 0.0, 0.0);
        let err = kalman_filter(&sys, &[Some(1.0), Some(2.0)], &GaussianBelief::fixed(DVector::from_element(1, 1.0)))
            .unwrap_err();
        assert!(matches!(err, Error::Numerical { step: 1, .. }));
    }

    #[test]
    fn forward_simulation_without_noise_is_constant() {
        let m = 3;
        let sys = StateSpaceSystem::new(
            4,
            TimeSeq::Constant(DVector::from_vec(vec![1.0, 0.0, 0.0])),
            TimeSeq::Constant(DMatrix::identity(m, m)),
            TimeSeq::Constant(DMatrix::identity(m, m)),
            TimeSeq::Constant(DMatrix::zeros(m, m)),
            TimeSeq::Constant(0.0),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let start = DVector::from_vec(vec![4.5, 1.0, 2.0]);
        let sim = simulate_forward(&sys, &Start::Fixed(start), &mut rng).unwrap();
        assert!(sim.observations.iter().all(|y| *y == 4.5));
    }

    #[test]
    fn same_seed_same_path() {
        let sys = scalar_system(10, 0.8, 0.5, 0.2);
        let start = Start::Belief(GaussianBelief::diffuse(1, 1.0));
        let a = simulate_forward(&sys, &start, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = simulate_forward(&sys, &start, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a.observations, b.observations);
    }

    #[test]
    fn mismatched_dimensions_are_rejected() {
        let r = StateSpaceSystem::new(
            2,
            TimeSeq::Constant(DVector::from_element(2, 1.0)),
            TimeSeq::Constant(DMatrix::identity(1, 1)),
            TimeSeq::Constant(DMatrix::identity(1, 1)),
            TimeSeq::Constant(DMatrix::identity(1, 1)),
            TimeSeq::Constant(1.0),
        );
        assert!(matches!(r, Err(Error::Dimension(_))));
    }
}
