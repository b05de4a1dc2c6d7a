//! Brute-force Gaussian conditioning over the stacked states and observations.

use goodwill::state_space::{self, GaussianBelief, StateSpaceSystem, TimeSeq};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub struct DenseSystem {
    pub g: Vec<DMatrix<f64>>,
    pub h: Vec<DMatrix<f64>>,
    pub w: Vec<DMatrix<f64>>,
    pub f: Vec<DVector<f64>>,
    pub v: Vec<f64>,
    pub m0: DVector<f64>,
    pub c0: DMatrix<f64>,
}

pub struct Joint {
    /// Mean of `[θ_0, ..., θ_T, y_1, ..., y_T]`.
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub m: usize,
    pub n: usize,
}

impl DenseSystem {
    /// Every state and observation as an affine map of the independent primitives
    /// `[θ_0 - m0, ε_1, ..., ε_T, ν_1, ..., ν_T]`.
    pub fn joint(&self) -> Joint {
        let m = self.m0.len();
        let n = self.g.len();
        let gdim = self.w[0].nrows();
        let z = m + n * gdim + n;
        let mut prim_cov = DMatrix::zeros(z, z);
        prim_cov.view_mut((0, 0), (m, m)).copy_from(&self.c0);
        for t in 0..n {
            let o = m + t * gdim;
            prim_cov.view_mut((o, o), (gdim, gdim)).copy_from(&self.w[t]);
            prim_cov[(m + n * gdim + t, m + n * gdim + t)] = self.v[t];
        }
        let rows = (n + 1) * m + n;
        let mut a = DMatrix::zeros(rows, z);
        let mut mean = DVector::zeros(rows);
        let mut state_map = DMatrix::zeros(m, z);
        state_map.view_mut((0, 0), (m, m)).copy_from(&DMatrix::identity(m, m));
        let mut state_mean = self.m0.clone();
        a.view_mut((0, 0), (m, z)).copy_from(&state_map);
        mean.rows_mut(0, m).copy_from(&state_mean);
        for t in 0..n {
            let mut next = &self.g[t] * &state_map;
            let o = m + t * gdim;
            let mut noise = next.view_mut((0, o), (m, gdim));
            noise += &self.h[t];
            state_map = next;
            state_mean = &self.g[t] * &state_mean;
            let r = (t + 1) * m;
            a.view_mut((r, 0), (m, z)).copy_from(&state_map);
            mean.rows_mut(r, m).copy_from(&state_mean);
            let yr = (n + 1) * m + t;
            let mut yrow = self.f[t].transpose() * &state_map;
            yrow[(0, m + n * gdim + t)] += 1.0;
            a.view_mut((yr, 0), (1, z)).copy_from(&yrow);
            mean[yr] = self.f[t].dot(&state_mean);
        }
        let cov = &a * prim_cov * a.transpose();
        Joint { mean, cov, m, n }
    }
}

impl Joint {
    /// Mean and covariance of `θ_t` (t = 0..=T) given `y_1..y_k`.
    pub fn state_given(&self, t: usize, y: &[f64], k: usize) -> (DVector<f64>, DMatrix<f64>) {
        let m = self.m;
        let yo = (self.n + 1) * m;
        let mu_x = self.mean.rows(t * m, m).into_owned();
        let s_xx = self.cov.view((t * m, t * m), (m, m)).into_owned();
        if k == 0 {
            return (mu_x, s_xx);
        }
        let mu_y = self.mean.rows(yo, k).into_owned();
        let s_xy = self.cov.view((t * m, yo), (m, k)).into_owned();
        let s_yy = self.cov.view((yo, yo), (k, k)).into_owned();
        let inv = s_yy.try_inverse().expect("observation covariance invertible");
        let resid = DVector::from_column_slice(&y[..k]) - mu_y;
        let mean = mu_x + &s_xy * &inv * resid;
        let cov = s_xx - &s_xy * &inv * s_xy.transpose();
        (mean, cov)
    }

    pub fn log_likelihood(&self, y: &[f64]) -> f64 {
        let n = self.n;
        let yo = (n + 1) * self.m;
        let mu = self.mean.rows(yo, n).into_owned();
        let s = self.cov.view((yo, yo), (n, n)).into_owned();
        let chol = s.clone().cholesky().expect("SPD observation covariance");
        let r = DVector::from_column_slice(y) - mu;
        let sol = chol.solve(&r);
        let logdet: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        -0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + r.dot(&sol))
    }
}

fn normal_matrix(r: usize, c: usize, scale: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

fn spd(m: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = normal_matrix(m, m, 1.0, rng);
    &a * a.transpose() + DMatrix::identity(m, m) * 0.1
}

/// Random system with `T ≤ 5`, `m ≤ 3`, its dense twin, prior and simulated observations.
pub fn random_case(rng: &mut ChaCha8Rng) -> (StateSpaceSystem, DenseSystem, GaussianBelief, Vec<f64>) {
    let n = rng.random_range(1..=5);
    let m = rng.random_range(1..=3);
    let g = rng.random_range(1..=m);
    let dense = DenseSystem {
        g: (0..n).map(|_| normal_matrix(m, m, 0.6, rng)).collect(),
        h: (0..n).map(|_| normal_matrix(m, g, 1.0, rng)).collect(),
        w: (0..n).map(|_| spd(g, rng)).collect(),
        f: (0..n).map(|_| DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal))).collect(),
        v: (0..n).map(|_| 0.2 + rng.random::<f64>()).collect(),
        m0: DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal)),
        c0: spd(m, rng),
    };
    let sys = StateSpaceSystem::new(
        n,
        TimeSeq::Varying(dense.f.clone()),
        TimeSeq::Varying(dense.g.clone()),
        TimeSeq::Varying(dense.h.clone()),
        TimeSeq::Varying(dense.w.clone()),
        TimeSeq::Varying(dense.v.clone()),
    )
    .unwrap();
    let prior = GaussianBelief::new(dense.m0.clone(), dense.c0.clone());
    let path = state_space::simulate_forward(&sys, &state_space::Start::Belief(prior.clone()), rng).unwrap();
    (sys, dense, prior, path.observations)
}
