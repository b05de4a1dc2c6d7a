#![allow(dead_code)]

use chrono::NaiveDate;
use goodwill::blocks::{DynamicState, ModelParams, ModelSpec, Variant};
use goodwill::dataset::{ChannelGenerator, Dataset, LatentRecord, RegressorGenerator, SimulationConfig};

pub const CHANNELS: [&str; 3] = ["tv", "radio", "online"];
pub const Q: [f64; 3] = [0.5, 0.3, 0.8];
pub const BETA: [f64; 6] = [1.0, -0.8, 0.6, 0.0, 0.0, 0.0];
pub const DELTA: f64 = 0.3;

pub fn regressor_names() -> Vec<String> {
    (1..=6).map(|i| format!("x{i}")).collect()
}

pub fn spec(variant: Variant) -> ModelSpec {
    ModelSpec::standard(variant, CHANNELS.iter().map(|s| s.to_string()).collect(), regressor_names())
}

pub fn true_params() -> ModelParams {
    ModelParams {
        delta: DELTA,
        channel_coefficients: Q.to_vec(),
        regression_coefficients: BETA.to_vec(),
        regression_inclusion: None,
        obs_variance: 1.0,
        goodwill_variance: 0.1,
        level_variance: 0.05,
        slope_variance: 0.0,
        seasonal_variance: 0.0,
    }
}

/// Three channels with weekly spend |N(5, 3)|, six standard-normal regressors of
/// which the first three are active, local-level trend, Gaussian noise.
pub fn simulate(weeks: usize, seed: u64) -> (Dataset, LatentRecord) {
    let cfg = SimulationConfig {
        spec: spec(Variant::RF),
        params: true_params(),
        weeks,
        start: NaiveDate::from_ymd_opt(2015, 1, 5).unwrap(),
        channels: CHANNELS
            .iter()
            .map(|n| ChannelGenerator {
                name: n.to_string(),
                mean: 5.0,
                sd: 3.0,
            })
            .collect(),
        regressors: regressor_names()
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
    };
    cfg.run(seed).unwrap()
}

pub mod alloc;
pub mod dense;
pub mod grid;

use goodwill::blocks::{Block, NerloveArrowBlock, ObservationFamily};
use goodwill::dataset::{Scale, ScalingParams};
use goodwill::mcmc::{ChainDraws, Draw, McmcConfig};
use goodwill::model::FittedModel;
use goodwill::priors::PriorConfig;

/// A goodwill-only model whose draws are written by hand, on the original scale.
pub fn handcrafted(channels: &[&str], draws: Vec<Draw>, last_spend: Vec<f64>) -> FittedModel {
    let spec = ModelSpec {
        blocks: vec![Block::NerloveArrow(NerloveArrowBlock {
            channels: channels.iter().map(|c| c.to_string()).collect(),
        })],
        observation: ObservationFamily::Gaussian,
        variant: Variant::RF,
    };
    let n = draws.len();
    FittedModel {
        spec,
        priors: PriorConfig::default(),
        mcmc: McmcConfig {
            chains: 1,
            iterations: n + 1,
            burn_in: 1,
            ..Default::default()
        },
        scaling: ScalingParams {
            sales: Scale::IDENTITY,
            channels: channels.iter().map(|c| (c.to_string(), Scale::IDENTITY)).collect(),
            regressors: Vec::new(),
            ddof: 1,
        },
        train_rows: 10,
        last_week: NaiveDate::from_ymd_opt(2020, 1, 6).unwrap(),
        last_spend,
        chains: vec![ChainDraws {
            chain: 0,
            iterations: n + 1,
            burn_in: 1,
            draws,
            delta_acceptance: 0.0,
            proposal_scale: 0.0,
            mean_goodwill: Vec::new(),
            mean_latent_scales: None,
        }],
    }
}

/// Draw with goodwill `a` at the last training week and channel coefficients `q`.
pub fn goodwill_draw(delta: f64, q: &[f64], a: f64, obs_variance: f64, goodwill_variance: f64) -> Draw {
    let mut state = vec![a];
    state.extend_from_slice(q);
    Draw {
        delta,
        coefficients: q.to_vec(),
        inclusion: vec![true; q.len()],
        obs_variance,
        goodwill_variance,
        level_variance: 0.0,
        slope_variance: 0.0,
        seasonal_variance: 0.0,
        terminal_state: state,
    }
}
