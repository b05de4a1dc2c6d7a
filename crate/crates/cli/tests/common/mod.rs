#![allow(dead_code)]

use std::path::Path;

use chrono::NaiveDate;
use goodwill::blocks::{Block, ModelSpec, NerloveArrowBlock, ObservationFamily, Variant};
use goodwill::dataset::{self, Scale, ScalingParams};
use goodwill::mcmc::{ChainDraws, Draw, McmcConfig};
use goodwill::model::FittedModel;
use goodwill::priors::PriorConfig;
use goodwill::store;

pub const CHANNELS: [&str; 2] = ["a", "b"];

/// Two channels whose posterior draws make the one-week moments
/// `m_q = [1, 2]`, `Σ_qq = I`, `σ_cq = 0`, `σ_cc = 0`.
pub fn closed_form_model() -> FittedModel {
    let r = 2.0_f64.sqrt();
    let qs = [[1.0 + r, 2.0], [1.0 - r, 2.0], [1.0, 2.0 + r], [1.0, 2.0 - r]];
    // Ten copies of the four points: moment reduction needs at least 30 draws.
    let draws: Vec<Draw> = qs
        .iter()
        .cycle()
        .take(40)
        .map(|q| {
            let mut state = vec![4.0];
            state.extend_from_slice(q);
            Draw {
                delta: 0.4,
                coefficients: q.to_vec(),
                inclusion: vec![true; 2],
                obs_variance: 0.6,
                goodwill_variance: 0.1,
                level_variance: 0.0,
                slope_variance: 0.0,
                seasonal_variance: 0.0,
                terminal_state: state,
            }
        })
        .collect();
    let n = draws.len();
    FittedModel {
        spec: ModelSpec {
            blocks: vec![Block::NerloveArrow(NerloveArrowBlock {
                channels: CHANNELS.iter().map(|c| c.to_string()).collect(),
            })],
            observation: ObservationFamily::Gaussian,
            variant: Variant::RF,
        },
        priors: PriorConfig::default(),
        mcmc: McmcConfig {
            chains: 1,
            iterations: n + 1,
            burn_in: 1,
            ..Default::default()
        },
        scaling: ScalingParams {
            sales: Scale::IDENTITY,
            channels: CHANNELS.iter().map(|c| (c.to_string(), Scale::IDENTITY)).collect(),
            regressors: Vec::new(),
            ddof: 1,
        },
        train_rows: 10,
        last_week: NaiveDate::from_ymd_opt(2020, 1, 6).unwrap(),
        last_spend: vec![0.0, 0.0],
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

pub fn save_closed_form(root: &Path, id: &str) {
    store::save(&closed_form_model(), &store::model_dir(root, id).unwrap()).unwrap();
}

/// Built-in synthetic design as CSV text.
pub fn synthetic_csv(weeks: usize, seed: u64) -> String {
    let (d, _) = goodwill_cli::ops::default_simulation(weeks).run(seed).unwrap();
    let mut buf = Vec::new();
    dataset::write_csv(&d, &mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

/// Expected spend under `cap` for the closed-form instance with budget and bounds slack:
/// `u = √(cap − ω) · m / |m|`.
pub fn closed_form_spend(cap: f64, omega: f64) -> [f64; 2] {
    let r = (cap - omega).sqrt() / 5.0_f64.sqrt();
    [r, 2.0 * r]
}
