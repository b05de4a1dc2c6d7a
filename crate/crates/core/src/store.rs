//! On-disk layout of a fitted model.
//!
//! ```text
//! <dir>/manifest.json          spec, priors, sampler config, scaling, chain metadata
//! <dir>/draws/chain-<n>.csv    one row per retained draw
//! <dir>/diagnostics.json       written by callers after fitting
//! <dir>/tables.json
//! <dir>/evaluation.json
//! ```
//!
//! Every file is written to a temporary sibling and renamed into place.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::blocks::ModelSpec;
use crate::dataset::ScalingParams;
use crate::error::{Error, Result};
use crate::mcmc::{ChainDraws, Draw, McmcConfig};
use crate::model::FittedModel;
use crate::priors::PriorConfig;

pub const FORMAT_VERSION: u32 = 1;
pub const STORE_ENV: &str = "GOODWILL_STORE";
pub const DEFAULT_STORE: &str = "goodwill-store";

/// Root directory for named models: `$GOODWILL_STORE`, else `./goodwill-store`.
pub fn store_root() -> PathBuf {
    std::env::var_os(STORE_ENV).map_or_else(|| PathBuf::from(DEFAULT_STORE), PathBuf::from)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ChainMeta {
    chain: usize,
    iterations: usize,
    burn_in: usize,
    draws: usize,
    delta_acceptance: f64,
    proposal_scale: f64,
    mean_goodwill: Vec<f64>,
    mean_latent_scales: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    spec: ModelSpec,
    priors: PriorConfig,
    mcmc: McmcConfig,
    scaling: ScalingParams,
    train_rows: usize,
    last_week: NaiveDate,
    last_spend: Vec<f64>,
    coefficient_names: Vec<String>,
    state_dim: usize,
    chains: Vec<ChainMeta>,
}

/// Write `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(parent)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("file");
    let tmp = parent.join(format!(".{name}.tmp-{}", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let bytes = serde_json::to_vec_pretty(value)?;
    write_atomic(&dir.join(name), &bytes)
}

pub fn read_json<T: DeserializeOwned>(dir: &Path, name: &str) -> Result<T> {
    let path = dir.join(name);
    let bytes = fs::read(&path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::NotFound(format!("{} does not exist", path.display())),
        _ => Error::Io(e),
    })?;
    Ok(serde_json::from_slice(&bytes)?)
}

fn draw_header(names: &[String], state_dim: usize) -> Vec<String> {
    let mut h = vec!["delta".to_string()];
    h.extend(names.iter().map(|n| format!("coef_{n}")));
    h.extend(names.iter().map(|n| format!("incl_{n}")));
    for v in ["obs_variance", "goodwill_variance", "level_variance", "slope_variance", "seasonal_variance"] {
        h.push(v.to_string());
    }
    h.extend((0..state_dim).map(|i| format!("state_{i}")));
    h
}

fn draws_csv(draws: &[Draw], header: &[String]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for d in draws {
        let mut row = vec![d.delta.to_string()];
        row.extend(d.coefficients.iter().map(f64::to_string));
        row.extend(d.inclusion.iter().map(|&g| if g { "1" } else { "0" }.to_string()));
        for v in [
            d.obs_variance,
            d.goodwill_variance,
            d.level_variance,
            d.slope_variance,
            d.seasonal_variance,
        ] {
            row.push(v.to_string());
        }
        row.extend(d.terminal_state.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn parse_draws(path: &Path, p: usize, state_dim: usize, expected_header: &[String]) -> Result<Vec<Draw>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != expected_header {
        return Err(Error::Schema(format!("{} has unexpected columns", path.display())));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let num = |j: usize| -> Result<f64> {
            rec[j].parse::<f64>().map_err(|_| Error::Validation {
                row: i,
                column: header[j].clone(),
                message: format!("cannot parse `{}`", &rec[j]),
            })
        };
        let mut j = 0;
        let delta = num(j)?;
        j += 1;
        let coefficients = (j..j + p).map(num).collect::<Result<Vec<_>>>()?;
        j += p;
        let inclusion = (j..j + p).map(|c| Ok(num(c)? != 0.0)).collect::<Result<Vec<_>>>()?;
        j += p;
        let v: Vec<f64> = (j..j + 5).map(num).collect::<Result<_>>()?;
        j += 5;
        let terminal_state = (j..j + state_dim).map(num).collect::<Result<Vec<_>>>()?;
        out.push(Draw {
            delta,
            coefficients,
            inclusion,
            obs_variance: v[0],
            goodwill_variance: v[1],
            level_variance: v[2],
            slope_variance: v[3],
            seasonal_variance: v[4],
            terminal_state,
        });
    }
    Ok(out)
}

/// Persist a fitted model; an existing model in `dir` is replaced.
pub fn save(model: &FittedModel, dir: &Path) -> Result<()> {
    let names = model.coefficient_names();
    let state_dim = model.spec.layout().dim;
    let header = draw_header(&names, state_dim);
    fs::create_dir_all(dir.join("draws"))?;
    for c in &model.chains {
        write_atomic(&dir.join("draws").join(format!("chain-{}.csv", c.chain)), &draws_csv(&c.draws, &header)?)?;
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        spec: model.spec.clone(),
        priors: model.priors.clone(),
        mcmc: model.mcmc.clone(),
        scaling: model.scaling.clone(),
        train_rows: model.train_rows,
        last_week: model.last_week,
        last_spend: model.last_spend.clone(),
        coefficient_names: names,
        state_dim,
        chains: model
            .chains
            .iter()
            .map(|c| ChainMeta {
                chain: c.chain,
                iterations: c.iterations,
                burn_in: c.burn_in,
                draws: c.draws.len(),
                delta_acceptance: c.delta_acceptance,
                proposal_scale: c.proposal_scale,
                mean_goodwill: c.mean_goodwill.clone(),
                mean_latent_scales: c.mean_latent_scales.clone(),
            })
            .collect(),
    };
    // The manifest goes last so a readable manifest implies complete draws.
    write_json(dir, "manifest.json", &manifest)
}

pub fn load(dir: &Path) -> Result<FittedModel> {
    let manifest: Manifest = read_json(dir, "manifest.json")?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::Schema(format!(
            "store format version {} is not supported (expected {FORMAT_VERSION})",
            manifest.format_version
        )));
    }
    let p = manifest.coefficient_names.len();
    let header = draw_header(&manifest.coefficient_names, manifest.state_dim);
    let mut chains = Vec::with_capacity(manifest.chains.len());
    for meta in &manifest.chains {
        let path = dir.join("draws").join(format!("chain-{}.csv", meta.chain));
        let draws = parse_draws(&path, p, manifest.state_dim, &header)?;
        if draws.len() != meta.draws {
            return Err(Error::Schema(format!(
                "{} holds {} draws, manifest says {}",
                path.display(),
                draws.len(),
                meta.draws
            )));
        }
        chains.push(ChainDraws {
            chain: meta.chain,
            iterations: meta.iterations,
            burn_in: meta.burn_in,
            draws,
            delta_acceptance: meta.delta_acceptance,
            proposal_scale: meta.proposal_scale,
            mean_goodwill: meta.mean_goodwill.clone(),
            mean_latent_scales: meta.mean_latent_scales.clone(),
        });
    }
    Ok(FittedModel {
        spec: manifest.spec,
        priors: manifest.priors,
        mcmc: manifest.mcmc,
        scaling: manifest.scaling,
        train_rows: manifest.train_rows,
        last_week: manifest.last_week,
        last_spend: manifest.last_spend,
        chains,
    })
}

/// Directory of model `id` under `root`; ids are restricted to `[A-Za-z0-9_.-]`.
pub fn model_dir(root: &Path, id: &str) -> Result<PathBuf> {
    let ok = !id.is_empty()
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
    if !ok {
        return Err(Error::Input(format!("invalid model id `{id}`")));
    }
    Ok(root.join(id))
}

pub fn list_models(root: &Path) -> Result<Vec<String>> {
    if !root.exists() {
        return Ok(Vec::new());
    }
    let mut ids: Vec<String> = fs::read_dir(root)?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().join("manifest.json").is_file())
        .filter_map(|e| e.file_name().to_str().map(str::to_string))
        .collect();
    ids.sort();
    Ok(ids)
}
