use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use goodwill::blocks::{ModelSpec, Variant};
use goodwill::dataset::{self, SimulationConfig};
use goodwill::model::FitConfig;
use goodwill::{store, Error, Result};
use goodwill_cli::api_error::ApiError;
use goodwill_cli::ops::{self, AllocateRequest, FitRequest, Strategy};
use serde::Serialize;

/// Exit code when a fit finished but some R-hat is above the threshold.
const EXIT_NOT_CONVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "goodwill", version, about = "Fit, forecast and allocate with goodwill models")]
struct Cli {
    /// Model store root (default: $GOODWILL_STORE, else ./goodwill-store).
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Sampler {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    burnin: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a synthetic dataset with known parameters.
    Simulate {
        /// Simulation config JSON; the built-in three-channel design when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Weeks for the built-in design.
        #[arg(long, default_value_t = 300)]
        weeks: usize,
        /// Output CSV, `-` for stdout.
        #[arg(long)]
        out: PathBuf,
        /// Also write the latent ground truth as JSON.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Fit a model and write its draws, diagnostics and tables.
    Fit {
        #[arg(long)]
        data: PathBuf,
        /// Fit config JSON with `spec` and optional `priors`, `mcmc`.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Standard spec variant used when no config is given.
        #[arg(long, default_value = "RF")]
        variant: String,
        /// Fit on rows before this index and evaluate on the rest.
        #[arg(long)]
        train_end: Option<usize>,
        #[arg(long, default_value_t = ops::RHAT_THRESHOLD)]
        threshold: f64,
        #[command(flatten)]
        sampler: Sampler,
        /// Output directory.
        #[arg(long, conflicts_with = "id")]
        out: Option<PathBuf>,
        /// Model id under the store root.
        #[arg(long)]
        id: Option<String>,
    },
    /// Predictive forecast from a fitted model.
    Forecast {
        #[arg(long)]
        model: String,
        #[arg(long)]
        horizon: usize,
        /// Future rows (same columns as the data, `sales` may be blank) from the week after training.
        #[arg(long)]
        future: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Risk-return frontier of budget allocations.
    Allocate {
        #[arg(long)]
        model: String,
        /// Budget per decision week.
        #[arg(long)]
        budget: f64,
        /// Decision weeks.
        #[arg(long, default_value_t = 1)]
        weeks: usize,
        #[arg(long, default_value_t = goodwill::allocator::DEFAULT_FRONTIER_POINTS)]
        risk_grid: usize,
        /// Lower bound per channel, `name=value`; repeatable.
        #[arg(long, value_parser = parse_bound)]
        lower: Vec<(String, f64)>,
        #[arg(long, value_parser = parse_bound)]
        upper: Vec<(String, f64)>,
        /// Spend the whole budget each week.
        #[arg(long)]
        equality: bool,
        #[arg(long)]
        variance_cap: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        future: Option<PathBuf>,
        /// Strategies to compare: JSON list of `{name?, spend}`.
        #[arg(long)]
        strategies: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convergence diagnostics, inclusion probabilities and traces.
    Diagnose {
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = ops::RHAT_THRESHOLD)]
        threshold: f64,
        #[arg(long, default_value_t = ops::DEFAULT_TRACE_POINTS)]
        max_points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the HTTP service over the store.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Concurrent fit jobs.
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
}

fn parse_bound(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    let v: f64 = v.parse().map_err(|_| format!("`{v}` is not a number"))?;
    Ok((k.to_string(), v))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::NotFound(format!("{} does not exist", path.display())),
        _ => Error::Io(e),
    })?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

/// Write to `path`: `-` is stdout; symlinks and non-regular files (`/dev/stdout`,
/// pipes) are written through in place, plain files atomically.
fn write_output(path: &Path, bytes: &[u8]) -> Result<()> {
    if path == Path::new("-") {
        let mut out = std::io::stdout().lock();
        out.write_all(bytes)?;
        return Ok(out.flush()?);
    }
    match std::fs::symlink_metadata(path) {
        Ok(meta) if !meta.is_file() => Ok(std::fs::write(path, bytes)?),
        _ => store::write_atomic(path, bytes),
    }
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_output(out.unwrap_or(Path::new("-")), &bytes)
}

fn load_future(path: Option<&PathBuf>) -> Result<Option<dataset::Dataset>> {
    path.map(|p| dataset::load_csv(p).map_err(|e| Error::Input(format!("future rows {}: {e}", p.display()))))
        .transpose()
}

fn variant(name: &str) -> Result<Variant> {
    match name.to_ascii_uppercase().as_str() {
        "B" => Ok(Variant::B),
        "RA" => Ok(Variant::RA),
        "RF" => Ok(Variant::RF),
        _ => Err(Error::Config(format!("unknown variant `{name}` (expected B, RA or RF)"))),
    }
}

#[derive(Serialize)]
struct Invocation<'a> {
    command: &'a str,
    args: Vec<String>,
    seed: u64,
}

fn run(cli: Cli) -> Result<u8> {
    let root = cli.store.unwrap_or_else(store::store_root);
    match cli.command {
        Command::Simulate {
            config,
            seed,
            weeks,
            out,
            truth,
        } => {
            let cfg: SimulationConfig = match config {
                Some(p) => read_json(&p)?,
                None => ops::default_simulation(weeks),
            };
            let (d, latent) = cfg.run(seed)?;
            let mut buf = Vec::new();
            dataset::write_csv(&d, &mut buf)?;
            write_output(&out, &buf)?;
            if let Some(t) = truth {
                write_output(&t, &serde_json::to_vec_pretty(&latent)?)?;
            }
            Ok(0)
        }
        Command::Fit {
            data,
            config,
            variant: v,
            train_end,
            threshold,
            sampler,
            out,
            id,
        } => {
            let d = dataset::load_csv(&data)?;
            let mut cfg: FitConfig = match config {
                Some(p) => read_json(&p)?,
                None => FitConfig {
                    spec: ModelSpec::standard(variant(&v)?, Vec::new(), Vec::new()),
                    priors: Default::default(),
                    mcmc: Default::default(),
                },
            };
            cfg.spec.validate()?;
            if let Some(s) = sampler.seed {
                cfg.mcmc.seed = s;
            }
            if let Some(c) = sampler.chains {
                cfg.mcmc.chains = c;
            }
            if let Some(i) = sampler.iters {
                cfg.mcmc.iterations = i;
            }
            if let Some(b) = sampler.burnin {
                cfg.mcmc.burn_in = b;
            }
            let dir = match (out, id) {
                (Some(o), _) => o,
                (None, Some(id)) => store::model_dir(&root, &id)?,
                (None, None) => return Err(Error::Input("give --out or --id".into())),
            };
            let req = FitRequest {
                config: cfg,
                train_end,
                rhat_threshold: threshold,
            };
            let summary = ops::fit_to_dir(&d, &req, &dir)?;
            store::write_json(
                &dir,
                "invocation.json",
                &Invocation {
                    command: "fit",
                    args: std::env::args().skip(1).collect(),
                    seed: req.config.mcmc.seed,
                },
            )?;
            emit(&summary, None)?;
            if summary.converged {
                Ok(0)
            } else {
                log::warn!("R-hat above {threshold}: max {:?}", summary.max_rhat);
                Ok(EXIT_NOT_CONVERGED)
            }
        }
        Command::Forecast {
            model,
            horizon,
            future,
            seed,
            out,
        } => {
            let m = store::load(&ops::resolve_model_dir(&root, &model)?)?;
            let future = load_future(future.as_ref())?;
            emit(&ops::forecast(&m, horizon, future.as_ref(), seed)?, out.as_deref())?;
            Ok(0)
        }
        Command::Allocate {
            model,
            budget,
            weeks,
            risk_grid,
            lower,
            upper,
            equality,
            variance_cap,
            lambda,
            future,
            strategies,
            out,
        } => {
            let m = store::load(&ops::resolve_model_dir(&root, &model)?)?;
            let future = load_future(future.as_ref())?
                .map(|d| rows_of(&d))
                .transpose()?;
            let strategies: Vec<Strategy> = match strategies {
                Some(p) => read_json(&p)?,
                None => Vec::new(),
            };
            let req = AllocateRequest {
                budget: Some(budget),
                budgets: None,
                lower: lower.into_iter().collect(),
                upper: upper.into_iter().collect(),
                equality,
                horizon: weeks,
                risk_grid,
                variance_cap,
                lambda,
                future,
                strategies,
            };
            emit(&ops::allocate(&m, &req)?, out.as_deref())?;
            Ok(0)
        }
        Command::Diagnose {
            model,
            threshold,
            max_points,
            out,
        } => {
            let m = store::load(&ops::resolve_model_dir(&root, &model)?)?;
            let d = ops::diagnose(&m, threshold, max_points)?;
            emit(&d, out.as_deref())?;
            Ok(if d.report.converged { 0 } else { EXIT_NOT_CONVERGED })
        }
        Command::Serve { port, host, workers } => {
            let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
            rt.block_on(goodwill_cli::service::serve(&root, workers, &format!("{host}:{port}")))?;
            Ok(0)
        }
    }
}

/// Future CSV rows in the keyed form the allocation request takes.
fn rows_of(d: &dataset::Dataset) -> Result<Vec<ops::FutureRow>> {
    Ok((0..d.len())
        .map(|t| {
            let mut values = BTreeMap::new();
            for s in &d.channels {
                values.insert(format!("u_{}", s.name), s.values[t]);
            }
            for s in &d.regressors {
                values.insert(format!("x_{}", s.name), s.values[t]);
            }
            ops::FutureRow {
                date: Some(d.week_start[t]),
                values,
            }
        })
        .collect())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let body = ApiError::from(e).body;
            eprintln!("{}", serde_json::json!({ "error": body }));
            ExitCode::FAILURE
        }
    }
}
