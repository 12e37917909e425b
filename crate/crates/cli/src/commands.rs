use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use pfbo::bench::{
    self, export_tables, run_experiment, write_atomic, ExperimentConfig, ExperimentConfigFile, ExportFormat,
};
use pfbo::bo::{self, bo_run, BOConfig, BOTrace, Standardization};
use pfbo::fmt_f64;
use pfbo::gp::GPHyperParams;
use pfbo::kalman::{kalman_filter, kalman_loglik};
use pfbo::objective::{KalmanObjective, ParticleObjective};
use pfbo::pfilter::{pf_loglik, PFConfig};
use pfbo::ssm::{self, LinearGaussianModel};

use crate::{Engine, ExperimentArgs, LoglikArgs, ModelArgs, OptimizeArgs, SimulateArgs};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error(transparent)]
    Core(#[from] pfbo::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } => 2,
            CliError::Core(e) if e.is_validation() => 2,
            _ => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Provenance record written next to every output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub software_version: String,
    pub master_seed: u64,
    /// Command arguments and the fully resolved configuration.
    pub config: serde_json::Value,
    pub started_at: String,
    pub finished_at: Option<String>,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    fn start(command: &str, master_seed: u64, config: serde_json::Value) -> Self {
        Self {
            command: command.to_string(),
            software_version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed,
            config,
            started_at: now(),
            finished_at: None,
            outputs: Vec::new(),
        }
    }

    fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        write_atomic(path, text.as_bytes())?;
        Ok(())
    }

    fn finish(mut self, path: &Path, outputs: Vec<PathBuf>) -> Result<()> {
        self.finished_at = Some(now());
        self.outputs = outputs;
        self.write(path)
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// `trace.csv` -> `trace.manifest.json`
fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

fn model_base(m: &ModelArgs) -> Result<LinearGaussianModel> {
    Ok(LinearGaussianModel::new(
        ssm::DEFAULT_TAU2,
        m.obs_var,
        m.init_mean,
        m.init_var,
    )?)
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        }),
        _ => Ok(()),
    }
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    if args.length == 0 {
        return Err(CliError::Usage("--length must be >= 1".into()));
    }
    let model = LinearGaussianModel::new(args.tau2, args.model.obs_var, args.model.init_mean, args.model.init_var)?;
    ensure_parent(&args.out)?;
    let mpath = manifest_path(&args.out);
    let manifest = RunManifest::start("simulate", args.seed, json!({ "args": args, "resolved": model }));
    manifest.write(&mpath)?;
    let series = ssm::simulate(&model, args.length, args.seed)?;
    write_atomic(&args.out, series.to_csv().as_bytes())?;
    manifest.finish(&mpath, vec![args.out.clone()])
}

pub fn loglik(args: &LoglikArgs) -> Result<()> {
    if args.theta < 0.0 {
        return Err(CliError::Usage(format!("--theta must be >= 0, got {}", args.theta)));
    }
    let base = model_base(&args.model)?;
    let manifest = RunManifest::start("loglik", args.seed, json!({ "args": args }));
    if let Some(p) = &args.manifest {
        ensure_parent(p)?;
        manifest.write(p)?;
    }
    let series = ssm::load_series(&args.series)?;
    let (total, steps) = match args.engine {
        Engine::Kalman => {
            let (steps, _) = kalman_filter(args.theta, &series, &base)?;
            (kalman_loglik(args.theta, &series, &base)?, steps)
        }
        Engine::Pf => {
            let cfg = PFConfig {
                m: args.particles,
                ess_threshold_fraction: args.ess_frac,
                seed: args.seed,
            };
            let r = pf_loglik(args.theta, &series, &base, &cfg)?;
            (r.loglik, r.per_step_loglik)
        }
    };
    let mut out = format!("{}\n", fmt_f64(total));
    if args.per_step {
        out.push_str("t,loglik_increment\n");
        for (t, v) in steps.iter().enumerate() {
            let _ = writeln!(out, "{},{}", t + 1, fmt_f64(*v));
        }
    }
    print!("{out}");
    if let Some(p) = &args.manifest {
        manifest.finish(p, Vec::new())?;
    }
    Ok(())
}

const TRACE_HEADER: &str = "t,x_evaluated,raw_value,std_value,kappa,incumbent_x,incumbent_mean";

fn trace_csv(trace: &BOTrace) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in &trace.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.t,
            fmt_f64(r.x_evaluated),
            fmt_f64(r.raw_value),
            fmt_f64(r.std_value),
            fmt_f64(r.kappa),
            fmt_f64(r.incumbent_x),
            fmt_f64(r.incumbent_mean),
        );
    }
    out
}

fn optimize_config(args: &OptimizeArgs) -> Result<BOConfig> {
    let [lo, hi] = args.bounds[..] else {
        return Err(CliError::Usage("--bounds takes two values".into()));
    };
    let cfg = BOConfig {
        bounds: (lo, hi),
        hp: GPHyperParams::new(args.sigma_f, args.length_scale, args.sigma_n)?,
        delta: args.delta,
        max_iters: args.iters,
        init_points: bo::default_init_points((lo, hi)),
        seed: args.seed,
        standardization: if args.oracle {
            Standardization::Spread
        } else {
            Standardization::Probe {
                reps: args.normalizer_reps,
            }
        },
        stop_on_convergence: args.stop_on_convergence,
        ..BOConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn optimize(args: &OptimizeArgs) -> Result<()> {
    let cfg = optimize_config(args)?;
    let base = model_base(&args.model)?;
    if !args.oracle && args.particles == 0 {
        return Err(CliError::Usage("--particles must be >= 1".into()));
    }
    ensure_parent(&args.out)?;
    let mpath = manifest_path(&args.out);
    let manifest = RunManifest::start("optimize", args.seed, json!({ "args": args, "resolved": cfg }));
    manifest.write(&mpath)?;

    let series = ssm::load_series(&args.series)?;
    let trace = if args.oracle {
        bo_run(
            &KalmanObjective {
                series: &series,
                model: base,
            },
            &cfg,
        )?
    } else {
        let obj = ParticleObjective {
            ess_threshold_fraction: args.ess_frac,
            ..ParticleObjective::new(&series, base, args.particles)
        };
        bo_run(&obj, &cfg)?
    };
    write_atomic(&args.out, trace_csv(&trace).as_bytes())?;

    let theta_hat = trace
        .records
        .last()
        .map(|r| r.incumbent_x)
        .expect("initial design is non-empty");
    println!("theta_hat {}", fmt_f64(theta_hat));
    println!("loglik_kf {}", fmt_f64(kalman_loglik(theta_hat, &series, &base)?));
    match trace.converged_at {
        Some(t) => println!("converged_at {t}"),
        None => println!("converged_at none"),
    }
    manifest.finish(&mpath, vec![args.out.clone()])
}

fn parse_config(path: &Path) -> Result<ExperimentConfigFile> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        CliError::Config {
            path: path.to_path_buf(),
            message: if field == "." {
                e.inner().to_string()
            } else {
                format!("field `{field}`: {}", e.inner())
            },
        }
    })
}

pub fn experiment(args: &ExperimentArgs) -> Result<()> {
    let mut cfg = parse_config(&args.config)?.resolve(args.profile.into());
    if let Some(seed) = args.master_seed {
        cfg.master_seed = seed;
    }
    if let Some(r) = args.repetitions {
        cfg.repetitions = r;
    }
    if let Some(i) = args.iterations {
        cfg.iterations = i;
    }
    if let Some(out) = &args.out {
        cfg.output_dir = Some(out.clone());
    }
    run_resolved(
        cfg,
        json!({ "config_file": args.config, "profile": format!("{:?}", args.profile).to_lowercase() }),
    )
}

fn run_resolved(cfg: ExperimentConfig, origin: serde_json::Value) -> Result<()> {
    let Some(dir) = cfg.output_dir.clone() else {
        return Err(CliError::Usage(
            "no output directory: pass --out or set output_dir".into(),
        ));
    };
    cfg.validate()?;
    std::fs::create_dir_all(&dir).map_err(|source| CliError::Io {
        path: dir.clone(),
        source,
    })?;
    let mpath = dir.join("manifest.json");
    let manifest = RunManifest::start(
        "experiment",
        cfg.master_seed,
        json!({ "args": origin, "resolved": cfg }),
    );
    manifest.write(&mpath)?;
    let res = run_experiment(&cfg)?;
    let paths = export_tables(&res, &dir, ExportFormat::Csv)?;
    println!("theta_star {}", fmt_f64(res.mle.theta_star));
    for p in paths.all() {
        println!("wrote {}", p.display());
    }
    manifest.finish(&mpath, paths.all().into_iter().map(Path::to_path_buf).collect())
}

pub fn rerun(path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| CliError::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let bad = |e: serde_json::Error| CliError::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let section = |key: &str| manifest.config.get(key).cloned().unwrap_or_default();
    match manifest.command.as_str() {
        "simulate" => simulate(&serde_json::from_value(section("args")).map_err(bad)?),
        "loglik" => loglik(&serde_json::from_value(section("args")).map_err(bad)?),
        "optimize" => optimize(&serde_json::from_value(section("args")).map_err(bad)?),
        "experiment" => {
            let cfg: bench::ExperimentConfig = serde_json::from_value(section("resolved")).map_err(bad)?;
            run_resolved(cfg, section("args"))
        }
        other => Err(CliError::Config {
            path: path.to_path_buf(),
            message: format!("unknown command `{other}`"),
        }),
    }
}
