//! CSV exports of an experiment. Every file is UTF-8 with LF endings and a
//! header row; floats carry 17 significant digits.

use std::path::{Path, PathBuf};

use serde::Serialize;

use super::experiment::{CurveSet, ExperimentResult, MSECurves};
use crate::bo::{kappa, Normalizer};
use crate::error::{Error, Result};
use crate::fmt_f64;
use crate::gp;

pub const TABLE1_FILE: &str = "table1_loglik_stats.csv";
pub const TABLE2_FILE: &str = "table2_log_mse.csv";
pub const MSE_CURVES_FILE: &str = "mse_curves.csv";
pub const SNAPSHOT_FILE: &str = "posterior_snapshots.csv";
pub const CONVERGENCE_FILE: &str = "convergence_increments.csv";
pub const TRACES_FILE: &str = "traces.csv";
pub const INCUMBENTS_FILE: &str = "incumbents.csv";
pub const RUNS_FILE: &str = "runs.csv";
pub const SUMMARY_FILE: &str = "summary.json";

const MSE_HEADER: &str = "m,sigma_n,length_scale,iter,mse_x,mse_f,log10_mse_x,log10_mse_f";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExportFormat {
    #[default]
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExportPaths {
    pub table1: PathBuf,
    pub table2: PathBuf,
    pub mse_curves: PathBuf,
    pub snapshots: PathBuf,
    pub convergence: PathBuf,
    pub traces: PathBuf,
    pub incumbents: PathBuf,
    pub runs: PathBuf,
    pub summary: PathBuf,
}

impl ExportPaths {
    pub fn all(&self) -> Vec<&Path> {
        vec![
            &self.table1,
            &self.table2,
            &self.mse_curves,
            &self.snapshots,
            &self.convergence,
            &self.traces,
            &self.incumbents,
            &self.runs,
            &self.summary,
        ]
    }
}

/// Writes `contents` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    std::fs::write(&tmp, contents).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        io(e)
    })
}

fn row(out: &mut String, fields: &[String]) {
    out.push_str(&fields.join(","));
    out.push('\n');
}

/// Shortest round-trip form, used for labels such as hyperparameter values.
fn label(x: f64) -> String {
    format!("{x}")
}

fn table1(res: &ExperimentResult) -> String {
    let mut out = String::new();
    let mut header = vec!["m".to_string(), "statistic".to_string()];
    header.extend(res.stats.thetas.iter().map(|t| format!("theta={}", label(*t))));
    row(&mut out, &header);
    for r in &res.stats.rows {
        for (name, pick) in [
            ("mean", (|c: &super::Moments| c.mean) as fn(&super::Moments) -> f64),
            ("var", |c| c.var),
            ("sd", |c| c.sd),
        ] {
            let mut fields = vec![r.m.to_string(), name.to_string()];
            fields.extend(r.cells.iter().map(|c| fmt_f64(pick(c))));
            row(&mut out, &fields);
        }
    }
    if !res.stats.rows.is_empty() {
        let mut fields = vec!["kalman".to_string(), "loglik".to_string()];
        fields.extend(res.stats.kalman.iter().map(|v| fmt_f64(*v)));
        row(&mut out, &fields);
    }
    out
}

/// Band relative to the group minimum of log10 MSE: `min`, `within_0.30`
/// (error variance at most twice the minimum), `above_1.0` (ten times or
/// more), or empty.
fn band(value: f64, min: f64) -> &'static str {
    let d = value - min;
    if value == min {
        "min"
    } else if d <= 0.30 {
        "within_0.30"
    } else if d > 1.0 {
        "above_1.0"
    } else {
        ""
    }
}

fn table2(res: &ExperimentResult) -> String {
    let mut out = String::new();
    row(
        &mut out,
        &[
            "iter",
            "m",
            "sigma_n",
            "length_scale",
            "log10_mse_x",
            "band_x",
            "log10_mse_f",
            "band_f",
        ]
        .map(String::from),
    );
    let mut ms: Vec<usize> = res.curves.cells.iter().map(|c| c.m).collect();
    ms.dedup();
    for &iter in &res.config.table_iters {
        for &m in &ms {
            let group: Vec<&CurveSet> = res
                .curves
                .cells
                .iter()
                .filter(|c| c.m == m && iter < c.mse_x.len())
                .collect();
            let min_of = |f: &dyn Fn(&CurveSet) -> f64| group.iter().map(|c| f(c)).fold(f64::INFINITY, f64::min);
            let min_x = min_of(&|c| c.mse_x[iter].log10());
            let min_f = min_of(&|c| c.mse_f[iter].log10());
            for c in &group {
                let lx = c.mse_x[iter].log10();
                let lf = c.mse_f[iter].log10();
                row(
                    &mut out,
                    &[
                        iter.to_string(),
                        m.to_string(),
                        label(c.sigma_n),
                        label(c.length_scale),
                        fmt_f64(lx),
                        band(lx, min_x).to_string(),
                        fmt_f64(lf),
                        band(lf, min_f).to_string(),
                    ],
                );
            }
        }
    }
    out
}

fn mse_curves(curves: &MSECurves) -> String {
    let mut out = String::new();
    out.push_str(MSE_HEADER);
    out.push('\n');
    for c in &curves.cells {
        for (i, (x, f)) in c.mse_x.iter().zip(&c.mse_f).enumerate() {
            row(
                &mut out,
                &[
                    c.m.to_string(),
                    label(c.sigma_n),
                    label(c.length_scale),
                    i.to_string(),
                    fmt_f64(*x),
                    fmt_f64(*f),
                    fmt_f64(x.log10()),
                    fmt_f64(f.log10()),
                ],
            );
        }
    }
    out
}

fn snapshots(res: &ExperimentResult) -> Result<String> {
    let cfg = &res.config;
    let mut out = String::new();
    row(
        &mut out,
        &[
            "m",
            "sigma_n",
            "length_scale",
            "replicate",
            "iter",
            "kappa",
            "theta",
            "mean",
            "lower",
            "upper",
        ]
        .map(String::from),
    );
    let (lo, hi) = cfg.bounds;
    let n = cfg.snapshot_grid;
    for cell in &res.cells {
        let Some(run) = cell.runs.first() else { continue };
        let hp = gp::GPHyperParams::new(cfg.sigma_f, cell.length_scale, cell.sigma_n)?;
        for &iter in &cfg.snapshot_iters {
            if iter > run.trace.iterations() {
                continue;
            }
            let post = gp::fit(&run.trace.dataset_at(iter)?, &hp)?;
            let k = kappa(iter.max(1), cfg.delta)?;
            for j in 0..n {
                let x = j as f64 / (n - 1) as f64;
                let (mean, var) = post.predict(x);
                let s = var.sqrt();
                row(
                    &mut out,
                    &[
                        cell.m.to_string(),
                        label(cell.sigma_n),
                        label(cell.length_scale),
                        run.replicate.to_string(),
                        iter.to_string(),
                        fmt_f64(k),
                        fmt_f64(if j + 1 == n { hi } else { lo + (hi - lo) * x }),
                        fmt_f64(mean),
                        fmt_f64(mean - k * s),
                        fmt_f64(mean + k * s),
                    ],
                );
            }
        }
    }
    Ok(out)
}

fn convergence(res: &ExperimentResult) -> String {
    let (lo, hi) = res.config.bounds;
    let mut out = String::new();
    row(
        &mut out,
        &["m", "sigma_n", "length_scale", "replicate", "t", "dx", "df"].map(String::from),
    );
    for cell in &res.cells {
        for run in &cell.runs {
            for (t, w) in run.trace.incumbents().windows(2).enumerate() {
                let dx = ((w[1].incumbent_x - w[0].incumbent_x) / (hi - lo)).abs();
                let df = (w[1].incumbent_mean - w[0].incumbent_mean).abs();
                row(
                    &mut out,
                    &[
                        cell.m.to_string(),
                        label(cell.sigma_n),
                        label(cell.length_scale),
                        run.replicate.to_string(),
                        (t + 1).to_string(),
                        fmt_f64(dx),
                        fmt_f64(df),
                    ],
                );
            }
        }
    }
    out
}

fn traces(res: &ExperimentResult) -> String {
    let mut out = String::new();
    row(
        &mut out,
        &[
            "m",
            "sigma_n",
            "length_scale",
            "replicate",
            "t",
            "x_evaluated",
            "raw_value",
            "std_value",
            "kappa",
            "incumbent_x",
            "incumbent_mean",
        ]
        .map(String::from),
    );
    for cell in &res.cells {
        for run in &cell.runs {
            for r in &run.trace.records {
                row(
                    &mut out,
                    &[
                        cell.m.to_string(),
                        label(cell.sigma_n),
                        label(cell.length_scale),
                        run.replicate.to_string(),
                        r.t.to_string(),
                        fmt_f64(r.x_evaluated),
                        fmt_f64(r.raw_value),
                        fmt_f64(r.std_value),
                        fmt_f64(r.kappa),
                        fmt_f64(r.incumbent_x),
                        fmt_f64(r.incumbent_mean),
                    ],
                );
            }
        }
    }
    out
}

fn incumbents(res: &ExperimentResult) -> String {
    let mut out = String::new();
    row(
        &mut out,
        &[
            "m",
            "sigma_n",
            "length_scale",
            "replicate",
            "iter",
            "theta_hat",
            "loglik_kf",
        ]
        .map(String::from),
    );
    for cell in &res.cells {
        for run in &cell.runs {
            for (i, (th, ll)) in run.incumbent_theta.iter().zip(&run.incumbent_loglik).enumerate() {
                row(
                    &mut out,
                    &[
                        cell.m.to_string(),
                        label(cell.sigma_n),
                        label(cell.length_scale),
                        run.replicate.to_string(),
                        i.to_string(),
                        fmt_f64(*th),
                        fmt_f64(*ll),
                    ],
                );
            }
        }
    }
    out
}

fn runs(res: &ExperimentResult) -> String {
    let mut out = String::new();
    row(
        &mut out,
        &[
            "m",
            "sigma_n",
            "length_scale",
            "replicate",
            "final_theta",
            "final_loglik_kf",
            "converged_at",
        ]
        .map(String::from),
    );
    for cell in &res.cells {
        for run in &cell.runs {
            let (Some(th), Some(ll)) = (run.incumbent_theta.last(), run.incumbent_loglik.last()) else {
                continue;
            };
            row(
                &mut out,
                &[
                    cell.m.to_string(),
                    label(cell.sigma_n),
                    label(cell.length_scale),
                    run.replicate.to_string(),
                    fmt_f64(*th),
                    fmt_f64(*ll),
                    run.trace.converged_at.map(|t| t.to_string()).unwrap_or_default(),
                ],
            );
        }
    }
    out
}

#[derive(Serialize)]
struct NormalizerEntry {
    m: usize,
    #[serde(flatten)]
    normalizer: Normalizer,
}

#[derive(Serialize)]
struct Summary<'a> {
    software_version: &'static str,
    master_seed: u64,
    theta_star: f64,
    loglik_star: f64,
    normalizers: Vec<NormalizerEntry>,
    config: &'a super::ExperimentConfig,
}

fn summary(res: &ExperimentResult) -> Result<String> {
    let mut normalizers: Vec<NormalizerEntry> = Vec::new();
    for c in &res.cells {
        if normalizers.last().map(|n| n.m) != Some(c.m) {
            normalizers.push(NormalizerEntry {
                m: c.m,
                normalizer: c.normalizer,
            });
        }
    }
    let s = Summary {
        software_version: env!("CARGO_PKG_VERSION"),
        master_seed: res.config.master_seed,
        theta_star: res.mle.theta_star,
        loglik_star: res.mle.loglik_star,
        normalizers,
        config: &res.config,
    };
    let mut text = serde_json::to_string_pretty(&s).map_err(|e| Error::invalid(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

/// Writes every export file into `dir`, creating it when needed.
pub fn export_tables(res: &ExperimentResult, dir: &Path, format: ExportFormat) -> Result<ExportPaths> {
    let ExportFormat::Csv = format;
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let paths = ExportPaths {
        table1: dir.join(TABLE1_FILE),
        table2: dir.join(TABLE2_FILE),
        mse_curves: dir.join(MSE_CURVES_FILE),
        snapshots: dir.join(SNAPSHOT_FILE),
        convergence: dir.join(CONVERGENCE_FILE),
        traces: dir.join(TRACES_FILE),
        incumbents: dir.join(INCUMBENTS_FILE),
        runs: dir.join(RUNS_FILE),
        summary: dir.join(SUMMARY_FILE),
    };
    write_atomic(&paths.table1, table1(res).as_bytes())?;
    write_atomic(&paths.table2, table2(res).as_bytes())?;
    write_atomic(&paths.mse_curves, mse_curves(&res.curves).as_bytes())?;
    write_atomic(&paths.snapshots, snapshots(res)?.as_bytes())?;
    write_atomic(&paths.convergence, convergence(res).as_bytes())?;
    write_atomic(&paths.traces, traces(res).as_bytes())?;
    write_atomic(&paths.incumbents, incumbents(res).as_bytes())?;
    write_atomic(&paths.runs, runs(res).as_bytes())?;
    write_atomic(&paths.summary, summary(res)?.as_bytes())?;
    Ok(paths)
}

/// Parses a file written in the MSE-curve format back into [`MSECurves`].
pub fn read_mse_curves(path: &Path) -> Result<MSECurves> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let bad = |line: usize, msg: &str| Error::Parse {
        path: path.to_path_buf(),
        message: format!("line {line}: {msg}"),
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == MSE_HEADER => {}
        _ => return Err(bad(1, "unexpected header")),
    }
    let mut curves = MSECurves::default();
    for (idx, line) in lines {
        let n = idx + 1;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(bad(n, "expected 8 fields"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(n, &format!("not a number: {s:?}")));
        let m: usize = f[0].parse().map_err(|_| bad(n, "bad particle count"))?;
        let (sigma_n, length_scale) = (num(f[1])?, num(f[2])?);
        let iter: usize = f[3].parse().map_err(|_| bad(n, "bad iteration"))?;
        let same_cell = curves
            .cells
            .last()
            .is_some_and(|c| c.m == m && c.sigma_n == sigma_n && c.length_scale == length_scale);
        if !same_cell {
            curves.cells.push(CurveSet {
                m,
                sigma_n,
                length_scale,
                mse_x: Vec::new(),
                mse_f: Vec::new(),
            });
        }
        let cell = curves.cells.last_mut().expect("cell pushed above");
        if iter != cell.mse_x.len() {
            return Err(bad(n, "iterations must be consecutive from 0"));
        }
        cell.mse_x.push(num(f[4])?);
        cell.mse_f.push(num(f[5])?);
    }
    Ok(curves)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bands() {
        assert_eq!(band(-6.0, -6.0), "min");
        assert_eq!(band(f64::NEG_INFINITY, f64::NEG_INFINITY), "min");
        assert_eq!(band(-5.8, -6.0), "within_0.30");
        assert_eq!(band(-5.5, -6.0), "");
        assert_eq!(band(-4.5, -6.0), "above_1.0");
    }

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        write_atomic(&p, b"one\n").unwrap();
        write_atomic(&p, b"two\n").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two\n");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
        assert!(write_atomic(&dir.path().join("missing/a.csv"), b"x").is_err());
    }
}
