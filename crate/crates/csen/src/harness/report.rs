//! Deterministic result persistence: results.csv, config.json, timing and
//! plot data.
//!
//! Metric values are printed with 17 significant digits so re-reading
//! results.csv reconstructs every f64 bit-exactly. Wall-clock timings are
//! deliberately kept out of results.csv (they can never be reproducible);
//! they land in timings.csv instead.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;

/// One scored cell of an experiment grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub experiment: String,
    pub method: String,
    pub mr: f64,
    pub snr_db: Option<f64>,
    pub trial: u64,
    pub rho_bin: Option<usize>,
    pub rho: Option<f64>,
    /// Cell seed; enough to replay this record in isolation.
    pub seed: u64,
    pub n_samples: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub ce: Option<f64>,
    pub nmse_db: Option<f64>,
    pub accuracy: Option<f64>,
    pub successes: Option<usize>,
    pub cell_trials: Option<usize>,
    pub tau: Option<f64>,
    pub proxy_lambda: f64,
    pub solver_lambda: Option<f64>,
    pub epochs: Option<usize>,
}

impl ExperimentRecord {
    pub fn blank(experiment: &str, method: &str, mr: f64, seed: u64) -> Self {
        ExperimentRecord {
            experiment: experiment.to_string(),
            method: method.to_string(),
            mr,
            snr_db: None,
            trial: 0,
            rho_bin: None,
            rho: None,
            seed,
            n_samples: 0,
            precision: None,
            recall: None,
            f1: None,
            ce: None,
            nmse_db: None,
            accuracy: None,
            successes: None,
            cell_trials: None,
            tau: None,
            proxy_lambda: f64::NAN,
            solver_lambda: None,
            epochs: None,
        }
    }

    pub fn success_rate(&self) -> Option<f64> {
        match (self.successes, self.cell_trials) {
            (Some(s), Some(t)) if t > 0 => Some(s as f64 / t as f64),
            _ => None,
        }
    }
}

/// Wall-clock entry, reported separately from the deterministic records.
#[derive(Debug, Clone)]
pub struct TimingRecord {
    pub experiment: String,
    pub method: String,
    pub mr: f64,
    pub what: String,
    pub seconds: f64,
}

/// One plot-data file: rows of (x, y, series).
#[derive(Debug, Clone)]
pub struct PlotSeries {
    pub file: String,
    pub x_label: String,
    pub y_label: String,
    pub rows: Vec<(f64, f64, String)>,
}

const RESULTS_HEADER: &str = "experiment,method,mr,snr_db,trial,rho_bin,rho,seed,n_samples,\
precision,recall,f1,ce,nmse_db,accuracy,successes,cell_trials,tau,proxy_lambda,solver_lambda,epochs";

/// Full-precision decimal: 17 significant digits round-trip any f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn fmt_opt_usize(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Write `results.csv`, `timings.csv`, `config.json` and `plots/*.csv`
/// under `out`.
pub fn emit_report(
    cfg: &ExperimentConfig,
    records: &[ExperimentRecord],
    timings: &[TimingRecord],
    plots: &[PlotSeries],
    out: &Path,
) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_results_csv(&out.join("results.csv"), records)?;
    write_timings_csv(&out.join("timings.csv"), timings)?;
    write_config_json(cfg, records, &out.join("config.json"))?;
    let plots_dir = out.join("plots");
    fs::create_dir_all(&plots_dir).map_err(|e| Error::io(&plots_dir, e))?;
    for p in plots {
        write_plot_csv(&plots_dir.join(&p.file), p)?;
    }
    Ok(())
}

pub fn write_results_csv(path: &Path, records: &[ExperimentRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path, e);
    writeln!(w, "{RESULTS_HEADER}").map_err(io_err)?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.experiment,
            r.method,
            fmt_f64(r.mr),
            fmt_opt(r.snr_db),
            r.trial,
            fmt_opt_usize(r.rho_bin),
            fmt_opt(r.rho),
            r.seed,
            r.n_samples,
            fmt_opt(r.precision),
            fmt_opt(r.recall),
            fmt_opt(r.f1),
            fmt_opt(r.ce),
            fmt_opt(r.nmse_db),
            fmt_opt(r.accuracy),
            fmt_opt_usize(r.successes),
            fmt_opt_usize(r.cell_trials),
            fmt_opt(r.tau),
            fmt_f64(r.proxy_lambda),
            fmt_opt(r.solver_lambda),
            fmt_opt_usize(r.epochs),
        )
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Parse a results.csv produced by [`write_results_csv`].
pub fn read_results_csv(path: &Path) -> Result<Vec<ExperimentRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == RESULTS_HEADER => {}
        _ => {
            return Err(Error::Format {
                path: path.to_path_buf(),
                offset: 0,
                what: "results.csv header mismatch".into(),
            })
        }
    }
    let mut out = Vec::new();
    for (ln, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 21 {
            return Err(Error::Format {
                path: path.to_path_buf(),
                offset: 0,
                what: format!("line {}: expected 21 fields, got {}", ln + 2, f.len()),
            });
        }
        let pf = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| Error::Config(format!("line {}: {e}", ln + 2)))
        };
        let pof = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                pf(s).map(Some)
            }
        };
        let pou = |s: &str| -> Result<Option<usize>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse::<usize>()
                    .map(Some)
                    .map_err(|e| Error::Config(format!("line {}: {e}", ln + 2)))
            }
        };
        out.push(ExperimentRecord {
            experiment: f[0].to_string(),
            method: f[1].to_string(),
            mr: pf(f[2])?,
            snr_db: pof(f[3])?,
            trial: f[4]
                .parse()
                .map_err(|e| Error::Config(format!("line {}: {e}", ln + 2)))?,
            rho_bin: pou(f[5])?,
            rho: pof(f[6])?,
            seed: f[7]
                .parse()
                .map_err(|e| Error::Config(format!("line {}: {e}", ln + 2)))?,
            n_samples: f[8]
                .parse()
                .map_err(|e| Error::Config(format!("line {}: {e}", ln + 2)))?,
            precision: pof(f[9])?,
            recall: pof(f[10])?,
            f1: pof(f[11])?,
            ce: pof(f[12])?,
            nmse_db: pof(f[13])?,
            accuracy: pof(f[14])?,
            successes: pou(f[15])?,
            cell_trials: pou(f[16])?,
            tau: pof(f[17])?,
            proxy_lambda: pf(f[18])?,
            solver_lambda: pof(f[19])?,
            epochs: pou(f[20])?,
        });
    }
    Ok(out)
}

fn write_timings_csv(path: &Path, timings: &[TimingRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path, e);
    writeln!(w, "experiment,method,mr,what,seconds").map_err(io_err)?;
    for t in timings {
        writeln!(
            w,
            "{},{},{},{},{:.6}",
            t.experiment,
            t.method,
            fmt_f64(t.mr),
            t.what,
            t.seconds
        )
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

#[derive(Serialize)]
struct ConfigDump<'a> {
    version: &'static str,
    master_seed: u64,
    /// Cell seeds in record order.
    derived_seeds: Vec<u64>,
    config: &'a ExperimentConfig,
}

fn write_config_json(
    cfg: &ExperimentConfig,
    records: &[ExperimentRecord],
    path: &Path,
) -> Result<()> {
    let dump = ConfigDump {
        version: crate::VERSION,
        master_seed: cfg.master_seed,
        derived_seeds: records.iter().map(|r| r.seed).collect(),
        config: cfg,
    };
    let text = serde_json::to_string_pretty(&dump)
        .map_err(|e| Error::Config(format!("serialize config: {e}")))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Extract the `config` object back out of an emitted config.json.
pub fn read_config_json(path: &Path) -> Result<(ExperimentConfig, u64)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let v: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    let master = v
        .get("master_seed")
        .and_then(|s| s.as_u64())
        .ok_or_else(|| Error::Config("config.json missing master_seed".into()))?;
    let cfg_val = v
        .get("config")
        .ok_or_else(|| Error::Config("config.json missing config object".into()))?;
    let cfg = ExperimentConfig::from_json_str(&cfg_val.to_string())?;
    Ok((cfg, master))
}

fn write_plot_csv(path: &PathBuf, p: &PlotSeries) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path, e);
    writeln!(w, "x,y,series").map_err(io_err)?;
    writeln!(w, "# x = {}, y = {}", p.x_label, p.y_label).map_err(io_err)?;
    for (x, y, series) in &p.rows {
        writeln!(w, "{},{},{}", fmt_f64(*x), fmt_f64(*y), series).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}
