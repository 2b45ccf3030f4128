//! Experiment execution: dataset plumbing, estimator training and the
//! support-estimation table / noise sweep.
//!
//! Every cell derives its seed from the master seed and *stable keys*
//! (quantized measurement rate, bin id, trial index), never from list
//! positions, so a single cell can be replayed in isolation under a
//! narrowed config.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harness::config::{CsenParams, ExperimentConfig};
use crate::harness::idx::{load_idx, resolve_idx_file};
use crate::harness::report::{ExperimentRecord, PlotSeries, TimingRecord};
use crate::metrics::{nmse_db, support_metrics};
use crate::model::{
    csen1_init, csen2_init, threshold_support, train, tune_threshold, CsenModel, EpochStats,
    LossKind, TrainConfig, TrainSample,
};
use crate::numerics::{build_proxy_operator, gaussian_matrix, Matrix, ProxyKind, ProxyOperator};
use crate::rng::{self, mix};
use crate::sensing::{mask_from_signal, sense, SensingModel, SOLVER_SUPPORT_TOL};
use crate::solvers::{basis_pursuit_path, debias_ls, omp, PathConfig};

pub const GRID: (usize, usize) = (28, 28);
pub const N: usize = 784;

// Seed derivation tags. The noise sweep shares the se-table tag so its
// clean condition reproduces the se-table cell bit for bit.
pub(crate) const TAG_SE: u64 = 1;
pub(crate) const TAG_PHASE: u64 = 3;
pub(crate) const TAG_RECOVERY: u64 = 4;
pub(crate) const TAG_DICT: u64 = 5;
pub(crate) const TAG_SPLIT: u64 = 6;

/// Stable seed key for a measurement rate.
pub(crate) fn mr_key(mr: f64) -> u64 {
    (mr * 1e4).round() as u64
}

/// In-memory MNIST.
pub struct MnistData {
    pub train: Vec<Vec<f64>>,
    pub train_labels: Vec<u8>,
    pub test: Vec<Vec<f64>>,
    pub test_labels: Vec<u8>,
}

pub fn load_mnist(dir: &Path) -> Result<MnistData> {
    let train = load_idx(
        resolve_idx_file(dir, "train-images-idx3-ubyte")?,
        resolve_idx_file(dir, "train-labels-idx1-ubyte")?,
    )?;
    let test = load_idx(
        resolve_idx_file(dir, "t10k-images-idx3-ubyte")?,
        resolve_idx_file(dir, "t10k-labels-idx1-ubyte")?,
    )?;
    let (train, train_labels): (Vec<_>, Vec<_>) = train.into_iter().unzip();
    let (test, test_labels): (Vec<_>, Vec<_>) = test.into_iter().unzip();
    if train.iter().chain(&test).any(|x| x.len() != N) {
        return Err(Error::invalid("expected 28x28 images"));
    }
    Ok(MnistData {
        train,
        train_labels,
        test,
        test_labels,
    })
}

/// Number of measurements for a rate over n ambient dimensions.
pub fn measurement_count(mr: f64, n: usize) -> usize {
    ((mr * n as f64).round() as usize).clamp(1, n)
}

/// Deterministic train/validation index split over the training file.
pub fn split_indices(total: usize, train_size: usize, val_size: usize, master: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if train_size + val_size > total {
        return Err(Error::Config(format!(
            "train {train_size} + val {val_size} exceeds the {total} available samples"
        )));
    }
    let mut idx: Vec<usize> = (0..total).collect();
    use rand::seq::SliceRandom;
    idx.shuffle(&mut rng::seeded(mix(master, &[TAG_SPLIT])));
    let train = idx[..train_size].to_vec();
    let val = idx[train_size..train_size + val_size].to_vec();
    Ok((train, val))
}

/// One evaluation instance: the signal, its measurement, the proxy plane
/// and the true support.
pub struct Cell {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub proxy_plane: Matrix,
    pub truth: Vec<usize>,
}

/// Everything shared by the methods at one measurement rate.
pub struct SeContext {
    pub mr: f64,
    pub m: usize,
    pub model: SensingModel,
    pub proxy: ProxyOperator,
    pub train_samples: Vec<TrainSample>,
    pub val_samples: Vec<TrainSample>,
    pub val_truths: Vec<Vec<usize>>,
    /// Clean validation measurements, for baselines that need a decoder
    /// other than the configured proxy.
    pub val_ys: Vec<Vec<f64>>,
}

fn proxy_kind_of(cfg: &ExperimentConfig) -> ProxyKind {
    match cfg.proxy.kind.as_str() {
        "mc" => ProxyKind::MaxCorrelation,
        _ => ProxyKind::Lmmse {
            lambda: cfg.proxy.lambda,
        },
    }
}

/// Build the sensing model, proxy operator and clean train/val proxy sets
/// for one measurement rate.
pub fn se_context(cfg: &ExperimentConfig, data: &MnistData, mr: f64) -> Result<SeContext> {
    let m = measurement_count(mr, N);
    let a = gaussian_matrix(m, N, mix(cfg.master_seed, &[TAG_SE, mr_key(mr), 0]))?;
    let model = SensingModel::canonical(a)?;
    let proxy = build_proxy_operator(model.d(), proxy_kind_of(cfg), GRID)?;
    let (train_idx, val_idx) =
        split_indices(data.train.len(), cfg.train_size, cfg.val_size, cfg.master_seed)?;
    let train_samples = make_train_samples(&model, &proxy, &data.train, &train_idx)?;
    let val_samples = make_train_samples(&model, &proxy, &data.train, &val_idx)?;
    let val_truths = val_samples
        .iter()
        .map(|s| mask_support_indices(&s.mask))
        .collect();
    let val_ys = val_idx
        .iter()
        .map(|&i| model.d().matvec(&data.train[i]))
        .collect();
    Ok(SeContext {
        mr,
        m,
        model,
        proxy,
        train_samples,
        val_samples,
        val_truths,
        val_ys,
    })
}

fn mask_support_indices(mask: &Matrix) -> Vec<usize> {
    mask.data()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.5)
        .map(|(i, _)| i)
        .collect()
}

fn make_train_samples(
    model: &SensingModel,
    proxy: &ProxyOperator,
    images: &[Vec<f64>],
    idx: &[usize],
) -> Result<Vec<TrainSample>> {
    idx.par_iter()
        .map(|&i| {
            let x = &images[i];
            let batch = sense(model, x, None, 0)?;
            let plane = proxy.apply(batch.y(0))?;
            let inst = mask_from_signal(x, 0.0)?;
            let mask = Matrix::new(GRID.0, GRID.1, inst.mask().to_vec())?;
            Ok(TrainSample { proxy: plane, mask })
        })
        .collect()
}

/// Measure and proxy the test set, optionally with per-sample noise.
pub fn test_cells(
    cfg: &ExperimentConfig,
    ctx: &SeContext,
    data: &MnistData,
    snr_db: Option<f64>,
) -> Result<Vec<Cell>> {
    let count = cfg.test_size.min(data.test.len());
    let noise_base = mix(cfg.master_seed, &[TAG_SE, mr_key(ctx.mr), 1]);
    (0..count)
        .into_par_iter()
        .map(|i| {
            let x = &data.test[i];
            let batch = sense(&ctx.model, x, snr_db, mix(noise_base, &[i as u64]))?;
            let y = batch.y(0).to_vec();
            let proxy_plane = ctx.proxy.apply(&y)?;
            let truth = mask_from_signal(x, 0.0)?.support().to_vec();
            Ok(Cell {
                x: x.clone(),
                y,
                proxy_plane,
                truth,
            })
        })
        .collect()
}

/// A trained support estimator with its tuned threshold.
pub struct TrainedEstimator {
    pub arch: String,
    pub model: CsenModel,
    pub tau: f64,
    pub val_f1_at_tau: f64,
    pub curve: Vec<EpochStats>,
    pub epochs: usize,
}

fn train_config(p: &CsenParams, epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        lr: p.lr,
        beta1: p.beta1,
        beta2: p.beta2,
        adam_eps: p.adam_eps,
        epochs,
        batch_size: p.batch_size,
        loss: LossKind::Mse,
        seed,
    }
}

pub fn init_arch(arch: &str, grid: (usize, usize), seed: u64) -> Result<CsenModel> {
    match arch {
        "csen" | "csen1" => csen1_init(grid, seed),
        "csen2" => csen2_init(grid, seed),
        other => Err(Error::Config(format!("unknown csen arch {other:?}"))),
    }
}

fn arch_key(arch: &str) -> u64 {
    match arch {
        "csen" | "csen1" => 1,
        _ => 2,
    }
}

/// Train one architecture on the context's train split and tune its
/// threshold on the validation split (unless the config pins τ).
pub fn train_estimator(
    cfg: &ExperimentConfig,
    ctx: &SeContext,
    arch: &str,
) -> Result<TrainedEstimator> {
    let seed = mix(cfg.master_seed, &[TAG_SE, mr_key(ctx.mr), 2, arch_key(arch)]);
    let init = init_arch(arch, GRID, seed)?;
    let tcfg = train_config(&cfg.csen, cfg.csen.epochs, mix(seed, &[1]));
    let (model, curve) = train(init, &ctx.train_samples, &ctx.val_samples, &tcfg)?;
    let (tau, val_f1) = match cfg.csen.tau {
        Some(t) => (t, f64::NAN),
        None => tune_threshold(&model, &ctx.val_samples)?,
    };
    Ok(TrainedEstimator {
        arch: arch.to_string(),
        model,
        tau,
        val_f1_at_tau: val_f1,
        curve,
        epochs: cfg.csen.epochs,
    })
}

/// Macro-averaged support metrics plus the mean debiased NMSE.
#[derive(Debug, Clone, Copy)]
pub struct SupportEval {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub ce: f64,
    pub nmse_db: Option<f64>,
    pub n: usize,
}

fn average_eval(per_sample: &[(f64, f64, f64, f64, Option<f64>)]) -> SupportEval {
    let n = per_sample.len();
    let mut acc = (0.0, 0.0, 0.0, 0.0);
    let mut nmse_sum = 0.0;
    let mut nmse_n = 0usize;
    for (p, r, f, c, nm) in per_sample {
        acc.0 += p;
        acc.1 += r;
        acc.2 += f;
        acc.3 += c;
        if let Some(v) = nm {
            nmse_sum += v;
            nmse_n += 1;
        }
    }
    let nf = n as f64;
    SupportEval {
        precision: acc.0 / nf,
        recall: acc.1 / nf,
        f1: acc.2 / nf,
        ce: acc.3 / nf,
        nmse_db: (nmse_n > 0).then(|| nmse_sum / nmse_n as f64),
        n,
    }
}

fn eval_supports<F>(cells: &[Cell], m: usize, d: &Matrix, estimate: F) -> Result<SupportEval>
where
    F: Fn(&Cell) -> Result<Vec<usize>> + Sync,
{
    let per: Result<Vec<_>> = cells
        .par_iter()
        .map(|cell| {
            let est = estimate(cell)?;
            let sm = support_metrics(&est, &cell.truth, N);
            // Debiased reconstruction on the estimated support, when the
            // restricted least squares is determined.
            let nm = if !est.is_empty() && est.len() <= m {
                match debias_ls(d, &cell.y, &est) {
                    Ok(xh) => nmse_db(&xh, &cell.x).ok(),
                    Err(_) => None,
                }
            } else if est.is_empty() {
                nmse_db(&vec![0.0; N], &cell.x).ok()
            } else {
                None
            };
            Ok((sm.precision, sm.recall, sm.f1, sm.ce, nm))
        })
        .collect();
    Ok(average_eval(&per?))
}

/// Evaluate a trained estimator on measured cells.
pub fn eval_estimator(est: &TrainedEstimator, ctx: &SeContext, cells: &[Cell]) -> Result<SupportEval> {
    eval_supports(cells, ctx.m, ctx.model.d(), |cell| {
        let p = est.model.forward(&cell.proxy_plane)?;
        Ok(threshold_support(&p, est.tau))
    })
}

/// Support from thresholding a normalized linear decoder output.
fn proxy_threshold_support(plane: &Matrix, tau: f64) -> Vec<usize> {
    let max = plane.data().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if max == 0.0 {
        return Vec::new();
    }
    plane
        .data()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v.abs() / max > tau)
        .map(|(i, _)| i)
        .collect()
}

fn tune_proxy_threshold(maps: &[Matrix], truths: &[Vec<usize>]) -> (f64, f64) {
    let mut best = (0.5, f64::NEG_INFINITY);
    for tau in crate::model::threshold_grid() {
        let mut sum = 0.0;
        for (plane, truth) in maps.iter().zip(truths) {
            let est = proxy_threshold_support(plane, tau);
            sum += support_metrics(&est, truth, N).f1;
        }
        let mean = sum / maps.len() as f64;
        if mean > best.1 {
            best = (tau, mean);
        }
    }
    best
}

struct MethodResult {
    eval: SupportEval,
    tau: Option<f64>,
    solver_lambda: Option<f64>,
    epochs: Option<usize>,
    train_seconds: f64,
}

fn run_se_method(
    cfg: &ExperimentConfig,
    ctx: &SeContext,
    cells: &[Cell],
    method: &str,
) -> Result<MethodResult> {
    match method {
        "csen" | "csen1" | "csen2" => {
            let t0 = Instant::now();
            let est = train_estimator(cfg, ctx, method)?;
            let train_seconds = t0.elapsed().as_secs_f64();
            let eval = eval_estimator(&est, ctx, cells)?;
            Ok(MethodResult {
                eval,
                tau: Some(est.tau),
                solver_lambda: None,
                epochs: Some(est.epochs),
                train_seconds,
            })
        }
        "mc" | "lmmse" => {
            let kind = if method == "mc" {
                ProxyKind::MaxCorrelation
            } else {
                ProxyKind::Lmmse {
                    lambda: cfg.proxy.lambda,
                }
            };
            let op = build_proxy_operator(ctx.model.d(), kind, GRID)?;
            // Tune the magnitude threshold on this decoder's own
            // validation output.
            let val_planes: Result<Vec<Matrix>> = ctx
                .val_ys
                .par_iter()
                .map(|y| op.apply(y))
                .collect();
            let (tau, _) = tune_proxy_threshold(&val_planes?, &ctx.val_truths);
            let eval = eval_supports(cells, ctx.m, ctx.model.d(), |cell| {
                let plane = op.apply(&cell.y)?;
                Ok(proxy_threshold_support(&plane, tau))
            })?;
            Ok(MethodResult {
                eval,
                tau: Some(tau),
                solver_lambda: match kind {
                    ProxyKind::Lmmse { lambda } => Some(lambda),
                    ProxyKind::MaxCorrelation => None,
                },
                epochs: None,
                train_seconds: 0.0,
            })
        }
        "lasso" => {
            let path = path_config(cfg);
            let eval = eval_supports(cells, ctx.m, ctx.model.d(), |cell| {
                let sol = basis_pursuit_path(ctx.model.d(), &cell.y, None, &path)?;
                Ok(mask_from_signal(&sol.x_hat, SOLVER_SUPPORT_TOL)?.support().to_vec())
            })?;
            Ok(MethodResult {
                eval,
                tau: None,
                solver_lambda: None,
                epochs: None,
                train_seconds: 0.0,
            })
        }
        "omp" => {
            let k_max = cfg.solver.omp_k_max.min(ctx.m);
            let eval = eval_supports(cells, ctx.m, ctx.model.d(), |cell| {
                let ynorm = cell.y.iter().map(|v| v * v).sum::<f64>().sqrt();
                let sol = omp(ctx.model.d(), &cell.y, k_max, cfg.solver.omp_res_tol * ynorm)?;
                Ok(mask_from_signal(&sol.x_hat, SOLVER_SUPPORT_TOL)?.support().to_vec())
            })?;
            Ok(MethodResult {
                eval,
                tau: None,
                solver_lambda: None,
                epochs: None,
                train_seconds: 0.0,
            })
        }
        other => Err(Error::Config(format!(
            "method {other:?} is not a support-estimation method"
        ))),
    }
}

pub fn path_config(cfg: &ExperimentConfig) -> PathConfig {
    PathConfig {
        stages: cfg.solver.path_stages,
        decay: cfg.solver.path_decay,
        stage_iters: cfg.solver.path_stage_iters,
        rel_tol: cfg.solver.rel_tol,
    }
}

/// Everything an experiment produces before persistence.
pub struct ExperimentOutcome {
    pub records: Vec<ExperimentRecord>,
    pub timings: Vec<TimingRecord>,
    pub plots: Vec<PlotSeries>,
    /// Phase transition only: per method, the (mr, ρ) 50%-success border.
    pub borders: Vec<(String, Vec<(f64, f64)>)>,
}

impl ExperimentOutcome {
    pub(crate) fn new_empty() -> Self {
        ExperimentOutcome {
            records: Vec::new(),
            timings: Vec::new(),
            plots: Vec::new(),
            borders: Vec::new(),
        }
    }
}

/// Support-estimation table: per (measurement rate, method), train where
/// needed and macro-average the test metrics.
pub fn run_se_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    run_se_like(cfg, "se-table", &[cfg.snr_db])
}

/// F1-versus-noise sweep at the first configured measurement rate. Models
/// are trained on clean data once, with the same seed path as the
/// se-table, then evaluated at every noise level.
pub fn run_noise_sweep(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let mut narrowed = cfg.clone();
    narrowed.mr_list = vec![cfg.mr_list[0]];
    run_se_like(&narrowed, "noise-sweep", &cfg.snr_db_list.clone())
}

fn run_se_like(
    cfg: &ExperimentConfig,
    experiment: &str,
    snr_levels: &[Option<f64>],
) -> Result<ExperimentOutcome> {
    let data = load_mnist(&cfg.dataset)?;
    let mut out = ExperimentOutcome::new_empty();
    let mut f1_vs_mr: Vec<(f64, f64, String)> = Vec::new();
    let mut f1_vs_snr: Vec<(f64, f64, String)> = Vec::new();
    for &mr in &cfg.mr_list {
        let ctx = se_context(cfg, &data, mr)?;
        // Trained estimators are shared across noise levels.
        let mut trained: Vec<(String, TrainedEstimator, f64)> = Vec::new();
        for method in &cfg.methods {
            if matches!(method.as_str(), "csen" | "csen1" | "csen2") {
                let t0 = Instant::now();
                let est = train_estimator(cfg, &ctx, method)?;
                trained.push((method.clone(), est, t0.elapsed().as_secs_f64()));
            }
        }
        for &snr in snr_levels {
            let cells = test_cells(cfg, &ctx, &data, snr)?;
            for method in &cfg.methods {
                let t0 = Instant::now();
                let (eval, tau, solver_lambda, epochs, train_s) =
                    if let Some((_, est, ts)) = trained.iter().find(|(m, _, _)| m == method) {
                        let e = eval_estimator(est, &ctx, &cells)?;
                        (e, Some(est.tau), None, Some(est.epochs), *ts)
                    } else {
                        let r = run_se_method(cfg, &ctx, &cells, method)?;
                        (r.eval, r.tau, r.solver_lambda, r.epochs, r.train_seconds)
                    };
                let mut rec = ExperimentRecord::blank(
                    experiment,
                    method,
                    ctx.m as f64 / N as f64,
                    mix(cfg.master_seed, &[TAG_SE, mr_key(mr), 0]),
                );
                rec.snr_db = snr;
                rec.n_samples = eval.n;
                rec.precision = Some(eval.precision);
                rec.recall = Some(eval.recall);
                rec.f1 = Some(eval.f1);
                rec.ce = Some(eval.ce);
                rec.nmse_db = eval.nmse_db;
                rec.tau = tau;
                rec.proxy_lambda = cfg.proxy.lambda;
                rec.solver_lambda = solver_lambda;
                rec.epochs = epochs;
                out.records.push(rec);
                out.timings.push(TimingRecord {
                    experiment: experiment.into(),
                    method: method.clone(),
                    mr,
                    what: "train".into(),
                    seconds: train_s,
                });
                out.timings.push(TimingRecord {
                    experiment: experiment.into(),
                    method: method.clone(),
                    mr,
                    what: "eval".into(),
                    seconds: t0.elapsed().as_secs_f64(),
                });
                f1_vs_mr.push((mr, eval.f1, method.clone()));
                f1_vs_snr.push((snr.unwrap_or(f64::INFINITY), eval.f1, method.clone()));
            }
        }
    }
    if experiment == "se-table" {
        out.plots.push(PlotSeries {
            file: "f1_vs_mr.csv".into(),
            x_label: "measurement rate".into(),
            y_label: "mean F1".into(),
            rows: f1_vs_mr,
        });
    } else {
        out.plots.push(PlotSeries {
            file: "f1_vs_snr.csv".into(),
            x_label: "snr_db (inf = clean)".into(),
            y_label: "mean F1".into(),
            rows: f1_vs_snr,
        });
    }
    Ok(out)
}
