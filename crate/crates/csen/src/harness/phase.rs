//! Phase-transition study and the per-sample recovery comparison.
//!
//! The phase grid follows the standard protocol: for each (measurement
//! rate, sparsity bin) cell, draw test digits from that ρ bin, sense each
//! with an independent Gaussian matrix, recover with every method and
//! count successes at tol = 0.1. Learned weights come from a CSEN trained
//! once per measurement rate; at recovery time each trial's own proxy is
//! fed through it.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::experiments::{
    init_arch, load_mnist, measurement_count, mr_key, path_config, split_indices, MnistData,
    ExperimentOutcome, GRID, N, TAG_PHASE, TAG_RECOVERY,
};
use crate::harness::report::{ExperimentRecord, PlotSeries, TimingRecord};
use crate::metrics::{nmse_db, recovery_success};
use crate::model::{train, CsenModel, LossKind, TrainConfig, TrainSample};
use crate::numerics::{
    build_proxy_operator, cholesky_solve, gaussian_matrix, lu_solve, Matrix, ProxyKind,
};
use crate::rng::{self, mix};
use crate::sensing::{mask_from_signal, SensingModel};
use crate::solvers::{
    basis_pursuit_path, crc_solution, omp, weights_from_probability, SolverResult,
};

pub const SUCCESS_TOL: f64 = 0.1;

/// Sparsity bins over the empirical ρ distribution: equal-mass quantile
/// bins, each represented by its median ρ.
pub struct RhoBins {
    /// Image indices per bin, sorted by ρ.
    pub members: Vec<Vec<usize>>,
    /// Median ρ per bin.
    pub rho: Vec<f64>,
}

pub fn rho_bins(images: &[Vec<f64>], bins: usize) -> Result<RhoBins> {
    if bins == 0 {
        return Err(Error::invalid("need at least one rho bin"));
    }
    let mut order: Vec<(usize, f64)> = images
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let rho = mask_from_signal(x, 0.0).map(|s| s.rho())?;
            Ok((i, rho))
        })
        .collect::<Result<_>>()?;
    order.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    let n = order.len();
    if n < bins {
        return Err(Error::invalid("fewer images than bins"));
    }
    let mut members = Vec::with_capacity(bins);
    let mut rho = Vec::with_capacity(bins);
    for b in 0..bins {
        let lo = b * n / bins;
        let hi = (b + 1) * n / bins;
        let slice = &order[lo..hi];
        members.push(slice.iter().map(|(i, _)| *i).collect());
        rho.push(slice[slice.len() / 2].1);
    }
    Ok(RhoBins { members, rho })
}

/// A CSEN trained at one measurement rate, used as the weight source for
/// learning-aided recovery.
struct WeightSource {
    model: CsenModel,
    lambda: f64,
    epsilon: f64,
}

impl WeightSource {
    /// Probability map for a fresh (D, y) pair: build this trial's LMMSE
    /// proxy by a direct solve and run the network on it.
    fn probability_map(&self, d: &Matrix, y: &[f64]) -> Result<Matrix> {
        let x_tilde = lmmse_decode(d, y, self.lambda)?;
        let plane = Matrix::new(GRID.0, GRID.1, x_tilde)?;
        self.model.forward(&plane)
    }
}

/// x̃ = (DᵀD + λI)⁻¹Dᵀy without forming the full denoiser matrix.
fn lmmse_decode(d: &Matrix, y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let n = d.cols();
    let mut a = d.gram();
    for i in 0..n {
        let v = a.get(i, i);
        a.set(i, i, v + lambda);
    }
    let rhs = Matrix::new(n, 1, d.matvec_t(y))?;
    let x = match cholesky_solve(&a, &rhs) {
        Ok(x) => x,
        Err(_) => lu_solve(&a, &rhs)?,
    };
    Ok(x.into_data())
}

/// Train the weight-source network for one measurement rate on the
/// configured auxiliary budget.
fn train_weight_source(
    cfg: &ExperimentConfig,
    data: &MnistData,
    mr: f64,
    tag: u64,
) -> Result<(WeightSource, f64)> {
    let t0 = Instant::now();
    let m = measurement_count(mr, N);
    let seed = mix(cfg.master_seed, &[tag, mr_key(mr), 100]);
    let a = gaussian_matrix(m, N, seed)?;
    let model = SensingModel::canonical(a)?;
    let proxy = build_proxy_operator(
        model.d(),
        ProxyKind::Lmmse {
            lambda: cfg.proxy.lambda,
        },
        GRID,
    )?;
    let (train_idx, val_idx) = split_indices(
        data.train.len(),
        cfg.csen.aux_train_size,
        (cfg.csen.aux_train_size / 8).max(1).min(data.train.len() - cfg.csen.aux_train_size),
        cfg.master_seed,
    )?;
    let mk = |idx: &[usize]| -> Result<Vec<TrainSample>> {
        idx.par_iter()
            .map(|&i| {
                let x = &data.train[i];
                let y = model.d().matvec(x);
                let plane = proxy.apply(&y)?;
                let mask = Matrix::new(GRID.0, GRID.1, mask_from_signal(x, 0.0)?.mask().to_vec())?;
                Ok(TrainSample { proxy: plane, mask })
            })
            .collect()
    };
    let train_samples = mk(&train_idx)?;
    let val_samples = mk(&val_idx)?;
    let tcfg = TrainConfig {
        lr: cfg.csen.lr,
        beta1: cfg.csen.beta1,
        beta2: cfg.csen.beta2,
        adam_eps: cfg.csen.adam_eps,
        epochs: cfg.csen.aux_epochs,
        batch_size: cfg.csen.batch_size,
        loss: LossKind::Mse,
        seed: mix(seed, &[1]),
    };
    let init = init_arch(&cfg.csen.arch, GRID, mix(seed, &[2]))?;
    let (trained, _curve) = train(init, &train_samples, &val_samples, &tcfg)?;
    Ok((
        WeightSource {
            model: trained,
            lambda: cfg.proxy.lambda,
            epsilon: cfg.solver.weight_epsilon,
        },
        t0.elapsed().as_secs_f64(),
    ))
}

fn recover(
    method: &str,
    cfg: &ExperimentConfig,
    d: &Matrix,
    y: &[f64],
    m: usize,
    weights: Option<&WeightSource>,
) -> Result<SolverResult> {
    match method {
        "lasso" => basis_pursuit_path(d, y, None, &path_config(cfg)),
        "weighted-lasso-csen" => {
            let ws = weights.ok_or_else(|| {
                Error::Config("weighted-lasso-csen needs a trained weight source".into())
            })?;
            let p = ws.probability_map(d, y)?;
            let w = weights_from_probability(p.data(), ws.epsilon)?;
            basis_pursuit_path(d, y, Some(&w), &path_config(cfg))
        }
        "omp" => {
            let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            omp(d, y, cfg.solver.omp_k_max.min(m), cfg.solver.omp_res_tol * ynorm)
        }
        "crc" => crc_solution(d, y, cfg.solver.crc_lambda),
        other => Err(Error::Config(format!("{other:?} is not a recovery method"))),
    }
}

fn needs_weights(methods: &[String]) -> bool {
    methods.iter().any(|m| m == "weighted-lasso-csen")
}

/// Donoho–Tanner-style success grid over (MR, ρ) plus the 50% border.
pub fn run_phase_transition(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let data = load_mnist(&cfg.dataset)?;
    let bins = rho_bins(&data.test, cfg.rho_bins)?;
    let mut out = ExperimentOutcome::new_empty();
    let mut grid_rows: Vec<(f64, f64, String)> = Vec::new();

    for &mr in &cfg.mr_list {
        let m = measurement_count(mr, N);
        let source = if needs_weights(&cfg.methods) {
            let (ws, secs) = train_weight_source(cfg, &data, mr, TAG_PHASE)?;
            out.timings.push(TimingRecord {
                experiment: "phase-transition".into(),
                method: "weighted-lasso-csen".into(),
                mr,
                what: "train-weight-source".into(),
                seconds: secs,
            });
            Some(ws)
        } else {
            None
        };
        for (bi, members) in bins.members.iter().enumerate() {
            let cell_seed = mix(cfg.master_seed, &[TAG_PHASE, mr_key(mr), bi as u64]);
            // Trials share (x, D) across methods: paired comparison.
            let trials: Result<Vec<Vec<bool>>> = (0..cfg.trials)
                .into_par_iter()
                .map(|t| {
                    let seed = mix(cell_seed, &[t as u64]);
                    let mut r = rng::seeded(seed);
                    use rand::Rng;
                    let image = members[r.random_range(0..members.len())];
                    let x = &data.test[image];
                    let d = gaussian_matrix(m, N, mix(seed, &[1]))?;
                    let y = d.matvec(x);
                    cfg.methods
                        .iter()
                        .map(|method| {
                            let sol = recover(method, cfg, &d, &y, m, source.as_ref())?;
                            recovery_success(&sol.x_hat, x, SUCCESS_TOL)
                        })
                        .collect()
                })
                .collect();
            let trials = trials?;
            for (mi, method) in cfg.methods.iter().enumerate() {
                let successes = trials.iter().filter(|t| t[mi]).count();
                let mut rec = ExperimentRecord::blank(
                    "phase-transition",
                    method,
                    m as f64 / N as f64,
                    cell_seed,
                );
                rec.rho_bin = Some(bi);
                rec.rho = Some(bins.rho[bi]);
                rec.successes = Some(successes);
                rec.cell_trials = Some(cfg.trials);
                rec.n_samples = cfg.trials;
                rec.proxy_lambda = cfg.proxy.lambda;
                out.records.push(rec);
                grid_rows.push((
                    bins.rho[bi],
                    successes as f64 / cfg.trials as f64,
                    format!("{method} mr={mr:.2}"),
                ));
            }
        }
    }

    // 50% borders per method.
    let mut border_rows: Vec<(f64, f64, String)> = Vec::new();
    for method in &cfg.methods {
        let mut pts = Vec::new();
        for &mr in &cfg.mr_list {
            let m = measurement_count(mr, N);
            let rates: Vec<(f64, f64)> = out
                .records
                .iter()
                .filter(|r| {
                    &r.method == method
                        && r.experiment == "phase-transition"
                        && (r.mr - m as f64 / N as f64).abs() < 1e-12
                })
                .map(|r| (r.rho.unwrap(), r.success_rate().unwrap()))
                .collect();
            let border = border_rho(&rates);
            pts.push((mr, border));
            border_rows.push((mr, border, method.clone()));
        }
        out.borders.push((method.clone(), pts));
    }
    out.plots.push(PlotSeries {
        file: "phase_grid.csv".into(),
        x_label: "rho".into(),
        y_label: "success rate".into(),
        rows: grid_rows,
    });
    out.plots.push(PlotSeries {
        file: "phase_border.csv".into(),
        x_label: "measurement rate".into(),
        y_label: "50% success rho".into(),
        rows: border_rows,
    });
    Ok(out)
}

/// Largest ρ sustaining a ≥50% success rate, linearly interpolated toward
/// the next bin when the rate crosses below one half.
pub fn border_rho(rates: &[(f64, f64)]) -> f64 {
    let mut last_ok: Option<usize> = None;
    for (i, &(_, rate)) in rates.iter().enumerate() {
        if rate >= 0.5 {
            last_ok = Some(i);
        }
    }
    let Some(i) = last_ok else { return 0.0 };
    let (rho_i, rate_i) = rates[i];
    if i + 1 >= rates.len() {
        return rho_i;
    }
    let (rho_next, rate_next) = rates[i + 1];
    if rate_next >= 0.5 {
        return rho_i; // non-monotone tail; stay conservative
    }
    rho_i + (rate_i - 0.5) / (rate_i - rate_next) * (rho_next - rho_i)
}

/// Per-digit reconstruction quality comparison at a single measurement
/// rate: one record per (sample, method).
pub fn run_recovery_comparison(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let data = load_mnist(&cfg.dataset)?;
    let mr = cfg.mr_list[0];
    let m = measurement_count(mr, N);
    let mut out = ExperimentOutcome::new_empty();

    let d = gaussian_matrix(m, N, mix(cfg.master_seed, &[TAG_RECOVERY, mr_key(mr), 0]))?;

    let source = if needs_weights(&cfg.methods) {
        let (ws, secs) = train_weight_source(cfg, &data, mr, TAG_RECOVERY)?;
        out.timings.push(TimingRecord {
            experiment: "recovery-comparison".into(),
            method: "weighted-lasso-csen".into(),
            mr,
            what: "train-weight-source".into(),
            seconds: secs,
        });
        Some(ws)
    } else {
        None
    };

    // Deterministic digit selection.
    let mut order: Vec<usize> = (0..data.test.len()).collect();
    use rand::seq::SliceRandom;
    order.shuffle(&mut rng::seeded(mix(
        cfg.master_seed,
        &[TAG_RECOVERY, mr_key(mr), 1],
    )));
    let picks: Vec<usize> = order.into_iter().take(cfg.sample_count).collect();

    struct Row {
        sample: usize,
        nmse: Vec<f64>,
        success: Vec<bool>,
        x_hats: Option<Vec<Vec<f64>>>,
    }
    let rows: Result<Vec<Row>> = picks
        .par_iter()
        .enumerate()
        .map(|(si, &img)| {
            let x = &data.test[img];
            let y = d.matvec(x);
            let mut nmse = Vec::with_capacity(cfg.methods.len());
            let mut success = Vec::with_capacity(cfg.methods.len());
            let mut x_hats = Vec::new();
            for method in &cfg.methods {
                let sol = recover(method, cfg, &d, &y, m, source.as_ref())?;
                nmse.push(nmse_db(&sol.x_hat, x)?);
                success.push(recovery_success(&sol.x_hat, x, SUCCESS_TOL)?);
                if si < cfg.dump_reconstructions {
                    x_hats.push(sol.x_hat);
                }
            }
            Ok(Row {
                sample: si,
                nmse,
                success,
                x_hats: (si < cfg.dump_reconstructions).then_some(x_hats),
            })
        })
        .collect();
    let rows = rows?;

    let mut plot_rows = Vec::new();
    for row in &rows {
        for (mi, method) in cfg.methods.iter().enumerate() {
            let mut rec = ExperimentRecord::blank(
                "recovery-comparison",
                method,
                m as f64 / N as f64,
                mix(cfg.master_seed, &[TAG_RECOVERY, mr_key(mr), 0]),
            );
            rec.trial = row.sample as u64;
            rec.n_samples = 1;
            rec.nmse_db = Some(row.nmse[mi]);
            rec.successes = Some(row.success[mi] as usize);
            rec.cell_trials = Some(1);
            rec.proxy_lambda = cfg.proxy.lambda;
            rec.solver_lambda = (method == "crc").then_some(cfg.solver.crc_lambda);
            out.records.push(rec);
            plot_rows.push((row.sample as f64, row.nmse[mi], method.clone()));
        }
    }
    out.plots.push(PlotSeries {
        file: "nmse_by_method.csv".into(),
        x_label: "sample index".into(),
        y_label: "nmse_db".into(),
        rows: plot_rows,
    });

    if cfg.dump_reconstructions > 0 {
        let recon_dir = cfg.out_dir.join("recon");
        std::fs::create_dir_all(&recon_dir).map_err(|e| Error::io(&recon_dir, e))?;
        for row in rows.iter().filter(|r| r.x_hats.is_some()) {
            let x_hats = row.x_hats.as_ref().unwrap();
            for (method, x_hat) in cfg.methods.iter().zip(x_hats) {
                let clean: Vec<f64> = x_hat
                    .iter()
                    .map(|&v| if v.is_finite() { v } else { 0.0 })
                    .collect();
                let plane = Matrix::new(GRID.0, GRID.1, clean)?;
                plane.write_csm1(recon_dir.join(format!("{method}_{:03}.csm1", row.sample)))?;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn border_interpolates_the_half_crossing() {
        let rates = vec![(0.1, 1.0), (0.2, 0.8), (0.3, 0.2), (0.4, 0.0)];
        let b = border_rho(&rates);
        // crossing between 0.2 (rate .8) and 0.3 (rate .2): half at midpoint
        assert!((b - 0.25).abs() < 1e-12);
    }

    #[test]
    fn border_saturates_at_extremes() {
        assert_eq!(border_rho(&[(0.1, 1.0), (0.2, 0.9)]), 0.2);
        assert_eq!(border_rho(&[(0.1, 0.3), (0.2, 0.1)]), 0.0);
    }

    #[test]
    fn rho_bins_partition_and_sort() {
        let images: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let mut x = vec![0.0; 16];
                for j in 0..(i % 13) + 1 {
                    x[j] = 1.0;
                }
                x
            })
            .collect();
        let bins = rho_bins(&images, 4).unwrap();
        assert_eq!(bins.members.iter().map(|m| m.len()).sum::<usize>(), 40);
        for w in bins.rho.windows(2) {
            assert!(w[0] <= w[1]);
        }
    }
}
