//! Adam training of support estimator networks.
//!
//! Per-sample gradients inside a mini-batch are computed in parallel,
//! collected in sample order and summed sequentially, so a fixed
//! (seed, data, config) triple gives bit-identical trained weights no
//! matter how the work is scheduled.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::{loss_mse, threshold_support, ConvParams, CsenModel, Gradients};
use crate::error::{Error, Result};
use crate::metrics::support_metrics;
use crate::numerics::Matrix;
use crate::rng;

/// Training objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// Pixelwise squared error against the binary mask.
    Mse,
    /// Cross-entropy on class scores pooled over pixel groups.
    CrossEntropyGrouped,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub loss: LossKind,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            epochs: 100,
            batch_size: 128,
            loss: LossKind::Mse,
            seed: 0,
        }
    }
}

/// One (proxy plane, binary mask) training pair.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub proxy: Matrix,
    pub mask: Matrix,
}

/// One (proxy plane, class id) pair for the classification head.
#[derive(Debug, Clone)]
pub struct ClassSample {
    pub proxy: Matrix,
    pub class: usize,
}

/// Per-epoch curve entry.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    /// Mean F1 at τ = 0.5 for mask training; accuracy for the classifier.
    pub val_f1: Option<f64>,
}

/// Adam moment buffers, mirroring the parameter layout.
#[derive(Debug, Clone)]
pub(crate) struct AdamState {
    m: Vec<Option<ConvParams>>,
    v: Vec<Option<ConvParams>>,
    step: u64,
}

impl AdamState {
    fn zeros_like(model: &CsenModel) -> AdamState {
        let mk = || {
            model
                .params
                .iter()
                .map(|p| {
                    p.as_ref().map(|p| ConvParams {
                        w: vec![0.0; p.w.len()],
                        b: vec![0.0; p.b.len()],
                    })
                })
                .collect::<Vec<_>>()
        };
        AdamState {
            m: mk(),
            v: mk(),
            step: 0,
        }
    }
}

impl Gradients {
    fn zeros_like(model: &CsenModel) -> Gradients {
        Gradients {
            blocks: model
                .params
                .iter()
                .map(|p| {
                    p.as_ref().map(|p| ConvParams {
                        w: vec![0.0; p.w.len()],
                        b: vec![0.0; p.b.len()],
                    })
                })
                .collect(),
        }
    }

    fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            if let (Some(a), Some(b)) = (a.as_mut(), b.as_ref()) {
                for (x, y) in a.w.iter_mut().zip(&b.w) {
                    *x += y;
                }
                for (x, y) in a.b.iter_mut().zip(&b.b) {
                    *x += y;
                }
            }
        }
    }

    fn scale(&mut self, s: f64) {
        for b in self.blocks.iter_mut().flatten() {
            b.w.iter_mut().for_each(|x| *x *= s);
            b.b.iter_mut().for_each(|x| *x *= s);
        }
    }

    fn is_finite(&self) -> bool {
        self.blocks
            .iter()
            .flatten()
            .all(|b| b.w.iter().chain(&b.b).all(|v| v.is_finite()))
    }
}

fn adam_step(model: &mut CsenModel, grads: &Gradients, cfg: &TrainConfig) {
    if model.adam.is_none() {
        model.adam = Some(AdamState::zeros_like(model));
    }
    let mut adam = model.adam.take().expect("just initialized");
    adam.step += 1;
    let bc1 = 1.0 - cfg.beta1.powi(adam.step as i32);
    let bc2 = 1.0 - cfg.beta2.powi(adam.step as i32);
    for (li, pblock) in model.params.iter_mut().enumerate() {
        let (Some(p), Some(g)) = (pblock.as_mut(), grads.blocks[li].as_ref()) else {
            continue;
        };
        let m = adam.m[li].as_mut().expect("moment block");
        let v = adam.v[li].as_mut().expect("moment block");
        update_slice(&mut p.w, &g.w, &mut m.w, &mut v.w, cfg, bc1, bc2);
        update_slice(&mut p.b, &g.b, &mut m.b, &mut v.b, cfg, bc1, bc2);
    }
    model.adam = Some(adam);
}

fn update_slice(
    p: &mut [f64],
    g: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    cfg: &TrainConfig,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..p.len() {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        let mhat = m[i] / bc1;
        let vhat = v[i] / bc2;
        p[i] -= cfg.lr * mhat / (vhat.sqrt() + cfg.adam_eps);
    }
}

fn sample_grad_mse(model: &CsenModel, s: &TrainSample) -> Result<(Gradients, f64)> {
    let trace = model.trace(&s.proxy)?;
    let p = trace.output(model.grid())?;
    if (s.mask.rows(), s.mask.cols()) != model.grid() {
        return Err(Error::invalid("mask shape does not match grid"));
    }
    let loss = loss_mse(&p, &s.mask);
    let dp: Vec<f64> = p
        .data()
        .iter()
        .zip(s.mask.data())
        .map(|(pi, vi)| 2.0 * (pi - vi))
        .collect();
    Ok((model.backward_from_dp(&trace, dp), loss))
}

fn sample_grad_ce(
    model: &CsenModel,
    s: &ClassSample,
    groups: &[Vec<usize>],
) -> Result<(Gradients, f64)> {
    let trace = model.trace(&s.proxy)?;
    let p = trace.output(model.grid())?;
    if s.class >= groups.len() {
        return Err(Error::invalid("class id outside group table"));
    }
    let q = super::head::classify_head(&p, groups)?;
    let loss = -(q[s.class].max(1e-300)).ln();
    let mut dp = vec![0.0; p.rows() * p.cols()];
    for (c, group) in groups.iter().enumerate() {
        let dmu = q[c] - if c == s.class { 1.0 } else { 0.0 };
        let scale = dmu / group.len() as f64;
        for &pix in group {
            dp[pix] = scale;
        }
    }
    Ok((model.backward_from_dp(&trace, dp), loss))
}

/// Train on (proxy, mask) pairs with the MSE objective.
///
/// Returns the trained model (Adam state dropped) and the per-epoch loss
/// curve. `val` may be empty, in which case the curve carries no
/// validation columns.
pub fn train(
    model: CsenModel,
    train_set: &[TrainSample],
    val: &[TrainSample],
    cfg: &TrainConfig,
) -> Result<(CsenModel, Vec<EpochStats>)> {
    if train_set.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if cfg.loss != LossKind::Mse {
        return Err(Error::invalid(
            "train() drives the MSE objective; use train_classifier() for grouped cross-entropy",
        ));
    }
    run_training(
        model,
        cfg,
        train_set.len(),
        |model, idx| sample_grad_mse(model, &train_set[idx]),
        |model| validation_stats_mse(model, val),
    )
}

/// Train the classification variant: grouped average pooling + softmax
/// with cross-entropy loss.
pub fn train_classifier(
    model: CsenModel,
    train_set: &[ClassSample],
    val: &[ClassSample],
    groups: &[Vec<usize>],
    cfg: &TrainConfig,
) -> Result<(CsenModel, Vec<EpochStats>)> {
    if train_set.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if cfg.loss != LossKind::CrossEntropyGrouped {
        return Err(Error::invalid(
            "train_classifier() drives the grouped cross-entropy objective",
        ));
    }
    run_training(
        model,
        cfg,
        train_set.len(),
        |model, idx| sample_grad_ce(model, &train_set[idx], groups),
        |model| validation_stats_ce(model, val, groups),
    )
}

fn run_training(
    mut model: CsenModel,
    cfg: &TrainConfig,
    n: usize,
    grad_of: impl Fn(&CsenModel, usize) -> Result<(Gradients, f64)> + Sync,
    val_of: impl Fn(&CsenModel) -> Result<Option<(f64, f64)>>,
) -> Result<(CsenModel, Vec<EpochStats>)> {
    if cfg.batch_size == 0 {
        return Err(Error::invalid("batch_size must be positive"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut shuffle_rng = rng::seeded(rng::mix(cfg.seed, &[0x7261]));
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for (bi, batch) in order.chunks(cfg.batch_size).enumerate() {
            // Ordered reduction: parallel map, sequential sum.
            let per_sample: Result<Vec<(Gradients, f64)>> = batch
                .par_iter()
                .map(|&idx| grad_of(&model, idx))
                .collect();
            let per_sample = per_sample?;
            let mut acc = Gradients::zeros_like(&model);
            let mut batch_loss = 0.0;
            for (g, l) in &per_sample {
                acc.add_assign(g);
                batch_loss += l;
            }
            // The output clamp keeps the loss bounded even when activations
            // overflow, so divergence shows up in the gradients first.
            if !batch_loss.is_finite() || !acc.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: bi,
                    loss: batch_loss,
                });
            }
            epoch_loss += batch_loss;
            acc.scale(1.0 / batch.len() as f64);
            adam_step(&mut model, &acc, cfg);
        }
        let (val_loss, val_f1) = match val_of(&model)? {
            Some((l, f)) => (Some(l), Some(f)),
            None => (None, None),
        };
        curve.push(EpochStats {
            epoch,
            train_loss: epoch_loss / n as f64,
            val_loss,
            val_f1,
        });
    }
    model.adam = None; // frozen
    Ok((model, curve))
}

fn validation_stats_mse(model: &CsenModel, val: &[TrainSample]) -> Result<Option<(f64, f64)>> {
    if val.is_empty() {
        return Ok(None);
    }
    let per: Result<Vec<(f64, f64)>> = val
        .par_iter()
        .map(|s| {
            let p = model.forward(&s.proxy)?;
            let loss = loss_mse(&p, &s.mask);
            let truth = mask_support(&s.mask);
            let est = threshold_support(&p, 0.5);
            let f1 = support_metrics(&est, &truth, p.rows() * p.cols()).f1;
            Ok((loss, f1))
        })
        .collect();
    let per = per?;
    let n = per.len() as f64;
    let (sl, sf) = per
        .iter()
        .fold((0.0, 0.0), |(a, b), (l, f)| (a + l, b + f));
    Ok(Some((sl / n, sf / n)))
}

fn validation_stats_ce(
    model: &CsenModel,
    val: &[ClassSample],
    groups: &[Vec<usize>],
) -> Result<Option<(f64, f64)>> {
    if val.is_empty() {
        return Ok(None);
    }
    let per: Result<Vec<(f64, bool)>> = val
        .par_iter()
        .map(|s| {
            let p = model.forward(&s.proxy)?;
            let q = super::head::classify_head(&p, groups)?;
            let loss = -(q[s.class].max(1e-300)).ln();
            let pred = argmax(&q);
            Ok((loss, pred == s.class))
        })
        .collect();
    let per = per?;
    let n = per.len() as f64;
    let (sl, correct) = per
        .iter()
        .fold((0.0, 0usize), |(a, c), (l, ok)| (a + l, c + *ok as usize));
    Ok(Some((sl / n, correct as f64 / n)))
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Indices where the mask is set.
pub(crate) fn mask_support(mask: &Matrix) -> Vec<usize> {
    mask.data()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.5)
        .map(|(i, _)| i)
        .collect()
}

/// τ grid used by the validation sweep: 0.05, 0.10, …, 0.95.
pub fn threshold_grid() -> Vec<f64> {
    (1..=19).map(|i| i as f64 * 0.05).collect()
}

/// Pick the F1-maximizing threshold over precomputed probability maps.
/// Ties go to the smallest τ. Returns (τ, mean F1 at τ).
pub fn tune_threshold_maps(maps: &[Matrix], truths: &[Vec<usize>]) -> (f64, f64) {
    assert_eq!(maps.len(), truths.len());
    let mut best = (0.5, f64::NEG_INFINITY);
    for tau in threshold_grid() {
        let mut sum = 0.0;
        for (p, truth) in maps.iter().zip(truths) {
            let est = threshold_support(p, tau);
            sum += support_metrics(&est, truth, p.rows() * p.cols()).f1;
        }
        let mean = sum / maps.len() as f64;
        if mean > best.1 {
            best = (tau, mean);
        }
    }
    best
}

/// Validation sweep of the support threshold for a trained model.
pub fn tune_threshold(model: &CsenModel, val: &[TrainSample]) -> Result<(f64, f64)> {
    if val.is_empty() {
        return Err(Error::invalid("threshold sweep needs a validation set"));
    }
    let maps: Result<Vec<Matrix>> = val.par_iter().map(|s| model.forward(&s.proxy)).collect();
    let maps = maps?;
    let truths: Vec<Vec<usize>> = val.iter().map(|s| mask_support(&s.mask)).collect();
    Ok(tune_threshold_maps(&maps, &truths))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::csen1_init;

    fn toy_sample(seed: u64) -> TrainSample {
        let mut r = rng::seeded(seed);
        use rand::Rng;
        let proxy = Matrix::from_fn(8, 8, |_, _| r.random_range(-1.0..1.0));
        let mask = Matrix::from_fn(8, 8, |i, j| ((i / 2 + j / 2) % 2) as f64);
        TrainSample { proxy, mask }
    }

    #[test]
    fn single_sample_overfits() {
        // The sample mirrors the pipeline's proxy statistics: a noisy,
        // positively correlated rendition of the mask. (An uncorrelated
        // proxy/mask pair can pin output pixels in the flat region of the
        // ReLU/clamp where a single sample provides no gradient to revive
        // them.)
        let mut r = rng::seeded(1);
        use rand::Rng;
        let mask = Matrix::from_fn(8, 8, |_, _| if r.random::<f64>() < 0.3 { 1.0 } else { 0.0 });
        let proxy =
            Matrix::from_fn(8, 8, |i, j| mask.get(i, j) + 0.3 * r.random_range(-1.0..1.0));
        let sample = TrainSample {
            proxy: proxy.clone(),
            mask: mask.clone(),
        };
        let model = csen1_init((8, 8), 7).unwrap();
        let initial = loss_mse(&model.forward(&proxy).unwrap(), &mask);
        let cfg = TrainConfig {
            epochs: 200,
            batch_size: 1,
            ..TrainConfig::default()
        };
        let (trained, curve) = train(model, &[sample], &[], &cfg).unwrap();
        let final_loss = loss_mse(&trained.forward(&proxy).unwrap(), &mask);
        assert!(
            final_loss < 0.01 * initial,
            "memorization failed: {initial} -> {final_loss}"
        );
        assert_eq!(curve.len(), 200);
        assert!(curve.iter().all(|e| e.val_loss.is_none()));
    }

    #[test]
    fn training_is_deterministic() {
        let samples: Vec<TrainSample> = (0..6).map(toy_sample).collect();
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 2,
            seed: 9,
            ..TrainConfig::default()
        };
        let (a, ca) = train(csen1_init((8, 8), 5).unwrap(), &samples, &samples, &cfg).unwrap();
        let (b, cb) = train(csen1_init((8, 8), 5).unwrap(), &samples, &samples, &cfg).unwrap();
        assert_eq!(ca, cb);
        for i in 0..a.parameter_count() {
            assert_eq!(a.param(i), b.param(i), "param {i} differs");
        }
    }

    #[test]
    fn divergence_is_reported() {
        let model = csen1_init((8, 8), 0).unwrap();
        // A proxy near f64::MAX overflows the forward pass to infinity.
        let sample = TrainSample {
            proxy: Matrix::from_fn(8, 8, |_, _| 1e308),
            mask: Matrix::zeros(8, 8),
        };
        let cfg = TrainConfig {
            epochs: 1,
            batch_size: 1,
            ..TrainConfig::default()
        };
        match train(model, &[sample], &[], &cfg) {
            Err(Error::Diverged { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn threshold_sweep_picks_separating_tau() {
        // A map that is 0.8 on the truth and 0.2 elsewhere: every τ in
        // [0.2, 0.8) separates perfectly (the comparison is strict), and
        // the sweep must pick the smallest grid point.
        let p = Matrix::from_fn(4, 4, |i, _| if i < 2 { 0.8 } else { 0.2 });
        let truth: Vec<usize> = (0..8).collect();
        let (tau, f1) = tune_threshold_maps(&[p], &[truth]);
        assert!((f1 - 1.0).abs() < 1e-12);
        assert!((tau - 0.2).abs() < 1e-12);
    }
}
