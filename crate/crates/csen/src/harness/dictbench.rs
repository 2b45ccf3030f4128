//! Synthetic paired benchmark of the representation-based classifiers:
//! SRC (Lasso), CRC (ridge) and the CSEN classification head on the same
//! Gaussian-blob feature problem.

use std::time::Instant;

use rayon::prelude::*;

use crate::dictclass::{
    build_class_dictionary, crc_classify, csen_classify, src_classify, ClassDictionary,
    GridLayout, SrcConfig,
};
use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::experiments::{ExperimentOutcome, TAG_DICT};
use crate::harness::report::{ExperimentRecord, TimingRecord};
use crate::model::{train_classifier, ClassSample, LossKind, TrainConfig};
use crate::numerics::{build_proxy_operator, ProxyKind, ProxyOperator};
use crate::rng::{self, mix};
use rand::Rng;

pub struct DictBenchProblem {
    pub dict: ClassDictionary,
    pub proxy: ProxyOperator,
    pub centers: Vec<Vec<f64>>,
    pub noise: f64,
}

/// Gaussian-blob classes: unit-normalized centers, atoms and queries are
/// noisy copies of their class center.
pub fn dictbench_problem(cfg: &ExperimentConfig) -> Result<DictBenchProblem> {
    let p = &cfg.dictclass;
    let mut r = rng::seeded(mix(cfg.master_seed, &[TAG_DICT, 0]));
    let dim = p.feature_dim;
    let centers: Vec<Vec<f64>> = (0..p.classes)
        .map(|_| {
            let mut c: Vec<f64> = (0..dim).map(|_| r.random_range(-1.0..1.0)).collect();
            let n = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            c.iter_mut().for_each(|v| *v /= n);
            c
        })
        .collect();
    let samples: Vec<Vec<Vec<f64>>> = centers
        .iter()
        .map(|c| {
            (0..p.atoms_per_class)
                .map(|_| perturb(c, p.noise, &mut r))
                .collect()
        })
        .collect();
    let n_atoms = p.classes * p.atoms_per_class;
    if n_atoms % p.grid_h != 0 {
        return Err(Error::Config("grid_h must divide classes*atoms".into()));
    }
    let dict = build_class_dictionary(
        &samples,
        GridLayout::Explicit(p.grid_h, n_atoms / p.grid_h),
    )?;
    let proxy = build_proxy_operator(
        dict.d(),
        ProxyKind::Lmmse {
            lambda: cfg.proxy.lambda,
        },
        dict.grid(),
    )?;
    Ok(DictBenchProblem {
        dict,
        proxy,
        centers,
        noise: p.noise,
    })
}

fn perturb(center: &[f64], noise: f64, r: &mut rng::SeededRng) -> Vec<f64> {
    center
        .iter()
        .map(|c| c + noise * r.random_range(-1.0..1.0))
        .collect()
}

/// Draw (query, class) pairs.
pub fn dictbench_queries(
    problem: &DictBenchProblem,
    count: usize,
    seed: u64,
) -> Vec<(Vec<f64>, usize)> {
    let mut r = rng::seeded(seed);
    (0..count)
        .map(|_| {
            let class = r.random_range(0..problem.centers.len());
            (perturb(&problem.centers[class], problem.noise, &mut r), class)
        })
        .collect()
}

/// Paired accuracy + per-query latency of SRC, CRC and CSEN on one
/// synthetic problem.
pub fn run_dictclass_bench(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let problem = dictbench_problem(cfg)?;
    let p = &cfg.dictclass;
    let train_queries = dictbench_queries(
        &problem,
        p.train_queries,
        mix(cfg.master_seed, &[TAG_DICT, 1]),
    );
    let test_queries = dictbench_queries(
        &problem,
        p.test_queries,
        mix(cfg.master_seed, &[TAG_DICT, 2]),
    );

    // CSEN classifier trained with the grouped cross-entropy head.
    let to_class_sample = |q: &(Vec<f64>, usize)| -> Result<ClassSample> {
        let yn = normalize(&q.0)?;
        let x_tilde = problem.proxy.apply_vec(&yn)?;
        Ok(ClassSample {
            proxy: problem.dict.vector_to_grid(&x_tilde)?,
            class: q.1,
        })
    };
    let train_set: Result<Vec<ClassSample>> = train_queries.iter().map(to_class_sample).collect();
    let train_set = train_set?;
    let groups = problem.dict.pixel_groups();
    let tcfg = TrainConfig {
        lr: cfg.csen.lr,
        beta1: cfg.csen.beta1,
        beta2: cfg.csen.beta2,
        adam_eps: cfg.csen.adam_eps,
        epochs: cfg.csen.aux_epochs.max(30),
        batch_size: cfg.csen.batch_size.min(train_set.len()),
        loss: LossKind::CrossEntropyGrouped,
        seed: mix(cfg.master_seed, &[TAG_DICT, 3]),
    };
    let t0 = Instant::now();
    let init = crate::harness::experiments::init_arch(
        "csen1",
        problem.dict.grid(),
        mix(cfg.master_seed, &[TAG_DICT, 4]),
    )?;
    let (csen_model, _) = train_classifier(init, &train_set, &[], &groups, &tcfg)?;
    let csen_train_seconds = t0.elapsed().as_secs_f64();

    let src_cfg = SrcConfig {
        lambda: cfg.solver.lasso_lambda.min(1e-2),
        max_iters: cfg.solver.max_iters,
        rel_tol: cfg.solver.rel_tol,
        debias: false,
    };
    let crc_lambda = cfg.solver.crc_lambda;

    struct Scored {
        correct: usize,
        seconds: f64,
    }
    let score = |f: &(dyn Fn(&[f64]) -> Result<usize> + Sync)| -> Result<Scored> {
        let t0 = Instant::now();
        let hits: Result<Vec<bool>> = test_queries
            .par_iter()
            .map(|(y, class)| Ok(f(y)? == *class))
            .collect();
        let correct = hits?.into_iter().filter(|&b| b).count();
        Ok(Scored {
            correct,
            seconds: t0.elapsed().as_secs_f64(),
        })
    };

    let src = score(&|y: &[f64]| Ok(src_classify(&problem.dict, y, &src_cfg)?.class))?;
    let crc = score(&|y: &[f64]| Ok(crc_classify(&problem.dict, y, crc_lambda)?.class))?;
    let csen = score(&|y: &[f64]| {
        let probs = csen_classify(&csen_model, &problem.dict, y, &problem.proxy)?;
        Ok(argmax(&probs))
    })?;

    let mut out = ExperimentOutcome::new_empty();
    let nq = test_queries.len();
    for (name, scored, train_s) in [
        ("src", &src, 0.0),
        ("crc", &crc, 0.0),
        ("csen", &csen, csen_train_seconds),
    ] {
        let mut rec = ExperimentRecord::blank("dictclass-bench", name, 1.0, cfg.master_seed);
        rec.n_samples = nq;
        rec.accuracy = Some(scored.correct as f64 / nq as f64);
        rec.proxy_lambda = cfg.proxy.lambda;
        out.records.push(rec);
        out.timings.push(TimingRecord {
            experiment: "dictclass-bench".into(),
            method: name.into(),
            mr: 1.0,
            what: "train".into(),
            seconds: train_s,
        });
        out.timings.push(TimingRecord {
            experiment: "dictclass-bench".into(),
            method: name.into(),
            mr: 1.0,
            what: "classify-per-query".into(),
            seconds: scored.seconds / nq as f64,
        });
    }
    Ok(out)
}

fn normalize(y: &[f64]) -> Result<Vec<f64>> {
    let n = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n == 0.0 {
        return Err(Error::invalid("zero query"));
    }
    Ok(y.iter().map(|v| v / n).collect())
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
