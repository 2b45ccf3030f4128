//! Command-line driver for the support-estimation toolkit.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use csen::harness::{
    self, emit_report, measurement_count, replay, run_dictclass_bench, run_noise_sweep,
    run_phase_transition, run_recovery_comparison, run_se_experiment, ExperimentConfig,
    ExperimentKind,
};
use csen::model::{threshold_support, write_loss_curve, CsenModel};
use csen::numerics::{build_proxy_operator, gaussian_matrix, normalize_columns, Matrix, ProxyKind};
use csen::sensing::{sense, SensingModel};
use csen::dictclass::{build_class_dictionary, crc_classify, csen_classify, src_classify,
    GridLayout, SrcConfig};

#[derive(Parser)]
#[command(name = "csen", version, about = "Support estimation for compressively sensed signals")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw a Gaussian measurement matrix (entries N(0, 1/rows)) as CSM1.
    GenMatrix {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Normalize columns to unit l2 after drawing.
        #[arg(long)]
        normalize: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Measure signals: y = D x, optional white noise at a target SNR.
    Sense {
        /// Measurement matrix (CSM1, m×n).
        #[arg(long)]
        matrix: PathBuf,
        /// Signals (CSM1, one signal per row, n columns).
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        snr_db: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output measurements (CSM1, one per row, m columns).
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a support estimator per the config and save a checkpoint.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate supports for measurements with a trained model.
    Estimate {
        /// Checkpoint from `train`.
        #[arg(long)]
        model: PathBuf,
        /// Measurement matrix (CSM1, m×n).
        #[arg(long)]
        matrix: PathBuf,
        /// Measurements (CSM1, one per row, m columns).
        #[arg(long)]
        measurements: PathBuf,
        #[arg(long, default_value = "lmmse")]
        proxy_kind: String,
        #[arg(long, default_value_t = 1e-2)]
        proxy_lambda: f64,
        #[arg(long, default_value_t = 0.5)]
        tau: f64,
        /// Output CSV (sample,k,support).
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-sample reconstruction comparison (one record per sample and
    /// method).
    Recover {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Support-recovery table across measurement rates.
    SeTable {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// F1 versus measurement noise at fixed rate.
    NoiseSweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Phase-transition grid and 50% borders.
    Phase {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dictionary-based classification (src, crc, or csen with a model).
    Classify {
        /// Atom features (CSM1, m×n_atoms, atoms as columns).
        #[arg(long)]
        features: PathBuf,
        /// One integer class id per line, one per atom column.
        #[arg(long)]
        labels: PathBuf,
        /// Queries (CSM1, m×n_queries, queries as columns).
        #[arg(long)]
        queries: PathBuf,
        /// "src", "crc" or "csen".
        #[arg(long)]
        method: String,
        /// Checkpoint (required for method = csen).
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-2)]
        lambda: f64,
        /// Grid height for the 2-D layout (default: atoms per class).
        #[arg(long)]
        grid_h: Option<usize>,
        /// Output CSV (query_id, predicted_class, top-3 scores).
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthetic paired benchmark of src/crc/csen classification.
    DictBench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run one results.csv row from its emitted config and verify it
    /// reproduces bit-exactly.
    Replay {
        /// config.json emitted by an experiment run.
        #[arg(long)]
        config: PathBuf,
        /// results.csv emitted by the same run.
        #[arg(long)]
        results: PathBuf,
        /// 0-based data row.
        #[arg(long)]
        row: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("warning: could not size thread pool: {e}");
        }
    }
    match run(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn load_experiment_config(
    path: &PathBuf,
    seed: Option<u64>,
    out: Option<PathBuf>,
    expect: ExperimentKind,
) -> csen::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_json_file(path)?;
    if cfg.experiment != expect {
        return Err(csen::Error::Config(format!(
            "config is for {:?}, this subcommand runs {:?}",
            cfg.experiment.as_str(),
            expect.as_str()
        )));
    }
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if let Some(o) = out {
        cfg.out_dir = o;
    }
    Ok(cfg)
}

fn run(cmd: Cmd) -> csen::Result<ExitCode> {
    match cmd {
        Cmd::GenMatrix {
            rows,
            cols,
            seed,
            normalize,
            out,
        } => {
            let mut m = gaussian_matrix(rows, cols, seed)?;
            if normalize {
                m = normalize_columns(&m)?;
            }
            m.write_csm1(&out)?;
            println!("wrote {rows}x{cols} matrix to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Sense {
            matrix,
            input,
            snr_db,
            seed,
            out,
        } => {
            let d = Matrix::read_csm1(&matrix)?;
            let x = Matrix::read_csm1(&input)?;
            if x.cols() != d.cols() {
                return Err(csen::Error::invalid(format!(
                    "signals have {} columns, matrix expects n = {}",
                    x.cols(),
                    d.cols()
                )));
            }
            let model = SensingModel::canonical(d)?;
            let mut y = Matrix::zeros(x.rows(), model.m());
            for i in 0..x.rows() {
                let batch = sense(&model, x.row(i), snr_db, csen::rng::mix(seed, &[i as u64]))?;
                let row = batch.y(0);
                for (j, &v) in row.iter().enumerate() {
                    y.set(i, j, v);
                }
            }
            y.write_csm1(&out)?;
            println!(
                "sensed {} signals at m = {} ({}), wrote {}",
                x.rows(),
                model.m(),
                match snr_db {
                    Some(s) => format!("snr {s} dB"),
                    None => "noise-free".into(),
                },
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Train { config, seed, out } => {
            let cfg = load_experiment_config(&config, seed, out, ExperimentKind::SeTable)?;
            let data = harness::load_mnist(&cfg.dataset)?;
            let mr = cfg.mr_list[0];
            let ctx = harness::se_context(&cfg, &data, mr)?;
            let arch = cfg.csen.arch.clone();
            let est = harness::train_estimator(&cfg, &ctx, &arch)?;
            std::fs::create_dir_all(&cfg.out_dir)
                .map_err(|e| csen::Error::io(&cfg.out_dir, e))?;
            let m = measurement_count(mr, harness::N);
            let stem = format!("{arch}_mr{:03}", (mr * 100.0).round() as u32);
            let ckpt = cfg.out_dir.join(format!("{stem}.ckpt"));
            est.model.save_checkpoint(&ckpt)?;
            write_loss_curve(cfg.out_dir.join(format!("{stem}_curve.csv")), &est.curve)?;
            println!(
                "trained {arch} at mr {mr} (m = {m}), tau = {:.2}, val F1 = {:.4}; checkpoint {}",
                est.tau,
                est.val_f1_at_tau,
                ckpt.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Estimate {
            model,
            matrix,
            measurements,
            proxy_kind,
            proxy_lambda,
            tau,
            out,
        } => {
            let net = CsenModel::load_checkpoint(&model)?;
            let d = Matrix::read_csm1(&matrix)?;
            let ys = Matrix::read_csm1(&measurements)?;
            let kind = match proxy_kind.as_str() {
                "mc" => ProxyKind::MaxCorrelation,
                "lmmse" => ProxyKind::Lmmse {
                    lambda: proxy_lambda,
                },
                other => {
                    return Err(csen::Error::invalid(format!(
                        "unknown proxy kind {other:?}"
                    )))
                }
            };
            let op = build_proxy_operator(&d, kind, net.grid())?;
            let mut outf = String::from("sample,k,support\n");
            for i in 0..ys.rows() {
                let plane = op.apply(ys.row(i))?;
                let p = net.forward(&plane)?;
                let support = threshold_support(&p, tau);
                outf.push_str(&format!(
                    "{},{},{}\n",
                    i,
                    support.len(),
                    support
                        .iter()
                        .map(|s| s.to_string())
                        .collect::<Vec<_>>()
                        .join(";")
                ));
            }
            std::fs::write(&out, outf).map_err(|e| csen::Error::io(&out, e))?;
            println!("estimated {} supports to {}", ys.rows(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Recover { config, seed, out } => {
            let cfg =
                load_experiment_config(&config, seed, out, ExperimentKind::RecoveryComparison)?;
            let outcome = run_recovery_comparison(&cfg)?;
            emit_outcome(&cfg, outcome)
        }
        Cmd::SeTable { config, seed, out } => {
            let cfg = load_experiment_config(&config, seed, out, ExperimentKind::SeTable)?;
            let outcome = run_se_experiment(&cfg)?;
            emit_outcome(&cfg, outcome)
        }
        Cmd::NoiseSweep { config, seed, out } => {
            let cfg = load_experiment_config(&config, seed, out, ExperimentKind::NoiseSweep)?;
            let outcome = run_noise_sweep(&cfg)?;
            emit_outcome(&cfg, outcome)
        }
        Cmd::Phase { config, seed, out } => {
            let cfg = load_experiment_config(&config, seed, out, ExperimentKind::PhaseTransition)?;
            let outcome = run_phase_transition(&cfg)?;
            for (method, border) in &outcome.borders {
                let pts: Vec<String> = border
                    .iter()
                    .map(|(mr, rho)| format!("({mr:.2}, {rho:.3})"))
                    .collect();
                println!("border[{method}]: {}", pts.join(" "));
            }
            emit_outcome(&cfg, outcome)
        }
        Cmd::Classify {
            features,
            labels,
            queries,
            method,
            model,
            lambda,
            grid_h,
            out,
        } => {
            let feats = Matrix::read_csm1(&features)?;
            let label_text =
                std::fs::read_to_string(&labels).map_err(|e| csen::Error::io(&labels, e))?;
            let ids: Vec<usize> = label_text
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(|l| {
                    l.trim()
                        .parse::<usize>()
                        .map_err(|e| csen::Error::Config(format!("label {l:?}: {e}")))
                })
                .collect::<csen::Result<_>>()?;
            if ids.len() != feats.cols() {
                return Err(csen::Error::invalid(format!(
                    "{} labels for {} atom columns",
                    ids.len(),
                    feats.cols()
                )));
            }
            let classes = ids.iter().max().map(|&m| m + 1).unwrap_or(0);
            let mut samples: Vec<Vec<Vec<f64>>> = vec![Vec::new(); classes];
            for (col, &cls) in ids.iter().enumerate() {
                samples[cls].push(feats.column(col));
            }
            let layout = match grid_h {
                Some(h) => {
                    let n = feats.cols();
                    if n % h != 0 {
                        return Err(csen::Error::invalid("grid_h must divide the atom count"));
                    }
                    GridLayout::Explicit(h, n / h)
                }
                None => GridLayout::Auto,
            };
            let dict = build_class_dictionary(&samples, layout)?;
            let qs = Matrix::read_csm1(&queries)?;
            if qs.rows() != feats.rows() {
                return Err(csen::Error::invalid(
                    "queries and features have different dimensions",
                ));
            }
            let mut csv = String::from("query_id,predicted_class,top3\n");
            let net = match method.as_str() {
                "csen" => {
                    let path = model.ok_or_else(|| {
                        csen::Error::Config("method csen needs --model".into())
                    })?;
                    Some((
                        CsenModel::load_checkpoint(&path)?,
                        build_proxy_operator(
                            dict.d(),
                            ProxyKind::Lmmse { lambda },
                            dict.grid(),
                        )?,
                    ))
                }
                "src" | "crc" => None,
                other => {
                    return Err(csen::Error::Config(format!(
                        "unknown classify method {other:?}"
                    )))
                }
            };
            for q in 0..qs.cols() {
                let y = qs.column(q);
                let (pred, top3) = match method.as_str() {
                    "src" => {
                        let r = src_classify(
                            &dict,
                            &y,
                            &SrcConfig {
                                lambda,
                                ..SrcConfig::default()
                            },
                        )?;
                        (r.class, top_k_ascending(&r.residuals, 3))
                    }
                    "crc" => {
                        let r = crc_classify(&dict, &y, lambda)?;
                        (r.class, top_k_ascending(&r.residuals, 3))
                    }
                    _ => {
                        let (net, op) = net.as_ref().expect("validated above");
                        let probs = csen_classify(net, &dict, &y, op)?;
                        let mut idx: Vec<usize> = (0..probs.len()).collect();
                        idx.sort_by(|&a, &b| probs[b].partial_cmp(&probs[a]).unwrap());
                        (
                            idx[0],
                            idx.iter()
                                .take(3)
                                .map(|&i| format!("{i}:{:.4}", probs[i]))
                                .collect::<Vec<_>>()
                                .join(";"),
                        )
                    }
                };
                csv.push_str(&format!("{q},{pred},{top3}\n"));
            }
            std::fs::write(&out, csv).map_err(|e| csen::Error::io(&out, e))?;
            println!("classified {} queries to {}", qs.cols(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::DictBench { config, seed, out } => {
            let cfg = load_experiment_config(&config, seed, out, ExperimentKind::DictClassBench)?;
            let outcome = run_dictclass_bench(&cfg)?;
            for r in &outcome.records {
                println!(
                    "{}: accuracy {:.4} over {} queries",
                    r.method,
                    r.accuracy.unwrap_or(f64::NAN),
                    r.n_samples
                );
            }
            emit_outcome(&cfg, outcome)
        }
        Cmd::Replay {
            config,
            results,
            row,
        } => {
            let outcome = replay(&config, &results, row)?;
            if outcome.matched {
                println!("row {row}: reproduced bit-exactly");
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!(
                    "row {row}: MISMATCH\nstored:     {:?}\nrecomputed: {:?}",
                    outcome.stored, outcome.recomputed
                );
                Ok(ExitCode::FAILURE)
            }
        }
    }
}

fn emit_outcome(
    cfg: &ExperimentConfig,
    outcome: harness::ExperimentOutcome,
) -> csen::Result<ExitCode> {
    emit_report(
        cfg,
        &outcome.records,
        &outcome.timings,
        &outcome.plots,
        &cfg.out_dir,
    )?;
    println!(
        "{} records -> {}",
        outcome.records.len(),
        cfg.out_dir.join("results.csv").display()
    );
    Ok(ExitCode::SUCCESS)
}

fn top_k_ascending(scores: &[f64], k: usize) -> String {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    idx.iter()
        .take(k)
        .map(|&i| format!("{i}:{:.4}", scores[i]))
        .collect::<Vec<_>>()
        .join(";")
}
