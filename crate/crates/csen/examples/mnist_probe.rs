//! Scratch probe: train one architecture on MNIST and report F1.
//! Usage: mnist_probe <arch> <train_size> <epochs> <test_size> [mr]
use std::time::Instant;
use csen::harness::{self, ExperimentConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let arch = args.get(1).map(String::as_str).unwrap_or("csen2").to_string();
    let train_size: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let epochs: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(5);
    let test_size: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let mr: f64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(0.25);

    let cfg_json = format!(
        r#"{{"experiment": "se-table", "mr_list": [{mr}], "methods": ["{arch}"],
            "master_seed": 7, "train_size": {train_size}, "val_size": {val},
            "test_size": {test_size}, "csen": {{"arch": "{arch}", "epochs": {epochs}}}}}"#,
        val = (train_size / 5).clamp(200, 2000)
    );
    let cfg = ExperimentConfig::from_json_str(&cfg_json).unwrap();
    let data = harness::load_mnist(&cfg.dataset).unwrap();
    let ctx = harness::se_context(&cfg, &data, mr).unwrap();
    let t0 = Instant::now();
    let est = harness::train_estimator(&cfg, &ctx, &arch).unwrap();
    let train_s = t0.elapsed().as_secs_f64();
    println!(
        "train {arch} {train_size}x{epochs}ep: {:.1}s ({:.2}s/ep), tau={:.2}, valF1={:.4}",
        train_s, train_s / epochs as f64, est.tau, est.val_f1_at_tau
    );
    for e in est.curve.iter().rev().take(2) {
        println!("  epoch {}: loss {:.3} val_f1@0.5 {:?}", e.epoch, e.train_loss, e.val_f1);
    }
    let cells = harness::test_cells(&cfg, &ctx, &data, None).unwrap();
    let eval = harness::eval_estimator(&est, &ctx, &cells).unwrap();
    println!("clean: F1={:.4} P={:.4} R={:.4} CE={:.4}", eval.f1, eval.precision, eval.recall, eval.ce);
    let cells10 = harness::test_cells(&cfg, &ctx, &data, Some(10.0)).unwrap();
    let eval10 = harness::eval_estimator(&est, &ctx, &cells10).unwrap();
    println!("10dB:  F1={:.4} (drop {:.4})", eval10.f1, eval.f1 - eval10.f1);
}
