use csen::numerics::gaussian_matrix;
use csen::rng;
use csen::solvers::{debias_ls, exhaustive_support_oracle, fista_lasso, omp};
use rand::Rng;

fn instance(seed: u64, lo: f64, hi: f64) -> (csen::Matrix, Vec<f64>, Vec<usize>) {
    let d = gaussian_matrix(8, 12, rng::mix(seed, &[0])).unwrap();
    let mut r = rng::seeded(rng::mix(seed, &[1]));
    let mut support = Vec::new();
    while support.len() < 2 {
        let i = r.random_range(0..12usize);
        if !support.contains(&i) { support.push(i); }
    }
    support.sort_unstable();
    let mut x = vec![0.0; 12];
    for &i in &support {
        let mag = 10f64.powf(r.random_range(lo.log10()..hi.log10()));
        x[i] = if r.random::<bool>() { mag } else { -mag };
    }
    let y = d.matvec(&x);
    (d, y, support)
}

fn main() {
    for (lo, hi) in [(0.1, 10.0), (0.05, 20.0)] {
        for base in [30_000u64, 40_000, 50_000] {
            let mut omp_m = 0; let mut lasso_m = 0;
            for s in base..base + 100 {
                let (d, y, _) = instance(s, lo, hi);
                let oracle = exhaustive_support_oracle(&d, &y, 2).unwrap();
                let sol = omp(&d, &y, 2, 1e-10).unwrap();
                let mut sup: Vec<usize> = sol.x_hat.iter().enumerate()
                    .filter(|(_, v)| v.abs() > 1e-12).map(|(i, _)| i).collect();
                sup.sort_unstable();
                if sup == oracle { omp_m += 1; }
                // lasso best-lambda
                let grid: Vec<f64> = (0..10).map(|i| 10f64.powf(-4.0 + 5.0 * i as f64 / 9.0)).collect();
                let mut best: Option<(f64, Vec<usize>)> = None;
                for &l in &grid {
                    let r = fista_lasso(&d, &y, l, 5000, 1e-12).unwrap();
                    let s2 = r.top_k_support(2);
                    if s2.is_empty() { continue; }
                    let Ok(xh) = debias_ls(&d, &y, &s2) else { continue };
                    let mut resid = d.matvec(&xh);
                    for (ri, yi) in resid.iter_mut().zip(&y) { *ri -= yi; }
                    let rn = resid.iter().map(|v| v * v).sum::<f64>();
                    match &best { Some((b, _)) if *b <= rn => {}, _ => best = Some((rn, s2)) }
                }
                if best.map(|(_, s)| s).unwrap_or_default() == oracle { lasso_m += 1; }
            }
            println!("[{lo},{hi}] base {base}: omp {omp_m}/100 lasso {lasso_m}/100");
        }
    }
}
