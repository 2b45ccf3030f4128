//! Property suites for the module invariants: numeric identities,
//! monotonicity, normalization and reshape bijections.

use csen::metrics::{nmse_db, recovery_success, support_metrics};
use csen::model::{classify_head, threshold_support};
use csen::numerics::{
    build_proxy_operator, gaussian_matrix, normalize_columns, soft_threshold, spectral_norm_sq,
    Matrix, ProxyKind,
};
use csen::rng;
use csen::sensing::{mask_from_signal, sense, SensingModel};
use csen::solvers::weights_from_probability;
use proptest::prelude::*;

proptest! {
    #[test]
    fn soft_threshold_satisfies_subgradient_optimality(
        v in prop::collection::vec(-100.0f64..100.0, 1..40),
        t in 0.0f64..50.0,
    ) {
        // u = soft(v, t) minimizes ½(u−v)² + t|u| per coordinate:
        // u ≠ 0 ⇒ u − v + t·sign(u) = 0; u = 0 ⇒ |v| ≤ t.
        let u = soft_threshold(&v, t).unwrap();
        for (&ui, &vi) in u.iter().zip(&v) {
            if ui != 0.0 {
                let r = ui - vi + t * ui.signum();
                prop_assert!(r.abs() <= 1e-10, "stationarity residual {r}");
            } else {
                prop_assert!(vi.abs() <= t + 1e-10);
            }
        }
    }

    #[test]
    fn soft_threshold_matches_grid_search(
        v in -5.0f64..5.0,
        t in 0.0f64..3.0,
    ) {
        // 1-D objective ½(u−v)² + t|u| scanned over a fine grid.
        let ours = soft_threshold(&[v], t).unwrap()[0];
        let obj = |u: f64| 0.5 * (u - v) * (u - v) + t * u.abs();
        let mut best = (f64::INFINITY, 0.0);
        let span = v.abs() + t + 1.0;
        let steps = 20_000;
        for i in 0..=steps {
            let u = -span + 2.0 * span * i as f64 / steps as f64;
            let o = obj(u);
            if o < best.0 {
                best = (o, u);
            }
        }
        let grid_step = 2.0 * span / steps as f64;
        prop_assert!((ours - best.1).abs() <= grid_step + 1e-9);
    }

    #[test]
    fn normalize_columns_is_idempotent(seed in 0u64..500) {
        let m = gaussian_matrix(6, 9, seed).unwrap();
        let once = normalize_columns(&m).unwrap();
        let twice = normalize_columns(&once).unwrap();
        for (a, b) in once.data().iter().zip(twice.data()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        for n in twice.column_norms() {
            prop_assert!((n - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn reshape_is_a_bijection(seed in 0u64..200) {
        // flatten(apply_proxy(P, y)) must equal B·y bit for bit.
        let d = gaussian_matrix(5, 12, seed).unwrap();
        let p = build_proxy_operator(&d, ProxyKind::MaxCorrelation, (3, 4)).unwrap();
        let mut r = rng::seeded(seed);
        use rand::Rng;
        let y: Vec<f64> = (0..5).map(|_| r.random_range(-2.0..2.0)).collect();
        let plane = p.apply(&y).unwrap();
        let flat = p.apply_vec(&y).unwrap();
        prop_assert_eq!(plane.data(), flat.as_slice());
    }

    #[test]
    fn threshold_support_is_monotone(
        vals in prop::collection::vec(0.0f64..1.0, 16),
        t1 in 0.0f64..1.0,
        t2 in 0.0f64..1.0,
    ) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let p = Matrix::new(4, 4, vals).unwrap();
        let big = threshold_support(&p, lo);
        let small = threshold_support(&p, hi);
        prop_assert!(small.iter().all(|i| big.contains(i)));
    }

    #[test]
    fn classify_head_is_normalized_and_shift_invariant(
        vals in prop::collection::vec(0.0f64..1.0, 16),
        shift in -3.0f64..3.0,
    ) {
        let groups: Vec<Vec<usize>> = (0..4).map(|c| (c * 4..(c + 1) * 4).collect()).collect();
        let p = Matrix::new(4, 4, vals.clone()).unwrap();
        let q = classify_head(&p, &groups).unwrap();
        prop_assert!((q.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let shifted = Matrix::new(4, 4, vals.iter().map(|v| v + shift).collect()).unwrap();
        let q2 = classify_head(&shifted, &groups).unwrap();
        let am = |v: &[f64]| (0..v.len()).max_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap()).unwrap();
        prop_assert_eq!(am(&q), am(&q2));
    }

    #[test]
    fn support_metric_identities(
        pred in prop::collection::btree_set(0usize..30, 0..12),
        truth in prop::collection::btree_set(0usize..30, 0..12),
    ) {
        let p: Vec<usize> = pred.into_iter().collect();
        let t: Vec<usize> = truth.into_iter().collect();
        let a = support_metrics(&p, &t, 30);
        let b = support_metrics(&t, &p, 30);
        prop_assert_eq!(a.ce, b.ce);
        prop_assert_eq!(a.precision, b.recall);
        prop_assert_eq!(a.recall, b.precision);
        prop_assert!(a.f1 <= 2.0 * a.precision + 1e-12);
        prop_assert!(a.f1 <= 2.0 * a.recall + 1e-12);
        if a.precision + a.recall > 0.0 {
            let harm = 2.0 * a.precision * a.recall / (a.precision + a.recall);
            prop_assert!((a.f1 - harm).abs() <= 1e-12);
        } else {
            prop_assert_eq!(a.f1, 0.0);
        }
    }

    #[test]
    fn recovery_success_is_scale_invariant(
        x in prop::collection::vec(-5.0f64..5.0, 1..20),
        xh in prop::collection::vec(-5.0f64..5.0, 1..20),
        alpha in prop::sample::select(vec![-3.0f64, -1.0, 0.5, 2.0, 10.0]),
        tol in 0.01f64..1.0,
    ) {
        let n = x.len().min(xh.len());
        let x = &x[..n];
        let xh = &xh[..n];
        prop_assume!(x.iter().any(|&v| v != 0.0));
        let xs: Vec<f64> = x.iter().map(|v| alpha * v).collect();
        let xhs: Vec<f64> = xh.iter().map(|v| alpha * v).collect();
        prop_assert_eq!(
            recovery_success(xh, x, tol).unwrap(),
            recovery_success(&xhs, &xs, tol).unwrap()
        );
    }

    #[test]
    fn sparse_instance_mask_reconstructs_signal(
        entries in prop::collection::vec((-3.0f64..3.0, prop::bool::ANY), 1..40),
    ) {
        let x: Vec<f64> = entries.iter().map(|(v, on)| if *on { *v } else { 0.0 }).collect();
        let inst = mask_from_signal(&x, 0.0).unwrap();
        // Σ mask = k
        prop_assert_eq!(inst.mask().iter().sum::<f64>() as usize, inst.k());
        // mask ⊙ x = x (exact reconstruction from (x_Λ, Λ))
        for ((&m, &v), rebuilt) in inst
            .mask()
            .iter()
            .zip(inst.x())
            .zip(inst.mask().iter().zip(inst.x()).map(|(m, v)| m * v))
        {
            prop_assert_eq!(m * v, rebuilt);
            if m == 0.0 {
                prop_assert_eq!(v, 0.0);
            }
        }
        prop_assert!((inst.rho() - inst.k() as f64 / x.len() as f64).abs() < 1e-15);
    }

    #[test]
    fn weights_respect_bounds_and_monotonicity(
        p in prop::collection::vec(0.0f64..=1.0, 2..30),
        eps in prop::sample::select(vec![1e-3f64, 1e-2, 0.1, 1.0]),
    ) {
        let w = weights_from_probability(&p, eps).unwrap();
        let lo = 1.0 / (1.0 + eps);
        let hi = 1.0 / eps;
        for &wi in w.w() {
            prop_assert!(wi >= lo - 1e-12 && wi <= hi + 1e-12);
        }
        for i in 0..p.len() {
            for j in 0..p.len() {
                if p[i] > p[j] {
                    prop_assert!(w.w()[i] < w.w()[j] + 1e-15);
                }
            }
        }
    }
}

#[test]
fn gaussian_matrix_is_distribution_correct() {
    // ≥ 1e5 entries: sample mean within 3σ of zero, sample variance
    // within 5% of 1/m.
    let (m, n) = (200, 784);
    let mat = gaussian_matrix(m, n, 7).unwrap();
    let count = (m * n) as f64;
    let mean = mat.data().iter().sum::<f64>() / count;
    let var = mat.data().iter().map(|v| v * v).sum::<f64>() / count - mean * mean;
    let sigma_mean = (1.0 / (m as f64 * count)).sqrt();
    assert!(mean.abs() <= 3.0 * sigma_mean, "mean {mean} vs 3σ {}", 3.0 * sigma_mean);
    let expected = 1.0 / m as f64;
    assert!((var - expected).abs() <= 0.05 * expected, "var {var} vs {expected}");

    // mean squared column norm within 5% of 1
    let norms = mat.column_norms();
    let msq = norms.iter().map(|v| v * v).sum::<f64>() / n as f64;
    assert!((msq - 1.0).abs() <= 0.05, "mean sq col norm {msq}");

    // seed determinism on the smallest case
    let a = gaussian_matrix(1, 1, 99).unwrap();
    let b = gaussian_matrix(1, 1, 99).unwrap();
    assert_eq!(a.data()[0], b.data()[0]);
}

#[test]
fn spectral_norm_matches_dense_eigensolver() {
    // Independent oracle: nalgebra's symmetric eigendecomposition of the
    // 12×12 Gram matrix.
    for seed in 0..5 {
        let m = gaussian_matrix(8, 12, seed).unwrap();
        let est = spectral_norm_sq(&m, 2000, 1e-14).unwrap();
        assert!(est.converged);

        let gram = m.gram();
        let na = nalgebra::DMatrix::from_fn(12, 12, |i, j| gram.get(i, j));
        let eig = na.symmetric_eigen();
        let lambda_max = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
        let rel = (est.value - lambda_max).abs() / lambda_max;
        assert!(rel <= 1e-6, "seed {seed}: rel error {rel}");
    }
}

#[test]
fn spectral_norm_diagonal_cases() {
    assert!((spectral_norm_sq(&Matrix::identity(3), 100, 1e-12).unwrap().value - 1.0).abs() < 1e-9);
    let mut d = Matrix::zeros(3, 3);
    d.set(0, 0, 1.0);
    d.set(1, 1, 2.0);
    d.set(2, 2, 3.0);
    let est = spectral_norm_sq(&d, 500, 1e-14).unwrap();
    assert!((est.value - 9.0).abs() < 1e-8, "got {}", est.value);
}

#[test]
fn sensing_is_linear_without_noise() {
    let a = gaussian_matrix(6, 15, 3).unwrap();
    let model = SensingModel::canonical(a).unwrap();
    let mut r = rng::seeded(5);
    use rand::Rng;
    for _ in 0..20 {
        let x1: Vec<f64> = (0..15).map(|_| r.random_range(-1.0..1.0)).collect();
        let x2: Vec<f64> = (0..15).map(|_| r.random_range(-1.0..1.0)).collect();
        let sum: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a + b).collect();
        let y1 = sense(&model, &x1, None, 0).unwrap();
        let y2 = sense(&model, &x2, None, 0).unwrap();
        let ys = sense(&model, &sum, None, 0).unwrap();
        for i in 0..6 {
            assert!((ys.y(0)[i] - y1.y(0)[i] - y2.y(0)[i]).abs() <= 1e-10);
        }
    }
}

#[test]
fn nmse_has_floor_and_known_values() {
    let x = vec![1.0, 2.0, -1.0];
    assert_eq!(nmse_db(&x, &x).unwrap(), -300.0);
    let zero = vec![0.0; 3];
    assert!(nmse_db(&zero, &x).unwrap().abs() < 1e-12);
}
