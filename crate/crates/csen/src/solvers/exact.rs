//! Non-iterative solvers: regularized least squares, restricted least
//! squares on a fixed support, and the brute-force support search used as
//! a test oracle for the l0 problem.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::numerics::{cholesky_solve, lu_solve, Matrix};
use crate::solvers::SolverResult;

const CRC_RESIDUAL_TOL: f64 = 1e-8;

/// Closed-form collaborative representation: x̂ = (DᵀD + λI)⁻¹Dᵀy.
///
/// Solved, not inverted; the normal-equation residual is verified against
/// 1e-8 in the max norm.
pub fn crc_solution(d: &Matrix, y: &[f64], lambda: f64) -> Result<SolverResult> {
    let start = Instant::now();
    if !(lambda > 0.0) {
        return Err(Error::invalid(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    if y.len() != d.rows() {
        return Err(Error::invalid("measurement length does not match m"));
    }
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
    let check = a.matvec(x.data());
    let mut residual = 0.0f64;
    for (c, r) in check.iter().zip(rhs.data()) {
        residual = residual.max((c - r).abs());
    }
    if residual > CRC_RESIDUAL_TOL {
        return Err(Error::NumericFailure(format!(
            "crc solve residual {residual:.3e} above {CRC_RESIDUAL_TOL:.0e}"
        )));
    }
    let x_hat = x.into_data();
    let fit = {
        let mut r = d.matvec(&x_hat);
        for (ri, yi) in r.iter_mut().zip(y) {
            *ri -= yi;
        }
        r.iter().map(|v| v * v).sum::<f64>()
    };
    let ridge: f64 = x_hat.iter().map(|v| v * v).sum();
    Ok(SolverResult {
        x_hat,
        iterations: 0,
        converged: true,
        objective: fit + lambda * ridge,
        wall_time: start.elapsed(),
    })
}

/// Least squares restricted to `support`, zeros elsewhere.
///
/// The standard debiasing step after a support estimate. Fails with
/// `RankDeficient` when |support| > m or the sub-dictionary loses rank.
pub fn debias_ls(d: &Matrix, y: &[f64], support: &[usize]) -> Result<Vec<f64>> {
    if y.len() != d.rows() {
        return Err(Error::invalid("measurement length does not match m"));
    }
    if let Some(&bad) = support.iter().find(|&&j| j >= d.cols()) {
        return Err(Error::invalid(format!(
            "support index {bad} out of range for n = {}",
            d.cols()
        )));
    }
    let mut x = vec![0.0; d.cols()];
    if support.is_empty() {
        return Ok(x);
    }
    if support.len() > d.rows() {
        return Err(Error::RankDeficient {
            support: support.to_vec(),
        });
    }
    let sub = d.select_columns(support);
    let gram = sub.gram();
    let rhs = Matrix::new(support.len(), 1, sub.matvec_t(y))?;
    let coeffs = cholesky_solve(&gram, &rhs).map_err(|_| Error::RankDeficient {
        support: support.to_vec(),
    })?;
    for (&j, &c) in support.iter().zip(coeffs.data()) {
        x[j] = c;
    }
    Ok(x)
}

/// Guard on the subset count the oracle may enumerate.
pub const ORACLE_SUBSET_LIMIT: u64 = 1_000_000;

/// Brute-force l0 oracle: the support of size ≤ k whose restricted least
/// squares fit minimizes the residual, ties broken lexicographically
/// (smaller supports enumerate first).
///
/// Test oracle only; refuses when the enumeration would exceed
/// [`ORACLE_SUBSET_LIMIT`] subsets.
pub fn exhaustive_support_oracle(d: &Matrix, y: &[f64], k: usize) -> Result<Vec<usize>> {
    if y.len() != d.rows() {
        return Err(Error::invalid("measurement length does not match m"));
    }
    let n = d.cols();
    let mut total: u64 = 0;
    for j in 0..=k.min(n) {
        total = total.saturating_add(binomial(n, j));
        if total > ORACLE_SUBSET_LIMIT {
            return Err(Error::CombinatorialGuard {
                n,
                k,
                limit: ORACLE_SUBSET_LIMIT,
            });
        }
    }

    let mut best_support: Vec<usize> = Vec::new();
    let mut best_residual = y.iter().map(|v| v * v).sum::<f64>();
    for size in 1..=k.min(n) {
        let mut subset: Vec<usize> = (0..size).collect();
        loop {
            if let Ok(x) = debias_ls(d, y, &subset) {
                let mut r = d.matvec(&x);
                for (ri, yi) in r.iter_mut().zip(y) {
                    *ri -= yi;
                }
                let res = r.iter().map(|v| v * v).sum::<f64>();
                // Strict improvement keeps the lexicographically first of
                // any residual tie (enumeration order is lexicographic).
                if res < best_residual {
                    best_residual = res;
                    best_support = subset.clone();
                }
            }
            if !next_combination(&mut subset, n) {
                break;
            }
        }
    }
    Ok(best_support)
}

fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Advance to the next k-combination of {0..n} in lexicographic order.
fn next_combination(subset: &mut [usize], n: usize) -> bool {
    let k = subset.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if subset[i] < n - k + i {
            subset[i] += 1;
            for j in i + 1..k {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{build_proxy_operator, gaussian_matrix, ProxyKind};

    #[test]
    fn crc_satisfies_normal_equations() {
        for seed in 0..5 {
            let d = gaussian_matrix(6, 12, seed).unwrap();
            let y: Vec<f64> = (0..6).map(|i| (i as f64 * 1.3).sin()).collect();
            let r = crc_solution(&d, &y, 1e-2).unwrap();
            // independent residual recomputation
            let mut a = d.gram();
            for i in 0..12 {
                let v = a.get(i, i);
                a.set(i, i, v + 1e-2);
            }
            let lhs = a.matvec(&r.x_hat);
            let rhs = d.matvec_t(&y);
            for (l, rr) in lhs.iter().zip(&rhs) {
                assert!((l - rr).abs() <= 1e-8);
            }
            assert!(r.converged);
        }
    }

    #[test]
    fn crc_approaches_adjoint_for_orthonormal_columns() {
        // D with orthonormal columns: x̂ → Dᵀy as λ → 0.
        let d = Matrix::from_fn(4, 2, |i, j| if i == j { 1.0 } else { 0.0 });
        let y = vec![0.5, -0.25, 1.0, 2.0];
        let r = crc_solution(&d, &y, 1e-12).unwrap();
        let expect = d.matvec_t(&y);
        for (a, b) in r.x_hat.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn crc_matches_lmmse_proxy() {
        let d = gaussian_matrix(5, 8, 9).unwrap();
        let y: Vec<f64> = (0..5).map(|i| (i as f64).cos()).collect();
        let lambda = 0.05;
        let r = crc_solution(&d, &y, lambda).unwrap();
        let p = build_proxy_operator(&d, ProxyKind::Lmmse { lambda }, (2, 4)).unwrap();
        let via_proxy = p.apply_vec(&y).unwrap();
        for (a, b) in r.x_hat.iter().zip(&via_proxy) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn debias_recovers_exact_signal_on_true_support() {
        let d = gaussian_matrix(8, 16, 21).unwrap();
        let mut x = vec![0.0; 16];
        x[3] = 1.5;
        x[11] = -0.75;
        let y = d.matvec(&x);
        let rec = debias_ls(&d, &y, &[3, 11]).unwrap();
        for i in 0..16 {
            assert!((rec[i] - x[i]).abs() < 1e-8, "index {i}");
        }
    }

    #[test]
    fn debias_empty_support_is_zero() {
        let d = gaussian_matrix(4, 6, 2).unwrap();
        let rec = debias_ls(&d, &vec![1.0; 4], &[]).unwrap();
        assert!(rec.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn debias_matches_normal_equation_oracle() {
        // Overdetermined fit checked against an explicit normal-equations
        // solve by Gaussian elimination.
        let d = gaussian_matrix(10, 6, 5).unwrap();
        let y: Vec<f64> = (0..10).map(|i| (i as f64 * 0.7).sin()).collect();
        let support = [0, 2, 5];
        let rec = debias_ls(&d, &y, &support).unwrap();
        let sub = d.select_columns(&support);
        let g = sub.gram();
        let rhs = Matrix::new(3, 1, sub.matvec_t(&y)).unwrap();
        let oracle = lu_solve(&g, &rhs).unwrap();
        for (i, &j) in support.iter().enumerate() {
            assert!((rec[j] - oracle.get(i, 0)).abs() < 1e-10);
        }
    }

    #[test]
    fn debias_rejects_oversized_support() {
        let d = gaussian_matrix(3, 6, 0).unwrap();
        match debias_ls(&d, &vec![1.0; 3], &[0, 1, 2, 3]) {
            Err(Error::RankDeficient { support }) => assert_eq!(support.len(), 4),
            other => panic!("expected RankDeficient, got {other:?}"),
        }
    }

    #[test]
    fn oracle_finds_single_atom() {
        let d = gaussian_matrix(6, 10, 17).unwrap();
        let y = d.column(2);
        assert_eq!(exhaustive_support_oracle(&d, &y, 1).unwrap(), vec![2]);
    }

    #[test]
    fn oracle_k_zero_is_empty() {
        let d = gaussian_matrix(4, 6, 3).unwrap();
        assert!(exhaustive_support_oracle(&d, &vec![1.0; 4], 0)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn oracle_guard_refuses_large_enumerations() {
        let d = gaussian_matrix(10, 200, 0).unwrap();
        match exhaustive_support_oracle(&d, &vec![1.0; 10], 5) {
            Err(Error::CombinatorialGuard { .. }) => {}
            other => panic!("expected guard, got {other:?}"),
        }
    }

    #[test]
    fn binomial_basics() {
        assert_eq!(binomial(12, 2), 66);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(5, 6), 0);
    }
}
