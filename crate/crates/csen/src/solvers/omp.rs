//! Orthogonal matching pursuit.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::numerics::{cholesky_solve, Matrix};
use crate::solvers::SolverResult;

/// Greedy support selection with a restricted least-squares re-fit after
/// every accepted atom.
///
/// Atom selection correlates the residual against unit-normalized columns
/// (normalization happens internally; coefficients refer to the original
/// columns). Stops at ‖residual‖ ≤ `res_tol` or after `k_max` atoms.
/// A rank-deficient selected sub-dictionary stops the pursuit early with
/// `converged = false`.
pub fn omp(d: &Matrix, y: &[f64], k_max: usize, res_tol: f64) -> Result<SolverResult> {
    let start = Instant::now();
    let m = d.rows();
    let n = d.cols();
    if y.len() != m {
        return Err(Error::invalid(format!(
            "measurement length {} does not match m = {m}",
            y.len()
        )));
    }
    if k_max > m {
        return Err(Error::invalid(format!(
            "k_max = {k_max} exceeds the measurement count m = {m}"
        )));
    }
    if !(res_tol >= 0.0) {
        return Err(Error::invalid("res_tol must be non-negative"));
    }

    let norms = d.column_norms();
    let mut selected: Vec<usize> = Vec::new();
    let mut in_support = vec![false; n];
    let mut coeffs: Vec<f64> = Vec::new();
    let mut residual: Vec<f64> = y.to_vec();
    let mut res_norm = norm2(&residual);
    let mut converged = res_norm <= res_tol;

    while selected.len() < k_max && res_norm > res_tol {
        // Max correlation against unit atoms; lowest index wins ties.
        let c = d.matvec_t(&residual);
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if in_support[j] || norms[j] == 0.0 {
                continue;
            }
            let corr = c[j].abs() / norms[j];
            match best {
                Some((_, b)) if corr <= b => {}
                _ => best = Some((j, corr)),
            }
        }
        let Some((j, corr)) = best else { break };
        if corr == 0.0 {
            break; // residual orthogonal to every remaining atom
        }

        selected.push(j);
        in_support[j] = true;
        let sub = d.select_columns(&selected);
        let gram = sub.gram();
        let rhs_vec = sub.matvec_t(y);
        let rhs = Matrix::new(selected.len(), 1, rhs_vec)?;
        let solved = match cholesky_solve(&gram, &rhs) {
            Ok(s) => s,
            Err(_) => {
                // The new atom made the sub-dictionary numerically rank
                // deficient; undo and stop.
                selected.pop();
                converged = false;
                break;
            }
        };
        coeffs = solved.into_data();

        residual.copy_from_slice(y);
        for (ci, &ji) in coeffs.iter().zip(&selected) {
            for (r, row) in residual.iter_mut().zip(0..m) {
                *r -= ci * d.get(row, ji);
            }
        }
        let new_norm = norm2(&residual);
        debug_assert!(
            new_norm < res_norm + 1e-12,
            "residual did not decrease: {res_norm} -> {new_norm}"
        );
        res_norm = new_norm;
        converged = res_norm <= res_tol || selected.len() == k_max;
    }

    let mut x_hat = vec![0.0; n];
    for (&j, &c) in selected.iter().zip(&coeffs) {
        x_hat[j] = c;
    }
    Ok(SolverResult {
        x_hat,
        iterations: selected.len(),
        converged,
        objective: res_norm * res_norm,
        wall_time: start.elapsed(),
    })
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
