//! Dense matrix/vector kernels, random ensembles and proxy operators.
//!
//! Everything is 64-bit and row-major. The matrices involved are small
//! (hundreds by hundreds), so the kernels are plain loops arranged for
//! contiguous access rather than BLAS calls.

mod csm1;
mod matrix;
mod proxy;

pub use matrix::{cholesky_solve, lu_solve, Matrix};
pub use proxy::{build_proxy_operator, ProxyKind, ProxyOperator};

use crate::error::{Error, Result};
use crate::rng;
use rand_distr::{Distribution, Normal};

/// Gaussian measurement ensemble: entries i.i.d. N(0, 1/m).
///
/// Columns then have unit squared norm in expectation, which keeps the
/// measurement operator roughly an isometry at any rate m/n.
pub fn gaussian_matrix(m: usize, n: usize, seed: u64) -> Result<Matrix> {
    if m == 0 || n == 0 {
        return Err(Error::invalid(format!(
            "gaussian_matrix needs positive dims, got {m}x{n}"
        )));
    }
    let mut rng = rng::seeded(seed);
    let normal = Normal::new(0.0, (1.0 / m as f64).sqrt()).expect("finite std");
    let data: Vec<f64> = (0..m * n).map(|_| normal.sample(&mut rng)).collect();
    Matrix::new(m, n, data)
}

/// Scale every column to unit l2 norm.
pub fn normalize_columns(m: &Matrix) -> Result<Matrix> {
    let norms = m.column_norms();
    for (j, &nj) in norms.iter().enumerate() {
        if nj == 0.0 {
            return Err(Error::DegenerateAtom { col: j });
        }
    }
    let mut out = m.clone();
    out.scale_columns_inv(&norms);
    Ok(out)
}

/// Estimate of the squared spectral norm from power iteration.
#[derive(Debug, Clone, Copy)]
pub struct SpectralEstimate {
    /// Largest eigenvalue estimate of MᵀM, i.e. ‖M‖₂².
    pub value: f64,
    /// False when the relative change was still above `tol` after `iters`.
    pub converged: bool,
    /// Iterations actually performed.
    pub iterations: usize,
}

/// Squared spectral norm ‖M‖₂² via power iteration on MᵀM.
///
/// The Gram matrix is never formed; each step is two mat-vecs. On
/// non-convergence the best estimate is still returned, flagged.
pub fn spectral_norm_sq(m: &Matrix, iters: usize, tol: f64) -> Result<SpectralEstimate> {
    if m.data().iter().all(|&x| x == 0.0) {
        return Err(Error::invalid("spectral_norm_sq of the zero matrix"));
    }
    // Fixed internal seed: the estimate is a deterministic function of M.
    let mut rng = rng::seeded(SPECTRAL_SEED);
    let normal = Normal::new(0.0, 1.0).expect("finite std");
    let mut v: Vec<f64> = (0..m.cols()).map(|_| normal.sample(&mut rng)).collect();
    normalize(&mut v);

    let mut lambda = 0.0f64;
    let mut iterations = 0;
    let mut converged = false;
    let mut mv = vec![0.0; m.rows()];
    for it in 1..=iters {
        m.matvec_into(&v, &mut mv);
        // Rayleigh quotient for MᵀM at unit v is ‖Mv‖².
        let new_lambda: f64 = mv.iter().map(|x| x * x).sum();
        let w = m.matvec_t(&mv);
        v = w;
        let n = normalize(&mut v);
        iterations = it;
        if n == 0.0 {
            // v fell in the null space; restart from a fresh direction.
            v = (0..m.cols()).map(|_| normal.sample(&mut rng)).collect();
            normalize(&mut v);
            continue;
        }
        if (new_lambda - lambda).abs() <= tol * new_lambda.max(f64::MIN_POSITIVE) {
            lambda = new_lambda;
            converged = true;
            break;
        }
        lambda = new_lambda;
    }
    Ok(SpectralEstimate {
        value: lambda,
        converged,
        iterations,
    })
}

/// Elementwise sign(vᵢ)·max(|vᵢ|−t, 0), the proximal map of t‖·‖₁
/// under ½‖u−v‖².
pub fn soft_threshold(v: &[f64], t: f64) -> Result<Vec<f64>> {
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("soft_threshold needs t >= 0, got {t}")));
    }
    Ok(v.iter().map(|&x| soft_scalar(x, t)).collect())
}

#[inline]
pub(crate) fn soft_scalar(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
    n
}

const SPECTRAL_SEED: u64 = 0x5EED_5EC7;
