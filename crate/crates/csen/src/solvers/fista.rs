//! FISTA for the Lasso objective ‖Dx−y‖² + λ‖w⊙x‖₁.
//!
//! The squared term is deliberately un-halved; all step sizes and
//! thresholds carry the resulting factor of two. Momentum restarts on any
//! objective increase, which keeps the iterate objectives non-increasing.
//!
//! Convergence is declared when the relative objective change drops below
//! `rel_tol` *and* the subgradient optimality residual is below
//! 10·rel_tol·λ·max(w), so a converged result always carries its own
//! optimality certificate. If `max_iters` runs out first the best iterate
//! is returned with `converged = false`.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::numerics::{self, soft_scalar, Matrix};
use crate::solvers::{SolverResult, WeightVector};

/// Safety margin on the Lipschitz estimate: power iteration approaches
/// ‖D‖₂² from below, and descent needs a step no larger than the true
/// 1/(2‖D‖₂²).
const LIPSCHITZ_MARGIN: f64 = 1.02;
const POWER_ITERS: usize = 500;
const POWER_TOL: f64 = 1e-12;

/// Minimize ‖Dx−y‖² + λ‖x‖₁.
pub fn fista_lasso(
    d: &Matrix,
    y: &[f64],
    lambda: f64,
    max_iters: usize,
    rel_tol: f64,
) -> Result<SolverResult> {
    let opts = CoreOptions::certified();
    fista_core(d, y, lambda, None, max_iters, rel_tol, &opts).map(|(r, _)| r)
}

/// As [`fista_lasso`] but also returns the per-iteration objective values;
/// used by the monotonicity tests.
pub fn fista_lasso_trace(
    d: &Matrix,
    y: &[f64],
    lambda: f64,
    max_iters: usize,
    rel_tol: f64,
) -> Result<(SolverResult, Vec<f64>)> {
    let mut opts = CoreOptions::certified();
    opts.want_trace = true;
    fista_core(d, y, lambda, None, max_iters, rel_tol, &opts)
}

/// Minimize ‖Dx−y‖² + λ‖w⊙x‖₁.
///
/// With uniform weights this reproduces [`fista_lasso`] iterate for
/// iterate: each per-coordinate threshold is the scalar threshold times
/// wᵢ = 1.0, which is exact in IEEE arithmetic.
pub fn weighted_fista_lasso(
    d: &Matrix,
    y: &[f64],
    lambda: f64,
    weights: &WeightVector,
    max_iters: usize,
    rel_tol: f64,
) -> Result<SolverResult> {
    let opts = CoreOptions::certified();
    fista_core(d, y, lambda, Some(weights), max_iters, rel_tol, &opts).map(|(r, _)| r)
}

/// Trace-returning form of [`weighted_fista_lasso`].
pub fn weighted_fista_lasso_trace(
    d: &Matrix,
    y: &[f64],
    lambda: f64,
    weights: &WeightVector,
    max_iters: usize,
    rel_tol: f64,
) -> Result<(SolverResult, Vec<f64>)> {
    let mut opts = CoreOptions::certified();
    opts.want_trace = true;
    fista_core(d, y, lambda, Some(weights), max_iters, rel_tol, &opts)
}

struct CoreOptions {
    /// Precomputed ‖D‖₂², to amortize power iteration over repeated solves.
    lipschitz_sq: Option<f64>,
    /// Warm-start iterate.
    x0: Option<Vec<f64>>,
    /// Gate convergence on the subgradient certificate.
    certificate: bool,
    want_trace: bool,
}

impl CoreOptions {
    fn certified() -> Self {
        CoreOptions {
            lipschitz_sq: None,
            x0: None,
            certificate: true,
            want_trace: false,
        }
    }
}

fn fista_core(
    d: &Matrix,
    y: &[f64],
    lambda: f64,
    weights: Option<&WeightVector>,
    max_iters: usize,
    rel_tol: f64,
    opts: &CoreOptions,
) -> Result<(SolverResult, Vec<f64>)> {
    let start = Instant::now();
    let n = d.cols();
    let m = d.rows();
    if y.len() != m {
        return Err(Error::invalid(format!(
            "measurement length {} does not match m = {m}",
            y.len()
        )));
    }
    if !(lambda > 0.0) {
        return Err(Error::invalid(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let mut max_weight = 1.0f64;
    if let Some(w) = weights {
        if w.w().len() != n {
            return Err(Error::invalid("weight length does not match n"));
        }
        if let Some(i) = w.w().iter().position(|&v| !(v > 0.0)) {
            return Err(Error::invalid(format!("weight {i} must be positive")));
        }
        max_weight = w.w().iter().fold(0.0f64, |a, &v| a.max(v));
    }

    let spec_sq = match opts.lipschitz_sq {
        Some(s) => s,
        None => numerics::spectral_norm_sq(d, POWER_ITERS, POWER_TOL)?.value,
    };
    // Step size 1/L for the gradient of ‖Dx−y‖², whose Lipschitz constant
    // is 2‖D‖₂².
    let step = 1.0 / (2.0 * spec_sq * LIPSCHITZ_MARGIN);
    let scalar_threshold = step * lambda;
    let certificate_tol = 10.0 * rel_tol * lambda * max_weight;

    let mut x_prev: Vec<f64> = match &opts.x0 {
        Some(v) => {
            if v.len() != n {
                return Err(Error::invalid("warm start length does not match n"));
            }
            v.clone()
        }
        None => vec![0.0; n],
    };
    let mut x = vec![0.0; n];
    let mut y_vec = x_prev.clone();
    let mut resid = vec![0.0; m];
    let mut obj_prev = objective(d, y, &x_prev, lambda, weights, &mut resid);
    let mut t = 1.0f64;
    let mut trace = Vec::new();
    if opts.want_trace {
        trace.push(obj_prev);
    }

    let mut iterations = 0;
    let mut converged = false;
    for k in 1..=max_iters {
        prox_step(d, y, &y_vec, step, scalar_threshold, weights, &mut x, &mut resid);
        let mut obj = objective(d, y, &x, lambda, weights, &mut resid);
        if obj > obj_prev {
            // Momentum overshot: restart from the last accepted iterate.
            // A plain proximal-gradient step from there cannot increase the
            // objective at this step size.
            t = 1.0;
            prox_step(d, y, &x_prev, step, scalar_threshold, weights, &mut x, &mut resid);
            obj = objective(d, y, &x, lambda, weights, &mut resid);
        }
        debug_assert!(
            obj <= obj_prev * (1.0 + 1e-12) + 1e-12,
            "objective rose after restart: {obj_prev} -> {obj}"
        );
        if opts.want_trace {
            trace.push(obj);
        }
        iterations = k;

        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        for i in 0..n {
            y_vec[i] = x[i] + beta * (x[i] - x_prev[i]);
        }
        t = t_next;

        let rel = if obj_prev > 0.0 {
            (obj_prev - obj) / obj_prev
        } else {
            0.0
        };
        std::mem::swap(&mut x_prev, &mut x);
        obj_prev = obj;
        if rel < rel_tol {
            if !opts.certificate
                || lasso_subgradient_residual(d, y, &x_prev, lambda, weights) <= certificate_tol
            {
                converged = true;
                break;
            }
        }
    }

    Ok((
        SolverResult {
            x_hat: x_prev,
            iterations,
            converged,
            objective: obj_prev,
            wall_time: start.elapsed(),
        },
        trace,
    ))
}

#[allow(clippy::too_many_arguments)]
fn prox_step(
    d: &Matrix,
    y: &[f64],
    at: &[f64],
    step: f64,
    scalar_threshold: f64,
    weights: Option<&WeightVector>,
    out: &mut [f64],
    resid: &mut [f64],
) {
    d.matvec_into(at, resid);
    for (r, yi) in resid.iter_mut().zip(y) {
        *r -= yi;
    }
    let grad = d.matvec_t(resid); // ∇‖Dx−y‖² = 2Dᵀ(Dx−y); the 2 folds below
    match weights {
        None => {
            for i in 0..out.len() {
                out[i] = soft_scalar(at[i] - 2.0 * step * grad[i], scalar_threshold);
            }
        }
        Some(w) => {
            let w = w.w();
            for i in 0..out.len() {
                out[i] = soft_scalar(at[i] - 2.0 * step * grad[i], scalar_threshold * w[i]);
            }
        }
    }
}

fn objective(
    d: &Matrix,
    y: &[f64],
    x: &[f64],
    lambda: f64,
    weights: Option<&WeightVector>,
    resid: &mut [f64],
) -> f64 {
    d.matvec_into(x, resid);
    let mut fit = 0.0;
    for (r, yi) in resid.iter().zip(y) {
        let e = r - yi;
        fit += e * e;
    }
    let penalty: f64 = match weights {
        None => x.iter().map(|v| v.abs()).sum(),
        Some(w) => x.iter().zip(w.w()).map(|(v, wi)| wi * v.abs()).sum(),
    };
    fit + lambda * penalty
}

/// ∞-norm of the Lasso optimality residual at `x`.
///
/// Zero exactly at a minimizer: coordinates on the support must satisfy
/// gᵢ + λwᵢ·sign(xᵢ) = 0, the rest |gᵢ| ≤ λwᵢ, where g = 2Dᵀ(Dx−y).
pub fn lasso_subgradient_residual(
    d: &Matrix,
    y: &[f64],
    x: &[f64],
    lambda: f64,
    weights: Option<&WeightVector>,
) -> f64 {
    let mut resid = d.matvec(x);
    for (r, yi) in resid.iter_mut().zip(y) {
        *r -= yi;
    }
    let g = d.matvec_t(&resid);
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let wi = weights.map_or(1.0, |w| w.w()[i]);
        let gi = 2.0 * g[i];
        let v = if x[i] > 0.0 {
            (gi + lambda * wi).abs()
        } else if x[i] < 0.0 {
            (gi - lambda * wi).abs()
        } else {
            (gi.abs() - lambda * wi).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

/// Continuation schedule for the Basis-Pursuit-style solve.
#[derive(Debug, Clone)]
pub struct PathConfig {
    /// Number of continuation stages.
    pub stages: usize,
    /// Multiplicative λ decay per stage, in (0,1).
    pub decay: f64,
    /// FISTA iterations per stage.
    pub stage_iters: usize,
    /// Per-stage relative objective tolerance.
    pub rel_tol: f64,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig {
            stages: 12,
            decay: 0.3,
            stage_iters: 250,
            rel_tol: 1e-12,
        }
    }
}

/// Equality-constrained l1 minimization approximated by a Lasso
/// continuation path: λ starts just below the level that zeroes the
/// solution and decays geometrically, warm-starting each stage.
///
/// With `weights`, minimizes ‖w⊙x‖₁ over approximate solutions of Dx = y.
pub fn basis_pursuit_path(
    d: &Matrix,
    y: &[f64],
    weights: Option<&WeightVector>,
    cfg: &PathConfig,
) -> Result<SolverResult> {
    let start = Instant::now();
    if cfg.stages == 0 || !(cfg.decay > 0.0 && cfg.decay < 1.0) {
        return Err(Error::invalid("bad continuation schedule"));
    }
    let corr = d.matvec_t(y);
    let mut lambda_max = 0.0f64;
    for (i, c) in corr.iter().enumerate() {
        let wi = weights.map_or(1.0, |w| w.w()[i]);
        lambda_max = lambda_max.max(2.0 * c.abs() / wi);
    }
    if lambda_max == 0.0 {
        // y is orthogonal to every atom; the minimizer is x = 0.
        return Ok(SolverResult {
            x_hat: vec![0.0; d.cols()],
            iterations: 0,
            converged: true,
            objective: 0.0,
            wall_time: start.elapsed(),
        });
    }
    let spec_sq = numerics::spectral_norm_sq(d, POWER_ITERS, POWER_TOL)?.value;
    let mut x = vec![0.0; d.cols()];
    let mut total_iters = 0;
    let mut converged = true;
    let mut lambda = lambda_max * cfg.decay;
    let mut last_objective = 0.0;
    for _ in 0..cfg.stages {
        let opts = CoreOptions {
            lipschitz_sq: Some(spec_sq),
            x0: Some(x),
            certificate: false,
            want_trace: false,
        };
        let (r, _) = fista_core(d, y, lambda, weights, cfg.stage_iters, cfg.rel_tol, &opts)?;
        total_iters += r.iterations;
        converged &= r.converged;
        last_objective = r.objective;
        x = r.x_hat;
        lambda *= cfg.decay;
    }
    Ok(SolverResult {
        x_hat: x,
        iterations: total_iters,
        converged,
        objective: last_objective,
        wall_time: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gaussian_matrix;
    use crate::rng;
    use rand::Rng;

    pub(crate) fn random_instance(
        seed: u64,
        m: usize,
        n: usize,
        k: usize,
    ) -> (Matrix, Vec<f64>, Vec<f64>) {
        let d = gaussian_matrix(m, n, seed).unwrap();
        let mut r = rng::seeded(rng::mix(seed, &[1]));
        let mut x = vec![0.0; n];
        let mut placed = 0;
        while placed < k {
            let i = r.random_range(0..n);
            if x[i] == 0.0 {
                let mag: f64 = r.random_range(0.5..2.0);
                let sign = if r.random::<bool>() { 1.0 } else { -1.0 };
                x[i] = sign * mag;
                placed += 1;
            }
        }
        let y = d.matvec(&x);
        (d, y, x)
    }

    #[test]
    fn identity_dictionary_matches_closed_form() {
        // With D = I the minimizer is soft(y, λ/2) per coordinate.
        let d = Matrix::identity(6);
        let y = vec![2.0, -0.5, 1.0, 0.2, -3.0, 0.0];
        let lambda = 2.0;
        let r = fista_lasso(&d, &y, lambda, 5000, 1e-12).unwrap();
        for (xi, yi) in r.x_hat.iter().zip(&y) {
            let expect = soft_scalar(*yi, lambda / 2.0);
            assert!(
                (xi - expect).abs() < 1e-10,
                "got {xi}, expected {expect} for y = {yi}"
            );
        }
    }

    #[test]
    fn large_lambda_zeroes_solution() {
        let (d, y, _) = random_instance(3, 6, 10, 2);
        let corr = d.matvec_t(&y);
        let lambda = 2.0 * corr.iter().fold(0.0f64, |a, c| a.max(c.abs()));
        let r = fista_lasso(&d, &y, lambda, 100, 1e-12).unwrap();
        assert!(r.x_hat.iter().all(|&v| v == 0.0));
        assert!(r.converged);
    }

    #[test]
    fn matches_long_ista_reference() {
        // Independent oracle: plain ISTA with a conservative step, run far
        // past convergence.
        let (d, y, _) = random_instance(7, 6, 10, 2);
        let lambda = 0.1;
        let r = fista_lasso(&d, &y, lambda, 20_000, 1e-13).unwrap();

        let spec = crate::numerics::spectral_norm_sq(&d, 1000, 1e-14)
            .unwrap()
            .value;
        let step = 1.0 / (2.0 * spec * 1.1);
        let mut x = vec![0.0; 10];
        for _ in 0..200_000 {
            let mut resid = d.matvec(&x);
            for (ri, yi) in resid.iter_mut().zip(&y) {
                *ri -= yi;
            }
            let g = d.matvec_t(&resid);
            for i in 0..10 {
                x[i] = soft_scalar(x[i] - 2.0 * step * g[i], step * lambda);
            }
        }
        let mut resid = vec![0.0; 6];
        let obj_ref = objective(&d, &y, &x, lambda, None, &mut resid);
        assert!(
            (r.objective - obj_ref).abs() <= 1e-6 * obj_ref.abs().max(1e-12),
            "fista {} vs ista reference {}",
            r.objective,
            obj_ref
        );
    }

    #[test]
    fn certificate_holds_at_convergence() {
        let rel_tol = 1e-9;
        for seed in 0..10 {
            let (d, y, _) = random_instance(seed, 8, 12, 2);
            let lambda = 0.05;
            let r = fista_lasso(&d, &y, lambda, 100_000, rel_tol).unwrap();
            assert!(r.converged, "seed {seed} did not converge");
            let cert = lasso_subgradient_residual(&d, &y, &r.x_hat, lambda, None);
            assert!(
                cert <= 10.0 * rel_tol * lambda,
                "seed {seed}: certificate {cert} above {}",
                10.0 * rel_tol * lambda
            );
        }
    }

    #[test]
    fn objective_trace_is_non_increasing() {
        for seed in 0..5 {
            let (d, y, _) = random_instance(100 + seed, 8, 16, 3);
            let (_, trace) = fista_lasso_trace(&d, &y, 0.2, 2000, 1e-12).unwrap();
            for w in trace.windows(2) {
                assert!(
                    w[1] <= w[0] * (1.0 + 1e-12) + 1e-12,
                    "seed {seed}: objective rose {} -> {}",
                    w[0],
                    w[1]
                );
            }
        }
    }

    #[test]
    fn uniform_weights_reproduce_plain_lasso_bitwise() {
        for seed in 0..5 {
            let (d, y, _) = random_instance(200 + seed, 7, 14, 3);
            let (rp, tp) = fista_lasso_trace(&d, &y, 0.15, 500, 1e-12).unwrap();
            let w = WeightVector::uniform(14);
            let (rw, tw) = weighted_fista_lasso_trace(&d, &y, 0.15, &w, 500, 1e-12).unwrap();
            assert_eq!(rp.x_hat, rw.x_hat, "seed {seed}");
            assert_eq!(tp, tw, "seed {seed}");
            assert_eq!(rp.iterations, rw.iterations);
        }
    }

    #[test]
    fn perfect_mask_weights_confine_support() {
        // Weights built from the true mask push everything off-support to
        // zero on noise-free instances.
        for seed in 0..10 {
            let (d, y, x_true) = random_instance(300 + seed, 8, 16, 2);
            let mask: Vec<f64> = x_true.iter().map(|&v| if v != 0.0 { 1.0 } else { 0.0 }).collect();
            let wv = crate::solvers::weights_from_probability(&mask, 1e-2).unwrap();
            let res = weighted_fista_lasso(&d, &y, 1e-3, &wv, 20_000, 1e-12).unwrap();
            for i in 0..16 {
                if mask[i] == 0.0 {
                    assert!(
                        res.x_hat[i].abs() < 1e-6,
                        "seed {seed}: off-support coefficient {i} = {}",
                        res.x_hat[i]
                    );
                }
            }
        }
    }

    #[test]
    fn path_recovers_noise_free_instance() {
        let (d, y, x_true) = random_instance(11, 10, 20, 2);
        let r = basis_pursuit_path(&d, &y, None, &PathConfig::default()).unwrap();
        let err: f64 = r
            .x_hat
            .iter()
            .zip(&x_true)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let xn: f64 = x_true.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err / xn < 1e-5, "path error {err} vs ‖x‖ {xn}");
    }
}
