//! Classical sparse recovery: OMP, FISTA-Lasso (plain and weighted),
//! regularized least squares, restricted least squares, and the exhaustive
//! support search used as a test oracle.

mod exact;
mod fista;
mod omp;

pub use exact::{crc_solution, debias_ls, exhaustive_support_oracle};
pub use fista::{
    basis_pursuit_path, fista_lasso, fista_lasso_trace, lasso_subgradient_residual,
    weighted_fista_lasso, weighted_fista_lasso_trace, PathConfig,
};
pub use omp::omp;

use crate::error::{Error, Result};
use std::time::Duration;

/// Output of any solver in this module.
#[derive(Debug, Clone)]
pub struct SolverResult {
    pub x_hat: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Final value of the solver's own objective.
    pub objective: f64,
    pub wall_time: Duration,
}

impl SolverResult {
    /// Indices of the `k` largest-magnitude coefficients, sorted.
    pub fn top_k_support(&self, k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.x_hat.len()).collect();
        idx.sort_by(|&a, &b| {
            self.x_hat[b]
                .abs()
                .partial_cmp(&self.x_hat[a].abs())
                .unwrap()
                .then(a.cmp(&b))
        });
        let mut top: Vec<usize> = idx.into_iter().take(k).collect();
        top.sort_unstable();
        top
    }
}

/// How a weight vector was produced.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightSource {
    Uniform,
    /// wᵢ = 1/(pᵢ+ε); `clamped` counts inputs pushed back into [0,1].
    FromProbabilityMap { epsilon: f64, clamped: usize },
}

/// Per-coordinate l1 weights for the weighted Lasso.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    w: Vec<f64>,
    source: WeightSource,
}

impl WeightVector {
    pub fn uniform(n: usize) -> Self {
        WeightVector {
            w: vec![1.0; n],
            source: WeightSource::Uniform,
        }
    }

    /// Arbitrary positive weights.
    pub fn explicit(w: Vec<f64>) -> Result<Self> {
        if let Some(i) = w.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid(format!(
                "weight {i} must be positive and finite, got {}",
                w[i]
            )));
        }
        Ok(WeightVector {
            w,
            source: WeightSource::Uniform,
        })
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn source(&self) -> &WeightSource {
        &self.source
    }
}

/// Turn a support-probability map into Lasso weights wᵢ = 1/(pᵢ+ε).
///
/// Inputs outside [0,1] are clamped and the count recorded in the source
/// tag. With p in [0,1] the weights live in [1/(1+ε), 1/ε], so ε caps the
/// dynamic range.
pub fn weights_from_probability(p: &[f64], epsilon: f64) -> Result<WeightVector> {
    if !(epsilon > 0.0) {
        return Err(Error::invalid(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let mut clamped = 0usize;
    let w = p
        .iter()
        .map(|&pi| {
            let c = pi.clamp(0.0, 1.0);
            if c != pi {
                clamped += 1;
            }
            1.0 / (c + epsilon)
        })
        .collect();
    Ok(WeightVector {
        w,
        source: WeightSource::FromProbabilityMap { epsilon, clamped },
    })
}

/// Default ε for CSEN-derived weights; caps the weight range at 100×.
pub const DEFAULT_WEIGHT_EPSILON: f64 = 1e-2;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_probability_halves_weight() {
        let wv = weights_from_probability(&[1.0, 1.0], 1.0).unwrap();
        assert_eq!(wv.w(), &[0.5, 0.5]);
    }

    #[test]
    fn zero_probability_hits_cap() {
        let wv = weights_from_probability(&[0.0], 1e-2).unwrap();
        assert!((wv.w()[0] - 100.0).abs() < 1e-12);
    }

    #[test]
    fn weights_decrease_in_probability() {
        let wv = weights_from_probability(&[0.2, 0.7, 0.69], 1e-2).unwrap();
        assert!(wv.w()[0] > wv.w()[1]);
        assert!(wv.w()[2] > wv.w()[1]);
    }

    #[test]
    fn out_of_range_inputs_are_clamped_and_counted() {
        let wv = weights_from_probability(&[-0.5, 0.5, 1.5], 1e-2).unwrap();
        match wv.source() {
            WeightSource::FromProbabilityMap { clamped, .. } => assert_eq!(*clamped, 2),
            _ => panic!("wrong source"),
        }
        let lo = 1.0 / (1.0 + 1e-2);
        let hi = 1.0 / 1e-2;
        for &w in wv.w() {
            assert!(w >= lo - 1e-12 && w <= hi + 1e-12);
        }
    }

    #[test]
    fn nonpositive_epsilon_rejected() {
        assert!(weights_from_probability(&[0.5], 0.0).is_err());
        assert!(weights_from_probability(&[0.5], -1.0).is_err());
    }
}
