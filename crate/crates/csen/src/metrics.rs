//! Support-estimation and recovery quality measures.

use crate::error::{Error, Result};

/// Precision/recall family for an estimated support set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Normalized symmetric support difference |PΔT|/n (mask Hamming
    /// distance over n).
    pub ce: f64,
}

/// Compare an estimated support against the truth over an ambient
/// dimension `n`. Inputs are sorted, duplicate-free index sets below `n`.
pub fn support_metrics(predicted: &[usize], truth: &[usize], n: usize) -> SupportMetrics {
    debug_assert!(predicted.windows(2).all(|w| w[0] < w[1]));
    debug_assert!(truth.windows(2).all(|w| w[0] < w[1]));
    assert!(
        predicted.iter().chain(truth).all(|&i| i < n),
        "support index out of range"
    );
    let inter = sorted_intersection_count(predicted, truth);
    let p = predicted.len();
    let t = truth.len();
    let precision = if p > 0 { inter as f64 / p as f64 } else { 0.0 };
    let recall = if t > 0 { inter as f64 / t as f64 } else { 0.0 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    let sym_diff = (p - inter) + (t - inter);
    let ce = if n > 0 { sym_diff as f64 / n as f64 } else { 0.0 };
    SupportMetrics {
        precision,
        recall,
        f1,
        ce,
    }
}

fn sorted_intersection_count(a: &[usize], b: &[usize]) -> usize {
    let mut i = 0;
    let mut j = 0;
    let mut count = 0;
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

/// Recovery success rule: relative l2 error ‖x−x̂‖/‖x‖ ≤ tol.
///
/// The boundary is inclusive; an error of exactly `tol` counts as success.
pub fn recovery_success(x_hat: &[f64], x: &[f64], tol: f64) -> Result<bool> {
    Ok(relative_l2_error(x_hat, x)? <= tol)
}

/// ‖x−x̂‖₂/‖x‖₂; errors on x = 0.
pub fn relative_l2_error(x_hat: &[f64], x: &[f64]) -> Result<f64> {
    if x_hat.len() != x.len() {
        return Err(Error::invalid("length mismatch"));
    }
    let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if xn == 0.0 {
        return Err(Error::invalid("reference signal is zero"));
    }
    let en = x
        .iter()
        .zip(x_hat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(en / xn)
}

/// Floor applied to the NMSE when the reconstruction is exact.
pub const NMSE_FLOOR_DB: f64 = -300.0;

/// Normalized mean-square error 10·log₁₀(‖x−x̂‖²/‖x‖²), floored at
/// −300 dB. Errors on x = 0.
pub fn nmse_db(x_hat: &[f64], x: &[f64]) -> Result<f64> {
    let rel = relative_l2_error(x_hat, x)?;
    if rel == 0.0 {
        return Ok(NMSE_FLOOR_DB);
    }
    Ok((20.0 * rel.log10()).max(NMSE_FLOOR_DB))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction() {
        let m = support_metrics(&[1, 4, 7], &[1, 4, 7], 10);
        assert_eq!(
            m,
            SupportMetrics {
                precision: 1.0,
                recall: 1.0,
                f1: 1.0,
                ce: 0.0
            }
        );
    }

    #[test]
    fn empty_prediction() {
        let m = support_metrics(&[], &[2, 3, 4], 10);
        assert_eq!(m.precision, 0.0);
        assert_eq!(m.recall, 0.0);
        assert_eq!(m.f1, 0.0);
        assert!((m.ce - 0.3).abs() < 1e-15);
    }

    #[test]
    fn half_overlap_counts() {
        let m = support_metrics(&[1, 2], &[2, 3], 10);
        assert!((m.precision - 0.5).abs() < 1e-15);
        assert!((m.recall - 0.5).abs() < 1e-15);
        assert!((m.f1 - 0.5).abs() < 1e-15);
        assert!((m.ce - 0.2).abs() < 1e-15);
    }

    #[test]
    fn ce_is_symmetric_and_precision_recall_swap() {
        let p = [0, 1, 5];
        let t = [1, 5, 8, 9];
        let a = support_metrics(&p, &t, 12);
        let b = support_metrics(&t, &p, 12);
        assert_eq!(a.ce, b.ce);
        assert_eq!(a.precision, b.recall);
        assert_eq!(a.recall, b.precision);
    }

    #[test]
    fn success_boundary_is_inclusive() {
        // 5 - 4.5 = 0.5 exactly in binary; 0.5/5 rounds to the f64 nearest
        // 0.1, the same value as the tol literal.
        let x = [5.0];
        let x_hat = [4.5];
        let rel = relative_l2_error(&x_hat, &x).unwrap();
        assert_eq!(rel, 0.1);
        assert!(recovery_success(&x_hat, &x, 0.1).unwrap());
        assert!(!recovery_success(&x_hat, &x, 0.0999).unwrap());
    }

    #[test]
    fn success_trivial_cases() {
        let x = [1.0, 2.0];
        assert!(recovery_success(&x, &x, 1e-12).unwrap());
        assert!(!recovery_success(&[0.0, 0.0], &x, 0.5).unwrap());
        let scaled: Vec<f64> = x.iter().map(|v| 1.05 * v).collect();
        assert!(recovery_success(&scaled, &x, 0.1).unwrap());
    }

    #[test]
    fn success_rejects_zero_reference() {
        assert!(recovery_success(&[1.0], &[0.0], 0.1).is_err());
    }

    #[test]
    fn nmse_values() {
        let x = [1.0, -2.0, 3.0];
        assert_eq!(nmse_db(&x, &x).unwrap(), NMSE_FLOOR_DB);
        assert!((nmse_db(&[0.0, 0.0, 0.0], &x).unwrap() - 0.0).abs() < 1e-12);
        let off: Vec<f64> = x.iter().map(|v| 1.05 * v).collect();
        // 20·log10(0.05) ≈ −26.0206
        assert!((nmse_db(&off, &x).unwrap() + 26.020_599_913_279_623).abs() < 1e-9);
    }
}
