//! Classification head: average pooling over class pixel groups followed
//! by softmax.

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Class probabilities from a probability map and a class→pixel-set map.
///
/// The groups must partition the flattened grid. The predicted class is
/// the argmax of the returned vector.
pub fn classify_head(p: &Matrix, groups: &[Vec<usize>]) -> Result<Vec<f64>> {
    let n = p.rows() * p.cols();
    if groups.is_empty() {
        return Err(Error::invalid("no class groups"));
    }
    let mut seen = vec![false; n];
    let mut covered = 0usize;
    for (c, g) in groups.iter().enumerate() {
        if g.is_empty() {
            return Err(Error::invalid(format!("class {c} has an empty pixel group")));
        }
        for &i in g {
            if i >= n {
                return Err(Error::invalid(format!(
                    "class {c} references pixel {i} outside the {n}-pixel grid"
                )));
            }
            if seen[i] {
                return Err(Error::invalid(format!(
                    "groups are not a partition: pixel {i} appears twice"
                )));
            }
            seen[i] = true;
            covered += 1;
        }
    }
    if covered != n {
        return Err(Error::invalid(format!(
            "groups are not a partition: {covered} of {n} pixels covered"
        )));
    }

    let means: Vec<f64> = groups
        .iter()
        .map(|g| g.iter().map(|&i| p.data()[i]).sum::<f64>() / g.len() as f64)
        .collect();
    Ok(softmax(&means))
}

fn softmax(v: &[f64]) -> Vec<f64> {
    let max = v.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exps: Vec<f64> = v.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}
