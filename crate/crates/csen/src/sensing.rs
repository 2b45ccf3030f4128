//! Sparse signal model, support bookkeeping and compressive measurement.

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::rng;
use rand_distr::{Distribution, Normal};

/// Default magnitude tolerance for supports computed from solver outputs,
/// which carry round-off. Exact data (e.g. pixel intensities) uses 0.
pub const SOLVER_SUPPORT_TOL: f64 = 1e-8;

/// A sparse vector together with its support set and binary mask.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseInstance {
    x: Vec<f64>,
    support: Vec<usize>,
    mask: Vec<f64>,
    k: usize,
    rho: f64,
}

impl SparseInstance {
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Sorted indices of entries with |xᵢ| above the construction tolerance.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// Indicator vector of the support, as 0.0/1.0 values.
    pub fn mask(&self) -> &[f64] {
        &self.mask
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Sparsity ratio k/n.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }
}

/// Classify entries of `x` into support / background by |xᵢ| > tol.
pub fn mask_from_signal(x: &[f64], magnitude_tol: f64) -> Result<SparseInstance> {
    if !(magnitude_tol >= 0.0) {
        return Err(Error::invalid(format!(
            "magnitude_tol must be non-negative, got {magnitude_tol}"
        )));
    }
    let mut support = Vec::new();
    let mut mask = vec![0.0; x.len()];
    for (i, &v) in x.iter().enumerate() {
        if v.abs() > magnitude_tol {
            support.push(i);
            mask[i] = 1.0;
        }
    }
    let k = support.len();
    let rho = if x.is_empty() { 0.0 } else { k as f64 / x.len() as f64 };
    Ok(SparseInstance {
        x: x.to_vec(),
        support,
        mask,
        k,
        rho,
    })
}

/// The measurement operator y = A·Φ·x = D·x.
#[derive(Debug, Clone)]
pub struct SensingModel {
    phi: Matrix,
    a: Matrix,
    d: Matrix,
    mr: f64,
}

impl SensingModel {
    /// Compose a model from a sparsifying basis Φ (d×n) and measurement
    /// matrix A (m×d); D = A·Φ is computed here so the product invariant
    /// holds by construction.
    pub fn new(phi: Matrix, a: Matrix) -> Result<Self> {
        if a.cols() != phi.rows() {
            return Err(Error::invalid(format!(
                "A is {}x{} but Phi is {}x{}",
                a.rows(),
                a.cols(),
                phi.rows(),
                phi.cols()
            )));
        }
        let d = a.matmul(&phi)?;
        let mr = a.rows() as f64 / phi.cols() as f64;
        if !(mr > 0.0 && mr <= 1.0) {
            return Err(Error::invalid(format!(
                "measurement rate m/n = {mr} outside (0, 1]"
            )));
        }
        Ok(SensingModel { phi, a, d, mr })
    }

    /// Canonical-basis model (Φ = I, D = A), the setting for image-domain
    /// sparsity.
    pub fn canonical(a: Matrix) -> Result<Self> {
        let n = a.cols();
        Self::new(Matrix::identity(n), a)
    }

    pub fn phi(&self) -> &Matrix {
        &self.phi
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn d(&self) -> &Matrix {
        &self.d
    }

    pub fn m(&self) -> usize {
        self.d.rows()
    }

    pub fn n(&self) -> usize {
        self.d.cols()
    }

    pub fn mr(&self) -> f64 {
        self.mr
    }

    /// Stable fingerprint used to tag measurement batches with their model.
    pub fn id(&self) -> u64 {
        let mut h = rng::splitmix64(self.d.rows() as u64 ^ (self.d.cols() as u64) << 32);
        for &v in self.d.data().iter().step_by(97) {
            h = rng::splitmix64(h ^ v.to_bits());
        }
        h
    }
}

/// Measurements of one or more signals under a single model.
#[derive(Debug, Clone)]
pub struct MeasurementBatch {
    ys: Vec<Vec<f64>>,
    snr_db: Option<f64>,
    noise_seed: Option<u64>,
    model_id: u64,
}

impl MeasurementBatch {
    pub fn ys(&self) -> &[Vec<f64>] {
        &self.ys
    }

    pub fn y(&self, i: usize) -> &[f64] {
        &self.ys[i]
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    /// Present iff noise was injected.
    pub fn snr_db(&self) -> Option<f64> {
        self.snr_db
    }

    pub fn noise_seed(&self) -> Option<u64> {
        self.noise_seed
    }

    pub fn model_id(&self) -> u64 {
        self.model_id
    }
}

/// Measure a single signal: y = D·x, plus white Gaussian noise when
/// `snr_db` is set.
///
/// The noise power is chosen against the measured signal‖D·x‖², so the
/// requested SNR holds in expectation per measurement vector.
pub fn sense(
    model: &SensingModel,
    x: &[f64],
    snr_db: Option<f64>,
    seed: u64,
) -> Result<MeasurementBatch> {
    sense_many(model, std::slice::from_ref(&x), snr_db, seed)
}

/// Measure a batch of signals with per-signal noise realizations derived
/// from `seed`.
pub fn sense_many<S: AsRef<[f64]>>(
    model: &SensingModel,
    xs: &[S],
    snr_db: Option<f64>,
    seed: u64,
) -> Result<MeasurementBatch> {
    let mut ys = Vec::with_capacity(xs.len());
    for (i, x) in xs.iter().enumerate() {
        let x = x.as_ref();
        if x.len() != model.n() {
            return Err(Error::invalid(format!(
                "signal {i} has length {}, model expects n = {}",
                x.len(),
                model.n()
            )));
        }
        let mut y = model.d().matvec(x);
        if let Some(snr) = snr_db {
            let power: f64 = y.iter().map(|v| v * v).sum();
            if power == 0.0 {
                return Err(Error::UndefinedSnr);
            }
            let sigma = (power / (y.len() as f64 * 10f64.powf(snr / 10.0))).sqrt();
            let mut noise_rng = rng::seeded(rng::mix(seed, &[i as u64]));
            let normal = Normal::new(0.0, sigma).expect("finite sigma");
            for v in y.iter_mut() {
                *v += normal.sample(&mut noise_rng);
            }
        }
        ys.push(y);
    }
    Ok(MeasurementBatch {
        ys,
        snr_db,
        noise_seed: snr_db.map(|_| seed),
        model_id: model.id(),
    })
}

/// Histogram of sparsity ratios with uniform bins on [0, max ρ].
#[derive(Debug, Clone, PartialEq)]
pub struct RhoHistogram {
    /// bins+1 edges; the last bin is closed on the right.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

pub fn sparsity_stats(instances: &[SparseInstance], bins: usize) -> Result<RhoHistogram> {
    if instances.is_empty() {
        return Err(Error::invalid("sparsity_stats of an empty list"));
    }
    if bins == 0 {
        return Err(Error::invalid("sparsity_stats needs at least one bin"));
    }
    let max_rho = instances.iter().map(|s| s.rho()).fold(0.0f64, f64::max);
    let width = if max_rho > 0.0 { max_rho / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for s in instances {
        let mut idx = (s.rho() / width) as usize;
        if idx >= bins {
            idx = bins - 1;
        }
        counts[idx] += 1;
    }
    let edges = (0..=bins).map(|i| i as f64 * width).collect();
    Ok(RhoHistogram { edges, counts })
}
