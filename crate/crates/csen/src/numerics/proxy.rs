//! Linear proxy decoders: the coarse estimate x̃ = B·y the networks consume.

use crate::error::{Error, Result};
use crate::numerics::{cholesky_solve, lu_solve, Matrix};

/// Which denoiser matrix backs the proxy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProxyKind {
    /// B = Dᵀ (maximum correlation).
    MaxCorrelation,
    /// B = (DᵀD + λI)⁻¹Dᵀ (regularized pseudo-inverse).
    Lmmse { lambda: f64 },
}

/// A precomputed denoiser matrix plus the 2-D shape proxies are viewed in.
#[derive(Debug, Clone)]
pub struct ProxyOperator {
    kind: ProxyKind,
    /// n×m so that x̃ = B·y.
    b: Matrix,
    grid: (usize, usize),
}

const LMMSE_RESIDUAL_TOL: f64 = 1e-8;

/// Build the denoiser matrix for `d` (m×n).
///
/// For the LMMSE kind the n×n system (DᵀD+λI)B = Dᵀ is solved rather than
/// inverted, Cholesky first and pivoted LU if round-off defeats it, and the
/// max-norm residual is verified against 1e-8.
pub fn build_proxy_operator(
    d: &Matrix,
    kind: ProxyKind,
    grid: (usize, usize),
) -> Result<ProxyOperator> {
    let n = d.cols();
    if grid.0 * grid.1 != n {
        return Err(Error::invalid(format!(
            "grid {}x{} does not cover n = {n}",
            grid.0, grid.1
        )));
    }
    let b = match kind {
        ProxyKind::MaxCorrelation => d.transpose(),
        ProxyKind::Lmmse { lambda } => {
            if !(lambda > 0.0) {
                return Err(Error::invalid(format!(
                    "lmmse regularizer must be positive, got {lambda}"
                )));
            }
            let mut a = d.gram();
            for i in 0..n {
                let v = a.get(i, i);
                a.set(i, i, v + lambda);
            }
            let rhs = d.transpose();
            let b = match cholesky_solve(&a, &rhs) {
                Ok(b) => b,
                Err(_) => lu_solve(&a, &rhs)?,
            };
            let residual = residual_max(&a, &b, &rhs)?;
            if residual > LMMSE_RESIDUAL_TOL {
                return Err(Error::NumericFailure(format!(
                    "lmmse solve residual {residual:.3e} above {LMMSE_RESIDUAL_TOL:.0e}"
                )));
            }
            b
        }
    };
    Ok(ProxyOperator { kind, b, grid })
}

fn residual_max(a: &Matrix, b: &Matrix, rhs: &Matrix) -> Result<f64> {
    let ab = a.matmul(b)?;
    let mut worst = 0.0f64;
    for (x, y) in ab.data().iter().zip(rhs.data()) {
        worst = worst.max((x - y).abs());
    }
    Ok(worst)
}

impl ProxyOperator {
    pub fn kind(&self) -> ProxyKind {
        self.kind
    }

    pub fn grid(&self) -> (usize, usize) {
        self.grid
    }

    pub fn denoiser(&self) -> &Matrix {
        &self.b
    }

    /// x̃ = B·y as a flat vector in column order of D.
    pub fn apply_vec(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.b.cols() {
            return Err(Error::invalid(format!(
                "measurement length {} does not match m = {}",
                y.len(),
                self.b.cols()
            )));
        }
        Ok(self.b.matvec(y))
    }

    /// x̃ = B·y reshaped row-major onto the proxy grid.
    pub fn apply(&self, y: &[f64]) -> Result<Matrix> {
        let flat = self.apply_vec(y)?;
        let (h, w) = self.grid;
        Matrix::new(h, w, flat)
    }
}
