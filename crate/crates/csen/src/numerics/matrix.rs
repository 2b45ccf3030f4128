//! Row-major dense matrix and the few factorizations the crate needs.

use crate::error::{Error, Result};

/// Dense row-major matrix of 64-bit floats.
///
/// Construction validates shape and finiteness; the numeric kernels assume
/// both afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "matrix data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::invalid(format!(
                "matrix entry {i} is not finite: {}",
                data[i]
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// y = M x.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.cols, "matvec length mismatch");
        assert_eq!(y.len(), self.rows);
        for (yi, row) in y.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *yi = dot(row, x);
        }
    }

    /// y = Mᵀ x without materializing the transpose.
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows, "matvec_t length mismatch");
        let mut y = vec![0.0; self.cols];
        for (xi, row) in x.iter().zip(self.data.chunks_exact(self.cols)) {
            if *xi != 0.0 {
                for (yj, mj) in y.iter_mut().zip(row) {
                    *yj += xi * mj;
                }
            }
        }
        y
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// C = self · other.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::invalid(format!(
                "matmul shape mismatch: {}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        // ikj order: the inner loop walks contiguous rows of `other`.
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &aik) in self.row(i).iter().enumerate() {
                if aik != 0.0 {
                    let brow = other.row(k);
                    for (o, b) in orow.iter_mut().zip(brow) {
                        *o += aik * b;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Gram matrix MᵀM (cols × cols), exploiting symmetry.
    pub fn gram(&self) -> Matrix {
        let n = self.cols;
        let mut g = Matrix::zeros(n, n);
        for row in self.data.chunks_exact(n) {
            for j in 0..n {
                let rj = row[j];
                if rj != 0.0 {
                    let grow = &mut g.data[j * n..(j + 1) * n];
                    for (gk, rk) in grow[j..].iter_mut().zip(&row[j..]) {
                        *gk += rj * rk;
                    }
                }
            }
        }
        for j in 0..n {
            for k in 0..j {
                g.data[j * n + k] = g.data[k * n + j];
            }
        }
        g
    }

    pub fn column_norms(&self) -> Vec<f64> {
        let mut sq = vec![0.0; self.cols];
        for row in self.data.chunks_exact(self.cols) {
            for (s, x) in sq.iter_mut().zip(row) {
                *s += x * x;
            }
        }
        sq.iter_mut().for_each(|s| *s = s.sqrt());
        sq
    }

    pub(crate) fn scale_columns_inv(&mut self, norms: &[f64]) {
        for row in self.data.chunks_exact_mut(self.cols) {
            for (x, n) in row.iter_mut().zip(norms) {
                *x /= n;
            }
        }
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |a, x| a.max(x.abs()))
    }

    /// Keep only the listed columns, in the given order.
    pub fn select_columns(&self, idx: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(self.rows, idx.len());
        for i in 0..self.rows {
            let src = self.row(i);
            let dst = &mut out.data[i * idx.len()..(i + 1) * idx.len()];
            for (d, &j) in dst.iter_mut().zip(idx) {
                *d = src[j];
            }
        }
        out
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // Four accumulators so the reduction pipelines; order is fixed, so the
    // result is deterministic.
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    let mut s3 = 0.0;
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let k = i * 4;
        s0 += a[k] * b[k];
        s1 += a[k + 1] * b[k + 1];
        s2 += a[k + 2] * b[k + 2];
        s3 += a[k + 3] * b[k + 3];
    }
    let mut s = (s0 + s1) + (s2 + s3);
    for k in chunks * 4..a.len() {
        s += a[k] * b[k];
    }
    s
}

/// Solve A X = B for symmetric positive definite A via Cholesky.
///
/// Fails with `NumericFailure` when a pivot is not strictly positive.
pub fn cholesky_solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let l = cholesky_factor(a)?;
    Ok(cholesky_back_substitute(&l, b))
}

fn cholesky_factor(a: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::invalid("cholesky needs a square matrix"));
    }
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.get(i, j);
            let (li, lj) = (l.row(i), l.row(j));
            s -= dot(&li[..j], &lj[..j]);
            if i == j {
                if s <= 0.0 {
                    return Err(Error::NumericFailure(format!(
                        "cholesky pivot {i} is not positive: {s}"
                    )));
                }
                l.set(i, j, s.sqrt());
            } else {
                l.set(i, j, s / l.get(j, j));
            }
        }
    }
    Ok(l)
}

fn cholesky_back_substitute(l: &Matrix, b: &Matrix) -> Matrix {
    let n = l.rows();
    let m = b.cols();
    // Forward solve L Y = B, then backward solve Lᵀ X = Y, column blocks at
    // once (rows of the rhs stay contiguous).
    let mut x = b.clone();
    for i in 0..n {
        let (done, rest) = x.data.split_at_mut(i * m);
        let xi = &mut rest[..m];
        for j in 0..i {
            let lij = l.get(i, j);
            if lij != 0.0 {
                let xj = &done[j * m..(j + 1) * m];
                for (a, b) in xi.iter_mut().zip(xj) {
                    *a -= lij * b;
                }
            }
        }
        let d = l.get(i, i);
        xi.iter_mut().for_each(|v| *v /= d);
    }
    for i in (0..n).rev() {
        let (head, tail) = x.data.split_at_mut((i + 1) * m);
        let xi = &mut head[i * m..];
        for j in i + 1..n {
            let lji = l.get(j, i);
            if lji != 0.0 {
                let xj = &tail[(j - i - 1) * m..(j - i) * m];
                for (a, b) in xi.iter_mut().zip(xj) {
                    *a -= lji * b;
                }
            }
        }
        let d = l.get(i, i);
        xi.iter_mut().for_each(|v| *v /= d);
    }
    x
}

/// Solve A X = B by LU with partial pivoting. The fallback path when a
/// nominally SPD system fails Cholesky through round-off.
pub fn lu_solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    if a.cols() != n || b.rows() != n {
        return Err(Error::invalid("lu_solve shape mismatch"));
    }
    let m = b.cols();
    let mut lu = a.clone();
    let mut x = b.clone();
    for col in 0..n {
        let mut piv = col;
        let mut max = lu.get(col, col).abs();
        for r in col + 1..n {
            let v = lu.get(r, col).abs();
            if v > max {
                max = v;
                piv = r;
            }
        }
        if max == 0.0 {
            return Err(Error::NumericFailure(format!(
                "singular matrix in lu_solve at column {col}"
            )));
        }
        if piv != col {
            swap_rows(&mut lu.data, n, col, piv);
            swap_rows(&mut x.data, m, col, piv);
        }
        let pivot = lu.get(col, col);
        for r in col + 1..n {
            let f = lu.get(r, col) / pivot;
            if f != 0.0 {
                lu.set(r, col, 0.0);
                for c in col + 1..n {
                    let v = lu.get(col, c);
                    *lu.data.get_mut(r * n + c).unwrap() -= f * v;
                }
                for c in 0..m {
                    let v = x.get(col, c);
                    *x.data.get_mut(r * m + c).unwrap() -= f * v;
                }
            }
        }
    }
    for i in (0..n).rev() {
        for c in 0..m {
            let mut s = x.get(i, c);
            for j in i + 1..n {
                s -= lu.get(i, j) * x.get(j, c);
            }
            x.set(i, c, s / lu.get(i, i));
        }
    }
    Ok(x)
}

fn swap_rows(data: &mut [f64], width: usize, a: usize, b: usize) {
    for c in 0..width {
        data.swap(a * width + c, b * width + c);
    }
}
