//! Representation-based classification over class-grouped dictionaries.
//!
//! Atoms of one class occupy consecutive columns, and the column↔pixel
//! mapping arranges every class as a contiguous rectangle in the 2-D grid
//! a CSEN operates on: block height H (which must divide the per-class
//! atom count s), block width s/H, blocks tiled left to right.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::model::{classify_head, CsenModel};
use crate::numerics::{normalize_columns, Matrix, ProxyOperator};
use crate::solvers::{crc_solution, debias_ls, fista_lasso, SolverResult};

/// Dictionary with class-contiguous atoms and a rectangular grid layout.
#[derive(Debug, Clone)]
pub struct ClassDictionary {
    d: Matrix,
    /// Class → contiguous column range.
    groups: Vec<std::ops::Range<usize>>,
    grid: (usize, usize),
    /// Column index → flattened pixel index (a bijection).
    col_to_pixel: Vec<usize>,
    pixel_to_col: Vec<usize>,
}

/// How atoms are arranged on the 2-D grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridLayout {
    /// Block height = atoms-per-class: every class is one grid column.
    Auto,
    /// Explicit grid (H, W); H must divide the per-class atom count.
    Explicit(usize, usize),
}

/// Stack per-class feature vectors into a normalized dictionary.
///
/// `samples[c]` holds the atoms of class c; every class must contribute
/// the same number of atoms with a consistent feature dimension.
pub fn build_class_dictionary(
    samples: &[Vec<Vec<f64>>],
    layout: GridLayout,
) -> Result<ClassDictionary> {
    let c = samples.len();
    if c == 0 {
        return Err(Error::invalid("no classes"));
    }
    let s = samples[0].len();
    if s == 0 {
        return Err(Error::invalid("class 0 has no atoms"));
    }
    let m = samples[0][0].len();
    for (ci, atoms) in samples.iter().enumerate() {
        if atoms.len() != s {
            return Err(Error::invalid(format!(
                "class {ci} has {} atoms, expected {s} (equal samples per class)",
                atoms.len()
            )));
        }
        if let Some(bad) = atoms.iter().position(|a| a.len() != m) {
            return Err(Error::invalid(format!(
                "class {ci} atom {bad} has dimension {}, expected {m}",
                atoms[bad].len()
            )));
        }
    }
    let n = c * s;
    let (h, w) = match layout {
        GridLayout::Auto => (s, c),
        GridLayout::Explicit(h, w) => (h, w),
    };
    if h * w != n {
        return Err(Error::invalid(format!(
            "grid {h}x{w} does not cover {c} classes x {s} atoms"
        )));
    }
    if s % h != 0 {
        return Err(Error::invalid(format!(
            "block height {h} does not divide the per-class atom count {s}"
        )));
    }
    let block_w = s / h;

    // Column stacking: column index = class*s + atom.
    let mut d = Matrix::zeros(m, n);
    for (ci, atoms) in samples.iter().enumerate() {
        for (ai, atom) in atoms.iter().enumerate() {
            let col = ci * s + ai;
            for (row, &v) in atom.iter().enumerate() {
                d.set(row, col, v);
            }
        }
    }
    let d = normalize_columns(&d)?;

    // Atom ai of class ci sits at grid row ai % h, grid column
    // ci*block_w + ai/h: the class fills an h × block_w rectangle.
    let mut col_to_pixel = vec![0usize; n];
    let mut pixel_to_col = vec![usize::MAX; n];
    let mut groups = Vec::with_capacity(c);
    for ci in 0..c {
        groups.push(ci * s..(ci + 1) * s);
        for ai in 0..s {
            let col = ci * s + ai;
            let gy = ai % h;
            let gx = ci * block_w + ai / h;
            let pixel = gy * w + gx;
            col_to_pixel[col] = pixel;
            pixel_to_col[pixel] = col;
        }
    }
    debug_assert!(pixel_to_col.iter().all(|&v| v != usize::MAX));
    Ok(ClassDictionary {
        d,
        groups,
        grid: (h, w),
        col_to_pixel,
        pixel_to_col,
    })
}

impl ClassDictionary {
    pub fn d(&self) -> &Matrix {
        &self.d
    }

    pub fn class_count(&self) -> usize {
        self.groups.len()
    }

    pub fn grid(&self) -> (usize, usize) {
        self.grid
    }

    pub fn class_columns(&self, class: usize) -> std::ops::Range<usize> {
        self.groups[class].clone()
    }

    pub fn col_to_pixel(&self) -> &[usize] {
        &self.col_to_pixel
    }

    pub fn pixel_to_col(&self) -> &[usize] {
        &self.pixel_to_col
    }

    /// Scatter a column-ordered vector onto the 2-D grid.
    pub fn vector_to_grid(&self, v: &[f64]) -> Result<Matrix> {
        if v.len() != self.col_to_pixel.len() {
            return Err(Error::invalid("vector length does not match dictionary"));
        }
        let (h, w) = self.grid;
        let mut plane = vec![0.0; h * w];
        for (col, &val) in v.iter().enumerate() {
            plane[self.col_to_pixel[col]] = val;
        }
        Matrix::new(h, w, plane)
    }

    /// Inverse of [`Self::vector_to_grid`].
    pub fn grid_to_vector(&self, plane: &Matrix) -> Result<Vec<f64>> {
        if (plane.rows(), plane.cols()) != self.grid {
            return Err(Error::invalid("plane shape does not match grid"));
        }
        Ok(self
            .pixel_to_col
            .iter()
            .enumerate()
            .fold(vec![0.0; plane.data().len()], |mut acc, (pixel, &col)| {
                acc[col] = plane.data()[pixel];
                acc
            }))
    }

    /// Pixel groups per class, for the CSEN classification head.
    pub fn pixel_groups(&self) -> Vec<Vec<usize>> {
        self.groups
            .iter()
            .map(|r| r.clone().map(|col| self.col_to_pixel[col]).collect())
            .collect()
    }

    /// Binary mask of one class's rectangle, as a grid plane.
    pub fn class_mask(&self, class: usize) -> Matrix {
        let (h, w) = self.grid;
        let mut plane = vec![0.0; h * w];
        for col in self.groups[class].clone() {
            plane[self.col_to_pixel[col]] = 1.0;
        }
        Matrix::new(h, w, plane).expect("finite mask")
    }

    /// Per-class residuals ‖y − D_c x̂_c‖₂ with class-restricted
    /// coefficients.
    fn class_residuals(&self, y: &[f64], x_hat: &[f64]) -> Vec<f64> {
        let m = self.d.rows();
        self.groups
            .iter()
            .map(|range| {
                let mut r = y.to_vec();
                for col in range.clone() {
                    let c = x_hat[col];
                    if c != 0.0 {
                        for row in 0..m {
                            r[row] -= c * self.d.get(row, col);
                        }
                    }
                }
                r.iter().map(|v| v * v).sum::<f64>().sqrt()
            })
            .collect()
    }
}

/// Lasso settings for [`src_classify`].
#[derive(Debug, Clone)]
pub struct SrcConfig {
    pub lambda: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
    /// Re-fit the class-restricted coefficients by least squares before
    /// computing residuals.
    pub debias: bool,
}

impl Default for SrcConfig {
    fn default() -> Self {
        SrcConfig {
            lambda: 1e-3,
            max_iters: 2000,
            rel_tol: 1e-10,
            debias: false,
        }
    }
}

/// Outcome of a single classification query.
#[derive(Debug, Clone)]
pub struct Classification {
    pub class: usize,
    /// Per-class residuals (SRC/CRC) — lower is better.
    pub residuals: Vec<f64>,
    /// Set when the underlying solver did not converge; the class is
    /// still the argmin of the residuals.
    pub solver_flagged: bool,
    pub wall_time: std::time::Duration,
}

/// Sparse-representation classification: Lasso code, class-restricted
/// residuals, argmin class. The query is normalized to unit l2 first.
pub fn src_classify(
    dict: &ClassDictionary,
    y: &[f64],
    cfg: &SrcConfig,
) -> Result<Classification> {
    let start = Instant::now();
    let yn = normalize_query(y)?;
    let sol = fista_lasso(dict.d(), &yn, cfg.lambda, cfg.max_iters, cfg.rel_tol)?;
    classify_by_residuals(dict, &yn, sol, cfg.debias, start)
}

/// Collaborative-representation classification: ridge code via the
/// closed-form solve, then the same residual rule.
pub fn crc_classify(dict: &ClassDictionary, y: &[f64], lambda: f64) -> Result<Classification> {
    let start = Instant::now();
    let yn = normalize_query(y)?;
    let sol = crc_solution(dict.d(), &yn, lambda)?;
    classify_by_residuals(dict, &yn, sol, false, start)
}

fn classify_by_residuals(
    dict: &ClassDictionary,
    yn: &[f64],
    sol: SolverResult,
    debias: bool,
    start: Instant,
) -> Result<Classification> {
    let mut x_hat = sol.x_hat;
    if debias {
        let support: Vec<usize> = x_hat
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() > crate::sensing::SOLVER_SUPPORT_TOL)
            .map(|(i, _)| i)
            .collect();
        if !support.is_empty() && support.len() <= dict.d().rows() {
            if let Ok(refit) = debias_ls(dict.d(), yn, &support) {
                x_hat = refit;
            }
        }
    }
    let residuals = dict.class_residuals(yn, &x_hat);
    let class = argmin(&residuals);
    Ok(Classification {
        class,
        residuals,
        solver_flagged: !sol.converged,
        wall_time: start.elapsed(),
    })
}

/// CSEN classification: proxy → probability map → grouped average
/// pooling → softmax. Returns class probabilities in class order.
pub fn csen_classify(
    model: &CsenModel,
    dict: &ClassDictionary,
    y: &[f64],
    proxy: &ProxyOperator,
) -> Result<Vec<f64>> {
    if model.grid() != dict.grid() {
        return Err(Error::invalid(format!(
            "model grid {:?} does not match dictionary grid {:?}",
            model.grid(),
            dict.grid()
        )));
    }
    let yn = normalize_query(y)?;
    let x_tilde = proxy.apply_vec(&yn)?;
    let plane = dict.vector_to_grid(&x_tilde)?;
    let p = model.forward(&plane)?;
    classify_head(&p, &dict.pixel_groups())
}

fn normalize_query(y: &[f64]) -> Result<Vec<f64>> {
    let n = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n == 0.0 {
        return Err(Error::invalid("query vector is zero"));
    }
    Ok(y.iter().map(|v| v / n).collect())
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn synthetic_classes(classes: usize, atoms: usize, dim: usize, seed: u64) -> Vec<Vec<Vec<f64>>> {
        let mut r = rng::seeded(seed);
        (0..classes)
            .map(|_| {
                let center: Vec<f64> = (0..dim).map(|_| r.random_range(-1.0..1.0)).collect();
                (0..atoms)
                    .map(|_| {
                        center
                            .iter()
                            .map(|c| c + 0.15 * r.random_range(-1.0..1.0))
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn table_layouts_are_representable() {
        // 38 classes × 32 atoms on a 16×76 grid (each class 16×2), and
        // 200 classes × 8 atoms on 8×200 (each class one column).
        let a = build_class_dictionary(
            &synthetic_classes(38, 32, 40, 1),
            GridLayout::Explicit(16, 76),
        )
        .unwrap();
        assert_eq!(a.grid(), (16, 76));
        let b = build_class_dictionary(&synthetic_classes(200, 8, 24, 2), GridLayout::Auto)
            .unwrap();
        assert_eq!(b.grid(), (8, 200));
    }

    #[test]
    fn two_by_two_layout_keeps_classes_rectangular() {
        let dict = build_class_dictionary(
            &synthetic_classes(2, 2, 6, 3),
            GridLayout::Explicit(2, 2),
        )
        .unwrap();
        // class 0 = grid column 0, class 1 = grid column 1
        assert_eq!(dict.col_to_pixel(), &[0, 2, 1, 3]);
        let groups = dict.pixel_groups();
        assert_eq!(groups[0], vec![0, 2]);
        assert_eq!(groups[1], vec![1, 3]);
    }

    #[test]
    fn column_pixel_mapping_is_a_bijection() {
        let dict = build_class_dictionary(
            &synthetic_classes(6, 8, 10, 4),
            GridLayout::Explicit(4, 12),
        )
        .unwrap();
        let v: Vec<f64> = (0..48).map(|i| i as f64).collect();
        let grid = dict.vector_to_grid(&v).unwrap();
        let back = dict.grid_to_vector(&grid).unwrap();
        assert_eq!(v, back);
    }

    #[test]
    fn mismatched_class_sizes_rejected() {
        let mut samples = synthetic_classes(3, 4, 8, 5);
        samples[1].pop();
        assert!(build_class_dictionary(&samples, GridLayout::Auto).is_err());
    }

    #[test]
    fn src_identifies_exact_atom() {
        let samples = synthetic_classes(4, 3, 12, 6);
        let dict = build_class_dictionary(&samples, GridLayout::Auto).unwrap();
        let y = dict.d().column(7); // class 2, atom 1
        let out = src_classify(&dict, &y, &SrcConfig::default()).unwrap();
        assert_eq!(out.class, 2);
        // The Lasso code carries an O(λ) shrinkage bias, so the winning
        // residual is near zero at the λ scale, not machine zero.
        assert!(out.residuals[2] < 1e-2, "residual {}", out.residuals[2]);
        assert!(out.residuals.iter().all(|&e| e >= 0.0));
        let ymax = 1.0 + 1e-12;
        assert!(out.residuals.iter().any(|&e| e <= ymax));
    }

    #[test]
    fn crc_identifies_exact_atom_and_survives_huge_lambda() {
        let samples = synthetic_classes(4, 3, 12, 7);
        let dict = build_class_dictionary(&samples, GridLayout::Auto).unwrap();
        let y = dict.d().column(4); // class 1, atom 1
        let out = crc_classify(&dict, &y, 1e-3).unwrap();
        assert_eq!(out.class, 1);
        let out = crc_classify(&dict, &y, 1e9).unwrap();
        assert!(out.residuals.iter().all(|e| e.is_finite()));
    }

    #[test]
    fn scale_invariance_of_src() {
        let samples = synthetic_classes(3, 4, 10, 8);
        let dict = build_class_dictionary(&samples, GridLayout::Auto).unwrap();
        let mut r = rng::seeded(99);
        let y: Vec<f64> = (0..10).map(|_| r.random_range(-1.0..1.0)).collect();
        let y5: Vec<f64> = y.iter().map(|v| 5.0 * v).collect();
        let a = src_classify(&dict, &y, &SrcConfig::default()).unwrap();
        let b = src_classify(&dict, &y5, &SrcConfig::default()).unwrap();
        assert_eq!(a.class, b.class);
    }
}
