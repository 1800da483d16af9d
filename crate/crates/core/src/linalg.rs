//! Dense complex matrices, LU with partial pivoting, and infinity norms.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use thiserror::Error;

/// Relative pivot threshold against the largest magnitude of the original column.
pub const PIVOT_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is singular to working precision (column {column})")]
    Singular { column: usize },
    #[error("dimension mismatch: {0}")]
    Shape(String),
}

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> CMatrix {
        CMatrix {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> CMatrix {
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_diagonal(diag: &[Complex64]) -> CMatrix {
        let mut m = CMatrix::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_row_major(
        rows: usize,
        cols: usize,
        data: Vec<Complex64>,
    ) -> Result<CMatrix, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::Shape(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(CMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<CMatrix, LinalgError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(LinalgError::Shape("ragged rows".into()));
        }
        let data = rows.iter().flatten().copied().collect();
        CMatrix::from_row_major(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn scale(&self, factor: Complex64) -> CMatrix {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * factor).collect(),
        }
    }

    pub fn add(&self, other: &CMatrix) -> Result<CMatrix, LinalgError> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &CMatrix) -> Result<CMatrix, LinalgError> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(
        &self,
        other: &CMatrix,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<CMatrix, LinalgError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(LinalgError::Shape(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn matmul(&self, other: &CMatrix) -> Result<CMatrix, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[Complex64]) -> Result<Vec<Complex64>, LinalgError> {
        if self.cols != x.len() {
            return Err(LinalgError::Shape(format!(
                "cannot multiply {}x{} by vector of length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect())
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        inf_norm_matrix(self)
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn inf_norm_matrix(a: &CMatrix) -> f64 {
    (0..a.rows)
        .map(|i| a.row(i).iter().map(|x| x.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest entry magnitude; zero for an empty vector.
pub fn inf_norm_vector(u: &[Complex64]) -> f64 {
    u.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// `‖a - b‖_∞` for equal-length vectors.
pub fn inf_norm_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// In-place LU factors `P A = L U` of a square matrix.
#[derive(Debug, Clone)]
pub struct LuFactors {
    lu: CMatrix,
    perm: Vec<usize>,
}

impl LuFactors {
    pub fn new(a: &CMatrix) -> Result<LuFactors, LinalgError> {
        if a.rows != a.cols {
            return Err(LinalgError::Shape(format!(
                "LU needs a square matrix, got {}x{}",
                a.rows, a.cols
            )));
        }
        let n = a.rows;
        let col_max: Vec<f64> = (0..n)
            .map(|j| (0..n).map(|i| a[(i, j)].norm()).fold(0.0, f64::max))
            .collect();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pivot_abs) =
                (k..n)
                    .map(|i| (i, lu[(i, k)].norm()))
                    .fold(
                        (k, -1.0),
                        |best, cur| if cur.1 > best.1 { cur } else { best },
                    );
            if pivot_abs == 0.0 || pivot_abs < PIVOT_TOLERANCE * col_max[k] {
                return Err(LinalgError::Singular { column: k });
            }
            if p != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                if factor == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in k + 1..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= factor * u;
                }
            }
        }
        Ok(LuFactors { lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.lu.rows
    }

    pub fn solve_vec(&self, b: &[Complex64]) -> Result<Vec<Complex64>, LinalgError> {
        let n = self.dim();
        if b.len() != n {
            return Err(LinalgError::Shape(format!(
                "right-hand side has length {}, expected {n}",
                b.len()
            )));
        }
        let mut x: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc / self.lu[(i, i)];
        }
        Ok(x)
    }

    pub fn solve(&self, b: &CMatrix) -> Result<CMatrix, LinalgError> {
        if b.rows != self.dim() {
            return Err(LinalgError::Shape(format!(
                "right-hand side has {} rows, expected {}",
                b.rows,
                self.dim()
            )));
        }
        let mut out = CMatrix::zeros(b.rows, b.cols);
        for j in 0..b.cols {
            let x = self.solve_vec(&b.column(j))?;
            for (i, xi) in x.into_iter().enumerate() {
                out[(i, j)] = xi;
            }
        }
        Ok(out)
    }
}

/// Solves `A X = B` by LU with partial pivoting.
pub fn lu_solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix, LinalgError> {
    LuFactors::new(a)?.solve(b)
}

pub fn inverse(a: &CMatrix) -> Result<CMatrix, LinalgError> {
    lu_solve(a, &CMatrix::identity(a.rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
        let data = (0..rows * cols)
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        CMatrix::from_row_major(rows, cols, data).unwrap()
    }

    fn well_conditioned(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
        let mut a = random_matrix(rng, n, n);
        for i in 0..n {
            a[(i, i)] += c(n as f64, 0.5);
        }
        a
    }

    #[test]
    fn identity_solve_returns_rhs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = random_matrix(&mut rng, 3, 2);
        assert_eq!(lu_solve(&CMatrix::identity(3), &b).unwrap(), b);
    }

    #[test]
    fn diagonal_inverse() {
        let a = CMatrix::from_diagonal(&[c(2.0, 0.0), c(4.0, 0.0)]);
        let x = inverse(&a).unwrap();
        assert_eq!(x, CMatrix::from_diagonal(&[c(0.5, 0.0), c(0.25, 0.0)]));
    }

    #[test]
    fn construct_then_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = well_conditioned(&mut rng, 8);
        let x0 = random_matrix(&mut rng, 8, 3);
        let b = a.matmul(&x0).unwrap();
        let x = lu_solve(&a, &b).unwrap();
        assert!(inf_norm_matrix(&x.sub(&x0).unwrap()) < 1e-9);
        let residual = a.matmul(&x).unwrap().sub(&b).unwrap();
        let max_abs = residual
            .as_slice()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        assert!(max_abs <= 1e-9 * (1.0 + b.inf_norm()));
    }

    #[test]
    fn pivoting_handles_zero_leading_entry() {
        let a = CMatrix::from_rows(&[
            vec![c(0.0, 0.0), c(1.0, 0.0)],
            vec![c(1.0, 0.0), c(0.0, 0.0)],
        ])
        .unwrap();
        let x = inverse(&a).unwrap();
        assert_eq!(x, a);
    }

    #[test]
    fn singular_detected() {
        let a = CMatrix::from_rows(&[
            vec![c(1.0, 1.0), c(2.0, 2.0)],
            vec![c(2.0, 2.0), c(4.0, 4.0)],
        ])
        .unwrap();
        assert!(matches!(inverse(&a), Err(LinalgError::Singular { .. })));
        assert!(matches!(
            inverse(&CMatrix::zeros(2, 2)),
            Err(LinalgError::Singular { column: 0 })
        ));
    }

    #[test]
    fn norms() {
        let a = CMatrix::from_rows(&[
            vec![c(1.0, 0.0), c(-2.0, 0.0)],
            vec![c(3.0, 0.0), c(4.0, 0.0)],
        ])
        .unwrap();
        assert_eq!(inf_norm_matrix(&a), 7.0);
        assert_eq!(inf_norm_matrix(&CMatrix::zeros(3, 3)), 0.0);
        assert_eq!(
            inf_norm_matrix(&CMatrix::from_diagonal(&[c(3.0, 4.0)])),
            5.0
        );
        assert_eq!(
            inf_norm_vector(&[c(1.0, 0.0), c(-2.0, 0.0), c(1.0, 1.0)]),
            2.0
        );
        assert_eq!(inf_norm_vector(&[]), 0.0);
        assert_eq!(inf_norm_vector(&[c(3.0, 4.0), c(1.0, 0.0)]), 5.0);
    }

    #[test]
    fn shape_errors() {
        assert!(matches!(
            lu_solve(&CMatrix::zeros(2, 3), &CMatrix::zeros(2, 1)),
            Err(LinalgError::Shape(_))
        ));
        assert!(matches!(
            lu_solve(&CMatrix::identity(2), &CMatrix::zeros(3, 1)),
            Err(LinalgError::Shape(_))
        ));
    }

    #[test]
    fn inverse_residual_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in 1..12 {
            let a = well_conditioned(&mut rng, n);
            let m = inverse(&a).unwrap();
            let err = a.matmul(&m).unwrap().sub(&CMatrix::identity(n)).unwrap();
            assert!(err.inf_norm() <= 1e-8, "n={n}");
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        proptest! {
            #[test]
            fn submultiplicative(seed in any::<u64>(), n in 1usize..7, m in 1usize..7) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let a = random_matrix(&mut rng, n, m);
                let x: Vec<Complex64> = (0..m).map(|_| c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))).collect();
                let ax = a.matvec(&x).unwrap();
                prop_assert!(inf_norm_vector(&ax) <= a.inf_norm() * inf_norm_vector(&x) * (1.0 + 1e-12));
            }
        }
    }
}
