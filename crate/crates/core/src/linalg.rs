//! Minimal dense real linear algebra for the filters.
//!
//! Everything here is sized for the problems at hand (state dimensions up to
//! five), so storage is a plain row-major `Vec<f64>` with value semantics and
//! no blocking or sparsity. Matrix "inverses" are never materialised: every
//! `S⁻¹` in the filter equations is realised as a Cholesky solve.

use std::fmt;
use std::ops::{Index, IndexMut};

/// Relative tolerance used by [`Matrix::cholesky`] when checking that its
/// input is symmetric. Covariance updates accumulate round-off, so exact
/// symmetry cannot be expected.
pub const SYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum LinAlgError {
    /// Operand shapes do not conform. Carries the operation and both shapes.
    DimensionMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    /// Input to a factorisation was not square.
    NotSquare { rows: usize, cols: usize },
    /// Matrix deviates from symmetry by more than [`SYMMETRY_TOL`] (relative
    /// to its largest entry).
    NotSymmetric { max_rel_dev: f64 },
    /// A Cholesky pivot was not positive; `pivot` is the offending diagonal
    /// index. For covariance matrices this signals degeneracy.
    NotPositiveDefinite { pivot: usize },
}

impl fmt::Display for LinAlgError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinAlgError::DimensionMismatch { op, lhs, rhs } => write!(
                f,
                "{op}: dimension mismatch between {}x{} and {}x{}",
                lhs.0, lhs.1, rhs.0, rhs.1
            ),
            LinAlgError::NotSquare { rows, cols } => {
                write!(f, "matrix is {rows}x{cols}, expected square")
            }
            LinAlgError::NotSymmetric { max_rel_dev } => {
                write!(f, "matrix is not symmetric (relative deviation {max_rel_dev:.3e})")
            }
            LinAlgError::NotPositiveDefinite { pivot } => {
                write!(f, "matrix is not positive-definite (pivot {pivot})")
            }
        }
    }
}

impl std::error::Error for LinAlgError {}

/// Dense real vector. Length is at least one and fixed at construction;
/// units are the caller's business.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    pub fn new(data: Vec<f64>) -> Self {
        assert!(!data.is_empty(), "vector must have at least one entry");
        Vector { data }
    }

    pub fn from_slice(data: &[f64]) -> Self {
        Self::new(data.to_vec())
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.data.iter()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn add(&self, other: &Vector) -> Vector {
        assert_eq!(self.len(), other.len(), "vector length mismatch in add");
        Vector::new(self.iter().zip(other.iter()).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        assert_eq!(self.len(), other.len(), "vector length mismatch in sub");
        Vector::new(self.iter().zip(other.iter()).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, s: f64) -> Vector {
        Vector::new(self.iter().map(|a| a * s).collect())
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        assert_eq!(self.len(), other.len(), "vector length mismatch in dot");
        self.iter().zip(other.iter()).map(|(a, b)| a * b).sum()
    }

    /// Outer product `self · otherᵀ`.
    pub fn outer(&self, other: &Vector) -> Matrix {
        let mut m = Matrix::zeros(self.len(), other.len());
        for i in 0..self.len() {
            for j in 0..other.len() {
                m[(i, j)] = self.data[i] * other.data[j];
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i]
    }
}

/// Dense real matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix must have at least one entry");
        assert_eq!(data.len(), rows * cols, "data length does not match shape");
        Matrix { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(rows, cols, vec![0.0; rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        assert!(!rows.is_empty(), "matrix must have at least one row");
        let cols = rows[0].len();
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Matrix::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn column(&self, j: usize) -> Vector {
        Vector::new((0..self.rows).map(|i| self[(i, j)]).collect())
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix, LinAlgError> {
        if self.cols != rhs.rows {
            return Err(LinAlgError::DimensionMismatch {
                op: "matmul",
                lhs: self.shape(),
                rhs: rhs.shape(),
            });
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &Vector) -> Result<Vector, LinAlgError> {
        if self.cols != v.len() {
            return Err(LinAlgError::DimensionMismatch {
                op: "mul_vec",
                lhs: self.shape(),
                rhs: (v.len(), 1),
            });
        }
        let mut out = Vector::zeros(self.rows);
        for i in 0..self.rows {
            let mut s = 0.0;
            for j in 0..self.cols {
                s += self[(i, j)] * v[j];
            }
            out[i] = s;
        }
        Ok(out)
    }

    pub fn add(&self, rhs: &Matrix) -> Result<Matrix, LinAlgError> {
        if self.shape() != rhs.shape() {
            return Err(LinAlgError::DimensionMismatch {
                op: "add",
                lhs: self.shape(),
                rhs: rhs.shape(),
            });
        }
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect();
        Ok(Matrix::new(self.rows, self.cols, data))
    }

    pub fn sub(&self, rhs: &Matrix) -> Result<Matrix, LinAlgError> {
        if self.shape() != rhs.shape() {
            return Err(LinAlgError::DimensionMismatch {
                op: "sub",
                lhs: self.shape(),
                rhs: rhs.shape(),
            });
        }
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect();
        Ok(Matrix::new(self.rows, self.cols, data))
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix::new(self.rows, self.cols, self.data.iter().map(|a| a * s).collect())
    }

    /// `(A + Aᵀ)/2`. Covariances are passed through this after every update.
    pub fn symmetrized(&self) -> Matrix {
        assert!(self.is_square(), "symmetrized requires a square matrix");
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in 0..i {
                let m = 0.5 * (self[(i, j)] + self[(j, i)]);
                out[(i, j)] = m;
                out[(j, i)] = m;
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn trace(&self) -> f64 {
        self.diag().iter().sum()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Largest relative deviation from symmetry, scaled by the largest entry.
    pub fn symmetry_deviation(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let mut dev: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..i {
                dev = dev.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        dev / scale
    }

    /// Cholesky factorisation `A = L·Lᵀ` with `L` lower-triangular.
    ///
    /// The input must be square and symmetric within [`SYMMETRY_TOL`]; it is
    /// symmetrised before factoring so accumulated round-off cannot flip a
    /// pivot sign. A non-positive pivot reports its index.
    pub fn cholesky(&self) -> Result<Matrix, LinAlgError> {
        self.cholesky_impl(false)
    }

    /// Cholesky for positive *semi*-definite matrices: a pivot within
    /// round-off of zero yields a zero column instead of an error. Used when
    /// sampling noise with degenerate (zero-variance) components.
    pub fn cholesky_psd(&self) -> Result<Matrix, LinAlgError> {
        self.cholesky_impl(true)
    }

    fn cholesky_impl(&self, allow_semidefinite: bool) -> Result<Matrix, LinAlgError> {
        if !self.is_square() {
            return Err(LinAlgError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let dev = self.symmetry_deviation();
        if dev > SYMMETRY_TOL {
            return Err(LinAlgError::NotSymmetric { max_rel_dev: dev });
        }
        let a = self.symmetrized();
        let n = self.rows;
        let zero_tol = 1e-14 * a.max_abs();
        let mut l = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                if i == j {
                    if allow_semidefinite && s.abs() <= zero_tol {
                        l[(i, i)] = 0.0;
                    } else if s > 0.0 {
                        l[(i, i)] = s.sqrt();
                    } else {
                        return Err(LinAlgError::NotPositiveDefinite { pivot: i });
                    }
                } else if l[(j, j)] == 0.0 {
                    // semi-definite case: the whole column is zero
                    l[(i, j)] = 0.0;
                } else {
                    l[(i, j)] = s / l[(j, j)];
                }
            }
        }
        Ok(l)
    }

    /// Solves `A·X = rhs` for symmetric positive-definite `A` via the
    /// Cholesky factor (forward then back substitution, one RHS column at a
    /// time).
    pub fn solve_spd(&self, rhs: &Matrix) -> Result<Matrix, LinAlgError> {
        if self.rows != rhs.rows {
            return Err(LinAlgError::DimensionMismatch {
                op: "solve_spd",
                lhs: self.shape(),
                rhs: rhs.shape(),
            });
        }
        let l = self.cholesky()?;
        let n = self.rows;
        let mut x = rhs.clone();
        for c in 0..rhs.cols {
            // L·y = rhs[:,c]
            for i in 0..n {
                let mut s = x[(i, c)];
                for k in 0..i {
                    s -= l[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = s / l[(i, i)];
            }
            // Lᵀ·x = y
            for i in (0..n).rev() {
                let mut s = x[(i, c)];
                for k in i + 1..n {
                    s -= l[(k, i)] * x[(k, c)];
                }
                x[(i, c)] = s / l[(i, i)];
            }
        }
        Ok(x)
    }

    pub fn solve_spd_vec(&self, rhs: &Vector) -> Result<Vector, LinAlgError> {
        let col = Matrix::new(rhs.len(), 1, rhs.as_slice().to_vec());
        let x = self.solve_spd(&col)?;
        Ok(x.column(0))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{assert_close, TestRng};

    #[test]
    fn matmul_identity() {
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let i2 = Matrix::identity(2);
        assert_eq!(i2.matmul(&a).unwrap(), a);
    }

    #[test]
    fn matmul_scalar() {
        let a = Matrix::new(1, 1, vec![2.0]);
        let b = Matrix::new(1, 1, vec![3.0]);
        assert_eq!(a.matmul(&b).unwrap()[(0, 0)], 6.0);
    }

    #[test]
    fn matmul_hand_evaluated() {
        let a = Matrix::from_rows(&[&[1.0, 1.0], &[0.0, 1.0]]);
        let b = Matrix::from_rows(&[&[1.0, 0.0], &[1.0, 1.0]]);
        let expect = Matrix::from_rows(&[&[2.0, 1.0], &[1.0, 1.0]]);
        assert_eq!(a.matmul(&b).unwrap(), expect);
    }

    #[test]
    fn matmul_mismatch_names_both_shapes() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(2, 3);
        let err = a.matmul(&b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("2x3") && msg.contains("matmul"), "{msg}");
    }

    #[test]
    fn cholesky_identity() {
        let i3 = Matrix::identity(3);
        assert_eq!(i3.cholesky().unwrap(), i3);
    }

    #[test]
    fn cholesky_diagonal() {
        let a = Matrix::from_diag(&[4.0, 9.0]);
        assert_eq!(a.cholesky().unwrap(), Matrix::from_diag(&[2.0, 3.0]));
    }

    #[test]
    fn cholesky_reconstructs_input() {
        let a = Matrix::from_rows(&[&[4.0, 2.0], &[2.0, 3.0]]);
        let l = a.cholesky().unwrap();
        assert_close(l[(0, 0)], 2.0, 1e-15);
        assert_close(l[(1, 0)], 1.0, 1e-15);
        assert_close(l[(1, 1)], 2.0f64.sqrt(), 1e-15);
        assert_close(l[(0, 1)], 0.0, 0.0);
        let back = l.matmul(&l.transpose()).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_close(back[(i, j)], a[(i, j)], 1e-12);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite_with_pivot() {
        let a = Matrix::from_rows(&[&[1.0, 0.0], &[0.0, -1.0]]);
        match a.cholesky().unwrap_err() {
            LinAlgError::NotPositiveDefinite { pivot } => assert_eq!(pivot, 1),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn cholesky_rejects_asymmetric() {
        let a = Matrix::from_rows(&[&[1.0, 0.5], &[0.0, 1.0]]);
        assert!(matches!(a.cholesky(), Err(LinAlgError::NotSymmetric { .. })));
    }

    #[test]
    fn cholesky_psd_zero_column() {
        let a = Matrix::from_diag(&[4.0, 0.0]);
        let l = a.cholesky_psd().unwrap();
        assert_eq!(l, Matrix::from_diag(&[2.0, 0.0]));
        assert!(a.cholesky().is_err());
    }

    #[test]
    fn solve_spd_examples() {
        let i2 = Matrix::identity(2);
        let rhs = Matrix::new(2, 1, vec![5.0, 7.0]);
        assert_eq!(i2.solve_spd(&rhs).unwrap(), rhs);

        let a = Matrix::new(1, 1, vec![2.0]);
        let r = Matrix::new(1, 1, vec![8.0]);
        assert_close(a.solve_spd(&r).unwrap()[(0, 0)], 4.0, 1e-12);

        let a = Matrix::from_rows(&[&[4.0, 2.0], &[2.0, 3.0]]);
        let rhs = Matrix::new(2, 1, vec![1.0, 0.0]);
        let x = a.solve_spd(&rhs).unwrap();
        assert_close(x[(0, 0)], 0.375, 1e-14);
        assert_close(x[(1, 0)], -0.25, 1e-14);
    }

    #[test]
    fn random_spd_cholesky_roundtrip() {
        let mut rng = TestRng::new(42);
        for _ in 0..100 {
            let n = 1 + (rng.next_u64() % 5) as usize;
            let a = rng.spd_matrix(n);
            let l = a.cholesky().unwrap();
            let back = l.matmul(&l.transpose()).unwrap();
            let scale = a.max_abs();
            for i in 0..n {
                for j in 0..n {
                    assert!((back[(i, j)] - a[(i, j)]).abs() <= 1e-9 * scale);
                }
            }
        }
    }

    #[test]
    fn random_solve_roundtrip() {
        let mut rng = TestRng::new(7);
        for _ in 0..100 {
            let n = 1 + (rng.next_u64() % 5) as usize;
            let a = rng.spd_matrix(n);
            let x = rng.vector(n, 1.0);
            let col = Matrix::new(n, 1, x.as_slice().to_vec());
            let rhs = a.matmul(&col).unwrap();
            let got = a.solve_spd(&rhs).unwrap();
            for i in 0..n {
                assert!(
                    (got[(i, 0)] - x[i]).abs() <= 1e-8 * x.max_abs().max(1.0),
                    "solve mismatch at {i}"
                );
            }
        }
    }

    #[test]
    fn solve_residual_bound() {
        let mut rng = TestRng::new(3);
        for _ in 0..50 {
            let n = 2 + (rng.next_u64() % 4) as usize;
            let a = rng.spd_matrix(n);
            let rhs = Matrix::new(n, 1, rng.vector(n, 1.0).as_slice().to_vec());
            let x = a.solve_spd(&rhs).unwrap();
            let resid = a.matmul(&x).unwrap().sub(&rhs).unwrap();
            assert!(resid.max_abs() <= 1e-9 * rhs.max_abs().max(1e-300));
        }
    }

    #[test]
    fn matmul_associativity() {
        let mut rng = TestRng::new(11);
        for _ in 0..100 {
            let (n, m, p, q) = (
                1 + (rng.next_u64() % 4) as usize,
                1 + (rng.next_u64() % 4) as usize,
                1 + (rng.next_u64() % 4) as usize,
                1 + (rng.next_u64() % 4) as usize,
            );
            let a = rng.matrix(n, m, 1.0);
            let b = rng.matrix(m, p, 1.0);
            let c = rng.matrix(p, q, 1.0);
            let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
            let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
            let scale = left.max_abs().max(1.0);
            for i in 0..n {
                for j in 0..q {
                    assert!((left[(i, j)] - right[(i, j)]).abs() <= 1e-10 * scale);
                }
            }
        }
    }
}
