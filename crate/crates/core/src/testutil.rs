//! Deterministic helpers for tests. Kept separate from [`crate::sim::RngStream`]
//! so test oracles do not share a code path with the implementation they check.

use crate::linalg::{Matrix, Vector};

/// splitmix64; good enough to scatter test cases and fully reproducible.
pub struct TestRng {
    state: u64,
}

impl TestRng {
    pub fn new(seed: u64) -> Self {
        TestRng { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform in (0, 1).
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
    }

    /// Uniform in (-s, s).
    pub fn signed(&mut self, s: f64) -> f64 {
        (2.0 * self.uniform() - 1.0) * s
    }

    /// Standard normal via Box-Muller.
    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn vector(&mut self, n: usize, scale: f64) -> Vector {
        Vector::new((0..n).map(|_| self.signed(scale)).collect())
    }

    pub fn matrix(&mut self, rows: usize, cols: usize, scale: f64) -> Matrix {
        Matrix::new(rows, cols, (0..rows * cols).map(|_| self.signed(scale)).collect())
    }

    /// Random symmetric positive-definite matrix, built as MᵀM + εI.
    pub fn spd_matrix(&mut self, n: usize) -> Matrix {
        let m = self.matrix(n, n, 1.0);
        let mut a = m.transpose().matmul(&m).unwrap();
        for i in 0..n {
            a[(i, i)] += 1e-3;
        }
        a.symmetrized()
    }
}

#[track_caller]
pub fn assert_close(got: f64, want: f64, tol: f64) {
    assert!(
        (got - want).abs() <= tol,
        "got {got:?}, want {want:?} (tol {tol:e}, diff {:e})",
        (got - want).abs()
    );
}

#[track_caller]
pub fn assert_rel_close(got: f64, want: f64, rtol: f64) {
    let scale = want.abs().max(1e-300);
    assert!(
        (got - want).abs() <= rtol * scale,
        "got {got:?}, want {want:?} (rtol {rtol:e}, rel diff {:e})",
        (got - want).abs() / scale
    );
}
