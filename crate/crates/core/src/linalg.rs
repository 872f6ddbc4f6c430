//! Small fixed-size helpers shared by the rate formulas and the solvers.

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;

/// `aᴴ b` for complex vectors of equal length.
pub fn dot_h(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// Eigendecomposition of a real symmetric 2×2 matrix.
///
/// Returns the eigenvalues in descending order and the orthogonal matrix whose
/// columns are the matching unit eigenvectors.
pub fn sym2_eigen(m: &Matrix2<f64>) -> ([f64; 2], Matrix2<f64>) {
    let a = m[(0, 0)];
    let d = m[(1, 1)];
    let b = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    let mean = 0.5 * (a + d);
    let radius = (0.5 * (a - d)).hypot(b);
    let angle = 0.5 * (2.0 * b).atan2(a - d);
    let (s, c) = angle.sin_cos();
    let vectors = Matrix2::new(c, -s, s, c);
    ([mean + radius, mean - radius], vectors)
}

/// `Ω diag(values) Ωᵀ`.
pub fn sym2_compose(values: [f64; 2], vectors: &Matrix2<f64>) -> Matrix2<f64> {
    vectors * Matrix2::from_diagonal(&Vector2::new(values[0], values[1])) * vectors.transpose()
}

pub fn symmetrize2(m: &Matrix2<f64>) -> Matrix2<f64> {
    0.5 * (m + m.transpose())
}
