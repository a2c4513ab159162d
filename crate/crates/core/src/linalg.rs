//! Small dense complex linear-algebra helpers shared by the modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Largest entrywise modulus of `a - a†`.
pub fn hermiticity_error(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn trace(a: &CMatrix) -> C64 {
    a.diagonal().iter().sum()
}

/// Eigenvalues of a Hermitian matrix (the anti-Hermitian part is discarded).
pub fn hermitian_eigenvalues(a: &CMatrix) -> DVector<f64> {
    let scale = max_abs(a);
    // entries far below the scale underflow inside the QR sweeps and poison
    // the result with NaN; they cannot move any eigenvalue measurably
    let floor = scale * 1e-40;
    let h =
        ((a + a.adjoint()) * c(0.5, 0.0)).map(|z| if z.norm() < floor { c(0.0, 0.0) } else { z });
    h.symmetric_eigenvalues()
}

pub fn min_eigenvalue(a: &CMatrix) -> f64 {
    hermitian_eigenvalues(a).min()
}

/// Trace distance ½‖a − b‖₁ between two Hermitian matrices.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    0.5 * hermitian_eigenvalues(&(a - b))
        .iter()
        .map(|x| x.abs())
        .sum::<f64>()
}

/// Spectral norm (largest singular value).
pub fn operator_norm(a: &CMatrix) -> f64 {
    a.clone().singular_values().max()
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().fold(0.0f64, |m, z| m.max(z.norm()))
}

/// Largest entrywise deviation of `u† u` from the identity.
pub fn unitarity_error(u: &CMatrix) -> f64 {
    let n = u.nrows();
    max_abs(&(u.adjoint() * u - CMatrix::identity(n, n)))
}

/// `Tr(a b)` without forming the product.
pub fn trace_of_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// `⟨v| a |v⟩`.
pub fn sandwich(v: &CVector, a: &CMatrix) -> C64 {
    v.dotc(&(a * v))
}

/// Real entry of `ln(n!)` for the coherent-state amplitudes.
pub fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}
