//! Small dense complex helpers over nalgebra.

use alloc::vec::Vec;
use nalgebra::{Cholesky, DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::{CMat, C64};

/// Eigendecomposition of a Hermitian matrix. Eigenvalues are in the
/// order nalgebra returns them, columns of the second element match.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let e = SymmetricEigen::new(m.clone());
    (e.eigenvalues.iter().copied().collect(), e.eigenvectors)
}

/// `U diag(f) Uᴴ`.
pub fn from_eig(u: &CMat, f: &[f64]) -> CMat {
    let mut scaled = u.clone();
    for (j, &fj) in f.iter().enumerate() {
        scaled.column_mut(j).scale_mut(fj);
    }
    &scaled * u.adjoint()
}

/// Inverse of a Hermitian positive definite matrix, falling back to LU
/// when the Cholesky factorization fails on round-off.
pub fn inv_hpd(m: &CMat, what: &'static str) -> Result<CMat> {
    match Cholesky::new(m.clone()) {
        Some(c) => Ok(c.inverse()),
        None => inv(m, what),
    }
}

pub fn inv(m: &CMat, what: &'static str) -> Result<CMat> {
    m.clone().try_inverse().ok_or(Error::Singular(what))
}

/// `Tr(A B)` without forming the product.
pub fn tr_prod(a: &CMat, b: &CMat) -> C64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn trace(a: &CMat) -> C64 {
    a.diagonal().iter().sum()
}

/// `rᴴ r` for the `i`-th row `r` of `h`: an N_t x N_t rank-one block.
pub fn row_gram(h: &CMat, i: usize) -> CMat {
    let n = h.ncols();
    DMatrix::from_fn(n, n, |p, q| h[(i, p)].conj() * h[(i, q)])
}

/// `r_iᴴ r_j` for rows `i`, `j` of `h`.
pub fn row_cross(h: &CMat, i: usize, j: usize) -> CMat {
    let n = h.ncols();
    DMatrix::from_fn(n, n, |p, q| h[(i, p)].conj() * h[(j, q)])
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Keeps the listed rows of `h` in their original order.
pub fn select_rows(h: &CMat, keep: &[usize]) -> CMat {
    DMatrix::from_fn(keep.len(), h.ncols(), |i, j| h[(keep[i], j)])
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Largest singular value via the Hermitian eigenproblem of `Aᴴ A`.
pub fn spectral_norm(a: &CMat) -> f64 {
    let (vals, _) = eigh(&(a.adjoint() * a));
    libm::sqrt(vals.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn eigh_reconstructs_hermitian_input() {
        let mut r = rng::rng(1);
        let g = rng::complex_normal_matrix(&mut r, 6, 6);
        let m = &g * g.adjoint();
        let (vals, u) = eigh(&m);
        let back = from_eig(&u, &vals);
        assert!(max_abs_diff(&m, &back) < 1e-10);
    }

    #[test]
    fn tr_prod_matches_product_trace() {
        let mut r = rng::rng(2);
        let a = rng::complex_normal_matrix(&mut r, 4, 5);
        let b = rng::complex_normal_matrix(&mut r, 5, 4);
        assert!((tr_prod(&a, &b) - trace(&(&a * &b))).norm() < 1e-12);
    }

    #[test]
    fn hpd_inverse_is_inverse() {
        let mut r = rng::rng(3);
        let g = rng::complex_normal_matrix(&mut r, 5, 5);
        let m = &g * g.adjoint() + identity(5);
        let mi = inv_hpd(&m, "test").unwrap();
        assert!(max_abs_diff(&(&m * &mi), &identity(5)) < 1e-12);
    }
}
