//! Small dense complex helpers shared by the modem, detectors and self-checks.

use nalgebra::{DMatrix, DVector};

use crate::C64;

pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMatrix::zeros(ar * br, ac * bc);
    for j in 0..ac {
        for i in 0..ar {
            let aij = a[(i, j)];
            if aij == C64::new(0.0, 0.0) {
                continue;
            }
            let mut block = out.view_mut((i * br, j * bc), (br, bc));
            block.zip_apply(b, |o, bv| *o = aij * bv);
        }
    }
    out
}

/// Diagonal matrix from real gains.
pub fn real_diag(gains: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_iterator(
        gains.len(),
        gains.iter().map(|&g| C64::new(g, 0.0)),
    ))
}

/// `H^H H`, computed from real and imaginary parts with three real
/// products: `(A^T A + B^T B) + j (A^T B - (A^T B)^T)` for `H = A + jB`.
/// The real products go through the blocked f64 kernel, which is much faster
/// than the generic complex one.
pub fn gram(h: &CMatrix) -> CMatrix {
    let a = h.map(|z| z.re);
    let b = h.map(|z| z.im);
    let at = a.transpose();
    let aa = &at * &a;
    let bb = &b.transpose() * &b;
    let ab = &at * &b;
    let n = h.ncols();
    CMatrix::from_fn(n, n, |i, j| C64::new(aa[(i, j)] + bb[(i, j)], ab[(i, j)] - ab[(j, i)]))
}

/// Squared Euclidean norm of every column.
pub fn column_energies(h: &CMatrix) -> Vec<f64> {
    h.column_iter().map(|c| c.norm_squared()).collect()
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn kron_small() {
        let a = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(0.0, 1.0), c(0.0, 0.0)]);
        let b = CMatrix::from_row_slice(1, 2, &[c(1.0, 0.0), c(-1.0, 0.0)]);
        let k = kron(&a, &b);
        let expected = CMatrix::from_row_slice(
            2,
            4,
            &[
                c(1.0, 0.0), c(-1.0, 0.0), c(2.0, 0.0), c(-2.0, 0.0),
                c(0.0, 1.0), c(0.0, -1.0), c(0.0, 0.0), c(0.0, 0.0),
            ],
        );
        assert_eq!(k, expected);
    }

    #[test]
    fn gram_matches_adjoint_product() {
        let h = CMatrix::from_fn(9, 6, |i, j| c((i * 7 + j * 3) as f64 % 5.0 - 2.0, (i + 2 * j) as f64 % 3.0 - 1.2));
        let g = gram(&h);
        assert_eq!(g.shape(), (6, 6));
        assert!(max_abs_diff(&g, &h.ad_mul(&h)) < 1e-12);
    }

    #[test]
    fn vec_identity() {
        // vec(A X B) = (B^T ⊗ A) vec(X)
        let a = CMatrix::from_fn(3, 3, |i, j| c(i as f64 + 1.0, j as f64 - 0.5));
        let x = CMatrix::from_fn(3, 2, |i, j| c((i * j) as f64, 1.0));
        let b = CMatrix::from_fn(2, 2, |i, j| c(0.3 * i as f64, 0.7 - j as f64));
        let lhs = &a * &x * &b;
        let rhs = kron(&b.transpose(), &a) * CVector::from_column_slice(x.as_slice());
        let lhs = CVector::from_column_slice(lhs.as_slice());
        assert!((lhs - rhs).norm() < 1e-12);
    }
}
