//! Dense 3×3 symmetric matrix helpers.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub type Mat3<T> = [[T; 3]; 3];

pub fn identity<T: Scalar>() -> Mat3<T> {
    let mut m = [[T::zero(); 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = T::one();
    }
    m
}

pub fn mul<T: Scalar>(a: &Mat3<T>, b: &Mat3<T>) -> Mat3<T> {
    let mut c = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

pub fn apply<T: Scalar>(a: &Mat3<T>, x: [T; 3]) -> [T; 3] {
    [0, 1, 2].map(|i| a[i][0] * x[0] + a[i][1] * x[1] + a[i][2] * x[2])
}

pub fn transpose<T: Scalar>(a: &Mat3<T>) -> Mat3<T> {
    [0, 1, 2].map(|i| [a[0][i], a[1][i], a[2][i]])
}

/// Cyclic Jacobi rotations. Returns eigenvalues and eigenvectors as the
/// columns of the second matrix, so `a = V diag(w) Vᵀ`.
pub fn sym_eigen<T: Scalar>(a: &Mat3<T>) -> ([T; 3], Mat3<T>) {
    let mut a = *a;
    let mut v = identity::<T>();
    let two = T::from_f64_lossy(2.0);
    for _ in 0..64 {
        let off: T = a[0][1].abs() + a[0][2].abs() + a[1][2].abs();
        let scale: T = a[0][0].abs() + a[1][1].abs() + a[2][2].abs();
        if off <= T::epsilon() * scale || off == T::zero() {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q] == T::zero() {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (two * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
            let c = T::one() / (t * t + T::one()).sqrt();
            let s = t * c;
            let mut r = identity::<T>();
            r[p][p] = c;
            r[q][q] = c;
            r[p][q] = s;
            r[q][p] = -s;
            a = mul(&transpose(&r), &mul(&a, &r));
            a[p][q] = T::zero();
            a[q][p] = T::zero();
            v = mul(&v, &r);
        }
    }
    ([a[0][0], a[1][1], a[2][2]], v)
}

/// `V f(diag(w)) Vᵀ` for an eigendecomposition of `a`.
pub fn sym_fn<T: Scalar>(a: &Mat3<T>, f: impl Fn(T) -> T) -> Mat3<T> {
    let (w, v) = sym_eigen(a);
    let mut d = [[T::zero(); 3]; 3];
    for i in 0..3 {
        d[i][i] = f(w[i]);
    }
    symmetrize(&mul(&v, &mul(&d, &transpose(&v))))
}

pub fn symmetrize<T: Scalar>(a: &Mat3<T>) -> Mat3<T> {
    let half = T::from_f64_lossy(0.5);
    [0, 1, 2].map(|i| [0, 1, 2].map(|j| (a[i][j] + a[j][i]) * half))
}

/// Fails unless every eigenvalue is strictly positive.
pub fn require_positive_definite<T: Scalar>(a: &Mat3<T>, what: &str) -> Result<[T; 3]> {
    let (w, _) = sym_eigen(a);
    if w.iter().any(|x| !x.is_finite() || *x <= T::zero()) {
        return Err(Error::Numeric(format!(
            "{what} is not positive definite (eigenvalues {:?})",
            w.map(|x| x.as_f64())
        )));
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reconstructs_from_eigenpairs() {
        let a: Mat3<f64> = [[4.0, 1.0, 0.5], [1.0, 3.0, -0.2], [0.5, -0.2, 1.0]];
        let (w, v) = sym_eigen(&a);
        let back = sym_fn(&a, |x| x);
        for i in 0..3 {
            for j in 0..3 {
                assert!((back[i][j] - a[i][j]).abs() < 1e-12);
            }
            let col = [v[0][i], v[1][i], v[2][i]];
            let av = apply(&a, col);
            for k in 0..3 {
                assert!((av[k] - w[i] * col[k]).abs() < 1e-12);
            }
        }
        let tr: f64 = w.iter().sum();
        assert!((tr - 8.0).abs() < 1e-12);
    }

    #[test]
    fn square_root_squares_back() {
        let a = [[2.0, 0.3, 0.1], [0.3, 1.0, 0.0], [0.1, 0.0, 0.5]];
        let r = sym_fn(&a, f64::sqrt);
        let rr = mul(&r, &r);
        for i in 0..3 {
            for j in 0..3 {
                assert!((rr[i][j] - a[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn diagonal_input() {
        let a = [[3.0f32, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]];
        let (w, _) = sym_eigen(&a);
        assert_eq!(w, [3.0, 1.0, 2.0]);
        assert!(require_positive_definite(&[[0.0f64; 3]; 3], "zero").is_err());
    }
}
