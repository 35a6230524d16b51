//! Determinants through nalgebra's LU factorisation.

use nalgebra::DMatrix;

use crate::C64;

/// det(I + s A) for a dense complex matrix given row-major.
pub fn det_identity_plus(a: &[C64], n: usize, s: C64) -> C64 {
    if n == 0 {
        return C64::new(1.0, 0.0);
    }
    let m = DMatrix::from_fn(n, n, |i, j| {
        let d = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
        d + s * a[i * n + j]
    });
    m.lu().determinant()
}

pub fn det_complex(a: &[C64], n: usize) -> C64 {
    if n == 0 {
        return C64::new(1.0, 0.0);
    }
    DMatrix::from_row_slice(n, n, a).lu().determinant()
}

/// det(I - A) for a real matrix given row-major.
pub fn det_identity_minus_real(a: &[f64], n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let m = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } - a[i * n + j]);
    m.lu().determinant()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_dets() {
        let a = [C64::new(1.0, 0.0), C64::new(2.0, 0.0), C64::new(3.0, 0.0), C64::new(4.0, 0.0)];
        assert!((det_complex(&a, 2) - C64::new(-2.0, 0.0)).norm() < 1e-14);
        let r = [0.5, 0.0, 0.0, 0.25];
        assert!((det_identity_minus_real(&r, 2) - 0.375).abs() < 1e-15);
    }
}
