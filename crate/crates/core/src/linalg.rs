//! Small dense linear-algebra helpers for chart-sized matrices (dimension 1 to 3).

use nalgebra::{Complex, DMatrix, DVector};
use std::f64::consts::PI;

pub type Point = DVector<f64>;
pub type Matrix = DMatrix<f64>;

pub fn point(coords: &[f64]) -> Point {
    DVector::from_column_slice(coords)
}

/// Reduce an angle to `(-pi, pi]`.
pub fn wrap_pi(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Reduce an angle into the `2*pi` window centred at `center`.
pub fn wrap_near(a: f64, center: f64) -> f64 {
    center + wrap_pi(a - center)
}

/// Spectral norm (largest singular value).
pub fn op_norm(m: &Matrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].abs();
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Ratio of largest to smallest singular value; `inf` for singular matrices.
pub fn condition_number(m: &Matrix) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let (lo, hi) = (sv.min(), sv.max());
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

pub fn eigenvalues(m: &Matrix) -> Vec<Complex<f64>> {
    assert!(m.is_square());
    match m.nrows() {
        0 => vec![],
        1 => vec![Complex::new(m[(0, 0)], 0.0)],
        2 => {
            let tr = m[(0, 0)] + m[(1, 1)];
            let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
            let disc = tr * tr / 4.0 - det;
            if disc >= 0.0 {
                let s = disc.sqrt();
                // larger-magnitude root first, the other from the product to avoid cancellation
                let r1 = if tr >= 0.0 { tr / 2.0 + s } else { tr / 2.0 - s };
                let r2 = if r1 != 0.0 { det / r1 } else { tr - r1 };
                vec![Complex::new(r1, 0.0), Complex::new(r2, 0.0)]
            } else {
                let s = (-disc).sqrt();
                vec![Complex::new(tr / 2.0, s), Complex::new(tr / 2.0, -s)]
            }
        }
        _ => m.clone().complex_eigenvalues().iter().copied().collect(),
    }
}

/// Left inverse `(A^T A)^{-1} A^T` of a full-column-rank matrix.
pub fn left_inverse(a: &Matrix) -> Option<Matrix> {
    let ata = a.transpose() * a;
    ata.try_inverse().map(|inv| inv * a.transpose())
}

pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_keeps_range() {
        assert!((wrap_pi(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_pi(-0.5) + 0.5).abs() < 1e-15);
        assert!((wrap_near(0.1, 2.0 * PI) - (2.0 * PI + 0.1)).abs() < 1e-12);
    }

    #[test]
    fn two_by_two_spectrum() {
        let rot = Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let ev = eigenvalues(&rot);
        assert!(ev.iter().all(|z| (z.norm() - 1.0).abs() < 1e-14));
        let shear = Matrix::from_row_slice(2, 2, &[1.0, -2.0, 0.0, 1.0]);
        let ev = eigenvalues(&shear);
        assert!(ev.iter().all(|z| (z.re - 1.0).abs() < 1e-12 && z.im == 0.0));
        let diag = Matrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.25]);
        let mut mods: Vec<f64> = eigenvalues(&diag).iter().map(|z| z.re).collect();
        mods.sort_by(f64::total_cmp);
        assert_eq!(mods, vec![0.25, 2.0]);
    }

    #[test]
    fn norm_of_rank_one() {
        let m = Matrix::from_row_slice(2, 2, &[3.0, 0.0, 4.0, 0.0]);
        assert!((op_norm(&m) - 5.0).abs() < 1e-12);
    }
}
