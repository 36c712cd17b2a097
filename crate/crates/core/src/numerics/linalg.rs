use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Representative of x modulo 2 pi in [0, 2 pi).
pub fn principal_angle(x: f64) -> f64 {
    let r = x.rem_euclid(TWO_PI);
    if r >= TWO_PI {
        0.0
    } else {
        r
    }
}

/// Chord distance between e^{ia} and e^{ib}.
pub fn chord(a: f64, b: f64) -> f64 {
    2.0 * (0.5 * (a - b)).sin().abs()
}

/// Eigenvalues of a (numerically) unitary matrix from its complex Schur form.
pub fn eigenvalues(u: &DMatrix<Complex64>) -> Result<Vec<Complex64>> {
    if u.nrows() == 0 {
        return Ok(Vec::new());
    }
    if u.nrows() == 1 {
        return Ok(vec![u[(0, 0)]]);
    }
    for eps in [1e-15, 1e-13, 1e-11] {
        if let Some(schur) = u.clone().try_schur(eps, 100_000) {
            let (_, t) = schur.unpack();
            return Ok((0..t.nrows()).map(|i| t[(i, i)]).collect());
        }
    }
    Err(Error::EigenSolver { residual: f64::NAN })
}

/// Eigenphases of a unitary matrix, each in [0, 2 pi).
pub fn unitary_eigenphases(u: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    Ok(eigenvalues(u)?
        .into_iter()
        .map(|z| principal_angle(z.arg()))
        .collect())
}

/// exp(i t A) for Hermitian A.
pub fn hermitian_exp_i(a: &DMatrix<Complex64>, t: f64) -> DMatrix<Complex64> {
    let n = a.nrows();
    let h = (a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let phases = DVector::from_iterator(
        n,
        eig.eigenvalues
            .iter()
            .map(|&l| Complex64::from_polar(1.0, l * t)),
    );
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for j in 0..n {
        let p = phases[j];
        for i in 0..n {
            scaled[(i, j)] *= p;
        }
    }
    scaled * v.adjoint()
}

/// Operator 2-norm of a complex matrix.
pub fn op_norm(a: &DMatrix<Complex64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    a.clone()
        .singular_values()
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Eigenvalues of a real symmetric matrix, ascending.
pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let mut v: Vec<f64> = a.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Deviation of U from unitarity, max |U*U - I|.
pub fn unitarity_defect(u: &DMatrix<Complex64>) -> f64 {
    let n = u.nrows();
    let p = u.adjoint() * u;
    let mut d: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            d = d.max((p[(i, j)] - Complex64::new(target, 0.0)).norm());
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn principal_angle_range() {
        assert_eq!(principal_angle(0.0), 0.0);
        assert!((principal_angle(-0.5) - (TWO_PI - 0.5)).abs() < 1e-15);
        assert!(principal_angle(-1e-18) < TWO_PI);
        assert!((principal_angle(7.0) - (7.0 - TWO_PI)).abs() < 1e-15);
    }

    #[test]
    fn exp_of_diagonal_hermitian() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(-2.0, 0.0),
        ]));
        let u = hermitian_exp_i(&a, 0.5);
        assert!((u[(0, 0)] - Complex64::from_polar(1.0, 0.5)).norm() < 1e-14);
        assert!((u[(1, 1)] - Complex64::from_polar(1.0, -1.0)).norm() < 1e-14);
        let mut ph = unitary_eigenphases(&u).unwrap();
        ph.sort_by(f64::total_cmp);
        assert!((ph[0] - 0.5).abs() < 1e-12);
        assert!((ph[1] - (TWO_PI - 1.0)).abs() < 1e-12);
    }
}
