//! Dense eigenvalue and linear-solve helpers on top of `nalgebra`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // shadowed by the inherent f64 methods whenever std is linked
use num_traits::Float;

use crate::{Error, Result, C64};

/// Row-major dense real matrix alias.
pub type Mat = DMatrix<f64>;

/// Eigenvalues of a real square matrix (Parlett–Reinsch balancing, then real
/// Schur), sorted with [`crate::poly::sort_modes`].
pub fn eigenvalues(a: &Mat) -> Result<Vec<C64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::InvalidInput("eigenvalues of a non-square matrix".into()));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("non-finite state matrix entry".into()));
    }
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    let mut m = a.clone();
    nalgebra::linalg::balancing::balance_parlett_reinsch(&mut m);
    let n = m.nrows();
    let schur = nalgebra::linalg::Schur::try_new(m, f64::EPSILON, 1000 * n)
        .ok_or_else(|| Error::Numerical("real Schur iteration did not converge".into()))?;
    let mut ev: Vec<C64> = schur.complex_eigenvalues().iter().copied().collect();
    crate::poly::sort_modes(&mut ev);
    Ok(ev)
}

/// Eigenvalues of a complex square matrix, balanced first. Unsorted.
pub fn complex_eigenvalues(mut m: DMatrix<C64>) -> Result<Vec<C64>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical("non-finite matrix entry".into()));
    }
    balance_complex(&mut m);
    let schur = nalgebra::linalg::Schur::try_new(m, f64::EPSILON, 1000 * n)
        .ok_or_else(|| Error::Numerical("complex Schur iteration did not converge".into()))?;
    let ev = schur.eigenvalues().ok_or_else(|| Error::Numerical("complex Schur form not triangular".into()))?;
    Ok(ev.iter().copied().collect())
}

// Parlett-Reinsch diagonal similarity with radix-2 factors, applied to the
// moduli of the entries.
fn balance_complex(m: &mut DMatrix<C64>) {
    let n = m.nrows();
    let radix = 2.0;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].norm();
                    r += m[(i, j)].norm();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let total = c + r;
            let mut f = 1.0;
            let mut g = r / radix;
            while c < g {
                f *= radix;
                c *= radix * radix;
            }
            g = r * radix;
            while c > g {
                f /= radix;
                c /= radix * radix;
            }
            if (c + r) / f < 0.95 * total {
                done = false;
                for j in 0..n {
                    m[(i, j)] /= f;
                }
                for j in 0..n {
                    m[(j, i)] *= f;
                }
            }
        }
    }
}

/// Solve `a·x = b` by LU with partial pivoting.
pub fn solve(a: &Mat, b: &[f64]) -> Result<Vec<f64>> {
    let lu = a.clone().lu();
    let x = lu.solve(&DVector::from_column_slice(b)).ok_or_else(|| Error::Singular("linear system".into()))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("linear system produced non-finite values".into()));
    }
    Ok(x.iter().copied().collect())
}

/// Orthonormal basis of the complement of a unit vector `v`
/// (columns of an n×(n−1) matrix), via a Householder reflector.
pub fn complement_basis(v: &[f64]) -> Mat {
    let n = v.len();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut u: Vec<f64> = v.iter().map(|x| x / norm).collect();
    // H = I - 2 w wᵀ maps e0 to ±u; its remaining columns span u⊥
    let sign = if u[0] >= 0.0 { 1.0 } else { -1.0 };
    u[0] += sign;
    let wn = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let w: Vec<f64> = u.iter().map(|x| x / wn).collect();
    Mat::from_fn(n, n - 1, |i, j| {
        let jj = j + 1;
        let id = if i == jj { 1.0 } else { 0.0 };
        id - 2.0 * w[i] * w[jj]
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isolated_rl_branch_poles() {
        // L di/dt = -R i - jWL i as a 2x2 real system
        let (r, l, w) = (0.02, 0.1 / crate::OMEGA0, crate::OMEGA0);
        let a = Mat::from_row_slice(2, 2, &[-r / l, w, -w, -r / l]);
        let ev = eigenvalues(&a).unwrap();
        assert!((ev[0] - C64::new(-r / l, w)).norm() < 1e-9);
        assert!((ev[1] - C64::new(-r / l, -w)).norm() < 1e-9);
    }

    #[test]
    fn complement_is_orthonormal() {
        let v = [0.3, -1.0, 2.0, 0.5];
        let q = complement_basis(&v);
        let g = q.transpose() * &q;
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - want).abs() < 1e-12);
            }
            let dot: f64 = (0..4).map(|k| q[(k, i)] * v[k]).sum();
            assert!(dot.abs() < 1e-12);
        }
    }
}
