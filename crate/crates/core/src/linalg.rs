//! Small dense routines shared by the fitting and optimization paths.
//!
//! Everything here operates on matrices of at most a few hundred rows, so
//! plain O(k^3) factorizations are fine and keep the numeric behavior fully
//! under our control (pivot thresholds in particular).

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Pivot threshold below which a Gram matrix is declared rank deficient.
/// Columns are unit norm, so this is scale free.
pub(crate) const RANK_PIVOT_TOL: f64 = 1e-10;

/// Cholesky factorization `g = L L'` of a symmetric positive definite matrix.
///
/// Fails with `RankDeficient` when a pivot drops below `RANK_PIVOT_TOL`.
pub(crate) fn cholesky_lower(g: &ArrayView2<f64>) -> Result<Array2<f64>> {
    let k = g.nrows();
    debug_assert_eq!(k, g.ncols());
    let mut l = Array2::<f64>::zeros((k, k));
    for j in 0..k {
        let mut d = g[[j, j]];
        for t in 0..j {
            d -= l[[j, t]] * l[[j, t]];
        }
        if d < RANK_PIVOT_TOL {
            return Err(Error::RankDeficient);
        }
        let dj = d.sqrt();
        l[[j, j]] = dj;
        for i in (j + 1)..k {
            let mut s = g[[i, j]];
            for t in 0..j {
                s -= l[[i, t]] * l[[j, t]];
            }
            l[[i, j]] = s / dj;
        }
    }
    Ok(l)
}

/// Solves `L x = b` with `L` lower triangular.
pub(crate) fn solve_lower(l: &ArrayView2<f64>, b: &ArrayView1<f64>) -> Array1<f64> {
    let k = l.nrows();
    let mut x = Array1::<f64>::zeros(k);
    for i in 0..k {
        let mut s = b[i];
        for j in 0..i {
            s -= l[[i, j]] * x[j];
        }
        x[i] = s / l[[i, i]];
    }
    x
}

/// Solves `L' x = b` with `L` lower triangular (so `L'` is upper).
pub(crate) fn solve_lower_transpose(l: &ArrayView2<f64>, b: &ArrayView1<f64>) -> Array1<f64> {
    let k = l.nrows();
    let mut x = Array1::<f64>::zeros(k);
    for i in (0..k).rev() {
        let mut s = b[i];
        for j in (i + 1)..k {
            s -= l[[j, i]] * x[j];
        }
        x[i] = s / l[[i, i]];
    }
    x
}

/// Solves `(L L') x = b` given the lower Cholesky factor.
pub(crate) fn solve_spd(l: &ArrayView2<f64>, b: &ArrayView1<f64>) -> Array1<f64> {
    let y = solve_lower(l, b);
    solve_lower_transpose(l, &y.view())
}

/// Largest eigenvalue of `X'X` by power iteration on `v -> X'(Xv)`.
///
/// Deterministic start vector; 50 iterations or relative change below 1e-10,
/// whichever first. The estimate is inflated by 1e-8 relative so downstream
/// step sizes stay on the safe side of the true spectral radius.
pub(crate) fn gram_spectral_max(x: &ArrayView2<f64>) -> f64 {
    let p = x.ncols();
    let mut v = Array1::<f64>::from_shape_fn(p, |i| 1.0 + 0.01 * ((i % 7) as f64));
    let nrm = v.dot(&v).sqrt();
    v.mapv_inplace(|t| t / nrm);
    let mut lambda = 0.0_f64;
    for _ in 0..50 {
        let w = x.t().dot(&x.dot(&v));
        let wn = w.dot(&w).sqrt();
        if wn == 0.0 {
            return 0.0;
        }
        let next = v.dot(&w);
        v = w / wn;
        if (next - lambda).abs() <= 1e-10 * next.abs() {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda * (1.0 + 1e-8)
}

/// Orthonormal basis of the column span of `a` via modified Gram-Schmidt.
///
/// Columns whose residual norm falls below `tol` (relative to their original
/// norm) are dropped, so the result handles rank-deficient inputs.
pub(crate) fn orthonormal_basis(a: &ArrayView2<f64>, tol: f64) -> Vec<Array1<f64>> {
    let mut basis: Vec<Array1<f64>> = Vec::with_capacity(a.ncols());
    for j in 0..a.ncols() {
        let mut v = a.column(j).to_owned();
        let orig = v.dot(&v).sqrt();
        if orig == 0.0 {
            continue;
        }
        for q in &basis {
            let c = q.dot(&v);
            v.scaled_add(-c, q);
        }
        // second pass for numerical hygiene
        for q in &basis {
            let c = q.dot(&v);
            v.scaled_add(-c, q);
        }
        let nrm = v.dot(&v).sqrt();
        if nrm > tol * orig {
            basis.push(v / nrm);
        }
    }
    basis
}
