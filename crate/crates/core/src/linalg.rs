//! Dense complex subspace helpers built on SVD.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Relative singular-value cutoff for rank decisions.
pub const TAU_RANK: f64 = 1e-9;
/// Relative residual cutoff for membership decisions.
pub const TAU_RES: f64 = 1e-9;

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn largest(s: &DVector<f64>) -> f64 {
    s.iter().cloned().fold(0.0, f64::max)
}

// Inputs built from orthonormal bases have scale about 1, so the cutoff never
// drops below `tol`; otherwise a numerically zero block would count as full rank.
fn svd_threshold(s: &DVector<f64>, tol: f64) -> f64 {
    tol * largest(s).max(1.0)
}

/// Reconstruction tolerance, relative to `‖a‖_F`, for accepting an SVD.
const SVD_CHECK: f64 = 1e-11;
const JACOBI_SWEEPS: usize = 80;

/// Thin SVD `a = u·diag(s)·vᴴ`. The LAPACK-free nalgebra routine occasionally
/// returns a wrong factorization for rank-deficient inputs, so each result is
/// verified; on failure the adjoint is tried, then one-sided Jacobi.
pub fn svd(a: &CMat) -> (CMat, DVector<f64>, CMat) {
    let scale = a.norm();
    let ok = |u: &CMat, s: &DVector<f64>, v: &CMat| {
        let rec = u * CMat::from_diagonal(&s.map(c)) * v.adjoint();
        (rec - a).norm() <= SVD_CHECK * scale
    };
    let d = a.clone().svd(true, true);
    let (u, s, v) = (d.u.expect("requested u"), d.singular_values, d.v_t.expect("requested v_t").adjoint());
    if ok(&u, &s, &v) {
        return (u, s, v);
    }
    let d = a.adjoint().svd(true, true);
    let (u, s, v) = (d.v_t.expect("requested v_t").adjoint(), d.singular_values, d.u.expect("requested u"));
    if ok(&u, &s, &v) {
        return (u, s, v);
    }
    jacobi_svd(a)
}

/// One-sided (Hestenes) Jacobi SVD.
fn jacobi_svd(a: &CMat) -> (CMat, DVector<f64>, CMat) {
    let (m, n) = a.shape();
    if m < n {
        let (u, s, v) = jacobi_svd(&a.adjoint());
        return (v, s, u);
    }
    let mut w = a.clone();
    let mut v = CMat::identity(n, n);
    for _ in 0..JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dotc(&w.column(q));
                let g = gamma.norm();
                if g <= f64::EPSILON * (alpha * beta).sqrt() || g == 0.0 {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for mat in [&mut w, &mut v] {
                    let cp = mat.column(p).into_owned();
                    let cq = mat.column(q) * phase.conj();
                    mat.set_column(p, &(&cp * c(cs) - &cq * c(sn)));
                    mat.set_column(q, &(&cp * c(sn) + &cq * c(cs)));
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let s = DVector::from_iterator(n, (0..n).map(|j| w.column(j).norm()));
    let mut u = CMat::zeros(m, n);
    for j in 0..n {
        if s[j] > 0.0 {
            u.set_column(j, &(w.column(j) / c(s[j])));
        }
    }
    (u, s, v)
}

/// Orthonormal basis of the column span of `a` (for inputs of scale about 1).
pub fn orth(a: &CMat) -> CMat {
    orth_impl(a, |s| svd_threshold(s, TAU_RANK))
}

/// Orthonormal basis with a cutoff relative to the largest singular value only.
pub fn orth_relative(a: &CMat) -> CMat {
    orth_impl(a, |s| TAU_RANK * largest(s))
}

fn orth_impl(a: &CMat, cutoff: impl Fn(&DVector<f64>) -> f64) -> CMat {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return CMat::zeros(m, 0);
    }
    let (u, s, _) = svd(a);
    let thr = cutoff(&s);
    let keep: Vec<usize> = (0..s.len()).filter(|&i| s[i] > thr && s[i] > 0.0).collect();
    select_columns(&u, &keep)
}

/// Orthonormal basis of `ker a`.
pub fn null_space(a: &CMat) -> CMat {
    null_space_tol(a, TAU_RANK)
}

pub fn null_space_tol(a: &CMat, tol: f64) -> CMat {
    null_space_impl(a, |s| svd_threshold(s, tol))
}

/// Null space keeping singular values `<= thr` (an absolute cutoff).
pub fn null_space_abs(a: &CMat, thr: f64) -> CMat {
    null_space_impl(a, |_| thr)
}

fn null_space_impl(a: &CMat, cutoff: impl Fn(&DVector<f64>) -> f64) -> CMat {
    let (m, n) = a.shape();
    if n == 0 {
        return CMat::zeros(0, 0);
    }
    if m == 0 {
        return CMat::identity(n, n);
    }
    let square = if m < n {
        let mut p = CMat::zeros(n, n);
        p.rows_mut(0, m).copy_from(a);
        p
    } else {
        a.clone()
    };
    let (_, s, v) = svd(&square);
    let thr = cutoff(&s);
    let keep: Vec<usize> = (0..s.len()).filter(|&i| s[i] <= thr).collect();
    select_columns(&v, &keep)
}

pub fn rank(a: &CMat) -> usize {
    orth(a).ncols()
}

pub fn select_columns(a: &CMat, idx: &[usize]) -> CMat {
    let mut out = CMat::zeros(a.nrows(), idx.len());
    for (j, &i) in idx.iter().enumerate() {
        out.set_column(j, &a.column(i));
    }
    out
}

pub fn hcat(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.nrows(), b.nrows());
    let mut out = CMat::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

pub fn vcat(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.ncols(), b.ncols());
    let mut out = CMat::zeros(a.nrows() + b.nrows(), a.ncols());
    out.rows_mut(0, a.nrows()).copy_from(a);
    out.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    out
}

/// Orthonormal basis of `span U ∩ span V` for orthonormal `U`, `V`.
pub fn intersect(u: &CMat, v: &CMat) -> CMat {
    if u.ncols() == 0 || v.ncols() == 0 {
        return CMat::zeros(u.nrows(), 0);
    }
    let stacked = hcat(u, &(-v));
    let ns = null_space(&stacked);
    let coeff = ns.rows(0, u.ncols()).into_owned();
    orth(&(u * coeff))
}

/// Orthonormal basis of the orthogonal complement of `span U` in `K^n`.
pub fn complement(u: &CMat, n: usize) -> CMat {
    if u.ncols() == 0 {
        return CMat::identity(n, n);
    }
    null_space(&u.adjoint())
}

/// `span V ⊆ span U`.
pub fn contains(u: &CMat, v: &CMat) -> bool {
    if v.ncols() == 0 {
        return true;
    }
    rank(&hcat(u, v)) == rank(u)
}

pub fn subspace_eq(u: &CMat, v: &CMat) -> bool {
    let (ru, rv) = (rank(u), rank(v));
    ru == rv && rank(&hcat(u, v)) == ru
}

/// Norm of the component of `x` orthogonal to the span of orthonormal `u`.
pub fn residual(u: &CMat, x: &CVec) -> f64 {
    if u.ncols() == 0 {
        return x.norm();
    }
    let proj = u * (u.adjoint() * x);
    (x - proj).norm()
}

pub fn smallest_singular_value(a: &CMat) -> f64 {
    let (m, n) = a.shape();
    if n == 0 {
        return f64::INFINITY;
    }
    if m < n {
        return 0.0;
    }
    a.clone().singular_values().iter().cloned().fold(f64::INFINITY, f64::min)
}

pub fn largest_singular_value(a: &CMat) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    a.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

pub fn from_real_rows(rows: &[Vec<f64>]) -> CMat {
    let m = rows.len();
    let n = rows.first().map_or(0, |r| r.len());
    CMat::from_fn(m, n, |i, j| c(rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svd_survives_rank_deficient_zero_one_matrix() {
        // 0/1 pair-span matrix on which the plain nalgebra SVD misreconstructs.
        let pairs = [(0, 1), (1, 3), (1, 4), (2, 3), (3, 0), (3, 2), (3, 4), (4, 0), (4, 5), (5, 0), (5, 2), (5, 4)];
        let mut g = CMat::zeros(12, pairs.len());
        for (j, &(x, y)) in pairs.iter().enumerate() {
            g[(x, j)] = c(1.0);
            g[(6 + y, j)] = c(1.0);
        }
        let (u, s, v) = svd(&g);
        let rec = &u * CMat::from_diagonal(&s.map(c)) * v.adjoint();
        assert!((rec - &g).norm() < 1e-12);
        let q = orth(&g);
        assert_eq!(q.ncols(), 10);
        for j in 0..g.ncols() {
            assert!(residual(&q, &g.column(j).into_owned()) < 1e-12);
        }
        let (ju, js, jv) = jacobi_svd(&g);
        let rec = &ju * CMat::from_diagonal(&js.map(c)) * jv.adjoint();
        assert!((rec - &g).norm() < 1e-12);
    }

    #[test]
    fn null_space_of_wide_matrix() {
        let a = from_real_rows(&[vec![1.0, 1.0, 0.0]]);
        let ns = null_space(&a);
        assert_eq!(ns.ncols(), 2);
        assert!((&a * &ns).norm() < 1e-12);
    }

    #[test]
    fn intersection_of_planes() {
        let u = orth(&from_real_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]]));
        let v = orth(&from_real_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]));
        let w = intersect(&u, &v);
        assert_eq!(w.ncols(), 1);
        assert!((w[(1, 0)].norm() - 1.0).abs() < 1e-12);
        assert!(contains(&u, &w) && contains(&v, &w));
        assert!(!subspace_eq(&u, &v));
        assert_eq!(complement(&u, 3).ncols(), 1);
    }
}
