//! Dense helpers shared by every module: the numerical-rank rule, SVD-based
//! pseudo-inverses, column-space bases and subspace comparisons.
//!
//! A singular value `s` counts towards the rank of an `r x c` matrix iff
//! `s > tol * max(r, c) * s_max`.

use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{dim_err, Result};

/// Relative tolerance of the numerical-rank rule.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

fn is_empty(m: &DMatrix<f64>) -> bool {
    m.nrows() == 0 || m.ncols() == 0
}

/// Singular values in non-increasing order.
pub fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    if is_empty(m) {
        return DVector::zeros(0);
    }
    SVD::new(m.clone(), false, false).singular_values
}

pub fn rank_threshold(rows: usize, cols: usize, s_max: f64, tol: f64) -> f64 {
    tol * rows.max(cols) as f64 * s_max
}

pub fn numerical_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    let sv = singular_values(m);
    if sv.is_empty() {
        return 0;
    }
    let thr = rank_threshold(m.nrows(), m.ncols(), sv[0], tol);
    sv.iter().filter(|&&s| s > thr).count()
}

/// Thin SVD truncated to the leading singular values accepted by `keep(s, s_max)`.
/// Returns `(U_r, s_r, V_r)`.
fn truncated_svd(m: &DMatrix<f64>, keep: impl Fn(f64, f64) -> bool) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    if is_empty(m) {
        return (
            DMatrix::zeros(m.nrows(), 0),
            DVector::zeros(0),
            DMatrix::zeros(m.ncols(), 0),
        );
    }
    let svd = SVD::new(m.clone(), true, true);
    let s = &svd.singular_values;
    let s_max = s[0];
    let r = s.iter().take_while(|&&v| keep(v, s_max)).count();
    let u = svd.u.as_ref().unwrap().columns(0, r).into_owned();
    let vt = svd.v_t.as_ref().unwrap().rows(0, r).into_owned();
    (u, s.rows(0, r).into_owned(), vt.transpose())
}

fn pinv_from(u: DMatrix<f64>, s: DVector<f64>, v: DMatrix<f64>) -> DMatrix<f64> {
    let mut vs = v;
    for (j, sj) in s.iter().enumerate() {
        vs.column_mut(j).scale_mut(1.0 / sj);
    }
    vs * u.transpose()
}

/// Moore-Penrose pseudo-inverse with the relative rank rule.
pub fn pinv(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    let (u, s, v) = truncated_svd(m, |sv, s_max| sv > rank_threshold(rows, cols, s_max, tol));
    pinv_from(u, s, v)
}

/// Pseudo-inverse that treats every singular value below `threshold` as zero.
pub fn pinv_abs(m: &DMatrix<f64>, threshold: f64) -> DMatrix<f64> {
    let (u, s, v) = truncated_svd(m, |sv, _| sv >= threshold && sv > 0.0);
    pinv_from(u, s, v)
}

/// Orthonormal basis of the column span, using the relative rank rule.
pub fn column_basis(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    truncated_svd(m, |sv, s_max| sv > rank_threshold(rows, cols, s_max, tol)).0
}

/// Rank-revealing factorisation `m ~= U_r diag(s_r) V_r^T` under the relative rule.
pub fn rank_factor(m: &DMatrix<f64>, tol: f64) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let (rows, cols) = m.shape();
    truncated_svd(m, |sv, s_max| sv > rank_threshold(rows, cols, s_max, tol))
}

/// Full set of left singular vectors (`rows x rows`) together with one singular
/// value per column; directions beyond `min(rows, cols)` carry the value 0.
pub fn full_left_singular(m: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let rows = m.nrows();
    if rows == 0 {
        return (DMatrix::zeros(0, 0), Vec::new());
    }
    let padded = if m.ncols() >= rows {
        m.clone()
    } else {
        let mut p = DMatrix::zeros(rows, rows);
        p.columns_mut(0, m.ncols()).copy_from(m);
        p
    };
    let svd = SVD::new(padded, true, false);
    let u = svd.u.unwrap();
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.resize(rows, 0.0);
    (u.columns(0, rows).into_owned(), sv)
}

pub fn vstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        assert_eq!(b.ncols(), cols, "vstack: column mismatch");
        out.rows_mut(r, b.nrows()).copy_from(*b);
        r += b.nrows();
    }
    out
}

pub fn hstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        assert_eq!(b.nrows(), rows, "hstack: row mismatch");
        out.columns_mut(c, b.ncols()).copy_from(*b);
        c += b.ncols();
    }
    out
}

pub fn vconcat(parts: &[&DVector<f64>]) -> DVector<f64> {
    let len: usize = parts.iter().map(|p| p.len()).sum();
    let mut out = DVector::zeros(len);
    let mut k = 0;
    for p in parts {
        out.rows_mut(k, p.len()).copy_from(*p);
        k += p.len();
    }
    out
}

/// `I_k (x) w`: the block-diagonal repetition of a square weight.
pub fn block_diag_repeat(w: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let (r, c) = w.shape();
    let mut out = DMatrix::zeros(r * k, c * k);
    for i in 0..k {
        out.view_mut((i * r, i * c), (r, c)).copy_from(w);
    }
    out
}

/// `ColSpan(m1) == ColSpan(m2)` under the numerical-rank rule.
///
/// Both spans are first reduced to orthonormal bases, so the comparison is
/// insensitive to the relative scaling of `m1` and `m2`.
pub fn subspace_equal(m1: &DMatrix<f64>, m2: &DMatrix<f64>, tol: f64) -> Result<bool> {
    if m1.nrows() != m2.nrows() {
        return Err(dim_err(format!(
            "subspace_equal: {} rows vs {} rows",
            m1.nrows(),
            m2.nrows()
        )));
    }
    let b1 = column_basis(m1, tol);
    let b2 = column_basis(m2, tol);
    if b1.ncols() != b2.ncols() {
        return Ok(false);
    }
    let joint = numerical_rank(&hstack(&[&b1, &b2]), tol);
    Ok(joint == b1.ncols())
}

/// `ColSpan(sub) ⊆ ColSpan(sup)` under the numerical-rank rule.
pub fn span_contains(sup: &DMatrix<f64>, sub: &DMatrix<f64>, tol: f64) -> Result<bool> {
    if sup.nrows() != sub.nrows() {
        return Err(dim_err(format!(
            "span_contains: {} rows vs {} rows",
            sup.nrows(),
            sub.nrows()
        )));
    }
    let b1 = column_basis(sup, tol);
    let b2 = column_basis(sub, tol);
    let joint = numerical_rank(&hstack(&[&b1, &b2]), tol);
    Ok(joint == b1.ncols())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rank_of_zero_and_empty() {
        assert_eq!(numerical_rank(&DMatrix::zeros(3, 4), DEFAULT_RANK_TOL), 0);
        assert_eq!(numerical_rank(&DMatrix::zeros(0, 4), DEFAULT_RANK_TOL), 0);
    }

    #[test]
    fn rank_ignores_roundoff() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let mut m = hstack(&[&a, &(&a * DMatrix::from_row_slice(2, 1, &[1.0, -2.0]))]);
        m[(0, 2)] += 1e-15;
        assert_eq!(numerical_rank(&m, DEFAULT_RANK_TOL), 2);
    }

    #[test]
    fn pinv_of_rank_deficient() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let p = pinv(&m, DEFAULT_RANK_TOL);
        assert_relative_eq!(p, DMatrix::from_element(2, 2, 0.25), epsilon = 1e-14);
    }

    #[test]
    fn pinv_abs_drops_small_values() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.4]));
        let p = pinv_abs(&m, 0.5);
        assert_relative_eq!(p[(0, 0)], 0.5);
        assert_eq!(p[(1, 1)], 0.0);
    }

    #[test]
    fn full_left_singular_completes_basis() {
        let m = DMatrix::from_row_slice(4, 1, &[1.0, 0.0, 0.0, 0.0]);
        let (u, sv) = full_left_singular(&m);
        assert_eq!(u.shape(), (4, 4));
        assert_eq!(sv.len(), 4);
        assert_relative_eq!(&u.transpose() * &u, DMatrix::identity(4, 4), epsilon = 1e-12);
        assert_relative_eq!(sv[0], 1.0, epsilon = 1e-14);
        assert!(sv[1..].iter().all(|&s| s == 0.0));
    }

    #[test]
    fn subspace_equal_basic() {
        let i3 = DMatrix::<f64>::identity(3, 3);
        assert!(subspace_equal(&i3, &i3, DEFAULT_RANK_TOL).unwrap());
        let e1 = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        let e2 = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        assert!(!subspace_equal(&e1, &e2, DEFAULT_RANK_TOL).unwrap());
        assert!(subspace_equal(&e1, &e1.scale(1e6), DEFAULT_RANK_TOL).unwrap());
        assert!(subspace_equal(&e1, &DMatrix::zeros(3, 1), DEFAULT_RANK_TOL).is_err());
    }

    #[test]
    fn containment() {
        let big = DMatrix::<f64>::identity(3, 2);
        let small = DMatrix::from_row_slice(3, 1, &[1.0, 1.0, 0.0]);
        assert!(span_contains(&big, &small, DEFAULT_RANK_TOL).unwrap());
        assert!(!span_contains(&small, &big, DEFAULT_RANK_TOL).unwrap());
    }
}
