//! Dense complex linear algebra helpers on top of nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Singular values in decreasing order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

pub fn spectral_norm(m: &CMat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Smallest singular value of a square matrix, or of the map for a tall
/// matrix (zero when the matrix is wide).
pub fn min_singular_value(m: &CMat) -> f64 {
    if m.ncols() == 0 {
        return f64::INFINITY;
    }
    if m.ncols() > m.nrows() {
        return 0.0;
    }
    singular_values(m).last().copied().unwrap_or(0.0)
}

/// Singular values below this are treated as zero regardless of scale.
pub const ABS_RANK_FLOOR: f64 = 1e-13;

fn rank_threshold(s: &[f64], rel_tol: f64) -> f64 {
    let top = s.first().copied().unwrap_or(0.0);
    (rel_tol * top).max(ABS_RANK_FLOOR)
}

/// Numerical rank with a threshold relative to the largest singular value.
pub fn rank(m: &CMat, rel_tol: f64) -> usize {
    let s = singular_values(m);
    if s.is_empty() || s[0] == 0.0 {
        return 0;
    }
    let t = rank_threshold(&s, rel_tol);
    s.iter().filter(|&&x| x > t).count()
}

/// Orthonormal basis of the column space.
pub fn orth(m: &CMat, rel_tol: f64) -> CMat {
    let n = m.nrows();
    if m.ncols() == 0 || n == 0 {
        return CMat::zeros(n, 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("u requested");
    let s = svd.singular_values;
    let top = s.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return CMat::zeros(n, 0);
    }
    let t = (rel_tol * top).max(ABS_RANK_FLOOR);
    let keep: Vec<usize> = (0..s.len()).filter(|&i| s[i] > t).collect();
    let mut q = CMat::zeros(n, keep.len());
    for (j, &i) in keep.iter().enumerate() {
        q.set_column(j, &u.column(i));
    }
    q
}

/// Orthogonal projector onto the span of the orthonormal columns of `q`.
pub fn orth_projector(q: &CMat) -> CMat {
    q * q.adjoint()
}

/// Orthonormal basis of the orthogonal complement of span(q) in C^n.
pub fn orth_complement(q: &CMat, rel_tol: f64) -> CMat {
    orth_complement_of(&orth(q, rel_tol), q.nrows())
}

/// Orthonormal basis of the null space.
pub fn null_space(m: &CMat, rel_tol: f64) -> CMat {
    let rows_basis = orth(&m.adjoint(), rel_tol);
    orth_complement_of(&rows_basis, m.ncols())
}

fn orth_complement_of(q: &CMat, n: usize) -> CMat {
    if q.ncols() == 0 {
        return identity(n);
    }
    let p = identity(n) - orth_projector(q);
    orth(&p, 1e-8)
}

pub fn hcat(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.nrows(), b.nrows());
    let mut out = CMat::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

/// Orthonormal basis of span(a) intersected with span(b).
pub fn intersection(a: &CMat, b: &CMat, rel_tol: f64) -> CMat {
    let n = a.nrows();
    let qa = orth(a, rel_tol);
    let qb = orth(b, rel_tol);
    if qa.ncols() == 0 || qb.ncols() == 0 {
        return CMat::zeros(n, 0);
    }
    let stacked = hcat(&qa, &(-&qb));
    // Null vectors of [Qa, -Qb] have small singular values; use an absolute
    // threshold since both blocks are orthonormal.
    let svd = stacked.clone().svd(false, true);
    let vt = svd.v_t.expect("v requested");
    let s = svd.singular_values;
    let k = qa.ncols() + qb.ncols();
    let mut cols = Vec::new();
    // thin SVD: rows of vt are right singular vectors for min(n, k) values
    for i in 0..s.len() {
        if s[i] <= rel_tol.max(1e-10) {
            cols.push(vt.row(i).adjoint());
        }
    }
    // when k > n the missing right singular vectors are null vectors too
    if k > s.len() {
        let rows = orth(&vt.adjoint(), 1e-12);
        let extra = orth_complement_of(&rows, k);
        for j in 0..extra.ncols() {
            cols.push(extra.column(j).into_owned());
        }
    }
    if cols.is_empty() {
        return CMat::zeros(n, 0);
    }
    let mut x = CMat::zeros(n, cols.len());
    for (j, v) in cols.iter().enumerate() {
        let xa = v.rows(0, qa.ncols()).into_owned();
        x.set_column(j, &(&qa * xa));
    }
    orth(&x, 1e-8)
}

pub fn sum(a: &CMat, b: &CMat, rel_tol: f64) -> CMat {
    orth(&hcat(a, b), rel_tol)
}

/// Gap between subspaces: norm of the difference of orthogonal projectors,
/// which equals the sine of the largest principal angle (1 if dimensions
/// differ).
pub fn gap(a: &CMat, b: &CMat, rel_tol: f64) -> f64 {
    let qa = orth(a, rel_tol);
    let qb = orth(b, rel_tol);
    if qa.ncols() != qb.ncols() {
        return 1.0;
    }
    if qa.ncols() == 0 {
        return 0.0;
    }
    spectral_norm(&(orth_projector(&qa) - orth_projector(&qb)))
}

pub fn inverse(m: &CMat, what: &str) -> Result<CMat> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "{what}: cannot invert {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    let s = singular_values(m);
    let top = s.first().copied().unwrap_or(0.0);
    let low = s.last().copied().unwrap_or(0.0);
    if top == 0.0 || low <= 1e-14 * top {
        return Err(Error::Singular(what.to_string()));
    }
    m.clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Singular(what.to_string()))
}

/// Solve m x = b.
pub fn solve(m: &CMat, b: &CMat, what: &str) -> Result<CMat> {
    m.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Singular(what.to_string()))
}

/// Residual of idempotence in the spectral norm.
pub fn idempotence_residual(p: &CMat) -> f64 {
    spectral_norm(&(p * p - p))
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

/// Complex Schur decomposition m = q t q^*, t upper triangular.
pub fn schur(m: &CMat) -> (CMat, CMat) {
    m.clone().schur().unpack()
}

pub fn eigenvalues(m: &CMat) -> Vec<C64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let (_, t) = schur(m);
    (0..t.nrows()).map(|i| t[(i, i)]).collect()
}

/// Newton iteration for the matrix sign function with determinant scaling.
pub fn matrix_sign(m: &CMat) -> Result<CMat> {
    let n = m.nrows();
    if n == 0 {
        return Ok(m.clone());
    }
    let mut x = m.clone();
    for it in 0..200 {
        let xi = inverse(&x, "matrix sign iteration")?;
        let scale = if it < 8 {
            let d = x.determinant().norm();
            let di = xi.determinant().norm();
            let g = (di / d).powf(0.5 / n as f64);
            if g.is_finite() && g > 0.0 {
                g
            } else {
                1.0
            }
        } else {
            1.0
        };
        let next = (&x * C64::from(scale) + &xi * C64::from(1.0 / scale)) * C64::from(0.5);
        let delta = (&next - &x).norm();
        let size = next.norm();
        x = next;
        if delta <= 1e-14 * size.max(1.0) && it >= 2 {
            return Ok(x);
        }
    }
    let residual = (&x * &x - identity(n)).norm();
    if residual < 1e-9 {
        Ok(x)
    } else {
        Err(Error::numerical(
            "matrix sign",
            format!("Newton iteration did not converge (|S^2 - I| = {residual:e})"),
        ))
    }
}

/// Spectral projector onto the invariant subspace for eigenvalues with
/// positive imaginary part. Works through the Schur factor, so defective
/// matrices are handled without eigenvectors.
pub fn upper_half_plane_projector(m: &CMat, margin: f64) -> Result<CMat> {
    let n = m.nrows();
    let (q, t) = schur(m);
    let scale = t.norm().max(1.0);
    for i in 0..n {
        if t[(i, i)].im.abs() <= margin * scale {
            return Err(Error::NotElliptic {
                context: format!("eigenvalue {} near the real axis", t[(i, i)]),
                margin: t[(i, i)].im.abs(),
            });
        }
    }
    let s = matrix_sign(&(&t * (-I)))?;
    let pt = (identity(n) + s) * C64::from(0.5);
    Ok(&q * pt * q.adjoint())
}

/// Spectral projector onto the eigenvalues with real part above `cut`.
pub fn right_of_projector(m: &CMat, cut: f64, margin: f64) -> Result<CMat> {
    let shifted = m - identity(m.nrows()) * C64::from(cut);
    let rotated = &shifted * I;
    upper_half_plane_projector(&rotated, margin)
}

/// Riesz projection (1/2 pi i) closed integral of (z - m)^{-1} over a circle,
/// trapezoidal rule with `n` nodes.
pub fn riesz_projector(m: &CMat, center: C64, radius: f64, n: usize) -> Result<CMat> {
    let dim = m.nrows();
    if radius <= 0.0 || n < 8 {
        return Err(Error::InvalidInput(format!(
            "contour needs positive radius and at least 8 nodes (got r = {radius}, n = {n})"
        )));
    }
    for ev in eigenvalues(m) {
        let d = ((ev - center).norm() - radius).abs();
        if d < 1e-8 * radius.max(1.0) {
            return Err(Error::Contour(format!(
                "eigenvalue {ev} lies on the contour (distance {d:e})"
            )));
        }
    }
    let mut acc = CMat::zeros(dim, dim);
    for q in 0..n {
        let theta = 2.0 * std::f64::consts::PI * (q as f64) / (n as f64);
        let w = C64::from_polar(radius, theta);
        let z = center + w;
        let r = inverse(&(identity(dim) * z - m), "resolvent on contour")?;
        acc += r * (w / n as f64);
    }
    Ok(acc)
}

/// Oblique projector onto span(range) along span(kernel).
pub fn oblique_projector(range: &CMat, kernel: &CMat) -> Result<CMat> {
    let n = range.nrows();
    if range.ncols() + kernel.ncols() != n {
        return Err(Error::Dimension(format!(
            "range ({}) and kernel ({}) do not add up to {n}",
            range.ncols(),
            kernel.ncols()
        )));
    }
    let t = hcat(range, kernel);
    let ti = inverse(&t, "oblique projector frame")?;
    let mut d = CMat::zeros(n, n);
    for i in 0..range.ncols() {
        d[(i, i)] = C64::from(1.0);
    }
    Ok(&t * d * ti)
}

/// Smallest singular value of [orth(a), orth(b)]: zero when the subspaces are
/// not transversal.
pub fn transversality_margin(a: &CMat, b: &CMat) -> f64 {
    let qa = orth(a, 1e-10);
    let qb = orth(b, 1e-10);
    min_singular_value(&hcat(&qa, &qb))
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn block_diag(blocks: &[CMat]) -> CMat {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMat::zeros(rows, cols);
    let (mut r, mut c0) = (0, 0);
    for b in blocks {
        out.view_mut((r, c0), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c0 += b.ncols();
    }
    out
}

pub fn diag(values: &[C64]) -> CMat {
    let n = values.len();
    let mut out = CMat::zeros(n, n);
    for (i, v) in values.iter().enumerate() {
        out[(i, i)] = *v;
    }
    out
}

pub fn from_real_rows(rows: &[&[f64]]) -> CMat {
    let n = rows.len();
    let m = rows.first().map(|r| r.len()).unwrap_or(0);
    CMat::from_fn(n, m, |i, j| C64::from(rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn jordan(lambda: C64, n: usize) -> CMat {
        let mut m = identity(n) * lambda;
        for i in 0..n - 1 {
            m[(i, i + 1)] = C64::from(1.0);
        }
        m
    }

    #[test]
    fn sign_projector_handles_jordan_block() {
        let mut m = CMat::zeros(4, 4);
        m.view_mut((0, 0), (2, 2)).copy_from(&jordan(c(0.3, 1.0), 2));
        m.view_mut((2, 2), (2, 2)).copy_from(&jordan(c(-0.2, -2.0), 2));
        let p = upper_half_plane_projector(&m, 1e-10).unwrap();
        let mut expected = CMat::zeros(4, 4);
        expected[(0, 0)] = C64::from(1.0);
        expected[(1, 1)] = C64::from(1.0);
        assert!(max_abs_diff(&p, &expected) < 1e-12);
    }

    #[test]
    fn riesz_matches_sign_projector() {
        let m = from_real_rows(&[&[1.0, 2.0, 0.0], &[0.0, -1.0, 1.0], &[0.5, 0.0, 3.0]]);
        let p = riesz_projector(&m, c(3.0, 0.0), 1.5, 512).unwrap();
        let q = right_of_projector(&m, 2.0, 1e-10).unwrap();
        assert!(max_abs_diff(&p, &q) < 1e-10);
        assert!(idempotence_residual(&p) < 1e-10);
    }

    #[test]
    fn riesz_rejects_eigenvalue_on_contour() {
        let m = diag(&[c(1.0, 0.0), c(2.0, 0.0)]);
        assert!(matches!(
            riesz_projector(&m, c(0.0, 0.0), 1.0, 64),
            Err(Error::Contour(_))
        ));
    }

    #[test]
    fn intersection_of_planes() {
        let a = from_real_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[0.0, 0.0]]);
        let b = from_real_rows(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]);
        let x = intersection(&a, &b, 1e-10);
        assert_eq!(x.ncols(), 1);
        assert!((x[(1, 0)].norm() - 1.0).abs() < 1e-12);
        let wide = intersection(&identity(3), &b, 1e-10);
        assert_eq!(wide.ncols(), 2);
    }

    #[test]
    fn null_space_and_complement() {
        let m = from_real_rows(&[&[1.0, 1.0, 0.0]]);
        let k = null_space(&m, 1e-10);
        assert_eq!(k.ncols(), 2);
        assert!((&m * &k).norm() < 1e-12);
        let q = orth_complement(&k, 1e-10);
        assert_eq!(q.ncols(), 1);
    }

    #[test]
    fn gap_of_rotated_lines() {
        let a = from_real_rows(&[&[1.0], &[0.0]]);
        let t = 0.3f64;
        let b = from_real_rows(&[&[t.cos()], &[t.sin()]]);
        assert!((gap(&a, &b, 1e-10) - t.sin()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn sign_projector_is_idempotent_and_commutes(
            entries in proptest::collection::vec(-2.0f64..2.0, 18)
        ) {
            let m = CMat::from_fn(3, 3, |i, j| c(entries[3 * i + j], entries[9 + 3 * i + j]));
            let evs = eigenvalues(&m);
            prop_assume!(evs.iter().all(|e| e.im.abs() > 1e-3));
            let p = upper_half_plane_projector(&m, 1e-12).unwrap();
            prop_assert!(idempotence_residual(&p) < 1e-8);
            prop_assert!(commutator(&p, &m).norm() < 1e-8 * m.norm().max(1.0));
            let upper = evs.iter().filter(|e| e.im > 0.0).count();
            prop_assert_eq!(rank(&p, 1e-8), upper);
        }
    }
}
