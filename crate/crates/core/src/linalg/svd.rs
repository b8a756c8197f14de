//! One-sided (Hestenes) Jacobi SVD for small square matrices.
//!
//! The blocks solved here are `d_s × d_s` with `d_s` around 20, so the
//! O(k³)-per-sweep cost is irrelevant next to accuracy: Jacobi delivers
//! singular values to high relative accuracy and orthogonal factors to
//! machine precision.

use super::matrix::{dot, DenseMatrix};
use crate::error::{Error, Result};

/// Largest side length accepted by [`svd_square`].
pub const MAX_SVD_DIM: usize = 128;
/// Sweep cap; exceeding it is reported as a numeric error.
pub const MAX_SWEEPS: usize = 100;
/// A column pair is treated as orthogonal once `|⟨a_p, a_q⟩| ≤ TOL·‖a_p‖‖a_q‖`.
const ORTHOGONALITY_TOL: f64 = 1e-14;

/// `a = u · diag(sigma) · vᵀ` with `sigma` non-increasing.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> DenseMatrix {
        let k = self.sigma.len();
        let us = DenseMatrix::from_fn(k, k, |i, j| self.u[(i, j)] * self.sigma[j]);
        us.matmul_t(&self.v).expect("square factors")
    }
}

pub fn svd_square(a: &DenseMatrix) -> Result<SvdResult> {
    let k = a.rows();
    if !a.is_square() {
        return Err(Error::shape(format!(
            "svd_square needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if k == 0 || k > MAX_SVD_DIM {
        return Err(Error::shape(format!(
            "svd_square supports 1..={MAX_SVD_DIM} rows, got {k}"
        )));
    }
    if !a.is_finite() {
        return Err(Error::Numeric(
            "svd_square input has non-finite entries".into(),
        ));
    }

    // Row p of `w` is column p of the working matrix A·V; row p of `vt` is column p of V.
    let mut w = a.transpose();
    let mut vt = DenseMatrix::identity(k);
    // columns at rounding level carry no information; rotating them against
    // each other never settles
    let negligible = {
        let f = (k as f64) * f64::EPSILON * a.frobenius_norm();
        f * f
    };
    let mut converged = k == 1;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..k - 1 {
            for q in p + 1..k {
                let alpha = dot(w.row(p), w.row(p));
                let beta = dot(w.row(q), w.row(q));
                let gamma = dot(w.row(p), w.row(q));
                if gamma == 0.0
                    || alpha <= negligible
                    || beta <= negligible
                    || gamma.abs() <= ORTHOGONALITY_TOL * (alpha * beta).sqrt()
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_rows(&mut w, p, q, c, s);
                rotate_rows(&mut vt, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numeric(format!(
            "Jacobi SVD did not converge within {MAX_SWEEPS} sweeps"
        )));
    }

    let norms: Vec<f64> = w.row_iter().map(|r| dot(r, r).sqrt()).collect();
    let mut order: Vec<usize> = (0..k).collect();
    // stable: equal singular values keep their sweep order
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));

    let sigma: Vec<f64> = order.iter().map(|&p| norms[p]).collect();
    let cutoff = sigma[0] * (k as f64) * f64::EPSILON;

    // Columns of U and V, in sorted order, stored as rows.
    let mut ut = DenseMatrix::zeros(k, k);
    let mut vt_sorted = DenseMatrix::zeros(k, k);
    for (dst, &p) in order.iter().enumerate() {
        vt_sorted.row_mut(dst).copy_from_slice(vt.row(p));
    }
    for (dst, &p) in order.iter().enumerate() {
        let s = sigma[dst];
        let mut col: Vec<f64> = if s > cutoff && s > 0.0 {
            w.row(p).iter().map(|x| x / s).collect()
        } else {
            Vec::new()
        };
        if !col.is_empty() && orthonormalise_against(&mut col, &ut, dst) {
            ut.row_mut(dst).copy_from_slice(&col);
        } else {
            col = complete_basis(&ut, dst, k);
            ut.row_mut(dst).copy_from_slice(&col);
        }
    }

    Ok(SvdResult {
        u: ut.transpose(),
        sigma,
        v: vt_sorted.transpose(),
    })
}

fn rotate_rows(m: &mut DenseMatrix, p: usize, q: usize, c: f64, s: f64) {
    let cols = m.cols();
    let data = m.as_mut_slice();
    let (head, tail) = data.split_at_mut(q * cols);
    let rp = &mut head[p * cols..(p + 1) * cols];
    let rq = &mut tail[..cols];
    for (a, b) in rp.iter_mut().zip(rq.iter_mut()) {
        let (x, y) = (*a, *b);
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}

/// Two passes of modified Gram-Schmidt against the first `count` rows of
/// `basis`, then normalisation. Returns false if the vector vanished.
fn orthonormalise_against(v: &mut [f64], basis: &DenseMatrix, count: usize) -> bool {
    let start = dot(v, v).sqrt();
    for _ in 0..2 {
        for i in 0..count {
            let b = basis.row(i);
            let proj = dot(v, b);
            for (x, y) in v.iter_mut().zip(b) {
                *x -= proj * y;
            }
        }
    }
    let n = dot(v, v).sqrt();
    if n <= 0.5 * start || n == 0.0 {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= n);
    true
}

/// Picks the standard basis vector with the largest component outside the
/// span of the existing columns and orthonormalises it.
fn complete_basis(basis: &DenseMatrix, count: usize, k: usize) -> Vec<f64> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for e in 0..k {
        let mut v = vec![0.0; k];
        v[e] = 1.0;
        for _ in 0..2 {
            for i in 0..count {
                let b = basis.row(i);
                let proj = dot(&v, b);
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= proj * y;
                }
            }
        }
        let n = dot(&v, &v).sqrt();
        if best.as_ref().is_none_or(|(bn, _)| n > *bn) {
            best = Some((n, v));
        }
    }
    let (n, mut v) = best.expect("k >= 1");
    v.iter_mut().for_each(|x| *x /= n);
    v
}
