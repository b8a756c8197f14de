use rand::Rng;
use rand_distr::StandardNormal;

use super::matrix::{dot, DenseMatrix};
use crate::error::{Error, Result};

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Samples a `k × k` orthogonal matrix by Gram-Schmidt QR of a Gaussian
/// matrix. The Q factor is taken with a positive-diagonal R, which is the
/// sign correction that makes the draw Haar distributed.
pub fn random_orthogonal<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Result<DenseMatrix> {
    if k == 0 {
        return Err(Error::shape("random_orthogonal needs k >= 1"));
    }
    loop {
        // columns of the Gaussian matrix, stored as rows
        let g = gaussian_matrix(k, k, rng);
        let mut q = DenseMatrix::zeros(k, k);
        let mut ok = true;
        for i in 0..k {
            let mut col = g.row(i).to_vec();
            for _ in 0..2 {
                for j in 0..i {
                    let b = q.row(j);
                    let proj = dot(&col, b);
                    for (x, y) in col.iter_mut().zip(b) {
                        *x -= proj * y;
                    }
                }
            }
            let n = dot(&col, &col).sqrt();
            if n < 1e-8 {
                ok = false;
                break;
            }
            col.iter_mut().for_each(|x| *x /= n);
            q.row_mut(i).copy_from_slice(&col);
        }
        if ok {
            return Ok(q.transpose());
        }
    }
}
