//! Principal-component projection of the entity table, for visual inspection.

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::linalg::{sym_eig_top_k, DenseMatrix};

#[derive(Debug, Clone)]
pub struct PcaProjection {
    /// `d × k`, orthonormal columns.
    pub components: DenseMatrix,
    /// Variance along each component, non-increasing.
    pub variances: Vec<f64>,
    /// `N × k` coordinates of every entity.
    pub projections: DenseMatrix,
}

/// Centres the full `N × d` entity matrix and projects it onto the top `k`
/// eigenvectors of its covariance. Each component's sign is fixed so its
/// largest-magnitude loading is positive.
pub fn principal_components(table: &EmbeddingTable, k: usize) -> Result<PcaProjection> {
    let n = table.n_entities();
    let d = table.dim();
    if k > d {
        return Err(Error::Config(format!(
            "cannot extract {k} components from {d}-dimensional embeddings"
        )));
    }
    if n == 0 {
        return Err(Error::Config("empty entity table".into()));
    }
    let mut x = DenseMatrix::new(n, d, table.to_row_major())?;
    let mut mean = vec![0.0; d];
    for r in x.row_iter() {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    for i in 0..n {
        for (v, m) in x.row_mut(i).iter_mut().zip(&mean) {
            *v -= m;
        }
    }

    let gram = x.t_matmul(&x)?;
    // mirror the upper triangle so the covariance is exactly symmetric
    let cov = DenseMatrix::from_fn(d, d, |i, j| {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        gram[(a, b)] / n as f64
    });
    let eig = sym_eig_top_k(&cov, k)?;
    let mut components = eig.vectors;
    for c in 0..k {
        let col = components.column(c);
        let pivot = col.iter().copied().fold(
            0.0_f64,
            |best, v| if v.abs() > best.abs() { v } else { best },
        );
        if pivot < 0.0 {
            for r in 0..d {
                components[(r, c)] = -components[(r, c)];
            }
        }
    }
    let projections = x.matmul(&components)?;
    Ok(PcaProjection {
        components,
        variances: eig.values,
        projections,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_points_keep_their_order() {
        let data = [0.0, 0.0, 1.0, 2.0, 3.0, 6.0];
        let table = EmbeddingTable::from_row_major(3, 2, 2, &data).unwrap();
        let p = principal_components(&table, 1).unwrap();
        let pc1 = p.projections.column(0);
        assert!(pc1[0] < pc1[1] && pc1[1] < pc1[2] || pc1[0] > pc1[1] && pc1[1] > pc1[2]);
    }

    #[test]
    fn too_many_components() {
        let table = EmbeddingTable::zeros(3, 4, 2).unwrap();
        assert!(matches!(
            principal_components(&table, 5),
            Err(Error::Config(_))
        ));
    }
}
