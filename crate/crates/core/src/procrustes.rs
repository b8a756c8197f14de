//! Closed-form orthogonal Procrustes solve per (relation, subspace) cell,
//! plus a Gram-Schmidt orthonormaliser kept as a comparison baseline.
//!
//! Given head and tail panels `H`, `T` (both `n × d_s`), the orthogonal
//! matrix minimising `‖H R − T‖_F` is `R* = U Vᵀ` where `U Σ Vᵀ = SVD(Hᵀ T)`.
//! Reflections (`det R* = −1`) are allowed. With `d_s = 2` and `det = +1`
//! this family reduces to a planar rotation by a single angle.

use crate::error::{Error, Result};
use crate::linalg::{dot, svd_square, DenseMatrix};

/// Orthogonal relation blocks, one per (relation, subspace) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationSet {
    n_relations: usize,
    n_subspaces: usize,
    d_s: usize,
    /// Relation-major: cell `(i, j)` lives at `i * n_subspaces + j`.
    blocks: Vec<DenseMatrix>,
}

impl RelationSet {
    pub fn identity(n_relations: usize, n_subspaces: usize, d_s: usize) -> Self {
        Self {
            n_relations,
            n_subspaces,
            d_s,
            blocks: vec![DenseMatrix::identity(d_s); n_relations * n_subspaces],
        }
    }

    /// Assembles a set from relation-major blocks, checking every shape.
    pub fn from_blocks(
        n_relations: usize,
        n_subspaces: usize,
        d_s: usize,
        blocks: Vec<DenseMatrix>,
    ) -> Result<Self> {
        if blocks.len() != n_relations * n_subspaces {
            return Err(Error::shape(format!(
                "expected {} relation blocks, got {}",
                n_relations * n_subspaces,
                blocks.len()
            )));
        }
        if let Some(b) = blocks.iter().find(|b| b.shape() != (d_s, d_s)) {
            return Err(Error::shape(format!(
                "relation block is {}x{}, expected {d_s}x{d_s}",
                b.rows(),
                b.cols()
            )));
        }
        Ok(Self {
            n_relations,
            n_subspaces,
            d_s,
            blocks,
        })
    }

    pub fn n_relations(&self) -> usize {
        self.n_relations
    }

    pub fn n_subspaces(&self) -> usize {
        self.n_subspaces
    }

    pub fn d_s(&self) -> usize {
        self.d_s
    }

    #[inline]
    pub fn get(&self, relation: usize, subspace: usize) -> &DenseMatrix {
        &self.blocks[relation * self.n_subspaces + subspace]
    }

    pub fn set(&mut self, relation: usize, subspace: usize, r: DenseMatrix) {
        debug_assert_eq!(r.shape(), (self.d_s, self.d_s));
        self.blocks[relation * self.n_subspaces + subspace] = r;
    }

    pub fn blocks(&self) -> &[DenseMatrix] {
        &self.blocks
    }

    /// Largest `‖RᵀR − I‖_F` over all cells.
    pub fn max_orthogonality_defect(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| orthogonality_defect(b).expect("blocks are square"))
            .fold(0.0, f64::max)
    }
}

/// Orthogonal `R` minimising `‖h R − t‖_F`.
///
/// An empty panel (`n = 0`) yields the identity, the neutral rotation.
pub fn solve_opa(h: &DenseMatrix, t: &DenseMatrix) -> Result<DenseMatrix> {
    if h.shape() != t.shape() {
        return Err(Error::shape(format!(
            "head panel is {}x{}, tail panel is {}x{}",
            h.rows(),
            h.cols(),
            t.rows(),
            t.cols()
        )));
    }
    if h.rows() == 0 {
        return Ok(DenseMatrix::identity(h.cols()));
    }
    let cross = h.t_matmul(t)?;
    solve_opa_from_cross(&cross)
}

/// Same as [`solve_opa`] but starting from an already accumulated `HᵀT`.
pub fn solve_opa_from_cross(cross: &DenseMatrix) -> Result<DenseMatrix> {
    let svd = svd_square(cross)?;
    svd.u.matmul_t(&svd.v)
}

/// Orthonormalises the rows of `s` (`k × d_s`, `k ≤ d_s`).
///
/// Row `i` of the result is `t_i / ‖t_i‖` with
/// `t_i = v_i − Σ_{j<i} (⟨v_i, t_j⟩ / ⟨t_j, t_j⟩) t_j`. The projections are
/// applied in the modified order with one reorthogonalisation pass, which is
/// the same sum in exact arithmetic but keeps orthogonality at rounding level.
pub fn gram_schmidt(s: &DenseMatrix) -> Result<DenseMatrix> {
    let (k, d_s) = s.shape();
    if k > d_s {
        return Err(Error::shape(format!(
            "gram_schmidt needs at most {d_s} rows in dimension {d_s}, got {k}"
        )));
    }
    let mut out = DenseMatrix::zeros(k, d_s);
    for i in 0..k {
        let mut t = s.row(i).to_vec();
        for _ in 0..2 {
            for j in 0..i {
                let u = out.row(j);
                let proj = dot(&t, u);
                for (x, y) in t.iter_mut().zip(u) {
                    *x -= proj * y;
                }
            }
        }
        let norm = dot(&t, &t).sqrt();
        if norm.is_nan() || norm <= 1e-12 {
            return Err(Error::Degenerate { row: i, norm });
        }
        for (dst, x) in out.row_mut(i).iter_mut().zip(&t) {
            *dst = x / norm;
        }
    }
    Ok(out)
}

/// `‖rᵀr − I‖_F`.
pub fn orthogonality_defect(r: &DenseMatrix) -> Result<f64> {
    if !r.is_square() {
        return Err(Error::shape(format!(
            "orthogonality_defect needs a square matrix, got {}x{}",
            r.rows(),
            r.cols()
        )));
    }
    let gram = r.t_matmul(r)?;
    let n = r.rows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            let d = gram[(i, j)] - target;
            acc += d * d;
        }
    }
    Ok(acc.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian_matrix, random_orthogonal};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_mapping_recovers_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = gaussian_matrix(30, 6, &mut rng);
        let r = solve_opa(&h, &h).unwrap();
        assert!(r.max_abs_diff(&DenseMatrix::identity(6)) < 1e-8);
    }

    #[test]
    fn planted_rotation_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for d_s in [2, 5, 20] {
            let h = gaussian_matrix(50, d_s, &mut rng);
            let q = random_orthogonal(d_s, &mut rng).unwrap();
            let t = h.matmul(&q).unwrap();
            let r = solve_opa(&h, &t).unwrap();
            assert!(r.max_abs_diff(&q) < 1e-8, "d_s={d_s}");
        }
    }

    #[test]
    fn reflections_are_allowed() {
        let h = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).unwrap();
        let flip = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, -1.0]]).unwrap();
        let t = h.matmul(&flip).unwrap();
        let r = solve_opa(&h, &t).unwrap();
        assert!(r.max_abs_diff(&flip) < 1e-12);
    }

    #[test]
    fn empty_group_gives_identity() {
        let h = DenseMatrix::zeros(0, 4);
        assert_eq!(solve_opa(&h, &h).unwrap(), DenseMatrix::identity(4));
    }

    #[test]
    fn mismatched_panels_fail() {
        let h = DenseMatrix::zeros(3, 4);
        let t = DenseMatrix::zeros(2, 4);
        assert!(matches!(solve_opa(&h, &t), Err(Error::Shape(_))));
    }

    #[test]
    fn gram_schmidt_hand_cases() {
        let s = DenseMatrix::from_rows(&[[2.0, 0.0], [0.0, 3.0]]).unwrap();
        assert_eq!(gram_schmidt(&s).unwrap(), DenseMatrix::identity(2));
        let s = DenseMatrix::from_rows(&[[1.0, 0.0], [1.0, 1.0]]).unwrap();
        assert!(
            gram_schmidt(&s)
                .unwrap()
                .max_abs_diff(&DenseMatrix::identity(2))
                < 1e-15
        );
    }

    #[test]
    fn gram_schmidt_reports_offending_row() {
        let s =
            DenseMatrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [2.0, -3.0, 0.0]]).unwrap();
        match gram_schmidt(&s) {
            Err(Error::Degenerate { row, .. }) => assert_eq!(row, 2),
            other => panic!("expected degeneracy error, got {other:?}"),
        }
        assert!(gram_schmidt(&DenseMatrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn defect_values() {
        assert_eq!(
            orthogonality_defect(&DenseMatrix::identity(5)).unwrap(),
            0.0
        );
        let two = DenseMatrix::identity(2).scale(2.0);
        let d = orthogonality_defect(&two).unwrap();
        assert!((d - 3.0 * 2f64.sqrt()).abs() < 1e-12);
        assert!(orthogonality_defect(&DenseMatrix::zeros(2, 3)).is_err());
    }
}
