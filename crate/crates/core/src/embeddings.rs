//! Segmented entity embeddings.
//!
//! Every entity vector of width `d` is the concatenation of `d / d_s`
//! independent sub-vectors. The table is stored subspace-major: block `j`
//! is an `N × d_s` matrix holding sub-vector `j` of every entity, so the
//! panels gathered for one (relation, subspace) cell and the gradient
//! written back for it touch a single contiguous block. Conversion to and
//! from the conventional row-major `N × d` layout is provided for I/O.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{dot, DenseMatrix};

/// Rows whose norm drops below this after centring are re-drawn.
const DEGENERATE_NORM: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    n_entities: usize,
    d: usize,
    d_s: usize,
    blocks: Vec<DenseMatrix>,
}

fn check_dims(d: usize, d_s: usize) -> Result<()> {
    if d_s == 0 || d == 0 || !d.is_multiple_of(d_s) {
        return Err(Error::Config(format!(
            "embedding dimension {d} must be a positive multiple of the sub-vector dimension {d_s}"
        )));
    }
    Ok(())
}

impl EmbeddingTable {
    /// Every sub-vector is an independent Gaussian draw scaled to unit length.
    pub fn init<R: Rng + ?Sized>(
        n_entities: usize,
        d: usize,
        d_s: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if n_entities == 0 {
            return Err(Error::Config(
                "embedding table needs at least one entity".into(),
            ));
        }
        let mut table = Self::zeros(n_entities, d, d_s)?;
        for e in 0..n_entities {
            for block in table.blocks.iter_mut() {
                random_unit(block.row_mut(e), rng);
            }
        }
        Ok(table)
    }

    /// All-zero table, also used as the gradient / moment buffer shape.
    pub fn zeros(n_entities: usize, d: usize, d_s: usize) -> Result<Self> {
        check_dims(d, d_s)?;
        Ok(Self {
            n_entities,
            d,
            d_s,
            blocks: vec![DenseMatrix::zeros(n_entities, d_s); d / d_s],
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            n_entities: self.n_entities,
            d: self.d,
            d_s: self.d_s,
            blocks: vec![DenseMatrix::zeros(self.n_entities, self.d_s); self.blocks.len()],
        }
    }

    /// Builds a table from a row-major `N × d` buffer.
    pub fn from_row_major(n_entities: usize, d: usize, d_s: usize, data: &[f64]) -> Result<Self> {
        check_dims(d, d_s)?;
        if data.len() != n_entities * d {
            return Err(Error::shape(format!(
                "row-major buffer has {} values, expected {}",
                data.len(),
                n_entities * d
            )));
        }
        let mut table = Self::zeros(n_entities, d, d_s)?;
        for (e, row) in data.chunks_exact(d).enumerate() {
            for (j, block) in table.blocks.iter_mut().enumerate() {
                block
                    .row_mut(e)
                    .copy_from_slice(&row[j * d_s..(j + 1) * d_s]);
            }
        }
        Ok(table)
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_entities * self.d);
        for e in 0..self.n_entities {
            for block in &self.blocks {
                out.extend_from_slice(block.row(e));
            }
        }
        out
    }

    pub fn n_entities(&self) -> usize {
        self.n_entities
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn d_s(&self) -> usize {
        self.d_s
    }

    pub fn n_subspaces(&self) -> usize {
        self.blocks.len()
    }

    pub fn block(&self, subspace: usize) -> &DenseMatrix {
        &self.blocks[subspace]
    }

    pub fn block_mut(&mut self, subspace: usize) -> &mut DenseMatrix {
        &mut self.blocks[subspace]
    }

    pub fn blocks(&self) -> &[DenseMatrix] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [DenseMatrix] {
        &mut self.blocks
    }

    #[inline]
    pub fn sub_vector(&self, entity: usize, subspace: usize) -> &[f64] {
        self.blocks[subspace].row(entity)
    }

    /// The full `d`-wide vector of one entity.
    pub fn entity(&self, entity: usize) -> Vec<f64> {
        self.blocks
            .iter()
            .flat_map(|b| b.row(entity).iter().copied())
            .collect()
    }

    fn check_subspace(&self, subspace: usize) -> Result<()> {
        if subspace >= self.blocks.len() {
            return Err(Error::Index {
                index: subspace,
                limit: self.blocks.len(),
            });
        }
        Ok(())
    }

    fn check_ids(&self, ids: &[usize]) -> Result<()> {
        if let Some(&bad) = ids.iter().find(|&&i| i >= self.n_entities) {
            return Err(Error::Index {
                index: bad,
                limit: self.n_entities,
            });
        }
        Ok(())
    }

    /// `|ids| × d_s` panel whose row `k` is sub-vector `subspace` of entity `ids[k]`.
    pub fn gather(&self, ids: &[usize], subspace: usize) -> Result<DenseMatrix> {
        self.check_subspace(subspace)?;
        self.check_ids(ids)?;
        Ok(gather_block(&self.blocks[subspace], ids))
    }

    /// Adds row `k` of `grad` into sub-vector `subspace` of entity `ids[k]`;
    /// repeated ids accumulate.
    pub fn scatter_add(
        &mut self,
        ids: &[usize],
        subspace: usize,
        grad: &DenseMatrix,
    ) -> Result<()> {
        self.check_subspace(subspace)?;
        if grad.shape() != (ids.len(), self.d_s) {
            return Err(Error::shape(format!(
                "gradient is {}x{}, expected {}x{}",
                grad.rows(),
                grad.cols(),
                ids.len(),
                self.d_s
            )));
        }
        self.check_ids(ids)?;
        scatter_add_block(&mut self.blocks[subspace], ids, grad);
        Ok(())
    }

    /// Centres every subspace block over all entities, then rescales every
    /// sub-vector to unit length. Sub-vectors that vanish after centring are
    /// replaced by a fresh random unit vector.
    pub fn spherise<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for block in &mut self.blocks {
            centre_block(block);
            normalise_block(block, rng);
        }
    }

    /// Mean over entities and subspaces of the sub-vector Euclidean norm.
    pub fn mean_subspace_norm(&self) -> f64 {
        let total: f64 = self
            .blocks
            .iter()
            .flat_map(|b| b.row_iter().map(|r| dot(r, r).sqrt()))
            .sum();
        total / (self.n_entities * self.blocks.len()) as f64
    }

    /// Largest `|‖e_{t,j}‖ − 1|` over all sub-vectors.
    pub fn max_unit_norm_deviation(&self) -> f64 {
        self.blocks
            .iter()
            .flat_map(|b| b.row_iter().map(|r| (dot(r, r).sqrt() - 1.0).abs()))
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.iter().all(DenseMatrix::is_finite)
    }

    /// Sum of elementwise products with another table of the same shape.
    pub fn inner(&self, other: &EmbeddingTable) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| dot(a.as_slice(), b.as_slice()))
            .sum()
    }
}

pub(crate) fn gather_block(block: &DenseMatrix, ids: &[usize]) -> DenseMatrix {
    let d_s = block.cols();
    let mut out = DenseMatrix::zeros(ids.len(), d_s);
    for (k, &id) in ids.iter().enumerate() {
        out.row_mut(k).copy_from_slice(block.row(id));
    }
    out
}

pub(crate) fn scatter_add_block(block: &mut DenseMatrix, ids: &[usize], grad: &DenseMatrix) {
    for (k, &id) in ids.iter().enumerate() {
        for (dst, g) in block.row_mut(id).iter_mut().zip(grad.row(k)) {
            *dst += g;
        }
    }
}

/// Subtracts the column mean so every column sums to (numerically) zero.
pub fn centre_block(block: &mut DenseMatrix) {
    let n = block.rows();
    if n == 0 {
        return;
    }
    let mut mean = vec![0.0; block.cols()];
    for r in block.row_iter() {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    for i in 0..n {
        for (x, m) in block.row_mut(i).iter_mut().zip(&mean) {
            *x -= m;
        }
    }
}

/// Rescales every row to unit Euclidean norm, re-drawing degenerate rows.
pub fn normalise_block<R: Rng + ?Sized>(block: &mut DenseMatrix, rng: &mut R) {
    for i in 0..block.rows() {
        let row = block.row_mut(i);
        let norm = dot(row, row).sqrt();
        if norm < DEGENERATE_NORM {
            random_unit(row, rng);
        } else {
            row.iter_mut().for_each(|x| *x /= norm);
        }
    }
}

fn random_unit<R: Rng + ?Sized>(out: &mut [f64], rng: &mut R) {
    loop {
        for x in out.iter_mut() {
            *x = rng.sample(StandardNormal);
        }
        let n = dot(out, out).sqrt();
        if n > DEGENERATE_NORM {
            out.iter_mut().for_each(|x| *x /= n);
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn init_single_unit_vector() {
        let t = EmbeddingTable::init(1, 2, 2, &mut rng(0)).unwrap();
        let v = t.entity(0);
        assert_eq!(v.len(), 2);
        assert!((dot(&v, &v).sqrt() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn init_is_unit_norm_and_deterministic() {
        let a = EmbeddingTable::init(50, 40, 8, &mut rng(3)).unwrap();
        let b = EmbeddingTable::init(50, 40, 8, &mut rng(3)).unwrap();
        assert!(a.max_unit_norm_deviation() < 1e-12);
        assert_eq!(a.to_row_major(), b.to_row_major());
        let c = EmbeddingTable::init(50, 40, 8, &mut rng(4)).unwrap();
        assert_ne!(a.to_row_major(), c.to_row_major());
    }

    #[test]
    fn init_rejects_indivisible_dims() {
        assert!(matches!(
            EmbeddingTable::init(3, 10, 3, &mut rng(0)),
            Err(Error::Config(_))
        ));
        assert!(EmbeddingTable::init(0, 4, 2, &mut rng(0)).is_err());
    }

    #[test]
    fn row_major_round_trip() {
        let a = EmbeddingTable::init(7, 12, 4, &mut rng(1)).unwrap();
        let b = EmbeddingTable::from_row_major(7, 12, 4, &a.to_row_major()).unwrap();
        assert_eq!(a, b);
        assert_eq!(&a.entity(3)[4..8], a.sub_vector(3, 1));
    }

    #[test]
    fn gather_edge_cases() {
        let t = EmbeddingTable::init(5, 6, 3, &mut rng(2)).unwrap();
        let empty = t.gather(&[], 1).unwrap();
        assert_eq!(empty.shape(), (0, 3));
        let twice = t.gather(&[3, 3], 0).unwrap();
        assert_eq!(twice.row(0), twice.row(1));
        assert!(matches!(t.gather(&[5], 0), Err(Error::Index { .. })));
        assert!(matches!(t.gather(&[0], 2), Err(Error::Index { .. })));
    }

    #[test]
    fn scatter_accumulates_repeats() {
        let mut buf = EmbeddingTable::zeros(5, 4, 2).unwrap();
        let g = DenseMatrix::from_rows(&[[1.0, 2.0], [10.0, 20.0]]).unwrap();
        buf.scatter_add(&[3, 3], 1, &g).unwrap();
        assert_eq!(buf.sub_vector(3, 1), &[11.0, 22.0]);
        assert_eq!(buf.sub_vector(3, 0), &[0.0, 0.0]);
        let before = buf.clone();
        buf.scatter_add(&[], 0, &DenseMatrix::zeros(0, 2)).unwrap();
        assert_eq!(buf, before);
        assert!(matches!(
            buf.scatter_add(&[1], 0, &DenseMatrix::zeros(2, 2)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn spherise_single_entity_redraws() {
        let mut t = EmbeddingTable::from_row_major(1, 2, 2, &[2.0, 0.0]).unwrap();
        t.spherise(&mut rng(0));
        let v = t.entity(0);
        assert!((dot(&v, &v).sqrt() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spherise_symmetric_pair_is_fixed_point() {
        let mut t = EmbeddingTable::from_row_major(2, 2, 2, &[1.0, 0.0, -1.0, 0.0]).unwrap();
        t.spherise(&mut rng(0));
        assert_eq!(t.to_row_major(), vec![1.0, 0.0, -1.0, 0.0]);
    }

    #[test]
    fn spherise_steps_on_random_block() {
        let mut r = rng(7);
        let mut block = crate::linalg::gaussian_matrix(100, 20, &mut r).scale(3.0);
        for i in 0..100 {
            block.row_mut(i)[0] += 5.0;
        }
        centre_block(&mut block);
        for j in 0..20 {
            let s: f64 = block.column(j).iter().sum();
            assert!(s.abs() < 1e-10, "column {j} sums to {s}");
        }
        normalise_block(&mut block, &mut r);
        for row in block.row_iter() {
            assert!((dot(row, row).sqrt() - 1.0).abs() < 1e-12);
        }
    }
}
