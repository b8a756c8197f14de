//! Independent oracles shared by the integration tests. Everything here is
//! built on nalgebra or on plain loops, never on the crate's own solvers.
#![allow(dead_code)]

use nalgebra::DMatrix;
use pkge_core::dataset::{FilterIndex, Triple};
use pkge_core::embeddings::EmbeddingTable;
use pkge_core::linalg::DenseMatrix;
use pkge_core::procrustes::RelationSet;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn to_na(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn from_na(m: &DMatrix<f64>) -> DenseMatrix {
    DenseMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

pub fn gaussian_na<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Haar orthogonal matrix from nalgebra's Householder QR with the sign fix
/// `Q · sign(diag R)`.
pub fn haar_orthogonal<R: Rng + ?Sized>(k: usize, rng: &mut R) -> DMatrix<f64> {
    let qr = gaussian_na(k, k, rng).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `‖h r − t‖_F`, computed with nalgebra.
pub fn opa_loss(h: &DMatrix<f64>, r: &DMatrix<f64>, t: &DMatrix<f64>) -> f64 {
    (h * r - t).norm()
}

/// Nearest orthogonal matrix in Frobenius norm (polar factor).
pub fn polar(m: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    svd.u.expect("u requested") * svd.v_t.expect("v requested")
}

/// Projected gradient descent on `½‖h r − t‖²` over orthogonal `r`,
/// starting from the identity, with step `1 / λ_max(hᵀh)`.
pub fn projected_gd_opa(h: &DMatrix<f64>, t: &DMatrix<f64>, steps: usize) -> DMatrix<f64> {
    let k = h.ncols();
    let hth = h.transpose() * h;
    let htt = h.transpose() * t;
    let lmax = hth.symmetric_eigenvalues().max().max(1e-12);
    let eta = 1.0 / lmax;
    let mut r = DMatrix::identity(k, k);
    for _ in 0..steps {
        let grad = &hth * &r - &htt;
        r = polar(&(r - grad * eta));
    }
    r
}

/// Eight entities in two 2-d subspaces with integer coordinates, so equal
/// scores are exact ties. Entities 5 and 6 coincide; entity 7 mirrors 1.
pub fn hand_kg() -> (EmbeddingTable, RelationSet, Vec<Triple>, Vec<Triple>) {
    #[rustfmt::skip]
    let rows = [
        1.0, 0.0,   0.0, 1.0,
        0.0, 1.0,   1.0, 0.0,
        -1.0, 0.0,  0.0, -1.0,
        0.0, -1.0,  1.0, 1.0,
        1.0, 1.0,   -1.0, 0.0,
        2.0, 0.0,   0.0, 0.0,
        2.0, 0.0,   0.0, 0.0,
        0.0, 1.0,   -1.0, 0.0,
    ];
    let table = EmbeddingTable::from_row_major(8, 4, 2, &rows).unwrap();
    let mut rels = RelationSet::identity(2, 2, 2);
    // quarter turn in the first subspace, reflection in the second
    rels.set(
        1,
        0,
        DenseMatrix::from_rows(&[[0.0, 1.0], [-1.0, 0.0]]).unwrap(),
    );
    rels.set(
        1,
        1,
        DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, -1.0]]).unwrap(),
    );
    let known = vec![
        Triple::new(0, 0, 0),
        Triple::new(0, 0, 4),
        Triple::new(0, 1, 1),
        Triple::new(1, 1, 2),
        Triple::new(3, 1, 5),
        Triple::new(4, 0, 5),
        Triple::new(5, 0, 6),
        Triple::new(7, 1, 2),
    ];
    let test = vec![
        Triple::new(0, 0, 4),
        Triple::new(0, 1, 1),
        Triple::new(3, 1, 5),
        Triple::new(5, 0, 6),
        Triple::new(2, 1, 3),
        Triple::new(6, 0, 7),
    ];
    (table, rels, known, test)
}

/// `−Σ_j ‖h_j R_j − t_j‖²` with the rotation written out as loops.
pub fn loop_score(table: &EmbeddingTable, rels: &RelationSet, h: usize, r: usize, t: usize) -> f64 {
    let d_s = table.d_s();
    let mut acc = 0.0;
    for j in 0..table.n_subspaces() {
        let hv = table.sub_vector(h, j);
        let tv = table.sub_vector(t, j);
        let m = rels.get(r, j);
        for c in 0..d_s {
            let mut x = 0.0;
            for k in 0..d_s {
                x += hv[k] * m[(k, c)];
            }
            acc += (x - tv[c]) * (x - tv[c]);
        }
    }
    -acc
}

/// Sorts the unfiltered candidates by score and averages the 1-based
/// positions of every entry tied with the answer.
pub fn brute_force_rank(
    table: &EmbeddingTable,
    rels: &RelationSet,
    q: Triple,
    head_side: bool,
    filter: &FilterIndex,
) -> f64 {
    let n = table.n_entities();
    let mut scored: Vec<(f64, usize)> = Vec::new();
    for e in 0..n {
        let (h, t, answer, known) = if head_side {
            (e, q.tail, q.head, filter.heads(q.relation, q.tail))
        } else {
            (q.head, e, q.tail, filter.tails(q.head, q.relation))
        };
        if e != answer && known.is_some_and(|k| k.contains(&e)) {
            continue;
        }
        scored.push((loop_score(table, rels, h, q.relation, t), e));
    }
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let answer = if head_side { q.head } else { q.tail };
    let target = scored.iter().find(|s| s.1 == answer).unwrap().0;
    let positions: Vec<f64> = scored
        .iter()
        .enumerate()
        .filter(|(_, s)| s.0 == target)
        .map(|(i, _)| (i + 1) as f64)
        .collect();
    positions.iter().sum::<f64>() / positions.len() as f64
}
