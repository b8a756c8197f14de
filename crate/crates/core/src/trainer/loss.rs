//! Per-cell Procrustes loss, its entity gradients, and the logistic
//! negative-sampling loss used by the ablation modes.

use rand::Rng;

use crate::dataset::Triple;
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::eval::{triple_distance, ScoreKind};
use crate::linalg::{rotate_row_into, DenseMatrix};
use crate::procrustes::RelationSet;

fn check_cell(h: &DenseMatrix, r: &DenseMatrix, t: &DenseMatrix) -> Result<()> {
    let d_s = r.rows();
    if !r.is_square() || h.cols() != d_s || h.shape() != t.shape() {
        return Err(Error::Shape(format!(
            "cell shapes h {}x{}, r {}x{}, t {}x{} do not line up",
            h.rows(),
            h.cols(),
            r.rows(),
            r.cols(),
            t.rows(),
            t.cols()
        )));
    }
    Ok(())
}

/// `h·r − t`.
pub fn cell_residual(h: &DenseMatrix, r: &DenseMatrix, t: &DenseMatrix) -> Result<DenseMatrix> {
    check_cell(h, r, t)?;
    let mut res = h.matmul(r)?;
    for (x, y) in res.as_mut_slice().iter_mut().zip(t.as_slice()) {
        *x -= y;
    }
    Ok(res)
}

/// Reported loss of one cell: the Frobenius norm `‖h r − t‖_F`.
pub fn compute_block_loss(h: &DenseMatrix, r: &DenseMatrix, t: &DenseMatrix) -> Result<f64> {
    Ok(cell_residual(h, r, t)?.frobenius_norm())
}

/// Gradients of `½‖h r − t‖²_F` with respect to `h` and `t`:
/// `(h r − t) rᵀ` and `−(h r − t)`.
pub fn entity_gradients(
    h: &DenseMatrix,
    r: &DenseMatrix,
    t: &DenseMatrix,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let res = cell_residual(h, r, t)?;
    let grad_h = res.matmul_t(r)?;
    let grad_t = res.scale(-1.0);
    Ok((grad_h, grad_t))
}

/// `ln σ(x)` without overflow.
fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Loss `−ln σ(γ − s⁺) − (1/k) Σ ln σ(s⁻ − γ)` and its derivatives with
/// respect to `s⁺` and each `s⁻`.
#[derive(Debug, Clone, PartialEq)]
pub struct NsTerms {
    pub loss: f64,
    pub d_positive: f64,
    pub d_negatives: Vec<f64>,
}

pub fn ns_terms(positive: f64, negatives: &[f64], margin: f64) -> NsTerms {
    let k = negatives.len().max(1) as f64;
    let mut loss = -log_sigmoid(margin - positive);
    let d_positive = sigmoid(positive - margin);
    let mut d_negatives = Vec::with_capacity(negatives.len());
    for &s in negatives {
        loss -= log_sigmoid(s - margin) / k;
        d_negatives.push(-sigmoid(margin - s) / k);
    }
    NsTerms {
        loss,
        d_positive,
        d_negatives,
    }
}

/// Replaces the head or the tail (each with probability ½) by a uniformly
/// drawn entity. The draw may reproduce the original entity.
pub fn corrupt<R: Rng + ?Sized>(t: Triple, n_entities: usize, rng: &mut R) -> Triple {
    let replace_head = rng.random_bool(0.5);
    let e = rng.random_range(0..n_entities);
    if replace_head {
        Triple::new(e, t.relation, t.tail)
    } else {
        Triple::new(t.head, t.relation, e)
    }
}

/// Adds `coeff · ∂s/∂(entities)` for `s = Σ_j ‖h_j R_j − t_j‖²` into one
/// subspace block of a gradient buffer.
pub(crate) fn add_distance_gradient(
    grad: &mut DenseMatrix,
    entities: &DenseMatrix,
    r: &DenseMatrix,
    t: Triple,
    coeff: f64,
    scratch: &mut [f64],
) {
    if coeff == 0.0 {
        return;
    }
    rotate_row_into(entities.row(t.head), r, scratch);
    for (x, y) in scratch.iter_mut().zip(entities.row(t.tail)) {
        *x -= y;
    }
    // ∂/∂t = −2·res
    for (g, x) in grad.row_mut(t.tail).iter_mut().zip(scratch.iter()) {
        *g -= 2.0 * coeff * x;
    }
    // ∂/∂h = 2·res·Rᵀ
    let gh = grad.row_mut(t.head);
    for (c, g) in gh.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (x, rv) in scratch.iter().zip(r.row(c)) {
            acc += x * rv;
        }
        *g += 2.0 * coeff * acc;
    }
}

/// Negative-sampling loss for one positive and its corruptions, with the
/// full entity gradient (relations held fixed).
pub fn ns_loss_and_gradient(
    table: &EmbeddingTable,
    relations: &RelationSet,
    positive: Triple,
    negatives: &[Triple],
    margin: f64,
) -> (f64, EmbeddingTable) {
    let s_pos = triple_distance(table, relations, positive, ScoreKind::Squared);
    let s_neg: Vec<f64> = negatives
        .iter()
        .map(|&n| triple_distance(table, relations, n, ScoreKind::Squared))
        .collect();
    let terms = ns_terms(s_pos, &s_neg, margin);
    let mut grad = table.zeros_like();
    let mut scratch = vec![0.0; table.d_s()];
    for j in 0..table.n_subspaces() {
        let block = table.block(j);
        let g = grad.block_mut(j);
        add_distance_gradient(
            g,
            block,
            relations.get(positive.relation, j),
            positive,
            terms.d_positive,
            &mut scratch,
        );
        for (&n, &c) in negatives.iter().zip(&terms.d_negatives) {
            add_distance_gradient(g, block, relations.get(n.relation, j), n, c, &mut scratch);
        }
    }
    (terms.loss, grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn exact_rotation_has_zero_loss_and_gradient() {
        let h = m(&[&[1.0, 2.0], &[0.5, -1.0]]);
        let r = m(&[&[0.0, 1.0], &[-1.0, 0.0]]);
        let t = h.matmul(&r).unwrap();
        assert_eq!(compute_block_loss(&h, &r, &t).unwrap(), 0.0);
        let (gh, gt) = entity_gradients(&h, &r, &t).unwrap();
        assert!(gh.frobenius_norm() == 0.0 && gt.frobenius_norm() == 0.0);
    }

    #[test]
    fn hand_computed_loss_and_gradients() {
        let h = m(&[&[1.0, 0.0]]);
        let r = DenseMatrix::identity(2);
        let t = m(&[&[0.0, 1.0]]);
        assert!((compute_block_loss(&h, &r, &t).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let (gh, gt) = entity_gradients(&h, &r, &DenseMatrix::zeros(1, 2)).unwrap();
        assert_eq!(gh, m(&[&[1.0, 0.0]]));
        assert_eq!(gt, m(&[&[-1.0, 0.0]]));
    }

    #[test]
    fn shape_mismatch() {
        let h = DenseMatrix::zeros(2, 3);
        assert!(compute_block_loss(&h, &DenseMatrix::identity(2), &h).is_err());
        assert!(
            entity_gradients(&h, &DenseMatrix::identity(3), &DenseMatrix::zeros(1, 3)).is_err()
        );
    }

    #[test]
    fn log_sigmoid_is_stable() {
        assert!((log_sigmoid(0.0) + 2f64.ln()).abs() < 1e-15);
        assert!(log_sigmoid(800.0) == 0.0);
        assert!((log_sigmoid(-800.0) + 800.0).abs() < 1e-9);
        assert!((sigmoid(-800.0)).abs() < 1e-300);
    }

    #[test]
    fn large_margin_saturates_positive_term() {
        let terms = ns_terms(3.9, &[0.1, 4.0, 2.0], 50.0);
        assert!(terms.d_positive < 1e-8);
        // negative term is linear in s⁻ with slope −1/k
        for d in &terms.d_negatives {
            assert!((d + 1.0 / 3.0).abs() < 1e-12);
        }
    }
}
