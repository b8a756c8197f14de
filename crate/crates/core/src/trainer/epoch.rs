use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use super::loss::{add_distance_gradient, corrupt, ns_terms};
use super::{TrainConfig, TrainState};
use crate::dataset::{group_by_relation, RelationGroup, Triple};
use crate::embeddings::{gather_block, scatter_add_block, EmbeddingTable};
use crate::error::{Error, Result};
use crate::eval::{triple_distance, ScoreKind};
use crate::linalg::DenseMatrix;
use crate::procrustes::solve_opa;

/// Positives processed together in negative-sampling mode; bounds the
/// memory held by drawn corruptions.
const NS_CHUNK: usize = 1024;

/// Result of one sweep over all (relation, subspace) cells.
#[derive(Debug, Clone)]
pub struct CellPass {
    /// Gradient of `Σ ½‖H R − T‖²_F` over the entity table, when requested.
    pub grad: Option<EmbeddingTable>,
    /// `Σ ‖H R − T‖_F` over all cells (zero when no gradient was requested).
    pub loss: f64,
    /// Closed-form optimum of every visited cell as `(relation, subspace, R)`.
    pub relations: Vec<(usize, usize, DenseMatrix)>,
}

/// Solves every (relation, subspace) cell of `groups` against `table` and,
/// if `with_gradient`, accumulates entity gradients.
///
/// Subspaces are processed in parallel; each owns its gradient block, and
/// inside a subspace cells are reduced in ascending relation order whatever
/// order `groups` arrives in, so the result is bit-reproducible.
pub fn cell_pass(
    table: &EmbeddingTable,
    groups: &[RelationGroup],
    with_gradient: bool,
) -> Result<CellPass> {
    let mut order: Vec<&RelationGroup> = groups.iter().collect();
    order.sort_by_key(|g| g.relation);
    let n = table.n_entities();
    let d_s = table.d_s();

    type Sub = (Option<DenseMatrix>, f64, Vec<DenseMatrix>);
    let per_subspace: Vec<Sub> = (0..table.n_subspaces())
        .into_par_iter()
        .map(|j| -> Result<Sub> {
            let block = table.block(j);
            let mut grad = with_gradient.then(|| DenseMatrix::zeros(n, d_s));
            let mut loss = 0.0;
            let mut rels = Vec::with_capacity(order.len());
            for g in &order {
                let h = gather_block(block, &g.heads);
                let t = gather_block(block, &g.tails);
                let r = solve_opa(&h, &t)?;
                if let Some(grad) = grad.as_mut() {
                    let mut res = h.matmul(&r)?;
                    for (x, y) in res.as_mut_slice().iter_mut().zip(t.as_slice()) {
                        *x -= y;
                    }
                    loss += res.frobenius_norm();
                    let grad_h = res.matmul_t(&r)?;
                    scatter_add_block(grad, &g.heads, &grad_h);
                    let grad_t = res.scale(-1.0);
                    scatter_add_block(grad, &g.tails, &grad_t);
                }
                rels.push(r);
            }
            Ok((grad, loss, rels))
        })
        .collect::<Result<_>>()?;

    let mut loss = 0.0;
    let mut relations = Vec::with_capacity(order.len() * per_subspace.len());
    let mut grad_blocks = Vec::with_capacity(per_subspace.len());
    for (j, (grad, l, rels)) in per_subspace.into_iter().enumerate() {
        loss += l;
        for (g, r) in order.iter().zip(rels) {
            relations.push((g.relation, j, r));
        }
        if let Some(b) = grad {
            grad_blocks.push(b);
        }
    }
    let grad = if with_gradient {
        let mut buf = table.zeros_like();
        for (dst, src) in buf.blocks_mut().iter_mut().zip(grad_blocks) {
            *dst = src;
        }
        Some(buf)
    } else {
        None
    };
    Ok(CellPass {
        grad,
        loss,
        relations,
    })
}

/// Shuffled index batches covering `0..n`.
pub fn batch_plan<R: Rng + ?Sized>(n: usize, batch_size: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.chunks(batch_size.max(1))
        .map(<[usize]>::to_vec)
        .collect()
}

fn diverged(epoch: usize, err: Error) -> Error {
    match err {
        Error::Numeric(message) => Error::Divergence { epoch, message },
        other => other,
    }
}

impl TrainState {
    /// One epoch in whichever mode `config` selects. Returns the epoch loss.
    pub fn run_epoch(
        &mut self,
        config: &TrainConfig,
        train: &[Triple],
        groups: &[RelationGroup],
    ) -> Result<f64> {
        if config.negative_sampling {
            self.train_epoch_ns(config, train, groups)
        } else if config.traditional_batch {
            self.train_epoch_tb(config, train)
        } else {
            self.train_epoch_fullbatch(config, groups)
        }
    }

    /// Full-batch epoch: solve every cell, one Adam step, spherise.
    /// Returns `Σ ‖H R − T‖_F` over all cells, measured before the update.
    pub fn train_epoch_fullbatch(
        &mut self,
        config: &TrainConfig,
        groups: &[RelationGroup],
    ) -> Result<f64> {
        let epoch = self.epoch + 1;
        let pass = cell_pass(&self.entities, groups, true).map_err(|e| diverged(epoch, e))?;
        let loss = self.apply_pass(epoch, pass)?;
        self.finish_epoch(config)?;
        Ok(loss)
    }

    /// Traditional mini-batch epoch: seeded shuffle, batch-local solves and
    /// one Adam step per batch; spherise at the end.
    pub fn train_epoch_tb(&mut self, config: &TrainConfig, train: &[Triple]) -> Result<f64> {
        let epoch = self.epoch + 1;
        let plan = batch_plan(train.len(), config.batch_size, &mut self.rng);
        let mut total = 0.0;
        for batch in plan {
            let triples: Vec<Triple> = batch.iter().map(|&i| train[i]).collect();
            let groups = group_by_relation(&triples);
            let pass = cell_pass(&self.entities, &groups, true).map_err(|e| diverged(epoch, e))?;
            total += self.apply_pass(epoch, pass)?;
        }
        self.finish_epoch(config)?;
        Ok(total)
    }

    /// Negative-sampling epoch, full batch or (with `traditional_batch`)
    /// mini-batched. Relations are still set by the closed-form solve on
    /// positives; entity gradients come from the logistic margin loss.
    pub fn train_epoch_ns(
        &mut self,
        config: &TrainConfig,
        train: &[Triple],
        groups: &[RelationGroup],
    ) -> Result<f64> {
        let epoch = self.epoch + 1;
        let batches: Vec<Vec<usize>> = if config.traditional_batch {
            batch_plan(train.len(), config.batch_size, &mut self.rng)
        } else {
            vec![(0..train.len()).collect()]
        };
        let n_entities = self.entities.n_entities();
        let k = config.negatives;
        let mut total = 0.0;

        for batch in batches {
            let positives: Vec<Triple> = batch.iter().map(|&i| train[i]).collect();
            let local;
            let solve_groups = if config.traditional_batch {
                local = group_by_relation(&positives);
                &local[..]
            } else {
                groups
            };
            let rel_pass =
                cell_pass(&self.entities, solve_groups, false).map_err(|e| diverged(epoch, e))?;
            for (r, j, m) in rel_pass.relations {
                self.relations.set(r, j, m);
            }

            let mut grad = self.entities.zeros_like();
            for chunk in positives.chunks(NS_CHUNK) {
                let negatives: Vec<Triple> = chunk
                    .iter()
                    .flat_map(|&p| (0..k).map(move |_| p))
                    .map(|p| corrupt(p, n_entities, &mut self.rng))
                    .collect();
                let table = &self.entities;
                let rels = &self.relations;
                let s_pos: Vec<f64> = chunk
                    .par_iter()
                    .map(|&t| triple_distance(table, rels, t, ScoreKind::Squared))
                    .collect();
                let s_neg: Vec<f64> = negatives
                    .par_iter()
                    .map(|&t| triple_distance(table, rels, t, ScoreKind::Squared))
                    .collect();

                let mut coeffs: Vec<(Triple, f64)> = Vec::with_capacity(chunk.len() * (k + 1));
                for (i, &p) in chunk.iter().enumerate() {
                    let terms = ns_terms(s_pos[i], &s_neg[i * k..(i + 1) * k], config.margin);
                    total += terms.loss;
                    coeffs.push((p, terms.d_positive));
                    coeffs.extend(
                        negatives[i * k..(i + 1) * k]
                            .iter()
                            .copied()
                            .zip(terms.d_negatives),
                    );
                }

                let d_s = table.d_s();
                grad.blocks_mut()
                    .par_iter_mut()
                    .enumerate()
                    .for_each(|(j, g)| {
                        let block = table.block(j);
                        let mut scratch = vec![0.0; d_s];
                        for &(t, c) in &coeffs {
                            add_distance_gradient(
                                g,
                                block,
                                rels.get(t.relation, j),
                                t,
                                c,
                                &mut scratch,
                            );
                        }
                    });
            }
            if !total.is_finite() || !grad.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    message: "non-finite negative-sampling loss or gradient".into(),
                });
            }
            self.optimizer.step(&mut self.entities, &grad);
        }
        self.finish_epoch(config)?;
        Ok(total)
    }

    fn apply_pass(&mut self, epoch: usize, pass: CellPass) -> Result<f64> {
        let grad = pass.grad.expect("gradient requested");
        if !pass.loss.is_finite() || !grad.is_finite() {
            return Err(Error::Divergence {
                epoch,
                message: "non-finite loss or gradient".into(),
            });
        }
        for (r, j, m) in pass.relations {
            self.relations.set(r, j, m);
        }
        self.optimizer.step(&mut self.entities, &grad);
        Ok(pass.loss)
    }

    fn finish_epoch(&mut self, config: &TrainConfig) -> Result<()> {
        self.epoch += 1;
        if !self.entities.is_finite() || !self.optimizer.moments_finite() {
            return Err(Error::Divergence {
                epoch: self.epoch,
                message: "non-finite entity embeddings after update".into(),
            });
        }
        if config.spherise {
            self.entities.spherise(&mut self.rng);
        }
        Ok(())
    }
}
