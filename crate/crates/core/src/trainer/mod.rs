//! Training loop.
//!
//! A full-batch epoch visits every (relation, subspace) cell: it gathers the
//! head and tail panels, sets the relation block to its closed-form
//! Procrustes optimum, and accumulates the entity gradient of
//! `½‖H R − T‖²_F`. Relations never receive gradients. After all cells the
//! entity table takes one Adam step and is spherised (centred and
//! length-normalised per subspace).
//!
//! Two ablations reuse the same machinery: traditional batches (shuffled
//! mini-batches, solved batch-locally, one Adam step per batch) and
//! negative sampling (logistic margin loss over uniform corruptions).

mod epoch;
mod fit;
mod loss;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub use epoch::{batch_plan, cell_pass, CellPass};
pub use fit::{fit, FitOutcome};
pub use loss::{
    cell_residual, compute_block_loss, corrupt, entity_gradients, ns_loss_and_gradient, ns_terms,
    NsTerms,
};

use crate::dataset::RelationGroup;
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::eval::ScoreKind;
use crate::optim::{Adam, AdamParams};
use crate::procrustes::RelationSet;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Entity embedding width `d`.
    pub dim: usize,
    /// Sub-vector width `d_s`; must divide `dim`.
    pub sub_dim: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub eval_every: usize,
    pub negative_sampling: bool,
    pub traditional_batch: bool,
    pub batch_size: usize,
    pub negatives: usize,
    pub margin: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    /// Centre and normalise entities after every epoch. Turning this off
    /// exposes the all-zero trivial optimum.
    pub spherise: bool,
    /// Distance used when ranking during validation.
    pub score: ScoreKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 2000,
            sub_dim: 20,
            learning_rate: 0.001,
            max_epochs: 2000,
            eval_every: 100,
            negative_sampling: false,
            traditional_batch: false,
            batch_size: 1024,
            negatives: 128,
            margin: 6.0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
            spherise: true,
            score: ScoreKind::Squared,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sub_dim == 0 || self.dim == 0 || !self.dim.is_multiple_of(self.sub_dim) {
            return Err(Error::Config(format!(
                "d = {} is not a positive multiple of d_s = {}",
                self.dim, self.sub_dim
            )));
        }
        if self.sub_dim > crate::linalg::MAX_SVD_DIM {
            return Err(Error::Config(format!(
                "d_s = {} exceeds the supported maximum {}",
                self.sub_dim,
                crate::linalg::MAX_SVD_DIM
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.negative_sampling && self.negatives == 0 {
            return Err(Error::Config(
                "negative sampling needs at least one negative".into(),
            ));
        }
        if self.eval_every == 0 {
            return Err(Error::Config("eval-every must be at least 1".into()));
        }
        if !self.margin.is_finite() {
            return Err(Error::Config("margin must be finite".into()));
        }
        Ok(())
    }

    pub fn adam_params(&self) -> AdamParams {
        AdamParams {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }
}

/// Per-epoch telemetry, one JSON line per epoch in the metrics stream.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub valid_mrr: Option<f64>,
    pub wall_clock_ms: f64,
    pub samples_per_sec: f64,
}

#[derive(Debug, Clone)]
pub struct TrainState {
    pub epoch: usize,
    pub entities: EmbeddingTable,
    pub relations: RelationSet,
    pub optimizer: Adam,
    pub best_valid_mrr: Option<f64>,
    pub best_epoch: usize,
    rng: ChaCha8Rng,
}

impl TrainState {
    /// Random unit sub-vectors, identity relations, zeroed moments.
    pub fn new(config: &TrainConfig, n_entities: usize, n_relations: usize) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let entities = EmbeddingTable::init(n_entities, config.dim, config.sub_dim, &mut rng)?;
        let relations = RelationSet::identity(n_relations, entities.n_subspaces(), config.sub_dim);
        let optimizer = Adam::new(config.adam_params(), &entities);
        Ok(Self {
            epoch: 0,
            entities,
            relations,
            optimizer,
            best_valid_mrr: None,
            best_epoch: 0,
            rng,
        })
    }

    /// Wraps an existing model, e.g. one loaded from a checkpoint.
    pub fn from_parts(
        config: &TrainConfig,
        entities: EmbeddingTable,
        relations: RelationSet,
    ) -> Result<Self> {
        config.validate()?;
        let optimizer = Adam::new(config.adam_params(), &entities);
        Ok(Self {
            epoch: 0,
            entities,
            relations,
            optimizer,
            best_valid_mrr: None,
            best_epoch: 0,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
        })
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Re-solves every relation block from the current entity table, so the
    /// stored relations are exactly what the entities imply.
    pub fn refresh_relations(&mut self, groups: &[RelationGroup]) -> Result<()> {
        let pass = cell_pass(&self.entities, groups, false)?;
        for (relation, subspace, r) in pass.relations {
            self.relations.set(relation, subspace, r);
        }
        Ok(())
    }
}
