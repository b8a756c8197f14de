//! Synthetic knowledge graphs with known structure, for tests and benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Dataset, Triple, TripleStore};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::linalg::{random_orthogonal, rotate_row_into, squared_distance};
use crate::procrustes::RelationSet;

/// Knowledge graph generated from planted orthogonal relations.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedConfig {
    pub n_entities: usize,
    pub n_relations: usize,
    pub dim: usize,
    pub sub_dim: usize,
    pub n_train: usize,
    pub n_valid: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            n_entities: 200,
            n_relations: 5,
            dim: 100,
            sub_dim: 20,
            n_train: 2000,
            n_valid: 200,
            n_test: 200,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedKg {
    pub data: Dataset,
    /// Generating embeddings: unit-norm sub-vectors.
    pub entities: EmbeddingTable,
    /// Generating relations: block-diagonal random orthogonal matrices.
    pub relations: RelationSet,
}

/// Samples `(h, r)` uniformly (with replacement) and sets the tail to the
/// entity nearest to `R_r h` under the generating embeddings. The splits are
/// consecutive slices of one sample stream.
pub fn planted_rotation_kg(cfg: &PlantedConfig) -> Result<PlantedKg> {
    if cfg.n_entities == 0 || cfg.n_relations == 0 {
        return Err(Error::Config(
            "planted KG needs entities and relations".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let entities = EmbeddingTable::init(cfg.n_entities, cfg.dim, cfg.sub_dim, &mut rng)?;
    let s = entities.n_subspaces();
    let mut relations = RelationSet::identity(cfg.n_relations, s, cfg.sub_dim);
    for r in 0..cfg.n_relations {
        for j in 0..s {
            relations.set(r, j, random_orthogonal(cfg.sub_dim, &mut rng)?);
        }
    }

    // nearest tail for every (h, r)
    let mut nearest = vec![0usize; cfg.n_entities * cfg.n_relations];
    let mut rotated = vec![0.0; cfg.dim];
    for h in 0..cfg.n_entities {
        for r in 0..cfg.n_relations {
            for j in 0..s {
                rotate_row_into(
                    entities.sub_vector(h, j),
                    relations.get(r, j),
                    &mut rotated[j * cfg.sub_dim..(j + 1) * cfg.sub_dim],
                );
            }
            let mut best = (f64::INFINITY, 0);
            for e in 0..cfg.n_entities {
                let d = squared_distance(&rotated, &entities.entity(e));
                if d < best.0 {
                    best = (d, e);
                }
            }
            nearest[h * cfg.n_relations + r] = best.1;
        }
    }

    let mut draw = |count: usize| -> Vec<Triple> {
        (0..count)
            .map(|_| {
                let h = rng.random_range(0..cfg.n_entities);
                let r = rng.random_range(0..cfg.n_relations);
                Triple::new(h, r, nearest[h * cfg.n_relations + r])
            })
            .collect()
    };
    let train = draw(cfg.n_train);
    let valid = draw(cfg.n_valid);
    let test = draw(cfg.n_test);
    let data = Dataset::from_ids(
        cfg.n_entities,
        cfg.n_relations,
        TripleStore { train, valid, test },
    )?;
    Ok(PlantedKg {
        data,
        entities,
        relations,
    })
}

/// Uniformly random triples over `n_entities` and `n_relations`.
pub fn random_kg(
    n_entities: usize,
    n_relations: usize,
    sizes: (usize, usize, usize),
    seed: u64,
) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |count: usize| -> Vec<Triple> {
        (0..count)
            .map(|_| {
                Triple::new(
                    rng.random_range(0..n_entities),
                    rng.random_range(0..n_relations),
                    rng.random_range(0..n_entities),
                )
            })
            .collect()
    };
    let train = draw(sizes.0);
    let valid = draw(sizes.1);
    let test = draw(sizes.2);
    Dataset::from_ids(n_entities, n_relations, TripleStore { train, valid, test })
}
