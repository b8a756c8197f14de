//! Knowledge-graph embeddings trained by closed-form orthogonal Procrustes
//! analysis.
//!
//! Entities live in segmented embeddings: `d`-wide vectors split into
//! `d / d_s` independent sub-vectors. Training tuples are grouped by
//! relation, and for every (relation, subspace) cell the relation block is
//! set to the orthogonal matrix that best maps the stacked head sub-vectors
//! onto the tail sub-vectors, `R = U Vᵀ` from the SVD of `Hᵀ T`. Only the
//! entity embeddings are learned by gradient descent, and they are kept on
//! a hypersphere (centred, unit length per subspace) to avoid the all-zero
//! solution.
//!
//! ```no_run
//! use pkge_core::{dataset::Dataset, trainer::{fit, TrainConfig}};
//!
//! let data = Dataset::load("train.txt", "valid.txt", "test.txt")?;
//! let config = TrainConfig { learning_rate: 0.001, ..TrainConfig::default() };
//! let outcome = fit(&config, &data, |rec| eprintln!("{rec:?}"))?;
//! # Ok::<(), pkge_core::Error>(())
//! ```

pub mod checkpoint;
pub mod dataset;
pub mod embeddings;
mod error;
pub mod eval;
pub mod linalg;
pub mod optim;
pub mod pca;
pub mod procrustes;
pub mod synthetic;
pub mod trainer;

pub use checkpoint::Checkpoint;
pub use dataset::{Dataset, DatasetStats, FilterIndex, RelationGroup, Triple, TripleStore};
pub use embeddings::EmbeddingTable;
pub use error::{Error, Result};
pub use eval::{evaluate, EvalReport, ScoreKind};
pub use linalg::{DenseMatrix, SvdResult};
pub use procrustes::{solve_opa, RelationSet};
pub use trainer::{fit, EpochRecord, FitOutcome, TrainConfig, TrainState};
