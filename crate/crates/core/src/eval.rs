//! Filtered link-prediction evaluation (MRR, Hits@{1,3,10}) and throughput.
//!
//! A triple is scored as `−Σ_j dist(h_j R_{r,j}, t_j)`, where `dist` is the
//! squared Euclidean distance by default or, optionally, the plain distance.
//! Every query ranks the answer against all `N` entities in the queried
//! slot after removing the other known-true answers; ties count half.

use std::collections::HashSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{FilterIndex, Triple};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::linalg::{rotate_row_into, squared_distance};
use crate::procrustes::RelationSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    /// `Σ_j ‖h_j R − t_j‖²`, the same quantity the gradients minimise.
    #[default]
    Squared,
    /// `Σ_j ‖h_j R − t_j‖`.
    Unsquared,
}

impl ScoreKind {
    #[inline]
    fn apply(self, sq: f64) -> f64 {
        match self {
            ScoreKind::Squared => sq,
            ScoreKind::Unsquared => sq.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Predict the head of `(?, r, t)`.
    Head,
    /// Predict the tail of `(h, r, ?)`.
    Tail,
}

/// Sum over subspaces of the per-block distance between `h_j R_{r,j}` and `t_j`.
pub fn triple_distance(
    table: &EmbeddingTable,
    relations: &RelationSet,
    t: Triple,
    kind: ScoreKind,
) -> f64 {
    let mut buf = vec![0.0; table.d_s()];
    let mut acc = 0.0;
    for j in 0..table.n_subspaces() {
        rotate_row_into(
            table.sub_vector(t.head, j),
            relations.get(t.relation, j),
            &mut buf,
        );
        acc += kind.apply(squared_distance(&buf, table.sub_vector(t.tail, j)));
    }
    acc
}

/// Plausibility of a triple; higher is better, 0 is a perfect fit.
pub fn score(
    table: &EmbeddingTable,
    relations: &RelationSet,
    head: usize,
    relation: usize,
    tail: usize,
    kind: ScoreKind,
) -> f64 {
    -triple_distance(table, relations, Triple::new(head, relation, tail), kind)
}

/// `1 + |strictly better| + |ties| / 2` over candidates that are neither
/// the answer nor in `known`.
pub fn rank_from_distances(
    distances: &[f64],
    answer: usize,
    known: Option<&HashSet<usize>>,
) -> f64 {
    let target = distances[answer];
    let mut better = 0usize;
    let mut ties = 0usize;
    for (e, &d) in distances.iter().enumerate() {
        if e == answer || known.is_some_and(|k| k.contains(&e)) {
            continue;
        }
        if d < target {
            better += 1;
        } else if d == target {
            ties += 1;
        }
    }
    1.0 + better as f64 + ties as f64 / 2.0
}

/// Filtered rank of the true answer of one query.
pub fn rank_query(
    table: &EmbeddingTable,
    relations: &RelationSet,
    query: Triple,
    direction: Direction,
    filter: &FilterIndex,
    kind: ScoreKind,
) -> f64 {
    let n = table.n_entities();
    match direction {
        Direction::Tail => {
            let distances: Vec<f64> = (0..n)
                .map(|e| {
                    triple_distance(
                        table,
                        relations,
                        Triple::new(query.head, query.relation, e),
                        kind,
                    )
                })
                .collect();
            rank_from_distances(
                &distances,
                query.tail,
                filter.tails(query.head, query.relation),
            )
        }
        Direction::Head => {
            let distances: Vec<f64> = (0..n)
                .map(|e| {
                    triple_distance(
                        table,
                        relations,
                        Triple::new(e, query.relation, query.tail),
                        kind,
                    )
                })
                .collect();
            rank_from_distances(
                &distances,
                query.head,
                filter.heads(query.relation, query.tail),
            )
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
    pub n_queries: usize,
    pub samples_per_sec: f64,
    pub wall_clock_s: f64,
    /// Which distance the ranking used.
    pub score: ScoreKind,
}

impl EvalReport {
    /// Aggregates ranks; throughput fields are left at zero.
    pub fn from_ranks(ranks: &[f64], score: ScoreKind) -> Result<Self> {
        if ranks.is_empty() {
            return Err(Error::Config(
                "cannot summarise an empty set of ranks".into(),
            ));
        }
        let n = ranks.len() as f64;
        let hits = |k: f64| ranks.iter().filter(|&&r| r <= k).count() as f64 / n;
        Ok(Self {
            mrr: ranks.iter().map(|r| 1.0 / r).sum::<f64>() / n,
            hits1: hits(1.0),
            hits3: hits(3.0),
            hits10: hits(10.0),
            n_queries: ranks.len(),
            samples_per_sec: 0.0,
            wall_clock_s: 0.0,
            score,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serialises")
    }
}

/// Filtered ranks of every query in `split`: for triple `i`, entry `2i` is
/// the head query and `2i + 1` the tail query.
///
/// Produces exactly the ranks [`rank_query`] would, but rotates each
/// candidate block once per relation instead of once per query.
pub fn split_ranks(
    table: &EmbeddingTable,
    relations: &RelationSet,
    split: &[Triple],
    filter: &FilterIndex,
    kind: ScoreKind,
) -> Vec<f64> {
    let n = table.n_entities();
    let s = table.n_subspaces();
    let d_s = table.d_s();

    let tail_ranks: Vec<f64> = split
        .par_iter()
        .map(|q| {
            let mut rotated = vec![0.0; s * d_s];
            for j in 0..s {
                rotate_row_into(
                    table.sub_vector(q.head, j),
                    relations.get(q.relation, j),
                    &mut rotated[j * d_s..(j + 1) * d_s],
                );
            }
            let distances: Vec<f64> = (0..n)
                .map(|e| {
                    let mut acc = 0.0;
                    for j in 0..s {
                        acc += kind.apply(squared_distance(
                            &rotated[j * d_s..(j + 1) * d_s],
                            table.sub_vector(e, j),
                        ));
                    }
                    acc
                })
                .collect();
            rank_from_distances(&distances, q.tail, filter.tails(q.head, q.relation))
        })
        .collect();

    let mut head_ranks = vec![0.0; split.len()];
    let mut relations_used: Vec<usize> = split.iter().map(|q| q.relation).collect();
    relations_used.sort_unstable();
    relations_used.dedup();
    for r in relations_used {
        let queries: Vec<usize> = (0..split.len())
            .filter(|&i| split[i].relation == r)
            .collect();
        // every entity's sub-vectors rotated by this relation, one block per subspace
        let rotated: Vec<Vec<f64>> = (0..s)
            .into_par_iter()
            .map(|j| {
                let rel = relations.get(r, j);
                let mut out = vec![0.0; n * d_s];
                for e in 0..n {
                    rotate_row_into(
                        table.sub_vector(e, j),
                        rel,
                        &mut out[e * d_s..(e + 1) * d_s],
                    );
                }
                out
            })
            .collect();
        let ranks: Vec<f64> = queries
            .par_iter()
            .map(|&i| {
                let q = split[i];
                let distances: Vec<f64> = (0..n)
                    .map(|e| {
                        let mut acc = 0.0;
                        for (j, block) in rotated.iter().enumerate() {
                            acc += kind.apply(squared_distance(
                                &block[e * d_s..(e + 1) * d_s],
                                table.sub_vector(q.tail, j),
                            ));
                        }
                        acc
                    })
                    .collect();
                rank_from_distances(&distances, q.head, filter.heads(q.relation, q.tail))
            })
            .collect();
        for (&i, rank) in queries.iter().zip(ranks) {
            head_ranks[i] = rank;
        }
    }

    head_ranks
        .into_iter()
        .zip(tail_ranks)
        .flat_map(|(h, t)| [h, t])
        .collect()
}

/// Head and tail prediction for every triple of `split`.
pub fn evaluate(
    table: &EmbeddingTable,
    relations: &RelationSet,
    split: &[Triple],
    filter: &FilterIndex,
    kind: ScoreKind,
) -> Result<EvalReport> {
    if split.is_empty() {
        return Err(Error::Config("evaluation split is empty".into()));
    }
    let started = Instant::now();
    let ranks = split_ranks(table, relations, split, filter, kind);
    let secs = started.elapsed().as_secs_f64();
    let mut report = EvalReport::from_ranks(&ranks, kind)?;
    report.wall_clock_s = secs;
    report.samples_per_sec = ranks.len() as f64 / secs.max(f64::MIN_POSITIVE);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;

    #[test]
    fn rotated_head_equal_to_tail_scores_zero() {
        let table = EmbeddingTable::from_row_major(2, 2, 2, &[1.0, 0.0, 0.0, 1.0]).unwrap();
        let mut rels = RelationSet::identity(1, 1, 2);
        rels.set(
            0,
            0,
            DenseMatrix::from_rows(&[[0.0, 1.0], [-1.0, 0.0]]).unwrap(),
        );
        assert_eq!(score(&table, &rels, 0, 0, 1, ScoreKind::Squared), 0.0);
    }

    #[test]
    fn hand_computed_score() {
        let table = EmbeddingTable::from_row_major(2, 2, 2, &[1.0, 0.0, 0.0, 1.0]).unwrap();
        let rels = RelationSet::identity(1, 1, 2);
        assert_eq!(score(&table, &rels, 0, 0, 1, ScoreKind::Squared), -2.0);
        assert!((score(&table, &rels, 0, 0, 1, ScoreKind::Unsquared) + 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn unique_best_is_rank_one_and_full_tie_is_midpoint() {
        assert_eq!(rank_from_distances(&[0.5, 0.0, 2.0, 3.0], 1, None), 1.0);
        assert_eq!(rank_from_distances(&[1.0; 7], 3, None), 4.0);
    }

    #[test]
    fn filtered_candidates_are_skipped() {
        let known: HashSet<usize> = [0, 2].into_iter().collect();
        // answer 3 would be rank 3 raw, rank 1 once 0 and 2 are filtered
        assert_eq!(rank_from_distances(&[0.1, 5.0, 0.2, 0.3], 3, None), 3.0);
        assert_eq!(
            rank_from_distances(&[0.1, 5.0, 0.2, 0.3], 3, Some(&known)),
            1.0
        );
    }

    #[test]
    fn report_from_ranks() {
        let r = EvalReport::from_ranks(&[1.0, 4.0], ScoreKind::Squared).unwrap();
        assert!((r.mrr - 0.625).abs() < 1e-15);
        assert_eq!(r.hits1, 0.5);
        assert_eq!(r.hits3, 0.5);
        assert_eq!(r.hits10, 1.0);
        let perfect = EvalReport::from_ranks(&[1.0, 1.0], ScoreKind::Squared).unwrap();
        assert_eq!(
            (perfect.mrr, perfect.hits1, perfect.hits10),
            (1.0, 1.0, 1.0)
        );
        assert!(EvalReport::from_ranks(&[], ScoreKind::Squared).is_err());
    }

    #[test]
    fn report_json_keys() {
        let r = EvalReport::from_ranks(&[1.0], ScoreKind::Squared).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        for key in [
            "mrr",
            "hits1",
            "hits3",
            "hits10",
            "n_queries",
            "samples_per_sec",
            "wall_clock_s",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["score"], "squared");
    }

    #[test]
    fn empty_split_is_config_error() {
        let table = EmbeddingTable::zeros(2, 2, 2).unwrap();
        let rels = RelationSet::identity(1, 1, 2);
        assert!(matches!(
            evaluate(
                &table,
                &rels,
                &[],
                &FilterIndex::empty(),
                ScoreKind::Squared
            ),
            Err(Error::Config(_))
        ));
    }
}
