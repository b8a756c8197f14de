use std::time::Instant;

use super::{EpochRecord, TrainConfig, TrainState};
use crate::dataset::{build_filter, build_groups, Dataset};
use crate::error::{Error, Result};
use crate::eval::evaluate;

#[derive(Debug, Clone)]
pub struct FitOutcome {
    /// Snapshot at the best validation MRR (or the final state when no
    /// validation ran). Its relations are re-solved from its entities.
    pub state: TrainState,
    pub history: Vec<EpochRecord>,
    /// Last epoch that was trained.
    pub stopped_at: usize,
    pub evaluations: usize,
}

/// Trains up to `config.max_epochs` epochs with validation-MRR early stopping.
///
/// From epoch `eval_every` on, validation MRR is measured every `eval_every`
/// epochs; training stops the first time it fails to strictly exceed the
/// best value so far. `on_epoch` sees every record as it is produced.
pub fn fit(
    config: &TrainConfig,
    data: &Dataset,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<FitOutcome> {
    config.validate()?;
    if data.store.valid.is_empty() {
        return Err(Error::Config("validation split is empty".into()));
    }
    if data.store.train.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }
    let train = &data.store.train;
    let groups = build_groups(&data.store);
    let filter = build_filter(&data.store);

    let mut state = TrainState::new(config, data.n_entities(), data.n_relations())?;
    state.refresh_relations(&groups)?;

    let mut best: Option<TrainState> = None;
    let mut history = Vec::new();
    let mut evaluations = 0;
    let mut stopped_at = 0;

    for epoch in 1..=config.max_epochs {
        let started = Instant::now();
        let loss = state.run_epoch(config, train, &groups)?;
        let secs = started.elapsed().as_secs_f64();
        stopped_at = epoch;

        let mut record = EpochRecord {
            epoch,
            loss,
            valid_mrr: None,
            wall_clock_ms: secs * 1e3,
            samples_per_sec: train.len() as f64 / secs.max(f64::MIN_POSITIVE),
        };

        let mut stop = false;
        if epoch >= config.eval_every && epoch % config.eval_every == 0 {
            state.refresh_relations(&groups)?;
            let report = evaluate(
                &state.entities,
                &state.relations,
                &data.store.valid,
                &filter,
                config.score,
            )?;
            evaluations += 1;
            record.valid_mrr = Some(report.mrr);
            let improved = state.best_valid_mrr.is_none_or(|b| report.mrr > b);
            if improved {
                state.best_valid_mrr = Some(report.mrr);
                state.best_epoch = epoch;
                best = Some(state.clone());
            } else {
                stop = true;
            }
        }
        on_epoch(&record);
        history.push(record);
        if stop {
            break;
        }
    }

    let state = match best {
        Some(b) => b,
        None => {
            state.refresh_relations(&groups)?;
            state
        }
    };
    Ok(FitOutcome {
        state,
        history,
        stopped_at,
        evaluations,
    })
}
