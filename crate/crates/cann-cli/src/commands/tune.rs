//! `tune`: grid search over (lr_start, factor, dropout_p) per head, with a
//! merged per-head table and the winning combination per head.

use anyhow::Result;
use cann::distributions::HeadKind;
use cann::model::{format_table, grid_search, GridSpec, ModelData};
use serde::Serialize;

use crate::artifacts::{ensure_out_dir, load_features, write_json};
use crate::config::RunConfig;

#[derive(Serialize)]
struct BestCell {
    head: String,
    lr_start: f64,
    factor: f64,
    dropout_p: f64,
    valid_loss: f64,
    epochs: usize,
}

pub fn run(cfg: &RunConfig) -> Result<String> {
    ensure_out_dir(&cfg.out)?;
    let train_table = load_features(&cfg.out, "train")?;
    let valid_table = load_features(&cfg.out, "valid")?;
    let train = ModelData::from_table(&train_table, true)?;
    let valid = ModelData::from_table(&valid_table, true)?;

    let grid = GridSpec {
        lr_start: cfg.tune.lr_start.clone(),
        factor: cfg.tune.factor.clone(),
        dropout_p: cfg.tune.dropout_p.clone(),
    };
    let heads: Vec<HeadKind> = cfg
        .tune
        .heads
        .iter()
        .map(|h| h.parse().map_err(|e| anyhow::anyhow!("{e}")))
        .collect::<Result<_>>()?;

    let mut outcomes = Vec::new();
    let mut best = Vec::new();
    for head in heads {
        let base = cfg.train_config(head);
        let outcome = grid_search(
            &train,
            &valid,
            &base,
            &grid,
            cfg.tune.epochs,
            cfg.workers,
        )?;
        if let Some(i) = outcome.best_cell {
            let cell = &outcome.cells[i];
            let result = cell.result.as_ref().expect("winning cell succeeded");
            best.push(BestCell {
                head: head.to_string(),
                lr_start: cell.lr_start,
                factor: cell.factor,
                dropout_p: cell.dropout_p,
                valid_loss: result.best_valid_loss,
                epochs: result.best_epoch,
            });
        }
        outcomes.push(outcome);
    }

    let refs: Vec<&cann::model::GridOutcome> = outcomes.iter().collect();
    let table = format_table(&refs)?;
    let table_path = cfg.out.join("tuning.csv");
    std::fs::write(&table_path, &table)?;
    write_json(&cfg.out.join("tuning_best.json"), &best)?;

    Ok(format!(
        "tune: {} combinations x {} heads, {} epoch budget -> {}",
        grid.combinations().len(),
        outcomes.len(),
        cfg.tune.epochs,
        table_path.display()
    ))
}
