//! Grid search over (initial learning rate, plateau factor, dropout
//! probability), training one early-stopped model per combination and
//! ranking them by minimum validation loss.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::HeadKind;
use crate::error::{CannError, Result};
use crate::model::train::train_cann;
use crate::model::{ModelData, TrainConfig};
use crate::seeding;

const SALT_GRID: u64 = 0x6c;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lr_start: Vec<f64>,
    pub factor: Vec<f64>,
    pub dropout_p: Vec<f64>,
}

impl GridSpec {
    pub fn combinations(&self) -> Vec<(f64, f64, f64)> {
        let mut combos = Vec::new();
        for &lr in &self.lr_start {
            for &factor in &self.factor {
                for &p in &self.dropout_p {
                    combos.push((lr, factor, p));
                }
            }
        }
        combos
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub best_valid_loss: f64,
    pub best_epoch: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridCell {
    pub lr_start: f64,
    pub factor: f64,
    pub dropout_p: f64,
    /// The cell's outcome; a failed cell carries its error message and does
    /// not abort the sweep.
    pub result: std::result::Result<CellResult, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridOutcome {
    pub head: HeadKind,
    pub cells: Vec<GridCell>,
    /// Index of the winning cell among `cells`, when any succeeded. Ties
    /// break by fewer epochs, then by grid order.
    pub best_cell: Option<usize>,
}

impl GridOutcome {
    pub fn best_config(&self, base: &TrainConfig) -> Option<TrainConfig> {
        self.best_cell.map(|i| {
            let cell = &self.cells[i];
            TrainConfig {
                lr_start: cell.lr_start,
                factor: cell.factor,
                dropout_p: cell.dropout_p,
                ..base.clone()
            }
        })
    }
}

/// Train one model per grid combination (early stopping always on) and rank
/// by minimum validation loss. Duplicate combinations share the sub-seed of
/// their first occurrence, so listing a combination twice reproduces its
/// result exactly. `workers` bounds the number of concurrently trained
/// cells.
pub fn grid_search(
    train: &ModelData,
    valid: &ModelData,
    base: &TrainConfig,
    grid: &GridSpec,
    epochs: usize,
    workers: usize,
) -> Result<GridOutcome> {
    let combos = grid.combinations();
    if combos.is_empty() {
        return Err(CannError::config("empty hyperparameter grid"));
    }

    // Sub-seed by the first occurrence of each combination.
    let seeds: Vec<u64> = combos
        .iter()
        .enumerate()
        .map(|(i, combo)| {
            let canonical = combos
                .iter()
                .position(|c| {
                    c.0.to_bits() == combo.0.to_bits()
                        && c.1.to_bits() == combo.1.to_bits()
                        && c.2.to_bits() == combo.2.to_bits()
                })
                .unwrap_or(i);
            seeding::mix2(base.seed, SALT_GRID, canonical as u64)
        })
        .collect();

    let run_cell = |(idx, &(lr, factor, p)): (usize, &(f64, f64, f64))| -> GridCell {
        let cfg = TrainConfig {
            lr_start: lr,
            factor,
            dropout_p: p,
            max_epochs: epochs,
            early_stopping: true,
            seed: seeds[idx],
            record_epoch_state: false,
            ..base.clone()
        };
        let result = train_cann(train, valid, &cfg)
            .map(|t| {
                let m = t.trace_minimum();
                CellResult {
                    best_valid_loss: m.valid_loss,
                    best_epoch: m.epoch,
                }
            })
            .map_err(|e| e.to_string());
        GridCell {
            lr_start: lr,
            factor,
            dropout_p: p,
            result,
        }
    };

    let cells: Vec<GridCell> = if workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| CannError::config(e.to_string()))?;
        pool.install(|| combos.par_iter().enumerate().map(run_cell).collect())
    } else {
        combos.iter().enumerate().map(run_cell).collect()
    };

    let best_cell = cells
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.result.as_ref().ok().map(|r| (i, r)))
        .min_by(|(ia, a), (ib, b)| {
            a.best_valid_loss
                .partial_cmp(&b.best_valid_loss)
                .expect("finite losses")
                .then(a.best_epoch.cmp(&b.best_epoch))
                .then(ia.cmp(ib))
        })
        .map(|(i, _)| i);

    Ok(GridOutcome {
        head: base.head,
        cells,
        best_cell,
    })
}

/// Render one or more per-head outcomes over the same grid as a delimited
/// table: hyperparameter columns, then per-head validation loss and epoch
/// columns.
pub fn format_table(outcomes: &[&GridOutcome]) -> Result<String> {
    let first = outcomes
        .first()
        .ok_or_else(|| CannError::config("no grid outcomes to format"))?;
    for o in outcomes {
        if o.cells.len() != first.cells.len() {
            return Err(CannError::shape("grid outcomes cover different grids"));
        }
    }
    let mut header = vec!["lr_start".to_string(), "factor".into(), "p".into()];
    for o in outcomes {
        header.push(format!("valid_loss_{}", o.head));
        header.push(format!("epochs_{}", o.head));
    }
    let mut out = header.join(",") + "\n";
    for row in 0..first.cells.len() {
        let c0 = &first.cells[row];
        let mut fields = vec![
            c0.lr_start.to_string(),
            c0.factor.to_string(),
            c0.dropout_p.to_string(),
        ];
        for o in outcomes {
            match &o.cells[row].result {
                Ok(r) => {
                    fields.push(format!("{:.6}", r.best_valid_loss));
                    fields.push(r.best_epoch.to_string());
                }
                Err(_) => {
                    fields.push("failed".into());
                    fields.push("failed".into());
                }
            }
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    Ok(out)
}
