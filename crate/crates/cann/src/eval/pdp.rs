//! Partial dependence: sweep one input over a grid, overwrite the column
//! across the split, and average the model's predictions at each grid value.

use serde::{Deserialize, Serialize};

use crate::error::{CannError, Result};
use crate::eval::{predictive, EvalData, Model};

/// Grid specification: an explicit range or quantile-bounded equal spacing
/// (1st to 99th percentile by default).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PdpGrid {
    Explicit { min: f64, max: f64, points: usize },
    Quantile { points: usize },
}

impl Default for PdpGrid {
    fn default() -> Self {
        PdpGrid::Quantile { points: 50 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PdpResult {
    pub input: String,
    pub grid: Vec<f64>,
    pub average_prediction: Vec<f64>,
    /// Histogram of the observed input: bin edges (len = bins + 1) and
    /// counts.
    pub histogram_edges: Vec<f64>,
    pub histogram_counts: Vec<usize>,
}

const HISTOGRAM_BINS: usize = 20;

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

pub fn partial_dependence(
    model: &Model,
    data: &EvalData,
    input: &str,
    grid: PdpGrid,
) -> Result<PdpResult> {
    if data.n_rows() == 0 {
        return Err(CannError::data("cannot sweep an empty split"));
    }
    let col = data
        .names
        .iter()
        .position(|n| n == input)
        .ok_or_else(|| CannError::data(format!("unknown input '{input}'")))?;

    let mut observed: Vec<f64> = data.x.column(col).to_vec();
    observed.sort_by(|a, b| a.partial_cmp(b).expect("finite inputs"));
    let (min, max, points) = match grid {
        PdpGrid::Explicit { min, max, points } => (min, max, points),
        PdpGrid::Quantile { points } => {
            (quantile(&observed, 0.01), quantile(&observed, 0.99), points)
        }
    };
    if points == 0 {
        return Err(CannError::config("grid needs at least one point"));
    }
    let grid_values: Vec<f64> = if points == 1 {
        vec![0.5 * (min + max)]
    } else {
        (0..points)
            .map(|k| min + (max - min) * k as f64 / (points - 1) as f64)
            .collect()
    };

    let mut average_prediction = Vec::with_capacity(grid_values.len());
    let mut sweep = data.clone();
    for &v in &grid_values {
        sweep.x.column_mut(col).fill(v);
        let (mu_hat, _) = predictive(model, &sweep)?;
        average_prediction.push(mu_hat.iter().sum::<f64>() / mu_hat.len() as f64);
    }

    let lo = observed[0];
    let hi = *observed.last().expect("nonempty");
    let width = ((hi - lo) / HISTOGRAM_BINS as f64).max(f64::MIN_POSITIVE);
    let mut histogram_counts = vec![0usize; HISTOGRAM_BINS];
    for &v in &observed {
        let b = (((v - lo) / width).floor() as usize).min(HISTOGRAM_BINS - 1);
        histogram_counts[b] += 1;
    }
    let histogram_edges = (0..=HISTOGRAM_BINS)
        .map(|k| lo + width * k as f64)
        .collect();

    Ok(PdpResult {
        input: input.to_string(),
        grid: grid_values,
        average_prediction,
        histogram_edges,
        histogram_counts,
    })
}
