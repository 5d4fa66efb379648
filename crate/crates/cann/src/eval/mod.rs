//! Scoring rules, baseline and improvement reporting, balance reports,
//! permutation feature importance, and partial dependence.

pub mod importance;
pub mod pdp;
pub mod plot;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::dataset::VehicleGroups;
use crate::distributions::{self, HeadKind, HistoryState};
use crate::error::{CannError, Result};
use crate::features::io::FeatureTable;
use crate::glm::GlmFit;
use crate::model::TrainedCann;
use crate::special::softplus;

pub use importance::{permutation_importance, ImportanceResult};
pub use pdp::{partial_dependence, PdpGrid, PdpResult};

/// A scoreable model handle: the homogeneous baseline, a log-linear fit, or
/// a trained combined model. Exposes the per-contract cross-sectional mean;
/// history corrections are applied by the scoring pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Model {
    Baseline { mu: f64 },
    Glm(GlmFit),
    Cann(Box<TrainedCann>),
}

impl Model {
    pub fn baseline(mu: f64) -> Result<Model> {
        if !mu.is_finite() || mu <= 0.0 {
            return Err(CannError::domain(format!(
                "baseline mean must be finite and > 0, got {mu}"
            )));
        }
        Ok(Model::Baseline { mu })
    }

    pub fn cann(trained: TrainedCann) -> Result<Model> {
        let n_trad = trained.lin_names.len() - 1;
        if trained.mlp_names.len() < n_trad
            || trained.mlp_names[..n_trad] != trained.lin_names[1..]
        {
            return Err(CannError::shape(
                "network input columns must start with the linear-part covariates",
            ));
        }
        Ok(Model::Cann(Box::new(trained)))
    }

    pub fn head(&self) -> HeadKind {
        match self {
            Model::Baseline { .. } => HeadKind::Poisson,
            Model::Glm(fit) => fit.family,
            Model::Cann(t) => t.head,
        }
    }

    pub fn phi(&self) -> Option<f64> {
        match self {
            Model::Baseline { .. } => None,
            Model::Glm(fit) => fit.phi,
            Model::Cann(t) => t.params.phi(),
        }
    }

    /// Input column names (no intercept).
    pub fn input_names(&self) -> Vec<String> {
        match self {
            Model::Baseline { .. } => Vec::new(),
            Model::Glm(fit) => fit.names[1..].to_vec(),
            Model::Cann(t) => t.mlp_names.clone(),
        }
    }

    /// Cross-sectional mean per row of the input matrix.
    pub fn base_mean(&self, x: &Array2<f64>) -> Result<Array1<f64>> {
        match self {
            Model::Baseline { mu } => Ok(Array1::from_elem(x.nrows(), *mu)),
            Model::Glm(fit) => {
                if x.ncols() + 1 != fit.beta.len() {
                    return Err(CannError::shape(format!(
                        "{} input columns for {} coefficients",
                        x.ncols(),
                        fit.beta.len()
                    )));
                }
                let slope = Array1::from_vec(fit.beta[1..].to_vec());
                Ok(x.dot(&slope).mapv(|eta| (eta + fit.beta[0]).exp()))
            }
            Model::Cann(t) => {
                let n_trad = t.lin_names.len() - 1;
                if x.ncols() != t.mlp_names.len() {
                    return Err(CannError::shape(format!(
                        "{} input columns, network expects {}",
                        x.ncols(),
                        t.mlp_names.len()
                    )));
                }
                let slope = Array1::from_vec(t.params.beta.as_slice().unwrap()[1..].to_vec());
                let lin = x.slice(ndarray::s![.., ..n_trad]).dot(&slope) + t.params.beta[0];
                let net = t.params.theta.forward_eval(x)?;
                Ok((&lin + &net).mapv(softplus))
            }
        }
    }
}

/// One split arranged for scoring a particular model: the model's input
/// columns, the responses, and the vehicle grouping.
#[derive(Debug, Clone)]
pub struct EvalData {
    pub names: Vec<String>,
    pub x: Array2<f64>,
    pub y: Vec<u64>,
    pub groups: VehicleGroups,
}

impl EvalData {
    /// Select the model's input columns by name from a feature table.
    pub fn for_model(model: &Model, table: &FeatureTable) -> Result<EvalData> {
        let names = model.input_names();
        let n = table.bundle.x.nrows();
        let mut x = Array2::zeros((n, names.len()));
        for (j, name) in names.iter().enumerate() {
            let src = table
                .bundle
                .names
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| {
                    CannError::data(format!("feature file lacks model input '{name}'"))
                })?;
            x.column_mut(j).assign(&table.bundle.x.column(src));
        }
        Ok(EvalData {
            names,
            x,
            y: table.y.clone(),
            groups: VehicleGroups::from_ids(&table.vins, &table.contract_index)?,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }
}

/// Per-row predictive means and log-PMF values; histories are rebuilt inside
/// the split from the model's own means.
pub fn predictive(model: &Model, data: &EvalData) -> Result<(Vec<f64>, Vec<f64>)> {
    if data.names != model.input_names() {
        return Err(CannError::shape(
            "evaluation data columns do not match the model's inputs",
        ));
    }
    let base = model.base_mean(&data.x)?;
    let head = distributions::head(model.head());
    let phi = model.phi();
    let n = data.n_rows();
    let mut mu_hat = Vec::with_capacity(n);
    let mut log_pmf = Vec::with_capacity(n);
    if head.uses_history() {
        let sy = data.groups.sigma_y(&data.y);
        let sm = data.groups.sigma_mu(base.as_slice().unwrap());
        for i in 0..n {
            let h = HistoryState {
                sum_past_claims: sy[i],
                sum_past_mu: sm[i],
            };
            mu_hat.push(head.predictive_mean(base[i], phi, &h)?);
            log_pmf.push(head.log_pmf(data.y[i], base[i], phi, &h)?);
        }
    } else {
        for i in 0..n {
            mu_hat.push(base[i]);
            log_pmf.push(head.log_pmf(data.y[i], base[i], phi, &HistoryState::EMPTY)?);
        }
    }
    Ok((mu_hat, log_pmf))
}

/// Average Poisson deviance, logarithmic score, and squared error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelScores {
    pub deviance: f64,
    pub log_score: f64,
    pub squared_error: f64,
}

/// Per-contract Poisson deviance, with y·ln(y/μ̂) taken as 0 at y = 0.
pub fn poisson_deviance(y: u64, mu_hat: f64) -> f64 {
    let yf = y as f64;
    let entropy = if y == 0 { 0.0 } else { yf * (yf / mu_hat).ln() };
    2.0 * (entropy - (yf - mu_hat))
}

pub fn score(model: &Model, data: &EvalData) -> Result<ModelScores> {
    if data.n_rows() == 0 {
        return Err(CannError::data("cannot score an empty split"));
    }
    let (mu_hat, log_pmf) = predictive(model, data)?;
    if mu_hat.iter().any(|&m| !m.is_finite() || m <= 0.0) {
        return Err(CannError::domain("predictive mean must be positive"));
    }
    let n = data.n_rows() as f64;
    let mut dev = 0.0;
    let mut ls = 0.0;
    let mut se = 0.0;
    for (i, &yi) in data.y.iter().enumerate() {
        dev += poisson_deviance(yi, mu_hat[i]);
        ls -= log_pmf[i];
        let diff = yi as f64 - mu_hat[i];
        se += diff * diff;
    }
    Ok(ModelScores {
        deviance: dev / n,
        log_score: ls / n,
        squared_error: se / n,
    })
}

/// Scores next to a baseline, with percentage improvement per rule:
/// (1 − model/baseline) × 100.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScoreReport {
    pub scores: ModelScores,
    pub baseline: ModelScores,
    pub improvement: ModelScores,
}

pub fn score_with_baseline(
    model: &Model,
    data: &EvalData,
    baseline: &ModelScores,
) -> Result<ScoreReport> {
    let scores = score(model, data)?;
    Ok(ScoreReport {
        scores,
        baseline: *baseline,
        improvement: ModelScores {
            deviance: (1.0 - scores.deviance / baseline.deviance) * 100.0,
            log_score: (1.0 - scores.log_score / baseline.log_score) * 100.0,
            squared_error: (1.0 - scores.squared_error / baseline.squared_error) * 100.0,
        },
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BalanceRow {
    pub split: String,
    pub sum_predicted: f64,
    pub sum_actual: f64,
    /// sum_predicted / sum_actual.
    pub ratio: f64,
}

/// Sum of predictive means vs. sum of observed claims per split.
pub fn balance_report(model: &Model, splits: &[(&str, &EvalData)]) -> Result<Vec<BalanceRow>> {
    let mut rows = Vec::with_capacity(splits.len());
    for (name, data) in splits {
        if data.n_rows() == 0 {
            return Err(CannError::data(format!("empty split '{name}'")));
        }
        let (mu_hat, _) = predictive(model, data)?;
        let sum_predicted: f64 = mu_hat.iter().sum();
        let sum_actual: f64 = data.y.iter().sum::<u64>() as f64;
        rows.push(BalanceRow {
            split: name.to_string(),
            sum_predicted,
            sum_actual,
            ratio: sum_predicted / sum_actual,
        });
    }
    Ok(rows)
}

/// Homogeneous baseline mean: the average claim count of the learning set.
pub fn baseline_mean(learning_y: &[u64]) -> Result<f64> {
    if learning_y.is_empty() {
        return Err(CannError::data("empty learning set for the baseline"));
    }
    Ok(learning_y.iter().sum::<u64>() as f64 / learning_y.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn constant_data(y: Vec<u64>) -> EvalData {
        let n = y.len();
        EvalData {
            names: Vec::new(),
            x: Array2::zeros((n, 0)),
            y,
            groups: VehicleGroups::singletons(n),
        }
    }

    #[test]
    fn perfect_predictions_have_zero_deviance() {
        let data = constant_data(vec![1, 1, 1, 1]);
        let model = Model::baseline(1.0).unwrap();
        let s = score(&model, &data).unwrap();
        assert_abs_diff_eq!(s.deviance, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.squared_error, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn baseline_mean_is_learning_average() {
        assert_abs_diff_eq!(
            baseline_mean(&[0, 1, 0, 2]).unwrap(),
            0.75,
            epsilon = 1e-15
        );
        assert!(baseline_mean(&[]).is_err());
    }

    #[test]
    fn constant_model_on_own_mean_balances_exactly() {
        let y = vec![0u64, 1, 0, 2, 1, 0];
        let mu = baseline_mean(&y).unwrap();
        let data = constant_data(y);
        let model = Model::baseline(mu).unwrap();
        let rows = balance_report(&model, &[("learning", &data)]).unwrap();
        assert_relative_eq!(rows[0].ratio, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn scoring_rules_are_minimized_at_the_split_mean() {
        let y = vec![0u64, 2, 1, 0, 3, 1, 0, 0, 1, 2];
        let data = constant_data(y.clone());
        let mean = baseline_mean(&y).unwrap();
        let at = |mu: f64| score(&Model::baseline(mu).unwrap(), &data).unwrap();
        let best = at(mean);
        for mu in [0.3, 0.6, 0.9, 1.2, 1.5, 2.0] {
            let s = at(mu);
            if (mu - mean).abs() > 1e-9 {
                assert!(s.deviance > best.deviance, "deviance not minimal at mean");
                assert!(s.log_score > best.log_score, "log score not minimal at mean");
                assert!(
                    s.squared_error > best.squared_error,
                    "squared error not minimal at mean"
                );
            }
        }
    }

    #[test]
    fn poisson_log_score_is_half_deviance_plus_data_constant() {
        let y = vec![0u64, 2, 1, 0, 3, 1, 5];
        let data = constant_data(y.clone());
        // The constant depends only on the data.
        let constant: f64 = y
            .iter()
            .map(|&yi| {
                let yf = yi as f64;
                let ylny = if yi == 0 { 0.0 } else { yf * yf.ln() };
                yf - ylny + crate::special::ln_gamma(yf + 1.0).unwrap()
            })
            .sum::<f64>()
            / y.len() as f64;
        for mu in [0.4, 0.9, 1.7] {
            let s = score(&Model::baseline(mu).unwrap(), &data).unwrap();
            assert_abs_diff_eq!(s.log_score, s.deviance / 2.0 + constant, epsilon = 1e-12);
        }
    }

    #[test]
    fn report_format_round_trips_published_layout() {
        // Report rows print with the same shape as published summaries.
        let baseline = ModelScores {
            deviance: 0.3682,
            log_score: 0.2470,
            squared_error: 0.0697,
        };
        let line = format!(
            "{:.4},{:.4},{:.4}",
            baseline.deviance, baseline.log_score, baseline.squared_error
        );
        assert_eq!(line, "0.3682,0.2470,0.0697");
        let row = BalanceRow {
            split: "learning".into(),
            sum_predicted: 6618.0,
            sum_actual: 6184.0,
            ratio: 6618.0 / 6184.0,
        };
        assert_eq!(format!("{:.1} %", row.ratio * 100.0), "107.0 %");
    }

    #[test]
    fn improvement_is_relative_to_baseline() {
        let data = constant_data(vec![0, 1, 0, 2, 1]);
        let base_scores = score(&Model::baseline(0.8).unwrap(), &data).unwrap();
        let report =
            score_with_baseline(&Model::baseline(0.8).unwrap(), &data, &base_scores).unwrap();
        assert_abs_diff_eq!(report.improvement.deviance, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(report.improvement.log_score, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_split_is_rejected() {
        let data = constant_data(vec![]);
        assert!(score(&Model::baseline(1.0).unwrap(), &data).is_err());
    }
}
